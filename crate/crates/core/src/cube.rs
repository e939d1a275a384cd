//! The shared estimator cube: `2^c x r x 2^u` bit-packed timestamp vectors
//! on one base clock. Scanning stamps `r` counters per observed pair, a
//! tick advances the clock and maintains two blocks per vector, and at a
//! slice boundary the cube can name its candidate super points, rebuild
//! their addresses, and estimate their cardinalities with the shared-load
//! bias removed.
//!
//! Phase contract: while a slice is open only scans run; maintenance and
//! queries run exclusively at slice boundaries. The `&mut`/`&` split on
//! the methods enforces this at compile time. Scans fan out over frames
//! (disjoint storage), so parallel scanning needs no shared-cell writes,
//! and every floating-point result is derived from integer aggregates, so
//! parallel runs are bit-reproducible.

use std::io::{Read, Write};

use crate::at::{self, AtClock};
use crate::atv::{BaseClock, BlockLayout};
use crate::error::{Error, Result};
use crate::rrh::{Mangler, RrhParams};
use crate::store::{self, PackedStore};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Cube-level configuration beyond the hash parameters.
#[derive(Clone, Copy, Debug)]
pub struct CubeConfig {
    /// Counters per vector.
    pub g: usize,
    /// Window capacity in slices.
    pub k: u32,
    /// Super point threshold.
    pub theta: f64,
    /// Per-frame cap on candidate column tuples.
    pub candidate_cap: u64,
}

/// One detected host.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuperPointReport {
    pub ip: u32,
    /// Estimated cardinality; `f64::INFINITY` when the host's counters were
    /// saturated (at or above capacity).
    pub estimate: f64,
    pub window_end_slice: u64,
    pub k_prime: u32,
}

impl SuperPointReport {
    pub fn is_saturated(&self) -> bool {
        self.estimate.is_infinite()
    }
}

/// Active-count threshold above which a vector is considered super:
/// `g * (1 - e^(-theta/g))`.
pub fn super_weight_threshold(g: usize, theta: f64) -> f64 {
    let g = g as f64;
    g * (1.0 - (-theta / g).exp())
}

/// Cardinality estimate with the shared-load bias removed:
/// `-g * ln((g - nat) / (g * (1 - up)))`. With `up == 0` this is exactly
/// the plain linear estimate applied to `nat`.
pub fn bias_corrected_estimate(g: usize, nat: usize, up: f64) -> Result<f64> {
    const UP_EPSILON: f64 = 1e-9;
    if nat > g {
        return Err(Error::Parameter {
            name: "nat",
            value: nat as u64,
            constraint: "active count cannot exceed g",
        });
    }
    if nat == g {
        return Err(Error::Saturated { g });
    }
    if up >= 1.0 - UP_EPSILON {
        return Err(Error::CubeOverload { up });
    }
    let g = g as f64;
    Ok(-g * ((g - nat as f64) / (g * (1.0 - up))).ln())
}

pub struct AtvCube {
    params: RrhParams,
    layout: BlockLayout,
    clock: BaseClock,
    store: PackedStore,
    theta: f64,
    candidate_cap: u64,
    // buffers reused across scan_slice calls
    shards: Vec<FrameShard>,
    col_buf: Vec<u32>,
}

#[derive(Clone, Default)]
struct FrameShard {
    /// Column indices, one run of `rows` entries per touch.
    cols: Vec<u32>,
    /// (counter index, raw stamp) per touch.
    meta: Vec<(u32, u32)>,
}

impl AtvCube {
    pub fn new(params: RrhParams, cfg: CubeConfig) -> Result<Self> {
        if !cfg.theta.is_finite() || cfg.theta < 1.0 {
            return Err(Error::Parameter {
                name: "theta",
                value: cfg.theta as u64,
                constraint: "threshold must be finite and at least 1",
            });
        }
        let layout = BlockLayout::new(cfg.g, cfg.k)?;
        let n_vectors = (1usize << params.c()) * params.rows() as usize * (1usize << params.u());
        let store = PackedStore::new(n_vectors, cfg.g, cfg.k);
        let shards = vec![FrameShard::default(); 1usize << params.u()];
        Ok(Self {
            params,
            layout,
            clock: BaseClock::new(cfg.k)?,
            store,
            theta: cfg.theta,
            candidate_cap: cfg.candidate_cap,
            shards,
            col_buf: Vec::new(),
        })
    }

    #[inline]
    pub fn params(&self) -> &RrhParams {
        &self.params
    }

    #[inline]
    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    #[inline]
    pub fn clock(&self) -> &BaseClock {
        &self.clock
    }

    #[inline]
    pub fn g(&self) -> usize {
        self.layout.g()
    }

    #[inline]
    pub fn k(&self) -> u32 {
        self.layout.k()
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn current_slice(&self) -> u64 {
        self.clock.slice()
    }

    #[inline]
    fn n_cols(&self) -> usize {
        1 << self.params.c()
    }

    #[inline]
    fn n_frames(&self) -> usize {
        1 << self.params.u()
    }

    #[inline]
    pub fn n_vectors(&self) -> usize {
        self.store.n_vectors()
    }

    /// Frame-major vector index: frames are contiguous runs of storage.
    #[inline]
    fn vec_index(&self, x: usize, y: usize, z: usize) -> usize {
        ((z * self.params.rows() as usize + y) << self.params.c()) + x
    }

    pub fn super_threshold(&self) -> f64 {
        super_weight_threshold(self.g(), self.theta)
    }

    /// Raw stamp value for a touch of counter `idx` in the current slice.
    #[inline]
    fn stamp_raw(&self, idx: usize) -> u32 {
        let block = self.layout.block_of(idx);
        store::encode(self.layout.block_clock(block, self.clock.c0()), self.k())
    }

    /// Record one observed pair: stamps counter `bh(bip)` in each of the
    /// `r` vectors named by `aip`'s digest.
    pub fn scan_pair(&mut self, aip: u32, bip: u32) {
        let mut cols = std::mem::take(&mut self.col_buf);
        let frame = self.params.digest_into(aip, &mut cols);
        let idx = self.params.bh(bip, self.g());
        let raw = self.stamp_raw(idx);
        let width = self.store.width();
        for (y, &x) in cols.iter().enumerate() {
            let v = self.vec_index(x as usize, y, frame as usize);
            store::raw_set(self.store.vec_words_mut(v), width, idx, raw);
        }
        self.col_buf = cols;
    }

    /// Record a batch of pairs observed in the current slice. Touches are
    /// grouped by frame and frames are processed independently, in
    /// parallel when the `parallel` feature is on; the resulting state is
    /// identical to scanning the pairs one by one.
    pub fn scan_slice(&mut self, pairs: &[(u32, u32)]) {
        let rows = self.params.rows() as usize;
        let g = self.g();
        for shard in &mut self.shards {
            shard.cols.clear();
            shard.meta.clear();
        }
        let mut cols = std::mem::take(&mut self.col_buf);
        for &(aip, bip) in pairs {
            let frame = self.params.digest_into(aip, &mut cols) as usize;
            let idx = self.params.bh(bip, g);
            let raw = self.stamp_raw(idx);
            let shard = &mut self.shards[frame];
            shard.cols.extend_from_slice(&cols);
            shard.meta.push((idx as u32, raw));
        }
        self.col_buf = cols;

        let width = self.store.width();
        let wpv = self.store.words_per_vec();
        let c_bits = self.params.c();
        let frame_words = wpv * rows * self.n_cols();
        let shards = std::mem::take(&mut self.shards);
        {
            let words = self.store.words_mut();
            let apply = |(frame_words, shard): (&mut [u64], &FrameShard)| {
                for (e, &(idx, raw)) in shard.meta.iter().enumerate() {
                    for (y, &x) in shard.cols[e * rows..(e + 1) * rows].iter().enumerate() {
                        let local = ((y << c_bits) + x as usize) * wpv;
                        store::raw_set(
                            &mut frame_words[local..local + wpv],
                            width,
                            idx as usize,
                            raw,
                        );
                    }
                }
            };
            #[cfg(feature = "parallel")]
            words
                .par_chunks_mut(frame_words)
                .zip(shards.par_iter())
                .for_each(apply);
            #[cfg(not(feature = "parallel"))]
            words
                .chunks_mut(frame_words)
                .zip(shards.iter())
                .for_each(apply);
        }
        self.shards = shards;
    }

    /// Counters the next tick will examine (closed form): two blocks per
    /// vector, sized by the layout.
    pub fn expected_tick_cost(&self) -> usize {
        let mut next = self.clock;
        next.advance();
        self.n_vectors() * self.layout.preserve_cost(next.c0())
    }

    /// Advance to the next slice and run the maintenance pass: every
    /// vector's two crossing blocks get their stale stamps retired.
    /// Returns the number of counters examined.
    pub fn tick(&mut self) -> usize {
        self.clock.advance();
        let c0 = self.clock.c0();
        let k = self.k();
        let width = self.store.width();
        let blocks: Vec<(usize, usize, AtClock)> = self
            .layout
            .preserve_blocks(c0)
            .into_iter()
            .map(|b| {
                let range = self.layout.block_range(b);
                let act = self.layout.block_clock(b, c0);
                (
                    range.start,
                    range.end,
                    AtClock::new(act, k).expect("block clock in range"),
                )
            })
            .collect();
        let wpv = self.store.words_per_vec();
        let words = self.store.words_mut();
        let preserve = |vwords: &mut [u64]| -> usize {
            let mut examined = 0;
            for &(start, end, block_clock) in &blocks {
                for i in start..end {
                    examined += 1;
                    let raw = store::raw_get(vwords, width, i);
                    if raw == 0 {
                        continue;
                    }
                    let value = store::decode(raw, k);
                    if at::preserve_at(value, block_clock) != value {
                        store::raw_set(vwords, width, i, 0);
                    }
                }
            }
            examined
        };
        // each chunk is only a couple of counters of work, so batch them
        #[cfg(feature = "parallel")]
        let examined: usize = words
            .par_chunks_mut(wpv)
            .with_min_len(256)
            .map(preserve)
            .sum();
        #[cfg(not(feature = "parallel"))]
        let examined: usize = words.chunks_mut(wpv).map(preserve).sum();
        examined
    }

    fn check_k_prime(&self, k_prime: u32) -> Result<()> {
        if k_prime == 0 || k_prime > self.k() {
            return Err(Error::Parameter {
                name: "k_prime",
                value: k_prime as u64,
                constraint: "query window must be in [1, k]",
            });
        }
        Ok(())
    }

    /// Block spans with their current clocks, shared by the weight loops.
    fn block_clocks(&self) -> Vec<(usize, usize, u32)> {
        let c0 = self.clock.c0();
        (0..self.layout.num_blocks())
            .map(|b| {
                let r = self.layout.block_range(b);
                (r.start, r.end, self.layout.block_clock(b, c0))
            })
            .collect()
    }

    /// Per-counter raw-space distance base, shared by every vector in a
    /// pass, so the hot loop tests activity without a per-counter modulo.
    /// A live raw value r encodes value r-1, so
    /// dis = (act - (r-1)) mod 2k = (base - r) mod 2k with
    /// base = act + 2k + 1; base - r lies in [1, 4k-1] and one conditional
    /// subtract folds it into [0, 2k-1].
    fn counter_bases(&self, blocks: &[(usize, usize, u32)]) -> Vec<u32> {
        let two_k = 2 * self.k();
        let mut bases = vec![0u32; self.g()];
        for &(start, end, act) in blocks {
            for slot in &mut bases[start..end] {
                *slot = act + two_k + 1;
            }
        }
        bases
    }

    fn weight_of_words(&self, vwords: &[u64], bases: &[u32], k_prime: u32) -> u32 {
        let width = self.store.width() as usize;
        let two_k = 2 * self.k();
        let mask = (1u64 << width) - 1;
        let g = self.g();
        let mut count = 0u32;
        let mut i = 0usize;
        while i < g {
            let bit = i * width;
            let w = bit >> 6;
            let off = bit & 63;
            let word = vwords[w];
            // counters fully inside an all-zero word are all inactive;
            // hop straight to the first counter reaching the next word
            if word == 0 && off + width <= 64 {
                let last_inside = ((w + 1) * 64 - width) / width;
                i = last_inside + 1;
                continue;
            }
            let mut raw = word >> off;
            if off + width > 64 {
                raw |= vwords[w + 1] << (64 - off);
            }
            let raw = (raw & mask) as u32;
            if raw != 0 {
                let mut dis = bases[i] - raw;
                if dis >= two_k {
                    dis -= two_k;
                }
                count += (dis < k_prime) as u32;
            }
            i += 1;
        }
        count
    }

    /// Active count of one vector over the latest `k_prime` slices.
    pub fn weight_of(&self, x: usize, y: usize, z: usize, k_prime: u32) -> Result<usize> {
        self.check_k_prime(k_prime)?;
        let bases = self.counter_bases(&self.block_clocks());
        let v = self.vec_index(x, y, z);
        Ok(self.weight_of_words(self.store.vec_words(v), &bases, k_prime) as usize)
    }

    /// Active counts of every vector, indexed like the storage. One pass,
    /// parallel across vectors when enabled.
    fn vector_weights(&self, k_prime: u32) -> Result<Vec<u32>> {
        self.check_k_prime(k_prime)?;
        let bases = self.counter_bases(&self.block_clocks());
        let wpv = self.store.words_per_vec();
        let words = self.store.words();
        let per_vec = |vwords: &[u64]| self.weight_of_words(vwords, &bases, k_prime);
        #[cfg(feature = "parallel")]
        let weights: Vec<u32> = words.par_chunks(wpv).map(per_vec).collect();
        #[cfg(not(feature = "parallel"))]
        let weights: Vec<u32> = words.chunks(wpv).map(per_vec).collect();
        Ok(weights)
    }

    /// Columns of `(row, frame)` whose weight meets the super threshold;
    /// ties at exactly the threshold count.
    pub fn super_atvs(&self, row: usize, frame: usize, k_prime: u32) -> Result<Vec<u32>> {
        self.check_k_prime(k_prime)?;
        let bases = self.counter_bases(&self.block_clocks());
        let thresh = self.super_threshold();
        let mut out = Vec::new();
        for x in 0..self.n_cols() {
            let v = self.vec_index(x, row, frame);
            let w = self.weight_of_words(self.store.vec_words(v), &bases, k_prime);
            if w as f64 >= thresh {
                out.push(x as u32);
            }
        }
        Ok(out)
    }

    /// Probability that a random counter of `(row, frame)` is active:
    /// total active counters across the row's columns over `g * 2^c`.
    pub fn row_set_probability(&self, row: usize, frame: usize, k_prime: u32) -> Result<f64> {
        self.check_k_prime(k_prime)?;
        let bases = self.counter_bases(&self.block_clocks());
        let mut active: u64 = 0;
        for x in 0..self.n_cols() {
            let v = self.vec_index(x, row, frame);
            active += self.weight_of_words(self.store.vec_words(v), &bases, k_prime) as u64;
        }
        Ok(active as f64 / (self.g() as f64 * self.n_cols() as f64))
    }

    /// Probability that a random counter index is active in all `r` rows of
    /// the frame at once — the false-active rate the bias correction removes.
    pub fn frame_up(&self, frame: usize, k_prime: u32) -> Result<f64> {
        let mut up = 1.0;
        for y in 0..self.params.rows() as usize {
            up *= self.row_set_probability(y, frame, k_prime)?;
        }
        Ok(up)
    }

    /// Count of counter indices active in all `r` of `aip`'s vectors.
    pub fn nat(&self, aip: u32, k_prime: u32) -> Result<usize> {
        self.check_k_prime(k_prime)?;
        let digest = self.params.digest(aip);
        let width = self.store.width();
        let two_k = 2 * self.k();
        let vecs: Vec<&[u64]> = digest
            .columns
            .iter()
            .enumerate()
            .map(|(y, &x)| self.store.vec_words(self.vec_index(x as usize, y, digest.frame as usize)))
            .collect();
        let mut count = 0;
        for &(start, end, act) in &self.block_clocks() {
            let base = act + two_k + 1;
            'counter: for i in start..end {
                for vwords in &vecs {
                    let raw = store::raw_get(vwords, width, i);
                    if raw == 0 {
                        continue 'counter;
                    }
                    let mut dis = base - raw;
                    if dis >= two_k {
                        dis -= two_k;
                    }
                    if dis >= k_prime {
                        continue 'counter;
                    }
                }
                count += 1;
            }
        }
        Ok(count)
    }

    /// Bias-corrected cardinality estimate for one host.
    pub fn estimate_superpoint(&self, aip: u32, k_prime: u32) -> Result<f64> {
        let nat = self.nat(aip, k_prime)?;
        let frame = self.params.digest(aip).frame as usize;
        let up = self.frame_up(frame, k_prime)?;
        bias_corrected_estimate(self.g(), nat, up)
    }

    /// Candidate super points: per frame, the product of each row's super
    /// columns, filtered by duplicate-position consistency and rebuilt into
    /// addresses. Sorted and deduplicated.
    pub fn restore_candidates(&self, k_prime: u32) -> Result<Vec<u32>> {
        let weights = self.vector_weights(k_prime)?;
        self.candidates_from_weights(&weights).map(|mut v| {
            v.sort_unstable();
            v.dedup();
            v
        })
    }

    fn candidates_from_weights(&self, weights: &[u32]) -> Result<Vec<u32>> {
        let thresh = self.super_threshold();
        let rows = self.params.rows() as usize;
        let frames: Vec<usize> = (0..self.n_frames()).collect();
        let per_frame = |&z: &usize| -> Result<Vec<u32>> {
            let mut sa: Vec<Vec<u32>> = Vec::with_capacity(rows);
            for y in 0..rows {
                let base = self.vec_index(0, y, z);
                sa.push(
                    (0..self.n_cols())
                        .filter(|&x| weights[base + x] as f64 >= thresh)
                        .map(|x| x as u32)
                        .collect(),
                );
            }
            self.frame_candidates(z as u32, &sa)
        };
        #[cfg(feature = "parallel")]
        let per_frame_results: Result<Vec<Vec<u32>>> =
            frames.par_iter().map(per_frame).collect();
        #[cfg(not(feature = "parallel"))]
        let per_frame_results: Result<Vec<Vec<u32>>> = frames.iter().map(per_frame).collect();
        Ok(per_frame_results?.into_iter().flatten().collect())
    }

    /// Walk the column tuple product of one frame depth-first, pruning as
    /// soon as a duplicate position disagrees. The raw product size is
    /// checked against the cap first so adversarial load degrades loudly
    /// instead of silently.
    fn frame_candidates(&self, frame: u32, sa: &[Vec<u32>]) -> Result<Vec<u32>> {
        let tuples: u128 = sa.iter().map(|cols| cols.len() as u128).product();
        if tuples == 0 {
            return Ok(Vec::new());
        }
        if tuples > self.candidate_cap as u128 {
            return Err(Error::FrameOverflow {
                frame,
                tuples,
                cap: self.candidate_cap,
            });
        }
        let m = self.params.lbs_bits();
        let mut bits: Vec<i8> = vec![-1; m as usize];
        let mut out = Vec::new();
        self.tuple_dfs(frame, sa, 0, &mut bits, &mut out);
        Ok(out)
    }

    fn tuple_dfs(&self, frame: u32, sa: &[Vec<u32>], row: usize, bits: &mut [i8], out: &mut Vec<u32>) {
        if row == sa.len() {
            let mut lbs = 0u32;
            for (pos, &b) in bits.iter().enumerate() {
                debug_assert!(b >= 0, "completeness guarantees every position");
                lbs |= (b as u32) << pos;
            }
            out.push(self.params.restore_ip(lbs, frame));
            return;
        }
        let c = self.params.c();
        let s = self.params.s();
        let m = self.params.lbs_bits();
        for &x in &sa[row] {
            let mut assigned: Vec<(usize, i8)> = Vec::new();
            let mut ok = true;
            for j in 0..c {
                let pos = ((s * row as u32 + j) % m) as usize;
                let bit = ((x >> j) & 1) as i8;
                match bits[pos] {
                    -1 => {
                        bits[pos] = bit;
                        assigned.push((pos, -1));
                    }
                    b if b == bit => {}
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                self.tuple_dfs(frame, sa, row + 1, bits, out);
            }
            for (pos, prev) in assigned {
                bits[pos] = prev;
            }
        }
    }

    /// Full boundary pipeline: restore candidates, estimate each, keep the
    /// hosts whose corrected estimate reaches the threshold.
    pub fn detect(&self, k_prime: u32) -> Result<Vec<SuperPointReport>> {
        let weights = self.vector_weights(k_prime)?;
        let mut candidates = self.candidates_from_weights(&weights)?;
        candidates.sort_unstable();
        candidates.dedup();

        // per-frame false-active rate from the same weights pass
        let rows = self.params.rows() as usize;
        let denom = self.g() as f64 * self.n_cols() as f64;
        let mut ups = Vec::with_capacity(self.n_frames());
        for z in 0..self.n_frames() {
            let mut up = 1.0;
            for y in 0..rows {
                let base = self.vec_index(0, y, z);
                let active: u64 = weights[base..base + self.n_cols()]
                    .iter()
                    .map(|&w| w as u64)
                    .sum();
                up *= active as f64 / denom;
            }
            ups.push(up);
        }

        let mut reports = Vec::new();
        for ip in candidates {
            let frame = self.params.digest(ip).frame as usize;
            let nat = self.nat(ip, k_prime)?;
            let estimate = match bias_corrected_estimate(self.g(), nat, ups[frame]) {
                Ok(e) => e,
                Err(Error::Saturated { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            if estimate >= self.theta {
                reports.push(SuperPointReport {
                    ip,
                    estimate,
                    window_end_slice: self.clock.slice(),
                    k_prime,
                });
            }
        }
        Ok(reports)
    }

    #[cfg(test)]
    pub(crate) fn set_counter_for_test(&mut self, x: usize, y: usize, z: usize, i: usize, value: u32) {
        let v = self.vec_index(x, y, z);
        self.store.set(v, i, value);
    }
}

const SNAPSHOT_MAGIC: [u8; 4] = *b"ATVC";
const SNAPSHOT_VERSION: u8 = 1;

impl AtvCube {
    /// Binary state dump: magic, version, hash parameters, clock, and the
    /// packed counter words (little-endian).
    pub fn save_snapshot<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&SNAPSHOT_MAGIC)?;
        w.write_all(&[SNAPSHOT_VERSION])?;
        let (tag, a, a_inv, p) = match *self.params.mangler() {
            Mangler::OddMultiplier { a, a_inv } => (0u8, a as u64, a_inv as u64, 0u64),
            Mangler::ModPrime { a, a_inv, p } => (1u8, a, a_inv, p),
        };
        w.write_all(&[tag])?;
        for v in [a, a_inv, p, self.params.bh_seed()] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [
            self.params.c(),
            self.params.rows(),
            self.params.u(),
            self.params.s(),
            self.k(),
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.g() as u64).to_le_bytes())?;
        w.write_all(&self.theta.to_le_bytes())?;
        w.write_all(&self.candidate_cap.to_le_bytes())?;
        w.write_all(&self.clock.c0().to_le_bytes())?;
        w.write_all(&self.clock.slice().to_le_bytes())?;
        let words = self.store.words();
        w.write_all(&(words.len() as u64).to_le_bytes())?;
        for word in words {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load_snapshot<R: Read>(r: &mut R) -> Result<Self> {
        fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
            let mut buf = [0u8; N];
            r.read_exact(&mut buf)?;
            Ok(buf)
        }
        let magic: [u8; 4] = read_exact(r)?;
        if magic != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let [version] = read_exact::<1, _>(r)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let [tag] = read_exact::<1, _>(r)?;
        let a = u64::from_le_bytes(read_exact(r)?);
        let a_inv = u64::from_le_bytes(read_exact(r)?);
        let p = u64::from_le_bytes(read_exact(r)?);
        let bh_seed = u64::from_le_bytes(read_exact(r)?);
        let mangler = match tag {
            0 => Mangler::OddMultiplier {
                a: a as u32,
                a_inv: a_inv as u32,
            },
            1 => Mangler::ModPrime { a, a_inv, p },
            t => return Err(Error::Snapshot(format!("unknown mangler tag {t}"))),
        };
        let c = u32::from_le_bytes(read_exact(r)?);
        let rows = u32::from_le_bytes(read_exact(r)?);
        let u = u32::from_le_bytes(read_exact(r)?);
        let s = u32::from_le_bytes(read_exact(r)?);
        let k = u32::from_le_bytes(read_exact(r)?);
        let g = u64::from_le_bytes(read_exact(r)?) as usize;
        let theta = f64::from_le_bytes(read_exact(r)?);
        let candidate_cap = u64::from_le_bytes(read_exact(r)?);
        let c0 = u32::from_le_bytes(read_exact(r)?);
        let slice = u64::from_le_bytes(read_exact(r)?);
        let n_words = u64::from_le_bytes(read_exact(r)?) as usize;
        let params = RrhParams::new(c, rows, s, u, mangler, bh_seed)?;
        let layout = BlockLayout::new(g, k)?;
        let n_vectors = (1usize << c) * rows as usize * (1usize << u);
        let expected_words = n_vectors * (g * store::counter_width(k) as usize).div_ceil(64);
        if n_words != expected_words {
            return Err(Error::Snapshot(format!(
                "expected {expected_words} packed words, header says {n_words}"
            )));
        }
        let mut bytes = vec![0u8; n_words * 8];
        r.read_exact(&mut bytes)?;
        let words = bytes
            .chunks_exact(8)
            .map(|chunk| u64::from_le_bytes(chunk.try_into().unwrap()))
            .collect();
        let store = PackedStore::from_words(words, n_vectors, g, k)?;
        let shards = vec![FrameShard::default(); 1usize << u];
        Ok(Self {
            params,
            layout,
            clock: BaseClock::restore(c0, slice, k)?,
            store,
            theta,
            candidate_cap,
            shards,
            col_buf: Vec::new(),
        })
    }

    /// Load and reject a snapshot whose shape does not match the expected
    /// `(g, k, c, r, u, s)`.
    pub fn load_snapshot_expecting<R: Read>(
        r: &mut R,
        g: usize,
        k: u32,
        c: u32,
        rows: u32,
        u: u32,
        s: u32,
    ) -> Result<Self> {
        let cube = Self::load_snapshot(r)?;
        let found = (
            cube.g(),
            cube.k(),
            cube.params.c(),
            cube.params.rows(),
            cube.params.u(),
            cube.params.s(),
        );
        if found != (g, k, c, rows, u, s) {
            return Err(Error::Snapshot(format!(
                "shape mismatch: snapshot has (g,k,c,r,u,s)={found:?}, expected {:?}",
                (g, k, c, rows, u, s)
            )));
        }
        Ok(cube)
    }
}
