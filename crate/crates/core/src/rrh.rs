//! The random reversible hash scheme.
//!
//! A host address is first mangled by an invertible multiplicative hash,
//! the low `u` bits of the result select a frame, and the remaining
//! `32 - u` bits (the left bit set) are cut into `r` overlapping `c`-bit
//! windows at stride `s` to form the column indices. Overlap means some
//! bit positions appear in two or more columns; those duplicate positions
//! let the inverse direction reject column tuples that never came from a
//! real address, and the surviving tuples reassemble into the mangled
//! value, which un-mangles back to the host.

use crate::error::{Error, Result};
use crate::seed::{mix64, SplitMix64};

const IP_BITS: u32 = 32;
const TWO32: u64 = 1 << 32;

/// Structural attributes a parameter set can violate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// `c + s * (r - 1)` cannot reach the width of the left bit set.
    CompletenessBound { required: u32, actual: u32 },
    /// Some left-bit-set position is covered by no column window.
    CoverageGap { position: u32 },
    /// No position is covered by two different rows, so inverse
    /// consistency checking has nothing to reject with.
    NoRedundancy,
    /// Multiplier must be odd to be invertible modulo 2^32.
    EvenMultiplier,
    /// Multiplier must be invertible modulo the chosen prime.
    NonInvertibleMultiplier,
    /// Stride must satisfy `1 <= s <= c`.
    StrideOutOfRange,
    /// Frame width must leave at least one left bit (`u <= 31`).
    FrameTooWide,
    /// Row count must be at least one.
    NoRows,
    /// Column width must be at least one bit.
    NoColumns,
    /// Modulus must exceed 2^32 for the mod-prime mangler.
    ModulusTooSmall,
    /// The mod-prime mangler would produce a residue that does not fit in
    /// 32 bits; the witness input is included.
    MangleOverflow { ip: u32 },
    /// The mod-prime residue range could not be verified within budget.
    MangleUnverifiable,
}

/// The invertible address-mangling function. The default multiplies by an
/// odd constant modulo 2^32, an exact 32-bit bijection with a closed-form
/// inverse. The mod-prime form is kept as a documented alternative; its
/// parameters are rejected unless every 32-bit input provably maps to a
/// 32-bit residue.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mangler {
    OddMultiplier { a: u32, a_inv: u32 },
    ModPrime { a: u64, a_inv: u64, p: u64 },
}

impl Mangler {
    /// Odd multiplier with its inverse derived by Newton iteration.
    pub fn odd(a: u32) -> Self {
        let a = a | 1;
        Self::OddMultiplier {
            a,
            a_inv: invert_odd_u32(a),
        }
    }

    /// Mod-prime mangler; the inverse is computed by the extended Euclid
    /// algorithm. Fails fast when `a` has no inverse.
    pub fn mod_prime(a: u64, p: u64) -> std::result::Result<Self, Violation> {
        let a_inv = invert_mod(a, p).ok_or(Violation::NonInvertibleMultiplier)?;
        Ok(Self::ModPrime { a, a_inv, p })
    }

    #[inline]
    fn forward(&self, ip: u32) -> u32 {
        match *self {
            Mangler::OddMultiplier { a, .. } => a.wrapping_mul(ip),
            Mangler::ModPrime { a, p, .. } => {
                ((a as u128 * ip as u128) % p as u128) as u32
            }
        }
    }

    #[inline]
    fn backward(&self, h: u32) -> u32 {
        match *self {
            Mangler::OddMultiplier { a_inv, .. } => a_inv.wrapping_mul(h),
            Mangler::ModPrime { a_inv, p, .. } => {
                ((a_inv as u128 * h as u128) % p as u128) as u32
            }
        }
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        match *self {
            Mangler::OddMultiplier { a, a_inv } => {
                if a % 2 == 0 {
                    out.push(Violation::EvenMultiplier);
                } else if a.wrapping_mul(a_inv) != 1 {
                    out.push(Violation::NonInvertibleMultiplier);
                }
            }
            Mangler::ModPrime { a, a_inv, p } => {
                if p <= TWO32 {
                    out.push(Violation::ModulusTooSmall);
                    return out;
                }
                match invert_mod(a, p) {
                    Some(inv) if inv == a_inv => {}
                    _ => {
                        out.push(Violation::NonInvertibleMultiplier);
                        return out;
                    }
                }
                match modp_overflow_witness(a, p) {
                    Ok(None) => {}
                    Ok(Some(ip)) => out.push(Violation::MangleOverflow { ip }),
                    Err(()) => out.push(Violation::MangleUnverifiable),
                }
            }
        }
        out
    }
}

/// Inverse of an odd number modulo 2^32 by Newton iteration; each step
/// doubles the number of correct low bits.
fn invert_odd_u32(a: u32) -> u32 {
    debug_assert!(a % 2 == 1);
    let mut x = a; // correct to 3 bits
    for _ in 0..4 {
        x = x.wrapping_mul(2u32.wrapping_sub(a.wrapping_mul(x)));
    }
    debug_assert_eq!(a.wrapping_mul(x), 1);
    x
}

/// Modular inverse by extended Euclid; `None` when `gcd(a, m) != 1`.
fn invert_mod(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Does some 32-bit input map to a residue of 33+ bits under `a * ip mod p`?
/// Returns a witness input when one exists, `Ok(None)` when provably none
/// exists, and `Err(())` when neither direction fits the search budget.
fn modp_overflow_witness(a: u64, p: u64) -> std::result::Result<Option<u32>, ()> {
    const BUDGET: u64 = 1 << 22;
    debug_assert!(p > TWO32);
    if a == 0 {
        return Err(());
    }
    if a == 1 {
        // identity below p: residues equal inputs, all < 2^32
        return Ok(None);
    }
    // Forward scan: a*ip lands in [j*p + 2^32, j*p + p - 1] for some j >= 0.
    let top = a as u128 * (TWO32 - 1) as u128;
    let j_max = if top < TWO32 as u128 {
        0
    } else {
        ((top - TWO32 as u128) / p as u128) as u64
    };
    if j_max <= BUDGET {
        for j in 0..=j_max {
            let lo = j as u128 * p as u128 + TWO32 as u128;
            let hi = j as u128 * p as u128 + (p - 1) as u128;
            let ip_lo = lo.div_ceil(a as u128);
            let ip_hi = (hi / a as u128).min((TWO32 - 1) as u128);
            if ip_lo <= ip_hi {
                return Ok(Some(ip_lo as u32));
            }
        }
        return Ok(None);
    }
    // Backward scan: walk the oversized residues through the inverse map.
    let gap = p - TWO32;
    if gap <= BUDGET {
        let a_inv = invert_mod(a, p).ok_or(())?;
        for y in TWO32..p {
            let x = (a_inv as u128 * y as u128 % p as u128) as u64;
            if x < TWO32 {
                return Ok(Some(x as u32));
            }
        }
        return Ok(None);
    }
    Err(())
}

/// A host's digest: the frame index from the low `u` bits of the mangled
/// address, plus `r` column indices cut from the left bit set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RrhDigest {
    pub frame: u32,
    pub columns: Vec<u32>,
}

/// Validated hash-scheme parameters with the duplicate-position table
/// precomputed, so inverse consistency checks are plain lookups.
#[derive(Clone, Debug)]
pub struct RrhParams {
    c: u32,
    rows: u32,
    s: u32,
    u: u32,
    mangler: Mangler,
    bh_seed: u64,
    /// For each left-bit-set position, every (row, bit offset) covering it.
    covers: Vec<Vec<(u32, u32)>>,
    dup_positions: Vec<u32>,
}

impl RrhParams {
    pub fn new(c: u32, rows: u32, s: u32, u: u32, mangler: Mangler, bh_seed: u64) -> Result<Self> {
        let violations = validate_params(c, rows, s, u, &mangler);
        if !violations.is_empty() {
            return Err(Error::HashParams(violations));
        }
        let (covers, dup_positions) = cover_table(c, rows, s, u);
        Ok(Self {
            c,
            rows,
            s,
            u,
            mangler,
            bh_seed,
            covers,
            dup_positions,
        })
    }

    /// Derive the multiplier and the peer-hash key from one master seed.
    pub fn from_master_seed(c: u32, rows: u32, s: u32, u: u32, master_seed: u64) -> Result<Self> {
        let mut gen = SplitMix64::new(master_seed);
        let a = gen.next_u32() | 1;
        let bh_seed = gen.next_u64();
        Self::new(c, rows, s, u, Mangler::odd(a), bh_seed)
    }

    #[inline]
    pub fn c(&self) -> u32 {
        self.c
    }

    #[inline]
    pub fn rows(&self) -> u32 {
        self.rows
    }

    #[inline]
    pub fn s(&self) -> u32 {
        self.s
    }

    #[inline]
    pub fn u(&self) -> u32 {
        self.u
    }

    #[inline]
    pub fn bh_seed(&self) -> u64 {
        self.bh_seed
    }

    #[inline]
    pub fn mangler(&self) -> &Mangler {
        &self.mangler
    }

    /// Width of the left bit set.
    #[inline]
    pub fn lbs_bits(&self) -> u32 {
        IP_BITS - self.u
    }

    /// Positions of the left bit set covered by two or more column windows.
    pub fn dup_positions(&self) -> &[u32] {
        &self.dup_positions
    }

    #[inline]
    pub fn mangle(&self, ip: u32) -> u32 {
        self.mangler.forward(ip)
    }

    #[inline]
    pub fn unmangle(&self, h: u32) -> u32 {
        self.mangler.backward(h)
    }

    pub fn digest(&self, ip: u32) -> RrhDigest {
        let mut columns = Vec::with_capacity(self.rows as usize);
        let frame = self.digest_into(ip, &mut columns);
        RrhDigest { frame, columns }
    }

    /// Allocation-free digest for scan loops; returns the frame index and
    /// fills `columns` with the `r` column indices.
    pub fn digest_into(&self, ip: u32, columns: &mut Vec<u32>) -> u32 {
        let h = self.mangle(ip);
        let frame = h & frame_mask(self.u);
        let lbs = h >> self.u;
        let m = self.lbs_bits();
        columns.clear();
        for i in 0..self.rows {
            let mut x = 0u32;
            let base = self.s * i;
            for j in 0..self.c {
                let pos = (base + j) % m;
                x |= ((lbs >> pos) & 1) << j;
            }
            columns.push(x);
        }
        frame
    }

    /// Reassemble the left bit set from one column per row. Returns `None`
    /// when any duplicate position disagrees across the windows covering
    /// it — the tuple cannot have come from a single address.
    pub fn restore_lbs(&self, columns: &[u32]) -> Option<u32> {
        assert_eq!(columns.len(), self.rows as usize);
        let mut lbs = 0u32;
        for (pos, cov) in self.covers.iter().enumerate() {
            let (row0, off0) = cov[0];
            let bit = (columns[row0 as usize] >> off0) & 1;
            for &(row, off) in &cov[1..] {
                if (columns[row as usize] >> off) & 1 != bit {
                    return None;
                }
            }
            lbs |= bit << pos;
        }
        Some(lbs)
    }

    /// Concatenate a left bit set with a frame index and un-mangle.
    pub fn restore_ip(&self, lbs: u32, frame: u32) -> u32 {
        debug_assert!(self.u == 0 || frame < (1 << self.u));
        debug_assert!(self.lbs_bits() == 32 || lbs < (1u32 << self.lbs_bits()));
        self.unmangle((lbs << self.u) | frame)
    }

    /// Map a peer address to a counter index in `[0, g)`; keyed 64-bit mix
    /// reduced by multiply-shift so `g` need not be a power of two.
    #[inline]
    pub fn bh(&self, bip: u32, g: usize) -> usize {
        debug_assert!(g >= 1);
        let h = mix64(self.bh_seed ^ bip as u64);
        ((h as u128 * g as u128) >> 64) as usize
    }
}

#[inline]
fn frame_mask(u: u32) -> u32 {
    if u == 0 {
        0
    } else {
        (1u32 << u).wrapping_sub(1)
    }
}

/// Check every structural attribute; an empty list means the parameters
/// are usable.
pub fn validate_params(c: u32, rows: u32, s: u32, u: u32, mangler: &Mangler) -> Vec<Violation> {
    let mut out = Vec::new();
    if u >= IP_BITS {
        out.push(Violation::FrameTooWide);
        return out;
    }
    if rows == 0 {
        out.push(Violation::NoRows);
        return out;
    }
    if c == 0 {
        out.push(Violation::NoColumns);
        return out;
    }
    if s == 0 || s > c {
        out.push(Violation::StrideOutOfRange);
    }
    let m = IP_BITS - u;
    if c + s * (rows - 1) < m {
        out.push(Violation::CompletenessBound {
            required: m,
            actual: c + s * (rows - 1),
        });
    }
    let (covers, dups) = cover_table(c, rows, s, u);
    for (pos, cov) in covers.iter().enumerate() {
        if cov.is_empty() {
            out.push(Violation::CoverageGap { position: pos as u32 });
        }
    }
    if dups.is_empty() {
        out.push(Violation::NoRedundancy);
    }
    out.extend(mangler.violations());
    out
}

/// Build the coverage table: for each left-bit-set position, the (row,
/// offset) pairs whose column windows contain it. Positions with two or
/// more covering rows are the duplicate positions.
fn cover_table(c: u32, rows: u32, s: u32, u: u32) -> (Vec<Vec<(u32, u32)>>, Vec<u32>) {
    let m = IP_BITS.saturating_sub(u).max(1);
    let mut covers: Vec<Vec<(u32, u32)>> = vec![Vec::new(); m as usize];
    for i in 0..rows {
        for j in 0..c {
            let pos = (s * i + j) % m;
            covers[pos as usize].push((i, j));
        }
    }
    let dups = covers
        .iter()
        .enumerate()
        .filter(|(_, cov)| {
            // redundancy per the scheme's definition: two *different* rows
            cov.iter().any(|&(r0, _)| cov.iter().any(|&(r1, _)| r1 != r0))
        })
        .map(|(pos, _)| pos as u32)
        .collect();
    (covers, dups)
}
