//! The asynchronous timestamp vector: `g` counters split into `2k` blocks
//! whose clocks are staggered one slice apart, so a slide only has to
//! maintain the two blocks whose clocks just crossed `0` and `k`. The
//! active count over the latest `k'` slices feeds the linear cardinality
//! estimate.

use crate::at::{self, AtClock, AtValue};
use crate::error::{Error, Result};

/// How `g` counters are partitioned into `2k` blocks: the first `2k - 1`
/// blocks hold `a` counters each and the tail holds `b`, with
/// `a * (2k - 1) + b == g`. Block `i` runs on clock `(C0 + i) mod 2k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    g: usize,
    k: u32,
    a: usize,
    b: usize,
}

impl BlockLayout {
    pub fn new(g: usize, k: u32) -> Result<Self> {
        if k == 0 || k > at::MAX_K {
            return Err(Error::Parameter {
                name: "k",
                value: k as u64,
                constraint: "window capacity must be in [1, MAX_K]",
            });
        }
        let blocks = 2 * k as usize;
        if g < blocks {
            return Err(Error::Parameter {
                name: "g",
                value: g as u64,
                constraint: "counter count must be at least 2k",
            });
        }
        let a = g / blocks;
        let b = g - a * (blocks - 1);
        debug_assert!(a >= 1 && b >= 1);
        Ok(Self { g, k, a, b })
    }

    #[inline]
    pub fn g(&self) -> usize {
        self.g
    }

    #[inline]
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Size of the first `2k - 1` blocks.
    #[inline]
    pub fn a(&self) -> usize {
        self.a
    }

    /// Size of the tail block.
    #[inline]
    pub fn b(&self) -> usize {
        self.b
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        2 * self.k as usize
    }

    /// Block owning counter `i`; indices past the regular blocks fold into
    /// the tail.
    #[inline]
    pub fn block_of(&self, i: usize) -> usize {
        (i / self.a).min(self.num_blocks() - 1)
    }

    #[inline]
    pub fn block_range(&self, block: usize) -> std::ops::Range<usize> {
        let start = block * self.a;
        let end = if block == self.num_blocks() - 1 {
            self.g
        } else {
            start + self.a
        };
        start..end
    }

    #[inline]
    pub fn block_len(&self, block: usize) -> usize {
        if block == self.num_blocks() - 1 {
            self.b
        } else {
            self.a
        }
    }

    #[inline]
    pub fn block_clock(&self, block: usize, c0: u32) -> u32 {
        ((c0 as u64 + block as u64) % (2 * self.k as u64)) as u32
    }

    /// The two blocks whose clocks read `0` and `k` once the base clock is
    /// `c0` — the only blocks a slide must visit.
    pub fn preserve_blocks(&self, c0: u32) -> [usize; 2] {
        let two_k = 2 * self.k as u64;
        let b0 = ((two_k - c0 as u64) % two_k) as usize;
        let bk = ((self.k as u64 + two_k - c0 as u64) % two_k) as usize;
        debug_assert_ne!(b0, bk);
        [b0, bk]
    }

    /// Counters a slide examines when the base clock is `c0` (closed form).
    pub fn preserve_cost(&self, c0: u32) -> usize {
        let [b0, bk] = self.preserve_blocks(c0);
        self.block_len(b0) + self.block_len(bk)
    }
}

/// The shared base clock: block 0's clock plus an absolute slice counter
/// kept for diagnostics and reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaseClock {
    c0: u32,
    k: u32,
    slice: u64,
}

impl BaseClock {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 || k > at::MAX_K {
            return Err(Error::Parameter {
                name: "k",
                value: k as u64,
                constraint: "window capacity must be in [1, MAX_K]",
            });
        }
        Ok(Self { c0: 0, k, slice: 0 })
    }

    #[inline]
    pub fn c0(&self) -> u32 {
        self.c0
    }

    #[inline]
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Absolute slice index since construction.
    #[inline]
    pub fn slice(&self) -> u64 {
        self.slice
    }

    pub fn advance(&mut self) {
        self.c0 += 1;
        if self.c0 == 2 * self.k {
            self.c0 = 0;
        }
        self.slice += 1;
    }

    pub(crate) fn restore(c0: u32, slice: u64, k: u32) -> Result<Self> {
        let _ = AtClock::new(c0, k)?;
        Ok(Self { c0, k, slice })
    }
}

/// A standalone timestamp vector holding unpacked counter values. The cube
/// stores the same structure bit-packed; this form keeps the algebra
/// testable on its own.
#[derive(Clone, Debug)]
pub struct AtVector {
    layout: BlockLayout,
    ats: Vec<AtValue>,
}

impl AtVector {
    pub fn new(g: usize, k: u32) -> Result<Self> {
        let layout = BlockLayout::new(g, k)?;
        let ats = vec![at::init_at(k); g];
        Ok(Self { layout, ats })
    }

    #[inline]
    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    #[inline]
    pub fn get(&self, i: usize) -> AtValue {
        self.ats[i]
    }

    /// Stamp counter `index` with its block's current clock.
    pub fn touch(&mut self, index: usize, clock: &BaseClock) -> Result<()> {
        if index >= self.layout.g {
            return Err(Error::Parameter {
                name: "index",
                value: index as u64,
                constraint: "counter index must be below g",
            });
        }
        debug_assert_eq!(clock.k(), self.layout.k());
        let block = self.layout.block_of(index);
        self.ats[index] = self.layout.block_clock(block, clock.c0());
        Ok(())
    }

    /// Maintenance at a slice boundary, after the base clock advanced.
    /// Visits exactly the two blocks whose new clocks read `0` and `k`;
    /// returns how many counters were examined.
    pub fn slide(&mut self, clock: &BaseClock) -> usize {
        debug_assert_eq!(clock.k(), self.layout.k());
        let mut examined = 0;
        for block in self.layout.preserve_blocks(clock.c0()) {
            let block_clock = AtClock::new(self.layout.block_clock(block, clock.c0()), self.layout.k())
                .expect("block clock is always in range");
            let range = self.layout.block_range(block);
            examined += range.len();
            for slot in &mut self.ats[range] {
                *slot = at::preserve_at(*slot, block_clock);
            }
        }
        examined
    }

    /// Number of counters active within the latest `k_prime` slices.
    pub fn weight(&self, clock: &BaseClock, k_prime: u32) -> Result<usize> {
        let k = self.layout.k();
        if k_prime == 0 || k_prime > k {
            return Err(Error::Parameter {
                name: "k_prime",
                value: k_prime as u64,
                constraint: "query window must be in [1, k]",
            });
        }
        debug_assert_eq!(clock.k(), k);
        let mut count = 0;
        for block in 0..self.layout.num_blocks() {
            let act = self.layout.block_clock(block, clock.c0());
            for &value in &self.ats[self.layout.block_range(block)] {
                if at::check_at_unchecked(value, act, k, k_prime) {
                    count += 1;
                }
            }
        }
        Ok(count)
    }
}

/// Linear cardinality estimate from an active count: `-g * ln((g - w) / g)`.
/// A fully active vector has no finite estimate and reports saturation.
pub fn estimate_cardinality(active: usize, g: usize) -> Result<f64> {
    if active > g {
        return Err(Error::Parameter {
            name: "active",
            value: active as u64,
            constraint: "active count cannot exceed g",
        });
    }
    if active == g {
        return Err(Error::Saturated { g });
    }
    let g = g as f64;
    Ok(-g * ((g - active as f64) / g).ln())
}
