//! The asynchronous timestamp counter.
//!
//! A counter value lives in `[0, 2k]` where `k` is the window capacity in
//! slices and `2k` is the inactive sentinel. Its clock advances by one per
//! slice modulo `2k`, and the counter only needs a maintenance pass when
//! its clock crosses `0` or `k` — once every `k` slices instead of every
//! slice. All functions here are pure; storage and mutation policy belong
//! to the vector and cube layers.

use crate::error::{Error, Result};

/// One asynchronous timestamp value in `[0, 2k]`; `2k` means inactive.
pub type AtValue = u32;

/// Largest supported window capacity (keeps `2k + 1` inside `u32`).
pub const MAX_K: u32 = (u32::MAX - 1) / 2;

/// A counter clock: an integer in `[0, 2k-1]` advancing one step per slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AtClock {
    act: u32,
    k: u32,
}

impl AtClock {
    pub fn new(act: u32, k: u32) -> Result<Self> {
        if k == 0 || k > MAX_K {
            return Err(Error::Parameter {
                name: "k",
                value: k as u64,
                constraint: "window capacity must be in [1, MAX_K]",
            });
        }
        if act >= 2 * k {
            return Err(Error::Parameter {
                name: "act",
                value: act as u64,
                constraint: "clock must be in [0, 2k-1]",
            });
        }
        Ok(Self { act, k })
    }

    #[inline]
    pub fn act(&self) -> u32 {
        self.act
    }

    #[inline]
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Advance one slice, wrapping at `2k`.
    pub fn advance(&mut self) {
        self.act += 1;
        if self.act == 2 * self.k {
            self.act = 0;
        }
    }
}

/// The inactive sentinel for window capacity `k`.
#[inline]
pub fn init_at(k: u32) -> AtValue {
    2 * k
}

/// Stamp a counter with the current clock value.
#[inline]
pub fn set_at(clock: AtClock) -> AtValue {
    clock.act
}

/// Was this counter stamped within the latest `k_prime` slices, counting
/// the slice currently being filled?
pub fn check_at(at: AtValue, clock: AtClock, k_prime: u32) -> Result<bool> {
    if k_prime == 0 || k_prime > clock.k {
        return Err(Error::Parameter {
            name: "k_prime",
            value: k_prime as u64,
            constraint: "query window must be in [1, k]",
        });
    }
    Ok(check_at_unchecked(at, clock.act, clock.k, k_prime))
}

/// `check_at` without the `k_prime` range check, for hot loops that have
/// already validated it once.
#[inline]
pub(crate) fn check_at_unchecked(at: AtValue, act: u32, k: u32, k_prime: u32) -> bool {
    let two_k = 2 * k as u64;
    if at as u64 == two_k {
        return false;
    }
    let dis = (act as u64 + two_k - at as u64) % two_k;
    dis < k_prime as u64
}

/// Maintenance pass at the beginning of a slice, before any stamps land.
/// A no-op unless the clock sits at `0` or `k`; at those two crossings any
/// stamp that can no longer denote a distance below `k` is retired to the
/// sentinel.
pub fn preserve_at(at: AtValue, clock: AtClock) -> AtValue {
    let k = clock.k;
    if !clock.act.is_multiple_of(k) {
        return at;
    }
    if clock.act == 0 && at <= k {
        return init_at(k);
    }
    if clock.act == k && ((k..2 * k).contains(&at) || at == 0) {
        return init_at(k);
    }
    at
}
