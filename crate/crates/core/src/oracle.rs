//! Exact brute-force reference: per-host distinct-peer counts over any
//! window, the exact super point set, and the detection error metrics.
//! Deliberately independent of the sketch path — no shared hashing, no
//! shared counters — and allowed to be as slow and large as it likes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use crate::error::{Error, Result};
use crate::trace::PairEvent;

/// Exact per-host cardinalities for one window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowTruth {
    pub end_slice: u64,
    pub k_prime: u32,
    counts: BTreeMap<u32, u64>,
}

impl WindowTruth {
    pub fn count(&self, ip: u32) -> u64 {
        self.counts.get(&ip).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&ip, &n)| (ip, n))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// CSV rows `end_slice,ip,exact_count` for offline diffing.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        for (ip, n) in self.iter() {
            writeln!(
                w,
                "{},{},{}",
                self.end_slice,
                std::net::Ipv4Addr::from(ip),
                n
            )?;
        }
        Ok(())
    }
}

/// Exact distinct-peer counts per source host over the window
/// `[end_slice - k_prime + 1, end_slice]`, by explicit peer sets.
/// `events` must be sorted by slice.
pub fn exact_cardinalities(events: &[PairEvent], end_slice: u64, k_prime: u32) -> WindowTruth {
    debug_assert!(events.windows(2).all(|w| w[0].slice <= w[1].slice));
    let start = end_slice.saturating_sub(k_prime as u64 - 1);
    let mut peers: HashMap<u32, BTreeSet<u32>> = HashMap::new();
    for e in events {
        if e.slice >= start && e.slice <= end_slice {
            peers.entry(e.aip).or_default().insert(e.bip);
        }
    }
    let counts = peers
        .into_iter()
        .map(|(ip, set)| (ip, set.len() as u64))
        .collect();
    WindowTruth {
        end_slice,
        k_prime,
        counts,
    }
}

/// Hosts whose exact cardinality reaches the threshold (boundary inclusive).
pub fn exact_superpoints(truth: &WindowTruth, theta: f64) -> BTreeSet<u32> {
    truth
        .iter()
        .filter(|&(_, n)| n as f64 >= theta)
        .map(|(ip, _)| ip)
        .collect()
}

/// False-positive, false-negative and total false rates against the truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionMetrics {
    pub fpr: f64,
    pub fnr: f64,
    pub tfr: f64,
    pub n: usize,
    pub n_plus: usize,
    pub n_minus: usize,
}

/// Definition of the rates: with `N` true super points, `N+` spurious
/// detections and `N-` misses, `fpr = N+/N`, `fnr = N-/N`, `tfr` their sum.
/// Undefined when `N == 0`.
pub fn metrics(detected: &BTreeSet<u32>, truth_supers: &BTreeSet<u32>) -> Result<DetectionMetrics> {
    let n = truth_supers.len();
    if n == 0 {
        return Err(Error::UndefinedMetrics);
    }
    let n_plus = detected.difference(truth_supers).count();
    let n_minus = truth_supers.difference(detected).count();
    let fpr = n_plus as f64 / n as f64;
    let fnr = n_minus as f64 / n as f64;
    Ok(DetectionMetrics {
        fpr,
        fnr,
        tfr: fpr + fnr,
        n,
        n_plus,
        n_minus,
    })
}

/// Incremental exact truth for a full sliding sweep: advancing one slice
/// adds that slice's events and retires the slice that fell out of the
/// window. Each event is added and removed exactly once over a sweep.
pub struct SlidingTruth<'a> {
    events: &'a [PairEvent],
    k_prime: u32,
    /// next event index to add
    head: usize,
    /// next event index to retire
    tail: usize,
    end_slice: Option<u64>,
    peers: HashMap<u32, HashMap<u32, u32>>,
}

impl<'a> SlidingTruth<'a> {
    pub fn new(events: &'a [PairEvent], k_prime: u32) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0].slice <= w[1].slice));
        Self {
            events,
            k_prime,
            head: 0,
            tail: 0,
            end_slice: None,
            peers: HashMap::new(),
        }
    }

    /// Move the window end forward to `end_slice`.
    pub fn advance_to(&mut self, end_slice: u64) {
        if let Some(cur) = self.end_slice {
            assert!(end_slice >= cur, "sliding truth cannot move backwards");
        }
        while self.head < self.events.len() && self.events[self.head].slice <= end_slice {
            let e = &self.events[self.head];
            *self.peers.entry(e.aip).or_default().entry(e.bip).or_insert(0) += 1;
            self.head += 1;
        }
        let start = end_slice.saturating_sub(self.k_prime as u64 - 1);
        while self.tail < self.head && self.events[self.tail].slice < start {
            let e = &self.events[self.tail];
            if let Some(host) = self.peers.get_mut(&e.aip) {
                if let Some(multiplicity) = host.get_mut(&e.bip) {
                    *multiplicity -= 1;
                    if *multiplicity == 0 {
                        host.remove(&e.bip);
                    }
                }
                if host.is_empty() {
                    self.peers.remove(&e.aip);
                }
            }
            self.tail += 1;
        }
        self.end_slice = Some(end_slice);
    }

    pub fn count(&self, ip: u32) -> u64 {
        self.peers.get(&ip).map(|m| m.len() as u64).unwrap_or(0)
    }

    pub fn superpoints(&self, theta: f64) -> BTreeSet<u32> {
        self.peers
            .iter()
            .filter(|(_, peers)| peers.len() as f64 >= theta)
            .map(|(&ip, _)| ip)
            .collect()
    }

    pub fn truth(&self) -> WindowTruth {
        WindowTruth {
            end_slice: self.end_slice.unwrap_or(0),
            k_prime: self.k_prime,
            counts: self
                .peers
                .iter()
                .map(|(&ip, peers)| (ip, peers.len() as u64))
                .collect(),
        }
    }
}
