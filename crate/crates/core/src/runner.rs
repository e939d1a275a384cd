//! Sliding-window run orchestration: drive a cube over a trace slice by
//! slice, report detections at each boundary, and optionally score them
//! against the exact oracle. One slice cycle is: scan the slice's events,
//! run boundary queries, then tick into the next slice.

use std::io::Write;
use std::net::Ipv4Addr;
use std::time::Instant;

use crate::cube::{AtvCube, CubeConfig, SuperPointReport};
use crate::error::{Error, Result};
use crate::oracle::{self, DetectionMetrics, SlidingTruth};
use crate::rrh::RrhParams;
use crate::trace::PairEvent;

/// Everything a detection run needs. Mirrors the command-line flags.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub k: u32,
    pub k_prime: u32,
    pub g: usize,
    pub c: u32,
    pub rows: u32,
    pub u: u32,
    pub s: u32,
    pub theta: f64,
    pub seed: u64,
    /// Report every `cadence` slices.
    pub cadence: u64,
    pub candidate_cap: u64,
    pub oracle: bool,
}

impl RunConfig {
    /// Paper-style defaults; override per run.
    pub fn new() -> Self {
        Self {
            k: 300,
            k_prime: 300,
            g: 4096,
            c: 14,
            rows: 4,
            u: 4,
            s: 6,
            theta: 1024.0,
            seed: 1,
            cadence: 1,
            candidate_cap: 1_000_000,
            oracle: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_prime == 0 || self.k_prime > self.k {
            return Err(Error::Parameter {
                name: "k_prime",
                value: self.k_prime as u64,
                constraint: "query window must be in [1, k]",
            });
        }
        if self.cadence == 0 {
            return Err(Error::Parameter {
                name: "cadence",
                value: 0,
                constraint: "reporting cadence must be positive",
            });
        }
        self.build_cube().map(|_| ())
    }

    pub fn params(&self) -> Result<RrhParams> {
        RrhParams::from_master_seed(self.c, self.rows, self.s, self.u, self.seed)
    }

    pub fn build_cube(&self) -> Result<AtvCube> {
        AtvCube::new(
            self.params()?,
            CubeConfig {
                g: self.g,
                k: self.k,
                theta: self.theta,
                candidate_cap: self.candidate_cap,
            },
        )
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::new()
    }
}

/// One reporting boundary's output.
#[derive(Clone, Debug)]
pub struct WindowReport {
    pub end_slice: u64,
    pub reports: Vec<SuperPointReport>,
    /// Present when the oracle is enabled; `None` inside means the window
    /// had no true super points so the rates are undefined.
    pub metrics: Option<Option<DetectionMetrics>>,
}

#[derive(Clone, Debug, Default)]
pub struct RunResult {
    pub windows: Vec<WindowReport>,
    pub events_scanned: u64,
    pub slices: u64,
}

/// Run detection over a sorted trace.
pub fn run_detect(cfg: &RunConfig, events: &[PairEvent]) -> Result<RunResult> {
    if cfg.cadence == 0 {
        return Err(Error::Parameter {
            name: "cadence",
            value: 0,
            constraint: "reporting cadence must be positive",
        });
    }
    if cfg.k_prime == 0 || cfg.k_prime > cfg.k {
        return Err(Error::Parameter {
            name: "k_prime",
            value: cfg.k_prime as u64,
            constraint: "query window must be in [1, k]",
        });
    }
    let mut cube = cfg.build_cube()?;
    let mut truth = cfg.oracle.then(|| SlidingTruth::new(events, cfg.k_prime));
    let mut result = RunResult::default();
    let Some(last_slice) = events.last().map(|e| e.slice) else {
        return Ok(result);
    };
    let mut batch: Vec<(u32, u32)> = Vec::new();
    let mut next_event = 0usize;
    for slice in 0..=last_slice {
        debug_assert_eq!(cube.current_slice(), slice);
        batch.clear();
        while next_event < events.len() && events[next_event].slice == slice {
            let e = events[next_event];
            batch.push((e.aip, e.bip));
            next_event += 1;
        }
        cube.scan_slice(&batch);
        result.events_scanned += batch.len() as u64;
        if let Some(t) = truth.as_mut() {
            t.advance_to(slice);
        }
        if slice % cfg.cadence == 0 {
            let reports = cube.detect(cfg.k_prime)?;
            let metrics = truth.as_ref().map(|t| {
                let detected = reports.iter().map(|r| r.ip).collect();
                match oracle::metrics(&detected, &t.superpoints(cfg.theta)) {
                    Ok(m) => Some(m),
                    Err(Error::UndefinedMetrics) => None,
                    Err(_) => unreachable!("metrics only fails on empty truth"),
                }
            });
            result.windows.push(WindowReport {
                end_slice: slice,
                reports,
                metrics,
            });
        }
        if slice < last_slice {
            cube.tick();
        }
    }
    result.slices = last_slice + 1;
    Ok(result)
}

/// Append-only report CSV: `window_end_slice,ip,estimate`.
pub fn write_report_csv<W: Write>(result: &RunResult, w: &mut W) -> Result<()> {
    writeln!(w, "window_end_slice,ip,estimate")?;
    for window in &result.windows {
        for r in &window.reports {
            writeln!(
                w,
                "{},{},{:.3}",
                window.end_slice,
                Ipv4Addr::from(r.ip),
                r.estimate
            )?;
        }
    }
    Ok(())
}

/// Append-only metrics CSV: `window_end_slice,fpr,fnr,tfr`; undefined
/// windows carry `nan`.
pub fn write_metrics_csv<W: Write>(result: &RunResult, w: &mut W) -> Result<()> {
    writeln!(w, "window_end_slice,fpr,fnr,tfr")?;
    for window in &result.windows {
        if let Some(metrics) = &window.metrics {
            match metrics {
                Some(m) => writeln!(
                    w,
                    "{},{:.6},{:.6},{:.6}",
                    window.end_slice, m.fpr, m.fnr, m.tfr
                )?,
                None => writeln!(w, "{},nan,nan,nan", window.end_slice)?,
            }
        }
    }
    Ok(())
}

/// Per-slice cost table from a bench run.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub slice: u64,
    pub events: u64,
    pub scan_ns: u128,
    pub tick_examined: Option<u64>,
    pub tick_expected: Option<u64>,
    pub detect_ns: Option<u128>,
}

/// Measure per-slice scan cost, per-tick examination counts (validated
/// against the closed form) and detect latency.
pub fn run_bench(cfg: &RunConfig, events: &[PairEvent]) -> Result<Vec<BenchRow>> {
    let mut cube = cfg.build_cube()?;
    let mut rows = Vec::new();
    let Some(last_slice) = events.last().map(|e| e.slice) else {
        return Ok(rows);
    };
    let mut batch: Vec<(u32, u32)> = Vec::new();
    let mut next_event = 0usize;
    for slice in 0..=last_slice {
        batch.clear();
        while next_event < events.len() && events[next_event].slice == slice {
            let e = events[next_event];
            batch.push((e.aip, e.bip));
            next_event += 1;
        }
        let scan_start = Instant::now();
        cube.scan_slice(&batch);
        let scan_ns = scan_start.elapsed().as_nanos();

        let detect_ns = if slice % cfg.cadence == 0 {
            let t = Instant::now();
            cube.detect(cfg.k_prime)?;
            Some(t.elapsed().as_nanos())
        } else {
            None
        };

        let (tick_examined, tick_expected) = if slice < last_slice {
            let expected = cube.expected_tick_cost() as u64;
            let examined = cube.tick() as u64;
            if examined != expected {
                return Err(Error::Parameter {
                    name: "tick_examined",
                    value: examined,
                    constraint: "instrumented tick cost diverged from the closed form",
                });
            }
            (Some(examined), Some(expected))
        } else {
            (None, None)
        };

        rows.push(BenchRow {
            slice,
            events: batch.len() as u64,
            scan_ns,
            tick_examined,
            tick_expected,
            detect_ns,
        });
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], w: &mut W) -> Result<()> {
    writeln!(
        w,
        "slice,events,scan_ns,events_per_sec,tick_examined,tick_expected,detect_ns"
    )?;
    for r in rows {
        let rate = if r.scan_ns > 0 {
            format!("{:.0}", r.events as f64 / (r.scan_ns as f64 / 1e9))
        } else {
            String::new()
        };
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.slice,
            r.events,
            r.scan_ns,
            rate,
            opt(r.tick_examined),
            opt(r.tick_expected),
            r.detect_ns.map(|x| x.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}
