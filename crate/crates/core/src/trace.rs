//! Trace I/O and synthetic traffic.
//!
//! The wire format is UTF-8 text, one event per line as
//! `slice,aip,bip` with dotted-quad addresses, `#` comments, and a header
//! comment `# slice_seconds=N` carrying the slice duration. Events must
//! appear in non-decreasing slice order. Column 2 is always the
//! monitored-side host.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::net::Ipv4Addr;

use crate::error::{Error, Result};
use crate::seed::SplitMix64;

/// One observed communication event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairEvent {
    pub slice: u64,
    pub aip: u32,
    pub bip: u32,
}

/// Streaming trace reader that validates syntax and slice ordering.
pub struct TraceReader<R> {
    reader: R,
    line_no: u64,
    prev_slice: Option<u64>,
    buf: String,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            line_no: 0,
            prev_slice: None,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<PairEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let buf = std::mem::take(&mut self.buf);
            let line = buf.trim();
            if line.is_empty() || line.starts_with('#') {
                self.buf = buf;
                continue;
            }
            let parsed = self.parse_line(line);
            self.buf = buf;
            return Some(parsed);
        }
    }
}

impl<R: BufRead> TraceReader<R> {
    fn parse_line(&mut self, line: &str) -> Result<PairEvent> {
        let mut fields = line.split(',');
        let (slice, aip, bip) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(s), Some(a), Some(b), None) => (s, a, b),
            _ => {
                return Err(Error::Parse {
                    line: self.line_no,
                    msg: format!("expected 3 fields `slice,aip,bip`, got {line:?}"),
                })
            }
        };
        let slice: u64 = slice.trim().parse().map_err(|_| Error::Parse {
            line: self.line_no,
            msg: format!("bad slice index {slice:?}"),
        })?;
        let aip = parse_ip(aip.trim()).ok_or_else(|| Error::Parse {
            line: self.line_no,
            msg: format!("bad IPv4 address {aip:?}"),
        })?;
        let bip = parse_ip(bip.trim()).ok_or_else(|| Error::Parse {
            line: self.line_no,
            msg: format!("bad IPv4 address {bip:?}"),
        })?;
        if let Some(prev) = self.prev_slice {
            if slice < prev {
                return Err(Error::SliceOrder {
                    line: self.line_no,
                    prev,
                    slice,
                });
            }
        }
        self.prev_slice = Some(slice);
        Ok(PairEvent { slice, aip, bip })
    }
}

fn parse_ip(s: &str) -> Option<u32> {
    s.parse::<Ipv4Addr>().ok().map(u32::from)
}

/// Parse an entire trace into memory.
pub fn parse_trace<R: BufRead>(reader: R) -> Result<Vec<PairEvent>> {
    TraceReader::new(reader).collect()
}

/// Write a trace with the standard header comment.
pub fn write_trace<W: Write>(w: &mut W, events: &[PairEvent], slice_seconds: u64) -> Result<()> {
    writeln!(w, "# slice_seconds={slice_seconds}")?;
    for e in events {
        writeln!(
            w,
            "{},{},{}",
            e.slice,
            Ipv4Addr::from(e.aip),
            Ipv4Addr::from(e.bip)
        )?;
    }
    Ok(())
}

/// A planted super point: `cardinality` distinct peers, all inside
/// `[span_start, span_end]`.
#[derive(Clone, Copy, Debug)]
pub struct PlantedSpec {
    pub ip: u32,
    pub cardinality: u64,
    pub span_start: u64,
    pub span_end: u64,
}

/// Degree distribution for background hosts.
#[derive(Clone, Copy, Debug)]
pub enum DegreeDist {
    Fixed(u64),
    Uniform { min: u64, max: u64 },
}

impl DegreeDist {
    fn sample(&self, rng: &mut SplitMix64) -> u64 {
        match *self {
            DegreeDist::Fixed(n) => n,
            DegreeDist::Uniform { min, max } => rng.next_range(min, max),
        }
    }
}

/// Specification for a synthetic trace.
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub slices: u64,
    pub background_hosts: u64,
    pub background_degree: DegreeDist,
    pub planted: Vec<PlantedSpec>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.slices == 0 {
            return Err(Error::Synthetic("slice count must be positive".into()));
        }
        if let DegreeDist::Uniform { min, max } = self.background_degree {
            if min > max {
                return Err(Error::Synthetic(format!(
                    "degree range {min}..{max} is empty"
                )));
            }
        }
        let mut seen = HashSet::new();
        for p in &self.planted {
            if p.cardinality > u32::MAX as u64 {
                return Err(Error::Synthetic(format!(
                    "target cardinality {} exceeds the address space",
                    p.cardinality
                )));
            }
            if p.span_start > p.span_end {
                return Err(Error::Synthetic(format!(
                    "span end {} before start {}",
                    p.span_end, p.span_start
                )));
            }
            if p.span_end >= self.slices {
                return Err(Error::Synthetic(format!(
                    "span end {} outside trace of {} slices",
                    p.span_end, self.slices
                )));
            }
            if !seen.insert(p.ip) {
                return Err(Error::Synthetic(format!(
                    "host {} planted twice",
                    Ipv4Addr::from(p.ip)
                )));
            }
        }
        Ok(())
    }
}

/// Generate a synthetic trace. Deterministic for a fixed seed; each
/// planted host gets exactly its target number of distinct peers inside
/// its span, so the oracle truth is known by construction.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<PairEvent>> {
    spec.validate()?;
    let planted_ips: HashSet<u32> = spec.planted.iter().map(|p| p.ip).collect();
    let mut rng = SplitMix64::new(spec.seed);
    let mut events = Vec::new();

    for p in &spec.planted {
        let mut peers = HashSet::with_capacity(p.cardinality as usize);
        while peers.len() < p.cardinality as usize {
            peers.insert(rng.next_u32());
        }
        let mut peers: Vec<u32> = peers.into_iter().collect();
        peers.sort_unstable(); // HashSet iteration order is not deterministic
        for bip in peers {
            let slice = rng.next_range(p.span_start, p.span_end);
            events.push(PairEvent {
                slice,
                aip: p.ip,
                bip,
            });
        }
    }

    for _ in 0..spec.background_hosts {
        let aip = loop {
            let candidate = rng.next_u32();
            if !planted_ips.contains(&candidate) {
                break candidate;
            }
        };
        let degree = spec.background_degree.sample(&mut rng);
        let mut peers = HashSet::with_capacity(degree as usize);
        while (peers.len() as u64) < degree.min(u32::MAX as u64) {
            peers.insert(rng.next_u32());
        }
        let mut peers: Vec<u32> = peers.into_iter().collect();
        peers.sort_unstable();
        for bip in peers {
            let slice = rng.next_below(spec.slices);
            events.push(PairEvent { slice, aip, bip });
        }
    }

    events.sort_by_key(|e| e.slice);
    Ok(events)
}

/// Specification for the window-boundary scenario: one host whose peers
/// split into two fresh halves on either side of a boundary slice, so it
/// only reaches full cardinality under sliding evaluation.
#[derive(Clone, Copy, Debug)]
pub struct BoundarySpannerSpec {
    pub ip: u32,
    pub half_peers: u64,
    pub boundary_slice: u64,
    pub half_span: u64,
    /// Total trace length; must extend past the boundary so sliding
    /// windows can cover both halves.
    pub slices: u64,
    pub background_hosts: u64,
    pub background_degree: DegreeDist,
    pub seed: u64,
}

/// Generate the boundary scenario. The host contributes `half_peers`
/// distinct peers in `[boundary - half_span, boundary)` and `half_peers`
/// fresh ones in `[boundary, boundary + half_span)`.
pub fn boundary_spanner(spec: &BoundarySpannerSpec) -> Result<Vec<PairEvent>> {
    if spec.half_span == 0 || spec.boundary_slice < spec.half_span {
        return Err(Error::Synthetic(
            "boundary must leave room for the first half".into(),
        ));
    }
    if spec.boundary_slice + spec.half_span > spec.slices {
        return Err(Error::Synthetic(
            "trace too short for the second half".into(),
        ));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let mut peers = HashSet::with_capacity(2 * spec.half_peers as usize);
    while peers.len() < 2 * spec.half_peers as usize {
        peers.insert(rng.next_u32());
    }
    let mut peers: Vec<u32> = peers.into_iter().collect();
    peers.sort_unstable();
    let mut events = Vec::new();
    // round-robin placement so every slice of each half is occupied and the
    // truth sweep is exact, not merely probable
    for (i, &bip) in peers.iter().enumerate() {
        let i = i as u64;
        let slice = if i < spec.half_peers {
            spec.boundary_slice - spec.half_span + i % spec.half_span
        } else {
            spec.boundary_slice + (i - spec.half_peers) % spec.half_span
        };
        events.push(PairEvent {
            slice,
            aip: spec.ip,
            bip,
        });
    }
    for _ in 0..spec.background_hosts {
        let aip = loop {
            let candidate = rng.next_u32();
            if candidate != spec.ip {
                break candidate;
            }
        };
        for _ in 0..spec.background_degree.sample(&mut rng) {
            events.push(PairEvent {
                slice: rng.next_below(spec.slices),
                aip,
                bip: rng.next_u32(),
            });
        }
    }
    events.sort_by_key(|e| e.slice);
    Ok(events)
}

/// Re-bucket a trace for discrete-window evaluation: every run of
/// `window_slices` original slices becomes one slice, so a window of one
/// slice is a discrete window of the original duration.
pub fn rebucket_discrete(events: &mut [PairEvent], window_slices: u64) -> Result<()> {
    if window_slices == 0 {
        return Err(Error::Parameter {
            name: "window_slices",
            value: 0,
            constraint: "discrete window must cover at least one slice",
        });
    }
    for e in events.iter_mut() {
        e.slice /= window_slices;
    }
    Ok(())
}
