//! Command-line driver: run sliding-window super point detection over a
//! trace, generate synthetic traces, or benchmark per-slice costs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;

use superpoint::runner::{self, RunConfig};
use superpoint::trace::{
    self, BoundarySpannerSpec, DegreeDist, PairEvent, PlantedSpec, SyntheticSpec,
};

#[derive(Parser, Debug)]
#[command(
    name = "superpoint",
    about = "Detect super points and estimate their cardinalities over a sliding time window",
    long_about = None
)]
struct Args {
    /// Config file in key=value form; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Input trace (`slice,aip,bip` lines).
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Window capacity in slices.
    #[arg(long)]
    k: Option<u32>,

    /// Query window length (defaults to k).
    #[arg(long)]
    kprime: Option<u32>,

    /// Counters per vector.
    #[arg(long)]
    g: Option<usize>,

    /// Column index bits (2^c columns).
    #[arg(long)]
    c: Option<u32>,

    /// Rows per host.
    #[arg(long)]
    r: Option<u32>,

    /// Frame index bits (2^u frames).
    #[arg(long)]
    u: Option<u32>,

    /// Column window stride in bits.
    #[arg(long)]
    s: Option<u32>,

    /// Super point threshold.
    #[arg(long)]
    theta: Option<f64>,

    /// Master seed for all hashing.
    #[arg(long)]
    seed: Option<u64>,

    /// Report CSV path (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,

    /// Metrics CSV path (stdout when omitted); needs --oracle.
    #[arg(long)]
    metrics: Option<PathBuf>,

    /// Score detections against the exact oracle.
    #[arg(long)]
    oracle: bool,

    /// Report every N slices.
    #[arg(long)]
    cadence: Option<u64>,

    /// Per-frame candidate tuple cap.
    #[arg(long)]
    cap: Option<u64>,

    /// Benchmark per-slice costs instead of writing reports.
    #[arg(long)]
    bench: bool,

    /// Generate a synthetic trace from a spec file; requires --out.
    #[arg(long)]
    generate: Option<PathBuf>,

    /// Generate the window-boundary scenario trace; requires --out.
    #[arg(long)]
    boundary: bool,

    /// Output path for --generate / --boundary.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Discrete-window preset: re-bucket N original slices per window and
    /// run with k = k' = 1.
    #[arg(long)]
    discrete: Option<u64>,

    /// Dump the oracle's exact per-window truth CSV here; needs --oracle.
    #[arg(long)]
    truth: Option<PathBuf>,
}

/// Values loadable from the key=value config file.
#[derive(Default, Debug)]
struct FileConfig {
    trace: Option<PathBuf>,
    k: Option<u32>,
    kprime: Option<u32>,
    g: Option<usize>,
    c: Option<u32>,
    r: Option<u32>,
    u: Option<u32>,
    s: Option<u32>,
    theta: Option<f64>,
    seed: Option<u64>,
    report: Option<PathBuf>,
    metrics: Option<PathBuf>,
    oracle: Option<bool>,
    cadence: Option<u64>,
    cap: Option<u64>,
}

fn parse_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut cfg = FileConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), idx + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let fail = || anyhow!("{}:{}: bad value for {key}", path.display(), idx + 1);
        match key {
            "trace" => cfg.trace = Some(PathBuf::from(value)),
            "k" => cfg.k = Some(value.parse().map_err(|_| fail())?),
            "kprime" => cfg.kprime = Some(value.parse().map_err(|_| fail())?),
            "g" => cfg.g = Some(value.parse().map_err(|_| fail())?),
            "c" => cfg.c = Some(value.parse().map_err(|_| fail())?),
            "r" => cfg.r = Some(value.parse().map_err(|_| fail())?),
            "u" => cfg.u = Some(value.parse().map_err(|_| fail())?),
            "s" => cfg.s = Some(value.parse().map_err(|_| fail())?),
            "theta" => cfg.theta = Some(value.parse().map_err(|_| fail())?),
            "seed" => cfg.seed = Some(value.parse().map_err(|_| fail())?),
            "report" => cfg.report = Some(PathBuf::from(value)),
            "metrics" => cfg.metrics = Some(PathBuf::from(value)),
            "oracle" => cfg.oracle = Some(value.parse().map_err(|_| fail())?),
            "cadence" => cfg.cadence = Some(value.parse().map_err(|_| fail())?),
            "cap" => cfg.cap = Some(value.parse().map_err(|_| fail())?),
            other => bail!("{}:{}: unknown key {other:?}", path.display(), idx + 1),
        }
    }
    Ok(cfg)
}

struct Resolved {
    run: RunConfig,
    trace: Option<PathBuf>,
    report: Option<PathBuf>,
    metrics: Option<PathBuf>,
}

fn resolve(args: &Args) -> Result<Resolved> {
    let file = match &args.config {
        Some(path) => parse_file_config(path)?,
        None => FileConfig::default(),
    };
    let mut run = RunConfig::new();
    run.k = args.k.or(file.k).unwrap_or(run.k);
    run.k_prime = args.kprime.or(file.kprime).unwrap_or(run.k);
    run.g = args.g.or(file.g).unwrap_or(run.g);
    run.c = args.c.or(file.c).unwrap_or(run.c);
    run.rows = args.r.or(file.r).unwrap_or(run.rows);
    run.u = args.u.or(file.u).unwrap_or(run.u);
    run.s = args.s.or(file.s).unwrap_or(run.s);
    run.theta = args.theta.or(file.theta).unwrap_or(run.theta);
    run.seed = args.seed.or(file.seed).unwrap_or(run.seed);
    run.cadence = args.cadence.or(file.cadence).unwrap_or(run.cadence);
    run.candidate_cap = args.cap.or(file.cap).unwrap_or(run.candidate_cap);
    run.oracle = args.oracle || file.oracle.unwrap_or(false);
    if args.discrete.is_some() {
        run.k = 1;
        run.k_prime = 1;
    }
    Ok(Resolved {
        run,
        trace: args.trace.clone().or(file.trace),
        report: args.report.clone().or(file.report),
        metrics: args.metrics.clone().or(file.metrics),
    })
}

fn load_events(path: &Path, discrete: Option<u64>) -> Result<Vec<PairEvent>> {
    let file = File::open(path).with_context(|| format!("opening trace {}", path.display()))?;
    let mut events = trace::parse_trace(BufReader::new(file))
        .with_context(|| format!("parsing trace {}", path.display()))?;
    if let Some(window) = discrete {
        trace::rebucket_discrete(&mut events, window)?;
    }
    Ok(events)
}

/// Parse `ip,cardinality,span_start,span_end`.
fn parse_plant(value: &str) -> Result<PlantedSpec> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let [ip, cardinality, start, end] = parts.as_slice() else {
        bail!("plant expects ip,cardinality,span_start,span_end; got {value:?}");
    };
    Ok(PlantedSpec {
        ip: ip
            .parse::<Ipv4Addr>()
            .map(u32::from)
            .map_err(|_| anyhow!("bad planted ip {ip:?}"))?,
        cardinality: cardinality.parse()?,
        span_start: start.parse()?,
        span_end: end.parse()?,
    })
}

/// Parse `fixed:N` or `uniform:MIN:MAX`.
fn parse_degree(value: &str) -> Result<DegreeDist> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    match parts.as_slice() {
        ["fixed", n] => Ok(DegreeDist::Fixed(n.parse()?)),
        ["uniform", min, max] => Ok(DegreeDist::Uniform {
            min: min.parse()?,
            max: max.parse()?,
        }),
        _ => bail!("degree expects fixed:N or uniform:MIN:MAX; got {value:?}"),
    }
}

fn parse_synthetic_spec(path: &Path) -> Result<SyntheticSpec> {
    let file = File::open(path).with_context(|| format!("opening spec {}", path.display()))?;
    let mut spec = SyntheticSpec {
        slices: 0,
        background_hosts: 0,
        background_degree: DegreeDist::Fixed(0),
        planted: Vec::new(),
        seed: 1,
    };
    for (idx, raw) in BufReader::new(file).lines().enumerate() {
        let raw = raw?;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), idx + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "slices" => spec.slices = value.parse()?,
            "seed" => spec.seed = value.parse()?,
            "background_hosts" => spec.background_hosts = value.parse()?,
            "background_degree" => spec.background_degree = parse_degree(value)?,
            "plant" => spec.planted.push(parse_plant(value)?),
            other => bail!("{}:{}: unknown key {other:?}", path.display(), idx + 1),
        }
    }
    Ok(spec)
}

fn write_events(path: &Path, events: &[PairEvent]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    trace::write_trace(&mut w, events, 1)?;
    w.flush()?;
    Ok(())
}

/// Either a file or stdout, buffered.
fn open_sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn main() -> Result<()> {
    let args = Args::parse();

    if let Some(spec_path) = &args.generate {
        let out = args
            .out
            .as_deref()
            .ok_or_else(|| anyhow!("--generate needs --out"))?;
        let spec = parse_synthetic_spec(spec_path)?;
        let events = trace::generate_synthetic(&spec)?;
        write_events(out, &events)?;
        eprintln!("wrote {} events to {}", events.len(), out.display());
        return Ok(());
    }

    let resolved = resolve(&args)?;

    if args.boundary {
        let out = args
            .out
            .as_deref()
            .ok_or_else(|| anyhow!("--boundary needs --out"))?;
        let k = resolved.run.k as u64;
        let spec = BoundarySpannerSpec {
            ip: u32::from(Ipv4Addr::new(10, 99, 0, 1)),
            half_peers: (resolved.run.theta / 2.0).ceil() as u64,
            boundary_slice: k,
            half_span: (k / 3).max(1),
            slices: 2 * k,
            background_hosts: 5,
            background_degree: DegreeDist::Uniform { min: 5, max: 20 },
            seed: resolved.run.seed,
        };
        let events = trace::boundary_spanner(&spec)?;
        write_events(out, &events)?;
        eprintln!("wrote {} events to {}", events.len(), out.display());
        return Ok(());
    }

    let trace_path = resolved
        .trace
        .as_deref()
        .ok_or_else(|| anyhow!("--trace is required"))?;
    let events = load_events(trace_path, args.discrete)?;

    if args.bench {
        let rows = runner::run_bench(&resolved.run, &events)?;
        let mut sink = open_sink(resolved.report.as_deref())?;
        runner::write_bench_csv(&rows, &mut sink)?;
        sink.flush()?;
        return Ok(());
    }

    let result = runner::run_detect(&resolved.run, &events)?;
    {
        let mut sink = open_sink(resolved.report.as_deref())?;
        runner::write_report_csv(&result, &mut sink)?;
        sink.flush()?;
    }
    if resolved.run.oracle {
        let mut sink = open_sink(resolved.metrics.as_deref())?;
        runner::write_metrics_csv(&result, &mut sink)?;
        sink.flush()?;
    }
    if let Some(truth_path) = &args.truth {
        if !resolved.run.oracle {
            bail!("--truth needs --oracle");
        }
        let mut sliding = superpoint::oracle::SlidingTruth::new(&events, resolved.run.k_prime);
        let mut sink = open_sink(Some(truth_path))?;
        writeln!(sink, "end_slice,ip,exact_count")?;
        for window in &result.windows {
            sliding.advance_to(window.end_slice);
            sliding.truth().write_csv(&mut sink)?;
        }
        sink.flush()?;
    }
    Ok(())
}
