//! Sliding-window super point detection and cardinality estimation.
//!
//! A super point is a host that contacts at least `theta` distinct peers
//! within a window of `k` time slices that advances one slice at a time.
//! This crate detects them and estimates their cardinalities from a fixed
//! pool of counters:
//!
//! - [`at`]: the asynchronous timestamp counter, which only needs
//!   maintenance every `k` slices instead of every slice, at the cost of
//!   one extra bit.
//! - [`atv`]: vectors of those counters in staggered-clock blocks, with the
//!   linear cardinality estimate over any window length up to `k`.
//! - [`rrh`]: the reversible hash that spreads a host over `r` vectors of a
//!   shared cube and can rebuild the host address from the vector indices.
//! - [`cube`]: the `2^c x r x 2^u` vector cube — scanning, maintenance,
//!   candidate restoration and bias-corrected estimation.
//! - [`oracle`]: an exact brute-force reference for validating all of the
//!   above, plus the false-rate metrics.
//! - [`trace`]: the text trace format and synthetic trace generators.
//! - [`runner`]: whole-run orchestration shared by the CLI and the
//!   acceptance suite.
//!
//! Heavy inner loops (maintenance, weight scans, per-frame restoration)
//! run data-parallel under the default `parallel` feature and fall back to
//! sequential loops without it; results are bit-identical either way.

pub mod at;
pub mod atv;
pub mod cube;
pub mod error;
pub mod oracle;
pub mod rrh;
pub mod runner;
pub mod seed;
pub mod store;
pub mod trace;

pub use cube::{AtvCube, CubeConfig, SuperPointReport};
pub use error::{Error, Result};
pub use rrh::{Mangler, RrhDigest, RrhParams};
pub use runner::{run_bench, run_detect, RunConfig, RunResult};
pub use trace::PairEvent;
