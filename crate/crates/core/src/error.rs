use thiserror::Error;

use crate::rrh::Violation;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value is outside its documented range.
    #[error("parameter {name} = {value} out of range: {constraint}")]
    Parameter {
        name: &'static str,
        value: u64,
        constraint: &'static str,
    },

    /// Hash-scheme parameters violate one or more structural attributes.
    #[error("invalid hash parameters: {0:?}")]
    HashParams(Vec<Violation>),

    /// Every counter is active; the linear estimate is unbounded and the
    /// caller should report "at or above capacity".
    #[error("estimator saturated: all {g} counters active")]
    Saturated { g: usize },

    /// The false-active probability is so close to 1 that the corrected
    /// estimate carries no signal.
    #[error("cube overloaded: false-active probability {up} leaves no usable signal")]
    CubeOverload { up: f64 },

    /// A frame produced more candidate column tuples than the configured cap.
    /// Detection for that frame is degraded, never silently truncated.
    #[error("frame {frame}: {tuples} candidate tuples exceed cap {cap}")]
    FrameOverflow { frame: u32, tuples: u128, cap: u64 },

    /// Detection metrics are undefined when the window holds no true super point.
    #[error("metrics undefined: no true super points in window")]
    UndefinedMetrics,

    /// Malformed trace line.
    #[error("trace line {line}: {msg}")]
    Parse { line: u64, msg: String },

    /// Trace slices went backwards.
    #[error("trace line {line}: slice {slice} precedes slice {prev}")]
    SliceOrder { line: u64, prev: u64, slice: u64 },

    /// Synthetic trace specification problem.
    #[error("synthetic spec: {0}")]
    Synthetic(String),

    /// Snapshot encode/decode problem.
    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
