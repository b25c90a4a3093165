//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the analysis modules.
///
/// Variants carry enough context (row numbers, offending values, bounds)
/// to be surfaced directly to a CLI user.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV parse failure at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("empty series: no data rows after ingestion")]
    EmptySeries,

    #[error("non-monotone timestamps at row {row}: {previous} followed by {current}")]
    NonMonotoneTimestamps {
        row: usize,
        previous: i64,
        current: i64,
    },

    #[error("non-finite value at row {row}")]
    NonFiniteValue { row: usize },

    #[error("series too short: length {len}, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("log returns undefined: non-positive value {value} at index {index}")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("window out of range: start {start} + length {len} exceeds series length {n}")]
    WindowOutOfRange { start: usize, len: usize, n: usize },

    #[error("box size {n} outside admissible range [{min}, {max}]")]
    BoxSizeOutOfRange { n: usize, min: usize, max: usize },

    #[error("no admissible box sizes for series length {n} at detrend degree {degree}")]
    EmptyBoxSchedule { n: usize, degree: usize },

    #[error("degenerate signal: fluctuation is zero at box size {n}, exponent fit aborted")]
    DegenerateSignal { n: usize },

    #[error("too few points for fit: {found} inside range, need at least {min}")]
    TooFewPoints { found: usize, min: usize },

    #[error("rolling window too short: {len} admits fewer than {min} box sizes")]
    WindowTooShort { len: usize, min: usize },

    #[error("critical-time grid is empty")]
    EmptyGrid,

    #[error("all critical-time candidates lie at or before the fit window end {window_end}")]
    CriticalTimeInsideWindow { window_end: f64 },

    #[error("evaluation time {t} at or beyond critical time {t_c}")]
    BeyondCriticalTime { t: f64, t_c: f64 },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("degenerate divergence fit: |B| = {b_abs:e} too small to detrend against")]
    DegenerateDivergence { b_abs: f64 },

    #[error("insufficient windows: got {got}, need at least {need}")]
    InsufficientWindows { got: usize, need: usize },

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("word length {m} exceeds letter-sequence length {len}")]
    WordTooLong { m: usize, len: usize },

    #[error("empty word table")]
    EmptyTable,

    #[error("degenerate frequencies: {0}")]
    DegenerateFrequencies(String),

    #[error("zero standard deviation: Sharpe ratio undefined")]
    ZeroStddev,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("zero market variance: beta undefined")]
    ZeroMarketVariance,

    #[error("prefix length {got} does not match word length {word_length} - 1")]
    PrefixLength { got: usize, word_length: usize },

    #[error("train window [{train_start}, {train_end}) does not precede trade window [{trade_start}, {trade_end})")]
    WindowsOverlap {
        train_start: usize,
        train_end: usize,
        trade_start: usize,
        trade_end: usize,
    },

    #[error("no tradable steps: {0}")]
    EmptySignals(String),

    #[error("constant series in window: correlation undefined for '{label}'")]
    ConstantSeries { label: String },

    #[error("degenerate encoding: series '{label}' maps to a single letter")]
    DegenerateEncoding { label: String },

    #[error("insufficient common support: {0}")]
    InsufficientSupport(String),

    #[error("non-finite distance entry at ({i}, {j})")]
    NonFiniteDistance { i: usize, j: usize },

    #[error("invalid market parameter: {0}")]
    InvalidParameter(String),

    #[error("tail too small: {got} agents in tail, need at least {min}")]
    TailTooSmall { got: usize, min: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
