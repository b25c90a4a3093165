//! # econokit-core
//!
//! Quantitative econophysics toolkit. The crate bundles the numerical
//! machinery behind a family of classic market-analysis procedures:
//!
//! - [`series`] — CSV ingestion, validation, windowing and return
//!   transforms for time series; the universal input of every module.
//! - [`dfa`] — Detrended Fluctuation Analysis: profile construction,
//!   per-box polynomial detrending, fluctuation curves, Hurst-exponent
//!   estimation, persistence diagnostics and rolling regime tracks.
//! - [`lppl`] — log-periodic power-law divergence laws, deterministic
//!   grid fitting with conditionally linear parameters, the split-fit
//!   crash-prediction protocol and its critical-time-gap risk track.
//! - [`zipf`] — alphabet coding of return series, word-frequency
//!   tables, Zipf rank-frequency and Pareto tail exponent fits.
//! - [`portfolio`] — Sharpe ratio, beta, and a word-table signal
//!   backtester with equity-curve accounting.
//! - [`distance`] — correlation- and entropy-based distances between
//!   macroeconomic series, rolling mean-distance tracks, minimum
//!   spanning trees and single-linkage hierarchies.
//! - [`wealth`] — closed-market kinetic wealth exchange with savings
//!   propensities and tax leakage, plus tail-exponent estimation.
//! - [`synth`] — seeded synthetic generators (Gaussian noise,
//!   fractional Gaussian noise via circulant spectral synthesis, Zipf
//!   and Pareto samplers) used for calibration and testing.
//!
//! All analysis types are immutable after construction and safe to share
//! across threads. Seeded computations are bit-reproducible: the same
//! configuration and seed always yield the same output.

pub mod dfa;
pub mod distance;
pub mod error;
pub mod lppl;
pub mod portfolio;
pub mod series;
pub mod stats;
pub mod synth;
pub mod wealth;
pub mod zipf;

pub use error::{Error, Result};
pub use series::{ReturnKind, ReturnSeries, TimeSeries};
