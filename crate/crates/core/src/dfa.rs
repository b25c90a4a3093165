//! Detrended fluctuation analysis.
//!
//! The signal is integrated into a profile, the profile is tiled into
//! equal-size boxes, a least-squares polynomial is removed per box, and the
//! root-mean-square residual `f(n)` is regressed against box size on log-log
//! axes. The slope `alpha` measures long-range correlation: 0.5 for
//! uncorrelated increments, above for persistence, below for
//! antipersistence. `alpha` relates to the power-spectrum exponent through
//! `beta = 2*alpha - 1` and to the lag-one correlation of the integrated
//! signal through `C = 2^(2*alpha-1) - 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

/// Where the leftover `N mod n` points are dropped when boxes tile the
/// profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxAlignment {
    /// Boxes tile from the end of the series backward, so the first box
    /// holds the most recent points and the oldest remainder is dropped.
    /// The default: recent data carries the information in a growing series.
    #[default]
    NewestFirst,
    /// Boxes tile from the start; the newest remainder is dropped.
    OldestFirst,
}

/// Root-mean-square detrended fluctuation per box size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationCurve {
    pub box_sizes: Vec<usize>,
    pub fluctuations: Vec<f64>,
    pub degree: usize,
    pub alignment: BoxAlignment,
}

/// Correlation regime implied by the scaling exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correlation {
    Persistent,
    Antipersistent,
    /// `alpha` within one standard error of 0.5.
    Uncorrelated,
}

/// Scaling exponent with regression diagnostics and derived exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub stderr: f64,
    pub r_squared: f64,
    /// Power-spectrum exponent `2*alpha - 1`.
    pub beta: f64,
    /// Lag-one autocorrelation `2^(2*alpha-1) - 1` of the integrated signal.
    pub autocorr: f64,
    pub class: Correlation,
}

/// Scaling exponent for one rolling window `[start, end)` of the signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowAlpha {
    pub start: usize,
    pub end: usize,
    pub estimate: AlphaEstimate,
}

/// Integrated, mean-centered profile `Y_i = sum_{j<=i} (x_j - mean)`.
///
/// The last entry is exactly the accumulated deviation sum; it vanishes up
/// to rounding because the mean is removed.
pub fn profile(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::SeriesTooShort {
            len: x.len(),
            min: 2,
        });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { row: i + 1 });
    }
    let mean = stats::mean(x);
    let mut acc = 0.0;
    Ok(x.iter()
        .map(|&v| {
            acc += v - mean;
            acc
        })
        .collect())
}

/// Sum of squared residuals after removing the least-squares polynomial of
/// `degree` from `ys` against equally spaced abscissae.
///
/// Abscissae are centered on the box midpoint; any affine reparametrization
/// spans the same polynomial space, so residuals do not depend on the
/// choice.
fn detrend_ss(ys: &[f64], degree: usize) -> Result<f64> {
    let n = ys.len();
    let d = degree + 1;
    let c = (n as f64 - 1.0) / 2.0;
    let mut spow = vec![0.0; 2 * d - 1];
    let mut rhs = vec![0.0; d];
    for (j, &y) in ys.iter().enumerate() {
        let u = j as f64 - c;
        let mut up = 1.0;
        for (p, s) in spow.iter_mut().enumerate() {
            *s += up;
            if p < d {
                rhs[p] += up * y;
            }
            up *= u;
        }
    }
    let mut normal = vec![0.0; d * d];
    for p in 0..d {
        for q in 0..d {
            normal[p * d + q] = spow[p + q];
        }
    }
    let coef = stats::solve_dense(&mut normal, &mut rhs, d)
        .ok_or_else(|| Error::SingularDesign(format!("degree-{degree} trend on {n} points")))?;
    let mut ss = 0.0;
    for (j, &y) in ys.iter().enumerate() {
        let u = j as f64 - c;
        let mut fit = 0.0;
        let mut up = 1.0;
        for &cf in &coef {
            fit += cf * up;
            up *= u;
        }
        let r = y - fit;
        ss += r * r;
    }
    Ok(ss)
}

fn fluctuation_of_profile(
    y: &[f64],
    box_size: usize,
    degree: usize,
    alignment: BoxAlignment,
) -> Result<f64> {
    let n_total = y.len();
    let min_box = degree + 2; // leaves at least one residual degree of freedom
    if box_size < min_box || box_size > n_total {
        return Err(Error::BoxSizeOutOfRange {
            n: box_size,
            min: min_box,
            max: n_total,
        });
    }
    let n_boxes = n_total / box_size;
    let offset = match alignment {
        BoxAlignment::NewestFirst => n_total - n_boxes * box_size,
        BoxAlignment::OldestFirst => 0,
    };
    let mut total = 0.0;
    for k in 0..n_boxes {
        let start = offset + k * box_size;
        total += detrend_ss(&y[start..start + box_size], degree)? / box_size as f64;
    }
    Ok((total / n_boxes as f64).sqrt())
}

/// Detrended fluctuation `f(n)` of the signal `x` at one box size.
pub fn fluctuation(
    x: &[f64],
    box_size: usize,
    degree: usize,
    alignment: BoxAlignment,
) -> Result<f64> {
    let y = profile(x)?;
    fluctuation_of_profile(&y, box_size, degree, alignment)
}

/// `f(n)` over a schedule of box sizes; the profile is integrated once.
pub fn dfa_curve(
    x: &[f64],
    box_sizes: &[usize],
    degree: usize,
    alignment: BoxAlignment,
) -> Result<FluctuationCurve> {
    if box_sizes.is_empty() {
        return Err(Error::EmptyBoxSchedule {
            n: x.len(),
            degree,
        });
    }
    let y = profile(x)?;
    let mut fluctuations = Vec::with_capacity(box_sizes.len());
    for &n in box_sizes {
        fluctuations.push(fluctuation_of_profile(&y, n, degree, alignment)?);
    }
    Ok(FluctuationCurve {
        box_sizes: box_sizes.to_vec(),
        fluctuations,
        degree,
        alignment,
    })
}

/// Geometric box-size schedule from `2*(degree+1)` up to `len/4` with ratio
/// `2^(1/4)`, deduplicated after rounding.
///
/// The lower bound keeps at least twice as many points as fitted
/// parameters per box; the upper bound keeps at least four boxes in the
/// fluctuation average.
pub fn default_box_sizes(len: usize, degree: usize) -> Vec<usize> {
    let min = 2 * (degree + 1);
    let max = len / 4;
    let mut out = Vec::new();
    if max < min {
        return out;
    }
    let ratio = 2f64.powf(0.25);
    let mut x = min as f64;
    loop {
        let n = x.round() as usize;
        if n > max {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        x *= ratio;
    }
    out
}

/// Power-spectrum exponent implied by the scaling exponent.
pub fn spectral_exponent(alpha: f64) -> f64 {
    2.0 * alpha - 1.0
}

/// Lag-one autocorrelation of the integrated signal implied by the scaling
/// exponent.
pub fn autocorr_from_alpha(alpha: f64) -> f64 {
    2f64.powf(2.0 * alpha - 1.0) - 1.0
}

fn classify(alpha: f64, stderr: f64) -> Correlation {
    if (alpha - 0.5).abs() <= stderr {
        Correlation::Uncorrelated
    } else if alpha > 0.5 {
        Correlation::Persistent
    } else {
        Correlation::Antipersistent
    }
}

/// Scaling exponent from the log-log regression of a fluctuation curve.
pub fn hurst_exponent(curve: &FluctuationCurve) -> Result<AlphaEstimate> {
    if curve.box_sizes.len() < 2 {
        return Err(Error::TooFewPoints {
            found: curve.box_sizes.len(),
            min: 2,
        });
    }
    for (&n, &f) in curve.box_sizes.iter().zip(&curve.fluctuations) {
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::DegenerateSignal { n });
        }
    }
    let log_n: Vec<f64> = curve.box_sizes.iter().map(|&n| (n as f64).ln()).collect();
    let log_f: Vec<f64> = curve.fluctuations.iter().map(|&f| f.ln()).collect();
    let fit = stats::line_fit(&log_n, &log_f).ok_or(Error::TooFewPoints {
        found: curve.box_sizes.len(),
        min: 2,
    })?;
    let alpha = fit.slope;
    Ok(AlphaEstimate {
        alpha,
        stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        beta: spectral_exponent(alpha),
        autocorr: autocorr_from_alpha(alpha),
        class: classify(alpha, fit.slope_stderr),
    })
}

/// Scaling exponent over rolling windows `[start, start+window)` advancing
/// by `step`, each analyzed with its own default box schedule.
pub fn rolling_alpha(
    x: &[f64],
    window: usize,
    step: usize,
    degree: usize,
) -> Result<Vec<WindowAlpha>> {
    if step == 0 {
        return Err(Error::InvalidParameter("rolling step must be positive".into()));
    }
    let sizes = default_box_sizes(window, degree);
    if sizes.len() < 2 {
        return Err(Error::WindowTooShort {
            len: window,
            min: 8 * (degree + 1),
        });
    }
    if x.len() < window {
        return Err(Error::InsufficientWindows { got: 0, need: 1 });
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + window <= x.len() {
        let curve = dfa_curve(&x[start..start + window], &sizes, degree, BoxAlignment::default())?;
        out.push(WindowAlpha {
            start,
            end: start + window,
            estimate: hurst_exponent(&curve)?,
        });
        start += step;
    }
    Ok(out)
}
