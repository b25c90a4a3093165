//! Log-periodic power-law fitting for speculative-bubble diagnostics.
//!
//! Prices approaching a crash at critical time `t_c` are modeled as a
//! diverging trend decorated with accelerating oscillations in
//! `ln tau`, where `tau = (t_c - t)/t_c` is the rescaled time to the
//! critical point:
//!
//! ```text
//! y(t) = A + B * g(tau) * (1 + C * osc(omega * ln tau + phi))
//! ```
//!
//! with `g(tau) = tau^-m` (power form) or `g(tau) = ln tau` (log form),
//! and `osc` either a cosine or the bare linear phase.
//!
//! All fits are deterministic grid searches over the nonlinear parameters
//! (`t_c`, `omega`, and `m` for the power form) with the remaining
//! parameters solved in closed form by least squares, followed by one
//! refinement pass of the same resolution around the best coarse cell.
//! Ties in residual sum of squares break toward smaller `t_c`, then
//! smaller `omega`, then smaller `m`, which makes results independent of
//! evaluation order.
//!
//! The split-fit diagnostic fits the divergence and the oscillation
//! stages separately and watches the disagreement of their two `t_c`
//! estimates: on a real bubble the gap shrinks as the window end
//! approaches the crash.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

/// Shape of the diverging trend factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Form {
    /// `g(tau) = tau^-m` with exponent `m` in (0, 1).
    Power,
    /// `g(tau) = ln tau`; the classic crash fit.
    #[default]
    Log,
}

/// Shape of the oscillating bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Oscillation {
    /// `osc(x) = cos(x)`; the default for fitting.
    #[default]
    Cosine,
    /// `osc(x) = x`. The bracket is then affine in `ln tau`, so `omega`,
    /// `C` and `phi` are not separately identifiable; fits report the
    /// smallest grid `omega` and the `phi = 0` convention.
    Linear,
}

/// Full parameter set of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpplParams {
    pub form: Form,
    pub oscillation: Oscillation,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Power-law exponent; required exactly when `form` is `Power`.
    pub m: Option<f64>,
    pub omega: f64,
    pub phi: f64,
    pub t_c: f64,
}

impl LpplParams {
    fn validate(&self) -> Result<()> {
        if !(self.t_c > 0.0) || !self.t_c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "critical time must be positive and finite, got {}",
                self.t_c
            )));
        }
        match (self.form, self.m) {
            (Form::Power, None) => Err(Error::InvalidParameter(
                "power form requires an exponent".into(),
            )),
            (Form::Power, Some(m)) if !m.is_finite() => Err(Error::InvalidParameter(
                "power exponent must be finite".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Model value at time `t`, which must precede the critical time.
pub fn lppl_eval(params: &LpplParams, t: f64) -> Result<f64> {
    params.validate()?;
    if t >= params.t_c {
        return Err(Error::BeyondCriticalTime {
            t,
            t_c: params.t_c,
        });
    }
    let tau = (params.t_c - t) / params.t_c;
    let log_tau = tau.ln();
    let g = match params.form {
        Form::Power => (-params.m.expect("validated") * log_tau).exp(),
        Form::Log => log_tau,
    };
    let x = params.omega * log_tau + params.phi;
    let osc = match params.oscillation {
        Oscillation::Cosine => x.cos(),
        Oscillation::Linear => x,
    };
    Ok(params.a + params.b * g * (1.0 + params.c * osc))
}

/// Model values over a time grid.
pub fn lppl_curve(params: &LpplParams, ts: &[f64]) -> Result<Vec<f64>> {
    ts.iter().map(|&t| lppl_eval(params, t)).collect()
}

/// Uniform inclusive grid over one nonlinear parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        GridSpec { lo, hi, points }
    }

    fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 || !self.lo.is_finite() || !self.hi.is_finite() || self.hi < self.lo {
            return Err(Error::EmptyGrid);
        }
        if self.points == 1 {
            return Ok(vec![self.lo]);
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| self.lo + step * i as f64)
            .collect())
    }
}

/// Grid resolutions and model options shared by all fitting stages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpplConfig {
    /// Critical-time search grid. `None` derives the default from the
    /// window: from one step past the window end to half the window span
    /// beyond it, 200 points.
    pub tc_grid: Option<GridSpec>,
    pub omega_grid: GridSpec,
    /// Exponent grid, used by the power form only.
    pub m_grid: GridSpec,
    pub oscillation: Oscillation,
    /// Run one refinement pass around the best coarse cell.
    pub refine: bool,
}

impl Default for LpplConfig {
    fn default() -> Self {
        LpplConfig {
            tc_grid: None,
            omega_grid: GridSpec::new(4.0, 25.0, 100),
            m_grid: GridSpec::new(0.05, 0.95, 50),
            oscillation: Oscillation::Cosine,
            refine: true,
        }
    }
}

impl LpplConfig {
    fn resolved_tc_grid(&self, ts: &[f64]) -> Result<GridSpec> {
        let t_end = *ts.last().expect("validated non-empty");
        let grid = match self.tc_grid {
            Some(g) => g,
            None => {
                let span = t_end - ts[0];
                GridSpec::new(t_end + 1.0, t_end + 0.5 * span, 200)
            }
        };
        if grid.lo <= t_end || grid.lo <= 0.0 {
            return Err(Error::CriticalTimeInsideWindow { window_end: t_end });
        }
        Ok(grid)
    }
}

/// Divergence-only fit `y = A + B * g(tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceFit {
    pub form: Form,
    pub a: f64,
    pub b: f64,
    pub m: Option<f64>,
    pub t_c: f64,
    pub rss: f64,
}

/// Oscillation fit of the normalized trend residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationFit {
    pub c: f64,
    pub omega: f64,
    pub phi: f64,
    pub t_c: f64,
    /// Residual sum of squares in normalized-residual space.
    pub rss: f64,
    /// Conservative standard error of the amplitude: the root of the
    /// summed coefficient variances of the two-basis regression, which
    /// bounds the error of their norm.
    pub c_stderr: f64,
    /// Points that survived the small-trend exclusion.
    pub points_used: usize,
}

/// Two-stage diagnostic: independent critical-time estimates and their gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitFit {
    pub divergence: DivergenceFit,
    pub oscillation: OscillationFit,
    /// `t_c` from the divergence stage minus `t_c` from the oscillation
    /// stage; shrinks toward zero as a real bubble matures.
    pub gap: f64,
}

/// Joint fit of the full model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FullFit {
    pub params: LpplParams,
    pub rss: f64,
}

fn validate_window(ts: &[f64], ys: &[f64], min_points: usize) -> Result<()> {
    if ts.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: ts.len(),
            right: ys.len(),
        });
    }
    if ts.len() < min_points {
        return Err(Error::SeriesTooShort {
            len: ts.len(),
            min: min_points,
        });
    }
    if let Some(i) = ys.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { row: i + 1 });
    }
    if !ts.windows(2).all(|w| w[1] > w[0]) || !ts.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidParameter(
            "window times must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Lexicographic "better" on candidate keys; all entries must be finite.
fn key_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn refine_span(values: &[f64], best: usize) -> (f64, f64) {
    let lo = values[best.saturating_sub(1)];
    let hi = values[(best + 1).min(values.len() - 1)];
    (lo, hi)
}

/// Closed-form least squares of `y = a + b*g`, returning the residual sum
/// of squares via the optimum identity `rss = Syy - a*Sy - b*Sgy`.
fn ols_affine(g: &[f64], y: &[f64], sy: f64, syy: f64) -> Option<(f64, f64, f64)> {
    let n = g.len() as f64;
    let mut sg = 0.0;
    let mut sgg = 0.0;
    let mut sgy = 0.0;
    for (gi, yi) in g.iter().zip(y) {
        sg += gi;
        sgg += gi * gi;
        sgy += gi * yi;
    }
    let det = n * sgg - sg * sg;
    if !det.is_finite() || det.abs() <= 1e-12 * n * sgg.abs().max(1.0) {
        return None;
    }
    let b = (n * sgy - sg * sy) / det;
    let a = (sy - b * sg) / n;
    let rss = (syy - a * sy - b * sgy).max(0.0);
    (a.is_finite() && b.is_finite() && rss.is_finite()).then_some((a, b, rss))
}

#[derive(Debug, Clone, Copy)]
struct DivCandidate {
    rss: f64,
    t_c: f64,
    m: f64,
    a: f64,
    b: f64,
    tc_idx: usize,
    m_idx: usize,
}

fn divergence_pass(
    ts: &[f64],
    ys: &[f64],
    form: Form,
    tc_values: &[f64],
    m_values: &[f64],
) -> Option<DivCandidate> {
    let sy: f64 = ys.iter().sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let dm = if m_values.len() > 1 {
        m_values[1] - m_values[0]
    } else {
        0.0
    };
    tc_values
        .par_iter()
        .enumerate()
        .filter_map(|(ti, &t_c)| {
            let log_tau: Vec<f64> = ts.iter().map(|&t| ((t_c - t) / t_c).ln()).collect();
            let mut best: Option<DivCandidate> = None;
            let mut consider = |cand: DivCandidate| {
                let better = match &best {
                    None => true,
                    Some(b) => key_less(&[cand.rss, cand.t_c, cand.m], &[b.rss, b.t_c, b.m]),
                };
                if better {
                    best = Some(cand);
                }
            };
            match form {
                Form::Log => {
                    if let Some((a, b, rss)) = ols_affine(&log_tau, ys, sy, syy) {
                        consider(DivCandidate {
                            rss,
                            t_c,
                            m: 0.0,
                            a,
                            b,
                            tc_idx: ti,
                            m_idx: 0,
                        });
                    }
                }
                Form::Power => {
                    // g = tau^-m stepped across the uniform m grid by one
                    // multiplication per point: tau^-(m+dm) = tau^-m * tau^-dm.
                    let mut g: Vec<f64> = log_tau.iter().map(|&l| (-m_values[0] * l).exp()).collect();
                    let step: Vec<f64> = log_tau.iter().map(|&l| (-dm * l).exp()).collect();
                    for (mi, &m) in m_values.iter().enumerate() {
                        if mi > 0 {
                            for (gi, si) in g.iter_mut().zip(&step) {
                                *gi *= si;
                            }
                        }
                        if let Some((a, b, rss)) = ols_affine(&g, ys, sy, syy) {
                            consider(DivCandidate {
                                rss,
                                t_c,
                                m,
                                a,
                                b,
                                tc_idx: ti,
                                m_idx: mi,
                            });
                        }
                    }
                }
            }
            best
        })
        .reduce_with(|x, y| {
            if key_less(&[y.rss, y.t_c, y.m], &[x.rss, x.t_c, x.m]) {
                y
            } else {
                x
            }
        })
}

/// Fits the diverging trend alone on a grid over `t_c` (and `m` for the
/// power form), with one refinement pass.
pub fn fit_divergence(
    ts: &[f64],
    ys: &[f64],
    form: Form,
    config: &LpplConfig,
) -> Result<DivergenceFit> {
    validate_window(ts, ys, 6)?;
    let tc_grid = config.resolved_tc_grid(ts)?;
    let tc_values = tc_grid.values()?;
    let m_values = match form {
        Form::Power => config.m_grid.values()?,
        Form::Log => vec![0.0],
    };
    let coarse = divergence_pass(ts, ys, form, &tc_values, &m_values)
        .ok_or_else(|| Error::SingularDesign("no finite trend fit on the search grid".into()))?;
    let best = if config.refine {
        let (tlo, thi) = refine_span(&tc_values, coarse.tc_idx);
        let tc_fine = GridSpec::new(tlo, thi, tc_grid.points).values()?;
        let m_fine = match form {
            Form::Power => {
                let (mlo, mhi) = refine_span(&m_values, coarse.m_idx);
                GridSpec::new(mlo, mhi, config.m_grid.points).values()?
            }
            Form::Log => vec![0.0],
        };
        let fine = divergence_pass(ts, ys, form, &tc_fine, &m_fine);
        match fine {
            Some(f) if key_less(&[f.rss, f.t_c, f.m], &[coarse.rss, coarse.t_c, coarse.m]) => f,
            _ => coarse,
        }
    } else {
        coarse
    };
    Ok(DivergenceFit {
        form,
        a: best.a,
        b: best.b,
        m: match form {
            Form::Power => Some(best.m),
            Form::Log => None,
        },
        t_c: best.t_c,
        rss: best.rss,
    })
}

#[derive(Debug, Clone, Copy)]
struct OscCandidate {
    rss: f64,
    t_c: f64,
    omega: f64,
    p: f64,
    q: f64,
    tc_idx: usize,
    om_idx: usize,
}

fn oscillation_pass(
    ts: &[f64],
    r: &[f64],
    oscillation: Oscillation,
    tc_values: &[f64],
    omega_values: &[f64],
) -> Option<OscCandidate> {
    let srr: f64 = r.iter().map(|v| v * v).sum();
    let n = r.len() as f64;
    let domega = if omega_values.len() > 1 {
        omega_values[1] - omega_values[0]
    } else {
        0.0
    };
    tc_values
        .par_iter()
        .enumerate()
        .filter_map(|(ti, &t_c)| {
            let log_tau: Vec<f64> = ts.iter().map(|&t| ((t_c - t) / t_c).ln()).collect();
            let mut best: Option<OscCandidate> = None;
            let mut consider = |cand: OscCandidate| {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        key_less(&[cand.rss, cand.t_c, cand.omega], &[b.rss, b.t_c, b.omega])
                    }
                };
                if better {
                    best = Some(cand);
                }
            };
            match oscillation {
                Oscillation::Linear => {
                    // r = C*(omega*ln tau + phi) spans {ln tau, 1} whatever
                    // omega is, so only one regression per t_c; omega
                    // reports the grid minimum by the tie-break.
                    let sr: f64 = r.iter().sum();
                    if let Some((intercept, slope, rss)) = ols_affine(&log_tau, r, sr, srr) {
                        consider(OscCandidate {
                            rss,
                            t_c,
                            omega: omega_values[0],
                            p: slope,
                            q: intercept,
                            tc_idx: ti,
                            om_idx: 0,
                        });
                    }
                }
                Oscillation::Cosine => {
                    // Regress r on {cos(omega ln tau), sin(omega ln tau)},
                    // advancing omega by a complex rotation per point
                    // instead of fresh trig calls.
                    let mut zc: Vec<f64> = Vec::new();
                    let mut zs: Vec<f64> = Vec::new();
                    let mut rot: Vec<(f64, f64)> = Vec::new();
                    for (oi, &omega) in omega_values.iter().enumerate() {
                        if oi == 0 {
                            let init: Vec<(f64, f64)> =
                                log_tau.iter().map(|&l| (omega * l).sin_cos()).collect();
                            zc = init.iter().map(|&(_, c)| c).collect();
                            zs = init.iter().map(|&(s, _)| s).collect();
                            rot = log_tau.iter().map(|&l| {
                                let (s, c) = (domega * l).sin_cos();
                                (c, s)
                            })
                            .collect();
                        } else {
                            for i in 0..zc.len() {
                                let (rc, rs) = rot[i];
                                let (c, s) = (zc[i], zs[i]);
                                zc[i] = c * rc - s * rs;
                                zs[i] = c * rs + s * rc;
                            }
                        }
                        let mut scc = 0.0;
                        let mut scs = 0.0;
                        let mut scr = 0.0;
                        let mut ssr = 0.0;
                        for i in 0..zc.len() {
                            let (c, s) = (zc[i], zs[i]);
                            scc += c * c;
                            scs += c * s;
                            scr += c * r[i];
                            ssr += s * r[i];
                        }
                        let sss = n - scc;
                        let det = scc * sss - scs * scs;
                        if det.abs() <= 1e-10 * n * n {
                            continue;
                        }
                        let p = (sss * scr - scs * ssr) / det;
                        let q = (scc * ssr - scs * scr) / det;
                        let rss = (srr - p * scr - q * ssr).max(0.0);
                        if rss.is_finite() && p.is_finite() && q.is_finite() {
                            consider(OscCandidate {
                                rss,
                                t_c,
                                omega,
                                p,
                                q,
                                tc_idx: ti,
                                om_idx: oi,
                            });
                        }
                    }
                }
            }
            best
        })
        .reduce_with(|x, y| {
            if key_less(&[y.rss, y.t_c, y.omega], &[x.rss, x.t_c, x.omega]) {
                y
            } else {
                x
            }
        })
}

/// Fits the oscillation of the normalized residual
/// `r = (y - A - B*g) / (B*g)` left by a divergence fit, searching its own
/// grid over `t_c` and `omega`. Points where the trend factor `|g|` falls
/// below 5% of its median are excluded to keep the normalization stable
/// (for the log form `g` vanishes at the window start).
pub fn fit_oscillation(
    ts: &[f64],
    ys: &[f64],
    divergence: &DivergenceFit,
    config: &LpplConfig,
) -> Result<OscillationFit> {
    validate_window(ts, ys, 8)?;
    if divergence.b == 0.0 || !divergence.b.is_finite() {
        return Err(Error::DegenerateDivergence {
            b_abs: divergence.b.abs(),
        });
    }
    let g_all: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let log_tau = ((divergence.t_c - t) / divergence.t_c).ln();
            match divergence.form {
                Form::Power => (-divergence.m.unwrap_or(0.0) * log_tau).exp(),
                Form::Log => log_tau,
            }
        })
        .collect();
    let abs_g: Vec<f64> = g_all.iter().map(|g| g.abs()).collect();
    let floor = 0.05 * stats::quantile(&abs_g, 0.5);
    let mut kept_ts = Vec::new();
    let mut r = Vec::new();
    for (i, &g) in g_all.iter().enumerate() {
        if g.abs() <= floor {
            continue;
        }
        let trend = divergence.a + divergence.b * g;
        r.push((ys[i] - trend) / (divergence.b * g));
        kept_ts.push(ts[i]);
    }
    if r.len() < 8 {
        return Err(Error::TooFewPoints {
            found: r.len(),
            min: 8,
        });
    }
    let tc_grid = config.resolved_tc_grid(ts)?;
    let tc_values = tc_grid.values()?;
    let omega_values = config.omega_grid.values()?;
    let coarse = oscillation_pass(&kept_ts, &r, config.oscillation, &tc_values, &omega_values)
        .ok_or_else(|| {
            Error::SingularDesign("no finite oscillation fit on the search grid".into())
        })?;
    let best = if config.refine {
        let (tlo, thi) = refine_span(&tc_values, coarse.tc_idx);
        let tc_fine = GridSpec::new(tlo, thi, tc_grid.points).values()?;
        let om_fine = match config.oscillation {
            Oscillation::Cosine => {
                let (olo, ohi) = refine_span(&omega_values, coarse.om_idx);
                GridSpec::new(olo, ohi, config.omega_grid.points).values()?
            }
            Oscillation::Linear => omega_values.clone(),
        };
        let fine = oscillation_pass(&kept_ts, &r, config.oscillation, &tc_fine, &om_fine);
        match fine {
            Some(f)
                if key_less(&[f.rss, f.t_c, f.omega], &[coarse.rss, coarse.t_c, coarse.omega]) =>
            {
                f
            }
            _ => coarse,
        }
    } else {
        coarse
    };
    let (c, phi, omega) = match config.oscillation {
        Oscillation::Cosine => (best.p.hypot(best.q), (-best.q).atan2(best.p), best.omega),
        Oscillation::Linear => {
            // p held the slope on ln tau (= C*omega), q the intercept (= C*phi).
            let c = best.p / best.omega;
            let phi = if best.p == 0.0 { 0.0 } else { best.q / c };
            (c, phi, best.omega)
        }
    };
    let c_stderr = amplitude_stderr(&kept_ts, &r, config.oscillation, &best);
    Ok(OscillationFit {
        c,
        omega,
        phi,
        t_c: best.t_c,
        rss: best.rss,
        c_stderr,
        points_used: r.len(),
    })
}

/// Standard error of the fitted amplitude at the winning grid point.
/// Sums the variances of both regression coefficients; since the
/// amplitude is their Euclidean norm (a 1-Lipschitz map), this bounds
/// its standard error from above.
fn amplitude_stderr(ts: &[f64], r: &[f64], oscillation: Oscillation, best: &OscCandidate) -> f64 {
    let k = r.len() as f64;
    if r.len() <= 2 || best.rss < 0.0 {
        return f64::INFINITY;
    }
    let s2 = best.rss / (k - 2.0);
    let log_tau: Vec<f64> = ts.iter().map(|&t| ((best.t_c - t) / best.t_c).ln()).collect();
    match oscillation {
        Oscillation::Cosine => {
            let mut scc = 0.0;
            let mut scs = 0.0;
            for &l in &log_tau {
                let (s, c) = (best.omega * l).sin_cos();
                scc += c * c;
                scs += c * s;
            }
            let sss = k - scc;
            let det = scc * sss - scs * scs;
            if det <= 0.0 {
                return f64::INFINITY;
            }
            (s2 * (sss + scc) / det).sqrt()
        }
        Oscillation::Linear => {
            let sx: f64 = log_tau.iter().sum();
            let sxx: f64 = log_tau.iter().map(|l| l * l).sum();
            let det = k * sxx - sx * sx;
            if det <= 0.0 {
                return f64::INFINITY;
            }
            (s2 * k / det).sqrt() / best.omega.abs()
        }
    }
}

/// Runs the divergence and oscillation stages independently and reports
/// the gap between their critical-time estimates.
pub fn split_fit(ts: &[f64], ys: &[f64], form: Form, config: &LpplConfig) -> Result<SplitFit> {
    let divergence = fit_divergence(ts, ys, form, config)?;
    let oscillation = fit_oscillation(ts, ys, &divergence, config)?;
    Ok(SplitFit {
        divergence,
        oscillation,
        gap: divergence.t_c - oscillation.t_c,
    })
}

#[derive(Debug, Clone, Copy)]
struct FullCandidate {
    rss: f64,
    t_c: f64,
    omega: f64,
    m: f64,
    coef: [f64; 4],
    tc_idx: usize,
    om_idx: usize,
    m_idx: usize,
}

fn full_key(c: &FullCandidate) -> [f64; 4] {
    [c.rss, c.t_c, c.omega, c.m]
}

fn full_pass(
    ts: &[f64],
    ys: &[f64],
    form: Form,
    oscillation: Oscillation,
    tc_values: &[f64],
    omega_values: &[f64],
    m_values: &[f64],
) -> Option<FullCandidate> {
    let n = ts.len() as f64;
    let sy: f64 = ys.iter().sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let domega = if omega_values.len() > 1 {
        omega_values[1] - omega_values[0]
    } else {
        0.0
    };
    let dm = if m_values.len() > 1 {
        m_values[1] - m_values[0]
    } else {
        0.0
    };
    tc_values
        .par_iter()
        .enumerate()
        .filter_map(|(ti, &t_c)| {
            let log_tau: Vec<f64> = ts.iter().map(|&t| ((t_c - t) / t_c).ln()).collect();
            let mut best: Option<FullCandidate> = None;
            let mut consider = |cand: FullCandidate| {
                let better = match &best {
                    None => true,
                    Some(b) => key_less(&full_key(&cand), &full_key(b)),
                };
                if better {
                    best = Some(cand);
                }
            };
            let mut g: Vec<f64> = match form {
                Form::Power => log_tau.iter().map(|&l| (-m_values[0] * l).exp()).collect(),
                Form::Log => log_tau.clone(),
            };
            let m_step: Vec<f64> = match form {
                Form::Power => log_tau.iter().map(|&l| (-dm * l).exp()).collect(),
                Form::Log => Vec::new(),
            };
            for (mi, &m) in m_values.iter().enumerate() {
                if mi > 0 {
                    for (gi, si) in g.iter_mut().zip(&m_step) {
                        *gi *= si;
                    }
                }
                let mut sg = 0.0;
                let mut sgg = 0.0;
                let mut sgy = 0.0;
                for i in 0..g.len() {
                    sg += g[i];
                    sgg += g[i] * g[i];
                    sgy += g[i] * ys[i];
                }
                match oscillation {
                    Oscillation::Linear => {
                        // y = A + B'*g + E*(g*ln tau): 3 linear coefficients;
                        // omega is not identifiable, reported as the grid
                        // minimum with the phi = 0 convention.
                        let mut sgl = 0.0;
                        let mut sgl2 = 0.0;
                        let mut sggl = 0.0;
                        let mut sgly = 0.0;
                        for i in 0..g.len() {
                            let gl = g[i] * log_tau[i];
                            sgl += gl;
                            sgl2 += gl * gl;
                            sggl += g[i] * gl;
                            sgly += gl * ys[i];
                        }
                        let mut a_mat = [n, sg, sgl, sg, sgg, sggl, sgl, sggl, sgl2];
                        let rhs = [sy, sgy, sgly];
                        let mut scratch = rhs;
                        if let Some(coef) = stats::solve_dense(&mut a_mat, &mut scratch, 3) {
                            let rss = (syy
                                - coef[0] * rhs[0]
                                - coef[1] * rhs[1]
                                - coef[2] * rhs[2])
                                .max(0.0);
                            if rss.is_finite() && coef.iter().all(|c| c.is_finite()) {
                                consider(FullCandidate {
                                    rss,
                                    t_c,
                                    omega: omega_values[0],
                                    m,
                                    coef: [coef[0], coef[1], coef[2], 0.0],
                                    tc_idx: ti,
                                    om_idx: 0,
                                    m_idx: mi,
                                });
                            }
                        }
                    }
                    Oscillation::Cosine => {
                        let mut zc: Vec<f64> = Vec::new();
                        let mut zs: Vec<f64> = Vec::new();
                        let mut rot: Vec<(f64, f64)> = Vec::new();
                        for (oi, &omega) in omega_values.iter().enumerate() {
                            if oi == 0 {
                                zc = log_tau.iter().map(|&l| (omega * l).cos()).collect();
                                zs = log_tau.iter().map(|&l| (omega * l).sin()).collect();
                                rot = log_tau
                                    .iter()
                                    .map(|&l| {
                                        let (s, c) = (domega * l).sin_cos();
                                        (c, s)
                                    })
                                    .collect();
                            } else {
                                for i in 0..zc.len() {
                                    let (rc, rs) = rot[i];
                                    let (c, s) = (zc[i], zs[i]);
                                    zc[i] = c * rc - s * rs;
                                    zs[i] = c * rs + s * rc;
                                }
                            }
                            let mut sgc = 0.0;
                            let mut sgs = 0.0;
                            let mut sg2c = 0.0;
                            let mut sg2s = 0.0;
                            let mut sgc2 = 0.0;
                            let mut sgcs = 0.0;
                            let mut sgcy = 0.0;
                            let mut sgsy = 0.0;
                            for i in 0..g.len() {
                                let gc = g[i] * zc[i];
                                let gs = g[i] * zs[i];
                                sgc += gc;
                                sgs += gs;
                                sg2c += g[i] * gc;
                                sg2s += g[i] * gs;
                                sgc2 += gc * gc;
                                sgcs += gc * gs;
                                sgcy += gc * ys[i];
                                sgsy += gs * ys[i];
                            }
                            let sgs2 = sgg - sgc2;
                            let mut a_mat = [
                                n, sg, sgc, sgs, sg, sgg, sg2c, sg2s, sgc, sg2c, sgc2, sgcs, sgs,
                                sg2s, sgcs, sgs2,
                            ];
                            let rhs = [sy, sgy, sgcy, sgsy];
                            let mut scratch = rhs;
                            if let Some(coef) = stats::solve_dense(&mut a_mat, &mut scratch, 4) {
                                let rss = (syy
                                    - coef[0] * rhs[0]
                                    - coef[1] * rhs[1]
                                    - coef[2] * rhs[2]
                                    - coef[3] * rhs[3])
                                    .max(0.0);
                                if rss.is_finite() && coef.iter().all(|c| c.is_finite()) {
                                    consider(FullCandidate {
                                        rss,
                                        t_c,
                                        omega,
                                        m,
                                        coef: [coef[0], coef[1], coef[2], coef[3]],
                                        tc_idx: ti,
                                        om_idx: oi,
                                        m_idx: mi,
                                    });
                                }
                            }
                        }
                    }
                }
            }
            best
        })
        .reduce_with(|x, y| if key_less(&full_key(&y), &full_key(&x)) { y } else { x })
}

/// Fits all parameters jointly: grid over `t_c`, `omega` (cosine bracket)
/// and `m` (power form), with `A`, `B` and the oscillation amplitude
/// solved linearly per cell, plus one refinement pass.
pub fn full_fit(ts: &[f64], ys: &[f64], form: Form, config: &LpplConfig) -> Result<FullFit> {
    validate_window(ts, ys, 10)?;
    let tc_grid = config.resolved_tc_grid(ts)?;
    let tc_values = tc_grid.values()?;
    let omega_values = config.omega_grid.values()?;
    let m_values = match form {
        Form::Power => config.m_grid.values()?,
        Form::Log => vec![0.0],
    };
    let coarse = full_pass(
        ts,
        ys,
        form,
        config.oscillation,
        &tc_values,
        &omega_values,
        &m_values,
    )
    .ok_or_else(|| Error::SingularDesign("no finite joint fit on the search grid".into()))?;
    let best = if config.refine {
        let (tlo, thi) = refine_span(&tc_values, coarse.tc_idx);
        let tc_fine = GridSpec::new(tlo, thi, tc_grid.points).values()?;
        let om_fine = match config.oscillation {
            Oscillation::Cosine => {
                let (olo, ohi) = refine_span(&omega_values, coarse.om_idx);
                GridSpec::new(olo, ohi, config.omega_grid.points).values()?
            }
            Oscillation::Linear => omega_values.clone(),
        };
        let m_fine = match form {
            Form::Power => {
                let (mlo, mhi) = refine_span(&m_values, coarse.m_idx);
                GridSpec::new(mlo, mhi, config.m_grid.points).values()?
            }
            Form::Log => vec![0.0],
        };
        let fine = full_pass(ts, ys, form, config.oscillation, &tc_fine, &om_fine, &m_fine);
        match fine {
            Some(f) if key_less(&full_key(&f), &full_key(&coarse)) => f,
            _ => coarse,
        }
    } else {
        coarse
    };
    let a = best.coef[0];
    let b = best.coef[1];
    let (c, phi) = match config.oscillation {
        Oscillation::Cosine => {
            let amp = best.coef[2].hypot(best.coef[3]);
            if amp == 0.0 {
                (0.0, 0.0)
            } else {
                if b.abs() < 1e-12 {
                    return Err(Error::DegenerateDivergence { b_abs: b.abs() });
                }
                (
                    amp / b.abs(),
                    (-best.coef[3] * b.signum()).atan2(best.coef[2] * b.signum()),
                )
            }
        }
        Oscillation::Linear => {
            if best.coef[2] == 0.0 {
                (0.0, 0.0)
            } else {
                if b.abs() < 1e-12 {
                    return Err(Error::DegenerateDivergence { b_abs: b.abs() });
                }
                (best.coef[2] / (b * best.omega), 0.0)
            }
        }
    };
    Ok(FullFit {
        params: LpplParams {
            form,
            oscillation: config.oscillation,
            a,
            b,
            c,
            m: match form {
                Form::Power => Some(best.m),
                Form::Log => None,
            },
            omega: best.omega,
            phi,
            t_c: best.t_c,
        },
        rss: best.rss,
    })
}

pub const DEFAULT_CONVERGENCE_DEPTH: usize = 5;
pub const DEFAULT_GAP_THRESHOLD: f64 = 5.0;

/// Rolling-window schedule and flag thresholds for the crash-risk track.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackConfig {
    /// End (exclusive index into the window list) of the first window.
    pub first_end: usize,
    /// How far the window end advances between entries.
    pub step: usize,
    /// Fixed window length; `None` anchors every window at the start.
    pub window: Option<usize>,
    /// Number of trailing entries the convergence flag inspects.
    pub depth: usize,
    /// Gap magnitude below which a converged estimate counts as imminent.
    pub theta: f64,
}

impl TrackConfig {
    pub fn new(first_end: usize, step: usize) -> Self {
        TrackConfig {
            first_end,
            step,
            window: None,
            depth: DEFAULT_CONVERGENCE_DEPTH,
            theta: DEFAULT_GAP_THRESHOLD,
        }
    }
}

/// One window of the crash-risk track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrashRiskEntry {
    pub window_start: usize,
    pub window_end: usize,
    pub t_c_divergence: f64,
    pub t_c_oscillation: f64,
    pub omega: f64,
    pub gap: f64,
    /// Trailing gap magnitudes are non-increasing and the last is below
    /// `theta`: the two estimates agree and point at an imminent critical
    /// time.
    pub converging: bool,
    /// Trailing gap magnitudes fell then rose again (a V shape): the
    /// window approached a critical point that then receded.
    pub near_miss: bool,
}

/// Flags for the newest entry given the last `depth` gap magnitudes.
///
/// Returns `(converging, near_miss)`. `converging` requires the
/// magnitudes to be non-increasing with the last below `theta`;
/// `near_miss` requires a strict fall of at least two steps into a
/// minimum followed by a strict rise of at least two steps.
pub fn gap_flags(trailing_abs_gaps: &[f64], theta: f64) -> (bool, bool) {
    let w = trailing_abs_gaps;
    if w.len() < 2 {
        return (false, false);
    }
    let converging =
        w.windows(2).all(|p| p[1] <= p[0]) && *w.last().expect("non-empty") < theta;
    let mut near_miss = false;
    for p in 2..w.len().saturating_sub(2) {
        let falls = w[..=p].windows(2).all(|x| x[1] < x[0]);
        let rises = w[p..].windows(2).all(|x| x[1] > x[0]);
        if falls && rises {
            near_miss = true;
            break;
        }
    }
    (converging, near_miss)
}

/// Runs the split fit over a schedule of growing or rolling windows and
/// flags convergence of the two critical-time estimates.
pub fn crash_risk_track(
    ts: &[f64],
    ys: &[f64],
    form: Form,
    config: &LpplConfig,
    track: &TrackConfig,
) -> Result<Vec<CrashRiskEntry>> {
    if ts.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: ts.len(),
            right: ys.len(),
        });
    }
    if track.step == 0 || track.depth < 2 || !(track.theta > 0.0) {
        return Err(Error::InvalidParameter(
            "track needs step >= 1, depth >= 2 and positive theta".into(),
        ));
    }
    if track.first_end > ts.len() || track.first_end < 8 {
        return Err(Error::WindowOutOfRange {
            start: 0,
            len: track.first_end,
            n: ts.len(),
        });
    }
    let mut entries = Vec::new();
    let mut abs_gaps = Vec::new();
    let mut end = track.first_end;
    while end <= ts.len() {
        let start = match track.window {
            Some(w) => end.saturating_sub(w),
            None => 0,
        };
        let split = split_fit(&ts[start..end], &ys[start..end], form, config)?;
        abs_gaps.push(split.gap.abs());
        let tail_start = abs_gaps.len().saturating_sub(track.depth);
        let (converging, near_miss) = if abs_gaps.len() >= track.depth {
            gap_flags(&abs_gaps[tail_start..], track.theta)
        } else {
            (false, false)
        };
        entries.push(CrashRiskEntry {
            window_start: start,
            window_end: end,
            t_c_divergence: split.divergence.t_c,
            t_c_oscillation: split.oscillation.t_c,
            omega: split.oscillation.omega,
            gap: split.gap,
            converging,
            near_miss,
        });
        end += track.step;
    }
    if entries.is_empty() {
        return Err(Error::InsufficientWindows { got: 0, need: 1 });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> LpplConfig {
        LpplConfig {
            tc_grid: None,
            omega_grid: GridSpec::new(4.0, 25.0, 43),
            m_grid: GridSpec::new(0.05, 0.95, 19),
            oscillation: Oscillation::Cosine,
            refine: true,
        }
    }

    #[test]
    fn eval_matches_hand_computation() {
        // t = 5, t_c = 10 gives tau = 0.5.
        let log = LpplParams {
            form: Form::Log,
            oscillation: Oscillation::Cosine,
            a: 1.0,
            b: 2.0,
            c: 0.0,
            m: None,
            omega: 7.0,
            phi: 0.3,
            t_c: 10.0,
        };
        let y = lppl_eval(&log, 5.0).unwrap();
        assert!((y - (1.0 + 2.0 * 0.5f64.ln())).abs() < 1e-15);

        let power = LpplParams {
            form: Form::Power,
            m: Some(0.5),
            ..log
        };
        let y = lppl_eval(&power, 5.0).unwrap();
        assert!((y - (1.0 + 2.0 * std::f64::consts::SQRT_2)).abs() < 1e-12);

        // Oscillating brackets.
        let osc = LpplParams { c: 0.1, ..log };
        let x: f64 = 7.0 * 0.5f64.ln() + 0.3;
        let y = lppl_eval(&osc, 5.0).unwrap();
        assert!((y - (1.0 + 2.0 * 0.5f64.ln() * (1.0 + 0.1 * x.cos()))).abs() < 1e-14);
        let lin = LpplParams {
            oscillation: Oscillation::Linear,
            ..osc
        };
        let y = lppl_eval(&lin, 5.0).unwrap();
        assert!((y - (1.0 + 2.0 * 0.5f64.ln() * (1.0 + 0.1 * x))).abs() < 1e-14);
    }

    #[test]
    fn eval_rejects_times_at_or_past_critical() {
        let p = LpplParams {
            form: Form::Log,
            oscillation: Oscillation::Cosine,
            a: 0.0,
            b: 1.0,
            c: 0.0,
            m: None,
            omega: 6.0,
            phi: 0.0,
            t_c: 50.0,
        };
        assert!(matches!(
            lppl_eval(&p, 50.0),
            Err(Error::BeyondCriticalTime { .. })
        ));
        assert!(matches!(
            lppl_eval(&p, 51.0),
            Err(Error::BeyondCriticalTime { .. })
        ));
        let bad = LpplParams { m: None, form: Form::Power, ..p };
        assert!(lppl_eval(&bad, 10.0).is_err());
    }

    #[test]
    fn divergence_round_trip_log_form() {
        let truth = LpplParams {
            form: Form::Log,
            oscillation: Oscillation::Cosine,
            a: 5.0,
            b: -0.8,
            c: 0.0,
            m: None,
            omega: 6.0,
            phi: 0.0,
            t_c: 140.0,
        };
        let ts: Vec<f64> = (0..120).map(|t| t as f64).collect();
        let ys = lppl_curve(&truth, &ts).unwrap();
        let cfg = LpplConfig {
            tc_grid: Some(GridSpec::new(121.0, 180.0, 60)),
            ..small_config()
        };
        let fit = fit_divergence(&ts, &ys, Form::Log, &cfg).unwrap();
        let coarse_cell = (180.0 - 121.0) / 59.0;
        assert!(
            (fit.t_c - 140.0).abs() <= coarse_cell,
            "t_c = {}",
            fit.t_c
        );
        assert!((fit.a - 5.0).abs() < 0.05, "a = {}", fit.a);
        assert!((fit.b + 0.8).abs() < 0.05, "b = {}", fit.b);
    }

    #[test]
    fn divergence_round_trip_power_form() {
        let truth = LpplParams {
            form: Form::Power,
            oscillation: Oscillation::Cosine,
            a: 2.0,
            b: 0.6,
            c: 0.0,
            m: Some(0.45),
            omega: 6.0,
            phi: 0.0,
            t_c: 150.0,
        };
        let ts: Vec<f64> = (0..120).map(|t| t as f64).collect();
        let ys = lppl_curve(&truth, &ts).unwrap();
        let cfg = LpplConfig {
            tc_grid: Some(GridSpec::new(121.0, 180.0, 60)),
            ..small_config()
        };
        let fit = fit_divergence(&ts, &ys, Form::Power, &cfg).unwrap();
        let tc_cell = (180.0 - 121.0) / 59.0;
        let m_cell = (0.95 - 0.05) / 18.0;
        assert!((fit.t_c - 150.0).abs() <= tc_cell, "t_c = {}", fit.t_c);
        assert!(
            (fit.m.unwrap() - 0.45).abs() <= m_cell,
            "m = {:?}",
            fit.m
        );
    }

    #[test]
    fn oscillation_recovers_frequency_and_phase() {
        let truth = LpplParams {
            form: Form::Log,
            oscillation: Oscillation::Cosine,
            a: 5.0,
            b: -0.8,
            c: 0.06,
            m: None,
            omega: 9.0,
            phi: 0.7,
            t_c: 140.0,
        };
        let ts: Vec<f64> = (0..120).map(|t| t as f64).collect();
        let ys = lppl_curve(&truth, &ts).unwrap();
        let cfg = LpplConfig {
            tc_grid: Some(GridSpec::new(121.0, 180.0, 60)),
            ..small_config()
        };
        let div = fit_divergence(&ts, &ys, Form::Log, &cfg).unwrap();
        let osc = fit_oscillation(&ts, &ys, &div, &cfg).unwrap();
        assert!((osc.omega - 9.0).abs() < 0.5, "omega = {}", osc.omega);
        assert!(osc.c > 0.0);
        assert!((osc.t_c - 140.0).abs() < 5.0, "t_c = {}", osc.t_c);
    }

    #[test]
    fn full_fit_recovers_all_parameters() {
        let truth = LpplParams {
            form: Form::Log,
            oscillation: Oscillation::Cosine,
            a: 5.0,
            b: -0.8,
            c: 0.05,
            m: None,
            omega: 9.0,
            phi: 0.7,
            t_c: 140.0,
        };
        let ts: Vec<f64> = (0..120).map(|t| t as f64).collect();
        let ys = lppl_curve(&truth, &ts).unwrap();
        let cfg = LpplConfig {
            tc_grid: Some(GridSpec::new(121.0, 180.0, 60)),
            omega_grid: GridSpec::new(4.0, 25.0, 85),
            ..small_config()
        };
        let fit = full_fit(&ts, &ys, Form::Log, &cfg).unwrap();
        let p = fit.params;
        assert!((p.t_c - 140.0).abs() < 1.0, "t_c = {}", p.t_c);
        assert!((p.omega - 9.0).abs() < 0.3, "omega = {}", p.omega);
        assert!((p.a - 5.0).abs() < 0.1, "a = {}", p.a);
        assert!((p.b + 0.8).abs() < 0.1, "b = {}", p.b);
        assert!((p.c - 0.05).abs() < 0.02, "c = {}", p.c);
        assert!((p.phi - 0.7).abs() < 0.5, "phi = {}", p.phi);
        assert!(p.c >= 0.0, "amplitude canonicalized non-negative");
    }

    #[test]
    fn linear_bracket_reports_convention() {
        let truth = LpplParams {
            form: Form::Log,
            oscillation: Oscillation::Linear,
            a: 3.0,
            b: -0.5,
            c: 0.04,
            m: None,
            omega: 8.0,
            phi: 0.0,
            t_c: 150.0,
        };
        let ts: Vec<f64> = (0..120).map(|t| t as f64).collect();
        let ys = lppl_curve(&truth, &ts).unwrap();
        let cfg = LpplConfig {
            tc_grid: Some(GridSpec::new(121.0, 180.0, 60)),
            oscillation: Oscillation::Linear,
            ..small_config()
        };
        let fit = full_fit(&ts, &ys, Form::Log, &cfg).unwrap();
        // With phi = 0 in the generator, (B, C*omega) is identifiable:
        // the product c*omega must match.
        let p = fit.params;
        assert!((p.t_c - 150.0).abs() < 1.0, "t_c = {}", p.t_c);
        assert_eq!(p.omega, 4.0, "omega pinned to the grid minimum");
        assert_eq!(p.phi, 0.0);
        assert!(
            (p.c * p.omega - 0.04 * 8.0).abs() < 0.02,
            "c*omega = {}",
            p.c * p.omega
        );
    }

    #[test]
    fn split_fit_gap_small_on_clean_signal() {
        // The window must run close enough to t_c to see several
        // oscillation periods; stopping 8 units short of t_c = 140
        // gives the phase stage about five of them.
        let truth = LpplParams {
            form: Form::Log,
            oscillation: Oscillation::Cosine,
            a: 5.0,
            b: -0.8,
            c: 0.06,
            m: None,
            omega: 9.0,
            phi: 0.7,
            t_c: 140.0,
        };
        let ts: Vec<f64> = (0..132).map(|t| t as f64).collect();
        let ys = lppl_curve(&truth, &ts).unwrap();
        let cfg = LpplConfig {
            tc_grid: Some(GridSpec::new(133.0, 180.0, 60)),
            ..small_config()
        };
        let split = split_fit(&ts, &ys, Form::Log, &cfg).unwrap();
        assert!(split.gap.abs() < 1.0, "gap = {}", split.gap);
        assert!((split.divergence.t_c - 140.0).abs() < 1.5);
        assert!((split.oscillation.t_c - 140.0).abs() < 1.5);
    }

    #[test]
    fn tc_grid_must_clear_the_window() {
        let ts: Vec<f64> = (0..50).map(|t| t as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 1.0 + t * 0.01).collect();
        let cfg = LpplConfig {
            tc_grid: Some(GridSpec::new(40.0, 80.0, 10)),
            ..small_config()
        };
        assert!(matches!(
            fit_divergence(&ts, &ys, Form::Log, &cfg),
            Err(Error::CriticalTimeInsideWindow { .. })
        ));
    }

    #[test]
    fn gap_flag_semantics() {
        // Non-increasing run ending under the threshold.
        assert_eq!(gap_flags(&[9.0, 7.0, 5.0, 4.0, 3.0], 5.0), (true, false));
        // Equal plateaus still count as non-increasing.
        assert_eq!(gap_flags(&[3.0, 3.0, 3.0, 3.0, 3.0], 5.0), (true, false));
        // Converged but above the threshold.
        assert_eq!(gap_flags(&[9.0, 8.0, 7.0, 6.5, 6.0], 5.0), (false, false));
        // V shape: approached, then receded.
        assert_eq!(gap_flags(&[9.0, 6.0, 4.0, 6.0, 9.0], 5.0), (false, true));
        // Noise is neither.
        assert_eq!(gap_flags(&[4.0, 6.0, 3.0, 7.0, 2.0], 5.0), (false, false));
    }

    #[test]
    fn grid_spec_values() {
        let g = GridSpec::new(1.0, 2.0, 5).values().unwrap();
        assert_eq!(g, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(GridSpec::new(3.0, 3.0, 1).values().unwrap(), vec![3.0]);
        assert!(GridSpec::new(2.0, 1.0, 5).values().is_err());
        assert!(GridSpec::new(1.0, 2.0, 0).values().is_err());
    }
}
