//! The `dfa` subcommand: fluctuation curve, scaling exponent, and the
//! optional rolling exponent track.

use econokit_core::dfa::{
    default_box_sizes, dfa_curve, hurst_exponent, rolling_alpha, BoxAlignment, FluctuationCurve,
};
use serde_json::json;

use crate::config::Settings;
use crate::error::CliError;
use crate::input;
use crate::report::{num, Outputs};

const OWN_KEYS: &[(&str, &str)] = &[
    ("returns", ""),
    ("degree", "1"),
    ("box_min", ""),
    ("box_max", ""),
    ("box_count", ""),
    ("alignment", "newest-first"),
    ("fit_min", ""),
    ("fit_max", ""),
    ("window", ""),
    ("step", ""),
];

pub fn keys() -> Vec<(&'static str, &'static str)> {
    let mut keys = crate::schema(OWN_KEYS);
    keys.extend_from_slice(input::SERIES_KEYS);
    keys
}

fn alignment(settings: &Settings) -> Result<BoxAlignment, CliError> {
    match settings.require("alignment")? {
        "newest-first" => Ok(BoxAlignment::NewestFirst),
        "oldest-first" => Ok(BoxAlignment::OldestFirst),
        other => Err(CliError::Usage(format!(
            "alignment must be newest-first or oldest-first, got '{other}'"
        ))),
    }
}

/// Geometric schedule between explicit bounds, deduplicated after
/// rounding; mirrors the default schedule's spacing rule.
fn explicit_box_sizes(min: usize, max: usize, count: usize) -> Result<Vec<usize>, CliError> {
    if min < 2 || max < min || count < 2 {
        return Err(CliError::Usage(format!(
            "box schedule needs 2 <= box_min <= box_max and box_count >= 2, \
             got {min}..{max} x{count}"
        )));
    }
    let (lo, hi) = ((min as f64).ln(), (max as f64).ln());
    let mut out: Vec<usize> = Vec::with_capacity(count);
    for i in 0..count {
        let x = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        let n = x.exp().round() as usize;
        if out.last() != Some(&n) {
            out.push(n);
        }
    }
    Ok(out)
}

pub fn run(settings: &mut Settings, outputs: &Outputs) -> Result<serde_json::Value, CliError> {
    let series = input::load_series(settings)?;
    let x: Vec<f64> = match settings.opt("returns") {
        None => series.values().to_vec(),
        Some(kind) => {
            let kind = input::return_kind(kind, "returns")?;
            series.returns(kind)?.values().to_vec()
        }
    };

    let degree = settings.usize("degree")?;
    let align = alignment(settings)?;
    let box_min = settings.opt_usize("box_min")?;
    let box_max = settings.opt_usize("box_max")?;
    let box_count = settings.opt_usize("box_count")?;
    let sizes = if box_min.is_none() && box_max.is_none() && box_count.is_none() {
        default_box_sizes(x.len(), degree)
    } else {
        explicit_box_sizes(
            box_min.unwrap_or(2 * (degree + 1)),
            box_max.unwrap_or(x.len() / 4),
            box_count.unwrap_or(20),
        )?
    };

    let curve = dfa_curve(&x, &sizes, degree, align)?;

    let fit_min = settings.opt_usize("fit_min")?.unwrap_or(0);
    let fit_max = settings.opt_usize("fit_max")?.unwrap_or(usize::MAX);
    let mut fit_sizes = Vec::new();
    let mut fit_fs = Vec::new();
    for (&n, &f) in curve.box_sizes.iter().zip(&curve.fluctuations) {
        if (fit_min..=fit_max).contains(&n) {
            fit_sizes.push(n);
            fit_fs.push(f);
        }
    }
    let fitted = FluctuationCurve {
        box_sizes: fit_sizes,
        fluctuations: fit_fs,
        degree,
        alignment: align,
    };
    let estimate = hurst_exponent(&fitted)?;

    let rolling = match settings.opt_usize("window")? {
        None => None,
        Some(window) => {
            let step = settings.opt_usize("step")?.unwrap_or_else(|| {
                // A quarter-window hop keeps adjacent estimates loosely
                // coupled without flooding the track.
                (window / 4).max(1)
            });
            Some(rolling_alpha(&x, window, step, degree)?)
        }
    };

    outputs.write_csv(
        "dfa_curve.csv",
        &["box_size", "fluctuation"],
        curve
            .box_sizes
            .iter()
            .zip(&curve.fluctuations)
            .map(|(&n, &f)| vec![n.to_string(), num(f)]),
    )?;
    if let Some(track) = &rolling {
        outputs.write_csv(
            "dfa_rolling.csv",
            &["start", "end", "alpha", "stderr"],
            track.iter().map(|w| {
                vec![
                    w.start.to_string(),
                    w.end.to_string(),
                    num(w.estimate.alpha),
                    num(w.estimate.stderr),
                ]
            }),
        )?;
    }

    Ok(json!({
        "alpha": estimate.alpha,
        "stderr": estimate.stderr,
        "r_squared": estimate.r_squared,
        "beta": estimate.beta,
        "autocorr": estimate.autocorr,
        "class": estimate.class,
        "points": series.len(),
        "fit_points": fitted.box_sizes.len(),
        "curve": curve
            .box_sizes
            .iter()
            .zip(&curve.fluctuations)
            .map(|(&n, &f)| json!({"n": n, "f": f}))
            .collect::<Vec<_>>(),
        "rolling": rolling,
    }))
}
