//! The `lppl` subcommand: joint and two-stage divergence fits, or the
//! rolling crash-risk track.

use econokit_core::lppl::{
    crash_risk_track, full_fit, lppl_curve, split_fit, Form, GridSpec, LpplConfig, Oscillation,
    TrackConfig, DEFAULT_CONVERGENCE_DEPTH, DEFAULT_GAP_THRESHOLD,
};
use serde_json::json;

use crate::config::Settings;
use crate::error::CliError;
use crate::input;
use crate::report::{num, Outputs};

const OWN_KEYS: &[(&str, &str)] = &[
    ("log_price", "false"),
    ("form", "log"),
    ("oscillation", "cosine"),
    ("tc_lo", ""),
    ("tc_hi", ""),
    ("tc_points", "200"),
    ("omega_lo", "4"),
    ("omega_hi", "25"),
    ("omega_points", "100"),
    ("m_lo", "0.05"),
    ("m_hi", "0.95"),
    ("m_points", "50"),
    ("refine", "true"),
    ("track", "false"),
    ("first_end", ""),
    ("track_step", ""),
    ("track_window", ""),
    ("depth", ""),
    ("theta", ""),
];

pub fn keys() -> Vec<(&'static str, &'static str)> {
    let mut keys = crate::schema(OWN_KEYS);
    keys.extend_from_slice(input::SERIES_KEYS);
    keys
}

fn form(settings: &Settings) -> Result<Form, CliError> {
    match settings.require("form")? {
        "log" => Ok(Form::Log),
        "power" => Ok(Form::Power),
        other => Err(CliError::Usage(format!(
            "form must be log or power, got '{other}'"
        ))),
    }
}

fn oscillation(settings: &Settings) -> Result<Oscillation, CliError> {
    match settings.require("oscillation")? {
        "cosine" | "cos" => Ok(Oscillation::Cosine),
        "linear" => Ok(Oscillation::Linear),
        other => Err(CliError::Usage(format!(
            "oscillation must be cosine or linear, got '{other}'"
        ))),
    }
}

fn lppl_config(settings: &Settings) -> Result<LpplConfig, CliError> {
    let tc_grid = match (settings.opt_f64("tc_lo")?, settings.opt_f64("tc_hi")?) {
        (None, None) => None,
        (Some(lo), Some(hi)) => Some(GridSpec::new(lo, hi, settings.usize("tc_points")?)),
        _ => {
            return Err(CliError::Usage(
                "tc_lo and tc_hi must be set together".into(),
            ))
        }
    };
    Ok(LpplConfig {
        tc_grid,
        omega_grid: GridSpec::new(
            settings.f64("omega_lo")?,
            settings.f64("omega_hi")?,
            settings.usize("omega_points")?,
        ),
        m_grid: GridSpec::new(
            settings.f64("m_lo")?,
            settings.f64("m_hi")?,
            settings.usize("m_points")?,
        ),
        oscillation: oscillation(settings)?,
        refine: settings.bool("refine")?,
    })
}

pub fn run(settings: &mut Settings, outputs: &Outputs) -> Result<serde_json::Value, CliError> {
    let series = input::load_series(settings)?;
    let ts: Vec<f64> = series.timestamps().iter().map(|&t| t as f64).collect();
    let ys: Vec<f64> = if settings.bool("log_price")? {
        if let Some(i) = series.values().iter().position(|&v| v <= 0.0) {
            return Err(CliError::Data(format!(
                "log_price needs positive values; found {} at index {i}",
                series.values()[i]
            )));
        }
        series.values().iter().map(|v| v.ln()).collect()
    } else {
        series.values().to_vec()
    };

    let form = form(settings)?;
    let config = lppl_config(settings)?;

    if settings.bool("track")? {
        let mut track = TrackConfig::new(
            settings.usize("first_end")?,
            settings.usize("track_step")?,
        );
        track.window = settings.opt_usize("track_window")?;
        track.depth = settings
            .opt_usize("depth")?
            .unwrap_or(DEFAULT_CONVERGENCE_DEPTH);
        track.theta = settings.opt_f64("theta")?.unwrap_or(DEFAULT_GAP_THRESHOLD);

        let entries = crash_risk_track(&ts, &ys, form, &config, &track)?;
        outputs.write_csv(
            "lppl_track.csv",
            &[
                "window_start",
                "window_end",
                "t_c_divergence",
                "t_c_oscillation",
                "omega",
                "gap",
                "converging",
                "near_miss",
            ],
            entries.iter().map(|e| {
                vec![
                    e.window_start.to_string(),
                    e.window_end.to_string(),
                    num(e.t_c_divergence),
                    num(e.t_c_oscillation),
                    num(e.omega),
                    num(e.gap),
                    e.converging.to_string(),
                    e.near_miss.to_string(),
                ]
            }),
        )?;
        return Ok(json!({
            "track": entries,
            "flagged": entries.iter().any(|e| e.converging),
        }));
    }

    let full = full_fit(&ts, &ys, form, &config)?;
    let split = split_fit(&ts, &ys, form, &config)?;

    let fitted = lppl_curve(&full.params, &ts)?;
    outputs.write_csv(
        "lppl_curve.csv",
        &["t", "observed", "fitted"],
        ts.iter()
            .zip(ys.iter().zip(&fitted))
            .map(|(&t, (&y, &f))| vec![num(t), num(y), num(f)]),
    )?;

    Ok(json!({
        "full": full,
        "split": split,
    }))
}
