//! The `wealthsim` subcommand: seeded kinetic exchange simulation with
//! snapshotting, distribution diagnostics and wealth histograms.

use econokit_core::wealth::{
    ks_critical_1pct, ks_exponential, tail_exponent, Market, MarketConfig, SavingsSpec,
};
use serde_json::json;

use crate::config::Settings;
use crate::error::CliError;
use crate::report::{num, Outputs};

const OWN_KEYS: &[(&str, &str)] = &[
    ("agents", "500"),
    ("steps", "1000000"),
    ("initial_money", "100"),
    ("savings", "none"),
    ("tax", "0"),
    ("seed", "0"),
    ("snapshots", "0"),
    ("bins", "50"),
    ("tail_fraction", "0.1"),
];

pub fn keys() -> Vec<(&'static str, &'static str)> {
    crate::schema(OWN_KEYS)
}

fn savings(settings: &Settings) -> Result<SavingsSpec, CliError> {
    let v = settings.require("savings")?;
    if v == "none" {
        return Ok(SavingsSpec::None);
    }
    if v == "uniform" {
        return Ok(SavingsSpec::Uniform);
    }
    if let Some(s) = v.strip_prefix("fixed:") {
        let s: f64 = s.parse().map_err(|_| {
            CliError::Usage(format!("invalid savings propensity in '{v}'"))
        })?;
        return Ok(SavingsSpec::Fixed(s));
    }
    Err(CliError::Usage(format!(
        "savings must be none, fixed:<s> or uniform, got '{v}'"
    )))
}

/// Equal-width histogram of the wealth vector over `[0, max]`.
fn histogram(money: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let max = money.iter().cloned().fold(0.0_f64, f64::max);
    let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &m in money {
        let mut k = (m / width) as usize;
        if k >= bins {
            k = bins - 1;
        }
        counts[k] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (k as f64 * width, (k + 1) as f64 * width, c))
        .collect()
}

fn write_histogram(
    outputs: &Outputs,
    name: &str,
    money: &[f64],
    bins: usize,
) -> Result<(), CliError> {
    outputs.write_csv(
        name,
        &["bin_lo", "bin_hi", "count"],
        histogram(money, bins)
            .into_iter()
            .map(|(lo, hi, c)| vec![num(lo), num(hi), c.to_string()]),
    )
}

pub fn run(settings: &mut Settings, outputs: &Outputs) -> Result<serde_json::Value, CliError> {
    let config = MarketConfig {
        agents: settings.usize("agents")?,
        initial_money: settings.f64("initial_money")?,
        savings: savings(settings)?,
        tax: settings.f64("tax")?,
        seed: settings.u64("seed")?,
    };
    let steps = settings.u64("steps")?;
    let snapshots = settings.usize("snapshots")?;
    let bins = settings.usize("bins")?;
    if bins == 0 {
        return Err(CliError::Usage("'bins' must be positive".into()));
    }

    let mut market = Market::new(&config)?;
    let initial_total = market.total_money();

    let mut snaps = Vec::new();
    if snapshots > 0 {
        let chunk = steps / snapshots as u64;
        for k in 1..=snapshots {
            let target = if k == snapshots { steps } else { chunk * k as u64 };
            market.run(target - market.steps_done());
            snaps.push(json!({
                "step": market.steps_done(),
                "gini": market.gini(),
                "total_money": market.total_money(),
            }));
            write_histogram(
                outputs,
                &format!("wealth_hist_{:02}.csv", k),
                market.money(),
                bins,
            )?;
        }
    } else {
        market.run(steps);
    }
    write_histogram(outputs, "wealth_hist_final.csv", market.money(), bins)?;

    let tail = match tail_exponent(market.money(), settings.f64("tail_fraction")?) {
        Ok(fit) => serde_json::to_value(fit)?,
        Err(e) => {
            settings.warn(format!("tail fit skipped: {e}"));
            serde_json::Value::Null
        }
    };
    let ks = match ks_exponential(market.money()) {
        Ok(ks) => json!({
            "statistic": ks.statistic,
            "critical_1pct": ks_critical_1pct(ks.n),
            "rate": ks.rate,
            "n": ks.n,
        }),
        Err(e) => {
            settings.warn(format!("exponential KS skipped: {e}"));
            serde_json::Value::Null
        }
    };

    let final_total = market.total_money();
    let drift = ((final_total + market.leaked()) - initial_total).abs() / initial_total;

    Ok(json!({
        "agents": config.agents,
        "steps": market.steps_done(),
        "gini": market.gini(),
        "conservation": {
            "initial_total": initial_total,
            "final_total": final_total,
            "leaked": market.leaked(),
            "relative_drift": drift,
        },
        "tail": tail,
        "ks_exponential": ks,
        "snapshots": snaps,
    }))
}
