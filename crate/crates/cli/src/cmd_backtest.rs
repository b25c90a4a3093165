//! The `backtest` subcommand: the word-statistics strategy over one or
//! more assets, with date-range or count-based train/trade splits.

use econokit_core::portfolio::{backtest, beta, BacktestConfig, Weighting};
use econokit_core::series::{ReturnKind, TimeSeries};
use serde_json::json;

use crate::config::Settings;
use crate::error::CliError;
use crate::input;
use crate::report::{num, Outputs};

const OWN_KEYS: &[(&str, &str)] = &[
    ("train", ""),
    ("trade", ""),
    ("word_length", "2"),
    ("alphabet", "2"),
    ("thresholds", ""),
    ("weighting", "equal"),
    ("allow_short", "false"),
    ("margin", "0"),
    ("periods_per_year", "252"),
    ("market", ""),
    ("market_column", ""),
];

pub fn keys() -> Vec<(&'static str, &'static str)> {
    let mut keys = crate::schema(OWN_KEYS);
    keys.extend_from_slice(input::MULTI_SERIES_KEYS);
    keys
}

fn weighting(settings: &Settings) -> Result<Weighting, CliError> {
    match settings.require("weighting")? {
        "equal" => Ok(Weighting::Equal),
        "confidence" => Ok(Weighting::Confidence),
        other => Err(CliError::Usage(format!(
            "weighting must be equal or confidence, got '{other}'"
        ))),
    }
}

/// Restricts one series to timestamps in `[lo, hi]`.
fn clip(series: &TimeSeries, lo: i64, hi: i64) -> Result<TimeSeries, CliError> {
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (&t, &v) in series.timestamps().iter().zip(series.values()) {
        if (lo..=hi).contains(&t) {
            timestamps.push(t);
            values.push(v);
        }
    }
    if timestamps.len() < 2 {
        return Err(CliError::Data(format!(
            "series '{}' has {} points inside [{lo}, {hi}]; need at least 2",
            series.label(),
            timestamps.len()
        )));
    }
    Ok(TimeSeries::new(timestamps, values, series.label())?)
}

/// Resolves the train/trade split into clipped series and a training
/// return count.
fn apply_ranges(
    settings: &mut Settings,
    assets: Vec<TimeSeries>,
) -> Result<(Vec<TimeSeries>, usize), CliError> {
    let train = settings.require("train")?.to_string();

    // A plain count trains on the first `n` return observations.
    if !train.contains(':') {
        let train_len: usize = train.parse().map_err(|_| {
            CliError::Usage(format!(
                "'train' expects a return count or a start:end range, got '{train}'"
            ))
        })?;
        if let Some(trade) = settings.opt("trade") {
            let (_, hi) = input::time_range(trade, "trade")?;
            let lo = assets[0].timestamps()[0];
            let clipped = assets
                .iter()
                .map(|s| clip(s, lo, hi))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok((clipped, train_len));
        }
        return Ok((assets, train_len));
    }

    let (train_lo, train_hi) = input::time_range(&train, "train")?;
    let trade_hi = match settings.opt("trade") {
        None => i64::MAX,
        Some(trade) => {
            let (lo, hi) = input::time_range(trade, "trade")?;
            if lo <= train_hi {
                settings.warn(format!(
                    "trade range starts at {lo}, inside the training range; \
                     trading begins right after training"
                ));
            }
            hi
        }
    };

    let clipped = assets
        .iter()
        .map(|s| clip(s, train_lo, trade_hi))
        .collect::<Result<Vec<_>, _>>()?;
    // Prices inside the training range contribute their between-price
    // returns; trading starts at the first return that leaves the range.
    let train_prices = clipped[0]
        .timestamps()
        .iter()
        .take_while(|&&t| t <= train_hi)
        .count();
    if train_prices < 2 {
        return Err(CliError::Data(format!(
            "training range [{train_lo}, {train_hi}] holds {train_prices} prices; need at least 2"
        )));
    }
    Ok((clipped, train_prices - 1))
}

pub fn run(settings: &mut Settings, outputs: &Outputs) -> Result<serde_json::Value, CliError> {
    let assets = input::load_many(settings)?;
    let (assets, train_len) = apply_ranges(settings, assets)?;

    let returns_for_thresholds = assets[0].returns(ReturnKind::Simple)?;
    let config = BacktestConfig {
        word_len: settings.usize("word_length")?,
        alphabet: input::alphabet(settings, Some(returns_for_thresholds.values()))?,
        train_len,
        weighting: weighting(settings)?,
        allow_short: settings.bool("allow_short")?,
        margin: settings.f64("margin")?,
        periods_per_year: settings.f64("periods_per_year")?,
    };

    let report = backtest(&assets, &config)?;

    let beta_vs_market = match settings.opt("market") {
        None => None,
        Some(path) => {
            let column = settings
                .opt("market_column")
                .unwrap_or(settings.get("column"));
            let spec = econokit_core::series::ColumnSpec {
                time: input::column_sel(settings.require("time_column")?),
                value: input::column_sel(column),
            };
            let market = econokit_core::series::load_csv(
                path,
                &spec,
                input::gap_policy(settings)?,
                Some(input::delimiter(settings)?),
            )?;
            let market_rets = market.returns(ReturnKind::Simple)?;
            // The strategy trades returns train_len.. of the clipped span;
            // compare against the market over the same steps.
            let n = report.per_step_returns.len();
            let aligned = market_rets
                .values()
                .get(train_len..train_len + n)
                .ok_or_else(|| {
                    CliError::Data(format!(
                        "market series has {} returns; the trade span needs {}",
                        market_rets.len(),
                        train_len + n
                    ))
                })?;
            Some(beta(&report.per_step_returns, aligned)?)
        }
    };

    outputs.write_csv(
        "backtest_equity.csv",
        &["step", "equity"],
        report
            .equity
            .iter()
            .enumerate()
            .map(|(i, &e)| vec![i.to_string(), num(e)]),
    )?;

    Ok(json!({
        "train_len": train_len,
        "config": config,
        "report": report,
        "beta_vs_market": beta_vs_market,
    }))
}
