//! The `zipf` subcommand: alphabet coding of a return stream and the
//! rank-frequency and tail exponent fits.

use econokit_core::zipf::{
    count_words, encode, exponent_relation_residual, fit_pareto, fit_zipf, rank_frequency,
    WordMode,
};
use serde_json::json;

use crate::config::Settings;
use crate::error::CliError;
use crate::input;
use crate::report::Outputs;

const OWN_KEYS: &[(&str, &str)] = &[
    ("returns", "simple"),
    ("alphabet", "2"),
    ("thresholds", ""),
    ("word_length", "2"),
    ("overlap", "true"),
    ("min_count", "2"),
];

pub fn keys() -> Vec<(&'static str, &'static str)> {
    let mut keys = crate::schema(OWN_KEYS);
    keys.extend_from_slice(input::SERIES_KEYS);
    keys
}

pub fn run(settings: &mut Settings, outputs: &Outputs) -> Result<serde_json::Value, CliError> {
    let series = input::load_series(settings)?;
    let kind = input::return_kind(settings.require("returns")?, "returns")?;
    let returns = series.returns(kind)?.values().to_vec();

    let alphabet = input::alphabet(settings, Some(&returns))?;
    let seq = encode(&returns, &alphabet)?;
    let mode = if settings.bool("overlap")? {
        WordMode::Overlapping
    } else {
        WordMode::NonOverlapping
    };
    let table = count_words(&seq, settings.usize("word_length")?, mode)?;
    let ranked = rank_frequency(&table);

    let zipf = fit_zipf(&ranked, settings.u64("min_count")?)?;
    // Small vocabularies leave too few distinct frequencies for a tail
    // fit; the rank-frequency exponent is still worth reporting.
    let (pareto, residual) = match fit_pareto(&table) {
        Ok(p) => {
            let residual = exponent_relation_residual(zipf.zeta, p.lambda);
            (serde_json::to_value(p)?, json!(residual))
        }
        Err(e) => {
            settings.warn(format!("frequency tail fit skipped: {e}"));
            (serde_json::Value::Null, serde_json::Value::Null)
        }
    };

    outputs.write_csv(
        "zipf_ranks.csv",
        &["rank", "word", "count"],
        ranked
            .iter()
            .map(|r| vec![r.rank.to_string(), r.word.clone(), r.count.to_string()]),
    )?;

    Ok(json!({
        "alphabet": alphabet,
        "letters": seq.len(),
        "total_words": table.total(),
        "distinct_words": table.distinct(),
        "zipf": zipf,
        "pareto": pareto,
        "relation_residual": residual,
    }))
}
