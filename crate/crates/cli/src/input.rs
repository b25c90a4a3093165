//! Shared input plumbing: series loading, column selection, and the
//! small string-to-domain parsers used by several subcommands.

use econokit_core::series::{
    load_csv, parse_timestamp, ColumnSel, ColumnSpec, GapPolicy, ReturnKind, TimeSeries,
};
use econokit_core::zipf::Alphabet;

use crate::config::Settings;
use crate::error::CliError;

/// Keys every file-reading subcommand shares.
pub const SERIES_KEYS: &[(&str, &str)] = &[
    ("input", ""),
    ("column", "1"),
    ("time_column", "0"),
    ("delimiter", ","),
    ("gap_policy", "reject"),
];

/// Keys of subcommands that read several series at once.
pub const MULTI_SERIES_KEYS: &[(&str, &str)] = &[
    ("input", ""),
    ("columns", ""),
    ("column", "1"),
    ("time_column", "0"),
    ("delimiter", ","),
    ("gap_policy", "reject"),
];

pub fn column_sel(value: &str) -> ColumnSel {
    match value.parse::<usize>() {
        Ok(i) => ColumnSel::Index(i),
        Err(_) => ColumnSel::Name(value.to_string()),
    }
}

pub fn gap_policy(settings: &Settings) -> Result<GapPolicy, CliError> {
    match settings.require("gap_policy")? {
        "reject" => Ok(GapPolicy::Reject),
        "forward-fill" => Ok(GapPolicy::ForwardFill),
        other => Err(CliError::Usage(format!(
            "gap_policy must be reject or forward-fill, got '{other}'"
        ))),
    }
}

pub fn delimiter(settings: &Settings) -> Result<u8, CliError> {
    let v = settings.require("delimiter")?;
    if v == "tab" {
        return Ok(b'\t');
    }
    let mut bytes = v.bytes();
    match (bytes.next(), bytes.next()) {
        (Some(b), None) if b.is_ascii() => Ok(b),
        _ => Err(CliError::Usage(format!(
            "delimiter must be one ASCII character or 'tab', got '{v}'"
        ))),
    }
}

pub fn return_kind(value: &str, key: &str) -> Result<ReturnKind, CliError> {
    match value {
        "simple" => Ok(ReturnKind::Simple),
        "log" => Ok(ReturnKind::Log),
        "raw-difference" => Ok(ReturnKind::RawDifference),
        other => Err(CliError::Usage(format!(
            "'{key}' must be simple, log or raw-difference, got '{other}'"
        ))),
    }
}

/// Loads the single input series of a subcommand.
pub fn load_series(settings: &Settings) -> Result<TimeSeries, CliError> {
    let path = settings.require("input")?;
    let spec = ColumnSpec {
        time: column_sel(settings.require("time_column")?),
        value: column_sel(settings.require("column")?),
    };
    let policy = gap_policy(settings)?;
    let delim = delimiter(settings)?;
    Ok(load_csv(path, &spec, policy, Some(delim))?)
}

/// Loads several series: either one file per series (comma-separated
/// paths, labeled by file stem) or a single wide file with a `columns`
/// list naming one value column per series.
pub fn load_many(settings: &Settings) -> Result<Vec<TimeSeries>, CliError> {
    let inputs: Vec<&str> = settings
        .require("input")?
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let policy = gap_policy(settings)?;
    let delim = delimiter(settings)?;
    let time = column_sel(settings.require("time_column")?);

    let columns = settings.opt("columns").unwrap_or("");
    if !columns.is_empty() {
        if inputs.len() != 1 {
            return Err(CliError::Usage(
                "'columns' selects series from a single wide file; pass one input".into(),
            ));
        }
        let mut out = Vec::new();
        for name in columns.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let spec = ColumnSpec {
                time: time.clone(),
                value: column_sel(name),
            };
            let s = load_csv(inputs[0], &spec, policy, Some(delim))?;
            out.push(TimeSeries::new(
                s.timestamps().to_vec(),
                s.values().to_vec(),
                name,
            )?);
        }
        return Ok(out);
    }

    let value = column_sel(settings.require("column")?);
    inputs
        .iter()
        .map(|path| {
            let spec = ColumnSpec {
                time: time.clone(),
                value: value.clone(),
            };
            Ok(load_csv(path, &spec, policy, Some(delim))?)
        })
        .collect()
}

/// Builds the coding alphabet from the `alphabet` and `thresholds` keys.
///
/// The five-letter scheme falls back to quantile thresholds fitted on
/// `returns` when no explicit thresholds are given.
pub fn alphabet(settings: &Settings, returns: Option<&[f64]>) -> Result<Alphabet, CliError> {
    let cuts: Vec<f64> = match settings.opt("thresholds") {
        None => Vec::new(),
        Some(raw) => raw
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    CliError::Usage(format!("invalid threshold '{s}' in 'thresholds'"))
                })
            })
            .collect::<Result<_, _>>()?,
    };
    match settings.require("alphabet")? {
        "2" => {
            if !cuts.is_empty() {
                return Err(CliError::Usage(
                    "the binary alphabet takes no thresholds".into(),
                ));
            }
            Ok(Alphabet::Binary)
        }
        "3" => match cuts.as_slice() {
            [t] => Ok(Alphabet::ternary(*t)?),
            _ => Err(CliError::Usage(
                "alphabet 3 needs exactly one threshold (the stable band half-width)".into(),
            )),
        },
        "5" => match cuts.as_slice() {
            [lower, upper] => Ok(Alphabet::five(*lower, *upper)?),
            [] => match returns {
                Some(r) => Ok(Alphabet::five_from_quantiles(r)?),
                None => Err(CliError::Usage(
                    "alphabet 5 needs two thresholds here".into(),
                )),
            },
            _ => Err(CliError::Usage(
                "alphabet 5 takes two thresholds: lower,upper".into(),
            )),
        },
        other => Err(CliError::Usage(format!(
            "alphabet must be 2, 3 or 5, got '{other}'"
        ))),
    }
}

/// Parses a time endpoint: integer timestamp or ISO date.
pub fn timestamp(value: &str, key: &str) -> Result<i64, CliError> {
    parse_timestamp(value).ok_or_else(|| {
        CliError::Usage(format!(
            "'{key}' expects an integer timestamp or YYYY-MM-DD date, got '{value}'"
        ))
    })
}

/// Parses an inclusive `start:end` range of time endpoints.
pub fn time_range(value: &str, key: &str) -> Result<(i64, i64), CliError> {
    let (a, b) = value.split_once(':').ok_or_else(|| {
        CliError::Usage(format!("'{key}' expects a start:end range, got '{value}'"))
    })?;
    let lo = timestamp(a.trim(), key)?;
    let hi = timestamp(b.trim(), key)?;
    if hi < lo {
        return Err(CliError::Usage(format!(
            "'{key}' range end {hi} precedes start {lo}"
        )));
    }
    Ok((lo, hi))
}
