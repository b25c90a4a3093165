//! The `distance` subcommand: pairwise distance matrix, optional rolling
//! convergence tracks, spanning tree and hierarchy.

use econokit_core::distance::{
    correlation_matrix, entropy_matrix, minimum_spanning_tree, rolling_distance, single_linkage,
    DistanceKind, DistanceMatrix,
};
use econokit_core::series::TimeSeries;
use serde_json::json;

use crate::config::Settings;
use crate::error::CliError;
use crate::input;
use crate::report::{num, Outputs};

const OWN_KEYS: &[(&str, &str)] = &[
    ("returns", "log"),
    ("kind", "correlation"),
    ("block_len", "2"),
    ("subset", ""),
    ("window", ""),
    ("step", ""),
    ("mst", "true"),
];

pub fn keys() -> Vec<(&'static str, &'static str)> {
    let mut keys = crate::schema(OWN_KEYS);
    keys.extend_from_slice(input::MULTI_SERIES_KEYS);
    keys
}

fn subset(settings: &Settings, series: Vec<TimeSeries>) -> Result<Vec<TimeSeries>, CliError> {
    let Some(wanted) = settings.opt("subset") else {
        return Ok(series);
    };
    let mut out = Vec::new();
    for label in wanted.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let found = series.iter().find(|s| s.label() == label).ok_or_else(|| {
            CliError::Usage(format!(
                "subset label '{label}' matches no input series (have: {})",
                series
                    .iter()
                    .map(|s| s.label())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
        out.push(found.clone());
    }
    Ok(out)
}

fn matrix_rows(d: &DistanceMatrix) -> Vec<Vec<f64>> {
    (0..d.n())
        .map(|i| (0..d.n()).map(|j| d.get(i, j)).collect())
        .collect()
}

pub fn run(settings: &mut Settings, outputs: &Outputs) -> Result<serde_json::Value, CliError> {
    let series = subset(settings, input::load_many(settings)?)?;
    let kind = input::return_kind(settings.require("returns")?, "returns")?;
    let block_len = settings.usize("block_len")?;

    let distance_kind = match settings.require("kind")? {
        "correlation" => DistanceKind::Correlation,
        "entropy" => DistanceKind::Entropy { block_len },
        other => {
            return Err(CliError::Usage(format!(
                "kind must be correlation or entropy, got '{other}'"
            )))
        }
    };

    let matrix = match distance_kind {
        DistanceKind::Correlation => correlation_matrix(&series, kind)?,
        DistanceKind::Entropy { block_len } => entropy_matrix(&series, kind, block_len)?,
    };

    let rolling = match settings.opt_usize("window")? {
        None => None,
        Some(window) => {
            let step = settings.opt_usize("step")?.unwrap_or((window / 2).max(1));
            let returns: Vec<Vec<f64>> = series
                .iter()
                .map(|s| Ok(s.returns(kind)?.values().to_vec()))
                .collect::<Result<_, CliError>>()?;
            let mut tracks = Vec::new();
            for i in 0..series.len() {
                for j in i + 1..series.len() {
                    let track =
                        rolling_distance(&returns[i], &returns[j], window, step, distance_kind)?;
                    tracks.push(json!({
                        "left": series[i].label(),
                        "right": series[j].label(),
                        "track": track,
                    }));
                }
            }
            Some(tracks)
        }
    };

    let (mst, linkage) = if settings.bool("mst")? {
        let edges = minimum_spanning_tree(&matrix);
        let total: f64 = edges.iter().map(|e| e.weight).sum();
        let merges = single_linkage(&matrix);
        (
            Some(json!({"edges": edges, "total_weight": total})),
            Some(merges),
        )
    } else {
        (None, None)
    };

    let labels = matrix.labels().to_vec();
    outputs.write_csv("distance_matrix.csv", &{
        let mut header = vec!["label"];
        for l in &labels {
            header.push(l.as_str());
        }
        header
    }, (0..matrix.n()).map(|i| {
        let mut row = vec![labels[i].clone()];
        for j in 0..matrix.n() {
            row.push(num(matrix.get(i, j)));
        }
        row
    }))?;

    if let Some(mst_json) = &mst {
        let edges = mst_json["edges"].as_array().expect("edge list");
        outputs.write_csv(
            "distance_edges.csv",
            &["left", "right", "weight"],
            edges.iter().map(|e| {
                let i = e["i"].as_u64().expect("index") as usize;
                let j = e["j"].as_u64().expect("index") as usize;
                vec![
                    labels[i].clone(),
                    labels[j].clone(),
                    e["weight"].to_string(),
                ]
            }),
        )?;
    }

    Ok(json!({
        "kind": distance_kind,
        "labels": labels,
        "matrix": matrix_rows(&matrix),
        "mst": mst,
        "linkage": linkage,
        "rolling": rolling,
    }))
}
