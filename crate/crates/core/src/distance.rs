//! Structural distances between economic time series and the taxonomy
//! built on them.
//!
//! Two complementary distances: a correlation distance
//! `d = sqrt(2*(1 - c))` mapping Pearson correlation onto [0, 2], and an
//! entropy distance comparing block-entropy rates of the up/down coded
//! series, which sees nonlinear structure that correlations miss. On top
//! of a pairwise distance matrix: the minimum spanning tree, the
//! single-linkage hierarchy, and the subdominant ultrametric (the max
//! edge along the unique tree path), which together expose the grouping
//! structure of a set of economies or assets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{ReturnKind, TimeSeries};
use crate::stats;
use crate::zipf::{encode, Alphabet};

/// Symmetric pairwise distance matrix with labeled rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    n: usize,
    /// Row-major `n x n`, symmetric, zero diagonal.
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds from explicit rows, validating shape, symmetry, zero
    /// diagonal, and finite non-negative entries.
    pub fn from_rows(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if n < 2 {
            return Err(Error::TooFewPoints { found: n, min: 2 });
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::LengthMismatch {
                left: n,
                right: rows.iter().map(|r| r.len()).max().unwrap_or(0),
            });
        }
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = rows[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NonFiniteDistance { i, j });
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "diagonal entry ({i},{i}) must be zero, got {v}"
                    )));
                }
                if rows[j][i] != v {
                    return Err(Error::InvalidParameter(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
                data[i * n + j] = v;
            }
        }
        Ok(DistanceMatrix { labels, n, data })
    }

    fn from_pairwise<F>(labels: Vec<String>, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        let n = labels.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j)?;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NonFiniteDistance { i, j });
                }
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(DistanceMatrix { labels, n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index out of range");
        self.data[i * self.n + j]
    }
}

/// Correlation distance `sqrt(2*(1 - pearson))` between two aligned
/// return slices; 0 for identical movement, 2 for perfect opposition.
pub fn correlation_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 4 {
        return Err(Error::WindowTooShort {
            len: a.len(),
            min: 4,
        });
    }
    if a == b {
        // Identical data is at distance zero by definition; skip the
        // round-trip through the correlation, which costs one ulp.
        return Ok(0.0);
    }
    let c = stats::pearson(a, b).ok_or_else(|| Error::ConstantSeries {
        label: "window".into(),
    })?;
    Ok((2.0 * (1.0 - c.clamp(-1.0, 1.0))).max(0.0).sqrt())
}

/// Block-entropy rate `H_m - H_(m-1)` (base 2, overlapping blocks) of a
/// letter sequence, clamped at zero. `H_0 = 0`, so `m = 1` gives the plain
/// letter entropy. A strictly alternating sequence rates 0; fair
/// independent coin flips rate 1.
pub fn block_entropy_rate(letters: &[u8], m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("block length must be positive".into()));
    }
    if letters.len() < 4 * m {
        return Err(Error::InsufficientSupport(format!(
            "need at least {} letters for blocks of {m}, got {}",
            4 * m,
            letters.len()
        )));
    }
    let first = letters[0];
    if letters.iter().all(|&l| l == first) {
        return Err(Error::DegenerateEncoding {
            label: "single-letter sequence".into(),
        });
    }
    let h = |k: usize| -> f64 {
        if k == 0 {
            return 0.0;
        }
        let mut counts: std::collections::HashMap<&[u8], u64> = std::collections::HashMap::new();
        for w in letters.windows(k) {
            *counts.entry(w).or_insert(0) += 1;
        }
        let total = (letters.len() - k + 1) as f64;
        -counts
            .values()
            .map(|&c| {
                let p = c as f64 / total;
                p * p.log2()
            })
            .sum::<f64>()
    };
    Ok((h(m) - h(m - 1)).max(0.0))
}

/// Entropy distance `|H_a - H_b|` between the block-entropy rates of two
/// return streams coded into up/down letters. The streams need not be
/// aligned or equally long.
pub fn entropy_distance(a: &[f64], b: &[f64], block_len: usize) -> Result<f64> {
    let ha = block_entropy_rate(encode(a, &Alphabet::Binary)?.letters(), block_len)?;
    let hb = block_entropy_rate(encode(b, &Alphabet::Binary)?.letters(), block_len)?;
    Ok((ha - hb).abs())
}

fn aligned_returns(series: &[TimeSeries], kind: ReturnKind) -> Result<Vec<Vec<f64>>> {
    if series.len() < 2 {
        return Err(Error::TooFewPoints {
            found: series.len(),
            min: 2,
        });
    }
    let mut out = Vec::with_capacity(series.len());
    for s in series {
        out.push(s.returns(kind)?.values().to_vec());
    }
    let len0 = out[0].len();
    if let Some(bad) = out.iter().find(|r| r.len() != len0) {
        return Err(Error::LengthMismatch {
            left: len0,
            right: bad.len(),
        });
    }
    Ok(out)
}

/// Pairwise correlation-distance matrix over aligned series.
pub fn correlation_matrix(series: &[TimeSeries], kind: ReturnKind) -> Result<DistanceMatrix> {
    let returns = aligned_returns(series, kind)?;
    for (s, r) in series.iter().zip(&returns) {
        if stats::variance(r) == 0.0 {
            return Err(Error::ConstantSeries {
                label: s.label().to_string(),
            });
        }
    }
    let labels: Vec<String> = series.iter().map(|s| s.label().to_string()).collect();
    DistanceMatrix::from_pairwise(labels, |i, j| correlation_distance(&returns[i], &returns[j]))
}

/// Pairwise entropy-distance matrix; series lengths may differ.
pub fn entropy_matrix(
    series: &[TimeSeries],
    kind: ReturnKind,
    block_len: usize,
) -> Result<DistanceMatrix> {
    if series.len() < 2 {
        return Err(Error::TooFewPoints {
            found: series.len(),
            min: 2,
        });
    }
    let mut rates = Vec::with_capacity(series.len());
    for s in series {
        let returns = s.returns(kind)?;
        let rate = block_entropy_rate(encode(returns.values(), &Alphabet::Binary)?.letters(), block_len)
            .map_err(|e| match e {
                Error::DegenerateEncoding { .. } => Error::DegenerateEncoding {
                    label: s.label().to_string(),
                },
                other => other,
            })?;
        rates.push(rate);
    }
    let labels: Vec<String> = series.iter().map(|s| s.label().to_string()).collect();
    DistanceMatrix::from_pairwise(labels, |i, j| Ok((rates[i] - rates[j]).abs()))
}

/// Which distance a rolling comparison uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    Correlation,
    Entropy { block_len: usize },
}

/// Distance inside one rolling window `[start, end)` of the return streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowDistance {
    pub start: usize,
    pub end: usize,
    pub distance: f64,
}

/// Rolling pairwise distance with its linear trend: a negative slope means
/// the two series are structurally converging.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingDistance {
    pub windows: Vec<WindowDistance>,
    pub mean: f64,
    /// Least-squares slope of distance against window start index.
    pub trend_slope: f64,
}

/// Tracks the distance between two aligned return streams over rolling
/// windows.
pub fn rolling_distance(
    a: &[f64],
    b: &[f64],
    window: usize,
    step: usize,
    kind: DistanceKind,
) -> Result<RollingDistance> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if step == 0 {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let min_window = match kind {
        DistanceKind::Correlation => 4,
        DistanceKind::Entropy { block_len } => 4 * block_len,
    };
    if window < min_window {
        return Err(Error::WindowTooShort {
            len: window,
            min: min_window,
        });
    }
    let mut windows = Vec::new();
    let mut start = 0;
    while start + window <= a.len() {
        let (wa, wb) = (&a[start..start + window], &b[start..start + window]);
        let d = match kind {
            DistanceKind::Correlation => correlation_distance(wa, wb)?,
            DistanceKind::Entropy { block_len } => entropy_distance(wa, wb, block_len)?,
        };
        windows.push(WindowDistance {
            start,
            end: start + window,
            distance: d,
        });
        start += step;
    }
    if windows.is_empty() {
        return Err(Error::InsufficientWindows { got: 0, need: 1 });
    }
    let mean = stats::mean(&windows.iter().map(|w| w.distance).collect::<Vec<f64>>());
    let trend_slope = if windows.len() >= 2 {
        let xs: Vec<f64> = windows.iter().map(|w| w.start as f64).collect();
        let ys: Vec<f64> = windows.iter().map(|w| w.distance).collect();
        stats::line_fit(&xs, &ys).map(|f| f.slope).unwrap_or(0.0)
    } else {
        0.0
    };
    Ok(RollingDistance {
        windows,
        mean,
        trend_slope,
    })
}

/// One edge of the spanning tree, `i < j` by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        true
    }
}

/// Minimum spanning tree by Kruskal's algorithm; ties in weight break by
/// the `(i, j)` index pair, so the result is deterministic.
pub fn minimum_spanning_tree(d: &DistanceMatrix) -> Vec<Edge> {
    let n = d.n();
    let mut edges: Vec<Edge> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push(Edge {
                i,
                j,
                weight: d.get(i, j),
            });
        }
    }
    edges.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    let mut uf = UnionFind::new(n);
    let mut tree = Vec::with_capacity(n - 1);
    for e in edges {
        if uf.union(e.i, e.j) {
            tree.push(e);
            if tree.len() == n - 1 {
                break;
            }
        }
    }
    tree
}

/// One agglomeration step. Leaves are clusters `0..n`; the k-th merge
/// creates cluster `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    /// Size of the newly formed cluster.
    pub size: usize,
}

/// Single-linkage hierarchy, read off the spanning tree edges in weight
/// order: each edge merges the clusters of its endpoints at its weight.
pub fn single_linkage(d: &DistanceMatrix) -> Vec<Merge> {
    let n = d.n();
    let mut edges = minimum_spanning_tree(d);
    edges.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    let mut uf = UnionFind::new(n);
    let mut cluster_id: Vec<usize> = (0..n).collect();
    let mut cluster_size: Vec<usize> = vec![1; n];
    let mut merges = Vec::with_capacity(n - 1);
    for (k, e) in edges.into_iter().enumerate() {
        let (ra, rb) = (uf.find(e.i), uf.find(e.j));
        let (left, right) = (cluster_id[ra], cluster_id[rb]);
        let size = cluster_size[ra] + cluster_size[rb];
        uf.union(ra, rb);
        let root = uf.find(ra);
        cluster_id[root] = n + k;
        cluster_size[root] = size;
        merges.push(Merge {
            left: left.min(right),
            right: left.max(right),
            distance: e.weight,
            size,
        });
    }
    merges
}

/// Subdominant ultrametric: the distance between two leaves becomes the
/// largest edge weight on their spanning-tree path. Never exceeds the
/// original distance and always satisfies the ultrametric inequality.
pub fn ultrametric_distances(d: &DistanceMatrix) -> DistanceMatrix {
    let n = d.n();
    let tree = minimum_spanning_tree(d);
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in &tree {
        adj[e.i].push((e.j, e.weight));
        adj[e.j].push((e.i, e.weight));
    }
    let mut data = vec![0.0; n * n];
    for start in 0..n {
        // Depth-first walk carrying the max edge seen so far.
        let mut stack = vec![(start, usize::MAX, 0.0f64)];
        while let Some((node, from, max_edge)) = stack.pop() {
            for &(next, w) in &adj[node] {
                if next == from {
                    continue;
                }
                let m = max_edge.max(w);
                data[start * n + next] = m;
                stack.push((next, node, m));
            }
        }
    }
    DistanceMatrix {
        labels: d.labels.clone(),
        n,
        data,
    }
}
