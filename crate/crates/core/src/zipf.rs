//! Zipf analysis of return sequences coded into letter alphabets.
//!
//! Returns are quantized into a small alphabet (up/down, optionally with a
//! stable band and weak/strong moves), consecutive letters form words of a
//! fixed length, and the word-frequency table is examined two ways: the
//! rank-frequency law `N_r ~ r^-zeta` and the frequency tail
//! `P[freq > f] ~ f^-lambda`. For power-law tables the exponents satisfy
//! `1/lambda + zeta = 2`, so the residual of that relation measures how far
//! a text is from the pure law.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

/// Letter scheme used to quantize returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum Alphabet {
    /// `u` for positive returns, `d` otherwise (zero counts as down).
    Binary,
    /// `u`/`d` outside the stable band `|r| <= threshold`, `s` inside.
    Ternary { threshold: f64 },
    /// Two magnitude cuts `0 <= lower < upper` split each sign into weak
    /// (`p`/`n`) and strong (`u`/`d`) moves around the stable band `s`.
    Five { lower: f64, upper: f64 },
}

impl Alphabet {
    /// Letters in rank order; ties in word counts break by this order.
    pub fn letters(&self) -> &'static [u8] {
        match self {
            Alphabet::Binary => b"ud",
            Alphabet::Ternary { .. } => b"usd",
            Alphabet::Five { .. } => b"upsnd",
        }
    }

    pub fn size(&self) -> usize {
        self.letters().len()
    }

    /// Ternary scheme with an explicit stable band.
    pub fn ternary(threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0) || !threshold.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stable band must be finite and non-negative, got {threshold}"
            )));
        }
        Ok(Alphabet::Ternary { threshold })
    }

    /// Five-letter scheme with explicit magnitude cuts.
    pub fn five(lower: f64, upper: f64) -> Result<Self> {
        if !(0.0 <= lower && lower < upper) || !upper.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "magnitude cuts must satisfy 0 <= lower < upper, got {lower}, {upper}"
            )));
        }
        Ok(Alphabet::Five { lower, upper })
    }

    /// Five-letter scheme with cuts at the 20th and 60th percentiles of
    /// `|r|`, which splits a sign-symmetric return distribution into five
    /// roughly equal-mass letters.
    pub fn five_from_quantiles(returns: &[f64]) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::EmptySeries);
        }
        let abs: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
        let lower = stats::quantile(&abs, 0.2);
        let upper = stats::quantile(&abs, 0.6);
        Alphabet::five(lower, upper)
    }

    fn encode_one(&self, r: f64) -> u8 {
        match *self {
            Alphabet::Binary => {
                if r > 0.0 {
                    b'u'
                } else {
                    b'd'
                }
            }
            Alphabet::Ternary { threshold } => {
                if r.abs() <= threshold {
                    b's'
                } else if r > 0.0 {
                    b'u'
                } else {
                    b'd'
                }
            }
            Alphabet::Five { lower, upper } => {
                if r.abs() <= lower {
                    b's'
                } else if r > 0.0 {
                    if r <= upper {
                        b'p'
                    } else {
                        b'u'
                    }
                } else if r >= -upper {
                    b'n'
                } else {
                    b'd'
                }
            }
        }
    }
}

/// A return sequence quantized into letters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LetterSeq {
    letters: Vec<u8>,
    alphabet: Alphabet,
}

impl LetterSeq {
    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

impl fmt::Display for LetterSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(std::str::from_utf8(&self.letters).expect("ascii letters"))
    }
}

/// Quantizes each return into one letter.
pub fn encode(returns: &[f64], alphabet: &Alphabet) -> Result<LetterSeq> {
    if returns.is_empty() {
        return Err(Error::EmptySeries);
    }
    if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
        return Err(Error::NonFiniteValue { row: i + 1 });
    }
    Ok(LetterSeq {
        letters: returns.iter().map(|&r| alphabet.encode_one(r)).collect(),
        alphabet: alphabet.clone(),
    })
}

/// How words are extracted from the letter sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WordMode {
    /// Every window of `m` letters: `L - m + 1` words.
    #[default]
    Overlapping,
    /// Front-aligned disjoint words: `floor(L / m)` of them; trailing
    /// letters that do not fill a word are dropped.
    NonOverlapping,
}

/// Word-frequency table over a fixed word length.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTable {
    counts: HashMap<Vec<u8>, u64>,
    word_len: usize,
    mode: WordMode,
    alphabet: Alphabet,
    total: u64,
}

impl WordTable {
    pub fn word_len(&self) -> usize {
        self.word_len
    }

    pub fn mode(&self) -> WordMode {
        self.mode
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Total number of word occurrences counted.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct words seen.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word.as_bytes()).copied().unwrap_or(0)
    }

    /// Occurrence count of `prefix` extended by each alphabet letter, in
    /// letter order. `prefix` must be one letter shorter than the table's
    /// words.
    pub fn prefix_continuations(&self, prefix: &[u8]) -> Result<Vec<(u8, u64)>> {
        if prefix.len() + 1 != self.word_len {
            return Err(Error::PrefixLength {
                got: prefix.len(),
                word_length: self.word_len,
            });
        }
        let mut word = prefix.to_vec();
        word.push(0);
        Ok(self
            .alphabet
            .letters()
            .iter()
            .map(|&l| {
                *word.last_mut().expect("non-empty") = l;
                (l, self.counts.get(&word).copied().unwrap_or(0))
            })
            .collect())
    }

    /// Builds a table from explicit word counts (for precomputed corpora).
    pub fn from_counts<I, S>(counts: I, alphabet: Alphabet, mode: WordMode) -> Result<WordTable>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        let mut map: HashMap<Vec<u8>, u64> = HashMap::new();
        let mut word_len = None;
        let mut total = 0u64;
        for (word, count) in counts {
            let bytes = word.as_ref().as_bytes().to_vec();
            match word_len {
                None => word_len = Some(bytes.len()),
                Some(l) if l != bytes.len() => {
                    return Err(Error::WordTooLong {
                        m: bytes.len(),
                        len: l,
                    })
                }
                _ => {}
            }
            if let Some(&bad) = bytes.iter().find(|b| !alphabet.letters().contains(b)) {
                return Err(Error::InvalidAlphabet(format!(
                    "letter '{}' not in alphabet",
                    bad as char
                )));
            }
            if count == 0 {
                return Err(Error::DegenerateFrequencies(format!(
                    "word '{}' has zero count",
                    word.as_ref()
                )));
            }
            total += count;
            *map.entry(bytes).or_insert(0) += count;
        }
        let word_len = word_len.ok_or(Error::EmptyTable)?;
        if word_len == 0 {
            return Err(Error::InvalidParameter("empty words".into()));
        }
        Ok(WordTable {
            counts: map,
            word_len,
            mode,
            alphabet,
            total,
        })
    }
}

/// Counts words of `m` letters in the sequence.
pub fn count_words(seq: &LetterSeq, m: usize, mode: WordMode) -> Result<WordTable> {
    if m == 0 {
        return Err(Error::InvalidParameter("word length must be positive".into()));
    }
    if m > seq.len() {
        return Err(Error::WordTooLong { m, len: seq.len() });
    }
    let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
    let mut total = 0u64;
    match mode {
        WordMode::Overlapping => {
            for w in seq.letters.windows(m) {
                *counts.entry(w.to_vec()).or_insert(0) += 1;
                total += 1;
            }
        }
        WordMode::NonOverlapping => {
            for w in seq.letters.chunks_exact(m) {
                *counts.entry(w.to_vec()).or_insert(0) += 1;
                total += 1;
            }
        }
    }
    Ok(WordTable {
        counts,
        word_len: m,
        mode,
        alphabet: seq.alphabet.clone(),
        total,
    })
}

/// One row of the rank-frequency list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankedWord {
    /// 1-based rank; most frequent word first.
    pub rank: usize,
    pub word: String,
    pub count: u64,
}

/// Words sorted by decreasing count; ties break by alphabet letter order
/// (not byte order), so with equal counts `ud` precedes `du`.
pub fn rank_frequency(table: &WordTable) -> Vec<RankedWord> {
    let mut index = [u8::MAX; 256];
    for (i, &l) in table.alphabet.letters().iter().enumerate() {
        index[l as usize] = i as u8;
    }
    let key = |w: &[u8]| -> Vec<u8> { w.iter().map(|&b| index[b as usize]).collect() };
    let mut entries: Vec<(&Vec<u8>, u64)> = table.counts.iter().map(|(w, &c)| (w, c)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| key(a.0).cmp(&key(b.0))));
    entries
        .into_iter()
        .enumerate()
        .map(|(i, (w, c))| RankedWord {
            rank: i + 1,
            word: String::from_utf8(w.clone()).expect("ascii letters"),
            count: c,
        })
        .collect()
}

/// Rank-frequency exponent fit `N_r ~ r^-zeta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZipfFit {
    pub zeta: f64,
    pub stderr: f64,
    pub r_squared: f64,
    /// Number of ranks entering the regression.
    pub ranks_used: usize,
}

/// Fits the rank-frequency exponent by least squares on log-log axes.
///
/// Words with fewer than `min_count` occurrences are excluded; the default
/// of 2 drops hapax words whose flat count-1 plateau biases the slope.
pub fn fit_zipf(ranked: &[RankedWord], min_count: u64) -> Result<ZipfFit> {
    let used: Vec<&RankedWord> = ranked.iter().filter(|e| e.count >= min_count).collect();
    if used.len() < 5 {
        return Err(Error::TooFewPoints {
            found: used.len(),
            min: 5,
        });
    }
    let xs: Vec<f64> = used.iter().map(|e| (e.rank as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|e| (e.count as f64).ln()).collect();
    let fit = stats::line_fit(&xs, &ys).ok_or_else(|| {
        Error::DegenerateFrequencies("all regression ranks coincide".into())
    })?;
    Ok(ZipfFit {
        zeta: -fit.slope,
        stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        ranks_used: used.len(),
    })
}

/// Frequency-tail exponent fit `P[freq > f] ~ f^-lambda`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoFit {
    pub lambda: f64,
    pub stderr: f64,
    pub r_squared: f64,
    /// Number of distinct frequencies entering the regression.
    pub points_used: usize,
}

/// Fits the tail exponent of the word-frequency survival function over
/// distinct word types.
///
/// The empirical `S(f) = #{types with count > f} / #types` is regressed on
/// log-log axes over the upper half of the distinct frequencies, excluding
/// the largest (where `S = 0`). Requires at least 10 distinct frequencies.
pub fn fit_pareto(table: &WordTable) -> Result<ParetoFit> {
    if table.counts.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut freqs: Vec<u64> = table.counts.values().copied().collect();
    freqs.sort_unstable();
    let types_total = freqs.len() as f64;
    let mut distinct: Vec<(u64, usize)> = Vec::new(); // (frequency, #types with count <= f)
    for (i, &f) in freqs.iter().enumerate() {
        match distinct.last_mut() {
            Some(last) if last.0 == f => last.1 = i + 1,
            _ => distinct.push((f, i + 1)),
        }
    }
    if distinct.len() < 10 {
        return Err(Error::TooFewPoints {
            found: distinct.len(),
            min: 10,
        });
    }
    let usable = &distinct[..distinct.len() - 1]; // drop S = 0 at the max
    let start = usable.len() / 2;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(f, le) in &usable[start..] {
        let survival = (freqs.len() - le) as f64 / types_total;
        xs.push((f as f64).ln());
        ys.push(survival.ln());
    }
    let fit = stats::line_fit(&xs, &ys).ok_or_else(|| {
        Error::DegenerateFrequencies("tail frequencies coincide".into())
    })?;
    Ok(ParetoFit {
        lambda: -fit.slope,
        stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        points_used: xs.len(),
    })
}

/// How far the fitted exponents sit from the power-law relation
/// `1/lambda + zeta = 2`; zero for an exact Zipf table.
pub fn exponent_relation_residual(zeta: f64, lambda: f64) -> f64 {
    1.0 / lambda + zeta - 2.0
}
