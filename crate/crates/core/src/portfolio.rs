//! Portfolio risk metrics and a word-statistics trading backtest.
//!
//! The risk side is classical: reward-to-variability (mean return over its
//! standard deviation, no risk-free leg) and covariance-ratio market
//! exposure, both on population moments. The strategy side turns the
//! word-frequency tables of the text analysis into signals: the
//! conditional distribution of the next letter given the last `m - 1`
//! letters decides buy/sell/hold, the table being built strictly from a
//! training prefix so the trading period never informs its own signals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{ReturnKind, TimeSeries};
use crate::stats;
use crate::zipf::{encode, count_words, Alphabet, WordMode, WordTable};

/// Reward-to-variability ratio `mean(r) / stddev(r)` on population moments.
pub fn sharpe_ratio(returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::EmptySeries);
    }
    let sd = stats::variance(returns).sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroStddev);
    }
    Ok(stats::mean(returns) / sd)
}

/// Market exposure `cov(r_asset, r_market) / var(r_market)`.
///
/// Computed as a ratio of two covariances so `beta(m, m)` is exactly 1.
pub fn beta(asset: &[f64], market: &[f64]) -> Result<f64> {
    if asset.len() != market.len() {
        return Err(Error::LengthMismatch {
            left: asset.len(),
            right: market.len(),
        });
    }
    if asset.is_empty() {
        return Err(Error::EmptySeries);
    }
    let var_m = stats::covariance(market, market);
    if var_m == 0.0 {
        return Err(Error::ZeroMarketVariance);
    }
    Ok(stats::covariance(asset, market) / var_m)
}

/// Trade directive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Buy,
    Sell,
    Hold,
}

/// Directive plus its strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Signal {
    pub action: Action,
    /// `|P(up) - P(down)|` conditioned on the prefix; 0 for unseen prefixes.
    pub confidence: f64,
}

/// Signal from the conditional next-letter distribution of a word table.
///
/// Compares `P(next = 'u' | prefix)` against `P(next = 'd' | prefix)`; the
/// probabilities are over all alphabet letters, so stable letters dilute
/// both sides. A prefix never seen in training yields hold with zero
/// confidence.
pub fn zipf_signal(table: &WordTable, prefix: &[u8], margin: f64) -> Result<Signal> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "margin must be non-negative, got {margin}"
        )));
    }
    let continuations = table.prefix_continuations(prefix)?;
    let total: u64 = continuations.iter().map(|&(_, c)| c).sum();
    if total == 0 {
        return Ok(Signal {
            action: Action::Hold,
            confidence: 0.0,
        });
    }
    let count_of = |letter: u8| {
        continuations
            .iter()
            .find(|&&(l, _)| l == letter)
            .map(|&(_, c)| c)
            .unwrap_or(0) as f64
    };
    let p_up = count_of(b'u') / total as f64;
    let p_down = count_of(b'd') / total as f64;
    let diff = p_up - p_down;
    let action = if diff > margin {
        Action::Buy
    } else if -diff > margin {
        Action::Sell
    } else {
        Action::Hold
    };
    Ok(Signal {
        action,
        confidence: diff.abs(),
    })
}

/// How portfolio weight is spread across assets holding a position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Equal,
    /// Proportional to current signal confidence; falls back to equal when
    /// every active confidence is zero.
    Confidence,
}

/// Backtest settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestConfig {
    /// Word length `m`; signals condition on the last `m - 1` letters.
    pub word_len: usize,
    pub alphabet: Alphabet,
    /// Number of leading return observations reserved for building the
    /// word tables. Trading starts right after.
    pub train_len: usize,
    pub weighting: Weighting,
    /// Sell signals open short positions instead of just exiting.
    pub allow_short: bool,
    /// Minimum probability edge before acting.
    pub margin: f64,
    /// Periods per year for annualization.
    pub periods_per_year: f64,
}

impl BacktestConfig {
    pub fn new(word_len: usize, train_len: usize) -> Self {
        BacktestConfig {
            word_len,
            alphabet: Alphabet::Binary,
            train_len,
            weighting: Weighting::Equal,
            allow_short: false,
            margin: 0.0,
            periods_per_year: 252.0,
        }
    }
}

/// Annualized summary of a per-period return stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Performance {
    pub mean_return: f64,
    pub variance: f64,
    /// `None` when the return stream has zero variance.
    pub sharpe: Option<f64>,
}

/// Annualizes population moments of per-period returns: mean and variance
/// scale linearly with periods per year.
pub fn performance(returns: &[f64], periods_per_year: f64) -> Result<Performance> {
    if returns.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mean = stats::mean(returns) * periods_per_year;
    let variance = stats::variance(returns) * periods_per_year;
    let sharpe = if variance > 0.0 {
        Some(mean / variance.sqrt())
    } else {
        None
    };
    Ok(Performance {
        mean_return: mean,
        variance,
        sharpe,
    })
}

/// Backtest result with both accounting routes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    /// Mark-to-market equity, starting at 1.0, one entry per trade step
    /// plus the start.
    pub equity: Vec<f64>,
    pub final_equity: f64,
    pub per_step_returns: Vec<f64>,
    pub performance: Performance,
    /// Largest absolute disagreement between the shares-and-cash ledger
    /// and the compounded-return account, relative to equity.
    pub reconciliation_error: f64,
    /// Number of position changes across all assets.
    pub trades: usize,
}

/// Runs the word-statistics strategy over aligned price series.
///
/// Per asset, simple returns are encoded into letters and a word table is
/// built from the first `train_len` letters only. From then on each step
/// consults the table with the last `m - 1` realized letters: buy opens or
/// keeps a long, sell exits (or shorts when allowed), hold keeps the
/// current state; everyone starts out of the market. Equity is tracked
/// twice, by compounding weighted returns and by an explicit
/// shares-and-cash ledger, and the report carries their disagreement.
pub fn backtest(assets: &[TimeSeries], config: &BacktestConfig) -> Result<BacktestReport> {
    if assets.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n_prices = assets[0].len();
    for a in assets {
        if a.len() != n_prices {
            return Err(Error::LengthMismatch {
                left: n_prices,
                right: a.len(),
            });
        }
        if let Some(i) = a.values().iter().position(|&p| p <= 0.0) {
            return Err(Error::NonPositiveValue {
                index: i,
                value: a.values()[i],
            });
        }
    }
    let m = config.word_len;
    if m < 2 {
        return Err(Error::InvalidParameter(
            "word length must be at least 2".into(),
        ));
    }
    let n_returns = n_prices - 1;
    if config.train_len < m {
        return Err(Error::WindowTooShort {
            len: config.train_len,
            min: m,
        });
    }
    if config.train_len >= n_returns {
        return Err(Error::WindowsOverlap {
            train_start: 0,
            train_end: config.train_len,
            trade_start: config.train_len,
            trade_end: n_returns,
        });
    }

    struct AssetState {
        returns: Vec<f64>,
        letters: Vec<u8>,
        table: WordTable,
        position: i8,
    }
    let mut states = Vec::with_capacity(assets.len());
    for series in assets {
        let returns = series.returns(ReturnKind::Simple)?.values().to_vec();
        let seq = encode(&returns, &config.alphabet)?;
        let train = encode(&returns[..config.train_len], &config.alphabet)?;
        let table = count_words(&train, m, WordMode::Overlapping)?;
        states.push(AssetState {
            returns,
            letters: seq.letters().to_vec(),
            table,
            position: 0,
        });
    }

    let steps = n_returns - config.train_len;
    let mut compounded = 1.0f64;
    let mut equity_curve = Vec::with_capacity(steps + 1);
    equity_curve.push(1.0);
    let mut per_step = Vec::with_capacity(steps);
    let mut trades = 0usize;
    // Shares-and-cash ledger.
    let mut cash = 1.0f64;
    let mut shares = vec![0.0f64; assets.len()];
    let mut worst_gap = 0.0f64;

    for k in config.train_len..n_returns {
        // Decide positions from letters realized strictly before step k.
        let mut confidences = vec![0.0f64; states.len()];
        for (i, st) in states.iter_mut().enumerate() {
            let prefix = &st.letters[k - (m - 1)..k];
            let signal = zipf_signal(&st.table, prefix, config.margin)?;
            let new_pos = match signal.action {
                Action::Buy => 1,
                Action::Sell => {
                    if config.allow_short {
                        -1
                    } else {
                        0
                    }
                }
                Action::Hold => st.position,
            };
            if new_pos != st.position {
                trades += 1;
            }
            st.position = new_pos;
            confidences[i] = signal.confidence;
        }
        let active: Vec<usize> = (0..states.len())
            .filter(|&i| states[i].position != 0)
            .collect();
        let mut weights = vec![0.0f64; states.len()];
        if !active.is_empty() {
            match config.weighting {
                Weighting::Equal => {
                    for &i in &active {
                        weights[i] = 1.0 / active.len() as f64;
                    }
                }
                Weighting::Confidence => {
                    let total: f64 = active.iter().map(|&i| confidences[i]).sum();
                    for &i in &active {
                        weights[i] = if total > 0.0 {
                            confidences[i] / total
                        } else {
                            1.0 / active.len() as f64
                        };
                    }
                }
            }
        }

        // Compounded route.
        let step_return: f64 = (0..states.len())
            .map(|i| weights[i] * states[i].position as f64 * states[i].returns[k])
            .sum();
        compounded *= 1.0 + step_return;
        per_step.push(step_return);

        // Ledger route: rebalance to the target exposures at price index k,
        // then mark to market at k + 1.
        let equity_before: f64 = cash
            + shares
                .iter()
                .zip(assets)
                .map(|(s, a)| s * a.values()[k])
                .sum::<f64>();
        let mut spent = 0.0;
        for i in 0..states.len() {
            let price = assets[i].values()[k];
            let value = weights[i] * states[i].position as f64 * equity_before;
            shares[i] = value / price;
            spent += value;
        }
        cash = equity_before - spent;
        let equity_after: f64 = cash
            + shares
                .iter()
                .zip(assets)
                .map(|(s, a)| s * a.values()[k + 1])
                .sum::<f64>();

        equity_curve.push(equity_after);
        let scale = compounded.abs().max(1.0);
        worst_gap = worst_gap.max((equity_after - compounded).abs() / scale);
    }

    let performance = performance(&per_step, config.periods_per_year)?;
    Ok(BacktestReport {
        final_equity: *equity_curve.last().expect("at least the start"),
        equity: equity_curve,
        per_step_returns: per_step,
        performance,
        reconciliation_error: worst_gap,
        trades,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prices_from_returns(returns: &[f64], start: f64) -> TimeSeries {
        let mut values = vec![start];
        for &r in returns {
            values.push(values.last().unwrap() * (1.0 + r));
        }
        TimeSeries::from_values(values, "fixture").unwrap()
    }

    #[test]
    fn sharpe_by_hand() {
        let r = [0.1, -0.05, 0.2];
        let sr = sharpe_ratio(&r).unwrap();
        assert!((sr - 0.811107).abs() < 1e-5, "sr = {sr}");
        assert!(matches!(
            sharpe_ratio(&[0.01, 0.01, 0.01]),
            Err(Error::ZeroStddev)
        ));
    }

    #[test]
    fn beta_of_market_is_exactly_one() {
        let m = [0.01, -0.02, 0.005, 0.03, -0.01, 0.002];
        assert_eq!(beta(&m, &m).unwrap(), 1.0);
    }

    #[test]
    fn beta_scales_with_leverage() {
        let m = [0.01, -0.02, 0.005, 0.03, -0.01, 0.002];
        let levered: Vec<f64> = m.iter().map(|r| 2.0 * r + 0.001).collect();
        assert!((beta(&levered, &m).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            beta(&m, &[0.01; 6]),
            Err(Error::ZeroMarketVariance)
        ));
    }

    #[test]
    fn signal_from_conditional_distribution() {
        // Letters u d u u d: 2-words ud du uu ud; after 'u' the table holds
        // u once and d twice.
        let returns = [0.1, -0.1, 0.1, 0.1, -0.1];
        let seq = encode(&returns, &Alphabet::Binary).unwrap();
        let table = count_words(&seq, 2, WordMode::Overlapping).unwrap();
        let s = zipf_signal(&table, b"u", 0.0).unwrap();
        assert_eq!(s.action, Action::Sell);
        assert!((s.confidence - 1.0 / 3.0).abs() < 1e-15);
        // 'd' is always followed by 'u' here.
        let s = zipf_signal(&table, b"d", 0.0).unwrap();
        assert_eq!(s.action, Action::Buy);
        assert!((s.confidence - 1.0).abs() < 1e-15);
        // A margin above the edge suppresses the trade.
        let s = zipf_signal(&table, b"u", 0.5).unwrap();
        assert_eq!(s.action, Action::Hold);
    }

    #[test]
    fn unseen_prefix_holds_with_zero_confidence() {
        let returns = [0.1, 0.1, 0.1, 0.1];
        let seq = encode(&returns, &Alphabet::Binary).unwrap();
        let table = count_words(&seq, 2, WordMode::Overlapping).unwrap();
        let s = zipf_signal(&table, b"d", 0.0).unwrap();
        assert_eq!(s.action, Action::Hold);
        assert_eq!(s.confidence, 0.0);
    }

    #[test]
    fn alternating_market_is_fully_predictable() {
        // Returns +10%, -5%, ... for 40 steps; the 2-letter table learns
        // u -> d and d -> u perfectly.
        let returns: Vec<f64> =
            (0..40).map(|i| if i % 2 == 0 { 0.1 } else { -0.05 }).collect();
        let series = prices_from_returns(&returns, 100.0);

        let mut cfg = BacktestConfig::new(2, 20);
        cfg.allow_short = true;
        let report = backtest(&[series.clone()], &cfg).unwrap();
        // Long the up steps, short the down steps: every step gains.
        assert!(report.equity.windows(2).all(|w| w[1] > w[0]));
        for (i, &r) in report.per_step_returns.iter().enumerate() {
            let want = if i % 2 == 0 { 0.1 } else { 0.05 };
            assert!((r - want).abs() < 1e-12, "step {i}: {r}");
        }
        // Per-step mean 0.075 and stddev 0.025 annualize to 3 sqrt(252).
        let sharpe = report.performance.sharpe.unwrap();
        assert!(
            (sharpe - 3.0 * 252f64.sqrt()).abs() < 1e-6,
            "sharpe = {sharpe}"
        );

        // Without shorting the down steps sit in cash: non-decreasing.
        let cfg = BacktestConfig::new(2, 20);
        let report = backtest(&[series], &cfg).unwrap();
        assert!(report.equity.windows(2).all(|w| w[1] >= w[0]));
        assert!(report.final_equity > 1.5);
        assert!(report.performance.sharpe.unwrap() > 0.0);
    }

    #[test]
    fn ledger_and_compounding_agree() {
        // Deterministic pseudo-random walk over three assets with shorts
        // and confidence weighting: the two accounting routes must agree.
        let mut assets = Vec::new();
        for a in 0..3u64 {
            let returns: Vec<f64> = (0..120u64)
                .map(|i| {
                    let x = ((i * 2654435761 + a * 40503 + 17) % 1000) as f64 / 1000.0;
                    (x - 0.5) * 0.06
                })
                .collect();
            assets.push(prices_from_returns(&returns, 50.0 + a as f64));
        }
        let mut cfg = BacktestConfig::new(3, 60);
        cfg.allow_short = true;
        cfg.weighting = Weighting::Confidence;
        let report = backtest(&assets, &cfg).unwrap();
        assert!(
            report.reconciliation_error < 1e-10,
            "gap = {}",
            report.reconciliation_error
        );
        assert_eq!(report.equity.len(), report.per_step_returns.len() + 1);
    }

    #[test]
    fn training_window_must_leave_room_to_trade() {
        let returns: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let series = prices_from_returns(&returns, 100.0);
        let cfg = BacktestConfig::new(2, 30);
        assert!(matches!(
            backtest(&[series.clone()], &cfg),
            Err(Error::WindowsOverlap { .. })
        ));
        let cfg = BacktestConfig::new(2, 1);
        assert!(matches!(
            backtest(&[series], &cfg),
            Err(Error::WindowTooShort { len: 1, min: 2 })
        ));
    }

    #[test]
    fn performance_annualization() {
        let r = [0.01, -0.01, 0.02];
        let p = performance(&r, 252.0).unwrap();
        assert!((p.mean_return - stats::mean(&r) * 252.0).abs() < 1e-15);
        assert!((p.variance - stats::variance(&r) * 252.0).abs() < 1e-15);
        let sr = p.sharpe.unwrap();
        assert!((sr - p.mean_return / p.variance.sqrt()).abs() < 1e-12);
        assert!(performance(&[0.0, 0.0], 252.0).unwrap().sharpe.is_none());
    }
}
