//! Kinetic wealth exchange between agents.
//!
//! Agents hold money and meet pairwise. Each meeting pools the
//! non-saved fractions of both wallets, a tax on the pool leaks out of
//! the system, and a uniform random share of the remainder goes to the
//! first agent, the rest to the second:
//!
//! ```text
//! pool  = (1 - s_i)*m_i + (1 - s_j)*m_j
//! kept  = (1 - tax) * pool
//! m_i' = s_i*m_i + eps      * kept
//! m_j' = s_j*m_j + (1 - eps)* kept
//! ```
//!
//! With no savings the stationary wealth distribution is exponential;
//! with savings propensities spread uniformly across agents the upper
//! tail turns into a power law with exponent near one. Taxation only
//! drains: the pool shrinks every meeting and low-wealth agents,
//! whose turnover is their whole wallet, bleed fastest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

/// How saving propensities are assigned across agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum SavingsSpec {
    /// Everyone trades their whole wallet.
    None,
    /// The same propensity in [0, 1) for every agent.
    Fixed(f64),
    /// Propensities drawn uniformly from [0, 1) at construction, one per
    /// agent, from the market's own seeded generator.
    Uniform,
}

/// Market construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketConfig {
    pub agents: usize,
    /// Starting wallet, identical for every agent.
    pub initial_money: f64,
    pub savings: SavingsSpec,
    /// Fraction of every pool that leaks out of the system, in [0, 1).
    pub tax: f64,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            agents: 500,
            initial_money: 100.0,
            savings: SavingsSpec::None,
            tax: 0.0,
            seed: 0,
        }
    }
}

/// Agent wallets plus the exchange dynamics.
#[derive(Debug, Clone)]
pub struct Market {
    money: Vec<f64>,
    savings: Vec<f64>,
    tax: f64,
    leaked: f64,
    steps_done: u64,
    rng: ChaCha8Rng,
}

/// Periodic summary of a running market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: u64,
    pub gini: f64,
    pub total_money: f64,
}

/// Result of running until the Gini coefficient stops moving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub steps_run: u64,
    pub converged: bool,
    pub gini: f64,
    /// Gini change over the last block.
    pub last_delta: f64,
}

/// Gini change below which consecutive snapshots count as equilibrated.
pub const DEFAULT_GINI_TOLERANCE: f64 = 1e-3;

impl Market {
    pub fn new(config: &MarketConfig) -> Result<Market> {
        if config.agents < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 agents, got {}",
                config.agents
            )));
        }
        if !(config.initial_money > 0.0) || !config.initial_money.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial money must be positive and finite, got {}",
                config.initial_money
            )));
        }
        if !(0.0..1.0).contains(&config.tax) {
            return Err(Error::InvalidParameter(format!(
                "tax must lie in [0, 1), got {}",
                config.tax
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let savings = match config.savings {
            SavingsSpec::None => vec![0.0; config.agents],
            SavingsSpec::Fixed(s) => {
                if !(0.0..1.0).contains(&s) {
                    return Err(Error::InvalidParameter(format!(
                        "saving propensity must lie in [0, 1), got {s}"
                    )));
                }
                vec![s; config.agents]
            }
            SavingsSpec::Uniform => (0..config.agents).map(|_| rng.gen::<f64>()).collect(),
        };
        Ok(Market {
            money: vec![config.initial_money; config.agents],
            savings,
            tax: config.tax,
            leaked: 0.0,
            steps_done: 0,
            rng,
        })
    }

    pub fn n(&self) -> usize {
        self.money.len()
    }

    pub fn money(&self) -> &[f64] {
        &self.money
    }

    pub fn savings(&self) -> &[f64] {
        &self.savings
    }

    pub fn total_money(&self) -> f64 {
        self.money.iter().sum()
    }

    /// Cumulative amount taxed away since construction.
    pub fn leaked(&self) -> f64 {
        self.leaked
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    pub fn gini(&self) -> f64 {
        stats::gini(&self.money)
    }

    /// One exchange with explicit participants and split share: the
    /// deterministic kernel under the random `step`. Exposed so the
    /// exchange rule itself can be exercised and checked directly.
    pub fn step_with(&mut self, i: usize, j: usize, eps: f64) -> Result<()> {
        let n = self.money.len();
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidParameter(format!(
                "need two distinct agents below {n}, got {i} and {j}"
            )));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!(
                "split share must lie in [0, 1], got {eps}"
            )));
        }
        let pool = (1.0 - self.savings[i]) * self.money[i]
            + (1.0 - self.savings[j]) * self.money[j];
        let kept = (1.0 - self.tax) * pool;
        self.leaked += self.tax * pool;
        self.money[i] = self.savings[i] * self.money[i] + eps * kept;
        self.money[j] = self.savings[j] * self.money[j] + (1.0 - eps) * kept;
        self.steps_done += 1;
        Ok(())
    }

    /// One exchange between a uniformly drawn pair. Draw order is fixed
    /// (first agent, second agent via a shifted draw that skips the first,
    /// then the split share), so runs are bit-reproducible per seed.
    pub fn step(&mut self) {
        let n = self.money.len();
        let i = self.rng.gen_range(0..n);
        let mut j = self.rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let eps: f64 = self.rng.gen();
        self.step_with(i, j, eps).expect("draws are in range");
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Runs `steps` exchanges, recording a snapshot every `every` steps
    /// (and one for the final state if it does not land on the cadence).
    pub fn run_with_snapshots(&mut self, steps: u64, every: u64) -> Result<Vec<Snapshot>> {
        if every == 0 {
            return Err(Error::InvalidParameter("snapshot cadence must be positive".into()));
        }
        let mut snaps = Vec::new();
        let mut done = 0;
        while done < steps {
            let block = every.min(steps - done);
            self.run(block);
            done += block;
            snaps.push(Snapshot {
                step: self.steps_done,
                gini: self.gini(),
                total_money: self.total_money(),
            });
        }
        Ok(snaps)
    }

    /// Runs blocks of `block` steps until the Gini coefficient moves less
    /// than `tolerance` between consecutive blocks, up to `max_steps`.
    pub fn run_until_stable(
        &mut self,
        block: u64,
        tolerance: f64,
        max_steps: u64,
    ) -> Result<StabilityReport> {
        if block == 0 || !(tolerance > 0.0) {
            return Err(Error::InvalidParameter(
                "stability check needs a positive block and tolerance".into(),
            ));
        }
        let mut prev = self.gini();
        let mut run_total = 0;
        let mut last_delta = f64::INFINITY;
        while run_total < max_steps {
            let chunk = block.min(max_steps - run_total);
            self.run(chunk);
            run_total += chunk;
            let g = self.gini();
            last_delta = (g - prev).abs();
            prev = g;
            if last_delta < tolerance {
                return Ok(StabilityReport {
                    steps_run: run_total,
                    converged: true,
                    gini: g,
                    last_delta,
                });
            }
        }
        Ok(StabilityReport {
            steps_run: run_total,
            converged: false,
            gini: prev,
            last_delta,
        })
    }
}

/// Power-law fit of the upper wealth tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub lambda: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub tail_size: usize,
    /// The log-log survival regression explains at least 98% of the
    /// variance: the tail is credibly a power law.
    pub pareto_plausible: bool,
}

/// Fits `P[W > w] ~ w^-lambda` over the richest `top_fraction` of agents
/// by regressing log survival rank on log wealth. Needs at least 50 tail
/// agents to say anything.
pub fn tail_exponent(money: &[f64], top_fraction: f64) -> Result<TailFit> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "top fraction must lie in (0, 1], got {top_fraction}"
        )));
    }
    let n = money.len();
    let k = ((top_fraction * n as f64).ceil() as usize).min(n);
    if k < 50 {
        return Err(Error::TailTooSmall { got: k, min: 50 });
    }
    let mut sorted = money.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut xs = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for r in 1..=k {
        let w = sorted[r - 1];
        if !(w > 0.0) {
            return Err(Error::NonPositiveValue {
                index: r - 1,
                value: w,
            });
        }
        xs.push(w.ln());
        ys.push((r as f64 / n as f64).ln());
    }
    let fit = stats::line_fit(&xs, &ys).ok_or_else(|| {
        Error::DegenerateFrequencies("tail wealths coincide".into())
    })?;
    Ok(TailFit {
        lambda: -fit.slope,
        stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        tail_size: k,
        pareto_plausible: fit.r_squared >= 0.98,
    })
}

/// Kolmogorov-Smirnov distance between a sample and the exponential
/// distribution fitted to its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsExponential {
    pub statistic: f64,
    pub n: usize,
    pub rate: f64,
}

/// KS statistic of the sample against `Exp(1/mean)`. The asymptotic 1%
/// critical value for `sup|F_n - F|` is `1.628 / sqrt(n)`; fitting the
/// rate from the sample only makes that threshold conservative.
pub fn ks_exponential(sample: &[f64]) -> Result<KsExponential> {
    if sample.len() < 10 {
        return Err(Error::TooFewPoints {
            found: sample.len(),
            min: 10,
        });
    }
    if let Some(i) = sample.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::NonPositiveValue {
            index: i,
            value: sample[i],
        });
    }
    let mean = stats::mean(sample);
    if mean <= 0.0 {
        return Err(Error::ZeroStddev);
    }
    let rate = 1.0 / mean;
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (idx, &x) in sorted.iter().enumerate() {
        let f = 1.0 - (-rate * x).exp();
        let hi = (idx as f64 + 1.0) / n - f;
        let lo = f - idx as f64 / n;
        d = d.max(hi.max(lo));
    }
    Ok(KsExponential {
        statistic: d,
        n: sorted.len(),
        rate,
    })
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market(agents: usize, savings: SavingsSpec, tax: f64, seed: u64) -> Market {
        Market::new(&MarketConfig {
            agents,
            initial_money: 100.0,
            savings,
            tax,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn kernel_by_hand() {
        let mut m = market(2, SavingsSpec::None, 0.1, 0);
        m.savings[0] = 0.5;
        m.savings[1] = 0.25;
        m.step_with(0, 1, 0.3).unwrap();
        // pool = 0.5*100 + 0.75*100 = 125; kept = 112.5; leak = 12.5
        assert!((m.money[0] - (50.0 + 0.3 * 112.5)).abs() < 1e-12);
        assert!((m.money[1] - (25.0 + 0.7 * 112.5)).abs() < 1e-12);
        assert!((m.leaked() - 12.5).abs() < 1e-12);
        assert!((m.total_money() + m.leaked() - 200.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_validates_arguments() {
        let mut m = market(3, SavingsSpec::None, 0.0, 0);
        assert!(m.step_with(0, 0, 0.5).is_err());
        assert!(m.step_with(0, 3, 0.5).is_err());
        assert!(m.step_with(0, 1, 1.5).is_err());
    }

    #[test]
    fn money_conserved_without_tax() {
        let mut m = market(100, SavingsSpec::Fixed(0.3), 0.0, 7);
        let initial = m.total_money();
        m.run(1_000_000);
        assert!((m.total_money() - initial).abs() / initial < 1e-10);
        assert_eq!(m.leaked(), 0.0);
    }

    #[test]
    fn tax_leak_accounted_exactly() {
        let mut m = market(100, SavingsSpec::None, 0.05, 11);
        let initial = m.total_money();
        m.run(100_000);
        assert!((m.total_money() + m.leaked() - initial).abs() / initial < 1e-9);
        assert!(m.leaked() > 0.0);
        assert!(m.total_money() < initial);
    }

    #[test]
    fn same_seed_reproduces_bitwise() {
        let mut a = market(50, SavingsSpec::Uniform, 0.01, 42);
        let mut b = market(50, SavingsSpec::Uniform, 0.01, 42);
        a.run(10_000);
        b.run(10_000);
        assert_eq!(a.money(), b.money());
        assert_eq!(a.savings(), b.savings());
        let mut c = market(50, SavingsSpec::Uniform, 0.01, 43);
        c.run(10_000);
        assert_ne!(a.money(), c.money());
    }

    #[test]
    fn relabeling_agents_commutes_with_the_kernel() {
        // Swap agents 1 and 4 everywhere; applying the swapped meetings
        // must give the swapped wallets, bit for bit.
        let mut a = market(5, SavingsSpec::None, 0.02, 3);
        let mut b = market(5, SavingsSpec::None, 0.02, 3);
        for (i, s) in [0.1, 0.2, 0.3, 0.4, 0.5].into_iter().enumerate() {
            a.savings[i] = s;
        }
        let swap = |x: usize| match x {
            1 => 4,
            4 => 1,
            other => other,
        };
        for i in 0..5 {
            b.savings[swap(i)] = a.savings[i];
        }
        let meetings = [(0, 1, 0.25), (1, 4, 0.9), (2, 3, 0.5), (4, 0, 0.125)];
        for &(i, j, eps) in &meetings {
            a.step_with(i, j, eps).unwrap();
            b.step_with(swap(i), swap(j), eps).unwrap();
        }
        for i in 0..5 {
            assert_eq!(a.money()[i], b.money()[swap(i)]);
        }
    }

    #[test]
    fn no_savings_equilibrium_gini_near_half() {
        // The stationary exponential distribution has Gini 1/2.
        let mut m = market(200, SavingsSpec::None, 0.0, 5);
        m.run(200_000);
        let g = m.gini();
        assert!((0.42..0.58).contains(&g), "gini = {g}");
    }

    #[test]
    fn stability_detection() {
        let mut m = market(100, SavingsSpec::None, 0.0, 9);
        let report = m.run_until_stable(20_000, 5e-3, 2_000_000).unwrap();
        assert!(report.converged, "delta = {}", report.last_delta);
        assert!(report.steps_run <= 2_000_000);
    }

    #[test]
    fn snapshots_cover_the_run() {
        let mut m = market(50, SavingsSpec::None, 0.0, 1);
        let snaps = m.run_with_snapshots(25_000, 10_000).unwrap();
        assert_eq!(snaps.len(), 3);
        assert_eq!(snaps.last().unwrap().step, 25_000);
        assert!(snaps.iter().all(|s| (s.total_money - 5000.0).abs() < 1e-6));
    }

    #[test]
    fn tail_fit_recovers_exact_power_law() {
        // w_r = (n/r)^(1/lambda) makes the empirical survival exactly
        // r/n = w^-lambda.
        let n = 1000;
        let lambda = 1.5;
        let money: Vec<f64> = (1..=n)
            .map(|r| (n as f64 / r as f64).powf(1.0 / lambda))
            .collect();
        let fit = tail_exponent(&money, 0.1).unwrap();
        assert_eq!(fit.tail_size, 100);
        assert!((fit.lambda - lambda).abs() < 1e-9, "lambda = {}", fit.lambda);
        assert!(fit.pareto_plausible);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tail_needs_fifty_agents() {
        let money = vec![1.0; 100];
        assert!(matches!(
            tail_exponent(&money, 0.1),
            Err(Error::TailTooSmall { got: 10, min: 50 })
        ));
    }

    #[test]
    fn ks_accepts_true_exponential_rejects_uniform() {
        // Deterministic inverse-CDF samples of Exp(1): quantile points are
        // as close to the fitted curve as an exponential sample can be.
        let n = 1000;
        let exp_sample: Vec<f64> = (0..n)
            .map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln())
            .collect();
        let ks = ks_exponential(&exp_sample).unwrap();
        assert!(ks.statistic < ks_critical_1pct(n), "D = {}", ks.statistic);

        let uniform: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let ks = ks_exponential(&uniform).unwrap();
        assert!(ks.statistic > ks_critical_1pct(n), "D = {}", ks.statistic);
    }

    #[test]
    fn config_validation() {
        assert!(Market::new(&MarketConfig {
            agents: 1,
            ..Default::default()
        })
        .is_err());
        assert!(Market::new(&MarketConfig {
            tax: 1.0,
            ..Default::default()
        })
        .is_err());
        assert!(Market::new(&MarketConfig {
            savings: SavingsSpec::Fixed(1.0),
            ..Default::default()
        })
        .is_err());
        assert!(Market::new(&MarketConfig {
            initial_money: 0.0,
            ..Default::default()
        })
        .is_err());
    }
}
