//! Throughput of the four numeric kernels that dominate real runs: the
//! fluctuation curve, the gridded critical-time fit, the exchange-market
//! loop, and word counting. Budgets are short so the whole suite stays
//! under a minute; pass --measurement-time to criterion for tighter
//! confidence intervals.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use econokit_core::dfa::{self, BoxAlignment};
use econokit_core::lppl::{full_fit, Form, GridSpec, LpplConfig, Oscillation};
use econokit_core::wealth::{Market, MarketConfig, SavingsSpec};
use econokit_core::zipf::{count_words, encode, rank_frequency, Alphabet, WordMode};

fn bench_dfa_curve(c: &mut Criterion) {
    let x = econokit_bench::noise(8192, 1);
    let sizes = dfa::default_box_sizes(x.len(), 1);
    c.bench_function("dfa_curve_8192_default_boxes", |b| {
        b.iter(|| {
            dfa::dfa_curve(black_box(&x), &sizes, 1, BoxAlignment::NewestFirst).unwrap()
        })
    });
}

fn bench_lppl_fit(c: &mut Criterion) {
    let (ts, ys) = econokit_bench::bubble(250, 256.0);
    let cfg = LpplConfig {
        tc_grid: Some(GridSpec::new(251.0, 351.0, 101)),
        omega_grid: GridSpec::new(4.0, 25.0, 43),
        m_grid: GridSpec::new(0.05, 0.95, 19),
        oscillation: Oscillation::Cosine,
        refine: true,
    };
    c.bench_function("full_fit_250_points_refined", |b| {
        b.iter(|| full_fit(black_box(&ts), black_box(&ys), Form::Log, &cfg).unwrap())
    });
}

fn bench_market_run(c: &mut Criterion) {
    c.bench_function("market_500_agents_100k_exchanges", |b| {
        b.iter(|| {
            let mut market = Market::new(&MarketConfig {
                agents: 500,
                initial_money: 100.0,
                savings: SavingsSpec::Uniform,
                tax: 0.0,
                seed: 3,
            })
            .unwrap();
            market.run(100_000);
            black_box(market.total_money())
        })
    });
}

fn bench_word_counts(c: &mut Criterion) {
    let returns = econokit_bench::noise(100_000, 5);
    let seq = encode(&returns, &Alphabet::Binary).unwrap();
    c.bench_function("count_and_rank_100k_letters_words_of_3", |b| {
        b.iter(|| {
            let table = count_words(black_box(&seq), 3, WordMode::Overlapping).unwrap();
            rank_frequency(&table)
        })
    });
}

fn config() -> Criterion {
    Criterion::default()
        .sample_size(20)
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(3))
}

criterion_group! {
    name = benches;
    config = config();
    targets = bench_dfa_curve, bench_lppl_fit, bench_market_run, bench_word_counts
}
criterion_main!(benches);
