//! Forward-generation oracles for the critical-time fits: curves built
//! from known parameters must be recovered by the staged and joint
//! fitting paths, including noise, displaced oscillations, null
//! amplitudes, and the small-exponent limit of the power form.

use econokit_core::lppl::*;
use econokit_core::synth;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn log_truth(c: f64, omega: f64, phi: f64, t_c: f64) -> LpplParams {
    LpplParams {
        form: Form::Log,
        oscillation: Oscillation::Cosine,
        a: 10.0,
        b: -1.2,
        c,
        m: None,
        omega,
        phi,
        t_c,
    }
}

fn window(n: usize) -> Vec<f64> {
    (0..n).map(|t| t as f64).collect()
}

fn std_dev(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Additive Gaussian noise scaled to a fraction of the series' own spread.
fn add_noise(ys: &[f64], fraction: f64, seed: u64) -> Vec<f64> {
    let sigma = fraction * std_dev(ys);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ys.iter()
        .map(|y| y + sigma * synth::gaussian(&mut rng))
        .collect()
}

#[test]
fn oscillation_stage_recovers_omega_and_phi_to_1e3() {
    // The oscillation stage gets the exact divergence as input; with the
    // frequency off the coarse grid by 0.03, one refinement pass must
    // close in to better than 1e-3 on both omega and phi.
    let truth = log_truth(0.05, 10.0, 1.0, 256.0);
    let ts = window(250);
    let ys = lppl_curve(&truth, &ts).unwrap();
    let exact_divergence = DivergenceFit {
        form: Form::Log,
        a: truth.a,
        b: truth.b,
        m: None,
        t_c: truth.t_c,
        rss: 0.0,
    };
    let cfg = LpplConfig {
        tc_grid: Some(GridSpec::new(251.0, 351.0, 101)),
        omega_grid: GridSpec::new(4.03, 25.03, 211),
        m_grid: GridSpec::new(0.05, 0.95, 19),
        oscillation: Oscillation::Cosine,
        refine: true,
    };
    let fit = fit_oscillation(&ts, &ys, &exact_divergence, &cfg).unwrap();
    assert!((fit.omega - 10.0).abs() < 1e-3, "omega = {}", fit.omega);
    assert!((fit.phi - 1.0).abs() < 1e-3, "phi = {}", fit.phi);
    assert!((fit.t_c - 256.0).abs() < 0.1, "t_c = {}", fit.t_c);
    assert!((fit.c - 0.05).abs() < 1e-3, "c = {}", fit.c);
}

#[test]
fn full_fit_round_trips_noiseless_parameters() {
    let truth = log_truth(0.05, 10.0, 1.0, 256.0);
    let ts = window(250);
    let ys = lppl_curve(&truth, &ts).unwrap();
    let cfg = LpplConfig::default();
    let coarse_tc_cell = (0.5 * 249.0 - 1.0) / 199.0;
    let coarse_omega_cell = 21.0 / 99.0;
    let fit = full_fit(&ts, &ys, Form::Log, &cfg).unwrap();
    let p = fit.params;
    assert!(
        (p.t_c - 256.0).abs() < coarse_tc_cell,
        "t_c = {} (cell {coarse_tc_cell})",
        p.t_c
    );
    assert!(
        (p.omega - 10.0).abs() < coarse_omega_cell,
        "omega = {} (cell {coarse_omega_cell})",
        p.omega
    );
    assert!((p.a - 10.0).abs() < 0.05, "a = {}", p.a);
    assert!((p.b + 1.2).abs() < 0.05, "b = {}", p.b);
    assert!((p.c - 0.05).abs() < 0.005, "c = {}", p.c);
    assert!((p.phi - 1.0).abs() < 0.25, "phi = {}", p.phi);
}

#[test]
fn divergence_tc_stays_within_three_units_under_noise() {
    let truth = log_truth(0.05, 10.0, 1.0, 256.0);
    let ts = window(250);
    let clean = lppl_curve(&truth, &ts).unwrap();
    let cfg = LpplConfig {
        tc_grid: Some(GridSpec::new(251.0, 351.0, 101)),
        omega_grid: GridSpec::new(4.0, 25.0, 43),
        m_grid: GridSpec::new(0.05, 0.95, 19),
        oscillation: Oscillation::Cosine,
        refine: true,
    };
    for seed in 0..10u64 {
        let noisy = add_noise(&clean, 0.01, 1000 + seed);
        let fit = fit_divergence(&ts, &noisy, Form::Log, &cfg).unwrap();
        assert!(
            (fit.t_c - 256.0).abs() <= 3.0,
            "seed {seed}: t_c = {}",
            fit.t_c
        );
    }
}

#[test]
fn displaced_oscillation_shows_up_as_a_negative_gap() {
    // Divergence pole at 300, oscillation phase pole at 310: the stages
    // must disagree by about -10.
    let t_c_div = 300.0;
    let t_c_osc = 310.0;
    let (a, b, c, omega, phi) = (10.0, -1.2, 0.03, 10.0, 0.4);
    let ts = window(291);
    let ys: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let g = ((t_c_div - t) / t_c_div).ln();
            let theta = omega * ((t_c_osc - t) / t_c_osc).ln() + phi;
            a + b * g * (1.0 + c * theta.cos())
        })
        .collect();
    let cfg = LpplConfig {
        tc_grid: Some(GridSpec::new(292.0, 392.0, 101)),
        omega_grid: GridSpec::new(4.0, 25.0, 85),
        m_grid: GridSpec::new(0.05, 0.95, 19),
        oscillation: Oscillation::Cosine,
        refine: true,
    };
    let split = split_fit(&ts, &ys, Form::Log, &cfg).unwrap();
    assert!(
        (-12.0..=-8.0).contains(&split.gap),
        "gap = {} (div {}, osc {})",
        split.gap,
        split.divergence.t_c,
        split.oscillation.t_c
    );
}

#[test]
fn power_form_with_tiny_exponent_reproduces_log_form_tc() {
    // As the power exponent goes to zero the two divergence shapes agree
    // up to an affine map, so a power fit pinned at m = 1e-3 must place
    // t_c on the same grid cell.
    let truth = log_truth(0.0, 10.0, 1.0, 256.0);
    let ts = window(250);
    let ys = lppl_curve(&truth, &ts).unwrap();
    let cfg = LpplConfig {
        tc_grid: Some(GridSpec::new(251.0, 351.0, 101)),
        omega_grid: GridSpec::new(4.0, 25.0, 43),
        m_grid: GridSpec::new(1e-3, 1e-3, 1),
        oscillation: Oscillation::Cosine,
        refine: true,
    };
    let fit = fit_divergence(&ts, &ys, Form::Power, &cfg).unwrap();
    assert_eq!(fit.m, Some(1e-3));
    assert!((fit.t_c - 256.0).abs() <= 1.0, "t_c = {}", fit.t_c);
}

#[test]
fn zero_amplitude_is_a_statistical_null() {
    let truth = log_truth(0.0, 10.0, 1.0, 256.0);
    let ts = window(250);
    let clean = lppl_curve(&truth, &ts).unwrap();
    let cfg = LpplConfig {
        tc_grid: Some(GridSpec::new(251.0, 351.0, 101)),
        omega_grid: GridSpec::new(4.0, 25.0, 43),
        m_grid: GridSpec::new(0.05, 0.95, 19),
        oscillation: Oscillation::Cosine,
        refine: true,
    };
    // Noiseless: the fitted amplitude is numerical dust.
    let split = split_fit(&ts, &clean, Form::Log, &cfg).unwrap();
    assert!(split.oscillation.c < 1e-8, "c = {}", split.oscillation.c);
    // Half a percent of noise: the amplitude must stay within three
    // standard errors of zero.
    let noisy = add_noise(&clean, 0.005, 77);
    let split = split_fit(&ts, &noisy, Form::Log, &cfg).unwrap();
    assert!(
        split.oscillation.c < 3.0 * split.oscillation.c_stderr,
        "c = {}, stderr = {}",
        split.oscillation.c,
        split.oscillation.c_stderr
    );
}

#[test]
fn full_fit_never_loses_to_the_staged_reconstruction() {
    // Rebuild a curve from the two staged estimates and score it on the
    // data; the joint fit searches the same grids over a strictly larger
    // coefficient space, so its residual cannot be worse.
    let truth = log_truth(0.05, 10.0, 1.0, 256.0);
    let ts = window(250);
    let ys = add_noise(&lppl_curve(&truth, &ts).unwrap(), 0.002, 13);
    let cfg = LpplConfig {
        tc_grid: Some(GridSpec::new(251.0, 351.0, 101)),
        omega_grid: GridSpec::new(4.0, 25.0, 85),
        m_grid: GridSpec::new(0.05, 0.95, 19),
        oscillation: Oscillation::Cosine,
        refine: true,
    };
    let split = split_fit(&ts, &ys, Form::Log, &cfg).unwrap();
    let (div, osc) = (&split.divergence, &split.oscillation);
    let staged_rss: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(&t, &y)| {
            let g = ((div.t_c - t) / div.t_c).ln();
            let theta = osc.omega * ((osc.t_c - t) / osc.t_c).ln() + osc.phi;
            let fitted = div.a + div.b * g * (1.0 + osc.c * theta.cos());
            (y - fitted) * (y - fitted)
        })
        .sum();
    let full = full_fit(&ts, &ys, Form::Log, &cfg).unwrap();
    assert!(
        full.rss <= staged_rss * (1.0 + 1e-9),
        "full = {}, staged = {staged_rss}",
        full.rss
    );
}

#[test]
fn expanding_track_converges_before_the_crash() {
    // Window ends 265..297 keep five to ten oscillation periods in view,
    // so the stage disagreement decays smoothly enough for the monotone
    // convergence rule to fire before the critical index.
    let truth = LpplParams {
        omega: 15.0,
        ..log_truth(0.06, 15.0, 1.0, 300.0)
    };
    let ts = window(299);
    let ys = lppl_curve(&truth, &ts).unwrap();
    let cfg = LpplConfig {
        tc_grid: None,
        omega_grid: GridSpec::new(4.0, 25.0, 43),
        m_grid: GridSpec::new(0.05, 0.95, 19),
        oscillation: Oscillation::Cosine,
        refine: true,
    };
    let track = TrackConfig::new(265, 4);
    let entries = crash_risk_track(&ts, &ys, Form::Log, &cfg, &track).unwrap();
    assert_eq!(entries.len(), 9);
    assert!(entries.iter().all(|e| e.window_end <= 297));
    let flagged: Vec<&CrashRiskEntry> = entries.iter().filter(|e| e.converging).collect();
    assert!(
        !flagged.is_empty(),
        "gaps were {:?}",
        entries.iter().map(|e| e.gap).collect::<Vec<_>>()
    );
    // The flag precedes the critical time.
    assert!(flagged.iter().all(|e| e.window_end < 300));
    // Late windows disagree less than early ones.
    let early = entries[..3].iter().map(|e| e.gap.abs()).sum::<f64>() / 3.0;
    let late = entries[6..].iter().map(|e| e.gap.abs()).sum::<f64>() / 3.0;
    assert!(
        late <= early,
        "early mean |gap| = {early}, late mean |gap| = {late}"
    );
}
