//! Deterministic input builders shared by the benchmark targets.

use econokit_core::lppl::{lppl_curve, Form, LpplParams, Oscillation};
use econokit_core::synth;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded white noise of length `n`.
pub fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth::gaussian_vec(n, &mut rng)
}

/// A noiseless log-periodic bubble over `n` indices, critical at `t_c`.
pub fn bubble(n: usize, t_c: f64) -> (Vec<f64>, Vec<f64>) {
    let params = LpplParams {
        form: Form::Log,
        oscillation: Oscillation::Cosine,
        a: 10.0,
        b: -1.2,
        c: 0.05,
        m: None,
        omega: 10.0,
        phi: 1.0,
        t_c,
    };
    let ts: Vec<f64> = (0..n).map(|t| t as f64).collect();
    let ys = lppl_curve(&params, &ts).expect("curve generation");
    (ts, ys)
}
