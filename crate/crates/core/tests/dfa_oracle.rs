//! Cross-checks the fluctuation pipeline against a brute-force
//! reimplementation that materializes every box and solves the
//! least-squares trend from scratch, plus distribution-level checks on
//! synthetic noise with known scaling.

use econokit_core::dfa::{self, BoxAlignment};
use econokit_core::synth;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Plain Gaussian elimination with partial pivoting on nested rows;
/// deliberately not the library's solver.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

fn box_residual_ss(seg: &[f64], degree: usize) -> f64 {
    let d = degree + 1;
    let mut ata = vec![vec![0.0; d]; d];
    let mut atb = vec![0.0; d];
    for (k, &y) in seg.iter().enumerate() {
        let mut pow = vec![1.0; d];
        for p in 1..d {
            pow[p] = pow[p - 1] * k as f64;
        }
        for i in 0..d {
            atb[i] += pow[i] * y;
            for j in 0..d {
                ata[i][j] += pow[i] * pow[j];
            }
        }
    }
    let coef = gauss(ata, atb);
    seg.iter()
        .enumerate()
        .map(|(k, &y)| {
            let fit: f64 = coef
                .iter()
                .enumerate()
                .map(|(p, c)| c * (k as f64).powi(p as i32))
                .sum();
            (y - fit) * (y - fit)
        })
        .sum()
}

/// Newest-first fluctuation computed the slow way.
fn oracle_fluctuation(x: &[f64], n: usize, degree: usize) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut profile = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for &v in x {
        acc += v - mean;
        profile.push(acc);
    }
    let n_boxes = profile.len() / n;
    let offset = profile.len() - n_boxes * n;
    let mut total = 0.0;
    for b in 0..n_boxes {
        let lo = offset + b * n;
        total += box_residual_ss(&profile[lo..lo + n], degree) / n as f64;
    }
    (total / n_boxes as f64).sqrt()
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn pseudo_signal(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth::gaussian_vec(len, &mut rng)
}

#[test]
fn matches_brute_force_for_all_short_lengths() {
    for len in 16..=64usize {
        let x = pseudo_signal(len, len as u64);
        for &n in &[4usize, 8] {
            for degree in 1..=2usize {
                if n < degree + 2 {
                    continue;
                }
                let fast = dfa::fluctuation(&x, n, degree, BoxAlignment::NewestFirst).unwrap();
                let slow = oracle_fluctuation(&x, n, degree);
                assert!(
                    rel_diff(fast, slow) < 1e-10,
                    "len {len} n {n} degree {degree}: {fast} vs {slow}"
                );
            }
        }
    }
}

#[test]
fn eight_point_fixture_value() {
    // x = +1, -1, ... over 8 points, one linear box of 4 newest plus one
    // of the previous 4: mean-square residual 0.2 per box.
    let x: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let f = dfa::fluctuation(&x, 4, 1, BoxAlignment::NewestFirst).unwrap();
    assert!((f - 0.2f64.sqrt()).abs() < 1e-6, "f = {f}");
    assert!((f - oracle_fluctuation(&x, 4, 1)).abs() < 1e-12);
}

#[test]
fn fgn_exponent_tracks_hurst() {
    // Increments with Hurst H integrate to a profile scaling as n^H.
    for &hurst in &[0.3f64, 0.5, 0.7] {
        let mut alphas = Vec::new();
        for seed in 0..6u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let x = synth::fgn(4096, hurst, &mut rng).unwrap();
            let sizes = dfa::default_box_sizes(x.len(), 1);
            let curve = dfa::dfa_curve(&x, &sizes, 1, BoxAlignment::NewestFirst).unwrap();
            alphas.push(dfa::hurst_exponent(&curve).unwrap().alpha);
        }
        let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
        assert!(
            (mean - hurst).abs() < 0.07,
            "H = {hurst}: mean alpha = {mean} from {alphas:?}"
        );
    }
}

#[test]
fn rolling_track_hovers_at_half_for_white_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = synth::fgn(6144, 0.5, &mut rng).unwrap();
    let track = dfa::rolling_alpha(&x, 1024, 512, 1).unwrap();
    assert!(track.len() >= 9);
    let mean = track.iter().map(|w| w.estimate.alpha).sum::<f64>() / track.len() as f64;
    assert!((mean - 0.5).abs() < 0.08, "mean alpha = {mean}");
    assert!(track
        .iter()
        .all(|w| (0.3..0.7).contains(&w.estimate.alpha)));
}

#[test]
fn rolling_track_steps_between_regimes() {
    // First half antipersistent (H = 0.3), second half persistent (H = 0.7):
    // the windowed exponent must step up accordingly.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = synth::fgn(4096, 0.3, &mut rng).unwrap();
    x.extend(synth::fgn(4096, 0.7, &mut rng).unwrap());
    let track = dfa::rolling_alpha(&x, 1024, 1024, 1).unwrap();
    assert_eq!(track.len(), 8);
    let first: Vec<f64> = track[..4].iter().map(|w| w.estimate.alpha).collect();
    let last: Vec<f64> = track[4..].iter().map(|w| w.estimate.alpha).collect();
    let mean_lo = first.iter().sum::<f64>() / first.len() as f64;
    let mean_hi = last.iter().sum::<f64>() / last.len() as f64;
    assert!((mean_lo - 0.3).abs() < 0.1, "low half: {mean_lo}");
    assert!((mean_hi - 0.7).abs() < 0.1, "high half: {mean_hi}");
    assert!(mean_hi - mean_lo > 0.25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_invariant_and_scale_equivariant(
        seed in 0u64..1000,
        len in 16usize..80,
        scale in 0.1f64..10.0,
        shift in -100.0f64..100.0,
        flip in proptest::bool::ANY,
    ) {
        let x = pseudo_signal(len, seed);
        let a = if flip { -scale } else { scale };
        let moved: Vec<f64> = x.iter().map(|v| a * v + shift).collect();
        let f_base = dfa::fluctuation(&x, 4, 1, BoxAlignment::NewestFirst).unwrap();
        let f_moved = dfa::fluctuation(&moved, 4, 1, BoxAlignment::NewestFirst).unwrap();
        prop_assert!(rel_diff(f_moved, a.abs() * f_base) < 1e-9);
    }

    #[test]
    fn alignments_agree_when_boxes_tile_exactly(
        seed in 0u64..1000,
        n_boxes in 2usize..12,
    ) {
        let x = pseudo_signal(n_boxes * 8, seed);
        let newest = dfa::fluctuation(&x, 8, 1, BoxAlignment::NewestFirst).unwrap();
        let oldest = dfa::fluctuation(&x, 8, 1, BoxAlignment::OldestFirst).unwrap();
        prop_assert_eq!(newest, oldest);
    }
}
