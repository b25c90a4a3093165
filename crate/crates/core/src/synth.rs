//! Seeded synthetic data: Gaussian noise, fractional Gaussian noise by
//! spectral synthesis, and inverse-CDF power-law samplers.
//!
//! Everything here is deterministic given the caller's generator state;
//! draw order is fixed, so equal seeds give bit-identical output.

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// One standard normal draw (Box-Muller, cosine branch).
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // gen::<f64>() lands in [0, 1); resample u1 = 0 to keep ln finite.
    loop {
        let u1: f64 = rng.gen();
        if u1 > 0.0 {
            let u2: f64 = rng.gen();
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

/// `n` i.i.d. standard normal draws.
pub fn gaussian_vec<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

/// Fractional Gaussian noise with Hurst exponent `hurst`, unit variance
/// per step: the increment process of fractional Brownian motion, with
/// autocovariance
///
/// ```text
/// gamma(k) = ((k+1)^2H - 2 k^2H + (k-1)^2H) / 2
/// ```
///
/// Sampled exactly by circulant embedding: the covariance is extended to
/// a circulant of length 2n, whose FFT eigenvalues are provably
/// nonnegative for this process, and independent Gaussians are shaped in
/// the frequency domain.
pub fn fgn<R: Rng>(n: usize, hurst: f64, rng: &mut R) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::SeriesTooShort { len: n, min: 2 });
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "hurst exponent must lie in (0, 1), got {hurst}"
        )));
    }
    let two_h = 2.0 * hurst;
    let gamma = |k: usize| -> f64 {
        let k = k as f64;
        0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
    };
    let m = 2 * n;
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
    for k in 0..=n {
        buf[k].re = gamma(k);
    }
    for k in 1..n {
        buf[m - k].re = gamma(k);
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut buf);
    let mut lambda = vec![0.0f64; m];
    let scale_tol = 1e-10 * buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    for (l, c) in lambda.iter_mut().zip(&buf) {
        if c.re < -scale_tol {
            return Err(Error::InvalidParameter(format!(
                "circulant embedding produced eigenvalue {}",
                c.re
            )));
        }
        *l = c.re.max(0.0);
    }

    // Conjugate-symmetric spectral amplitudes: one real draw at DC and
    // Nyquist, an independent pair everywhere else.
    let mut a: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
    let mf = m as f64;
    a[0] = Complex::new((lambda[0] / mf).sqrt() * gaussian(rng), 0.0);
    for k in 1..n {
        let s = (lambda[k] / (2.0 * mf)).sqrt();
        let re = s * gaussian(rng);
        let im = s * gaussian(rng);
        a[k] = Complex::new(re, im);
        a[m - k] = Complex::new(re, -im);
    }
    a[n] = Complex::new((lambda[n] / mf).sqrt() * gaussian(rng), 0.0);

    fft.process(&mut a);
    Ok(a[..n].iter().map(|c| c.re).collect())
}

/// Fractional Brownian motion: the running sum of [`fgn`], starting at
/// the first increment.
pub fn fbm<R: Rng>(n: usize, hurst: f64, rng: &mut R) -> Result<Vec<f64>> {
    let noise = fgn(n, hurst, rng)?;
    let mut acc = 0.0;
    Ok(noise
        .into_iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect())
}

/// Draw counts per rank from an exact Zipf law `P[rank = r] ~ r^-zeta`
/// over `types` ranks, by inverse CDF over the cumulative weights.
/// Element `r - 1` of the result is the number of times rank `r` came up;
/// counts sum to `draws`.
pub fn zipf_sample<R: Rng>(
    types: usize,
    zeta: f64,
    draws: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if types == 0 || draws == 0 {
        return Err(Error::InvalidParameter(
            "zipf sampling needs at least one type and one draw".into(),
        ));
    }
    if !zeta.is_finite() || zeta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "zipf exponent must be finite and nonnegative, got {zeta}"
        )));
    }
    let mut cumulative = Vec::with_capacity(types);
    let mut total = 0.0;
    for r in 1..=types {
        total += (r as f64).powf(-zeta);
        cumulative.push(total);
    }
    let mut counts = vec![0u64; types];
    for _ in 0..draws {
        let u: f64 = rng.gen::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= u).min(types - 1);
        counts[idx] += 1;
    }
    Ok(counts)
}

/// Draw from the Pareto law `P[X > x] = (x / x_min)^-lambda` by inverse
/// CDF: `x = x_min * (1 - U)^(-1/lambda)`.
pub fn pareto_sample<R: Rng>(
    n: usize,
    lambda: f64,
    x_min: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "pareto exponent must be positive and finite, got {lambda}"
        )));
    }
    if !(x_min > 0.0) || !x_min.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "pareto lower bound must be positive and finite, got {x_min}"
        )));
    }
    let inv = -1.0 / lambda;
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            x_min * (1.0 - u).powf(inv)
        })
        .collect())
}
