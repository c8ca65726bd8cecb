//! Critical values from the Brownian limit of the detector.
//!
//! Under stationarity `max_{ηT≤t≤LT} Δ_{T,t}` converges to
//!
//! ```text
//! sup_{η/(1+η) ≤ s ≤ L/(1+L)}  B₂(s)' M B₂(s) / s^{2γ},   M = ∫ Σ(u) w(u) du,
//! ```
//!
//! with `B₂` a standard planar Brownian motion and `Σ(u)` the long-run
//! covariance of `(cos(u'Υ_t), sin(u'Υ_t))`. `Σ(u)` is estimated with a flat
//! truncated sum of sample autocovariances, `M` by Monte Carlo over the
//! Gaussian weight, and the supremum quantile by simulating random-walk
//! approximations of `B₂`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::MonitorConfig;
use crate::error::{invalid, Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::seed::{stream_rng, sub_seed};
use crate::statistic::StatVariant;

pub type Mat2 = [[f64; 2]; 2];

pub const ZERO: Mat2 = [[0.0; 2]; 2];

/// Default truncation lag `⌈T^{1/3}⌉`.
pub fn default_lag(big_t: usize) -> usize {
    let c = (big_t as f64).cbrt().ceil() as usize;
    // Exact cubes otherwise round up through floating-point noise.
    if (c - 1).pow(3) >= big_t {
        c - 1
    } else {
        c
    }
}

/// Long-run covariance estimator of the cos/sin pair over the delay
/// embeddings of the training data.
#[derive(Debug, Clone)]
pub struct LongRunCov<'a> {
    training: &'a [f64],
    m: usize,
    lag: usize,
}

impl<'a> LongRunCov<'a> {
    pub fn new(training: &'a [f64], m: usize, lag: usize) -> Result<Self> {
        if m == 0 || m > training.len() {
            return invalid(format!("embedding dimension {m} invalid for {} observations", training.len()));
        }
        let n = training.len() - m + 1;
        if lag >= n {
            return invalid(format!("truncation lag {lag} must be below the {n} available embeddings"));
        }
        Ok(Self { training, m, lag })
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// `Σ̂(u)`: flat sum of autocovariance matrices over `|h| ≤ lag`, each
    /// normalized by `n − |h|`, then symmetrized.
    pub fn at(&self, u: &[f64]) -> Mat2 {
        assert_eq!(u.len(), self.m, "u must have dimension m");
        let f: Vec<[f64; 2]> = self
            .training
            .windows(self.m)
            .map(|y| {
                let arg: f64 = y.iter().zip(u).map(|(a, b)| a * b).sum();
                [arg.cos(), arg.sin()]
            })
            .collect();
        let n = f.len();
        let mean = [
            f.iter().map(|v| v[0]).sum::<f64>() / n as f64,
            f.iter().map(|v| v[1]).sum::<f64>() / n as f64,
        ];
        let g: Vec<[f64; 2]> = f.iter().map(|v| [v[0] - mean[0], v[1] - mean[1]]).collect();
        let mut s = ZERO;
        for h in 0..=self.lag {
            let mut gamma = ZERO;
            for j in 0..n - h {
                for (r, row) in gamma.iter_mut().enumerate() {
                    for (c, cell) in row.iter_mut().enumerate() {
                        *cell += g[j][r] * g[j + h][c];
                    }
                }
            }
            let norm = 1.0 / (n - h) as f64;
            for r in 0..2 {
                for c in 0..2 {
                    let v = gamma[r][c] * norm;
                    s[r][c] += v;
                    if h > 0 {
                        s[c][r] += v;
                    }
                }
            }
        }
        let off = 0.5 * (s[0][1] + s[1][0]);
        s[0][1] = off;
        s[1][0] = off;
        s
    }
}

/// `Σ̂(u)` for the given training data, dimension and truncation lag.
pub fn sigma_hat(training: &[f64], m: usize, u: &[f64], lag: usize) -> Result<Mat2> {
    if u.len() != m {
        return invalid(format!("u has dimension {}, expected {m}", u.len()));
    }
    Ok(LongRunCov::new(training, m, lag)?.at(u))
}

/// Symmetric 2×2 eigen-decomposition: eigenvalues (descending) and the unit
/// eigenvector of the larger one.
fn eig2(a: &Mat2) -> ([f64; 2], [f64; 2]) {
    let (p, q, r) = (a[0][0], a[0][1], a[1][1]);
    let half_tr = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    let (l1, l2) = (half_tr + rad, half_tr - rad);
    let v = if q.abs() > 0.0 {
        let (x, y) = (l1 - r, q);
        let norm = x.hypot(y);
        [x / norm, y / norm]
    } else if p >= r {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    ([l1, l2], v)
}

/// Clips negative eigenvalues of a symmetric matrix to zero. Eigenvalues
/// above `−1e−10` are treated as rounding noise.
pub fn clip_psd(a: &Mat2) -> Mat2 {
    let ([l1, l2], v) = eig2(a);
    if l2 >= 0.0 {
        return *a;
    }
    let l1 = l1.max(0.0);
    let l2 = if l2 > -1e-10 { 0.0 } else { 0.0f64.max(l2) };
    let w = [-v[1], v[0]];
    let mut out = ZERO;
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = l1 * v[r] * v[c] + l2 * w[r] * w[c];
        }
    }
    out
}

/// Monte Carlo estimate of `∫ Σ̂(u) exp(−a‖u‖²) du` using
/// `(π/a)^{m/2} E[Σ̂(U)]`, `U ~ N(0, (2a)^{−1} I_m)`, with `n_u` draws.
pub fn integrate_sigma_w<R: Rng + ?Sized>(training: &[f64], kernel: &KernelSpec, n_u: usize, lag: usize, rng: &mut R) -> Result<Mat2> {
    if kernel.family() != KernelFamily::Gaussian {
        return Err(Error::NotSupported("asymptotic calibration needs the gaussian weight".into()));
    }
    if n_u == 0 {
        return invalid("need at least one u draw");
    }
    let m = kernel.m();
    let cov = LongRunCov::new(training, m, lag)?;
    let normal = Normal::new(0.0, (1.0 / (2.0 * kernel.a())).sqrt()).expect("positive sd");
    let mut acc = ZERO;
    let mut u = vec![0.0; m];
    for _ in 0..n_u {
        for x in u.iter_mut() {
            *x = normal.sample(rng);
        }
        let s = cov.at(&u);
        for r in 0..2 {
            for c in 0..2 {
                acc[r][c] += s[r][c];
            }
        }
    }
    let factor = kernel.weight_scale() * kernel.peak() / n_u as f64;
    for row in acc.iter_mut() {
        for cell in row.iter_mut() {
            *cell *= factor;
        }
    }
    Ok(clip_psd(&acc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownianSettings {
    pub n_paths: usize,
    pub n_grid: usize,
}

impl Default for BrownianSettings {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            n_grid: 2048,
        }
    }
}

/// Pathwise suprema of `B'MB / s^{2γ}` over `[η/(1+η), L/(1+L)]`, one per
/// simulated path, unsorted. Path `p` uses the stream `sub_seed(seed, p)`.
pub fn brownian_sup_samples(m: &Mat2, gamma: f64, horizon: usize, eta: f64, settings: BrownianSettings, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..0.5).contains(&gamma) {
        return invalid(format!("gamma must lie in [0, 0.5), got {gamma}"));
    }
    if horizon == 0 {
        return invalid("horizon L must be at least 1");
    }
    if !(eta >= 0.0 && eta <= horizon as f64) {
        return invalid(format!("eta must lie in [0, L], got {eta}"));
    }
    if gamma > 0.0 && eta == 0.0 {
        return invalid("gamma > 0 needs a positive lower trimming eta");
    }
    if settings.n_grid < 2 || settings.n_paths == 0 {
        return invalid("need at least two grid points and one path");
    }
    if (m[0][1] - m[1][0]).abs() > 1e-12 * (m[0][1].abs() + m[1][0].abs()).max(1e-300) {
        return invalid("M must be symmetric");
    }
    let s0 = eta / (1.0 + eta);
    let s1 = horizon as f64 / (1.0 + horizon as f64);
    let ds = (s1 - s0) / (settings.n_grid - 1) as f64;
    let step_sd = ds.sqrt();
    let weight = |s: f64| if gamma == 0.0 { 1.0 } else { s.powf(-2.0 * gamma) };

    Ok((0..settings.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p);
            let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
            let sd0 = s0.sqrt();
            let (mut b1, mut b2) = (sd0 * z(), sd0 * z());
            let mut sup = f64::NEG_INFINITY;
            for i in 0..settings.n_grid {
                if i > 0 {
                    b1 += step_sd * z();
                    b2 += step_sd * z();
                }
                let s = s0 + i as f64 * ds;
                let quad = m[0][0] * b1 * b1 + 2.0 * m[0][1] * b1 * b2 + m[1][1] * b2 * b2;
                sup = sup.max(quad * weight(s));
            }
            sup
        })
        .collect())
}

/// Empirical `(1−α)` quantile (order statistic `⌈n(1−α)⌉`) of the Brownian
/// supremum functional.
pub fn brownian_sup_critical(m: &Mat2, gamma: f64, horizon: usize, eta: f64, alpha: f64, settings: BrownianSettings, seed: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let mut sups = brownian_sup_samples(m, gamma, horizon, eta, settings, seed)?;
    sups.sort_by(f64::total_cmp);
    Ok(upper_quantile(&sups, alpha))
}

/// Order statistic `⌈n(1−α)⌉` (1-based) of ascending `sorted`.
pub(crate) fn upper_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let k = ((n as f64 * (1.0 - alpha)) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[k - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConfig {
    /// Draws for the u-integral.
    pub n_u: usize,
    /// Truncation lag; `None` means `⌈T^{1/3}⌉`.
    pub lag: Option<usize>,
    pub brownian: BrownianSettings,
    pub seed: u64,
}

impl Default for AsymptoticConfig {
    fn default() -> Self {
        Self {
            n_u: 2000,
            lag: None,
            brownian: BrownianSettings::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCalibration {
    pub c_hat: f64,
    pub weighted_cov: Mat2,
    pub lag: usize,
    /// Simulated suprema, ascending.
    pub suprema: Vec<f64>,
}

impl AsymptoticCalibration {
    /// Fraction of simulated suprema `≥ observed_max`.
    pub fn p_value(&self, observed_max: f64) -> f64 {
        crate::bootstrap::p_value(observed_max, &self.suprema)
    }
}

/// Critical value for the cumulative Gaussian detector from the Brownian
/// limit, using only the training data.
pub fn asymptotic_critical_value(training: &[f64], config: &MonitorConfig, acfg: &AsymptoticConfig) -> Result<AsymptoticCalibration> {
    config.validate()?;
    if config.variant != StatVariant::Cumulative {
        return Err(Error::NotSupported("asymptotic calibration covers the cumulative statistic only".into()));
    }
    let lag = acfg.lag.unwrap_or_else(|| default_lag(training.len()));
    let mut rng = stream_rng(acfg.seed, u64::MAX);
    let weighted_cov = integrate_sigma_w(training, &config.kernel, acfg.n_u, lag, &mut rng)?;
    let mut suprema = brownian_sup_samples(
        &weighted_cov,
        config.gamma,
        config.horizon,
        config.eta,
        acfg.brownian,
        sub_seed(acfg.seed, 1),
    )?;
    suprema.sort_by(f64::total_cmp);
    Ok(AsymptoticCalibration {
        c_hat: upper_quantile(&suprema, config.alpha),
        weighted_cov,
        lag,
        suprema,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn default_lag_is_cube_root_ceiling() {
        assert_eq!(default_lag(300), 7);
        assert_eq!(default_lag(1000), 10);
        assert_eq!(default_lag(27), 3);
        assert_eq!(default_lag(28), 4);
    }

    #[test]
    fn sigma_vanishes_at_origin() {
        let x = normals(50, 1);
        assert_eq!(sigma_hat(&x, 2, &[0.0, 0.0], 3).unwrap(), ZERO);
    }

    #[test]
    fn lag_zero_is_plain_sample_covariance() {
        let x = normals(80, 2);
        let u = 0.7;
        let s = sigma_hat(&x, 1, &[u], 0).unwrap();
        let c: Vec<f64> = x.iter().map(|v| (u * v).cos()).collect();
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c.len() as f64;
        assert!((s[0][0] - var).abs() < 1e-14);
        assert_eq!(s[0][1], s[1][0]);
    }

    #[test]
    fn lag_must_be_below_sample_size() {
        let x = normals(10, 3);
        assert!(sigma_hat(&x, 1, &[1.0], 10).is_err());
        assert!(sigma_hat(&x, 2, &[1.0, 0.0], 9).is_err());
        assert!(sigma_hat(&x, 1, &[1.0], 9).is_ok());
    }

    #[test]
    fn constant_training_gives_zero_matrix() {
        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = integrate_sigma_w(&[3.0; 40], &k, 200, 3, &mut rng).unwrap();
        for row in m {
            for v in row {
                assert!(v.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn psd_clipping() {
        let a = [[1.0, 2.0], [2.0, 1.0]]; // eigenvalues 3, -1
        let c = clip_psd(&a);
        let ([l1, l2], _) = eig2(&c);
        assert!((l1 - 3.0).abs() < 1e-12);
        assert!(l2.abs() < 1e-12);
        let p = [[2.0, 0.5], [0.5, 1.0]];
        assert_eq!(clip_psd(&p), p);
    }

    #[test]
    fn brownian_critical_value_edge_cases() {
        let s = BrownianSettings { n_paths: 500, n_grid: 64 };
        assert_eq!(brownian_sup_critical(&ZERO, 0.0, 1, 0.0, 0.05, s, 1).unwrap(), 0.0);
        assert!(brownian_sup_critical(&ZERO, 0.2, 1, 0.0, 0.05, s, 1).is_err());
        assert!(brownian_sup_critical(&[[1.0, 0.5], [0.2, 1.0]], 0.0, 1, 0.0, 0.05, s, 1).is_err());
    }

    #[test]
    fn upper_quantile_index() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(upper_quantile(&v, 0.05), 950.0);
        assert_eq!(upper_quantile(&v[..999], 0.05), 950.0);
    }
}
