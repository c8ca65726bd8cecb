//! Stationary-bootstrap calibration of the monitoring critical value.
//!
//! A replicate resamples the training data with geometric-length blocks
//! (circular wrap-around, uniform start indices) up to `N = T(1+L)`
//! observations, treats the first `T` as pseudo-training data, and records
//! `M* = max_{1≤t≤LT} Δ*_{T,t}`. With `B` replicates sorted ascending the
//! critical value is `M*_(⌊B(1−α)⌋)` and the p-value of an observed maximum is
//! the fraction of replicates at or above it.
//!
//! Replicate `b` draws from its own ChaCha8 stream seeded with
//! [`crate::seed::sub_seed`]`(seed, b)`, so results are identical for any
//! number of worker threads.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{max_detector, retrospective_scan, MonitorConfig};
use crate::error::{invalid, Result};
use crate::kernel::KernelSpec;
use crate::seed::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockParam {
    /// Data-driven selection on the training data.
    Auto,
    /// Geometric parameter `p_B` in `(0, 1]`.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub block: BlockParam,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, block: BlockParam, seed: u64) -> Result<Self> {
        if replicates == 0 {
            return invalid("need at least one bootstrap replicate");
        }
        if let BlockParam::Fixed(p) = block {
            check_p(p)?;
        }
        Ok(Self {
            replicates,
            block,
            seed,
        })
    }

    /// `p_B` for the given training data.
    pub fn resolve_p(&self, training: &[f64]) -> Result<f64> {
        match self.block {
            BlockParam::Fixed(p) => Ok(p),
            BlockParam::Auto => Ok(select_p_b(training)?.p_b),
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return invalid(format!("p_B must lie in (0, 1], got {p}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSelection {
    pub p_b: f64,
    /// Expected block length `1/p_B`.
    pub block_len: f64,
    /// Set when the data have zero variance and iid resampling is used.
    pub degenerate: bool,
}

/// Automatic expected block length for the stationary bootstrap.
///
/// Flat-top lag window on the sample autocovariances, bandwidth twice the
/// smallest lag after which `K_N = max(5, ⌈√log10 n⌉)` consecutive
/// autocorrelations are insignificant at `2√(log10 n / n)`, and
/// `b̂ = (2Ĝ²/D̂)^{1/3} n^{1/3}` with `D̂ = 2ĝ(0)²`. The result is clamped to
/// `[1, ⌈min(3√n, n/3)⌉]`.
pub fn select_p_b(training: &[f64]) -> Result<BlockSelection> {
    let n = training.len();
    if n < 10 {
        return invalid(format!("block length selection needs at least 10 observations, got {n}"));
    }
    let nf = n as f64;
    let mean = training.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = training.iter().map(|x| x - mean).collect();
    let acv = |k: usize| -> f64 {
        centered[k..].iter().zip(&centered[..n - k]).map(|(a, b)| a * b).sum::<f64>() / nf
    };
    let var = acv(0);
    if !(var > 1e-300 * mean.abs().max(1.0)) || centered.iter().all(|&c| c == 0.0) {
        return Ok(BlockSelection {
            p_b: 1.0,
            block_len: 1.0,
            degenerate: true,
        });
    }

    let kn = 5usize.max(nf.log10().sqrt().ceil() as usize);
    let m_max = (nf.sqrt().ceil() as usize + kn).min(n - 1);
    let b_max = (3.0 * nf.sqrt()).min(nf / 3.0).ceil();
    let threshold = 2.0 * (nf.log10() / nf).sqrt();

    let gammas: Vec<f64> = (0..=m_max).map(acv).collect();
    let insignificant: Vec<bool> = gammas[1..].iter().map(|g| (g / var).abs() < threshold).collect();
    // insignificant[j] refers to lag j + 1.
    let m_hat = (0..=m_max.saturating_sub(kn))
        .find(|&m| insignificant[m..m + kn].iter().all(|&b| b))
        .unwrap_or(m_max);
    let big_m = (2 * m_hat.max(1)).min(m_max);

    let mut g_hat = 0.0;
    let mut lr = gammas[0];
    for (k, &gk) in gammas.iter().enumerate().take(big_m + 1).skip(1) {
        let x = k as f64 / big_m as f64;
        let lambda = if x <= 0.5 { 1.0 } else { 2.0 * (1.0 - x) };
        g_hat += 2.0 * lambda * k as f64 * gk;
        lr += 2.0 * lambda * gk;
    }
    let d_sb = 2.0 * lr * lr;
    let mut b = if d_sb > 0.0 {
        (2.0 * g_hat * g_hat / d_sb).cbrt() * nf.cbrt()
    } else {
        1.0
    };
    if !b.is_finite() {
        b = b_max;
    }
    let b = b.clamp(1.0, b_max.max(1.0));
    Ok(BlockSelection {
        p_b: 1.0 / b,
        block_len: b,
        degenerate: false,
    })
}

/// One geometric block length on `{1, 2, …}` with mean `1/p`.
pub fn geometric_block_length<R: Rng + ?Sized>(p: f64, rng: &mut R) -> usize {
    if p >= 1.0 {
        return 1;
    }
    let geo = Geometric::new(p).expect("p validated by caller");
    geo.sample(rng) as usize + 1
}

/// `n` stationary-bootstrap observations drawn from `training`.
pub fn stationary_bootstrap_sample<R: Rng + ?Sized>(training: &[f64], n: usize, p: f64, rng: &mut R) -> Result<Vec<f64>> {
    if training.is_empty() {
        return invalid("cannot resample an empty series");
    }
    check_p(p)?;
    let len = training.len();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let block = geometric_block_length(p, rng);
        let start = rng.random_range(0..len);
        let take = block.min(n - out.len());
        out.extend((0..take).map(|i| training[(start + i) % len]));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub c_hat: f64,
    /// Replicate maxima in ascending order.
    pub maxima: Vec<f64>,
    pub p_b_used: f64,
    pub seed: u64,
}

impl CalibrationResult {
    pub fn p_value(&self, observed_max: f64) -> f64 {
        p_value(observed_max, &self.maxima)
    }
}

/// 1-based order-statistic index `⌊B(1−α)⌋`.
pub fn critical_index(replicates: usize, alpha: f64) -> Result<usize> {
    // Guard against 1000 × 0.95 landing a hair below 950.
    let k = (replicates as f64 * (1.0 - alpha) + 1e-9).floor() as usize;
    if k < 1 {
        return invalid(format!("B(1 - alpha) = {} < 1: quantile undefined", replicates as f64 * (1.0 - alpha)));
    }
    Ok(k.min(replicates))
}

/// Maximum detector value of one bootstrap replicate.
pub fn bootstrap_replicate_max<R: Rng + ?Sized>(training: &[f64], config: &MonitorConfig, p_b: f64, rng: &mut R) -> Result<f64> {
    let big_t = training.len();
    let path = stationary_bootstrap_sample(training, big_t * (1 + config.horizon), p_b, rng)?;
    max_detector(&path, big_t, config)
}

fn finish(mut maxima: Vec<f64>, alpha: f64, p_b: f64, seed: u64) -> Result<CalibrationResult> {
    maxima.sort_by(f64::total_cmp);
    let k = critical_index(maxima.len(), alpha)?;
    Ok(CalibrationResult {
        c_hat: maxima[k - 1],
        maxima,
        p_b_used: p_b,
        seed,
    })
}

/// Bootstrap critical value for the sequential detector.
pub fn calibrate(training: &[f64], config: &MonitorConfig, bconfig: &BootstrapConfig) -> Result<CalibrationResult> {
    config.validate()?;
    if training.len() < config.kernel.m() {
        return invalid("training data shorter than the embedding dimension");
    }
    critical_index(bconfig.replicates, config.alpha)?;
    let p_b = bconfig.resolve_p(training)?;
    let maxima = (0..bconfig.replicates as u64)
        .into_par_iter()
        .map(|b| bootstrap_replicate_max(training, config, p_b, &mut stream_rng(bconfig.seed, b)))
        .collect::<Result<Vec<f64>>>()?;
    finish(maxima, config.alpha, p_b, bconfig.seed)
}

/// Bootstrap critical value for the retrospective scan: each replicate
/// resamples the whole series and recomputes the maximum over splits.
pub fn calibrate_retrospective(values: &[f64], kernel: &KernelSpec, alpha: f64, bconfig: &BootstrapConfig) -> Result<CalibrationResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    critical_index(bconfig.replicates, alpha)?;
    let p_b = bconfig.resolve_p(values)?;
    let maxima = (0..bconfig.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(bconfig.seed, b);
            let path = stationary_bootstrap_sample(values, values.len(), p_b, &mut rng)?;
            Ok(retrospective_scan(&path, kernel)?.max_stat)
        })
        .collect::<Result<Vec<f64>>>()?;
    finish(maxima, alpha, p_b, bconfig.seed)
}

/// Fraction of replicate maxima `≥ observed_max`.
pub fn p_value(observed_max: f64, maxima: &[f64]) -> f64 {
    if maxima.is_empty() {
        return 1.0;
    }
    let hits = maxima.iter().filter(|&&m| m >= observed_max).count();
    hits as f64 / maxima.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistic::StatVariant;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> MonitorConfig {
        MonitorConfig::new(KernelSpec::gaussian(1.0, 1).unwrap(), 0.0, 1, 0.05, StatVariant::Cumulative).unwrap()
    }

    #[test]
    fn p_one_resamples_single_values() {
        let training: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            assert_eq!(geometric_block_length(1.0, &mut rng), 1);
        }
        let s = stationary_bootstrap_sample(&training, 500, 1.0, &mut rng).unwrap();
        assert_eq!(s.len(), 500);
        assert!(s.iter().all(|v| training.contains(v)));
    }

    #[test]
    fn single_observation_training() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = stationary_bootstrap_sample(&[4.5], 37, 0.3, &mut rng).unwrap();
        assert_eq!(s, vec![4.5; 37]);
    }

    #[test]
    fn blocks_wrap_around_the_circle() {
        // With long blocks on an increasing series every consecutive pair is
        // either a +1 step, the wrap T -> 1, or a block boundary.
        let training: Vec<f64> = (1..=8).map(f64::from).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = stationary_bootstrap_sample(&training, 2000, 0.05, &mut rng).unwrap();
        let wraps = s.windows(2).filter(|w| w[0] == 8.0 && w[1] == 1.0).count();
        let steps = s.windows(2).filter(|w| w[1] - w[0] == 1.0).count();
        assert!(wraps > 0);
        assert!(steps + wraps > 1800);
    }

    #[test]
    fn invalid_block_parameter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(stationary_bootstrap_sample(&[1.0], 3, 0.0, &mut rng).is_err());
        assert!(stationary_bootstrap_sample(&[1.0], 3, 1.5, &mut rng).is_err());
        assert!(BootstrapConfig::new(0, BlockParam::Auto, 1).is_err());
        assert!(BootstrapConfig::new(10, BlockParam::Fixed(0.0), 1).is_err());
    }

    #[test]
    fn critical_index_rule() {
        assert_eq!(critical_index(1000, 0.05).unwrap(), 950);
        assert_eq!(critical_index(999, 0.05).unwrap(), 949);
        assert_eq!(critical_index(20, 0.05).unwrap(), 19);
        assert!(critical_index(1, 0.5).is_err());
    }

    #[test]
    fn p_value_counts_ties_as_exceeding() {
        let maxima = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(p_value(6.0, &maxima), 0.0);
        assert_eq!(p_value(0.5, &maxima), 1.0);
        assert_eq!(p_value(1.0, &maxima), 1.0);
        assert_eq!(p_value(3.0, &maxima), 0.6);
    }

    #[test]
    fn degenerate_series_selects_iid_resampling() {
        let sel = select_p_b(&[2.0; 40]).unwrap();
        assert_eq!(sel.p_b, 1.0);
        assert!(sel.degenerate);
        assert!(select_p_b(&[1.0; 9]).is_err());
    }

    #[test]
    fn selected_block_length_tracks_dependence() {
        let sel = select_p_b(&(0..200).map(|i| (i as f64 / 10.0).sin()).collect::<Vec<_>>()).unwrap();
        assert!(!sel.degenerate);
        assert!(sel.block_len > 5.0, "{sel:?}");
        assert!(sel.block_len <= (3.0 * 200f64.sqrt()).min(200.0 / 3.0).ceil());
    }

    #[test]
    fn constant_training_calibrates_to_zero() {
        let b = BootstrapConfig::new(50, BlockParam::Auto, 7).unwrap();
        let res = calibrate(&[1.25; 30], &cfg(), &b).unwrap();
        assert!(res.maxima.iter().all(|&m| m == 0.0));
        assert_eq!(res.c_hat, 0.0);
    }

    #[test]
    fn calibration_is_deterministic_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let training: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let b = BootstrapConfig::new(40, BlockParam::Auto, 99).unwrap();
        let r1 = calibrate(&training, &cfg(), &b).unwrap();
        let r2 = calibrate(&training, &cfg(), &b).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.maxima.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(r1.c_hat, r1.maxima[critical_index(40, 0.05).unwrap() - 1]);
        assert!(r1.maxima.iter().all(|&m| m >= 0.0));
    }
}
