//! Detector, closed-end stopping rule and retrospective scan.
//!
//! At monitoring step `t` the detector is
//!
//! ```text
//! Δ_{T,t} = ((T + t − m + 1) / √(T − m + 1))² · D_{T,t} / q_γ(t/T)²,
//! q_γ(s)  = (1 + s) (s / (1 + s))^γ,   0 ≤ γ < 1/2.
//! ```
//!
//! Monitoring runs over `t = 1..=L·T` and raises an alarm at the first
//! `t ≥ 2` with `Δ_{T,t} > c_α` (ties keep monitoring). Values of `γ` close to
//! 1/2 favour detecting early violations; values near 0 favour late ones.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::KernelSpec;
use crate::statistic::{EcfAccumulator, StatVariant};
use crate::sum::CompensatedSum;

/// Boundary weight `q_γ(s) = (1 + s)(s/(1 + s))^γ`.
pub fn q_gamma(s: f64, gamma: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&gamma) {
        return invalid(format!("gamma must lie in [0, 0.5), got {gamma}"));
    }
    if !(s >= 0.0) {
        return invalid(format!("q_gamma needs s >= 0, got {s}"));
    }
    Ok(boundary(s, gamma))
}

#[inline]
fn boundary(s: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0 + s
    } else {
        (1.0 + s) * (s / (1.0 + s)).powf(gamma)
    }
}

/// Detector value for statistic `d` at step `t`.
pub fn delta(d: f64, big_t: usize, t: usize, m: usize, gamma: f64) -> Result<f64> {
    if t == 0 {
        return invalid("detector is defined for t >= 1");
    }
    if big_t < m {
        return invalid(format!("training length {big_t} is shorter than m = {m}"));
    }
    let q = q_gamma(t as f64 / big_t as f64, gamma)?;
    Ok(scaled(d, big_t, t, m, q))
}

#[inline]
fn scaled(d: f64, big_t: usize, t: usize, m: usize, q: f64) -> f64 {
    let n = (big_t + t - m + 1) as f64;
    let n0 = (big_t - m + 1) as f64;
    (n * n / n0) * d / (q * q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub kernel: KernelSpec,
    pub gamma: f64,
    /// Closed-end horizon: monitoring covers `t = 1..=horizon·T`.
    pub horizon: usize,
    pub alpha: f64,
    pub variant: StatVariant,
    /// Lower trimming: alarms are only allowed once `t ≥ eta·T`. Zero unless
    /// critical values come from the Brownian limit with `γ > 0`.
    pub eta: f64,
}

impl MonitorConfig {
    pub fn new(kernel: KernelSpec, gamma: f64, horizon: usize, alpha: f64, variant: StatVariant) -> Result<Self> {
        let cfg = Self {
            kernel,
            gamma,
            horizon,
            alpha,
            variant,
            eta: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        self.eta = eta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.gamma) {
            return invalid(format!("gamma must lie in [0, 0.5), got {}", self.gamma));
        }
        if self.horizon == 0 {
            return invalid("horizon L must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.eta >= 0.0 && self.eta <= self.horizon as f64) {
            return invalid(format!("eta must lie in [0, L], got {}", self.eta));
        }
        self.variant.check_kernel(&self.kernel)
    }

    /// Number of monitoring steps `L·T`.
    pub fn steps(&self, big_t: usize) -> usize {
        self.horizon * big_t
    }

    /// First step at which an alarm may be raised.
    pub fn first_alarm_step(&self, big_t: usize) -> usize {
        let trimmed = (self.eta * big_t as f64).ceil() as usize;
        trimmed.max(2)
    }

    fn detector_at(&self, d: f64, big_t: usize, t: usize) -> f64 {
        let q = boundary(t as f64 / big_t as f64, self.gamma);
        scaled(d, big_t, t, self.kernel.m(), q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingResult {
    /// First alarm step, `None` when no alarm fired (τ̂ = ∞).
    pub tau_hat: Option<usize>,
    /// `(t, Δ_{T,t})` for every step computed.
    pub trajectory: Vec<(usize, f64)>,
    pub p_value: Option<f64>,
    pub critical_value: f64,
}

impl StoppingResult {
    pub fn max_detector(&self) -> Option<f64> {
        self.trajectory.iter().map(|&(_, d)| d).reduce(f64::max)
    }
}

/// Runs the closed-end stopping rule over `stream`, starting from a fresh
/// accumulator built on the training data.
pub fn run_monitor<I>(mut state: EcfAccumulator, stream: I, config: &MonitorConfig, c_alpha: f64) -> Result<StoppingResult>
where
    I: IntoIterator<Item = f64>,
{
    config.validate()?;
    check_state(&state, config)?;
    let big_t = state.training_len();
    let steps = config.steps(big_t);
    let first_alarm = config.first_alarm_step(big_t);
    let mut trajectory = Vec::new();
    let mut tau_hat = None;
    for x in stream.into_iter().take(steps) {
        let d = state.push(x)?;
        let t = state.t();
        let value = config.detector_at(d, big_t, t);
        trajectory.push((t, value));
        if t >= first_alarm && value > c_alpha {
            tau_hat = Some(t);
            break;
        }
    }
    Ok(StoppingResult {
        tau_hat,
        trajectory,
        p_value: None,
        critical_value: c_alpha,
    })
}

fn check_state(state: &EcfAccumulator, config: &MonitorConfig) -> Result<()> {
    if state.t() != 0 {
        return invalid("monitoring must start from a fresh accumulator (t = 0)");
    }
    if state.kernel() != &config.kernel || state.variant() != config.variant {
        return invalid("accumulator kernel/variant differ from the monitor configuration");
    }
    Ok(())
}

/// Detector values `Δ_{T,t}` for `t = 1..=min(len(monitoring), L·T)`,
/// without stopping.
pub fn detector_trajectory(training: &[f64], monitoring: &[f64], config: &MonitorConfig) -> Result<Vec<f64>> {
    let mut acc = EcfAccumulator::new(training, config.kernel, config.variant)?;
    let big_t = training.len();
    let steps = config.steps(big_t).min(monitoring.len());
    let mut out = Vec::with_capacity(steps);
    for &x in &monitoring[..steps] {
        let d = acc.push(x)?;
        out.push(config.detector_at(d, big_t, acc.t()));
    }
    Ok(out)
}

/// `max Δ_{T,t}` over `⌈ηT⌉ ≤ t ≤ LT` (all `t ≥ 1` when `η = 0`) for a path
/// whose first `T` values are training data. The calibration maximum keeps
/// `t = 1` even though alarms start at `t = 2`.
pub fn max_detector(path: &[f64], big_t: usize, config: &MonitorConfig) -> Result<f64> {
    if big_t > path.len() {
        return invalid("path shorter than its training segment");
    }
    let (train, rest) = path.split_at(big_t);
    let traj = detector_trajectory(train, rest, config)?;
    Ok(trimmed_max(&traj, big_t, config))
}

/// Maximum over `trajectory[t − 1]` for `t ≥ ⌈ηT⌉`, floored at 0.
pub fn trimmed_max(trajectory: &[f64], big_t: usize, config: &MonitorConfig) -> f64 {
    let skip = ((config.eta * big_t as f64).ceil() as usize).saturating_sub(1);
    trajectory.iter().skip(skip).copied().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetroScan {
    pub max_stat: f64,
    /// Split point `t`: the first segment is `X_1..X_t`.
    pub argmax_t: usize,
}

/// Weighted two-sample distance at every split `t ∈ [m+1, n−m]`, returned in
/// split order. The first segment's embeddings come from `X_1..X_t`, the
/// second's from `X_{t+1}..X_n`; the distance is weighted by `n1·n2/(n1+n2)`
/// (embedding counts).
pub fn retrospective_profile(values: &[f64], kernel: &KernelSpec) -> Result<Vec<(usize, f64)>> {
    let m = kernel.m();
    let n = values.len();
    if n < 2 * m + 2 {
        return invalid(format!("retrospective scan needs at least {} observations, got {n}", 2 * m + 2));
    }
    if let Some(x) = values.iter().find(|x| !x.is_finite()) {
        return invalid(format!("non-finite observation {x}"));
    }
    let emb: Vec<&[f64]> = values.windows(m).collect();
    let ne = emb.len();
    let d = |j: usize, k: usize| kernel.dissimilarity(emb[j], emb[k]);

    // Embedding e covers X_{e+1}..X_{e+m}. At split t the first segment is
    // e ∈ [0, t−m] and the second is e ∈ [t, ne).
    let (t_lo, t_hi) = (m + 1, n - m);

    // Within-second-segment sums B(t) for every t, built back to front.
    let mut within_second = vec![0.0; t_hi + 2];
    let mut acc = CompensatedSum::new();
    for t in (t_lo..=t_hi).rev() {
        let row: CompensatedSum = (t + 1..ne).map(|k| d(t, k)).collect();
        acc.add(2.0 * row.value());
        within_second[t] = acc.value();
    }

    let mut within_first = 0.0;
    let mut cross: CompensatedSum = (m..ne).map(|k| d(0, k)).collect();
    let mut out = Vec::with_capacity(t_hi - t_lo + 1);
    for t in t_lo..=t_hi {
        let newest = t - m;
        let row: CompensatedSum = (0..newest).map(|j| d(j, newest)).collect();
        within_first += 2.0 * row.value();
        let gained: CompensatedSum = (t..ne).map(|k| d(newest, k)).collect();
        let lost: CompensatedSum = (0..newest).map(|j| d(j, t - 1)).collect();
        cross.add(gained.value());
        cross.add(-lost.value());

        let n1 = (t - m + 1) as f64;
        let n2 = (ne - t) as f64;
        let dist = 2.0 * cross.value() / (n1 * n2) - within_first / (n1 * n1) - within_second[t] / (n2 * n2);
        out.push((t, kernel.weight_scale() * dist * n1 * n2 / (n1 + n2)));
    }
    Ok(out)
}

/// Maximum of [`retrospective_profile`] and its smallest maximizing split.
pub fn retrospective_scan(values: &[f64], kernel: &KernelSpec) -> Result<RetroScan> {
    let profile = retrospective_profile(values, kernel)?;
    let mut best = RetroScan {
        max_stat: f64::NEG_INFINITY,
        argmax_t: 0,
    };
    for (t, v) in profile {
        if v > best.max_stat {
            best = RetroScan { max_stat: v, argmax_t: t };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Series;
    use crate::statistic::d_batch;

    fn cfg(gamma: f64, horizon: usize) -> MonitorConfig {
        MonitorConfig::new(KernelSpec::gaussian(1.0, 1).unwrap(), gamma, horizon, 0.05, StatVariant::Cumulative).unwrap()
    }

    #[test]
    fn boundary_function_values() {
        assert_eq!(q_gamma(1.0, 0.0).unwrap(), 2.0);
        assert!((q_gamma(1.0, 0.25).unwrap() - 2f64.powf(0.75)).abs() < 1e-15);
        assert!((q_gamma(1.0, 0.25).unwrap() - 1.681_792_8).abs() < 1e-7);
        assert_eq!(q_gamma(0.0, 0.25).unwrap(), 0.0);
        assert_eq!(q_gamma(0.0, 0.0).unwrap(), 1.0);
        assert!(q_gamma(1.0, 0.5).is_err());
        assert!(q_gamma(1.0, -0.1).is_err());
    }

    #[test]
    fn detector_values() {
        assert_eq!(delta(0.0, 50, 3, 2, 0.3).unwrap(), 0.0);
        assert!((delta(1.0, 100, 100, 1, 0.0).unwrap() - 100.0).abs() < 1e-12);
        assert!(delta(1.0, 100, 0, 1, 0.2).is_err());

        let s = Series::new(vec![0.0, 1.0, 1.0], 2).unwrap();
        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        let d = d_batch(&s, &k, 1, StatVariant::Cumulative).unwrap();
        let acc = EcfAccumulator::new(&[0.0, 1.0], k, StatVariant::Cumulative).unwrap();
        let res = run_monitor(acc, [1.0], &MonitorConfig::new(k, 0.0, 1, 0.05, StatVariant::Cumulative).unwrap(), 1e9).unwrap();
        assert!((res.trajectory[0].1 - delta(d, 2, 1, 1, 0.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        assert!(MonitorConfig::new(k, 0.5, 1, 0.05, StatVariant::Cumulative).is_err());
        assert!(MonitorConfig::new(k, 0.0, 0, 0.05, StatVariant::Cumulative).is_err());
        assert!(MonitorConfig::new(k, 0.0, 1, 1.0, StatVariant::Cumulative).is_err());
        assert!(MonitorConfig::new(k, 0.0, 1, 0.05, StatVariant::NegEnergy).is_err());
        assert!(cfg(0.2, 2).with_eta(3.0).is_err());
        assert_eq!(cfg(0.2, 2).with_eta(0.05).unwrap().first_alarm_step(100), 5);
        assert_eq!(cfg(0.0, 1).first_alarm_step(100), 2);
    }

    #[test]
    fn constant_stream_never_alarms() {
        let c = cfg(0.0, 1);
        let acc = EcfAccumulator::new(&[2.0; 20], c.kernel, c.variant).unwrap();
        let res = run_monitor(acc, std::iter::repeat(2.0), &c, 0.0).unwrap();
        assert_eq!(res.tau_hat, None);
        assert_eq!(res.trajectory.len(), 20);
        assert!(res.trajectory.iter().all(|&(_, d)| d == 0.0));
    }

    #[test]
    fn negative_threshold_alarms_at_first_admissible_step() {
        let c = cfg(0.0, 1);
        let acc = EcfAccumulator::new(&[2.0; 20], c.kernel, c.variant).unwrap();
        let res = run_monitor(acc, std::iter::repeat(2.0), &c, -1e-300).unwrap();
        assert_eq!(res.tau_hat, Some(2));
        assert_eq!(res.trajectory.len(), 2);
    }

    #[test]
    fn short_stream_ends_without_alarm_and_non_finite_errors() {
        let c = cfg(0.0, 1);
        let acc = EcfAccumulator::new(&[0.0, 1.0, 2.0, 3.0], c.kernel, c.variant).unwrap();
        let res = run_monitor(acc.clone(), [0.5], &c, 1e9).unwrap();
        assert_eq!(res.tau_hat, None);
        assert_eq!(res.trajectory.len(), 1);
        assert!(run_monitor(acc, [0.5, f64::NAN], &c, 1e9).is_err());
    }

    #[test]
    fn alarm_is_strictly_above_threshold() {
        let c = cfg(0.0, 1);
        let training = [0.0, 0.5, -0.3, 1.2, -0.8, 0.1];
        let stream = [3.0, 3.5, 4.0, 3.2, 2.9, 3.1];
        let traj = detector_trajectory(&training, &stream, &c).unwrap();
        let acc = EcfAccumulator::new(&training, c.kernel, c.variant).unwrap();
        // Threshold exactly at Δ_2: tie must not alarm at t = 2.
        let res = run_monitor(acc, stream, &c, traj[1]).unwrap();
        assert_ne!(res.tau_hat, Some(2));
        if let Some(tau) = res.tau_hat {
            assert!(traj[tau - 1] > traj[1]);
        }
    }

    fn brute_retro(values: &[f64], kernel: &KernelSpec, t: usize) -> f64 {
        let m = kernel.m();
        let first: Vec<&[f64]> = values[..t].windows(m).collect();
        let second: Vec<&[f64]> = values[t..].windows(m).collect();
        let sum = |a: &[&[f64]], b: &[&[f64]]| -> f64 {
            a.iter().flat_map(|x| b.iter().map(move |y| kernel.dissimilarity(x, y))).sum()
        };
        let (n1, n2) = (first.len() as f64, second.len() as f64);
        let dist = 2.0 * sum(&first, &second) / (n1 * n2) - sum(&first, &first) / (n1 * n1) - sum(&second, &second) / (n2 * n2);
        dist * n1 * n2 / (n1 + n2)
    }

    #[test]
    fn calibration_maximum_covers_first_step_and_trimming() {
        let path = [0.0, 1.0, 0.5, -0.3, 4.0, 0.1, 0.2, -2.0];
        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        let cfg = MonitorConfig::new(k, 0.0, 1, 0.05, StatVariant::Cumulative).unwrap();
        let traj = detector_trajectory(&path[..4], &path[4..], &cfg).unwrap();
        // The jump sits at t = 1, so the untrimmed maximum is Δ_{T,1}.
        assert_eq!(max_detector(&path, 4, &cfg).unwrap(), traj[0]);
        assert!(traj[0] > traj[1..].iter().copied().fold(0.0, f64::max));
        let trimmed = cfg.with_eta(0.5).unwrap();
        let expect = traj[1..].iter().copied().fold(0.0, f64::max);
        assert_eq!(max_detector(&path, 4, &trimmed).unwrap(), expect);
    }

    #[test]
    fn retrospective_profile_matches_brute_force() {
        let values = [0.3, -1.2, 0.8, 2.5, -0.4, 1.9, 0.0, -2.2, 1.1, 0.7, 3.3];
        for m in 1..=3 {
            let k = KernelSpec::gaussian(0.8, m).unwrap();
            let profile = retrospective_profile(&values, &k).unwrap();
            assert_eq!(profile.first().unwrap().0, m + 1);
            assert_eq!(profile.last().unwrap().0, values.len() - m);
            for (t, v) in profile {
                let b = brute_retro(&values, &k, t);
                assert!((v - b).abs() < 1e-12 * b.abs().max(1.0), "m={m} t={t}: {v} vs {b}");
            }
        }
    }

    #[test]
    fn retrospective_scan_examples() {
        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        assert_eq!(retrospective_scan(&[1.5; 10], &k).unwrap().max_stat, 0.0);

        let step = [0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0];
        assert_eq!(retrospective_scan(&step, &k).unwrap().argmax_t, 4);

        let two = [0.0, 1.0, 0.0, 1.0];
        let scan = retrospective_scan(&two, &k).unwrap();
        let brute = brute_retro(&two, &k, 2).max(brute_retro(&two, &k, 3));
        assert!((scan.max_stat - brute).abs() < 1e-14);

        assert!(retrospective_scan(&[0.0, 1.0, 2.0], &k).is_err());
    }
}
