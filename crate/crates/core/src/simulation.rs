//! Data-generating processes for size and power studies, and the warp-speed
//! Monte Carlo harness.
//!
//! Null processes (strictly stationary):
//!
//! | name | process |
//! |------|---------|
//! | S1 | `X_t = ε_t`, iid N(0,1) |
//! | S2 | `X_t = 0.5 X_{t−1} + ε_t` |
//! | S3 | `X_t = h_t ε_t`, `h_t² = 0.2 + 0.3 X_{t−1}²` |
//! | S4 | `X_t = h_t ε_t`, `h_t² = 0.1 + 0.3 X_{t−1}² + 0.3 h_{t−1}²` |
//! | S5 | `X_t = h_t ε_t`, `h_t² = 0.1 + 0.7 X_{t−1}² + 0.3 h_{t−1}²` |
//! | S6 | `X_t = β_t X_{t−1} + ε_t`, `β_t = 0.5 β_{t−1} + η_t`, `η_t ~ N(0, 0.1²)` |
//! | S7 | iid standard Cauchy |
//!
//! Alternatives, with `V = T(1 + U·L)`, `U ~ Uniform(0, 4/5)`:
//!
//! | name | process |
//! |------|---------|
//! | P1 | `ε_t + 1{t > V}` |
//! | P2 | `ε_t (1 + 1{t > V})` |
//! | P3 | `(1 + √2 ε_t) 1{t ≤ V} + ε_t² 1{t > V}` |
//! | P4 | `ε_t` for `t ≤ T`, `ε_t exp(1/2 − |1/2 − (T−t)/(LT)|)` after |
//! | P5 | `ε_t` for `t ≤ V`, then iid stable `ξ_t` (α = 1, β = 1/4) |
//!
//! Recursions start from zero. S2–S6 run a discarded burn-in (500 steps by
//! default) before the recorded sample; set it to zero for the literal
//! recursion from `X_0 = 0`.

use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{asymptotic_critical_value, upper_quantile, AsymptoticConfig};
use crate::bootstrap::{bootstrap_replicate_max, BlockParam};
use crate::detector::{max_detector, run_monitor, MonitorConfig};
use crate::error::{invalid, Result};
use crate::kernel::Series;
use crate::seed::{stream_rng, sub_seed};
use crate::statistic::EcfAccumulator;

pub mod stable;

pub use stable::Stable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dgp {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    P1,
    P2,
    P3,
    P4,
    P5,
}

impl Dgp {
    pub const ALL: [Dgp; 12] = [
        Dgp::S1,
        Dgp::S2,
        Dgp::S3,
        Dgp::S4,
        Dgp::S5,
        Dgp::S6,
        Dgp::S7,
        Dgp::P1,
        Dgp::P2,
        Dgp::P3,
        Dgp::P4,
        Dgp::P5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dgp::S1 => "S1",
            Dgp::S2 => "S2",
            Dgp::S3 => "S3",
            Dgp::S4 => "S4",
            Dgp::S5 => "S5",
            Dgp::S6 => "S6",
            Dgp::S7 => "S7",
            Dgp::P1 => "P1",
            Dgp::P2 => "P2",
            Dgp::P3 => "P3",
            Dgp::P4 => "P4",
            Dgp::P5 => "P5",
        }
    }

    pub fn is_null(self) -> bool {
        matches!(self, Dgp::S1 | Dgp::S2 | Dgp::S3 | Dgp::S4 | Dgp::S5 | Dgp::S6 | Dgp::S7)
    }
}

impl std::fmt::Display for Dgp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Dgp {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase();
        let key = key.strip_prefix("DGP.").unwrap_or(&key);
        Dgp::ALL
            .iter()
            .copied()
            .find(|d| d.name() == key)
            .ok_or_else(|| format!("unknown DGP `{s}` (expected S1..S7 or P1..P5)"))
    }
}

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub dgp: Dgp,
    pub training_len: usize,
    pub horizon: usize,
    pub burn_in: usize,
}

impl DgpSpec {
    pub fn new(dgp: Dgp, training_len: usize, horizon: usize) -> Result<Self> {
        if training_len == 0 || horizon == 0 {
            return invalid("T and L must be positive");
        }
        Ok(Self {
            dgp,
            training_len,
            horizon,
            burn_in: DEFAULT_BURN_IN,
        })
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Generated length `T(1 + L)`.
    pub fn len(&self) -> usize {
        self.training_len * (1 + self.horizon)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPath {
    pub series: Series,
    /// Break time `V` for P1, P2, P3 and P5.
    pub change_point: Option<f64>,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Runs a recursion `burn_in + n` steps and keeps the last `n` outputs.
fn recursive<R, F>(n: usize, burn_in: usize, rng: &mut R, mut step: F) -> Vec<f64>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    for _ in 0..burn_in {
        step(rng);
    }
    (0..n).map(|_| step(rng)).collect()
}

fn garch<R: Rng + ?Sized>(n: usize, burn_in: usize, omega: f64, arch: f64, garch: f64, h0: f64, rng: &mut R) -> Vec<f64> {
    let (mut x, mut h2) = (0.0f64, h0);
    recursive(n, burn_in, rng, |r| {
        h2 = omega + arch * x * x + garch * h2;
        x = h2.sqrt() * normal(r);
        x
    })
}

/// One sample path of length `T(1 + L)`.
pub fn dgp_generate<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<GeneratedPath> {
    let n = spec.len();
    let big_t = spec.training_len;
    let burn = spec.burn_in;
    let change = |r: &mut R| big_t as f64 * (1.0 + r.random_range(0.0..0.8) * spec.horizon as f64);
    let mut change_point = None;
    let values: Vec<f64> = match spec.dgp {
        Dgp::S1 => (0..n).map(|_| normal(rng)).collect(),
        Dgp::S2 => {
            let mut x = 0.0;
            recursive(n, burn, rng, |r| {
                x = 0.5 * x + normal(r);
                x
            })
        }
        Dgp::S3 => garch(n, burn, 0.2, 0.3, 0.0, 0.2, rng),
        // Unconditional variance 0.1 / (1 − 0.6).
        Dgp::S4 => garch(n, burn, 0.1, 0.3, 0.3, 0.25, rng),
        // 0.7 + 0.3 = 1: no finite unconditional variance.
        Dgp::S5 => garch(n, burn, 0.1, 0.7, 0.3, 0.1, rng),
        Dgp::S6 => {
            let (mut x, mut beta) = (0.0f64, 0.0f64);
            recursive(n, burn, rng, |r| {
                beta = 0.5 * beta + 0.1 * normal(r);
                x = beta * x + normal(r);
                x
            })
        }
        Dgp::S7 => {
            let c = Cauchy::new(0.0, 1.0).expect("unit scale");
            (0..n).map(|_| c.sample(rng)).collect()
        }
        Dgp::P1 | Dgp::P2 | Dgp::P3 | Dgp::P5 => {
            let v = change(rng);
            change_point = Some(v);
            let xi = Stable::new(1.0, 0.25)?;
            (1..=n)
                .map(|t| {
                    let e = normal(rng);
                    let after = t as f64 > v;
                    match spec.dgp {
                        Dgp::P1 => e + if after { 1.0 } else { 0.0 },
                        Dgp::P2 => e * if after { 2.0 } else { 1.0 },
                        Dgp::P3 if after => e * e,
                        Dgp::P3 => 1.0 + std::f64::consts::SQRT_2 * e,
                        _ if after => xi.sample(rng),
                        _ => e,
                    }
                })
                .collect()
        }
        Dgp::P4 => {
            let span = (spec.horizon * big_t) as f64;
            (1..=n)
                .map(|t| {
                    let e = normal(rng);
                    if t <= big_t {
                        e
                    } else {
                        let r = (big_t as f64 - t as f64) / span;
                        e * (0.5 - (0.5 - r).abs()).exp()
                    }
                })
                .collect()
        }
    };
    Ok(GeneratedPath {
        series: Series::new(values, big_t)?,
        change_point,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub dgp: Dgp,
    pub training_len: usize,
    pub horizon: usize,
    pub m: usize,
    pub a: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub rejections: usize,
    pub rate: f64,
    /// Pooled critical value (warp-speed); absent for per-path calibration.
    pub critical_value: Option<f64>,
}

impl McResult {
    fn new(spec: &DgpSpec, config: &MonitorConfig, reps: usize, seed: u64, rejections: usize, critical_value: Option<f64>) -> Self {
        Self {
            dgp: spec.dgp,
            training_len: spec.training_len,
            horizon: spec.horizon,
            m: config.kernel.m(),
            a: config.kernel.a(),
            gamma: config.gamma,
            alpha: config.alpha,
            reps,
            seed,
            rejections,
            rate: rejections as f64 / reps as f64,
            critical_value,
        }
    }
}

fn check_mc(spec: &DgpSpec, config: &MonitorConfig, reps: usize) -> Result<()> {
    config.validate()?;
    if reps == 0 {
        return invalid("need at least one Monte Carlo repetition");
    }
    if spec.horizon != config.horizon {
        return invalid(format!("DGP horizon {} differs from monitor horizon {}", spec.horizon, config.horizon));
    }
    Ok(())
}

/// Observed maximum and one bootstrap replicate maximum for repetition `r`.
pub fn warp_speed_repetition(spec: &DgpSpec, config: &MonitorConfig, block: BlockParam, master_seed: u64, r: u64) -> Result<(f64, f64)> {
    let mut rng = stream_rng(master_seed, r);
    let path = dgp_generate(spec, &mut rng)?;
    let observed = max_detector(path.series.values(), spec.training_len, config)?;
    let training = path.series.training();
    let p_b = match block {
        BlockParam::Fixed(p) => p,
        BlockParam::Auto => crate::bootstrap::select_p_b(training)?.p_b,
    };
    let replicate = bootstrap_replicate_max(training, config, p_b, &mut rng)?;
    Ok((observed, replicate))
}

/// Warp-speed rejection rate: one bootstrap replicate per repetition, the
/// critical value being the pooled `⌈reps(1−α)⌉`-th replicate maximum.
pub fn warp_speed_mc(spec: &DgpSpec, config: &MonitorConfig, reps: usize, block: BlockParam, master_seed: u64) -> Result<McResult> {
    check_mc(spec, config, reps)?;
    let pairs = (0..reps as u64)
        .into_par_iter()
        .map(|r| warp_speed_repetition(spec, config, block, master_seed, r))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let mut replicates: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    replicates.sort_by(f64::total_cmp);
    let crit = upper_quantile(&replicates, config.alpha);
    let rejections = pairs.iter().filter(|p| p.0 > crit).count();
    Ok(McResult::new(spec, config, reps, master_seed, rejections, Some(crit)))
}

/// Rejection rate of the stopping rule when every path is calibrated from
/// its own training data through the Brownian limit.
pub fn asymptotic_mc(spec: &DgpSpec, config: &MonitorConfig, acfg: &AsymptoticConfig, reps: usize, master_seed: u64) -> Result<McResult> {
    check_mc(spec, config, reps)?;
    let alarms = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<bool> {
            let mut rng = stream_rng(master_seed, r);
            let path = dgp_generate(spec, &mut rng)?;
            let training = path.series.training();
            let cal = asymptotic_critical_value(
                training,
                config,
                &AsymptoticConfig {
                    seed: sub_seed(master_seed, r),
                    ..*acfg
                },
            )?;
            let acc = EcfAccumulator::new(training, config.kernel, config.variant)?;
            let res = run_monitor(acc, path.series.monitoring().iter().copied(), config, cal.c_hat)?;
            Ok(res.tau_hat.is_some())
        })
        .collect::<Result<Vec<bool>>>()?;
    let rejections = alarms.into_iter().filter(|&a| a).count();
    Ok(McResult::new(spec, config, reps, master_seed, rejections, None))
}
