//! Closed-form L2 distances between empirical characteristic functions.
//!
//! With `n0 = T - m + 1` training embeddings and `t` monitoring embeddings
//! `Υ_{T+1}, …, Υ_{T+t}`, write `TT`, `TN`, `NN` for the double sums of the
//! pair dissimilarity over training×training, training×new and new×new. Then
//!
//! ```text
//! cumulative:  D  = 2(TT+TN)/(n0·n) − TT/n0² − (TT+2TN+NN)/n²,  n = n0 + t
//! post-break:  D* = 2·TN/(n0·t)     − TT/n0² − NN/t²
//! ```
//!
//! For the Gaussian weight this is the usual three-term expression in the
//! similarity kernel `W`; for the energy weight it is the negated energy
//! statistic, so every variant is nonnegative and rejects for large values.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{KernelFamily, KernelSpec, Series};
use crate::sum::CompensatedSum;

pub mod quadrature;

pub use quadrature::d_quadrature_oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatVariant {
    /// Training ECF against the ECF of everything observed so far.
    Cumulative,
    /// Training ECF against the ECF of the post-training observations only.
    PostBreak,
    /// Energy-weight analogue of `Cumulative`, sign-flipped so that large
    /// values are significant.
    NegEnergy,
}

impl std::str::FromStr for StatVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cumulative" => Ok(StatVariant::Cumulative),
            "postbreak" | "post-break" => Ok(StatVariant::PostBreak),
            "negenergy" | "neg-energy" => Ok(StatVariant::NegEnergy),
            other => Err(format!("unknown statistic variant `{other}`")),
        }
    }
}

impl StatVariant {
    /// Checks that the variant is defined for the kernel family.
    pub fn check_kernel(self, kernel: &KernelSpec) -> Result<()> {
        match (self, kernel.family()) {
            (StatVariant::Cumulative, KernelFamily::Energy) => {
                invalid("cumulative variant needs the gaussian kernel; use negenergy for the energy weight")
            }
            (StatVariant::NegEnergy, KernelFamily::Gaussian) => {
                invalid("negenergy variant needs the energy kernel")
            }
            _ => Ok(()),
        }
    }
}

/// Combination of the three dissimilarity block sums into the statistic.
fn combine(variant: StatVariant, n0: usize, t: usize, tt: f64, tn: f64, nn: f64) -> f64 {
    let n0f = n0 as f64;
    match variant {
        StatVariant::Cumulative | StatVariant::NegEnergy => {
            let n = (n0 + t) as f64;
            2.0 * (tt + tn) / (n0f * n) - tt / (n0f * n0f) - (tt + 2.0 * tn + nn) / (n * n)
        }
        StatVariant::PostBreak => {
            if t == 0 {
                return 0.0;
            }
            let tf = t as f64;
            2.0 * tn / (n0f * tf) - tt / (n0f * n0f) - nn / (tf * tf)
        }
    }
}

fn block_sum(kernel: &KernelSpec, left: &[&[f64]], right: &[&[f64]]) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in left {
        for y in right {
            acc.add(kernel.dissimilarity(x, y));
        }
    }
    acc.value()
}

/// Distance between the training ECF and the ECF at monitoring step `t`,
/// evaluated from scratch over the first `T + t` observations.
pub fn d_batch(series: &Series, kernel: &KernelSpec, t: usize, variant: StatVariant) -> Result<f64> {
    variant.check_kernel(kernel)?;
    let m = kernel.m();
    let big_t = series.training_len();
    if big_t < m {
        return invalid(format!("training length {big_t} is shorter than m = {m}"));
    }
    if series.len() < big_t + t {
        return invalid(format!(
            "need {} observations for t = {t}, series has {}",
            big_t + t,
            series.len()
        ));
    }
    if variant == StatVariant::PostBreak && t == 0 {
        return invalid("post-break statistic needs t >= 1");
    }
    let values = &series.values()[..big_t + t];
    let all: Vec<&[f64]> = values.windows(m).collect();
    let n0 = big_t - m + 1;
    let (train, new) = all.split_at(n0);
    let tt = block_sum(kernel, train, train);
    let tn = block_sum(kernel, train, new);
    let nn = block_sum(kernel, new, new);
    Ok(kernel.weight_scale() * combine(variant, n0, t, tt, tn, nn))
}

/// Running pair sums for O(T + t) updates of the statistic per observation.
///
/// Single-writer: one owner pushes observations. Cloning gives an
/// independent snapshot.
#[derive(Debug, Clone)]
pub struct EcfAccumulator {
    kernel: KernelSpec,
    variant: StatVariant,
    /// Training observations followed by every pushed observation.
    values: Vec<f64>,
    training_len: usize,
    tt: f64,
    tn: CompensatedSum,
    nn: CompensatedSum,
    t: usize,
}

impl EcfAccumulator {
    pub fn new(training: &[f64], kernel: KernelSpec, variant: StatVariant) -> Result<Self> {
        variant.check_kernel(&kernel)?;
        let m = kernel.m();
        if training.len() < m {
            return invalid(format!(
                "training length {} is shorter than m = {m}",
                training.len()
            ));
        }
        if let Some(x) = training.iter().find(|x| !x.is_finite()) {
            return invalid(format!("non-finite training observation {x}"));
        }
        let emb: Vec<&[f64]> = training.windows(m).collect();
        // Symmetric: sum the strict upper triangle and double it.
        let mut upper = CompensatedSum::new();
        for (j, x) in emb.iter().enumerate() {
            for y in &emb[j + 1..] {
                upper.add(kernel.dissimilarity(x, y));
            }
        }
        Ok(Self {
            kernel,
            variant,
            values: training.to_vec(),
            training_len: training.len(),
            tt: 2.0 * upper.value(),
            tn: CompensatedSum::new(),
            nn: CompensatedSum::new(),
            t: 0,
        })
    }

    pub fn from_series(series: &Series, kernel: KernelSpec, variant: StatVariant) -> Result<Self> {
        Self::new(series.training(), kernel, variant)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn variant(&self) -> StatVariant {
        self.variant
    }

    pub fn training_len(&self) -> usize {
        self.training_len
    }

    /// Current monitoring index.
    pub fn t(&self) -> usize {
        self.t
    }

    fn n_train_emb(&self) -> usize {
        self.training_len - self.kernel.m() + 1
    }

    /// The last `m - 1` observations, from which the next embedding is formed.
    pub fn lag_window(&self) -> &[f64] {
        let m = self.kernel.m();
        &self.values[self.values.len() + 1 - m..]
    }

    /// Converts a dissimilarity block sum over `count` pairs into the sum of
    /// the family's pair kernel.
    fn kernel_sum(&self, dissim: f64, count: usize) -> f64 {
        let s = match self.kernel.family() {
            KernelFamily::Gaussian => count as f64 * self.kernel.peak() - dissim,
            KernelFamily::Energy => dissim,
        };
        self.kernel.weight_scale() * s
    }

    /// Σ W over training × training embeddings.
    pub fn s_tt(&self) -> f64 {
        let n0 = self.n_train_emb();
        self.kernel_sum(self.tt, n0 * n0)
    }

    /// Σ W over all embeddings observed so far.
    pub fn s_full(&self) -> f64 {
        let n = self.n_train_emb() + self.t;
        self.kernel_sum(self.tt + 2.0 * self.tn.value() + self.nn.value(), n * n)
    }

    /// Σ W over training × all embeddings.
    pub fn s_cross(&self) -> f64 {
        let n0 = self.n_train_emb();
        self.kernel_sum(self.tt + self.tn.value(), n0 * (n0 + self.t))
    }

    /// Statistic at the current `t` (zero at `t = 0`).
    pub fn statistic(&self) -> f64 {
        self.kernel.weight_scale()
            * combine(
                self.variant,
                self.n_train_emb(),
                self.t,
                self.tt,
                self.tn.value(),
                self.nn.value(),
            )
    }

    /// Appends one observation and returns the statistic at the new `t`.
    pub fn push(&mut self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite observation at t = {}: {x}",
                self.t + 1
            )));
        }
        self.values.push(x);
        let m = self.kernel.m();
        let n0 = self.n_train_emb();
        let newest = &self.values[self.values.len() - m..];
        let mut row_train = CompensatedSum::new();
        let mut row_new = CompensatedSum::new();
        for (j, emb) in self.values[..self.values.len() - 1].windows(m).enumerate() {
            let d = self.kernel.dissimilarity(emb, newest);
            if j < n0 {
                row_train.add(d);
            } else {
                row_new.add(d);
            }
        }
        self.tn.add(row_train.value());
        self.nn.add(2.0 * row_new.value());
        self.t += 1;
        Ok(self.statistic())
    }
}
