//! Delay embedding and the closed-form pair kernels induced by the weight
//! function of the characteristic-function distance.
//!
//! For a weight `w` the squared L2 distance between two empirical
//! characteristic functions reduces to double sums of a pair kernel
//! `W(x) = ∫ cos(u'x) w(u) du` evaluated at differences of embedded vectors.
//!
//! * Gaussian weight `w(u) = exp(-a‖u‖²)`: `W(x) = (π/a)^{m/2} exp(-‖x‖²/(4a))`.
//! * Energy weight `w(u) = ‖u‖^{-(m+a)}`, `0 < a < 2`: the "negative type"
//!   kernel `W̃(x) = ∫ (1 - cos(u'x)) w(u) du = C̃‖x‖^a`, with `C̃` fixed to 1.
//!
//! Internally all statistics are accumulated from the pair *dissimilarity*
//! `δ(x) = W(0) - W(x)` (Gaussian) or `δ(x) = W̃(x)` (energy). Both vanish at
//! `x = 0`, so a sample whose embeddings are all identical produces an exactly
//! zero statistic, and the three-term combination of double sums loses less
//! precision to cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Ordered finite observations with a designated training prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    values: Vec<f64>,
    training_len: usize,
}

impl Series {
    pub fn new(values: Vec<f64>, training_len: usize) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("observation {} is not finite ({})", i + 1, values[i]));
        }
        if training_len == 0 || training_len > values.len() {
            return invalid(format!(
                "training length {} outside 1..={}",
                training_len,
                values.len()
            ));
        }
        Ok(Self {
            values,
            training_len,
        })
    }

    /// Series whose every observation is training data.
    pub fn training_only(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, n)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn training_len(&self) -> usize {
        self.training_len
    }

    pub fn training(&self) -> &[f64] {
        &self.values[..self.training_len]
    }

    /// Observations after the training prefix.
    pub fn monitoring(&self) -> &[f64] {
        &self.values[self.training_len..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingDim(usize);

impl EmbeddingDim {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return invalid("embedding dimension must be at least 1");
        }
        Ok(Self(m))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Delay vectors `(X_{t-m+1}, …, X_t)` for `t = m..n`, as windows into `values`.
pub fn embed(values: &[f64], m: EmbeddingDim) -> Result<Vec<&[f64]>> {
    let m = m.get();
    if m > values.len() {
        return invalid(format!(
            "embedding dimension {} exceeds series length {}",
            m,
            values.len()
        ));
    }
    Ok(values.windows(m).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Energy,
}

impl std::str::FromStr for KernelFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "energy" => Ok(KernelFamily::Energy),
            other => Err(format!("unknown kernel family `{other}`")),
        }
    }
}

/// Weight family, its parameter `a`, the embedding dimension and a positive
/// multiplier on the weight function (1 unless deliberately rescaled).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    a: f64,
    m: EmbeddingDim,
    weight_scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, a: f64, m: EmbeddingDim) -> Result<Self> {
        match family {
            KernelFamily::Gaussian if !(a > 0.0 && a.is_finite()) => {
                invalid(format!("gaussian bandwidth must be positive, got {a}"))
            }
            KernelFamily::Energy if !(a > 0.0 && a < 2.0) => {
                invalid(format!("energy exponent must lie in (0, 2), got {a}"))
            }
            _ => Ok(Self {
                family,
                a,
                m,
                weight_scale: 1.0,
            }),
        }
    }

    pub fn gaussian(a: f64, m: usize) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, a, EmbeddingDim::new(m)?)
    }

    pub fn energy(a: f64, m: usize) -> Result<Self> {
        Self::new(KernelFamily::Energy, a, EmbeddingDim::new(m)?)
    }

    /// Multiply the weight function by `scale > 0`.
    pub fn with_weight_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return invalid(format!("weight scale must be positive, got {scale}"));
        }
        self.weight_scale = scale;
        Ok(self)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn m(&self) -> usize {
        self.m.get()
    }

    pub fn dim(&self) -> EmbeddingDim {
        self.m
    }

    pub fn weight_scale(&self) -> f64 {
        self.weight_scale
    }

    /// `W(0)` for the Gaussian family (unscaled); zero for the energy family.
    pub fn peak(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (std::f64::consts::PI / self.a).powf(self.m() as f64 / 2.0),
            KernelFamily::Energy => 0.0,
        }
    }

    /// Pair kernel of the family at difference vector `x`, including the
    /// weight scale.
    pub fn pair_kernel(&self, x: &[f64]) -> f64 {
        let k = match self.family {
            KernelFamily::Gaussian => gaussian_pair_kernel(x, self.a),
            KernelFamily::Energy => energy_pair_kernel(x, self.a),
        };
        self.weight_scale * k
    }

    /// Unscaled dissimilarity between two embedded vectors.
    #[inline]
    pub fn dissimilarity(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        match self.family {
            KernelFamily::Gaussian => -self.peak() * (-d2 / (4.0 * self.a)).exp_m1(),
            KernelFamily::Energy => d2.powf(self.a / 2.0),
        }
    }
}

/// `(π/a)^{m/2} exp(-‖x‖²/(4a))` where `m = x.len()`.
pub fn gaussian_pair_kernel(x: &[f64], a: f64) -> f64 {
    debug_assert!(a > 0.0);
    let d2: f64 = x.iter().map(|v| v * v).sum();
    (std::f64::consts::PI / a).powf(x.len() as f64 / 2.0) * (-d2 / (4.0 * a)).exp()
}

/// `‖x‖^a` (the energy kernel with unit constant).
pub fn energy_pair_kernel(x: &[f64], a: f64) -> f64 {
    debug_assert!(a > 0.0 && a < 2.0);
    let d2: f64 = x.iter().map(|v| v * v).sum();
    d2.powf(a / 2.0)
}
