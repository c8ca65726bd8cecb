//! Chambers–Mallows–Stuck sampling of stable laws in the parameterization
//! with characteristic function
//!
//! ```text
//! α ≠ 1:  exp{−|t|^α (1 − iβ sgn(t) tan(πα/2))}
//! α = 1:  exp{−|t| (1 + iβ (2/π) sgn(t) log|t|)}
//! ```
//!
//! (unit scale, zero location). The innovation sequence
//! `exp{−|t|(1 + 0.5i sgn(t) log|t|/π)}` is therefore `α = 1, β = 0.25`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stable {
    alpha: f64,
    beta: f64,
}

impl Stable {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return invalid(format!("stability index must lie in (0, 2], got {alpha}"));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return invalid(format!("skewness must lie in [-1, 1], got {beta}"));
        }
        Ok(Self { alpha, beta })
    }
}

impl Distribution<f64> for Stable {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // V uniform on the open interval (−π/2, π/2).
        let v = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break PI * (u - 0.5);
            }
        };
        let w: f64 = Exp1.sample(rng);
        let (a, b) = (self.alpha, self.beta);
        if a == 1.0 {
            let shifted = FRAC_PI_2 + b * v;
            (shifted * v.tan() - b * (FRAC_PI_2 * w * v.cos() / shifted).ln()) / FRAC_PI_2
        } else {
            let zeta = b * (PI * a / 2.0).tan();
            let shift = zeta.atan() / a;
            let scale = (1.0 + zeta * zeta).powf(1.0 / (2.0 * a));
            let av = a * (v + shift);
            scale * av.sin() / v.cos().powf(1.0 / a) * ((v - av).cos() / w).powf((1.0 - a) / a)
        }
    }
}
