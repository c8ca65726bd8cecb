//! Direct numerical integration of `∫ |ψ̂_A(u) − ψ̂_B(u)|² exp(−a‖u‖²) du`.
//!
//! This path never touches the closed-form pair kernel: it evaluates both
//! empirical characteristic functions at Gauss–Hermite nodes (tensor grid for
//! `m = 2`) and sums the squared modulus of their difference. It exists to
//! check [`super::d_batch`] and is only meant for small samples.

use crate::error::{invalid, Error, Result};
use crate::kernel::{KernelFamily, KernelSpec, Series};

use super::StatVariant;

/// Gauss–Hermite nodes and weights for `∫ f(x) exp(−x²) dx`, `n` points.
///
/// Golub–Welsch: the nodes are the eigenvalues of the symmetric tridiagonal
/// Jacobi matrix (zero diagonal, off-diagonal `√(k/2)`), and each weight is
/// `√π` times the squared first component of the matching unit eigenvector.
/// Eigenpairs come from implicit-shift QL iterations that only track the
/// first eigenvector row.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0f64; n];
    // e[i] couples rows i and i + 1.
    let mut e: Vec<f64> = (1..=n).map(|k| if k < n { (k as f64 / 2.0).sqrt() } else { 0.0 }).collect();
    let mut z = vec![0.0; n];
    if n > 0 {
        z[0] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            assert!(iter < 200, "QL iteration failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = mm;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(z).map(|(x, v)| (x, sqrt_pi * v * v)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Mean of `exp(i u'y)` over the given vectors, as (re, im).
fn ecf(points: &[&[f64]], u: &[f64]) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for p in points {
        let arg: f64 = p.iter().zip(u).map(|(a, b)| a * b).sum();
        re += arg.cos();
        im += arg.sin();
    }
    let n = points.len() as f64;
    (re / n, im / n)
}

/// Number of Hermite nodes per axis for integrands oscillating up to
/// angular frequency `omega` against `exp(−x²)`.
fn node_count(omega: f64) -> usize {
    ((0.5 * omega * omega + 2.0 * omega + 40.0).ceil() as usize).clamp(40, 300)
}

/// The ECF distance by direct integration. Gaussian weight, `m ∈ {1, 2}`,
/// cumulative or post-break comparison.
pub fn d_quadrature_oracle(
    series: &Series,
    kernel: &KernelSpec,
    t: usize,
    variant: StatVariant,
) -> Result<f64> {
    let m = kernel.m();
    if kernel.family() != KernelFamily::Gaussian {
        return Err(Error::NotSupported("quadrature oracle needs the gaussian weight".into()));
    }
    if m > 2 {
        return Err(Error::NotSupported(format!("quadrature oracle supports m <= 2, got {m}")));
    }
    if variant == StatVariant::NegEnergy {
        return Err(Error::NotSupported("quadrature oracle does not cover negenergy".into()));
    }
    let big_t = series.training_len();
    if big_t < m || series.len() < big_t + t {
        return invalid("insufficient data for the requested t");
    }
    if variant == StatVariant::PostBreak && t == 0 {
        return invalid("post-break statistic needs t >= 1");
    }
    let values = &series.values()[..big_t + t];
    let all: Vec<&[f64]> = values.windows(m).collect();
    let n0 = big_t - m + 1;
    let reference = &all[..n0];
    let other = match variant {
        StatVariant::PostBreak => &all[n0..],
        _ => &all[..],
    };

    let a = kernel.a();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let omega = (hi - lo) / a.sqrt();
    let (nodes, weights) = gauss_hermite(node_count(omega));
    let scale = 1.0 / a.sqrt();

    let integrand = |u: &[f64]| {
        let (r1, i1) = ecf(reference, u);
        let (r2, i2) = ecf(other, u);
        (r1 - r2).powi(2) + (i1 - i2).powi(2)
    };

    let mut total = 0.0;
    match m {
        1 => {
            for (x, w) in nodes.iter().zip(&weights) {
                total += w * integrand(&[x * scale]);
            }
            total *= scale;
        }
        _ => {
            for (x, wx) in nodes.iter().zip(&weights) {
                for (y, wy) in nodes.iter().zip(&weights) {
                    total += wx * wy * integrand(&[x * scale, y * scale]);
                }
            }
            total *= scale * scale;
        }
    }
    Ok(kernel.weight_scale() * total)
}
