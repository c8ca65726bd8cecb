use ecfmon::asymptotic::{brownian_sup_critical, integrate_sigma_w, sigma_hat, BrownianSettings, LongRunCov, Mat2};
use ecfmon::KernelSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    (0..n + 500)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = phi * x + e;
            x
        })
        .skip(500)
        .collect()
}

#[test]
fn long_run_variance_of_cosine_for_ar1() {
    // Batch-means oracle on an independent long path.
    let u = 1.0;
    let long = ar1(4_000_000, 0.5, 1);
    let mean = long.iter().map(|x| (u * x).cos()).sum::<f64>() / long.len() as f64;
    let batch = 4000;
    let means: Vec<f64> = long
        .chunks(batch)
        .map(|c| c.iter().map(|x| (u * x).cos()).sum::<f64>() / batch as f64)
        .collect();
    let oracle = batch as f64 * means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (means.len() - 1) as f64;

    let training = ar1(200_000, 0.5, 2);
    let s = sigma_hat(&training, 1, &[u], 59).unwrap();
    assert!((s[0][0] - oracle).abs() < 0.1 * oracle, "estimate {} vs oracle {oracle}", s[0][0]);
    assert!(s[0][1].abs() < 0.1 * oracle, "cos/sin cross term {}", s[0][1]);
}

#[test]
fn weighted_integral_matches_grid_quadrature() {
    let training = ar1(400, 0.3, 3);
    let a = 1.0;
    let kernel = KernelSpec::gaussian(a, 1).unwrap();
    let mc = integrate_sigma_w(&training, &kernel, 40_000, 5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();

    let cov = LongRunCov::new(&training, 1, 5).unwrap();
    let h = 0.005;
    let mut grid = [[0.0; 2]; 2];
    let mut u = -7.0;
    while u <= 7.0 {
        let s = cov.at(&[u]);
        let w = (-a * u * u).exp() * h;
        for r in 0..2 {
            for c in 0..2 {
                grid[r][c] += w * s[r][c];
            }
        }
        u += h;
    }
    for (r, c) in [(0, 0), (1, 1)] {
        let rel = (mc[r][c] - grid[r][c]).abs() / grid[r][c];
        assert!(rel < 0.03, "entry ({r},{c}): {} vs {}", mc[r][c], grid[r][c]);
    }
    let scale = grid[0][0] + grid[1][1];
    assert!((mc[0][1] - grid[0][1]).abs() < 0.03 * scale);
}

fn settings(n_grid: usize) -> BrownianSettings {
    BrownianSettings { n_paths: 4000, n_grid }
}

#[test]
fn critical_value_monotone_in_alpha_and_horizon() {
    let m: Mat2 = [[1.2, 0.3], [0.3, 0.7]];
    let c01 = brownian_sup_critical(&m, 0.0, 1, 0.0, 0.01, settings(1025), 8).unwrap();
    let c05 = brownian_sup_critical(&m, 0.0, 1, 0.0, 0.05, settings(1025), 8).unwrap();
    let c10 = brownian_sup_critical(&m, 0.0, 1, 0.0, 0.10, settings(1025), 8).unwrap();
    assert!(c01 > c05 && c05 > c10, "{c01} {c05} {c10}");
    // Grids with equal spacing share their leading increments, so the longer
    // horizon takes a supremum over a superset of the same path.
    let l3 = brownian_sup_critical(&m, 0.0, 3, 0.0, 0.05, settings(1537), 8).unwrap();
    assert!(l3 >= c05, "{l3} < {c05}");
}

#[test]
fn critical_value_linear_in_covariance_scale() {
    let m: Mat2 = [[0.9, -0.2], [-0.2, 0.4]];
    let k = 3.7;
    let scaled: Mat2 = [[k * 0.9, k * -0.2], [k * -0.2, k * 0.4]];
    for gamma in [0.0, 0.25] {
        let eta = if gamma > 0.0 { 0.05 } else { 0.0 };
        let c = brownian_sup_critical(&m, gamma, 2, eta, 0.05, settings(512), 21).unwrap();
        let ck = brownian_sup_critical(&scaled, gamma, 2, eta, 0.05, settings(512), 21).unwrap();
        assert!((ck - k * c).abs() < 1e-12 * ck, "{ck} vs {}", k * c);
    }
}

#[test]
fn rank_one_case_matches_reflection_principle() {
    // M = diag(1, 0), L = 1: sup of B₁² over [0, 1/2] is half of sup W² on
    // [0, 1], whose 95% point is 2.2414027² (two-sided Kolmogorov series).
    let m: Mat2 = [[1.0, 0.0], [0.0, 0.0]];
    let c = brownian_sup_critical(&m, 0.0, 1, 0.0, 0.05, BrownianSettings::default(), 5).unwrap();
    let exact = 0.5 * 2.241_402_727_332_141f64.powi(2);
    assert!((c - exact).abs() < 0.04 * exact, "{c} vs {exact}");
}
