//! Randomized checks of the regression stage at small dimensions.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tsfactor::regress::{iv_fit, ols_fit, residuals, sieve_fit, IvConfig, SieveBasis};
use tsfactor::Panel;

const TOL: f64 = 1e-8;

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Least squares through nalgebra's SVD, independent of the crate's Cholesky path.
fn svd_oracle(y: &Array2<f64>, z: &Array2<f64>) -> Array2<f64> {
    let zt = DMatrix::from_fn(z.ncols(), z.nrows(), |i, j| z[[j, i]]);
    let yt = DMatrix::from_fn(y.ncols(), y.nrows(), |i, j| y[[j, i]]);
    let sol = zt.svd(true, true).solve(&yt, 1e-14).unwrap();
    Array2::from_shape_fn((y.nrows(), z.nrows()), |(i, j)| sol[(j, i)])
}

fn case() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=10, 1usize..=3, 15usize..=80, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ols_recovers_exact_coefficients((p, m, t, seed) in case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = normal_matrix(&mut rng, m, t);
        let d = normal_matrix(&mut rng, p, m);
        let y = Panel::new(d.dot(&z)).unwrap();
        let d_hat = ols_fit(&y, &Panel::new(z).unwrap(), 0.0).unwrap();
        prop_assert!(max_abs_diff(&d_hat, &d) <= TOL);
    }

    #[test]
    fn ols_matches_svd_least_squares((p, m, t, seed) in case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = normal_matrix(&mut rng, m, t);
        let y = normal_matrix(&mut rng, p, t);
        let d_hat = ols_fit(&Panel::new(y.clone()).unwrap(), &Panel::new(z.clone()).unwrap(), 0.0).unwrap();
        prop_assert!(max_abs_diff(&d_hat, &svd_oracle(&y, &z)) <= TOL);
    }

    #[test]
    fn iv_with_own_instruments_is_ols((p, m, t, seed) in case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Panel::new(normal_matrix(&mut rng, m, t)).unwrap();
        let y = Panel::new(normal_matrix(&mut rng, p, t)).unwrap();
        let iv = iv_fit(&y, &z, &z, &IvConfig::default()).unwrap();
        let ols = ols_fit(&y, &z, 0.0).unwrap();
        prop_assert!(max_abs_diff(&iv, &ols) <= 1e-10);
    }

    #[test]
    fn residuals_orthogonal_to_regressors((p, m, t, seed) in case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Panel::new(normal_matrix(&mut rng, m, t)).unwrap();
        let y = Panel::new(normal_matrix(&mut rng, p, t) * 3.0).unwrap();
        let d_hat = ols_fit(&y, &z, 0.0).unwrap();
        let eta = residuals(&y, &z, d_hat.view()).unwrap();
        let cross = eta.data().dot(&z.data().t()) / t as f64;
        let scale = y.data().iter().fold(0.0f64, |a, v| a.max(v.abs()))
            * z.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let worst = cross.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        prop_assert!(worst <= TOL * scale);
    }

    #[test]
    fn sieve_recovers_polynomials_in_span(
        (p, _, t, seed) in case(),
        m in 1usize..=4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Array1<f64> = Array1::from_shape_fn(t, |_| rng.gen_range(-1.5..1.5));
        let coefs = normal_matrix(&mut rng, p, m);
        // y_i(u) = sum_j c_ij u^(j-1), evaluated directly
        let y = Array2::from_shape_fn((p, t), |(i, k)| {
            (0..m).map(|j| coefs[[i, j]] * u[k].powi(j as i32)).sum::<f64>()
        });
        let u_panel = Panel::new(u.insert_axis(ndarray::Axis(0))).unwrap();
        let (d_hat, _) = sieve_fit(&Panel::new(y).unwrap(), &u_panel, &SieveBasis::polynomial(m), 0.0).unwrap();
        prop_assert!(max_abs_diff(&d_hat, &coefs) <= TOL);
    }

    #[test]
    fn sieve_residuals_shrink_with_order((p, _, t, seed) in case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Array1<f64> = Array1::from_shape_fn(t, |_| rng.gen_range(-1.0..1.0));
        let coefs = normal_matrix(&mut rng, p, 6);
        let y = Panel::new(Array2::from_shape_fn((p, t), |(i, k)| {
            (0..6).map(|j| coefs[[i, j]] * u[k].powi(j as i32)).sum::<f64>()
        }))
        .unwrap();
        let u_panel = Panel::new(u.insert_axis(ndarray::Axis(0))).unwrap();
        let mut last = f64::INFINITY;
        for m in 1..=6 {
            let (d, z) = sieve_fit(&y, &u_panel, &SieveBasis::polynomial(m), 0.0).unwrap();
            let eta = residuals(&y, &z, d.view()).unwrap();
            let rss: f64 = eta.data().iter().map(|v| v * v).sum();
            prop_assert!(rss <= last * (1.0 + 1e-9) + 1e-12);
            last = rss;
        }
        prop_assert!(last <= 1e-12 * t as f64 * p as f64 * (1.0 + coefs.iter().map(|c| c * c).sum::<f64>()));
    }
}
