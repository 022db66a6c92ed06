//! Regression-coefficient estimators for the observed part of the model:
//! least squares, instrumental variables and polynomial sieve regression.
//!
//! All moment matrices use the `1/T` scaling. No intercept is added; callers
//! that need one include a constant row in `z`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::numerics::{inverse_condition, solve_gram, solve_general};
use crate::panel::Panel;

const BASIS_LIMIT: f64 = 1e12;
const RANK_TOL: f64 = 1e-10;

fn check_same_length(a: &Panel, b: &Panel, what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: T = {} vs T = {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Least-squares estimate of `D` in `y_t = D z_t + noise`, shape `p x m`.
pub fn ols_fit(y: &Panel, z: &Panel, ridge: f64) -> Result<Array2<f64>> {
    check_same_length(y, z, "ols_fit")?;
    let (m, t) = (z.dim(), z.len());
    if m >= t {
        return Err(Error::InvalidArgument(format!(
            "need fewer regressors than time points (m = {m}, T = {t})"
        )));
    }
    let scale = 1.0 / t as f64;
    let zd = z.data();
    let gram = zd.dot(&zd.t()) * scale;
    let cross = zd.dot(&y.data().t()) * scale;
    let coef = solve_gram(gram.view(), cross.view(), ridge)?;
    Ok(coef.reversed_axes())
}

/// Instrument configuration: mixing matrix `R` (`m x q`) and an optional ridge.
#[derive(Debug, Clone, Default)]
pub struct IvConfig {
    /// `None` means the identity, which requires `q = m`.
    pub r_matrix: Option<Array2<f64>>,
    pub ridge: f64,
}

impl IvConfig {
    pub fn with_r_matrix(r_matrix: Array2<f64>) -> Result<Self> {
        let cfg = IvConfig {
            r_matrix: Some(r_matrix),
            ridge: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if let Some(r) = &self.r_matrix {
            let (m, q) = r.dim();
            if m == 0 || m > q {
                return Err(Error::InvalidArgument(format!(
                    "mixing matrix must be m x q with 1 <= m <= q, got {m} x {q}"
                )));
            }
            let ratio = inverse_condition(r.view());
            if !(ratio > RANK_TOL) {
                return Err(Error::RankDeficientMixing { ratio });
            }
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::InvalidArgument("ridge must be nonnegative".into()));
        }
        Ok(())
    }

    fn resolve(&self, m: usize, q: usize) -> Result<Array2<f64>> {
        self.validate()?;
        match &self.r_matrix {
            Some(r) if r.dim() == (m, q) => Ok(r.clone()),
            Some(r) => Err(Error::ShapeMismatch(format!(
                "mixing matrix is {:?}, expected {m} x {q}",
                r.dim()
            ))),
            None if m == q => Ok(Array2::eye(m)),
            None => Err(Error::InvalidArgument(format!(
                "identity mixing needs q = m (m = {m}, q = {q}); supply an m x q matrix"
            ))),
        }
    }
}

/// Instrumental-variables estimate
/// `D = (Σ y_t w_t' R'/T) (Σ z_t w_t' R'/T)^{-1}`.
pub fn iv_fit(y: &Panel, z: &Panel, w: &Panel, cfg: &IvConfig) -> Result<Array2<f64>> {
    check_same_length(y, z, "iv_fit")?;
    check_same_length(y, w, "iv_fit")?;
    let (m, q) = (z.dim(), w.dim());
    if q < m {
        return Err(Error::InvalidArgument(format!(
            "need at least as many instruments as regressors (q = {q}, m = {m})"
        )));
    }
    let mix = cfg.resolve(m, q)?;
    let scale = 1.0 / y.len() as f64;
    let wr = w.data().t().dot(&mix.t()); // T x m
    let mut zw = z.data().dot(&wr) * scale; // m x m
    if cfg.ridge > 0.0 {
        zw += &(Array2::<f64>::eye(m) * cfg.ridge);
    }
    let yw = y.data().dot(&wr) * scale; // p x m
    let ratio = inverse_condition(zw.view());
    if !(ratio >= RANK_TOL) {
        return Err(Error::SingularCrossMoment { ratio });
    }
    // D zw = yw  <=>  zw' D' = yw'
    let dt = solve_general(zw.t(), yw.t())?;
    Ok(dt.reversed_axes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// `l_j(u) = u^(j-1)` for scalar `u`.
    Polynomial,
}

/// A finite set of basis functions `l_1..l_m` on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SieveBasis {
    pub kind: BasisKind,
    pub m: usize,
    pub input_dim: usize,
}

impl SieveBasis {
    pub fn polynomial(m: usize) -> Self {
        SieveBasis {
            kind: BasisKind::Polynomial,
            m,
            input_dim: 1,
        }
    }

    fn check(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("basis needs m >= 1".into()));
        }
        match self.kind {
            BasisKind::Polynomial if self.input_dim == 1 => Ok(()),
            BasisKind::Polynomial => Err(Error::UnsupportedBasis(format!(
                "polynomial basis is univariate, got input dimension {}",
                self.input_dim
            ))),
        }
    }

    /// Values `(l_1(u), ..., l_m(u))`.
    pub fn eval(&self, u: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check()?;
        if u.len() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "basis input dimension {} but point has {}",
                self.input_dim,
                u.len()
            )));
        }
        let x = u[0];
        let mut out = Array1::zeros(self.m);
        let mut v: f64 = 1.0;
        for j in 0..self.m {
            if !(v.abs() <= BASIS_LIMIT) {
                return Err(Error::BasisOverflow { value: v });
            }
            out[j] = v;
            v *= x;
        }
        Ok(out)
    }

    /// The `m x T` regressor panel `l_j(u_t)`.
    pub fn design(&self, u: &Panel) -> Result<Panel> {
        self.check()?;
        if u.dim() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "basis input dimension {} but u has {} rows",
                self.input_dim,
                u.dim()
            )));
        }
        let mut z = Array2::zeros((self.m, u.len()));
        for (t, col) in u.data().columns().into_iter().enumerate() {
            z.column_mut(t).assign(&self.eval(col)?);
        }
        let mut panel = Panel::new(z)?;
        if let Some(tl) = u.time_labels() {
            panel = panel.with_time_labels(tl.to_vec())?;
        }
        Ok(panel)
    }
}

/// Default sieve order `floor(2 T^{1/5})`; also the default lag count for sieve fits.
pub fn default_sieve_order(t_len: usize) -> usize {
    let v = 2.0 * (t_len as f64).powf(0.2);
    ((v + 1e-9).floor() as usize).max(1)
}

/// Sieve least squares: build `z_t = l(u_t)` and regress `y` on it.
/// Returns the coefficients and the constructed regressor panel.
pub fn sieve_fit(y: &Panel, u: &Panel, basis: &SieveBasis, ridge: f64) -> Result<(Array2<f64>, Panel)> {
    check_same_length(y, u, "sieve_fit")?;
    if basis.m >= y.len() {
        return Err(Error::InvalidArgument(format!(
            "basis size m = {} must be below T = {}",
            basis.m,
            y.len()
        )));
    }
    let z = basis.design(u)?;
    let d = ols_fit(y, &z, ridge)?;
    Ok((d, z))
}

/// Fitted regression function `D l(u)` at one point.
pub fn eval_g(d_hat: ArrayView2<f64>, basis: &SieveBasis, u_point: ArrayView1<f64>) -> Result<Array1<f64>> {
    if d_hat.ncols() != basis.m {
        return Err(Error::ShapeMismatch(format!(
            "coefficients have {} columns, basis has {} functions",
            d_hat.ncols(),
            basis.m
        )));
    }
    Ok(d_hat.dot(&basis.eval(u_point)?))
}

/// `eta_t = y_t - D z_t`.
pub fn residuals(y: &Panel, z: &Panel, d_hat: ArrayView2<f64>) -> Result<Panel> {
    check_same_length(y, z, "residuals")?;
    if d_hat.dim() != (y.dim(), z.dim()) {
        return Err(Error::ShapeMismatch(format!(
            "coefficients are {:?}, expected ({}, {})",
            d_hat.dim(),
            y.dim(),
            z.dim()
        )));
    }
    let eta = y.data() - &d_hat.dot(z.data());
    y.map_data(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn panel(a: Array2<f64>) -> Panel {
        Panel::new(a).unwrap()
    }

    #[test]
    fn ols_scalar_cases() {
        let z = panel(array![[1.0, 2.0, 3.0]]);
        let d = ols_fit(&panel(array![[2.0, 4.0, 6.0]]), &z, 0.0).unwrap();
        assert_abs_diff_eq!(d, array![[2.0]], epsilon = 1e-14);
        // Σzy / Σz² = (1 + 4 + 12) / 14
        let d = ols_fit(&panel(array![[1.0, 2.0, 4.0]]), &z, 0.0).unwrap();
        assert_abs_diff_eq!(d[[0, 0]], 17.0 / 14.0, epsilon = 1e-14);
        let d = ols_fit(&panel(Array2::zeros((3, 3))), &z, 0.0).unwrap();
        assert_eq!(d, Array2::<f64>::zeros((3, 1)));
    }

    #[test]
    fn ols_collinear_regressors() {
        let z = panel(array![[1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0]]);
        let y = panel(array![[1.0, 0.0, 1.0, 0.0]]);
        assert!(matches!(ols_fit(&y, &z, 0.0), Err(Error::SingularGram { .. })));
        assert!(ols_fit(&y, &z, 0.1).is_ok());
    }

    #[test]
    fn iv_scalar_cases() {
        let z = panel(array![[1.0, 2.0, 3.0]]);
        let w = panel(array![[1.0, 1.0, 1.0]]);
        let y = panel(array![[2.0, 4.0, 6.0]]);
        // Σy / Σz = 12 / 6
        let d = iv_fit(&y, &z, &w, &IvConfig::default()).unwrap();
        assert_abs_diff_eq!(d, array![[2.0]], epsilon = 1e-14);
        let d0 = iv_fit(&panel(Array2::zeros((2, 3))), &z, &w, &IvConfig::default()).unwrap();
        assert_eq!(d0, Array2::<f64>::zeros((2, 1)));
        let same = iv_fit(&y, &z, &z, &IvConfig::default()).unwrap();
        assert_abs_diff_eq!(same, ols_fit(&y, &z, 0.0).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn iv_weak_instrument_and_bad_mixing() {
        let z = panel(array![[1.0, 2.0, 3.0]]);
        let w = panel(array![[1.0, -2.0, 1.0]]); // orthogonal to z
        let y = panel(array![[2.0, 4.0, 6.0]]);
        assert!(matches!(
            iv_fit(&y, &z, &w, &IvConfig::default()),
            Err(Error::SingularCrossMoment { .. })
        ));
        assert!(matches!(
            IvConfig::with_r_matrix(array![[1.0, 1.0], [1.0, 1.0]]),
            Err(Error::RankDeficientMixing { .. })
        ));
        let w2 = panel(array![[1.0, 1.0, 1.0], [0.0, 1.0, 0.0]]);
        assert!(iv_fit(&y, &z, &w2, &IvConfig::default()).is_err());
        let cfg = IvConfig::with_r_matrix(array![[1.0, 0.0]]).unwrap();
        let d = iv_fit(&y, &z, &w2, &cfg).unwrap();
        assert_abs_diff_eq!(d, array![[2.0]], epsilon = 1e-14);
    }

    #[test]
    fn sieve_recovers_affine_function() {
        let u = panel(array![[-1.5, -0.3, 0.2, 0.9, 1.4, 2.0, -0.7]]);
        let y = panel(u.data().mapv(|x| 3.0 + 2.0 * x));
        let (d, z) = sieve_fit(&y, &u, &SieveBasis::polynomial(3), 0.0).unwrap();
        assert_eq!(z.dim(), 3);
        assert_abs_diff_eq!(d, array![[3.0, 2.0, 0.0]], epsilon = 1e-8);
    }

    #[test]
    fn sieve_constant_basis_gives_means() {
        let u = panel(array![[0.1, 0.5, -0.2, 0.3]]);
        let y = panel(array![[1.0, 2.0, 3.0, 6.0], [-1.0, 1.0, 0.0, 4.0]]);
        let (d, _) = sieve_fit(&y, &u, &SieveBasis::polynomial(1), 0.0).unwrap();
        assert_abs_diff_eq!(d, array![[3.0], [1.0]], epsilon = 1e-12);
    }

    #[test]
    fn sieve_three_point_projection() {
        // normal equations for u² on (1, u) over u = -1, 0, 1: a = 2/3, b = 0
        let u = panel(array![[-1.0, 0.0, 1.0]]);
        let y = panel(array![[1.0, 0.0, 1.0]]);
        let (d, _) = sieve_fit(&y, &u, &SieveBasis::polynomial(2), 0.0).unwrap();
        assert_abs_diff_eq!(d, array![[2.0 / 3.0, 0.0]], epsilon = 1e-12);
    }

    #[test]
    fn sieve_errors() {
        let u = panel(array![[1e7, 1.0, 2.0, 3.0, 4.0, 5.0]]);
        let y = panel(array![[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]]);
        assert!(matches!(
            sieve_fit(&y, &u, &SieveBasis::polynomial(3), 0.0),
            Err(Error::BasisOverflow { .. })
        ));
        let u2 = panel(Array2::zeros((2, 6)));
        let basis = SieveBasis {
            kind: BasisKind::Polynomial,
            m: 2,
            input_dim: 2,
        };
        assert!(matches!(sieve_fit(&y, &u2, &basis, 0.0), Err(Error::UnsupportedBasis(_))));
    }

    #[test]
    fn eval_g_cases() {
        let b2 = SieveBasis::polynomial(2);
        let g = eval_g(Array2::<f64>::eye(2).view(), &b2, array![5.0].view()).unwrap();
        assert_eq!(g, array![1.0, 5.0]);
        let g = eval_g(array![[3.0, 2.0, 0.0]].view(), &SieveBasis::polynomial(3), array![2.0].view()).unwrap();
        assert_eq!(g, array![7.0]);
        let g = eval_g(Array2::<f64>::zeros((4, 2)).view(), &b2, array![-3.0].view()).unwrap();
        assert_eq!(g, Array1::<f64>::zeros(4));
    }

    #[test]
    fn residual_cases() {
        let z = panel(array![[1.0, 2.0]]);
        let y = panel(array![[3.0, 5.0]]);
        let eta = residuals(&y, &z, array![[2.0]].view()).unwrap();
        assert_eq!(eta.data(), &array![[1.0, 1.0]]);
        let eta = residuals(&y, &z, array![[0.0]].view()).unwrap();
        assert_eq!(eta.data(), y.data());
        let exact = panel(array![[2.0, 4.0]]);
        let eta = residuals(&exact, &z, array![[2.0]].view()).unwrap();
        assert_eq!(eta.data(), &array![[0.0, 0.0]]);
    }

    #[test]
    fn sieve_order_rule() {
        assert_eq!(default_sieve_order(50), 4);
        assert_eq!(default_sieve_order(100), 5);
        assert_eq!(default_sieve_order(150), 5);
        assert_eq!(default_sieve_order(32), 4);
    }
}
