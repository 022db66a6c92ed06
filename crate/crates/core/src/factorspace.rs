//! Loading-space estimation from lagged autocovariances of regression residuals.
//!
//! For residuals `eta_t` the statistic
//!
//! ```text
//! S(k) = 1/(T-k) * sum_{t=1}^{T-k} (eta_{t+k} - mean)(eta_t - mean)'
//! M    = sum_{k=1}^{kbar} S(k) S(k)'
//! ```
//!
//! is positive semidefinite and, in population, has rank `r` with its range
//! equal to the loading space. The top-`r` eigenvectors estimate the
//! loadings; `r` is chosen by the eigenvalue-ratio rule, optionally with an
//! additive penalty `c` on both numerator and denominator.

use ndarray::{s, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::numerics::{half_orthogonality_deviation, sym_eig, SymEigen};
use crate::panel::{FactorFit, FitMethod, Panel};
use crate::regress::{default_sieve_order, iv_fit, ols_fit, residuals, sieve_fit, IvConfig, SieveBasis};

/// Eigenvalues below this fraction of the largest are treated as numerically zero
/// when bounding the ratio search.
pub const NUMERICAL_RANK_TOL: f64 = 1e-10;

/// Lag-`k` residual autocovariance, centered by the full-sample mean, denominator `T - k`.
pub fn lag_autocov(eta: &Panel, k: usize) -> Result<Array2<f64>> {
    let t = eta.len();
    if k == 0 || k + 2 > t {
        return Err(Error::LagTooLarge { k, t });
    }
    let (centered, _) = eta.center_rows();
    let c = centered.data();
    let lead = c.slice(s![.., k..]);
    let lag = c.slice(s![.., ..t - k]);
    Ok(lead.dot(&lag.t()) / (t - k) as f64)
}

/// Contemporaneous covariance with denominator `T`.
pub fn covariance(eta: &Panel) -> Array2<f64> {
    let (centered, _) = eta.center_rows();
    let c = centered.data();
    c.dot(&c.t()) / eta.len() as f64
}

/// The accumulated lag statistic and its eigendecomposition.
#[derive(Debug, Clone)]
pub struct MStat {
    pub m_matrix: Array2<f64>,
    pub k_bar: usize,
    /// Eigenvalues are clamped at zero.
    pub eigen: SymEigen,
    /// Smallest eigenvalue before clamping.
    pub min_raw_eigenvalue: f64,
}

/// `sum_{k=1}^{k_bar} S(k) S(k)'`, with its eigendecomposition.
pub fn build_m(eta: &Panel, k_bar: usize) -> Result<MStat> {
    if k_bar == 0 {
        return Err(Error::InvalidArgument("k_bar must be at least 1".into()));
    }
    let t = eta.len();
    if k_bar + 2 > t {
        return Err(Error::LagTooLarge { k: k_bar, t });
    }
    let (centered, _) = eta.center_rows();
    let c = centered.data();
    let p = eta.dim();
    let mut m = Array2::<f64>::zeros((p, p));
    for k in 1..=k_bar {
        let sk = c.slice(s![.., k..]).dot(&c.slice(s![.., ..t - k]).t()) / (t - k) as f64;
        m += &sk.dot(&sk.t());
    }
    let m = (&m + &m.t()) * 0.5;
    let mut eigen = sym_eig(m.view())?;
    let min_raw_eigenvalue = eigen.values.iter().copied().fold(f64::INFINITY, f64::min);
    eigen.values.mapv_inplace(|v| v.max(0.0));
    Ok(MStat {
        m_matrix: m,
        k_bar,
        eigen,
        min_raw_eigenvalue,
    })
}

/// Outcome of the eigenvalue-ratio search.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSelection {
    pub r_hat: usize,
    /// `ratios[j-1] = (λ_{j+1} + c) / (λ_j + c)` for `j = 1..=r_max`.
    pub ratios: Vec<f64>,
    pub r_max: usize,
    pub c_t: f64,
}

/// Minimize `(λ_{j+1} + c) / (λ_j + c)` over `1 <= j <= r_max`, ties to the smallest `j`.
///
/// A zero denominator gives ratio 1, so flat zero tails never beat a real drop.
pub fn select_r_ratio(eigen_values: ArrayView1<f64>, r_max: usize, c_t: f64) -> Result<RatioSelection> {
    let n = eigen_values.len();
    if n < 2 {
        return Err(Error::EmptySpectrum(n));
    }
    if r_max == 0 || r_max > n - 1 {
        return Err(Error::InvalidArgument(format!(
            "r_max must lie in 1..={}, got {r_max}",
            n - 1
        )));
    }
    if !(c_t >= 0.0) || !c_t.is_finite() {
        return Err(Error::InvalidArgument(format!("penalty must be >= 0, got {c_t}")));
    }
    let ratios: Vec<f64> = (0..r_max)
        .map(|j| {
            let den = eigen_values[j] + c_t;
            if den > 0.0 {
                (eigen_values[j + 1] + c_t) / den
            } else {
                1.0
            }
        })
        .collect();
    let mut r_hat = 1;
    for (j, &v) in ratios.iter().enumerate() {
        if v < ratios[r_hat - 1] {
            r_hat = j + 1;
        }
    }
    Ok(RatioSelection {
        r_hat,
        ratios,
        r_max,
        c_t,
    })
}

/// Number of eigenvalues above `NUMERICAL_RANK_TOL * λ_1`.
pub fn numerical_rank(eigen_values: ArrayView1<f64>) -> usize {
    let top = eigen_values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return 0;
    }
    eigen_values.iter().filter(|&&v| v > NUMERICAL_RANK_TOL * top).count()
}

/// Default search limit: half the effective dimension, `floor(min(p, rank)/2)`,
/// where `rank` is [`numerical_rank`]. Equals `floor(p/2)` when `M` has full
/// rank; when `T < p` it keeps the search away from the edge of the spectrum.
/// Never below 1.
pub fn default_r_max(eigen_values: ArrayView1<f64>) -> usize {
    let p = eigen_values.len();
    let rank = numerical_rank(eigen_values);
    (p.min(rank) / 2).max(1).min(p.saturating_sub(1).max(1))
}

/// Penalty heuristic `σ² p T^{-1/2} log T`, where `σ²` is the median residual variance.
pub fn heuristic_penalty(eta: &Panel) -> f64 {
    let cov = covariance(eta);
    let mut diag: Vec<f64> = cov.diag().to_vec();
    diag.sort_by(f64::total_cmp);
    let n = diag.len();
    let median = if n % 2 == 1 {
        diag[n / 2]
    } else {
        0.5 * (diag[n / 2 - 1] + diag[n / 2])
    };
    let (p, t) = (eta.dim() as f64, eta.len() as f64);
    median * p * t.powf(-0.5) * t.ln()
}

/// First `r` eigenvectors of the lag statistic.
pub fn estimate_loadings(mstat: &MStat, r: usize) -> Result<Array2<f64>> {
    let p = mstat.eigen.values.len();
    if r == 0 {
        return Err(Error::InvalidArgument("number of factors must be at least 1".into()));
    }
    if r > p {
        return Err(Error::RankTooLarge { r, p });
    }
    Ok(mstat.eigen.vectors.slice(s![.., ..r]).to_owned())
}

/// Factors `x_t = A' eta_t` and common component `A x_t`.
pub fn recover_factors(eta: &Panel, a_hat: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    if a_hat.nrows() != eta.dim() {
        return Err(Error::ShapeMismatch(format!(
            "loadings have {} rows, residuals have {} series",
            a_hat.nrows(),
            eta.dim()
        )));
    }
    let deviation = half_orthogonality_deviation(a_hat);
    if deviation > 1e-6 {
        return Err(Error::NotHalfOrthogonal { deviation });
    }
    let factors = a_hat.t().dot(eta.data());
    let common = a_hat.dot(&factors);
    Ok((factors, common))
}

/// How the regression part is handled before factor extraction.
#[derive(Debug, Clone, Copy)]
pub enum Regression<'a> {
    /// Pure factor model; residuals are the observations.
    None,
    Ols { z: &'a Panel },
    Iv { z: &'a Panel, w: &'a Panel, cfg: &'a IvConfig },
    Sieve { u: &'a Panel, basis: &'a SieveBasis },
    /// Residuals from a supplied coefficient matrix.
    KnownD { z: &'a Panel, d: ArrayView2<'a, f64> },
}

impl Regression<'_> {
    pub fn method(&self) -> FitMethod {
        match self {
            Regression::None => FitMethod::None,
            Regression::Ols { .. } => FitMethod::Ols,
            Regression::Iv { .. } => FitMethod::Iv,
            Regression::Sieve { .. } => FitMethod::Sieve,
            Regression::KnownD { .. } => FitMethod::KnownD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorCount {
    /// Ratio rule; penalized when the penalty is positive.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// Plain ratio.
    None,
    Value(f64),
    /// [`heuristic_penalty`] on the residuals.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Defaults to 1, or `floor(2 T^{1/5})` for sieve fits.
    pub k_bar: Option<usize>,
    pub r: FactorCount,
    pub penalty: Penalty,
    /// Defaults to [`default_r_max`].
    pub r_max: Option<usize>,
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            k_bar: None,
            r: FactorCount::Auto,
            penalty: Penalty::None,
            r_max: None,
            ridge: 0.0,
        }
    }
}

/// Regression, residuals, lag statistic, factor count, loadings and factors in one pass.
pub fn fit_factor_model(y: &Panel, regression: Regression<'_>, opts: &FitOptions) -> Result<FactorFit> {
    let p = y.dim();
    let (d_hat, eta) = match regression {
        Regression::None => (Array2::zeros((p, 0)), y.clone()),
        Regression::Ols { z } => {
            let d = ols_fit(y, z, opts.ridge)?;
            let eta = residuals(y, z, d.view())?;
            (d, eta)
        }
        Regression::Iv { z, w, cfg } => {
            let d = iv_fit(y, z, w, cfg)?;
            let eta = residuals(y, z, d.view())?;
            (d, eta)
        }
        Regression::Sieve { u, basis } => {
            let (d, z) = sieve_fit(y, u, basis, opts.ridge)?;
            let eta = residuals(y, &z, d.view())?;
            (d, eta)
        }
        Regression::KnownD { z, d } => {
            let eta = residuals(y, z, d)?;
            (d.to_owned(), eta)
        }
    };
    fit_residuals(d_hat, &eta, regression.method(), opts)
}

/// Factor stage only, on precomputed residuals.
pub fn fit_residuals(d_hat: Array2<f64>, eta: &Panel, method: FitMethod, opts: &FitOptions) -> Result<FactorFit> {
    fit_residuals_with_stat(d_hat, eta, method, opts).map(|(fit, _)| fit)
}

/// [`fit_residuals`], also returning the lag statistic it was built from.
pub fn fit_residuals_with_stat(
    d_hat: Array2<f64>,
    eta: &Panel,
    method: FitMethod,
    opts: &FitOptions,
) -> Result<(FactorFit, MStat)> {
    let p = eta.dim();
    let k_bar = opts.k_bar.unwrap_or(match method {
        FitMethod::Sieve => default_sieve_order(eta.len()),
        _ => 1,
    });
    let mstat = build_m(eta, k_bar)?;
    let values = mstat.eigen.values.view();

    let c_t = match opts.penalty {
        Penalty::None => 0.0,
        Penalty::Value(c) => c,
        Penalty::Heuristic => heuristic_penalty(eta),
    };

    let (r_ratio, r_adjusted, r_max) = if p >= 2 {
        let r_max = opts.r_max.unwrap_or_else(|| default_r_max(values));
        let plain = select_r_ratio(values, r_max, 0.0)?;
        let adjusted = if c_t > 0.0 {
            Some(select_r_ratio(values, r_max, c_t)?.r_hat)
        } else {
            None
        };
        (plain.r_hat, adjusted, r_max)
    } else if let FactorCount::Fixed(_) = opts.r {
        (1, None, 1)
    } else {
        return Err(Error::EmptySpectrum(p));
    };

    let r_used = match opts.r {
        FactorCount::Auto => r_adjusted.unwrap_or(r_ratio),
        FactorCount::Fixed(r) => r,
    };
    let loadings = estimate_loadings(&mstat, r_used)?;
    let (factors, common) = recover_factors(eta, loadings.view())?;

    let fit = FactorFit {
        d_hat,
        eigenvalues: mstat.eigen.values.clone(),
        loadings,
        factors,
        common,
        r_ratio,
        r_adjusted,
        r_used,
        r_max,
        k_bar,
        c_t,
        method,
    };
    Ok((fit, mstat))
}
