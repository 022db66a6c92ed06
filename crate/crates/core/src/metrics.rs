//! Scores for comparing fitted quantities against a known truth.

use ndarray::{Array1, ArrayView2};

use crate::error::{Error, Result};
use crate::numerics::half_orthogonality_deviation;

const ORTHO_TOL: f64 = 1e-6;

/// Distance between two column spaces, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceDistance {
    pub value: f64,
    pub r1: usize,
    pub r2: usize,
    /// True when the column counts differ and the `max(r1, r2)` normalization applies.
    pub modified: bool,
}

fn check_basis(h: ArrayView2<f64>) -> Result<()> {
    let deviation = half_orthogonality_deviation(h);
    if deviation > ORTHO_TOL {
        return Err(Error::NotHalfOrthogonal { deviation });
    }
    Ok(())
}

/// `||(I - H2 H2') H1||_F^2`, which equals `r1 - tr(H1 H1' H2 H2')` but
/// stays accurate when the spaces nearly coincide.
fn residual_sq(h1: ArrayView2<f64>, h2: ArrayView2<f64>) -> f64 {
    let fitted = h2.dot(&h2.t().dot(&h1));
    h1.iter().zip(fitted.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn distance(h1: ArrayView2<f64>, h2: ArrayView2<f64>) -> f64 {
    let (r1, r2) = (h1.ncols(), h2.ncols());
    // project the wider basis onto the narrower one; average both ways when equal
    let sq = match r1.cmp(&r2) {
        std::cmp::Ordering::Greater => residual_sq(h1, h2),
        std::cmp::Ordering::Less => residual_sq(h2, h1),
        std::cmp::Ordering::Equal => 0.5 * (residual_sq(h1, h2) + residual_sq(h2, h1)),
    };
    (sq / r1.max(r2) as f64).sqrt().min(1.0)
}

/// `sqrt(1 - tr(H1 H1' H2 H2') / r)` for two `p x r` half-orthogonal matrices.
pub fn space_distance(h1: ArrayView2<f64>, h2: ArrayView2<f64>) -> Result<SubspaceDistance> {
    if h1.dim() != h2.dim() {
        return Err(Error::ShapeMismatch(format!(
            "bases are {:?} and {:?}",
            h1.dim(),
            h2.dim()
        )));
    }
    space_distance_mixed(h1, h2)
}

/// Same as [`space_distance`] but allows different column counts, normalizing by `max(r1, r2)`.
pub fn space_distance_mixed(h1: ArrayView2<f64>, h2: ArrayView2<f64>) -> Result<SubspaceDistance> {
    if h1.nrows() != h2.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "bases live in R^{} and R^{}",
            h1.nrows(),
            h2.nrows()
        )));
    }
    let (r1, r2) = (h1.ncols(), h2.ncols());
    if r1 == 0 || r2 == 0 {
        return Err(Error::ShapeMismatch("basis with no columns".into()));
    }
    check_basis(h1)?;
    check_basis(h2)?;
    Ok(SubspaceDistance {
        value: distance(h1, h2),
        r1,
        r2,
        modified: r1 != r2,
    })
}

/// `p^{-1/2} ||D_hat - D||_F`.
pub fn coef_error(d_hat: ArrayView2<f64>, d_true: ArrayView2<f64>) -> Result<f64> {
    if d_hat.dim() != d_true.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            d_hat.dim(),
            d_true.dim()
        )));
    }
    let sq: f64 = d_hat.iter().zip(d_true.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / d_hat.nrows() as f64).sqrt())
}

/// Per-time `p^{-1/2} ||c_hat_t - c_t||_2` for two `p x T` common components.
pub fn common_component_error(ahat_xhat: ArrayView2<f64>, a_x_true: ArrayView2<f64>) -> Result<Array1<f64>> {
    if ahat_xhat.dim() != a_x_true.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            ahat_xhat.dim(),
            a_x_true.dim()
        )));
    }
    let p = ahat_xhat.nrows() as f64;
    let diff = &ahat_xhat - &a_x_true;
    Ok(diff
        .columns()
        .into_iter()
        .map(|c| (c.dot(&c) / p).sqrt())
        .collect())
}
