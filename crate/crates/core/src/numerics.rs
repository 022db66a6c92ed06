//! Dense linear algebra used by the estimators.
//!
//! Everything here is a pure function of its inputs. The symmetric
//! eigensolver delegates to `nalgebra` and then imposes a fixed ordering
//! (descending eigenvalues, ties in solver order) and a fixed sign
//! convention on each eigenvector: the entry of largest magnitude is
//! nonnegative, with ties going to the lowest row index.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Eigendecomposition of a real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    /// Eigenvalues in descending order.
    pub values: Array1<f64>,
    /// Orthonormal eigenvectors; column `j` pairs with `values[j]`.
    pub vectors: Array2<f64>,
}

pub(crate) fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

fn max_abs(a: ArrayView2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Flip the sign of `v` so that its largest-magnitude entry is nonnegative.
fn orient(mut v: ndarray::ArrayViewMut1<f64>) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

/// Cyclic Jacobi on symmetric `a`, accumulating rotations into `v`.
/// Stops once the off-diagonal mass is at roundoff.
fn jacobi_sweeps(a: &mut Array2<f64>, v: &mut Array2<f64>) {
    let n = a.nrows();
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..30 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= f64::EPSILON * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
}

/// Full eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized as `(S + S')/2` before decomposition; inputs
/// whose asymmetry exceeds `1e-8 * max|S|` are rejected.
pub fn sym_eig(s: ArrayView2<f64>) -> Result<SymEigen> {
    let (n, c) = s.dim();
    if n != c {
        return Err(Error::NotSquare { rows: n, cols: c });
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { what: "sym_eig input" });
    }
    if n == 0 {
        return Ok(SymEigen {
            values: Array1::zeros(0),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let scale = max_abs(s);
    let asym = max_abs((&s - &s.t()).view());
    if asym > 1e-8 * scale {
        return Err(Error::InvalidArgument(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (s[[i, j]] + s[[j, i]]));
    let first = sym.clone().symmetric_eigen();
    // nalgebra's QR iteration can deflate early and leave residuals near 1e-8;
    // Jacobi sweeps on the nearly diagonal V'SV bring them back to roundoff
    let v = from_dmatrix(&first.eigenvectors);
    let sym = from_dmatrix(&sym);
    let mut inner = v.t().dot(&sym).dot(&v);
    let mut rot = Array2::<f64>::eye(n);
    jacobi_sweeps(&mut inner, &mut rot);
    let vectors_raw = v.dot(&rot);
    let values_raw = inner.diag().to_owned();

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep solver order
    order.sort_by(|&a, &b| values_raw[b].total_cmp(&values_raw[a]));

    let values = Array1::from_iter(order.iter().map(|&j| values_raw[j]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&vectors_raw.column(src));
        orient(vectors.column_mut(dst));
    }
    Ok(SymEigen { values, vectors })
}

/// Solve `(G + ridge I) X = B` for symmetric positive-definite `G` by Cholesky.
///
/// Fails with [`Error::SingularGram`] when a Cholesky pivot drops below
/// `1e-12 * (trace(G)/m + ridge)`.
pub fn solve_gram(g: ArrayView2<f64>, b: ArrayView2<f64>, ridge: f64) -> Result<Array2<f64>> {
    let (m, c) = g.dim();
    if m != c {
        return Err(Error::NotSquare { rows: m, cols: c });
    }
    if m == 0 {
        return Err(Error::InvalidArgument("empty Gram matrix".into()));
    }
    if b.nrows() != m {
        return Err(Error::ShapeMismatch(format!(
            "Gram is {m}x{m} but right-hand side has {} rows",
            b.nrows()
        )));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
    }
    if g.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { what: "solve_gram input" });
    }
    let trace: f64 = g.diag().sum();
    let threshold = 1e-12 * (trace / m as f64 + ridge);

    // lower-triangular factor, symmetrized input
    let mut l = Array2::<f64>::zeros((m, m));
    for j in 0..m {
        let mut pivot = g[[j, j]] + ridge;
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if !(pivot > threshold) {
            return Err(Error::SingularGram { pivot, threshold });
        }
        let d = pivot.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..m {
            let mut s = 0.5 * (g[[i, j]] + g[[j, i]]);
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }

    let mut x = b.to_owned();
    for mut col in x.axis_iter_mut(Axis(1)) {
        for i in 0..m {
            let mut s = col[i];
            for k in 0..i {
                s -= l[[i, k]] * col[k];
            }
            col[i] = s / l[[i, i]];
        }
        for i in (0..m).rev() {
            let mut s = col[i];
            for k in (i + 1)..m {
                s -= l[[k, i]] * col[k];
            }
            col[i] = s / l[[i, i]];
        }
    }
    Ok(x)
}

/// Singular values of `a`, descending.
pub fn singular_values(a: ArrayView2<f64>) -> Array1<f64> {
    if a.is_empty() {
        return Array1::zeros(0);
    }
    let mut sv: Vec<f64> = to_dmatrix(a).singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Array1::from(sv)
}

/// Ratio of smallest to largest singular value (0 for a zero matrix).
pub fn inverse_condition(a: ArrayView2<f64>) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Solve `A X = B` for a general square `A` by LU with partial pivoting.
pub fn solve_general(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (m, c) = a.dim();
    if m != c {
        return Err(Error::NotSquare { rows: m, cols: c });
    }
    if b.nrows() != m {
        return Err(Error::ShapeMismatch(format!(
            "system is {m}x{m} but right-hand side has {} rows",
            b.nrows()
        )));
    }
    let lu = to_dmatrix(a).lu();
    let x = lu
        .solve(&to_dmatrix(b))
        .ok_or(Error::SingularCrossMoment { ratio: 0.0 })?;
    Ok(from_dmatrix(&x))
}

/// Largest absolute entry of `H'H - I`.
pub fn half_orthogonality_deviation(h: ArrayView2<f64>) -> f64 {
    let gram = h.t().dot(&h);
    let r = gram.nrows();
    let mut dev = 0.0_f64;
    for i in 0..r {
        for j in 0..r {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[[i, j]] - target).abs());
        }
    }
    dev
}

/// Check `H'H = I` within `tol` (max-abs entrywise).
pub fn check_half_orthogonal(h: ArrayView2<f64>, tol: f64) -> Result<()> {
    let deviation = half_orthogonality_deviation(h);
    if deviation <= tol {
        Ok(())
    } else {
        Err(Error::NotHalfOrthogonal { deviation })
    }
}

/// Orthonormal basis for the column space of a full-column-rank `a`,
/// via modified Gram-Schmidt with one reorthogonalization pass.
///
/// Columns whose residual norm falls below `1e-10` of their original norm
/// are reported as rank deficiency.
pub fn orthonormalize(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (p, r) = a.dim();
    if r > p {
        return Err(Error::RankTooLarge { r, p });
    }
    let mut q = a.to_owned();
    for j in 0..r {
        let orig = q.column(j).dot(&q.column(j)).sqrt();
        for _pass in 0..2 {
            for k in 0..j {
                let proj = q.column(k).dot(&q.column(j));
                let qk = q.column(k).to_owned();
                q.column_mut(j).scaled_add(-proj, &qk);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if !(norm > 1e-10 * orig) || norm == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "columns are linearly dependent (column {})",
                j + 1
            )));
        }
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn assert_contract(s: &Array2<f64>, e: &SymEigen) {
        let n = s.nrows();
        let vtv = e.vectors.t().dot(&e.vectors);
        let id = Array2::<f64>::eye(n);
        let dev = singular_values((&vtv - &id).view());
        assert!(dev.first().copied().unwrap_or(0.0) <= 1e-10);
        let recon = e.vectors.dot(&Array2::from_diag(&e.values)).dot(&e.vectors.t());
        let err = (&recon - s).mapv(|v| v * v).sum().sqrt();
        let norm = s.mapv(|v| v * v).sum().sqrt();
        assert!(err <= 1e-8 * (1.0 + norm), "reconstruction error {err}");
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for col in e.vectors.columns() {
            let (idx, _) = col
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
            assert!(col[idx] >= 0.0);
        }
    }

    #[test]
    fn identity_eigen() {
        let s = Array2::<f64>::eye(3);
        let e = sym_eig(s.view()).unwrap();
        assert_eq!(e.values, array![1.0, 1.0, 1.0]);
        assert_contract(&s, &e);
    }

    #[test]
    fn diagonal_eigen_permutes_basis() {
        let s = Array2::from_diag(&array![4.0, 1.0, 9.0]);
        let e = sym_eig(s.view()).unwrap();
        assert_eq!(e.values, array![9.0, 4.0, 1.0]);
        let expected = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        assert_abs_diff_eq!(e.vectors, expected, epsilon = 1e-14);
    }

    #[test]
    fn two_by_two_eigen() {
        // characteristic polynomial (2-x)^2 - 1 = 0 gives 3 and 1
        let s = array![[2.0, 1.0], [1.0, 2.0]];
        let e = sym_eig(s.view()).unwrap();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.vectors[[0, 0]], h, epsilon = 1e-12);
        assert_abs_diff_eq!(e.vectors[[1, 0]], h, epsilon = 1e-12);
        assert_contract(&s, &e);
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(matches!(
            sym_eig(Array2::<f64>::zeros((2, 3)).view()),
            Err(Error::NotSquare { .. })
        ));
        let mut s = Array2::<f64>::eye(2);
        s[[0, 1]] = f64::NAN;
        assert!(matches!(sym_eig(s.view()), Err(Error::NonFiniteInput { .. })));
    }

    #[test]
    fn gram_identity_and_diagonal() {
        let x = solve_gram(Array2::eye(2).view(), array![[1.0], [2.0]].view(), 0.0).unwrap();
        assert_abs_diff_eq!(x, array![[1.0], [2.0]], epsilon = 1e-15);
        let g = array![[2.0, 0.0], [0.0, 4.0]];
        let x = solve_gram(g.view(), Array2::eye(2).view(), 0.0).unwrap();
        assert_abs_diff_eq!(x, array![[0.5, 0.0], [0.0, 0.25]], epsilon = 1e-15);
    }

    #[test]
    fn gram_hand_elimination() {
        // 4a + 2b = 2, 2a + 2b = 2  =>  a = 0, b = 1
        let g = array![[4.0, 2.0], [2.0, 2.0]];
        let x = solve_gram(g.view(), array![[2.0], [2.0]].view(), 0.0).unwrap();
        assert_abs_diff_eq!(x, array![[0.0], [1.0]], epsilon = 1e-14);
    }

    #[test]
    fn gram_singular_and_ridge() {
        let g = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![[1.0], [1.0]];
        assert!(matches!(
            solve_gram(g.view(), b.view(), 0.0),
            Err(Error::SingularGram { .. })
        ));
        let x = solve_gram(g.view(), b.view(), 1.0).unwrap();
        // (G + I) x = b  =>  x = (1/3, 1/3)
        assert_abs_diff_eq!(x, array![[1.0 / 3.0], [1.0 / 3.0]], epsilon = 1e-14);
    }

    #[test]
    fn orthonormalize_spans_input() {
        let a = array![[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]];
        let q = orthonormalize(a.view()).unwrap();
        assert!(half_orthogonality_deviation(q.view()) < 1e-14);
        assert_abs_diff_eq!(q.column(1).to_owned(), array![0.0, 1.0, 0.0], epsilon = 1e-14);
        assert!(orthonormalize(array![[1.0, 2.0], [1.0, 2.0]].view()).is_err());
    }

    #[test]
    fn general_solve() {
        let a = array![[0.0, 1.0], [2.0, 0.0]];
        let x = solve_general(a.view(), array![[3.0], [4.0]].view()).unwrap();
        assert_abs_diff_eq!(x, array![[2.0], [3.0]], epsilon = 1e-14);
    }
}
