//! Series-by-time data panels and the fitted-model record.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// A block of `p` series observed over `T` time points, stored series x time.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    data: Array2<f64>,
    series_labels: Option<Vec<String>>,
    time_labels: Option<Vec<String>>,
}

impl Panel {
    /// Wrap a `p x T` matrix. Requires `p >= 1`, `T >= 2` and finite entries.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (p, t) = data.dim();
        if p < 1 {
            return Err(Error::InvalidPanel("panel needs at least one series".into()));
        }
        if t < 2 {
            return Err(Error::InvalidPanel(format!(
                "panel needs at least two time points, got {t}"
            )));
        }
        if let Some(((i, j), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidPanel(format!(
                "non-finite value {v} at series {}, time {}",
                i + 1,
                j + 1
            )));
        }
        Ok(Self {
            data,
            series_labels: None,
            time_labels: None,
        })
    }

    pub fn with_series_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(Error::InvalidPanel(format!(
                "{} series labels for {} series",
                labels.len(),
                self.dim()
            )));
        }
        self.series_labels = Some(labels);
        Ok(self)
    }

    pub fn with_time_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidPanel(format!(
                "{} time labels for {} time points",
                labels.len(),
                self.len()
            )));
        }
        self.time_labels = Some(labels);
        Ok(self)
    }

    /// Number of series `p`.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn series_labels(&self) -> Option<&[String]> {
        self.series_labels.as_deref()
    }

    pub fn time_labels(&self) -> Option<&[String]> {
        self.time_labels.as_deref()
    }

    /// Replace the data, keeping labels. Shapes must agree.
    pub(crate) fn map_data(&self, data: Array2<f64>) -> Result<Self> {
        if data.dim() != self.data.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                data.dim(),
                self.data.dim()
            )));
        }
        let mut out = Panel::new(data)?;
        out.series_labels = self.series_labels.clone();
        out.time_labels = self.time_labels.clone();
        Ok(out)
    }

    /// Subtract each series' time average. Returns the centered panel and the means.
    pub fn center_rows(&self) -> (Panel, Array1<f64>) {
        let means = self
            .data
            .mean_axis(Axis(1))
            .expect("panel has at least two time points");
        let centered = &self.data - &means.view().insert_axis(Axis(1));
        let mut out = self.clone();
        out.data = centered;
        (out, means)
    }
}

/// Which regression stage produced a [`FactorFit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitMethod {
    /// Pure factor model, no regressors.
    None,
    Ols,
    Iv,
    Sieve,
    /// Residuals formed with a supplied coefficient matrix.
    KnownD,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::None => "none",
            FitMethod::Ols => "ols",
            FitMethod::Iv => "iv",
            FitMethod::Sieve => "sieve",
            FitMethod::KnownD => "known_d",
        }
    }
}

/// Result of the full regression + factor pipeline.
#[derive(Debug, Clone)]
pub struct FactorFit {
    /// Regression coefficients, `p x m` (`p x 0` for a pure factor model).
    pub d_hat: Array2<f64>,
    /// All `p` eigenvalues of the lag statistic, descending, clamped at 0.
    pub eigenvalues: Array1<f64>,
    /// `p x r` loadings with orthonormal columns.
    pub loadings: Array2<f64>,
    /// `r x T` extracted factors.
    pub factors: Array2<f64>,
    /// `p x T` common component `loadings * factors`.
    pub common: Array2<f64>,
    /// Plain eigenvalue-ratio estimate of the number of factors.
    pub r_ratio: usize,
    /// Penalized-ratio estimate, present when a positive penalty was used.
    pub r_adjusted: Option<usize>,
    /// Number of columns actually used for `loadings`.
    pub r_used: usize,
    /// Upper limit of the ratio search.
    pub r_max: usize,
    pub k_bar: usize,
    /// Penalty used for `r_adjusted` (0 when none).
    pub c_t: f64,
    pub method: FitMethod,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Panel::new(Array2::zeros((0, 4))).is_err());
        assert!(Panel::new(Array2::zeros((3, 1))).is_err());
        assert!(Panel::new(array![[1.0, f64::INFINITY]]).is_err());
        let p = Panel::new(Array2::zeros((2, 3))).unwrap();
        assert!(p.clone().with_series_labels(vec!["a".into()]).is_err());
        assert!(p.with_time_labels(vec!["1".into(), "2".into(), "3".into()]).is_ok());
    }

    #[test]
    fn center_constant_row() {
        let p = Panel::new(array![[1.0, 1.0, 1.0]]).unwrap();
        let (c, m) = p.center_rows();
        assert_eq!(c.data(), &array![[0.0, 0.0, 0.0]]);
        assert_eq!(m, array![1.0]);
    }

    #[test]
    fn center_ramp() {
        let p = Panel::new(array![[1.0, 2.0, 3.0]]).unwrap();
        let (c, m) = p.center_rows();
        assert_eq!(c.data(), &array![[-1.0, 0.0, 1.0]]);
        assert_eq!(m, array![2.0]);
    }

    #[test]
    fn centered_means_vanish_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = Array2::from_shape_fn((2, 4), |_| rng.gen_range(-5.0..5.0));
        let p = Panel::new(data).unwrap();
        let (c, means) = p.center_rows();
        for (i, row) in p.data().rows().into_iter().enumerate() {
            // direct recomputation of the mean
            let direct = row.iter().sum::<f64>() / row.len() as f64;
            assert!((direct - means[i]).abs() < 1e-15);
        }
        for row in c.data().rows() {
            assert!((row.sum() / 4.0).abs() <= 1e-12);
        }
        let (cc, _) = c.center_rows();
        for (a, b) in cc.data().iter().zip(c.data().iter()) {
            assert!((a - b).abs() <= 1e-14);
        }
    }
}
