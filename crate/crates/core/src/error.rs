use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimation pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {what}")]
    NonFiniteInput { what: &'static str },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("singular Gram matrix: pivot {pivot:e} below threshold {threshold:e}")]
    SingularGram { pivot: f64, threshold: f64 },

    #[error("singular cross-moment matrix (weak instruments): sigma_min/sigma_max = {ratio:e}")]
    SingularCrossMoment { ratio: f64 },

    #[error("instrument mixing matrix is rank deficient: sigma_min/sigma_max = {ratio:e}")]
    RankDeficientMixing { ratio: f64 },

    #[error("basis value {value:e} overflows the 1e12 limit")]
    BasisOverflow { value: f64 },

    #[error("unsupported basis: {0}")]
    UnsupportedBasis(String),

    #[error("lag {k} too large for T = {t} (need k <= T-2)")]
    LagTooLarge { k: usize, t: usize },

    #[error("spectrum has {0} eigenvalue(s); at least 2 are required")]
    EmptySpectrum(usize),

    #[error("r = {r} exceeds the dimension {p}")]
    RankTooLarge { r: usize, p: usize },

    #[error("matrix is not half-orthogonal: max |H'H - I| = {deviation:e}")]
    NotHalfOrthogonal { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input")]
    Empty,

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("ragged rows: row {row} has {found} fields, expected {expected}")]
    RaggedRows {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("non-finite value at row {row}, column {col}: {text:?}")]
    NonFinite { row: usize, col: usize, text: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("missing required key `{0}`")]
    MissingRequired(String),

    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by malformed input files, flags or configuration,
    /// as opposed to numerical failures of the estimators.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::RaggedRows { .. }
                | Error::NonFinite { .. }
                | Error::UnknownKey(_)
                | Error::MissingRequired(_)
                | Error::BadValue { .. }
                | Error::Io { .. }
                | Error::InvalidPanel(_)
                | Error::InvalidArgument(_)
                | Error::ShapeMismatch(_)
                | Error::NotHalfOrthogonal { .. }
                | Error::NonFiniteInput { .. }
                | Error::NotSquare { .. }
                | Error::Empty
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
