use std::fmt;

/// Pipeline stage named in errors raised by [`crate::solver::fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validate,
    Moments,
    NormalEquations,
    Solve,
    BackTransform,
    Predict,
    ResidualVariance,
    Covariance,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Validate => "input validation",
            Stage::Moments => "standardization",
            Stage::NormalEquations => "normal equations",
            Stage::Solve => "solve",
            Stage::BackTransform => "back-transformation",
            Stage::Predict => "prediction",
            Stage::ResidualVariance => "residual variance",
            Stage::Covariance => "covariance",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix shape {n_rows}x{n_cols} is empty; both dimensions must be positive")]
    EmptyShape { n_rows: usize, n_cols: usize },

    #[error("entry {index} at ({row}, {col}) lies outside a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        index: usize,
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("invalid compressed column structure: {0}")]
    InvalidStructure(String),

    #[error("{context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weights sum to zero")]
    ZeroWeightSum,

    #[error("column {col} has zero weighted standard deviation and cannot be scaled")]
    ZeroVariance { col: usize },

    #[error("non-finite value in {what} at position {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("intercept column {col} is out of range for {n_cols} columns")]
    InterceptOutOfRange { col: usize, n_cols: usize },

    #[error(
        "coefficients on the original scale need an intercept column when centering is \
         enabled; pass an intercept column index"
    )]
    MissingIntercept,

    #[error("{n} observations leave no residual degrees of freedom for {p} parameters")]
    NoDegreesOfFreedom { n: usize, p: usize },

    #[error("could not allocate {bytes} bytes for the dense centered matrix")]
    Allocation { bytes: usize },

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage wrappers and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// The pipeline stage this error was raised in, if it was tagged with one.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

pub(crate) fn check_weights(w: &[f64]) -> Result<()> {
    check_finite("weights", w)?;
    match w.iter().position(|&v| v < 0.0) {
        Some(index) => Err(Error::NegativeWeight {
            index,
            value: w[index],
        }),
        None => Ok(()),
    }
}

/// Failures reading or writing the on-disk formats. `source_name` is the file name
/// (or any label the caller supplies for in-memory readers).
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{source_name}: {error}")]
    Io {
        source_name: String,
        error: std::io::Error,
    },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{source_name}: {error}")]
    Invalid { source_name: String, error: Error },

    #[error("{source_name}: {message}")]
    Model {
        source_name: String,
        message: String,
    },
}

impl FormatError {
    pub(crate) fn io(source_name: &str, error: std::io::Error) -> Self {
        FormatError::Io {
            source_name: source_name.to_string(),
            error,
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}
