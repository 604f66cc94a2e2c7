use thiserror::Error;

pub type Result<T, E = CdfError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CdfError {
    #[error("argument error: {0}")]
    Argument(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    /// A derivative was requested at a point where it is unbounded.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    Validation(String),

    #[error("brute-force oracle too large: {size} assignments exceed the cap of {cap}")]
    OracleTooLarge { size: u128, cap: u128 },

    #[error(
        "treewidth too large: eliminating variable {variable} creates clique {clique:?} of width {width} (cap {cap})"
    )]
    TreewidthTooLarge {
        variable: usize,
        clique: Vec<usize>,
        width: usize,
        cap: usize,
    },

    #[error("degenerate conditional for variable {variable}: all weights are zero")]
    DegenerateConditional { variable: usize },

    #[error("unsupported factor family for {operation}: factor {factor} is {family}")]
    UnsupportedFamily {
        operation: &'static str,
        factor: usize,
        family: &'static str,
    },

    #[error("failed to converge: {0}")]
    Convergence(String),

    #[error("row {row}: {source}")]
    AtRow {
        row: usize,
        #[source]
        source: Box<CdfError>,
    },

    #[error("sampler error: {0}")]
    Sampler(String),
}

impl CdfError {
    pub fn at_row(self, row: usize) -> Self {
        CdfError::AtRow {
            row,
            source: Box::new(self),
        }
    }

    /// Strips any row annotations.
    pub fn root(&self) -> &CdfError {
        match self {
            CdfError::AtRow { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            CdfError::Domain(_)
                | CdfError::DegenerateConditional { .. }
                | CdfError::Convergence(_)
                | CdfError::Sampler(_)
        )
    }
}
