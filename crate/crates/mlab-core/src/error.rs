use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("derivative order ({0},{1}) not supported; total order must be 1 or 2")]
    DerivativeOrder(u32, u32),
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("grid under-resolved: need {required} samples along {axis}, have {available}")]
    UnderResolved { axis: &'static str, required: usize, available: usize },
    #[error("field under-resolved: {tail:.3e} of its fluctuation power sits in the top of the spectrum")]
    UnderResolvedSpectrum { tail: f64 },
    #[error("model mismatch: expected {expected}, found {found}")]
    ModelMismatch { expected: &'static str, found: &'static str },
    #[error("unsupported norm exponent {0}")]
    UnsupportedExponent(String),
    #[error("profile infeasible: {0}")]
    Infeasible(String),
    #[error("no regime hypothesis holds: {0}")]
    NoRegime(String),
    #[error("configuration is not admissible: {0}")]
    Inadmissible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;
