use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integral diverges at small frequency: effective power {power} <= -1")]
    IrDivergent { power: f64 },

    #[error("form factor has no integrable decay: {0}")]
    CutoffMissing(String),

    #[error("infrared behaviour of tabulated profile is indeterminate: {0}")]
    Indeterminate(String),

    #[error("time {t} exceeds the supported oscillatory range (|t| <= {max})")]
    OscillationOverflow { t: f64, max: f64 },

    #[error("Hamiltonian is unbounded from below (coupling norm {norm} > bound {bound})")]
    Unbounded { norm: f64, bound: f64 },

    #[error("field vectors live on different frequency grids")]
    GridMismatch,

    #[error("inverse temperature must be positive, got {0}")]
    BetaNonPositive(f64),

    #[error("resolvent argument {re}+{im}i lies on the spectral cut [0, inf)")]
    OnCut { re: f64, im: f64 },

    #[error("eigen-decomposition failed: {0}")]
    EigenFailure(String),

    #[error("momentum intervals overlap or touch (distance {0})")]
    IntervalsOverlap(f64),

    #[error("fit window too short: {0}")]
    WindowTooShort(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
