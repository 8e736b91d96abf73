use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("torus dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix size mismatch: expected {expected}x{expected}, found {found}x{found}")]
    MatrixSize { expected: usize, found: usize },

    #[error("matrix is not in SL_m: det = {det}")]
    NotSpecialLinear { det: f64 },

    #[error("singular matrix under inversion: det = {det:e}")]
    Singular { det: f64 },

    #[error("invalid trigonometric polynomial: {0}")]
    TrigPoly(String),

    #[error("invalid measure: {0}")]
    Measure(String),

    #[error("convolution power needs {atoms} atoms, above the cap of {cap}; compute on the Fourier side instead")]
    AtomCap { atoms: usize, cap: usize },

    #[error("occupancy table of {cells} cells exceeds the cap of {cap}")]
    OccupancyCap { cells: usize, cap: usize },

    #[error("transport solver failed: {0}")]
    Transport(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
