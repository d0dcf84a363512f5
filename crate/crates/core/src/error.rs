use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("target mismatch: {0}")]
    TargetMismatch(String),
    #[error("degree is not an integer on cell {cell}: {reason}")]
    NonInteger { cell: usize, reason: String },
    #[error("initial balls overlap (sigma0 = {sigma0})")]
    Overlap { sigma0: f64 },
    #[error("ball radius reached the injectivity scale 1/2 at sigma = {sigma}")]
    Clamped { sigma: f64 },
    #[error("method {method} does not apply: {reason}")]
    MethodMismatch { method: &'static str, reason: String },
    #[error("exhaustive search too large: {0}")]
    SizeCap(String),
    #[error("chain is not a cycle")]
    NotACycle,
    #[error("sequence step {step} has flat norm {norm} >= fineness {delta}")]
    Fineness { step: usize, norm: f64, delta: f64 },
    #[error("filling of step {step} has mass {mass} >= eps0/2 = {limit}")]
    FillTooBig { step: usize, mass: f64, limit: f64 },
    #[error("sequence must start and end at the zero chain")]
    NotClosed,
    #[error("offset search failed; best ratios {best:?}")]
    OffsetSearch { best: Vec<f64> },
    #[error("homotopy obstruction at vertex {vertex}")]
    HomotopyObstruction { vertex: usize },
    #[error("projection unsafe at {} vertices (first {:?})", .vertices.len(), .vertices.first())]
    ProjectionUnsafe { vertices: Vec<usize> },
    #[error("string method diverged after {iters} iterations")]
    Diverged { iters: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
