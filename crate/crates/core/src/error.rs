use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh needs at least 16 intervals, got {0}")]
    TooFewNodes(usize),
    #[error("grading exponent must be finite and >= 1, got {0}")]
    BadGrading(f64),
    #[error("stencil order must be 2 or 4, got {0}")]
    BadStencilOrder(usize),
    #[error("mesh nodes invalid: {0}")]
    BadNodes(String),
    #[error("field does not live on this mesh")]
    MeshMismatch,
    #[error("derivative order {0} unsupported (max 4)")]
    DerivativeOrder(usize),
    #[error("norm index {0} unsupported for {1}")]
    NormIndex(usize, &'static str),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("lemma hypothesis violated for {lemma}: {detail}")]
    Hypothesis { lemma: &'static str, detail: String },
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("phi'(1) = {0:e} is degenerate; fundamental pair inconsistent")]
    DegenerateWronskian(f64),
    #[error("tridiagonal system singular at row {0}")]
    SingularSystem(usize),
    #[error("tau(0) must vanish, got {0:e}")]
    TensionNotPinned(f64),
    #[error("initial data violate constraints: {0}")]
    Constraint(String),
    #[error("time step {dt:e} exceeds CFL bound {bound:e}")]
    Cfl { dt: f64, bound: f64 },
    #[error("NaN detected at t = {t}: {detail}")]
    NanAbort { t: f64, detail: String },
    #[error("need at least {need} samples, have {have}")]
    InsufficientSamples { need: usize, have: usize },
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("input data: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
