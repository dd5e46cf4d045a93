use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice radius {0} outside 1..=32")]
    LatticeRange(usize),
    #[error("fields live on different lattices (n={left} vs n={right})")]
    LatticeMismatch { left: usize, right: usize },
    #[error("input is not divergence-free (max |k·f(k)| = {residual:e})")]
    NotDivergenceFree { residual: f64 },
    #[error("truncation radius {requested} outside 1..={max}")]
    TruncationRange { requested: usize, max: usize },
    #[error("mode {0:?} is not admissible here")]
    Domain([i32; 3]),
    #[error("degenerate triad: {0}")]
    DegenerateTriad(String),
    #[error("census size guard: lattice radius {0} exceeds 12")]
    CensusGuard(usize),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("time step {dt} violates guard dt <= {limit}")]
    TimeStepGuard { dt: f64, limit: f64 },
    #[error("non-finite state at t = {time}")]
    BlowUp {
        time: f64,
        partial: Box<crate::dynamics::Trajectory>,
    },
    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),
    #[error("resolution guard: t = {t} needs {points} quadrature samples (budget {budget})")]
    ResolutionGuard {
        t: f64,
        points: usize,
        budget: usize,
    },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
