use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("basis mismatch: {0}")]
    Basis(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("input is not mean-free: |integral| = {integral:e} exceeds {tol:e}")]
    NotMeanFree { integral: f64, tol: f64 },
    #[error("ordering band violated: {0}")]
    Band(String),
    #[error("viscosity condition violated: mu = {mu}, lambda = {lambda} (need mu > 0 and 3 lambda + 2 mu > 0)")]
    Viscosity { mu: f64, lambda: f64 },
    #[error("time step {dt:e} exceeds the advective stability bound {bound:e}")]
    Stability { dt: f64, bound: f64 },
    #[error("singular mass matrix: {0}")]
    SingularMass(String),
    #[error("Picard iteration did not converge in {iterations} iterations (last increment {last:e})")]
    Picard {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("non-finite state detected at t = {t}")]
    Diverged {
        t: f64,
        last_good: Box<crate::galerkin::State>,
    },
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("vacuum encountered: {0}")]
    Vacuum(String),
    #[error("cadence mismatch: {0}")]
    Cadence(String),
    #[error("configuration rejected: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("missing snapshot: {0}")]
    MissingSnapshot(String),
    #[error("malformed container: {0}")]
    Format(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
