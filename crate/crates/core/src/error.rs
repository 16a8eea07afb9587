use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} not supported (need d >= {1})")]
    Dimension(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("star adjacency needs 3^d - 1 neighbours; d = {0} exceeds the limit of 12")]
    StarTooLarge(usize),
    #[error("window has {0} sites, above the 2^31 limit")]
    WindowTooLarge(u64),
    #[error("empty window")]
    EmptyWindow,
    #[error("site set universes differ")]
    UniverseMismatch,
    #[error("invalid window descriptor: {0}")]
    Descriptor(String),
    #[error("argument out of supported range: {0}")]
    OutOfRange(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("set of {size} sites exceeds the linear-solve cap of {cap}")]
    SolveCapExceeded { size: usize, cap: usize },
    #[error("Green matrix is ill-conditioned (estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("negative equilibrium weight {weight:.3e} at site {site}")]
    NegativeWeight { site: usize, weight: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("escape radius could not be certified: {0}")]
    EscapeUncertified(String),
    #[error("walk exceeded step budget of {0}")]
    StepBudget(u64),
    #[error("degenerate bridge configuration: {0}")]
    Bridges(String),
    #[error("more than one ubiquitous component in d = {0}")]
    NonUnique(usize),
    #[error("ladder leaves the floating-point range after depth {depth}")]
    LadderOverflow { depth: usize },
    #[error("u range does not bracket the half-crossing level: {0}")]
    NoBracket(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("corrupt sample file: {0}")]
    Format(String),
}
