use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponents: {0}")]
    Exponent(String),
    #[error("node index {index} out of range for a lattice with {len} nodes")]
    Index { index: usize, len: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error("singular evaluation: {0}")]
    Singularity(String),
    #[error("degenerate pair: the two arguments coincide")]
    DegeneratePair,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("projection onto the sphere is undefined for the zero vector")]
    ProjectionUndefined,
    #[error("chart error: {0}")]
    Chart(String),
    #[error("boundary data incomplete: {0}")]
    Boundary(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("variant precondition violated: {0}")]
    Variant(String),
    #[error("axiom probe failed: {0}")]
    Axiom(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("outside the scope of the measure estimates: {0}")]
    Scope(String),
    #[error("sampling budget exhausted: {0}")]
    Sampling(String),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
