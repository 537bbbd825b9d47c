use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is off the quadric: {0}")]
    OffQuadric(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("direction is not unit (norm squared {0})")]
    NonUnit(f64),
    #[error("outside the model domain: {0}")]
    Domain(String),
    #[error("surface is not strictly convex at {count} nodes (first at row {first_row}, column {first_col})")]
    NonConvex {
        count: usize,
        first_row: usize,
        first_col: usize,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("inadmissible target metric: {0}")]
    Inadmissible(String),
    #[error("solver stalled: {0}")]
    Stall(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
