use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("unsupported dimension {dim}: {reason}")]
    UnsupportedDimension { dim: usize, reason: &'static str },
    #[error("measure restricted to the ball has zero mass")]
    EmptyMeasure,
    #[error("invalid covering: shrunken balls {first} and {second} intersect")]
    CoveringInvalid { first: usize, second: usize },
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("bad-ball content {content} exceeds bound {bound} at generation {generation}")]
    DecayViolation {
        generation: usize,
        content: f64,
        bound: f64,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
