use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {0} lies outside the base space")]
    OutsideBase(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("ill-conditioned inverse: |a_j(λ)| = {modulus:e} is below {threshold:e}")]
    IllConditioned { modulus: f64, threshold: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("degenerate homogeneous map: min |F| on the unit sphere is {0:e}")]
    Degenerate(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
