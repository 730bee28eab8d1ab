use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid perturbation profile: {0}")]
    InvalidProfile(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("chart is degenerate at (xi, theta) = ({xi}, {theta})")]
    Degenerate { xi: f64, theta: f64 },
    #[error("perturbation too large: max |eps*h*tau| = {margin:.3} (limit 0.5)")]
    PerturbationTooLarge { margin: f64 },
    #[error("quadrature mismatch: operand bound to quadrature {found}, expected {expected}")]
    QuadratureMismatch { expected: u64, found: u64 },
    #[error("point is {distance:.3e} from the surface; point rule needs at least {required:.3e}")]
    NearField { distance: f64, required: f64 },
    #[error("system is ill-conditioned: estimated condition number {0:.3e}")]
    IllConditioned(f64),
    #[error("far-field radius {radius} is below the minimum {minimum}")]
    RadiusTooSmall { radius: f64, minimum: f64 },
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
