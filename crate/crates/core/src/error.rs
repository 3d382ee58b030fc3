use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dressed potential is not finite at ({x}, {y}, {z}): a phase node lies on the evaluation point")]
    NonFinite { x: f64, y: f64, z: f64 },

    #[error("degenerate configuration: electron {electron} has kinetic denominator {denominator:e}")]
    DegenerateConfiguration { electron: usize, denominator: f64 },

    #[error("minimisation did not converge in any of {restarts} restarts (best gradient norm {grad_norm:e})")]
    NotConverged { restarts: usize, grad_norm: f64 },

    #[error("overlap matrix is numerically singular: {kept} of {total} directions kept, {needed} required")]
    LinearDependence { kept: usize, total: usize, needed: usize },

    #[error("quadrature failed: achieved error {achieved:e}, requested {requested:e}")]
    QuadratureFailure { achieved: f64, requested: f64 },

    #[error("SCF did not converge after {iterations} iterations (dE = {delta_e:e}, rms(dP) = {delta_p:e})")]
    ScfNotConverged {
        iterations: usize,
        delta_e: f64,
        delta_p: f64,
        trace: Vec<f64>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
