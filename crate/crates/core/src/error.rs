use thiserror::Error;

/// Errors surfaced by the geometry, flow and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("metric is degenerate at ({x}, {y}): det g = {det:e}")]
    DegenerateMetric { x: f64, y: f64, det: f64 },

    #[error("point ({x}, {y}) is not on the boundary: rho = {rho:e}")]
    NotOnBoundary { x: f64, y: f64, rho: f64 },

    #[error("trajectory left the computational region without crossing the boundary (t = {t})")]
    Escape { t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e}); system too stiff for the tolerances")]
    Stiffness { t: f64, h: f64 },

    #[error("shooting failed to converge: {context} (best residual {residual:e})")]
    ShootingFailed { context: String, residual: f64 },

    #[error("map is not a diffeomorphism: jacobian determinant {det:e} at ({x}, {y})")]
    InvalidDiffeo { x: f64, y: f64, det: f64 },

    #[error("conjugate gradient failed to reach {target:e} in {iters} iterations (residual {residual:e})")]
    CgStagnation {
        iters: usize,
        residual: f64,
        target: f64,
    },

    #[error("resolution too coarse: {0}")]
    Resolution(String),

    #[error("invalid configuration at {path}: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
