use thiserror::Error;

use crate::validate::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Malformed or inconsistent configuration, including grid problems.
    #[error("configuration error: {0}")]
    Config(String),

    /// A state left the finite range during integration.
    #[error("divergence at step {step} (t = {time}): state {value} is not finite or exceeds the guard")]
    Divergence { step: usize, time: f64, value: f64 },

    #[error(
        "kernel window outside observation window: t = {t}, phi = {phi}, support [A, B] = [{a}, {b}], \
         window [{lo}, {hi}] not inside [0, T = {horizon}]",
        lo = t + phi * a,
        hi = t + phi * b
    )]
    Boundary { t: f64, phi: f64, a: f64, b: f64, horizon: f64 },

    #[error("bandwidth phi = {phi} is below the resolution floor 10*dt = {floor}")]
    Resolution { phi: f64, floor: f64 },

    #[error("capability error: {0}")]
    Capability(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("scenario failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
