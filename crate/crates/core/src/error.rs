use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid beam: {0}")]
    InvalidBeam(String),

    #[error("invalid initial condition: {0}")]
    InvalidInitialCondition(String),

    #[error("camera crossed the event horizon at proper time {tau}")]
    HorizonCrossed { tau: f64 },

    #[error("camera speed reached or exceeded c (|v| = {0})")]
    Superluminal(f64),

    #[error("format error: {0}")]
    Format(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
