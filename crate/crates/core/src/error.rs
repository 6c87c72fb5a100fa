use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty trace")]
    EmptyTrace,
    #[error("out of frame: ({lat}, {lon}) lies outside the projection frame")]
    OutOfFrame { lat: f64, lon: f64 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("unsorted: point {index} at t={t} precedes its predecessor")]
    Unsorted { index: usize, t: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no donors: the {0} pool is empty")]
    NoDonors(&'static str),
    #[error("not a PLT file: {0}")]
    NotPlt(String),
    #[error("insufficient truth density: {0}")]
    InsufficientDensity(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
