use std::path::PathBuf;

use thiserror::Error;

use crate::panel::Quarter;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by drivers to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: header mismatch, expected `{expected}`, found `{found}`")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}: row {row}: {message}")]
    Row {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("invalid quarter `{0}`")]
    QuarterParse(String),

    #[error("series `{series}` has non-positive value {value} at {quarter}")]
    NonPositive {
        series: String,
        quarter: Quarter,
        value: f64,
    },

    #[error("series `{series}` is missing quarter {quarter}")]
    MissingQuarter { series: String, quarter: Quarter },

    #[error("unknown state code `{0}`")]
    UnknownState(String),

    #[error("no common quarter across subset; limited by `{limiting}`")]
    NoCommonQuarter { limiting: String },

    #[error("unknown series `{0}`")]
    UnknownSeries(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("design matrix is rank deficient; dependent columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("cochrane-orcutt: |rho| = {rho:.6} is not below 1")]
    NonStationary { rho: f64 },

    #[error("cochrane-orcutt did not converge after {iterations} iterations (last rho {rho:.6})")]
    NotConverged { rho: f64, iterations: usize },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::RankDeficient { .. }
            | Error::ZeroVariance(_)
            | Error::NonStationary { .. }
            | Error::NotConverged { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}
