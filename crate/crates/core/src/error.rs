use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("characteristic 2 is not supported: planar functions do not exist there")]
    CharacteristicTwo,
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("unsupported extension degree {0}")]
    BadDegree(usize),
    #[error("field {p}^{n} exceeds the supported order bound")]
    FieldTooLarge { p: u64, n: usize },
    #[error("code {code} out of range for a field of order {q}")]
    CodeOutOfRange { code: u64, q: u64 },
    #[error("coefficient vector is not a valid element")]
    BadElement,
    #[error("polynomial must be monic of degree >= 1 with reduced coefficients")]
    MalformedPolynomial,
    #[error("no closed-form classification for degree {d} over characteristic {p}")]
    NoAnalyticRule { p: u64, d: usize },
    #[error("field of order {q} exceeds the oracle bound {bound}")]
    OracleBound { q: u64, bound: u64 },
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("verdict log {path} was written under a different configuration")]
    LogMismatch { path: PathBuf },
    #[error("malformed verdict log line {line}: {reason}")]
    LogParse { line: usize, reason: String },
    #[error("cannot allocate {bytes} bytes for exhaustive verification")]
    Allocation { bytes: u64 },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
