use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error taxonomy. The CLI maps these onto exit codes, so each
/// failure mode a caller might branch on gets its own variant.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // hilbert
    #[error("index or coordinate out of range: {0}")]
    OutOfRange(String),

    // bytevis
    #[error("empty content: nothing to visualize")]
    EmptyContent,
    #[error("unsupported or corrupt image: {0}")]
    ImageFormat(String),

    // fetcher
    #[error("invalid URL {0:?}")]
    InvalidUrl(String),
    #[error("unsupported URL scheme {0:?} (only http and https)")]
    UnsupportedScheme(String),
    #[error("name resolution failed for {0:?}")]
    NameResolution(String),
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {0}")]
    HttpStatus(u16),
    #[error("response body exceeds the {limit} byte cap")]
    BodyTooLarge { limit: u64 },
    #[error("too many redirects")]
    TooManyRedirects,
    #[error("transport error: {0}")]
    Transport(String),

    // store
    #[error("store corrupt: {0}")]
    StoreCorrupt(String),
    #[error("store write failed: {0}")]
    StoreWriteFailed(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("manifest parse error at {path}:{line}: {message}")]
    ManifestParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    // classifier
    #[error("shape error: {0}")]
    BadShape(String),
    #[error("bad model file: {0}")]
    ModelFormat(String),
    #[error("degenerate dataset: training needs at least one sample per class")]
    DegenerateDataset,

    // metrics
    #[error("metric undefined: zero denominator")]
    Undefined,

    // shared
    #[error("unknown label {0:?}")]
    InvalidLabel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
