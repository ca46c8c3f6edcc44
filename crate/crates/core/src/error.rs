use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-positive price {value} on {date}")]
    NonPositivePrice { date: NaiveDate, value: f64 },

    #[error("series `{name}` has {got} observations, at least {needed} required")]
    TooShort { name: String, needed: usize, got: usize },

    #[error("dates not strictly increasing in `{name}` at {date}")]
    UnorderedDates { name: String, date: NaiveDate },

    #[error("gap of {days} days between GSVI segments ({after} -> {before}) exceeds {max_gap}")]
    SegmentGap {
        after: NaiveDate,
        before: NaiveDate,
        days: i64,
        max_gap: i64,
    },

    #[error("window [{start}, {end}] has {got} observations, at least {needed} required")]
    WindowTooShort {
        start: usize,
        end: usize,
        needed: usize,
        got: usize,
    },

    #[error("rank-deficient regressor matrix (scaled condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("singular Wald middle matrix (condition number {condition:.3e})")]
    SingularMiddle { condition: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{discarded} of {attempted} bootstrap draws discarded (explosive or failed); limit is 10%")]
    BootstrapDiscards { discarded: usize, attempted: usize },

    #[error("index domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure is a numerical one (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. } | Error::SingularMiddle { .. } | Error::Degenerate(_)
        )
    }
}
