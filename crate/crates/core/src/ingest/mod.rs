//! Turning raw access-log lines into filtered navigations.
//!
//! The pipeline stage reads server access logs (plain or gzip-compressed, in
//! Common or Combined Log Format), identifies users by client address plus
//! user-agent string, groups each user's requests into *navigations* — runs
//! of consecutive requests never more than a session timeout apart — and then
//! keeps only navigations that look like genuine browsing activity.

mod filter;
mod logparse;
mod session;

pub use filter::{drop_extreme_navigations, filter_navigations, FilterRules};
pub use logparse::{open_log, parse_log, LogFormat, ParseOutcome};
pub use session::{sessionize, DEFAULT_SESSION_TIMEOUT_SECS};

use chrono::{DateTime, Utc};
use thiserror::Error;

/// Errors raised while ingesting logs.
#[derive(Debug, Error)]
pub enum IngestError {
    /// The input stream could not be read at all (malformed single lines are
    /// skipped and counted instead).
    #[error("failed to read log input")]
    Io(#[from] std::io::Error),
    /// Quantile parameters must lie in (0, 1].
    #[error("quantile must lie in (0, 1], got {value}")]
    InvalidQuantile { value: f64 },
    /// A navigation must contain at least one request.
    #[error("a navigation cannot be empty")]
    EmptyNavigation,
}

/// One parsed access-log request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRequest {
    /// Request time, normalized to UTC.
    pub timestamp: DateTime<Utc>,
    /// User identity: client address plus user-agent string (address alone
    /// for the Common format, which carries no agent).
    pub user_key: String,
    /// Normalized URL path of the requested resource.
    pub resource: String,
    /// HTTP status code.
    pub status: u16,
    /// Transferred bytes; `-` in the log reads as 0.
    pub bytes: u64,
}

/// A run of one user's consecutive requests, never more than the session
/// timeout apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Navigation {
    /// Sequential identifier, assigned in (start time, user key) order.
    pub id: u64,
    /// The owning user's key.
    pub user_key: String,
    /// Member requests in ascending time order.
    pub requests: Vec<RawRequest>,
}

impl Navigation {
    /// Builds a navigation from non-empty, time-ordered requests.
    pub fn new(id: u64, requests: Vec<RawRequest>) -> Result<Self, IngestError> {
        let user_key = requests
            .first()
            .ok_or(IngestError::EmptyNavigation)?
            .user_key
            .clone();
        Ok(Navigation {
            id,
            user_key,
            requests,
        })
    }

    /// Timestamp of the first request.
    pub fn start(&self) -> DateTime<Utc> {
        self.requests
            .first()
            .expect("navigations are non-empty")
            .timestamp
    }

    /// Timestamp of the last request.
    pub fn end(&self) -> DateTime<Utc> {
        self.requests
            .last()
            .expect("navigations are non-empty")
            .timestamp
    }

    /// Number of requests.
    pub fn n_requests(&self) -> usize {
        self.requests.len()
    }

    /// Total duration in seconds (last minus first request).
    pub fn duration_seconds(&self) -> f64 {
        (self.end() - self.start()).num_seconds() as f64
    }

    /// Sum of transferred bytes over all requests.
    pub fn total_bytes(&self) -> u64 {
        self.requests.iter().map(|r| r.bytes).sum()
    }
}
