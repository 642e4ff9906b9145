//! Exchange connectivity and durable capture.

mod capture;
mod connector;
mod deadletter;
mod venue;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{Fixed, MarketId, ModelError};

pub use capture::{
    capture, replay, replay_bytes, CaptureRecord, CaptureWriter, Replay, TruncatedTail, TsSource, CAPTURE_FORMAT,
    CAPTURE_VERSION, DEFAULT_RAW_CAP,
};
pub use connector::{connect_and_stream, EventSink, Sequencer, StreamHandle, StreamOptions, StreamStats};
pub use deadletter::{DeadLetter, DeadLetterEntry};
pub use venue::{
    Action, ClientPing, Compression, Condition, Family, Feed, FlagKind, KindFlag, Normalized, Observation, Outcome,
    PingReply, Rule, Scale, TsFormat, VenueAdapter, VenueCatalog, BUILTIN_VENUES,
};

/// Venue rate-limit floor for open-interest polling.
pub const MIN_OI_POLL_MS: u64 = 100;
pub const DEFAULT_OI_POLL_MS: u64 = 500;
pub const DEFAULT_CLOCK_SKEW_MS: i64 = 5_000;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt capture record at byte offset {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },
    #[error("bad capture header: {0}")]
    BadHeader(String),
    #[error("capture belongs to {found}, expected {expected}")]
    MarketMismatch { expected: String, found: String },
    #[error("seq must strictly increase ({prev} then {next})")]
    SeqNotIncreasing { prev: u64, next: u64 },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{url} refused the client with status {status}")]
    Rejected { url: String, status: u16 },
    #[error("event consumer fell behind; aborting rather than dropping events")]
    Backpressure,
    #[error("connector task failed: {0}")]
    Task(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.to_path_buf(), source }
    }
}

/// Which channel open interest is taken from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OiChannel {
    #[default]
    Poll,
    Push,
}

fn default_poll() -> u64 {
    DEFAULT_OI_POLL_MS
}

fn default_backoff() -> Vec<u64> {
    vec![250, 500, 1_000, 2_000, 5_000, 10_000]
}

fn default_contract_size() -> Fixed {
    Fixed::ONE
}

/// One market's connection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectorConfig {
    pub market: MarketId,
    /// Adapter family whose field mappings apply.
    pub family: String,
    pub ws_endpoint: String,
    #[serde(default)]
    pub rest_oi_endpoint: Option<String>,
    #[serde(default = "default_poll")]
    pub oi_poll_ms: u64,
    #[serde(default = "default_backoff")]
    pub reconnect_backoff_ms: Vec<u64>,
    /// Venue-native symbol, substituted for `{symbol}` in endpoints and
    /// mappings.
    pub symbol_map: String,
    /// Native units per venue contract, applied to `scale = "contract"` fields.
    #[serde(default = "default_contract_size")]
    pub contract_size: Fixed,
    #[serde(default)]
    pub oi_channel: OiChannel,
}

impl ConnectorConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::Config(format!("{}: {m}", self.market)));
        if self.oi_poll_ms < MIN_OI_POLL_MS {
            return bad(format!("oi_poll_ms {} is below the {MIN_OI_POLL_MS} ms floor", self.oi_poll_ms));
        }
        if self.reconnect_backoff_ms.is_empty() || self.reconnect_backoff_ms.contains(&0) {
            return bad("reconnect_backoff_ms must be a non-empty list of positive delays".into());
        }
        if !self.contract_size.is_positive() {
            return bad("contract_size must be positive".into());
        }
        if self.oi_channel == OiChannel::Poll && self.rest_oi_endpoint.is_none() {
            return bad("polled open interest needs rest_oi_endpoint".into());
        }
        for url in std::iter::once(&self.ws_endpoint).chain(self.rest_oi_endpoint.as_ref()) {
            if !url.contains("://") {
                return bad(format!("endpoint {url:?} is not a URL"));
            }
        }
        Ok(())
    }

    pub fn ws_url(&self) -> String {
        self.ws_endpoint.replace("{symbol}", &self.symbol_map)
    }

    pub fn rest_url(&self) -> Option<String> {
        self.rest_oi_endpoint.as_ref().map(|u| u.replace("{symbol}", &self.symbol_map))
    }

    /// Delay before reconnect attempt `attempt` (0-based); the schedule's
    /// last entry repeats.
    pub fn backoff(&self, attempt: usize) -> Duration {
        let s = &self.reconnect_backoff_ms;
        Duration::from_millis(s[attempt.min(s.len() - 1)])
    }
}
