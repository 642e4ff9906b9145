//! Audit pipelines, report emission, simulator verification and the
//! command-line surface.

pub mod cli;
mod config;
pub mod format;
mod manifest;
mod pipeline;
mod tables;
mod verify;

use std::path::{Path, PathBuf};

use crate::ingest::IngestError;
use crate::model::ModelError;
use crate::reconcile::ReconcileError;
use crate::simulate::SimError;
use crate::stats::StatsError;

pub use config::{AuditSection, CaptureSection, RunConfig, RUN_CONFIG_VERSION};
pub use manifest::{write_reports, MarketSummary, RunManifest};
pub use pipeline::{audit_capture, audit_captures, audit_events, sha256_hex, AuditParams, InputDigest, MarketAudit, SubPeriodResult};
pub use tables::{
    period_text, sort_period_rows, sort_subperiod_rows, subperiod_text, write_period_csv, write_subperiod_csv,
    write_ticks_csv, PeriodRow, SubPeriodRow,
};
pub use verify::{expected_full_excess, load_simulation, verify_dir, write_simulation, Check, LoadedSimulation, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_ORACLE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Reconcile(#[from] ReconcileError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("oracle violation: {0}")]
    Oracle(String),
}

impl ReportError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ReportError::Io { path: path.to_path_buf(), source }
    }

    /// Prefixes data errors with the file they came from.
    pub(crate) fn context(self, path: &Path) -> Self {
        match self {
            ReportError::Usage(_) | ReportError::Oracle(_) | ReportError::Io { .. } => self,
            other => ReportError::Data(format!("{}: {other}", path.display())),
        }
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Usage(_) | ReportError::Ingest(IngestError::Config(_)) => EXIT_USAGE,
            ReportError::Oracle(_) => EXIT_ORACLE,
            _ => EXIT_DATA,
        }
    }
}
