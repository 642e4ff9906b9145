//! The run configuration file: markets to capture and audit settings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::{ConnectorConfig, Family, VenueCatalog, DEFAULT_CLOCK_SKEW_MS};
use crate::model::{PeriodSpec, Price, SubPeriod};
use crate::reconcile::AuditConfig;
use crate::stats::PriceWeighting;

use super::{AuditParams, ReportError};

pub const RUN_CONFIG_VERSION: u32 = 1;

fn version() -> u32 {
    RUN_CONFIG_VERSION
}

fn yes() -> bool {
    true
}

fn skew() -> i64 {
    DEFAULT_CLOCK_SKEW_MS
}

fn queue() -> usize {
    65_536
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureSection {
    /// `exchange/symbol` names to capture; empty selects every market the
    /// file itself declares.
    #[serde(default)]
    pub markets: Vec<String>,
    /// Keep each payload's raw bytes in the capture.
    #[serde(default = "yes")]
    pub keep_raw: bool,
    #[serde(default = "skew")]
    pub max_skew_ms: i64,
    #[serde(default = "queue")]
    pub queue_capacity: usize,
    #[serde(default)]
    pub duration_s: Option<u64>,
    /// Start from the bundled venue catalog.
    #[serde(default = "yes")]
    pub builtin_venues: bool,
}

impl Default for CaptureSection {
    fn default() -> Self {
        CaptureSection {
            markets: Vec::new(),
            keep_raw: true,
            max_skew_ms: DEFAULT_CLOCK_SKEW_MS,
            queue_capacity: queue(),
            duration_s: None,
            builtin_venues: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default)]
    pub tau_ms: Option<u32>,
    #[serde(default)]
    pub subperiods: Option<Vec<SubPeriod>>,
    /// `start..end`, as accepted by the `--period` flag.
    #[serde(default)]
    pub period: Option<String>,
    #[serde(default)]
    pub avg_price: Option<Price>,
    #[serde(default)]
    pub weighting: PriceWeighting,
    /// Zero disables stale-feed detection.
    #[serde(default)]
    pub stale_factor: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "version")]
    pub version: u32,
    #[serde(default)]
    pub capture: CaptureSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default, rename = "family")]
    pub families: Vec<Family>,
    #[serde(default, rename = "market")]
    pub markets: Vec<ConnectorConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: RUN_CONFIG_VERSION,
            capture: CaptureSection::default(),
            audit: AuditSection::default(),
            families: Vec::new(),
            markets: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ReportError::Usage(format!("config: {e}")))?;
        if cfg.version != RUN_CONFIG_VERSION {
            return Err(ReportError::Usage(format!("config: unsupported version {}", cfg.version)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|e| ReportError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ReportError::Usage(format!("{}: {e}", path.display())))
    }

    /// The bundled catalog (unless disabled) overlaid with this file's
    /// families and markets.
    pub fn catalog(&self) -> VenueCatalog {
        let own = VenueCatalog { version: 1, families: self.families.clone(), markets: self.markets.clone() };
        if self.capture.builtin_venues {
            VenueCatalog::builtin().merge(own)
        } else {
            own
        }
    }

    /// Markets to capture, resolved against [`Self::catalog`].
    pub fn selected_markets(&self, only: &[String]) -> Result<Vec<ConnectorConfig>, ReportError> {
        let catalog = self.catalog();
        let names = if only.is_empty() { &self.capture.markets } else { only };
        if names.is_empty() {
            if self.markets.is_empty() {
                return Err(ReportError::Usage("config selects no markets".into()));
            }
            return Ok(self.markets.clone());
        }
        names
            .iter()
            .map(|n| {
                let (ex, sym) = n
                    .split_once('/')
                    .ok_or_else(|| ReportError::Usage(format!("market {n:?} is not exchange/symbol")))?;
                catalog.market(ex, sym).cloned().ok_or_else(|| ReportError::Usage(format!("unknown market {n:?}")))
            })
            .collect()
    }

    pub fn audit_params(&self) -> Result<AuditParams, ReportError> {
        let a = &self.audit;
        let mut audit = AuditConfig::default();
        if let Some(t) = a.tau_ms {
            audit.tau_ms = t;
        }
        match a.stale_factor {
            Some(0) => audit.stale_factor = None,
            Some(f) => audit.stale_factor = Some(f),
            None => {}
        }
        let period = a
            .period
            .as_deref()
            .map(|p| PeriodSpec::parse_range(p, SubPeriod::Full))
            .transpose()
            .map_err(|e| ReportError::Usage(format!("config: {e}")))?;
        let defaults = AuditParams::default();
        Ok(AuditParams {
            period,
            subperiods: a.subperiods.clone().unwrap_or(defaults.subperiods),
            audit,
            avg_price: a.avg_price,
            weighting: a.weighting,
        })
    }
}
