use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::{info, warn};

use crate::ingest::replay_bytes;
use crate::model::{order_events, Amount, EventKind, MarketEvent, MarketId, PeriodSpec, Price, SubPeriod};
use crate::reconcile::{audit_windows, reconcile, tick_excess_series, AuditConfig, PeriodAudit, TickPoint};
use crate::stats::{avg_price, subperiod_stats, PriceWeighting, StatsError, SubPeriodStats};

use super::ReportError;

/// What to audit and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditParams {
    /// Defaults to the span between each market's first and last OI sample.
    pub period: Option<PeriodSpec>,
    pub subperiods: Vec<SubPeriod>,
    pub audit: AuditConfig,
    /// Fixed conversion price; otherwise each market's own mean trade price.
    pub avg_price: Option<Price>,
    pub weighting: PriceWeighting,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams {
            period: None,
            subperiods: vec![SubPeriod::Full, SubPeriod::D1, SubPeriod::H1, SubPeriod::Min1],
            audit: AuditConfig::default(),
            avg_price: None,
            weighting: PriceWeighting::Unweighted,
        }
    }
}

/// Windows of one granularity and their summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubPeriodResult {
    pub subperiod: SubPeriod,
    pub windows: Vec<PeriodAudit>,
    /// Absent when no window is valid.
    pub stats: Option<SubPeriodStats>,
}

impl SubPeriodResult {
    pub fn valid_windows(&self) -> usize {
        self.windows.iter().filter(|w| !w.excluded).count()
    }

    pub fn excess_windows(&self) -> usize {
        self.windows.iter().filter(|w| !w.excluded && w.has_excess()).count()
    }
}

/// Everything the audit produced for one market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketAudit {
    pub market: MarketId,
    pub events: usize,
    pub period: PeriodSpec,
    pub avg_price: Option<Price>,
    pub full: PeriodAudit,
    /// Granularities other than the full period, coarsest first.
    pub subperiods: Vec<SubPeriodResult>,
    pub ticks: Vec<TickPoint>,
    /// Share of reconciled intervals that are valid.
    pub coverage: f64,
    pub outages: usize,
    pub unattributed_volume: Amount,
}

impl MarketAudit {
    pub fn subperiod(&self, sp: SubPeriod) -> Option<&SubPeriodResult> {
        self.subperiods.iter().find(|r| r.subperiod == sp)
    }
}

/// SHA-256 of one input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reconciles and audits one market's events.
pub fn audit_events(events: Vec<MarketEvent>, params: &AuditParams) -> Result<MarketAudit, ReportError> {
    let events = order_events(events)?;
    let rec = reconcile(&events, &params.audit)?;
    let market = (*rec.market).clone();
    let period = match params.period {
        Some(p) => p.with_subperiod(SubPeriod::Full),
        None => sample_span(&events)?,
    };

    let full = audit_windows(&market, &rec.intervals, &rec.outages, period)?
        .pop()
        .expect("the full period is one window");
    let mut grains: Vec<SubPeriod> =
        params.subperiods.iter().copied().filter(|&s| s != SubPeriod::Full).collect();
    grains.sort();
    grains.dedup();

    let avg_price = match params.avg_price {
        Some(p) => Some(p),
        None => match avg_price(&events, &period, params.weighting) {
            Ok(p) => Some(p),
            Err(StatsError::NoPriceBasis) => None,
            Err(e) => return Err(e.into()),
        },
    };

    let mut subperiods = Vec::with_capacity(grains.len());
    for sp in grains {
        let windows = audit_windows(&market, &rec.intervals, &rec.outages, period.with_subperiod(sp))?;
        let stats = match subperiod_stats(&windows) {
            Ok(s) => Some(match avg_price {
                Some(p) => s.with_avg_price(p),
                None => s,
            }),
            Err(StatsError::NoCoverage) => None,
            Err(e) => return Err(e.into()),
        };
        subperiods.push(SubPeriodResult { subperiod: sp, windows, stats });
    }

    let lo = rec.intervals.partition_point(|iv| iv.t_end < period.start);
    let hi = rec.intervals.partition_point(|iv| iv.t_end <= period.end);
    let ticks = tick_excess_series(&rec.intervals[lo..hi]);
    if full.excluded {
        warn!(%market, "full period overlaps an outage or invalid interval");
    }
    Ok(MarketAudit {
        events: events.len(),
        coverage: rec.coverage(),
        outages: rec.outages.len(),
        unattributed_volume: rec.unattributed_volume,
        market,
        period,
        avg_price,
        full,
        subperiods,
        ticks,
    })
}

fn sample_span(events: &[MarketEvent]) -> Result<PeriodSpec, ReportError> {
    let mut samples = events.iter().filter(|e| e.kind == EventKind::OiSample).map(|e| e.ts);
    let first = samples.next();
    let last = samples.last();
    match (first, last) {
        (Some(a), Some(b)) if a < b => Ok(PeriodSpec::new(a, b, SubPeriod::Full)?),
        _ => Err(ReportError::Data("need open-interest samples at two distinct times".into())),
    }
}

/// Replays and audits one capture file.
pub fn audit_capture(path: &Path, params: &AuditParams) -> Result<(InputDigest, MarketAudit), ReportError> {
    let bytes = std::fs::read(path).map_err(|e| ReportError::io(path, e))?;
    let digest = InputDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 };
    let replay = replay_bytes(&bytes).map_err(|e| ReportError::Data(format!("{}: {e}", path.display())))?;
    if let Some(t) = &replay.truncated {
        warn!(path = %path.display(), offset = t.offset, "capture ends in a torn record; audited the complete prefix");
    }
    drop(bytes);
    let audit = audit_events(replay.into_events(), params).map_err(|e| e.context(path))?;
    info!(market = %audit.market, events = audit.events, "audited");
    Ok((digest, audit))
}

/// Audits capture files in parallel, one market per file. Results come
/// back in input order.
pub fn audit_captures(paths: &[PathBuf], params: &AuditParams) -> Result<Vec<(InputDigest, MarketAudit)>, ReportError> {
    let results: Vec<_> = paths.par_iter().map(|p| audit_capture(p, params)).collect::<Result<_, _>>()?;
    crate::model::ensure_unique(results.iter().map(|(_, a)| &a.market))?;
    Ok(results)
}
