use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{format_ts, PeriodSpec, Price};

use super::pipeline::{sha256_hex, AuditParams, InputDigest, MarketAudit};
use super::tables::{
    period_text, sort_period_rows, sort_subperiod_rows, subperiod_text, write_period_csv, write_subperiod_csv,
    write_ticks_csv, PeriodRow, SubPeriodRow,
};
use super::ReportError;

/// Per-market facts recorded alongside the reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSummary {
    pub market: String,
    pub period: PeriodSpec,
    pub period_utc: (String, String),
    pub events: usize,
    pub avg_price: Option<Price>,
    /// Valid share of reconciled intervals.
    pub interval_coverage: f64,
    /// Valid share of windows, per granularity.
    pub window_coverage: BTreeMap<String, f64>,
    pub outages: usize,
    pub ticks_file: String,
}

/// Reproducibility record of one audit run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    /// SHA-256 of the canonical JSON of `settings`.
    pub config_sha256: String,
    pub settings: AuditParams,
    pub tau_ms: u32,
    pub markets: Vec<MarketSummary>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<InputDigest>,
}

fn digest_file(dir: &Path, name: &str) -> Result<InputDigest, ReportError> {
    let path = dir.join(name);
    let bytes = std::fs::read(&path).map_err(|e| ReportError::io(&path, e))?;
    Ok(InputDigest { path: name.to_owned(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

/// Writes tables, tick series and `manifest.json` into `out`.
///
/// Every file is a pure function of the audits and settings, so equal
/// manifests imply byte-identical reports.
pub fn write_reports(
    out: &Path,
    results: &[(InputDigest, MarketAudit)],
    params: &AuditParams,
) -> Result<RunManifest, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Usage("no market audits to report".into()));
    }
    std::fs::create_dir_all(out.join("ticks")).map_err(|e| ReportError::io(out, e))?;

    let mut period_rows: Vec<PeriodRow> = results.iter().map(|(_, a)| PeriodRow::from_audit(a)).collect();
    sort_period_rows(&mut period_rows);
    let mut sub_rows: Vec<SubPeriodRow> = results.iter().map(|(_, a)| SubPeriodRow::from_audit(a)).collect();
    sort_subperiod_rows(&mut sub_rows);

    let (start, end) = results
        .iter()
        .map(|(_, a)| (a.period.start, a.period.end))
        .fold((i64::MAX, i64::MIN), |(s, e), (a, b)| (s.min(a), e.max(b)));

    let mut names = vec!["period.csv".to_owned(), "period.txt".into(), "subperiods.csv".into(), "subperiods.txt".into()];
    write_period_csv(&out.join("period.csv"), &period_rows)?;
    write_text(&out.join("period.txt"), &period_text(&period_rows, start, end))?;
    write_subperiod_csv(&out.join("subperiods.csv"), &sub_rows)?;
    write_text(&out.join("subperiods.txt"), &subperiod_text(&sub_rows))?;

    let mut ordered: Vec<&(InputDigest, MarketAudit)> = results.iter().collect();
    ordered.sort_by(|a, b| a.1.market.cmp(&b.1.market));
    let mut markets = Vec::with_capacity(ordered.len());
    for (_, a) in &ordered {
        let ticks_file = format!("ticks/{}.csv", a.market.file_stem());
        write_ticks_csv(&out.join(&ticks_file), &a.ticks)?;
        names.push(ticks_file.clone());
        markets.push(MarketSummary {
            market: a.market.to_string(),
            period: a.period,
            period_utc: (format_ts(a.period.start), format_ts(a.period.end)),
            events: a.events,
            avg_price: a.avg_price,
            interval_coverage: a.coverage,
            window_coverage: a
                .subperiods
                .iter()
                .map(|r| {
                    let share = if r.windows.is_empty() { 0.0 } else { r.valid_windows() as f64 / r.windows.len() as f64 };
                    (r.subperiod.label().to_owned(), share)
                })
                .collect(),
            outages: a.outages,
            ticks_file,
        });
    }

    let settings_json = serde_json::to_vec(params).expect("settings serialize");
    let manifest = RunManifest {
        software: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        config_sha256: sha256_hex(&settings_json),
        settings: params.clone(),
        tau_ms: params.audit.tau_ms,
        markets,
        inputs: ordered.iter().map(|(d, _)| d.clone()).collect(),
        outputs: names.iter().map(|n| digest_file(out, n)).collect::<Result<_, _>>()?,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&out.join("manifest.json"), &(json + "\n"))?;
    Ok(manifest)
}

fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    std::fs::write(path, text).map_err(|e| ReportError::io(path, e))
}
