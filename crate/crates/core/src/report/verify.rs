//! Checks the auditor against a simulator run's ground truth.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::ingest::{capture, replay};
use crate::model::{Fixed, MarketEvent, PeriodSpec, SubPeriod};
use crate::reconcile::AuditConfig;
use crate::simulate::{ReportingPolicy, ScenarioSpec, Simulation, TruthLedger};

use super::format::fixed_dp;
use super::pipeline::{audit_events, AuditParams, MarketAudit};
use super::ReportError;

pub const SCENARIO_FILE: &str = "scenario.toml";
pub const TRUE_FILE: &str = "true.cap";
pub const REPORTED_FILE: &str = "reported.cap";
pub const TRUTH_FILE: &str = "truth.json";

/// Writes a simulation as the directory layout `verify` reads.
pub fn write_simulation(sim: &Simulation, spec: &ScenarioSpec, dir: &Path) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(|e| ReportError::io(dir, e))?;
    let toml = toml::to_string(spec).map_err(|e| ReportError::Data(format!("scenario does not serialize: {e}")))?;
    let p = dir.join(SCENARIO_FILE);
    std::fs::write(&p, toml).map_err(|e| ReportError::io(&p, e))?;
    capture(&sim.true_stream, sim.market.clone(), dir.join(TRUE_FILE))?;
    capture(&sim.reported_stream, sim.market.clone(), dir.join(REPORTED_FILE))?;
    let p = dir.join(TRUTH_FILE);
    let file = std::fs::File::create(&p).map_err(|e| ReportError::io(&p, e))?;
    serde_json::to_writer(std::io::BufWriter::new(file), &sim.truth)
        .map_err(|e| ReportError::io(&p, std::io::Error::other(e)))?;
    Ok(())
}

pub struct LoadedSimulation {
    pub spec: ScenarioSpec,
    pub truth: TruthLedger,
    pub reported: Vec<MarketEvent>,
}

pub fn load_simulation(dir: &Path) -> Result<LoadedSimulation, ReportError> {
    let p = dir.join(SCENARIO_FILE);
    let text = std::fs::read_to_string(&p).map_err(|e| ReportError::io(&p, e))?;
    let spec: ScenarioSpec =
        toml::from_str(&text).map_err(|e| ReportError::Usage(format!("{}: {e}", p.display())))?;
    let p = dir.join(TRUTH_FILE);
    let file = std::fs::File::open(&p).map_err(|e| ReportError::io(&p, e))?;
    let truth: TruthLedger = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| ReportError::Data(format!("{}: {e}", p.display())))?;
    let reported = replay(dir.join(REPORTED_FILE))?.into_events();
    Ok(LoadedSimulation { spec, truth, reported })
}

/// Full-period excess implied by the ledger alone: published OI variation
/// between consecutive reports, less the volume of every published trade
/// after the first report.
///
/// Simulated feeds publish the last trade at least two report cadences
/// before the final report, so no volume falls after the audited span.
pub fn expected_full_excess(truth: &TruthLedger) -> Fixed {
    let (Some(first), Some(last)) = (truth.reports.first(), truth.reports.last()) else {
        return Fixed::ZERO;
    };
    let o: Fixed = truth.reports.windows(2).map(|w| (w[1].reported_oi - w[0].reported_oi).abs()).sum();
    let v: Fixed = truth
        .steps
        .iter()
        .filter(|s| !s.hidden)
        .filter(|s| {
            let ts = s.published_ts.unwrap_or(s.ts);
            ts > first.ts && ts <= last.ts
        })
        .map(|s| s.size)
        .sum();
    o.floor_sub(v)
}

/// Each trade alone in its reporting interval, moving OI by its full size,
/// with no other trade within `tau` after that interval closes. Hidden OI
/// movement then equals full-period excess exactly.
fn isolated_trades(truth: &TruthLedger, tau_ms: u32) -> bool {
    let reports: Vec<i64> = truth.reports.iter().map(|r| r.ts).collect();
    let slot = |ts: i64| reports.partition_point(|&r| r < ts);
    let moves_by_size = truth.steps.iter().all(|s| s.delta_oi.abs() == s.size && s.published_ts.is_none());
    let apart = truth.steps.windows(2).all(|w| {
        let i = slot(w[0].ts);
        i != slot(w[1].ts) && reports.get(i).is_none_or(|&close| w[1].ts > close + tau_ms as i64)
    });
    moves_by_size && apart
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub policy: ReportingPolicy,
    pub tau_ms: u32,
    pub checks: Vec<Check>,
    /// Which misreporting pattern the audit exhibits.
    pub signature: String,
    #[serde(skip)]
    pub audit: MarketAudit,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "policy: {} (tau {} ms)", policy_label(&self.policy), self.tau_ms);
        for c in &self.checks {
            let _ = writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let _ = writeln!(out, "signature: {}", self.signature);
        out
    }
}

fn policy_label(p: &ReportingPolicy) -> String {
    match p {
        ReportingPolicy::Honest => "honest".into(),
        ReportingPolicy::Delay { ms } => format!("delay {ms} ms"),
        ReportingPolicy::Hide { fraction } => format!("hide {fraction}"),
        ReportingPolicy::FabricateOi { amplitude } => format!("fabricate_oi {amplitude}"),
    }
}

fn is_benign(policy: &ReportingPolicy, tau_ms: u32) -> bool {
    match policy {
        ReportingPolicy::Honest => true,
        ReportingPolicy::Delay { ms } => *ms <= tau_ms,
        ReportingPolicy::Hide { fraction } => *fraction == 0.0,
        ReportingPolicy::FabricateOi { amplitude } => amplitude.is_zero(),
    }
}

fn windows_with_excess(audit: &MarketAudit, sp: SubPeriod) -> (usize, usize) {
    audit.subperiod(sp).map(|r| (r.excess_windows(), r.valid_windows())).unwrap_or((0, 0))
}

/// Audits the published feed of a simulator run and compares it with the
/// ground truth.
pub fn verify_dir(dir: &Path, tau_ms: u32) -> Result<VerifyReport, ReportError> {
    let sim = load_simulation(dir)?;
    verify_loaded(sim, tau_ms)
}

pub(crate) fn verify_loaded(sim: LoadedSimulation, tau_ms: u32) -> Result<VerifyReport, ReportError> {
    let truth = &sim.truth;
    let (first, last) = match (truth.reports.first(), truth.reports.last()) {
        (Some(a), Some(b)) if a.ts < b.ts => (a.ts, b.ts),
        _ => return Err(ReportError::Data("truth ledger holds fewer than two reports".into())),
    };
    let params = AuditParams {
        period: Some(PeriodSpec::new(first, last, SubPeriod::Full)?),
        audit: AuditConfig::with_tau(tau_ms),
        ..AuditParams::default()
    };
    let audit = audit_events(sim.reported, &params)?;
    let mut checks = Vec::new();

    let net: Fixed = truth.final_positions.iter().copied().sum();
    let long: Fixed = truth.final_positions.iter().filter(|p| p.is_positive()).copied().sum();
    let final_oi = truth.steps.last().map(|s| s.oi_after).unwrap_or(Fixed::ZERO);
    checks.push(Check {
        name: "ledger conservation".into(),
        passed: net.is_zero() && long == final_oi,
        detail: format!("net position {net}, long {long}, final OI {final_oi}"),
    });

    let x = audit.full.x_tv.value();
    let expected = expected_full_excess(truth);
    checks.push(Check {
        name: "full-period excess matches truth".into(),
        passed: x == expected,
        detail: format!("auditor {x}, truth {expected}"),
    });
    checks.push(Check {
        name: "full period fully covered".into(),
        passed: !audit.full.excluded,
        detail: format!("{} intervals, {} invalid", audit.full.intervals, audit.full.invalid_intervals),
    });

    let (m_excess, m_total) = windows_with_excess(&audit, SubPeriod::Min1);
    let policy = sim.spec.policy.clone();
    if is_benign(&policy, tau_ms) {
        let dirty: Vec<String> = audit
            .subperiods
            .iter()
            .filter(|r| r.excess_windows() > 0)
            .map(|r| format!("{} {}", r.excess_windows(), r.subperiod))
            .collect();
        checks.push(Check {
            name: "no excess at any resolution".into(),
            passed: x.is_zero() && dirty.is_empty(),
            detail: if dirty.is_empty() { "all windows reconcile".into() } else { format!("excess in {}", dirty.join(", ")) },
        });
    }
    if let ReportingPolicy::Delay { .. } = policy {
        checks.push(Check {
            name: "delayed volume reconciles over the full period".into(),
            passed: x.is_zero(),
            detail: format!("full-period X_TV {x}"),
        });
    }
    if let ReportingPolicy::Hide { .. } = policy {
        let hidden: Fixed = truth.steps.iter().filter(|s| s.hidden).map(|s| s.delta_oi.abs()).sum();
        if isolated_trades(truth, tau_ms) {
            checks.push(Check {
                name: "excess equals hidden OI movement".into(),
                passed: x == hidden,
                detail: format!("auditor {x}, hidden |dOI| {hidden}"),
            });
        }
    }

    let share = |n: usize, d: usize| if d == 0 { "n/a".to_owned() } else { fixed_dp(Fixed::from_int(n as i64 * 100).checked_div_int(d as u64).expect("d > 0"), 1) + "%" };
    let fine = format!("{m_excess} of {m_total} 1min windows show excess ({})", share(m_excess, m_total));
    let signature = match &policy {
        _ if is_benign(&policy, tau_ms) => format!("consistent at every resolution; {fine}"),
        ReportingPolicy::Delay { .. } if x.is_zero() && m_excess > 0 => {
            format!("eventual consistency on higher timeframes: full-period X_TV = 0 while {fine}")
        }
        ReportingPolicy::Delay { .. } => format!("delayed reporting without fine-grained excess: full-period X_TV = {x}; {fine}"),
        ReportingPolicy::Hide { .. } | ReportingPolicy::FabricateOi { .. } => {
            let p_full = if x.is_zero() { 0 } else { 1 };
            let rising = p_full as u128 * m_total as u128 >= m_excess as u128;
            format!(
                "persistent excess: full-period X_TV = {x}; {fine}; {}",
                if rising { "probability of excess does not fall at higher timeframes" } else { "excess fades at higher timeframes" }
            )
        }
        ReportingPolicy::Honest => unreachable!("honest runs are benign"),
    };
    Ok(VerifyReport { policy, tau_ms, checks, signature, audit })
}
