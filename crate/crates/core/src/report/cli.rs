//! `oi-audit` subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tracing::{error, info, warn};

use crate::ingest::{connect_and_stream, CaptureWriter, OiChannel, StreamOptions, StreamStats};
use crate::model::{PeriodSpec, Price, SubPeriod};
use crate::simulate::{generate, ScenarioSpec};
use crate::stats::PriceWeighting;

use super::{
    audit_captures, period_text, sha256_hex, subperiod_text, verify_dir, write_reports, write_simulation, AuditParams,
    PeriodRow, ReportError, RunConfig, SubPeriodRow, EXIT_DATA, EXIT_OK, EXIT_ORACLE, EXIT_USAGE,
};

#[derive(Debug, Parser)]
#[command(name = "oi-audit", version, about = "Reconcile open-interest changes against reported volume")]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record live venue feeds into capture files until interrupted.
    Capture(CaptureArgs),
    /// Audit capture files and write period, sub-period and tick reports.
    Audit(AuditArgs),
    /// Run a synthetic venue and write its feeds and ground truth.
    Simulate(SimulateArgs),
    /// Audit a simulator run and check the result against its ground truth.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct CaptureArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Stop after this many seconds.
    #[arg(long)]
    duration_s: Option<u64>,
    /// Capture only these `exchange/symbol` markets.
    #[arg(long, value_delimiter = ',')]
    markets: Vec<String>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Capture files, or directories whose `.cap` files are all audited.
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// `start..end` as epoch ms, RFC 3339 or `YYYY-MM-DD`.
    #[arg(long)]
    period: Option<String>,
    #[arg(long, value_delimiter = ',')]
    subperiods: Option<Vec<SubPeriod>>,
    #[arg(long)]
    tau_ms: Option<u32>,
    /// Conversion price for coin-denominated markets.
    #[arg(long)]
    avg_price: Option<String>,
    /// Weight the average price by trade size.
    #[arg(long)]
    volume_weighted: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    tau_ms: u32,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

/// Entry point for the binary: parses `std::env::args` and returns the
/// process exit status.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Runs one command line. Never panics on bad input; failures map to exit
/// statuses 1 (usage), 2 (data) and 3 (oracle violation).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    let mut stdout = std::io::stdout().lock();
    let res = match cli.command {
        Command::Capture(a) => capture_cmd(a, &mut stdout),
        Command::Audit(a) => audit_cmd(a, &mut stdout),
        Command::Simulate(a) => simulate_cmd(a, &mut stdout),
        Command::Verify(a) => verify_cmd(a, &mut stdout),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn out_err(e: std::io::Error) -> ReportError {
    ReportError::io(Path::new("<stdout>"), e)
}

fn resolve_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, ReportError> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| ReportError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "cap"))
                .collect();
            found.sort();
            files.extend(found);
        } else if p.exists() {
            files.push(p.clone());
        } else {
            return Err(ReportError::Usage(format!("{}: no such file or directory", p.display())));
        }
    }
    if files.is_empty() {
        return Err(ReportError::Usage("no capture files to audit".into()));
    }
    Ok(files)
}

fn audit_params(a: &AuditArgs) -> Result<AuditParams, ReportError> {
    let mut params = match &a.config {
        Some(p) => RunConfig::load(p)?.audit_params()?,
        None => AuditParams::default(),
    };
    if let Some(p) = &a.period {
        params.period =
            Some(PeriodSpec::parse_range(p, SubPeriod::Full).map_err(|e| ReportError::Usage(format!("--period: {e}")))?);
    }
    if let Some(s) = &a.subperiods {
        params.subperiods = s.clone();
    }
    if let Some(t) = a.tau_ms {
        params.audit.tau_ms = t;
    }
    if let Some(p) = &a.avg_price {
        params.avg_price = Some(Price::parse(p).map_err(|e| ReportError::Usage(format!("--avg-price: {e}")))?);
    }
    if a.volume_weighted {
        params.weighting = PriceWeighting::Volume;
    }
    params.audit.validate().map_err(|e| ReportError::Usage(e.to_string()))?;
    Ok(params)
}

fn audit_cmd(a: AuditArgs, out: &mut impl Write) -> Result<i32, ReportError> {
    let params = audit_params(&a)?;
    let files = resolve_inputs(&a.inputs)?;
    let results = audit_captures(&files, &params)?;
    let manifest = write_reports(&a.out, &results, &params)?;

    let mut rows: Vec<PeriodRow> = results.iter().map(|(_, m)| PeriodRow::from_audit(m)).collect();
    super::sort_period_rows(&mut rows);
    let mut sub: Vec<SubPeriodRow> = results.iter().map(|(_, m)| SubPeriodRow::from_audit(m)).collect();
    super::sort_subperiod_rows(&mut sub);
    let start = results.iter().map(|(_, m)| m.period.start).min().unwrap_or_default();
    let end = results.iter().map(|(_, m)| m.period.end).max().unwrap_or_default();
    write!(out, "{}\n{}", period_text(&rows, start, end), subperiod_text(&sub)).map_err(out_err)?;
    writeln!(out, "reports written to {} (config {})", a.out.display(), &manifest.config_sha256[..12]).map_err(out_err)?;
    Ok(EXIT_OK)
}

fn simulate_cmd(a: SimulateArgs, out: &mut impl Write) -> Result<i32, ReportError> {
    let text = std::fs::read_to_string(&a.scenario)
        .map_err(|e| ReportError::Usage(format!("{}: {e}", a.scenario.display())))?;
    let spec: ScenarioSpec =
        toml::from_str(&text).map_err(|e| ReportError::Usage(format!("{}: {e}", a.scenario.display())))?;
    spec.validate().map_err(|e| ReportError::Usage(e.to_string()))?;
    let sim = generate(&spec)?;
    write_simulation(&sim, &spec, &a.out)?;
    let hidden = sim.truth.steps.iter().filter(|s| s.hidden).count();
    writeln!(
        out,
        "{}: {} trades, {} OI reports, {} published events ({hidden} trades hidden) -> {}",
        sim.market,
        sim.truth.steps.len(),
        sim.truth.reports.len(),
        sim.reported_stream.len(),
        a.out.display()
    )
    .map_err(out_err)?;
    Ok(EXIT_OK)
}

fn verify_cmd(a: VerifyArgs, out: &mut impl Write) -> Result<i32, ReportError> {
    let report = verify_dir(&a.input, a.tau_ms)?;
    if a.json {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        writeln!(out, "{json}").map_err(out_err)?;
    } else {
        write!(out, "{}", report.render()).map_err(out_err)?;
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_ORACLE })
}

#[derive(Serialize)]
struct CapturedMarket {
    market: String,
    file: String,
    dead_letter: String,
    oi_channel: OiChannel,
    oi_poll_ms: u64,
    events: u64,
    gaps: u64,
    quarantined: u64,
    ignored: u64,
    reconnects: u64,
    skew_warnings: u64,
    sha256: Option<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct CaptureManifest {
    software: String,
    config_sha256: String,
    markets: Vec<CapturedMarket>,
}

fn capture_cmd(a: CaptureArgs, out: &mut impl Write) -> Result<i32, ReportError> {
    let config_bytes = std::fs::read(&a.config).map_err(|e| ReportError::Usage(format!("{}: {e}", a.config.display())))?;
    let config = RunConfig::load(&a.config)?;
    let markets = config.selected_markets(&a.markets)?;
    let catalog = config.catalog();
    for m in &markets {
        m.validate()?;
    }
    std::fs::create_dir_all(&a.out).map_err(|e| ReportError::io(&a.out, e))?;
    let duration = a.duration_s.or(config.capture.duration_s).map(Duration::from_secs);

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ReportError::Data(format!("runtime: {e}")))?;
    let outcomes = rt.block_on(async {
        let mut running = Vec::new();
        for cfg in markets {
            let market = Arc::new(cfg.market.clone());
            let stem = cfg.market.file_stem();
            let file = a.out.join(format!("{stem}.cap"));
            let dead = a.out.join(format!("{stem}.deadletter.jsonl"));
            let writer = CaptureWriter::open_append(&file, market)?;
            let mut opts = StreamOptions::new(&dead);
            opts.keep_raw = config.capture.keep_raw;
            opts.max_skew_ms = config.capture.max_skew_ms;
            opts.queue_capacity = config.capture.queue_capacity;
            opts.first_seq = writer.next_seq();
            let adapter = catalog.adapter(&cfg)?;
            let handle = connect_and_stream(cfg.clone(), adapter, writer, opts)?;
            info!(market = %cfg.market, file = %file.display(), "capturing");
            running.push((cfg, file, dead, handle));
        }
        let deadline = async {
            match duration {
                Some(d) => tokio::time::sleep(d).await,
                None => std::future::pending().await,
            }
        };
        let all_done = async {
            while !running.iter().all(|(.., h)| h.is_finished()) {
                tokio::time::sleep(Duration::from_millis(200)).await;
            }
        };
        tokio::select! {
            _ = tokio::signal::ctrl_c() => info!("interrupted; flushing captures"),
            _ = deadline => info!("capture duration reached"),
            _ = all_done => warn!("every stream ended"),
        }
        let mut outcomes = Vec::new();
        for (cfg, file, dead, handle) in running {
            outcomes.push((cfg, file, dead, handle.shutdown().await));
        }
        Ok::<_, ReportError>(outcomes)
    })?;

    let mut failed = false;
    let mut markets = Vec::new();
    for (cfg, file, dead, res) in outcomes {
        let (stats, error) = match res {
            Ok(s) => (s, None),
            Err(e) => {
                failed = true;
                error!(market = %cfg.market, "{e}");
                (StreamStats::default(), Some(e.to_string()))
            }
        };
        let sha256 = std::fs::read(&file).ok().map(|b| sha256_hex(&b));
        writeln!(out, "{}: {} events, {} gaps, {} quarantined", cfg.market, stats.events, stats.gaps, stats.quarantined)
            .map_err(out_err)?;
        markets.push(CapturedMarket {
            market: cfg.market.to_string(),
            file: file.display().to_string(),
            dead_letter: dead.display().to_string(),
            oi_channel: cfg.oi_channel,
            oi_poll_ms: cfg.oi_poll_ms,
            events: stats.events,
            gaps: stats.gaps,
            quarantined: stats.quarantined,
            ignored: stats.ignored,
            reconnects: stats.reconnects,
            skew_warnings: stats.skew_warnings,
            sha256,
            error,
        });
    }
    let manifest = CaptureManifest {
        software: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        config_sha256: sha256_hex(&config_bytes),
        markets,
    };
    let path = a.out.join("capture_manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, json).map_err(|e| ReportError::io(&path, e))?;
    Ok(if failed { EXIT_DATA } else { EXIT_OK })
}
