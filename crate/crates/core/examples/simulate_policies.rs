// Runs the same synthetic venue under each reporting policy and audits
// what it publishes.

use std::error::Error;

use oi_audit::model::{Fixed, SubPeriod};
use oi_audit::report::{audit_events, AuditParams};
use oi_audit::simulate::{generate, EffectWeights, ReportingPolicy, ScenarioSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let policies = [
        ReportingPolicy::Honest,
        ReportingPolicy::Delay { ms: 750 },
        ReportingPolicy::Hide { fraction: 0.3 },
        ReportingPolicy::FabricateOi { amplitude: Fixed::from_int(2) },
    ];
    for policy in policies {
        let mut spec = ScenarioSpec::new(40, 10_000, 7, policy.clone());
        spec.effect_weights = EffectWeights { increase: 1.0, transfer: 0.0, decrease: 1.0 };
        spec.oi_report_cadence_ms = 1;
        spec.min_step_ms = 3;
        spec.mean_step_ms = 20;
        let sim = generate(&spec)?;
        let hidden = sim.truth.steps.iter().filter(|s| s.hidden).count();
        let audit = audit_events(sim.reported_stream, &AuditParams::default())?;
        let minutes = audit.subperiod(SubPeriod::Min1).expect("minute windows requested");
        println!(
            "{:<40} full X_TV {:>10}  minute windows with excess {}/{}  hidden trades {hidden}",
            format!("{policy:?}"),
            audit.full.x_tv.value(),
            minutes.excess_windows(),
            minutes.valid_windows()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
