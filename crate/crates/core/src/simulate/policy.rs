use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Amount, EpochMs, EventKind, Fixed, MarketEvent};

use super::{ReportingPolicy, SimError};

/// What a policy did to the true stream, by index into it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicyTrace {
    pub hidden: Vec<usize>,
    /// (index, published timestamp)
    pub delayed: Vec<(usize, EpochMs)>,
    /// Published OI for every sample, in stream order.
    pub reported_oi: Vec<Fixed>,
}

fn targeted(kind: EventKind) -> bool {
    matches!(kind, EventKind::Liquidation | EventKind::BlockTrade)
}

/// Turns a true stream into the published one.
pub fn policy_apply(policy: &ReportingPolicy, seed: u64, true_stream: &[MarketEvent]) -> Result<Vec<MarketEvent>, SimError> {
    apply_with_trace(policy, seed, true_stream).map(|(s, _)| s)
}

/// [`policy_apply`] plus a record of which events were touched.
///
/// The output is ordered by `(published ts, original seq)` and renumbered so
/// `seq` is the publication order. Trade prices are never altered.
pub fn apply_with_trace(
    policy: &ReportingPolicy,
    seed: u64,
    true_stream: &[MarketEvent],
) -> Result<(Vec<MarketEvent>, PolicyTrace), SimError> {
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut trace = PolicyTrace::default();
    let mut out: Vec<MarketEvent> = Vec::with_capacity(true_stream.len());
    let mut drift = Fixed::ZERO;

    for (idx, ev) in true_stream.iter().enumerate() {
        let mut ev = ev.clone();
        match policy {
            ReportingPolicy::Honest => {}
            ReportingPolicy::Delay { ms } => {
                if *ms > 0 && targeted(ev.kind) {
                    ev.ts += *ms as EpochMs;
                    trace.delayed.push((idx, ev.ts));
                }
            }
            ReportingPolicy::Hide { fraction } => {
                if targeted(ev.kind) && *fraction > 0.0 && rng.random::<f64>() < *fraction {
                    trace.hidden.push(idx);
                    continue;
                }
            }
            ReportingPolicy::FabricateOi { amplitude } => {
                if ev.kind == EventKind::OiSample && amplitude.is_positive() {
                    // mean-reverting bounded walk: keep 90% of the drift, add
                    // a shock of up to a quarter of the amplitude
                    let shock = amplitude
                        .checked_mul(Fixed::from_raw(rng.random_range(-2_500i128..=2_500) * 10_000))
                        .ok_or(crate::model::ModelError::Overflow)?;
                    let kept = drift.checked_mul(Fixed::from_raw(90_000_000)).ok_or(crate::model::ModelError::Overflow)?;
                    drift = (kept + shock).max(-*amplitude).min(*amplitude);
                    let published = (ev.size_or_value.value() + drift).max(Fixed::ZERO);
                    ev.size_or_value = Amount::new(published, ev.size_or_value.unit())?;
                }
            }
        }
        if ev.kind == EventKind::OiSample {
            trace.reported_oi.push(ev.size_or_value.value());
        }
        out.push(ev);
    }

    if matches!(policy, ReportingPolicy::Delay { ms } if *ms > 0) {
        out.sort_by_key(MarketEvent::order_key);
        for (i, ev) in out.iter_mut().enumerate() {
            ev.seq = i as u64;
        }
    } else if !trace.hidden.is_empty() {
        for (i, ev) in out.iter_mut().enumerate() {
            ev.seq = i as u64;
        }
    }
    Ok((out, trace))
}
