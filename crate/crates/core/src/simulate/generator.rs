use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Amount, EpochMs, EventKind, Fixed, MarketEvent, MarketId, Price};

use super::policy::apply_with_trace;
use super::{ScenarioSpec, SimError, SizeDist};

/// One trade as the venue saw it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthStep {
    pub step: u64,
    pub ts: EpochMs,
    pub kind: EventKind,
    pub size: Fixed,
    pub price: Fixed,
    pub buyer: u32,
    pub seller: u32,
    /// Positions after the trade (signed; long > 0).
    pub buyer_position: Fixed,
    pub seller_position: Fixed,
    pub delta_oi: Fixed,
    pub oi_after: Fixed,
    /// Never published under the reporting policy.
    pub hidden: bool,
    /// Timestamp the trade was published with, if shifted.
    pub published_ts: Option<EpochMs>,
}

/// One open-interest publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthReport {
    pub ts: EpochMs,
    pub true_oi: Fixed,
    pub reported_oi: Fixed,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLedger {
    pub steps: Vec<TruthStep>,
    pub reports: Vec<TruthReport>,
    pub final_positions: Vec<Fixed>,
}

impl TruthLedger {
    /// True OI after every trade stamped at or before `ts`.
    pub fn oi_at(&self, ts: EpochMs) -> Fixed {
        let idx = self.steps.partition_point(|s| s.ts <= ts);
        if idx == 0 {
            Fixed::ZERO
        } else {
            self.steps[idx - 1].oi_after
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub market: Arc<MarketId>,
    pub true_stream: Vec<MarketEvent>,
    pub reported_stream: Vec<MarketEvent>,
    pub truth: TruthLedger,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Effect {
    Increase,
    Transfer,
    Decrease,
}

fn pos_part(x: Fixed) -> Fixed {
    if x.is_positive() {
        x
    } else {
        Fixed::ZERO
    }
}

struct Venue {
    positions: Vec<Fixed>,
    oi: Fixed,
}

impl Venue {
    /// Applies a trade and returns the change in open interest.
    fn apply(&mut self, buyer: usize, seller: usize, size: Fixed) -> Fixed {
        let (b0, s0) = (self.positions[buyer], self.positions[seller]);
        let (b1, s1) = (b0 + size, s0 - size);
        self.positions[buyer] = b1;
        self.positions[seller] = s1;
        let delta = (pos_part(b1) - pos_part(b0)) + (pos_part(s1) - pos_part(s0));
        self.oi = self.oi + delta;
        delta
    }
}

/// Runs a scenario: the true feed, the published feed and the ground truth.
pub fn generate(spec: &ScenarioSpec) -> Result<Simulation, SimError> {
    spec.validate()?;
    let market = spec.market()?;
    let unit = market.native_unit();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut venue = Venue { positions: vec![Fixed::ZERO; spec.n_traders as usize], oi: Fixed::ZERO };

    let lot = spec.lot_size;
    let (min, max) = match spec.trade_size_dist {
        SizeDist::Uniform { min, max } | SizeDist::LogUniform { min, max } => (min, max),
    };
    let min_lots = (min.raw() / lot.raw()).max(1) as u64;
    let max_lots = (max.raw() / lot.raw()).max(min_lots as i128) as u64;
    let w = spec.effect_weights;
    let w_total = w.increase + w.transfer + w.decrease;
    let cadence = spec.oi_report_cadence_ms as EpochMs;

    let mut events: Vec<MarketEvent> = Vec::with_capacity(spec.n_steps as usize * 2);
    let mut steps: Vec<TruthStep> = Vec::with_capacity(spec.n_steps as usize);
    let mut report_times: Vec<EpochMs> = Vec::new();
    let mut seq = 0u64;
    let mut next_report = spec.start_ms;
    let mut t = spec.start_ms;
    let mut price = spec.initial_price;
    let price_tick = Fixed::from_raw(50_000_000); // 0.5
    let price_floor = spec.initial_price.checked_div_int(4).expect("non-zero divisor");

    let mut push_report = |events: &mut Vec<MarketEvent>, seq: &mut u64, ts: EpochMs, oi: Fixed| -> Result<(), SimError> {
        events.push(MarketEvent::oi_sample(market.clone(), ts, *seq, Amount::new(oi, unit)?)?);
        report_times.push(ts);
        *seq += 1;
        Ok(())
    };

    for step in 0..spec.n_steps {
        let (lo, mean) = (spec.min_step_ms as EpochMs, spec.mean_step_ms as EpochMs);
        t += rng.random_range(lo..=2 * mean - lo);
        while next_report < t {
            push_report(&mut events, &mut seq, next_report, venue.oi)?;
            next_report += cadence;
        }

        let in_burst = spec.burst.is_some_and(|b| step >= b.start_step && step < b.start_step + b.steps);
        let (kind, effect) = if in_burst {
            (EventKind::Liquidation, Effect::Decrease)
        } else {
            let kind = {
                let u: f64 = rng.random();
                if u < spec.liquidation_share {
                    EventKind::Liquidation
                } else if u < spec.liquidation_share + spec.block_share {
                    EventKind::BlockTrade
                } else {
                    EventKind::Trade
                }
            };
            let u = rng.random::<f64>() * w_total;
            let effect = if u < w.increase {
                Effect::Increase
            } else if u < w.increase + w.transfer {
                Effect::Transfer
            } else {
                Effect::Decrease
            };
            (kind, effect)
        };

        let wanted = draw_size(&mut rng, &spec.trade_size_dist, lot, min_lots, max_lots);
        let (buyer, seller, size) = pick_counterparties(&mut rng, &venue.positions, effect, wanted);
        let delta = venue.apply(buyer, seller, size);

        let drift = rng.random_range(-4i64..=4);
        price = (price + Fixed::from_raw(price_tick.raw() * drift as i128)).max(price_floor);

        events.push(MarketEvent::trade(market.clone(), t, seq, kind, Amount::new(size, unit)?, Price::new(price)?)?);
        seq += 1;
        steps.push(TruthStep {
            step,
            ts: t,
            kind,
            size,
            price,
            buyer: buyer as u32,
            seller: seller as u32,
            buyer_position: venue.positions[buyer],
            seller_position: venue.positions[seller],
            delta_oi: delta,
            oi_after: venue.oi,
            hidden: false,
            published_ts: None,
        });
    }

    // Keep publishing long enough that every delayed trade lands before the
    // last observation.
    let tail_end = t + spec.policy.delay_ms() as EpochMs + 2 * cadence;
    while next_report <= tail_end {
        push_report(&mut events, &mut seq, next_report, venue.oi)?;
        next_report += cadence;
    }

    let (reported_stream, trace) = apply_with_trace(&spec.policy, spec.rng_seed, &events)?;
    let step_of = trade_ordinals(&events);
    for idx in trace.hidden {
        if let Some(step) = step_of[idx] {
            steps[step].hidden = true;
        }
    }
    for (idx, ts) in trace.delayed {
        if let Some(step) = step_of[idx] {
            steps[step].published_ts = Some(ts);
        }
    }
    let reported_oi = trace.reported_oi;
    let reports = report_times
        .iter()
        .zip(reported_oi)
        .map(|(&ts, reported)| {
            let idx = steps.partition_point(|s| s.ts <= ts);
            let true_oi = if idx == 0 { Fixed::ZERO } else { steps[idx - 1].oi_after };
            TruthReport { ts, true_oi, reported_oi: reported }
        })
        .collect();

    Ok(Simulation {
        market,
        true_stream: events,
        reported_stream,
        truth: TruthLedger { steps, reports, final_positions: venue.positions },
    })
}

/// For each event of the true stream, the truth step it records (trades
/// only; reports interleave with trades).
fn trade_ordinals(events: &[MarketEvent]) -> Vec<Option<usize>> {
    let mut next = 0usize;
    events
        .iter()
        .map(|e| {
            e.is_trade_like().then(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn draw_size(rng: &mut ChaCha8Rng, dist: &SizeDist, lot: Fixed, min_lots: u64, max_lots: u64) -> Fixed {
    let lots = match dist {
        SizeDist::Uniform { .. } => rng.random_range(min_lots..=max_lots),
        SizeDist::LogUniform { .. } => {
            let (lo, hi) = ((min_lots as f64).ln(), (max_lots as f64).ln());
            let x = (lo + rng.random::<f64>() * (hi - lo)).exp().round() as u64;
            x.clamp(min_lots, max_lots)
        }
    };
    Fixed::from_raw(lot.raw() * lots as i128)
}

/// Finds a buyer/seller pair realizing `effect`, trimming the size where
/// closing or transferring needs it. When no fitting pair turns up, the
/// most-long trader buys from the most-short one, which always opens new
/// exposure (positions sum to zero).
fn pick_counterparties(rng: &mut ChaCha8Rng, positions: &[Fixed], effect: Effect, wanted: Fixed) -> (usize, usize, Fixed) {
    let n = positions.len();
    let mut pair = || {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        (a, b)
    };
    for _ in 0..32 {
        let (b, s) = pair();
        let (pb, ps) = (positions[b], positions[s]);
        match effect {
            Effect::Increase if !pb.is_negative() && !ps.is_positive() => return (b, s, wanted),
            Effect::Decrease if pb.is_negative() && ps.is_positive() => {
                return (b, s, wanted.min(pb.abs()).min(ps));
            }
            // A short buys back from someone who is flat or short: shorts move
            // between them, longs are untouched.
            Effect::Transfer if pb.is_negative() && !ps.is_positive() => return (b, s, wanted.min(pb.abs())),
            // A long sells to someone flat or long.
            Effect::Transfer if ps.is_positive() && !pb.is_negative() => return (b, s, wanted.min(ps)),
            _ => {}
        }
    }
    let by_pos = |a: &(usize, &Fixed), b: &(usize, &Fixed)| a.1.cmp(b.1).then(b.0.cmp(&a.0));
    let buyer = positions.iter().enumerate().max_by(by_pos).map_or(0, |(i, _)| i);
    let seller = positions.iter().enumerate().min_by(by_pos).map_or(1, |(i, _)| i);
    if buyer == seller {
        return (0, 1, wanted);
    }
    (buyer, seller, wanted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::ReportingPolicy;

    #[test]
    fn worked_three_trade_example() {
        // i opens $100 long against j; i passes $40 of it to k; i and l
        // (short $40) each close $20.
        let mut v = Venue { positions: vec![Fixed::ZERO; 4], oi: Fixed::ZERO };
        let (i, j, k, l) = (0, 1, 2, 3);
        let usd = Fixed::from_int;
        let mut path = Vec::new();
        v.apply(i, j, usd(100));
        path.push(v.oi);
        v.apply(k, i, usd(40));
        path.push(v.oi);
        v.positions[l] = usd(-40); // l already holds a $40 short opened elsewhere
        v.positions[j] = usd(-60);
        v.oi = usd(100);
        v.apply(l, i, usd(20));
        path.push(v.oi);
        assert_eq!(path, vec![usd(100), usd(100), usd(80)]);
        assert_eq!(v.positions[i], usd(40));
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = ScenarioSpec::new(10, 2_000, 42, ReportingPolicy::Honest);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.true_stream, b.true_stream);
        assert_eq!(a.truth, b.truth);
        let c = generate(&ScenarioSpec { rng_seed: 43, ..spec }).unwrap();
        assert_ne!(a.true_stream, c.true_stream);
    }

    #[test]
    fn conservation_at_every_step() {
        let spec = ScenarioSpec::new(12, 5_000, 3, ReportingPolicy::Honest);
        let sim = generate(&spec).unwrap();
        let mut pos = vec![Fixed::ZERO; 12];
        let mut longs = Fixed::ZERO;
        for s in &sim.truth.steps {
            for (who, new) in [(s.buyer, s.buyer_position), (s.seller, s.seller_position)] {
                longs = longs - pos_part(pos[who as usize]) + pos_part(new);
                pos[who as usize] = new;
            }
            let net: Fixed = pos.iter().copied().sum();
            assert!(net.is_zero(), "longs must equal shorts");
            assert_eq!(longs, s.oi_after);
            assert!(s.delta_oi.abs() <= s.size);
        }
        assert_eq!(pos, sim.truth.final_positions);
    }

    #[test]
    fn all_three_effects_occur() {
        let sim = generate(&ScenarioSpec::new(20, 3_000, 5, ReportingPolicy::Honest)).unwrap();
        let up = sim.truth.steps.iter().filter(|s| s.delta_oi.is_positive()).count();
        let down = sim.truth.steps.iter().filter(|s| s.delta_oi.is_negative()).count();
        let flat = sim.truth.steps.iter().filter(|s| s.delta_oi.is_zero()).count();
        assert!(up > 100 && down > 100 && flat > 100, "{up} {down} {flat}");
    }

    #[test]
    fn reports_follow_truth_when_honest() {
        let sim = generate(&ScenarioSpec::new(8, 1_000, 1, ReportingPolicy::Honest)).unwrap();
        assert_eq!(sim.true_stream, sim.reported_stream);
        for r in &sim.truth.reports {
            assert_eq!(r.true_oi, r.reported_oi);
            assert_eq!(r.true_oi, sim.truth.oi_at(r.ts));
        }
        let last_trade = sim.truth.steps.last().unwrap().ts;
        assert!(sim.truth.reports.last().unwrap().ts >= last_trade);
    }

    #[test]
    fn without_transfers_every_trade_moves_oi_by_its_size() {
        let mut spec = ScenarioSpec::new(6, 5_000, 21, ReportingPolicy::Honest);
        spec.effect_weights = crate::simulate::EffectWeights { increase: 1.0, transfer: 0.0, decrease: 1.0 };
        let sim = generate(&spec).unwrap();
        assert!(sim.truth.steps.iter().all(|s| s.delta_oi.abs() == s.size));
        assert!(sim.truth.steps.iter().any(|s| s.delta_oi.is_negative()));
    }
}
