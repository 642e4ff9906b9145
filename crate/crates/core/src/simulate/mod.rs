//! Synthetic perpetual-swap venue.
//!
//! Traders are paired at random and every trade either opens new contracts,
//! transfers existing exposure, or closes contracts. The venue keeps exact
//! per-trader positions, so true open interest (the sum of long exposure) is
//! known at every step. A [`ReportingPolicy`] then turns the true feed into
//! what a misreporting venue would publish.

mod generator;
mod policy;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{ContractKind, EpochMs, Fixed, MarketId, ModelError};

pub use generator::{generate, Simulation, TruthLedger, TruthReport, TruthStep};
pub use policy::{apply_with_trace, policy_apply, PolicyTrace};

/// 2023-01-01T00:00:00Z.
pub const DEFAULT_START_MS: EpochMs = 1_672_531_200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportingPolicy {
    Honest,
    /// Liquidations and block trades are published `ms` late.
    Delay { ms: u32 },
    /// A seeded-random `fraction` of liquidations and block trades is never
    /// published.
    Hide { fraction: f64 },
    /// Published OI drifts from the truth by a mean-reverting walk bounded by
    /// `amplitude` (native units).
    FabricateOi { amplitude: Fixed },
}

impl ReportingPolicy {
    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            ReportingPolicy::Hide { fraction } if !(0.0..=1.0).contains(fraction) => {
                Err(SimError::Spec(format!("hide fraction {fraction} outside [0, 1]")))
            }
            ReportingPolicy::FabricateOi { amplitude } if amplitude.is_negative() => {
                Err(SimError::Spec("fabrication amplitude must be non-negative".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn delay_ms(&self) -> u32 {
        match self {
            ReportingPolicy::Delay { ms } => *ms,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeDist {
    /// Uniform over lot multiples in `[min, max]`.
    Uniform { min: Fixed, max: Fixed },
    /// Log-uniform in `[min, max]`, rounded to the lot size.
    LogUniform { min: Fixed, max: Fixed },
}

impl SizeDist {
    fn bounds(&self) -> (Fixed, Fixed) {
        match self {
            SizeDist::Uniform { min, max } | SizeDist::LogUniform { min, max } => (*min, *max),
        }
    }
}

/// Relative frequency of the three possible effects of a trade on OI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectWeights {
    pub increase: f64,
    pub transfer: f64,
    pub decrease: f64,
}

impl Default for EffectWeights {
    fn default() -> Self {
        EffectWeights { increase: 1.0, transfer: 1.0, decrease: 1.0 }
    }
}

/// A run of forced closes: every trade in the burst is a liquidation that
/// reduces open interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Burst {
    pub start_step: u64,
    pub steps: u64,
}

fn default_exchange() -> String {
    "sim".into()
}
fn default_symbol() -> String {
    "BTC_USDT_P".into()
}
fn default_contract() -> ContractKind {
    ContractKind::LinearPerp
}
fn default_start() -> EpochMs {
    DEFAULT_START_MS
}
fn default_step() -> u32 {
    50
}
fn default_lot() -> Fixed {
    Fixed::from_raw(100_000) // 0.001
}
fn default_price() -> Fixed {
    Fixed::from_int(20_625)
}
fn default_liq() -> f64 {
    0.05
}
fn default_block() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default = "default_exchange")]
    pub exchange: String,
    #[serde(default = "default_symbol")]
    pub symbol: String,
    #[serde(default = "default_contract")]
    pub contract_kind: ContractKind,
    pub n_traders: u32,
    /// Number of trades.
    pub n_steps: u64,
    pub rng_seed: u64,
    pub trade_size_dist: SizeDist,
    #[serde(default = "default_lot")]
    pub lot_size: Fixed,
    pub oi_report_cadence_ms: u32,
    /// Mean spacing between consecutive trades; spacing is uniform on
    /// `[min, 2 * mean - min]`.
    #[serde(default = "default_step")]
    pub mean_step_ms: u32,
    /// Zero allows same-millisecond trades.
    #[serde(default)]
    pub min_step_ms: u32,
    #[serde(default = "default_start")]
    pub start_ms: EpochMs,
    #[serde(default)]
    pub effect_weights: EffectWeights,
    #[serde(default = "default_liq")]
    pub liquidation_share: f64,
    #[serde(default = "default_block")]
    pub block_share: f64,
    #[serde(default)]
    pub burst: Option<Burst>,
    #[serde(default = "default_price")]
    pub initial_price: Fixed,
    pub policy: ReportingPolicy,
}

impl ScenarioSpec {
    /// A linear-perp scenario with the default trader mix.
    pub fn new(n_traders: u32, n_steps: u64, rng_seed: u64, policy: ReportingPolicy) -> Self {
        ScenarioSpec {
            exchange: default_exchange(),
            symbol: default_symbol(),
            contract_kind: default_contract(),
            n_traders,
            n_steps,
            rng_seed,
            trade_size_dist: SizeDist::LogUniform { min: Fixed::from_raw(100_000), max: Fixed::from_int(5) },
            lot_size: default_lot(),
            oi_report_cadence_ms: 500,
            mean_step_ms: default_step(),
            min_step_ms: 0,
            start_ms: DEFAULT_START_MS,
            effect_weights: EffectWeights::default(),
            liquidation_share: default_liq(),
            block_share: default_block(),
            burst: None,
            initial_price: default_price(),
            policy,
        }
    }

    pub fn market(&self) -> Result<Arc<MarketId>, SimError> {
        Ok(Arc::new(MarketId::new(self.exchange.clone(), self.symbol.clone(), self.contract_kind)?))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Spec(m.to_string()));
        if self.n_traders < 2 {
            return bad("need at least two traders");
        }
        if self.n_steps == 0 {
            return bad("n_steps must be positive");
        }
        if self.oi_report_cadence_ms == 0 {
            return bad("oi_report_cadence_ms must be positive");
        }
        if self.min_step_ms > self.mean_step_ms {
            return bad("min_step_ms exceeds mean_step_ms");
        }
        if self.start_ms <= 0 {
            return bad("start_ms must be positive");
        }
        if !self.lot_size.is_positive() || !self.initial_price.is_positive() {
            return bad("lot_size and initial_price must be positive");
        }
        let (min, max) = self.trade_size_dist.bounds();
        if min < self.lot_size || max < min {
            return bad("size distribution must satisfy lot_size <= min <= max");
        }
        let w = self.effect_weights;
        if [w.increase, w.transfer, w.decrease].iter().any(|x| !(x.is_finite() && *x >= 0.0))
            || w.increase + w.transfer + w.decrease <= 0.0
        {
            return bad("effect weights must be non-negative with a positive sum");
        }
        for share in [self.liquidation_share, self.block_share] {
            if !(0.0..=1.0).contains(&share) {
                return bad("kind shares must lie in [0, 1]");
            }
        }
        if self.liquidation_share + self.block_share > 1.0 {
            return bad("liquidation_share + block_share exceeds 1");
        }
        self.policy.validate()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
