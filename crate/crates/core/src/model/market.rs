use std::fmt;

use serde::{Deserialize, Serialize};

use super::amount::Unit;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ContractKind {
    LinearPerp,
    InversePerp,
}

impl ContractKind {
    /// Inverse perpetuals denominate size in USD, linear ones in base coin.
    pub const fn native_unit(self) -> Unit {
        match self {
            ContractKind::LinearPerp => Unit::BaseCoin,
            ContractKind::InversePerp => Unit::Usd,
        }
    }
}

/// A (trading pair, exchange) tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "MarketIdRepr", into = "MarketIdRepr")]
pub struct MarketId {
    exchange: String,
    symbol: String,
    contract_kind: ContractKind,
}

#[derive(Serialize, Deserialize)]
struct MarketIdRepr {
    exchange: String,
    symbol: String,
    contract_kind: ContractKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    native_unit: Option<Unit>,
}

impl TryFrom<MarketIdRepr> for MarketId {
    type Error = ModelError;

    fn try_from(r: MarketIdRepr) -> Result<Self, Self::Error> {
        let id = MarketId::new(r.exchange, r.symbol, r.contract_kind)?;
        if let Some(u) = r.native_unit {
            if u != id.native_unit() {
                return Err(ModelError::InvalidMarket(format!(
                    "{id}: {:?} contracts are denominated in {}, not {u}",
                    r.contract_kind,
                    id.native_unit()
                )));
            }
        }
        Ok(id)
    }
}

impl From<MarketId> for MarketIdRepr {
    fn from(m: MarketId) -> Self {
        let native_unit = Some(m.native_unit());
        MarketIdRepr { exchange: m.exchange, symbol: m.symbol, contract_kind: m.contract_kind, native_unit }
    }
}

fn valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

impl MarketId {
    /// Exchange and symbol must be non-empty identifiers (`[A-Za-z0-9_.-]+`).
    pub fn new(
        exchange: impl Into<String>,
        symbol: impl Into<String>,
        contract_kind: ContractKind,
    ) -> Result<Self, ModelError> {
        let exchange = exchange.into();
        let symbol = symbol.into();
        if !valid_identifier(&exchange) || !valid_identifier(&symbol) {
            return Err(ModelError::InvalidMarket(format!("bad identifier {exchange:?}/{symbol:?}")));
        }
        Ok(MarketId { exchange, symbol, contract_kind })
    }

    pub fn exchange(&self) -> &str {
        &self.exchange
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn contract_kind(&self) -> ContractKind {
        self.contract_kind
    }

    pub fn native_unit(&self) -> Unit {
        self.contract_kind.native_unit()
    }

    /// `exchange_symbol`, safe for file names.
    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.exchange, self.symbol)
    }
}

impl fmt::Display for MarketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.exchange, self.symbol)
    }
}

/// Rejects duplicate (exchange, symbol) pairs within one run.
pub fn ensure_unique<'a, I: IntoIterator<Item = &'a MarketId>>(markets: I) -> Result<(), ModelError> {
    let mut seen = std::collections::BTreeSet::new();
    for m in markets {
        if !seen.insert((m.exchange(), m.symbol())) {
            return Err(ModelError::InvalidMarket(format!("duplicate market {m}")));
        }
    }
    Ok(())
}
