//! Data-driven venue adapters.
//!
//! A [`Family`] describes how one exchange API shapes its messages: which
//! JSON fields carry price, size and time, and which flags turn a trade into
//! a liquidation or block trade. Each market's [`super::ConnectorConfig`]
//! names a family and supplies the venue symbol and contract size.

use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{EpochMs, EventKind, Fixed, MarketId};

use super::{ConnectorConfig, IngestError};

/// The catalog shipped with the crate: one family per exchange API and one
/// market entry per audited market.
pub const BUILTIN_VENUES: &str = include_str!("../../config/venues.toml");

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compression {
    #[default]
    None,
    /// Binary frames are gzip streams.
    Gzip,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feed {
    #[default]
    Ws,
    Rest,
}

impl Feed {
    pub fn as_str(self) -> &'static str {
        match self {
            Feed::Ws => "ws",
            Feed::Rest => "rest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Trade,
    OpenInterest,
    /// Documented control traffic (acks, heartbeats, snapshots of history).
    Ignore,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    One,
    /// Multiply by the market's contract size.
    Contract,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsFormat {
    #[default]
    Ms,
    Us,
    Ns,
    /// Seconds, possibly fractional.
    Sec,
    Rfc3339,
}

/// A test on one JSON pointer. With no operator the field must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub pointer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub present: Option<bool>,
}

impl Condition {
    fn holds(&self, v: &Value) -> bool {
        let field = v.pointer(&self.pointer);
        if let Some(want) = self.present {
            let there = field.is_some_and(|f| !f.is_null() && f.as_str() != Some(""));
            return there == want;
        }
        let Some(field) = field else { return false };
        if let Some(eq) = &self.equals {
            return field == eq;
        }
        if let Some(p) = &self.prefix {
            return field.as_str().is_some_and(|s| s.starts_with(p.as_str()));
        }
        true
    }

    fn bind(&mut self, symbol: &str) {
        if let Some(Value::String(s)) = &mut self.equals {
            *s = s.replace("{symbol}", symbol);
        }
        if let Some(p) = &mut self.prefix {
            *p = p.replace("{symbol}", symbol);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindFlag {
    pub when: Condition,
    pub kind: FlagKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlagKind {
    Trade,
    BlockTrade,
    Liquidation,
}

impl From<FlagKind> for EventKind {
    fn from(k: FlagKind) -> Self {
        match k {
            FlagKind::Trade => EventKind::Trade,
            FlagKind::BlockTrade => EventKind::BlockTrade,
            FlagKind::Liquidation => EventKind::Liquidation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub name: String,
    #[serde(default)]
    pub feed: Feed,
    /// All must hold on the whole message.
    #[serde(default)]
    pub when: Vec<Condition>,
    pub action: Action,
    /// Pointer to an array of items or a single object; the message itself
    /// when absent.
    #[serde(default)]
    pub items: Option<String>,
    /// Items failing these belong to other markets and are skipped.
    #[serde(default)]
    pub item_when: Vec<Condition>,
    /// Trade kind when no flag matches.
    #[serde(default)]
    pub kind: Option<FlagKind>,
    #[serde(default)]
    pub kind_flags: Vec<KindFlag>,
    #[serde(default)]
    pub value: Option<String>,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default)]
    pub price: Option<String>,
    /// Item-level timestamp.
    #[serde(default)]
    pub ts: Option<String>,
    /// Message-level timestamp, used when the item has none.
    #[serde(default)]
    pub root_ts: Option<String>,
    #[serde(default)]
    pub ts_format: TsFormat,
}

/// Answer venue heartbeats: `{"<pointer field>": x}` gets `{"<reply_key>": x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PingReply {
    pub pointer: String,
    pub reply_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientPing {
    pub every_ms: u64,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Family {
    pub name: String,
    #[serde(default)]
    pub compression: Compression,
    /// Messages sent after every (re)connect; `{symbol}` is substituted.
    #[serde(default)]
    pub subscribe: Vec<String>,
    #[serde(default)]
    pub ping_reply: Option<PingReply>,
    #[serde(default)]
    pub client_ping: Option<ClientPing>,
    #[serde(default, rename = "rule")]
    pub rules: Vec<Rule>,
}

/// Families and market entries, as loaded from a venues file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VenueCatalog {
    #[serde(default = "one")]
    pub version: u32,
    #[serde(default, rename = "family")]
    pub families: Vec<Family>,
    #[serde(default, rename = "market")]
    pub markets: Vec<ConnectorConfig>,
}

fn one() -> u32 {
    1
}

impl VenueCatalog {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_VENUES).expect("built-in venue catalog parses")
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let cat: VenueCatalog = toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))?;
        if cat.version != 1 {
            return Err(IngestError::Config(format!("unsupported venues version {}", cat.version)));
        }
        Ok(cat)
    }

    /// Adds `other`'s families and markets, replacing same-named ones.
    pub fn merge(mut self, other: VenueCatalog) -> Self {
        for f in other.families {
            self.families.retain(|g| g.name != f.name);
            self.families.push(f);
        }
        for m in other.markets {
            self.markets.retain(|n| n.market != m.market);
            self.markets.push(m);
        }
        self
    }

    pub fn family(&self, name: &str) -> Option<&Family> {
        self.families.iter().find(|f| f.name == name)
    }

    pub fn market(&self, exchange: &str, symbol: &str) -> Option<&ConnectorConfig> {
        self.markets.iter().find(|m| m.market.exchange() == exchange && m.market.symbol() == symbol)
    }

    pub fn adapter(&self, cfg: &ConnectorConfig) -> Result<VenueAdapter, IngestError> {
        let family = self
            .family(&cfg.family)
            .ok_or_else(|| IngestError::Config(format!("{}: unknown family {:?}", cfg.market, cfg.family)))?;
        VenueAdapter::new(family, cfg)
    }
}

/// One normalized item before sequencing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub kind: EventKind,
    /// Venue timestamp, when the payload carries one.
    pub ts: Option<EpochMs>,
    pub value: Fixed,
    pub price: Option<Fixed>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Events(Vec<Observation>),
    /// Matched an ignore rule, or matched a data rule with no item for this
    /// market.
    Ignored { rule: String },
    Quarantined { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub outcome: Outcome,
    /// Text to send back on the socket (heartbeat answer).
    pub reply: Option<String>,
}

/// A family bound to one market.
#[derive(Debug, Clone)]
pub struct VenueAdapter {
    market: Arc<MarketId>,
    compression: Compression,
    subscribe: Vec<String>,
    ping_reply: Option<PingReply>,
    client_ping: Option<ClientPing>,
    rules: Vec<Rule>,
    contract_size: Fixed,
}

impl VenueAdapter {
    pub fn new(family: &Family, cfg: &ConnectorConfig) -> Result<Self, IngestError> {
        let sym = cfg.symbol_map.as_str();
        let mut rules = family.rules.clone();
        for r in &mut rules {
            let data_rule = r.action != Action::Ignore;
            if data_rule && r.value.is_none() {
                return Err(IngestError::Config(format!("{}: rule {} has no value field", family.name, r.name)));
            }
            if r.action == Action::Trade && r.price.is_none() {
                return Err(IngestError::Config(format!("{}: trade rule {} has no price field", family.name, r.name)));
            }
            r.when.iter_mut().chain(r.item_when.iter_mut()).for_each(|c| c.bind(sym));
            r.kind_flags.iter_mut().for_each(|f| f.when.bind(sym));
        }
        Ok(VenueAdapter {
            market: Arc::new(cfg.market.clone()),
            compression: family.compression,
            subscribe: family.subscribe.iter().map(|s| s.replace("{symbol}", sym)).collect(),
            ping_reply: family.ping_reply.clone(),
            client_ping: family.client_ping.clone(),
            rules,
            contract_size: cfg.contract_size,
        })
    }

    pub fn market(&self) -> &Arc<MarketId> {
        &self.market
    }

    pub fn subscriptions(&self) -> &[String] {
        &self.subscribe
    }

    pub fn client_ping(&self) -> Option<&ClientPing> {
        self.client_ping.as_ref()
    }

    pub fn compression(&self) -> Compression {
        self.compression
    }

    /// Decodes a binary frame into text according to the family's
    /// compression.
    pub fn decode_binary(&self, bytes: &[u8]) -> Result<String, String> {
        match self.compression {
            Compression::None => String::from_utf8(bytes.to_vec()).map_err(|_| "binary frame is not UTF-8".into()),
            Compression::Gzip => {
                let mut s = String::new();
                flate2::read::GzDecoder::new(bytes).read_to_string(&mut s).map_err(|e| format!("gzip: {e}"))?;
                Ok(s)
            }
        }
    }

    /// Normalizes one text payload. Never drops silently: anything no rule
    /// explains is quarantined.
    pub fn normalize(&self, feed: Feed, text: &str) -> Normalized {
        let msg: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return Normalized { outcome: Outcome::Quarantined { reason: format!("not JSON: {e}") }, reply: None },
        };
        let reply = self.ping_reply.as_ref().and_then(|p| {
            msg.pointer(&p.pointer).map(|x| {
                let mut o = serde_json::Map::new();
                o.insert(p.reply_key.clone(), x.clone());
                Value::Object(o).to_string()
            })
        });
        let outcome = match self.rules.iter().find(|r| r.feed == feed && r.when.iter().all(|c| c.holds(&msg))) {
            None if reply.is_some() => Outcome::Ignored { rule: "heartbeat".into() },
            None => Outcome::Quarantined { reason: "no rule matches".into() },
            Some(r) if r.action == Action::Ignore => Outcome::Ignored { rule: r.name.clone() },
            Some(r) => match self.extract(r, &msg) {
                Ok(obs) if obs.is_empty() => Outcome::Ignored { rule: r.name.clone() },
                Ok(obs) => Outcome::Events(obs),
                Err(e) => Outcome::Quarantined { reason: format!("rule {}: {e}", r.name) },
            },
        };
        Normalized { outcome, reply }
    }

    fn extract(&self, r: &Rule, msg: &Value) -> Result<Vec<Observation>, String> {
        let items: Vec<&Value> = match &r.items {
            None => vec![msg],
            Some(p) => match msg.pointer(p) {
                Some(Value::Array(a)) => a.iter().collect(),
                Some(o @ Value::Object(_)) => vec![o],
                Some(_) => return Err(format!("{p} is neither an array nor an object")),
                None => return Err(format!("{p} missing")),
            },
        };
        let root_ts = match &r.root_ts {
            Some(p) => msg.pointer(p).map(|v| parse_ts(v, r.ts_format)).transpose()?,
            None => None,
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items.into_iter().filter(|i| r.item_when.iter().all(|c| c.holds(i))) {
            let vp = r.value.as_deref().expect("checked at construction");
            let mut value = number(item.pointer(vp).ok_or_else(|| format!("{vp} missing"))?)?;
            if r.scale == Scale::Contract {
                value = value.checked_mul(self.contract_size).ok_or("value overflows")?;
            }
            let ts = match &r.ts {
                Some(p) => item.pointer(p).map(|v| parse_ts(v, r.ts_format)).transpose()?.or(root_ts),
                None => root_ts,
            };
            let obs = match r.action {
                Action::Trade => {
                    let pp = r.price.as_deref().expect("checked at construction");
                    let price = number(item.pointer(pp).ok_or_else(|| format!("{pp} missing"))?)?;
                    if !value.is_positive() || !price.is_positive() {
                        return Err(format!("non-positive size {value} or price {price}"));
                    }
                    let kind = r
                        .kind_flags
                        .iter()
                        .find(|f| f.when.holds(item))
                        .map(|f| f.kind)
                        .or(r.kind)
                        .unwrap_or(FlagKind::Trade);
                    Observation { kind: kind.into(), ts, value, price: Some(price) }
                }
                Action::OpenInterest => {
                    if value.is_negative() {
                        return Err(format!("negative open interest {value}"));
                    }
                    Observation { kind: EventKind::OiSample, ts, value, price: None }
                }
                Action::Ignore => unreachable!("ignore rules are not extracted"),
            };
            out.push(obs);
        }
        Ok(out)
    }
}

fn number(v: &Value) -> Result<Fixed, String> {
    let s = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => return Err(format!("expected a number, found {other}")),
    };
    Fixed::parse_rounded(s.trim()).map_err(|e| format!("{s:?}: {e}"))
}

fn parse_ts(v: &Value, fmt: TsFormat) -> Result<EpochMs, String> {
    let ms = match fmt {
        TsFormat::Rfc3339 => {
            let s = v.as_str().ok_or_else(|| format!("timestamp {v} is not a string"))?;
            chrono::DateTime::parse_from_rfc3339(s).map_err(|e| format!("timestamp {s:?}: {e}"))?.timestamp_millis()
        }
        _ => {
            let x = number(v)?;
            let per_ms = match fmt {
                TsFormat::Ms => 1,
                TsFormat::Us => 1_000,
                TsFormat::Ns => 1_000_000,
                _ => 0,
            };
            let ms = if per_ms == 0 {
                x.checked_mul_int(1_000).ok_or("timestamp overflows")?
            } else {
                x.checked_div_int(per_ms).ok_or("timestamp overflows")?
            };
            i64::try_from(ms.raw().div_euclid(crate::model::SCALE)).map_err(|_| "timestamp overflows")?
        }
    };
    if ms <= 0 {
        return Err(format!("timestamp {ms} is not positive"));
    }
    Ok(ms)
}
