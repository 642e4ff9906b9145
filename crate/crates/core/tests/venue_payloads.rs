//! Every bundled venue mapping against recorded-style payloads.

use std::collections::BTreeSet;

use oi_audit::ingest::{Feed, Outcome, VenueCatalog};
use oi_audit::model::Fixed;
use serde::Deserialize;
use serde_json::Value;

#[derive(Deserialize)]
struct Case {
    name: String,
    market: String,
    feed: String,
    payload: Value,
    expect: Expect,
}

#[derive(Deserialize)]
struct Expect {
    #[serde(default)]
    events: Option<Vec<ExpectedEvent>>,
    #[serde(default)]
    ignored: Option<String>,
    #[serde(default)]
    quarantined: bool,
    #[serde(default)]
    reply: Option<Value>,
}

#[derive(Deserialize)]
struct ExpectedEvent {
    kind: String,
    ts: Option<i64>,
    value: String,
    #[serde(default)]
    price: Option<String>,
}

fn cases() -> Vec<Case> {
    serde_json::from_str(include_str!("fixtures/venue_payloads.json")).expect("fixture parses")
}

#[test]
fn every_payload_normalizes_as_recorded() {
    let catalog = VenueCatalog::builtin();
    for case in cases() {
        let (ex, sym) = case.market.split_once('/').unwrap();
        let cfg = catalog.market(ex, sym).unwrap_or_else(|| panic!("{}: unknown market", case.name));
        let adapter = catalog.adapter(cfg).unwrap();
        let feed = if case.feed == "rest" { Feed::Rest } else { Feed::Ws };
        let text = match &case.payload {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let got = adapter.normalize(feed, &text);
        let name = &case.name;
        match (&case.expect, &got.outcome) {
            (Expect { events: Some(want), .. }, Outcome::Events(obs)) => {
                assert_eq!(obs.len(), want.len(), "{name}: event count");
                for (o, w) in obs.iter().zip(want) {
                    assert_eq!(o.kind.tag(), w.kind, "{name}: kind");
                    assert_eq!(o.ts, w.ts, "{name}: ts");
                    assert_eq!(o.value, w.value.parse::<Fixed>().unwrap(), "{name}: value");
                    assert_eq!(o.price, w.price.as_ref().map(|p| p.parse::<Fixed>().unwrap()), "{name}: price");
                }
            }
            (Expect { ignored: Some(rule), .. }, Outcome::Ignored { rule: got_rule }) => {
                assert_eq!(got_rule, rule, "{name}: ignoring rule");
            }
            (Expect { quarantined: true, .. }, Outcome::Quarantined { .. }) => {}
            (_, other) => panic!("{name}: unexpected outcome {other:?}"),
        }
        let want_reply = case.expect.reply.as_ref().map(|r| r.to_string());
        assert_eq!(got.reply, want_reply, "{name}: reply");
    }
}

#[test]
fn fixtures_cover_trades_and_open_interest_for_every_market() {
    let catalog = VenueCatalog::builtin();
    let mut trades = BTreeSet::new();
    let mut oi = BTreeSet::new();
    for case in cases() {
        for e in case.expect.events.iter().flatten() {
            if e.kind == "OI_SAMPLE" {
                oi.insert(case.market.clone());
            } else {
                trades.insert(case.market.clone());
            }
        }
    }
    for m in &catalog.markets {
        let name = m.market.to_string();
        assert!(trades.contains(&name), "{name} lacks a trade fixture");
        assert!(oi.contains(&name), "{name} lacks an open-interest fixture");
    }
}
