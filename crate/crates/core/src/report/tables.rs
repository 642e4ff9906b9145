//! Period and sub-period tables, in CSV and aligned text.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::model::{format_ts, Amount, Fixed, Price, SubPeriod};
use crate::reconcile::TickPoint;

use super::format::{fixed_dp, group_digits, usd_value, with_usd};
use super::{MarketAudit, ReportError};

/// One market's full-period totals, native and in dollars.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRow {
    pub exchange: String,
    pub symbol: String,
    pub o_tv: Amount,
    pub v_t: Amount,
    pub x_tv: Amount,
    pub avg_price: Option<Price>,
    pub intervals: usize,
    pub invalid_intervals: usize,
    pub excluded: bool,
}

impl PeriodRow {
    pub fn from_audit(a: &MarketAudit) -> Self {
        PeriodRow {
            exchange: a.market.exchange().to_owned(),
            symbol: a.market.symbol().to_owned(),
            o_tv: a.full.o_tv,
            v_t: a.full.v_t,
            x_tv: a.full.x_tv,
            avg_price: a.avg_price,
            intervals: a.full.intervals,
            invalid_intervals: a.full.invalid_intervals,
            excluded: a.full.excluded,
        }
    }

    /// Dollar value used for ordering; coin amounts without a price fall
    /// back to their native value.
    fn sort_value(&self, amount: Amount) -> Fixed {
        usd_value(amount, self.avg_price).unwrap_or(amount.value())
    }
}

/// Largest excess first, then largest OI variation, then venue and symbol.
pub fn sort_period_rows(rows: &mut [PeriodRow]) {
    rows.sort_by(|a, b| {
        b.sort_value(b.x_tv)
            .cmp(&a.sort_value(a.x_tv))
            .then_with(|| b.sort_value(b.o_tv).cmp(&a.sort_value(a.o_tv)))
            .then_with(|| a.exchange.cmp(&b.exchange))
            .then_with(|| a.symbol.cmp(&b.symbol))
    });
}

#[derive(Serialize)]
struct PeriodCsv<'a> {
    exchange: &'a str,
    symbol: &'a str,
    unit: &'static str,
    o_tv: Fixed,
    v_t: Fixed,
    x_tv: Fixed,
    avg_price: Option<Price>,
    o_tv_usd: Option<Fixed>,
    v_t_usd: Option<Fixed>,
    x_tv_usd: Option<Fixed>,
    intervals: usize,
    invalid_intervals: usize,
    excluded: bool,
}

/// Sub-period summary of one market at one granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPeriodRow {
    pub exchange: String,
    pub symbol: String,
    pub avg_price: Option<Price>,
    /// `(granularity, n_excess, n_total, conditional mean)`; totals of zero
    /// mean no valid window.
    pub cells: Vec<(SubPeriod, u64, u64, Amount)>,
}

impl SubPeriodRow {
    pub fn from_audit(a: &MarketAudit) -> Self {
        let unit = a.market.native_unit();
        let cells = a
            .subperiods
            .iter()
            .map(|r| match &r.stats {
                Some(s) => (r.subperiod, s.n_excess, s.n_total, s.cond_mean_excess),
                None => (r.subperiod, 0, 0, Amount::zero(unit)),
            })
            .collect();
        SubPeriodRow {
            exchange: a.market.exchange().to_owned(),
            symbol: a.market.symbol().to_owned(),
            avg_price: a.avg_price,
            cells,
        }
    }
}

/// Exact comparison of `n/d` fractions; rows without coverage sort last.
fn cmp_fraction(a: (u64, u64), b: (u64, u64)) -> Ordering {
    match (a.1, b.1) {
        (0, 0) => Ordering::Equal,
        (0, _) => Ordering::Less,
        (_, 0) => Ordering::Greater,
        _ => (a.0 as u128 * b.1 as u128).cmp(&(b.0 as u128 * a.1 as u128)),
    }
}

/// Highest excess probability first, coarsest granularity deciding first.
pub fn sort_subperiod_rows(rows: &mut [SubPeriodRow]) {
    rows.sort_by(|a, b| {
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            let ord = cmp_fraction((cb.1, cb.2), (ca.1, ca.2));
            if ord != Ordering::Equal {
                return ord;
            }
        }
        a.exchange.cmp(&b.exchange).then_with(|| a.symbol.cmp(&b.symbol))
    });
}

#[derive(Serialize)]
struct SubPeriodCsv<'a> {
    exchange: &'a str,
    symbol: &'a str,
    subperiod: SubPeriod,
    n_total: u64,
    n_excess: u64,
    p_excess_pct: Option<String>,
    unit: &'static str,
    cond_mean_excess: Fixed,
    avg_price: Option<Price>,
    cond_mean_excess_usd: Option<Fixed>,
}

#[derive(Serialize)]
struct TickCsv {
    ts: i64,
    excess: Fixed,
    price: Option<Price>,
    valid: bool,
}

fn percent(n: u64, d: u64) -> Option<String> {
    (d > 0).then(|| fixed_dp(Fixed::from_int(n as i64 * 100).checked_div_int(d).expect("d > 0"), 1) + "%")
}

fn csv_error(path: &Path, e: csv::Error) -> ReportError {
    ReportError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

pub fn write_period_csv(path: &Path, rows: &[PeriodRow]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(PeriodCsv {
            exchange: &r.exchange,
            symbol: &r.symbol,
            unit: r.o_tv.unit().as_str(),
            o_tv: r.o_tv.value(),
            v_t: r.v_t.value(),
            x_tv: r.x_tv.value(),
            avg_price: r.avg_price,
            o_tv_usd: usd_value(r.o_tv, r.avg_price),
            v_t_usd: usd_value(r.v_t, r.avg_price),
            x_tv_usd: usd_value(r.x_tv, r.avg_price),
            intervals: r.intervals,
            invalid_intervals: r.invalid_intervals,
            excluded: r.excluded,
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| ReportError::io(path, e))
}

pub fn write_subperiod_csv(path: &Path, rows: &[SubPeriodRow]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        for &(sp, n_excess, n_total, mean) in &r.cells {
            w.serialize(SubPeriodCsv {
                exchange: &r.exchange,
                symbol: &r.symbol,
                subperiod: sp,
                n_total,
                n_excess,
                p_excess_pct: percent(n_excess, n_total),
                unit: mean.unit().as_str(),
                cond_mean_excess: mean.value(),
                avg_price: r.avg_price,
                cond_mean_excess_usd: usd_value(mean, r.avg_price),
            })
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| ReportError::io(path, e))
}

pub fn write_ticks_csv(path: &Path, ticks: &[TickPoint]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for t in ticks {
        w.serialize(TickCsv { ts: t.ts, excess: t.excess.value(), price: t.last_price, valid: t.valid })
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| ReportError::io(path, e))
}

/// Pads columns to a common width; the first `left` columns align left.
fn align(header: &[String], body: &[Vec<String>], left: usize) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| std::iter::once(header).chain(body.iter().map(|r| r.as_slice())).map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in std::iter::once(header).chain(body.iter().map(|r| r.as_slice())) {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            let pad = widths[c] - cell.chars().count();
            if c > 0 {
                line.push_str("  ");
            }
            if c < left {
                line.push_str(cell);
                line.extend(std::iter::repeat_n(' ', pad));
            } else {
                line.extend(std::iter::repeat_n(' ', pad));
                line.push_str(cell);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn price_cell(p: Option<Price>) -> String {
    p.map(|p| {
        let s = fixed_dp(p.value(), 2);
        let (int, frac) = s.split_once('.').expect("two decimals");
        format!("${}.{frac}", group_digits(int.parse().expect("integer part")))
    })
    .unwrap_or_else(|| "n/a".into())
}

/// Human-readable period table.
pub fn period_text(rows: &[PeriodRow], start: i64, end: i64) -> String {
    let header: Vec<String> =
        ["Exchange", "Symbol", "O_TV", "V_T", "X_TV", "Avg price", "Excluded"].map(String::from).to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.exchange.clone(),
                r.symbol.clone(),
                with_usd(r.o_tv, r.avg_price),
                with_usd(r.v_t, r.avg_price),
                with_usd(r.x_tv, r.avg_price),
                price_cell(r.avg_price),
                if r.excluded { "yes".into() } else { "no".into() },
            ]
        })
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "Period {} to {}", format_ts(start), format_ts(end));
    out.push_str(&align(&header, &body, 2));
    out.push_str("Coin amounts are converted to dollars at the listed average price.\n");
    out
}

/// Human-readable sub-period table: probability of excess and conditional
/// mean excess per granularity.
pub fn subperiod_text(rows: &[SubPeriodRow]) -> String {
    let Some(first) = rows.first() else {
        return "No sub-period results.\n".into();
    };
    let mut header: Vec<String> = vec!["Exchange".into(), "Symbol".into()];
    for (sp, ..) in &first.cells {
        header.push(format!("P {sp}"));
        header.push(format!("E {sp}"));
    }
    header.push("Avg price".into());
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.exchange.clone(), r.symbol.clone()];
            for &(_, n_excess, n_total, mean) in &r.cells {
                cells.push(percent(n_excess, n_total).unwrap_or_else(|| "n/a".into()));
                cells.push(if n_total == 0 { "n/a".into() } else { with_usd(mean, r.avg_price) });
            }
            cells.push(price_cell(r.avg_price));
            cells
        })
        .collect();
    let mut out = align(&header, &body, 2);
    out.push_str("P: share of valid windows with excess. E: mean excess over those windows.\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Unit;

    fn usd(v: i64) -> Amount {
        Amount::new(Fixed::from_int(v), Unit::Usd).unwrap()
    }

    fn row(ex: &str, o: i64, v: i64) -> PeriodRow {
        PeriodRow {
            exchange: ex.into(),
            symbol: "BTC_USD_IP".into(),
            o_tv: usd(o),
            v_t: usd(v),
            x_tv: usd(o).floor_sub(usd(v)).unwrap(),
            avg_price: None,
            intervals: 1,
            invalid_intervals: 0,
            excluded: false,
        }
    }

    #[test]
    fn period_order() {
        let mut rows = vec![row("okx", 10, 20), row("bybit", 100, 50), row("deribit", 30, 20), row("binance", 10, 20)];
        sort_period_rows(&mut rows);
        let order: Vec<&str> = rows.iter().map(|r| r.exchange.as_str()).collect();
        assert_eq!(order, ["bybit", "deribit", "binance", "okx"]);
    }

    #[test]
    fn zero_excess_ties_fall_back_to_variation() {
        let mut rows = vec![row("a", 10, 20), row("b", 30, 40)];
        sort_period_rows(&mut rows);
        assert_eq!(rows[0].exchange, "b");
    }

    #[test]
    fn subperiod_order_is_exact() {
        let cell = |n, d| (SubPeriod::D1, n, d, usd(0));
        let mk = |ex: &str, n, d| SubPeriodRow { exchange: ex.into(), symbol: "s".into(), avg_price: None, cells: vec![cell(n, d)] };
        let mut rows = vec![mk("a", 1, 3), mk("b", 0, 0), mk("c", 2, 3), mk("d", 2, 6)];
        sort_subperiod_rows(&mut rows);
        let order: Vec<&str> = rows.iter().map(|r| r.exchange.as_str()).collect();
        assert_eq!(order, ["c", "a", "d", "b"]);
    }

    #[test]
    fn text_is_aligned() {
        let t = period_text(&[row("bybit", 12_088_654_910, 6_570_819_230)], 0, 1);
        assert!(t.contains("$5,517,835,680"));
        let lines: Vec<&str> = t.lines().skip(1).take(2).collect();
        assert_eq!(lines[0].find("O_TV").map(|i| i + 4), lines[1].find("$12,088,654,910").map(|i| i + 15));
    }
}
