//! Append-only capture files.
//!
//! A capture is a sequence of text records, each framed as
//!
//! ```text
//! <len: 8 lowercase hex> ' ' <crc32 of payload: 8 lowercase hex> ' ' <payload> '\n'
//! ```
//!
//! The first record is a JSON header naming the format, its version and the
//! market. Every following record is one event, tab-separated:
//!
//! ```text
//! seq  ts  kind  value  price|-  until|-  recv_ts  ts_source(V|L)  raw_base64|-
//! ```
//!
//! A damaged final record (a crash mid-write) is dropped with a warning; a
//! damaged record anywhere else is a hard error carrying its byte offset.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::model::{Amount, EpochMs, EventKind, Fixed, MarketEvent, MarketId, Price};

use super::IngestError;

pub const CAPTURE_FORMAT: &str = "oi-audit-capture";
pub const CAPTURE_VERSION: u32 = 1;
/// Raw payloads longer than this are not kept.
pub const DEFAULT_RAW_CAP: usize = 16 * 1024;

const PREFIX_LEN: usize = 18;

/// Where an event timestamp came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsSource {
    Venue,
    Local,
}

/// An event with its receipt provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    /// Local epoch ms at receipt.
    pub recv_ts: EpochMs,
    pub event: MarketEvent,
    pub ts_source: TsSource,
    pub raw: Option<Vec<u8>>,
}

impl CaptureRecord {
    /// A record whose receipt time is its event time, as for replayed or
    /// simulated streams.
    pub fn synthetic(event: MarketEvent) -> Self {
        CaptureRecord { recv_ts: event.ts, event, ts_source: TsSource::Venue, raw: None }
    }

    /// Whether `recv_ts` lags behind the venue timestamp by more than `max_skew_ms`.
    pub fn skewed(&self, max_skew_ms: i64) -> bool {
        self.recv_ts < self.event.ts - max_skew_ms
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    market: MarketId,
}

/// Damaged final record dropped during replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncatedTail {
    /// Offset of the first byte after the last complete record.
    pub offset: u64,
    /// Bytes discarded.
    pub discarded: u64,
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub market: Arc<MarketId>,
    pub records: Vec<CaptureRecord>,
    pub truncated: Option<TruncatedTail>,
}

impl Replay {
    pub fn events(&self) -> Vec<MarketEvent> {
        self.records.iter().map(|r| r.event.clone()).collect()
    }

    pub fn into_events(self) -> Vec<MarketEvent> {
        self.records.into_iter().map(|r| r.event).collect()
    }
}

fn encode_record(out: &mut Vec<u8>, payload: &[u8]) {
    let crc = crc32fast::hash(payload);
    let _ = write!(out, "{:08x} {:08x} ", payload.len(), crc);
    out.extend_from_slice(payload);
    out.push(b'\n');
}

fn encode_event(buf: &mut Vec<u8>, rec: &CaptureRecord, raw_cap: usize) {
    let ev = &rec.event;
    let (until, kind) = match ev.kind {
        EventKind::Gap { until } => (Some(until), ev.kind.tag()),
        k => (None, k.tag()),
    };
    let _ = write!(buf, "{}\t{}\t{}\t{}\t", ev.seq, ev.ts, kind, ev.size_or_value.value());
    match ev.price {
        Some(p) => {
            let _ = write!(buf, "{p}\t");
        }
        None => buf.extend_from_slice(b"-\t"),
    }
    match until {
        Some(u) => {
            let _ = write!(buf, "{u}\t");
        }
        None => buf.extend_from_slice(b"-\t"),
    }
    let src = match rec.ts_source {
        TsSource::Venue => 'V',
        TsSource::Local => 'L',
    };
    let _ = write!(buf, "{}\t{src}\t", rec.recv_ts);
    match &rec.raw {
        Some(raw) if raw.len() <= raw_cap => buf.extend_from_slice(B64.encode(raw).as_bytes()),
        _ => buf.push(b'-'),
    }
}

/// Appends records to a capture file.
pub struct CaptureWriter {
    path: PathBuf,
    out: BufWriter<File>,
    market: Arc<MarketId>,
    last_seq: Option<u64>,
    raw_cap: usize,
    payload: Vec<u8>,
    frame: Vec<u8>,
    written: u64,
}

impl CaptureWriter {
    /// Creates (or truncates) `path` and writes the header.
    pub fn create(path: impl AsRef<Path>, market: Arc<MarketId>) -> Result<Self, IngestError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| IngestError::io(&path, e))?;
        let mut w = CaptureWriter::wrap(path, file, market, None);
        let header = Header { format: CAPTURE_FORMAT.into(), version: CAPTURE_VERSION, market: (*w.market).clone() };
        let json = serde_json::to_vec(&header).expect("header serializes");
        w.frame.clear();
        encode_record(&mut w.frame, &json);
        w.out.write_all(&w.frame).map_err(|e| IngestError::io(&w.path, e))?;
        Ok(w)
    }

    /// Opens an existing capture for appending, first cutting off a damaged
    /// tail. Creates the file when missing.
    pub fn open_append(path: impl AsRef<Path>, market: Arc<MarketId>) -> Result<Self, IngestError> {
        let path = path.as_ref().to_path_buf();
        if !path.exists() {
            return CaptureWriter::create(path, market);
        }
        let replay = replay(&path)?;
        if *replay.market != *market {
            return Err(IngestError::MarketMismatch { expected: market.to_string(), found: replay.market.to_string() });
        }
        let file = OpenOptions::new().write(true).open(&path).map_err(|e| IngestError::io(&path, e))?;
        if let Some(t) = replay.truncated {
            tracing::warn!(path = %path.display(), offset = t.offset, discarded = t.discarded, "cutting damaged capture tail");
            file.set_len(t.offset).map_err(|e| IngestError::io(&path, e))?;
        }
        let mut file = file;
        std::io::Seek::seek(&mut file, std::io::SeekFrom::End(0)).map_err(|e| IngestError::io(&path, e))?;
        let last = replay.records.last().map(|r| r.event.seq);
        let mut w = CaptureWriter::wrap(path, file, market, last);
        w.written = replay.records.len() as u64;
        Ok(w)
    }

    fn wrap(path: PathBuf, file: File, market: Arc<MarketId>, last_seq: Option<u64>) -> Self {
        CaptureWriter {
            path,
            out: BufWriter::with_capacity(1 << 20, file),
            market,
            last_seq,
            raw_cap: DEFAULT_RAW_CAP,
            payload: Vec::with_capacity(256),
            frame: Vec::with_capacity(256),
            written: 0,
        }
    }

    pub fn with_raw_cap(mut self, cap: usize) -> Self {
        self.raw_cap = cap;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Sequence number the next record should carry.
    pub fn next_seq(&self) -> u64 {
        self.last_seq.map_or(0, |s| s + 1)
    }

    /// Records written so far, including any already in an appended file.
    pub fn written(&self) -> u64 {
        self.written
    }

    /// Appends one record. `seq` must strictly increase and the market must
    /// match the header.
    pub fn append(&mut self, rec: &CaptureRecord) -> Result<(), IngestError> {
        let ev = &rec.event;
        if !Arc::ptr_eq(&ev.market, &self.market) && *ev.market != *self.market {
            return Err(IngestError::MarketMismatch { expected: self.market.to_string(), found: ev.market.to_string() });
        }
        if self.last_seq.is_some_and(|s| ev.seq <= s) {
            return Err(IngestError::SeqNotIncreasing { prev: self.last_seq.unwrap_or_default(), next: ev.seq });
        }
        self.payload.clear();
        encode_event(&mut self.payload, rec, self.raw_cap);
        self.frame.clear();
        encode_record(&mut self.frame, &self.payload);
        self.out.write_all(&self.frame).map_err(|e| IngestError::io(&self.path, e))?;
        self.last_seq = Some(ev.seq);
        self.written += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), IngestError> {
        self.out.flush().map_err(|e| IngestError::io(&self.path, e))
    }

    /// Flushes and fsyncs.
    pub fn finish(mut self) -> Result<u64, IngestError> {
        self.flush()?;
        self.out.get_ref().sync_all().map_err(|e| IngestError::io(&self.path, e))?;
        Ok(self.written)
    }
}

/// Writes `events` as a fresh capture with synthetic receipt times.
pub fn capture(events: &[MarketEvent], market: Arc<MarketId>, path: impl AsRef<Path>) -> Result<u64, IngestError> {
    let mut w = CaptureWriter::create(path, market)?;
    for ev in events {
        w.append(&CaptureRecord::synthetic(ev.clone()))?;
    }
    w.finish()
}

/// Reads a whole capture file.
pub fn replay(path: impl AsRef<Path>) -> Result<Replay, IngestError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let out = replay_bytes(&bytes)?;
    if let Some(t) = out.truncated {
        tracing::warn!(path = %path.display(), offset = t.offset, discarded = t.discarded, "damaged capture tail ignored");
    }
    Ok(out)
}

enum Frame<'a> {
    Record { payload: &'a [u8], next: usize },
    /// Damaged data reaching the end of the buffer.
    Tail,
    Corrupt(String),
}

fn hex8(b: &[u8]) -> Option<u32> {
    if b.len() != 8 || !b.iter().all(|c| c.is_ascii_digit() || (b'a'..=b'f').contains(c)) {
        return None;
    }
    u32::from_str_radix(std::str::from_utf8(b).ok()?, 16).ok()
}

fn next_frame(buf: &[u8], at: usize) -> Frame<'_> {
    let rest = &buf[at..];
    let tail_or = |reason: String, end: usize| if end >= buf.len() { Frame::Tail } else { Frame::Corrupt(reason) };
    if rest.len() < PREFIX_LEN {
        return Frame::Tail;
    }
    let prefix = (hex8(&rest[..8]), rest[8], hex8(&rest[9..17]), rest[17]);
    let (Some(len), b' ', Some(crc), b' ') = prefix else {
        // A half-written record is a prefix of a valid one and holds no
        // newline; a damaged record followed by others is interior.
        let last_newline = rest.iter().position(|&b| b == b'\n').is_none_or(|p| at + p + 1 == buf.len());
        return if last_newline { Frame::Tail } else { Frame::Corrupt("malformed record prefix".into()) };
    };
    let end = at + PREFIX_LEN + len as usize + 1;
    if end > buf.len() {
        return Frame::Tail;
    }
    let payload = &buf[at + PREFIX_LEN..end - 1];
    if buf[end - 1] != b'\n' {
        return tail_or("record not newline-terminated".into(), end);
    }
    if crc32fast::hash(payload) != crc {
        return tail_or("checksum mismatch".into(), end);
    }
    Frame::Record { payload, next: end }
}

/// [`replay`] over an in-memory capture.
pub fn replay_bytes(buf: &[u8]) -> Result<Replay, IngestError> {
    let corrupt = |offset: usize, reason: String| IngestError::Corrupt { offset: offset as u64, reason };
    let (header, mut at) = match next_frame(buf, 0) {
        Frame::Record { payload, next } => (payload, next),
        Frame::Tail => return Err(IngestError::BadHeader("missing or incomplete header".into())),
        Frame::Corrupt(r) => return Err(corrupt(0, r)),
    };
    let header: Header =
        serde_json::from_slice(header).map_err(|e| IngestError::BadHeader(format!("header is not valid JSON: {e}")))?;
    if header.format != CAPTURE_FORMAT {
        return Err(IngestError::BadHeader(format!("unknown format {:?}", header.format)));
    }
    if header.version != CAPTURE_VERSION {
        return Err(IngestError::BadHeader(format!("unsupported version {}", header.version)));
    }
    let market = Arc::new(header.market);
    let mut records = Vec::with_capacity(buf.len() / 64);
    let mut truncated = None;
    let mut last_seq: Option<u64> = None;
    while at < buf.len() {
        match next_frame(buf, at) {
            Frame::Record { payload, next } => {
                let parsed = decode_event(payload, &market);
                match parsed {
                    Ok(rec) => {
                        if last_seq.is_some_and(|s| rec.event.seq <= s) {
                            if next >= buf.len() {
                                truncated = Some(TruncatedTail { offset: at as u64, discarded: (buf.len() - at) as u64 });
                                break;
                            }
                            return Err(corrupt(at, format!("seq {} does not increase", rec.event.seq)));
                        }
                        last_seq = Some(rec.event.seq);
                        records.push(rec);
                    }
                    Err(reason) if next >= buf.len() => {
                        tracing::debug!(offset = at, %reason, "unparseable final record");
                        truncated = Some(TruncatedTail { offset: at as u64, discarded: (buf.len() - at) as u64 });
                        break;
                    }
                    Err(reason) => return Err(corrupt(at, reason)),
                }
                at = next;
            }
            Frame::Tail => {
                truncated = Some(TruncatedTail { offset: at as u64, discarded: (buf.len() - at) as u64 });
                break;
            }
            Frame::Corrupt(reason) => return Err(corrupt(at, reason)),
        }
    }
    Ok(Replay { market, records, truncated })
}

fn decode_event(payload: &[u8], market: &Arc<MarketId>) -> Result<CaptureRecord, String> {
    let text = std::str::from_utf8(payload).map_err(|_| "payload is not UTF-8".to_string())?;
    let f: Vec<&str> = text.split('\t').collect();
    if f.len() != 9 {
        return Err(format!("expected 9 fields, found {}", f.len()));
    }
    let int = |s: &str, name: &str| s.parse::<i64>().map_err(|_| format!("bad {name} {s:?}"));
    let seq = f[0].parse::<u64>().map_err(|_| format!("bad seq {:?}", f[0]))?;
    let ts = int(f[1], "ts")?;
    let kind = match f[2] {
        "GAP" => EventKind::Gap { until: int(f[5], "until")? },
        tag => tag.parse::<EventKind>().map_err(|e| e.to_string())?,
    };
    let value: Fixed = f[3].parse().map_err(|e| format!("bad value: {e}"))?;
    let size = Amount::new(value, market.native_unit()).map_err(|e| e.to_string())?;
    let price = match f[4] {
        "-" => None,
        p => Some(Price::parse(p).map_err(|e| e.to_string())?),
    };
    let recv_ts = int(f[6], "recv_ts")?;
    let ts_source = match f[7] {
        "V" => TsSource::Venue,
        "L" => TsSource::Local,
        s => return Err(format!("bad ts source {s:?}")),
    };
    let raw = match f[8] {
        "-" => None,
        b => Some(B64.decode(b).map_err(|e| format!("bad raw payload: {e}"))?),
    };
    let event = MarketEvent::new(market.clone(), ts, seq, kind, size, price).map_err(|e| e.to_string())?;
    Ok(CaptureRecord { recv_ts, event, ts_source, raw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContractKind, Unit};

    fn market() -> Arc<MarketId> {
        Arc::new(MarketId::new("okx", "BTC_USDT_P", ContractKind::LinearPerp).unwrap())
    }

    fn sample(m: &Arc<MarketId>) -> Vec<CaptureRecord> {
        let coin = |s: &str| Amount::parse(s, Unit::BaseCoin).unwrap();
        vec![
            CaptureRecord::synthetic(MarketEvent::oi_sample(m.clone(), 1_000, 0, coin("51234.5")).unwrap()),
            CaptureRecord {
                recv_ts: 1_003,
                event: MarketEvent::trade(m.clone(), 1_001, 1, EventKind::Liquidation, coin("0.01"), Price::parse("20625.5").unwrap())
                    .unwrap(),
                ts_source: TsSource::Venue,
                raw: Some(br#"{"px":"20625.5","sz":"1"}"#.to_vec()),
            },
            CaptureRecord {
                recv_ts: 2_000,
                event: MarketEvent::gap(m.clone(), 1_500, 2_000, 2).unwrap(),
                ts_source: TsSource::Local,
                raw: None,
            },
        ]
    }

    fn to_bytes(m: &Arc<MarketId>, recs: &[CaptureRecord]) -> Vec<u8> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cap");
        let mut w = CaptureWriter::create(&p, m.clone()).unwrap();
        for r in recs {
            w.append(r).unwrap();
        }
        w.finish().unwrap();
        std::fs::read(p).unwrap()
    }

    #[test]
    fn round_trip_and_framing() {
        let m = market();
        let recs = sample(&m);
        let bytes = to_bytes(&m, &recs);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains(r#""format":"oi-audit-capture""#));
        assert!(text.contains("\tGAP\t0\t-\t2000\t2000\tL\t-\n"));
        let back = replay_bytes(&bytes).unwrap();
        assert_eq!(back.records, recs);
        assert!(back.truncated.is_none());
        assert_eq!(*back.market, *m);
    }

    #[test]
    fn empty_stream_has_only_a_header() {
        let m = market();
        let bytes = to_bytes(&m, &[]);
        assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 1);
        assert!(replay_bytes(&bytes).unwrap().records.is_empty());
    }

    #[test]
    fn every_cut_point_replays_complete_records() {
        let m = market();
        let recs = sample(&m);
        let bytes = to_bytes(&m, &recs);
        let header_end = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        let ends: Vec<usize> = bytes.iter().enumerate().filter(|(_, &b)| b == b'\n').map(|(i, _)| i + 1).collect();
        for cut in header_end..=bytes.len() {
            let r = replay_bytes(&bytes[..cut]).unwrap();
            let complete = ends.iter().filter(|&&e| e <= cut).count() - 1;
            assert_eq!(r.records, recs[..complete], "cut at {cut}");
            assert_eq!(r.truncated.is_some(), !ends.contains(&cut), "cut at {cut}");
        }
    }

    #[test]
    fn interior_corruption_reports_offset() {
        let m = market();
        let mut bytes = to_bytes(&m, &sample(&m));
        let header_end = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        let victim = header_end + PREFIX_LEN + 2;
        bytes[victim] ^= 0x01;
        match replay_bytes(&bytes) {
            Err(IngestError::Corrupt { offset, .. }) => assert_eq!(offset, header_end as u64),
            other => panic!("expected corruption error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_final_record_is_dropped() {
        let m = market();
        let recs = sample(&m);
        let mut bytes = to_bytes(&m, &recs);
        let n = bytes.len();
        bytes[n - 3] ^= 0x01;
        let r = replay_bytes(&bytes).unwrap();
        assert_eq!(r.records, recs[..2]);
        assert!(r.truncated.is_some());
    }

    #[test]
    fn append_after_crash_cuts_the_tail() {
        let m = market();
        let recs = sample(&m);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cap");
        let mut w = CaptureWriter::create(&p, m.clone()).unwrap();
        w.append(&recs[0]).unwrap();
        w.append(&recs[1]).unwrap();
        w.finish().unwrap();
        let len = std::fs::metadata(&p).unwrap().len();
        std::fs::OpenOptions::new().write(true).open(&p).unwrap().set_len(len - 4).unwrap();
        let mut w = CaptureWriter::open_append(&p, m.clone()).unwrap();
        assert_eq!(w.written(), 1);
        w.append(&recs[1]).unwrap();
        w.append(&recs[2]).unwrap();
        w.finish().unwrap();
        assert_eq!(replay(&p).unwrap().records, recs);
    }

    #[test]
    fn writer_rejects_bad_input() {
        let m = market();
        let recs = sample(&m);
        let dir = tempfile::tempdir().unwrap();
        let mut w = CaptureWriter::create(dir.path().join("c.cap"), m.clone()).unwrap();
        w.append(&recs[1]).unwrap();
        assert!(matches!(w.append(&recs[0]), Err(IngestError::SeqNotIncreasing { .. })));
        let other = Arc::new(MarketId::new("okx", "BTC_USD_IP", ContractKind::InversePerp).unwrap());
        let ev = MarketEvent::gap(other, 5, 6, 9).unwrap();
        assert!(matches!(w.append(&CaptureRecord::synthetic(ev)), Err(IngestError::MarketMismatch { .. })));
    }

    #[test]
    fn oversized_raw_is_not_kept() {
        let m = market();
        let mut recs = sample(&m);
        recs[1].raw = Some(vec![b'x'; 64]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cap");
        let mut w = CaptureWriter::create(&p, m.clone()).unwrap().with_raw_cap(16);
        w.append(&recs[1]).unwrap();
        w.finish().unwrap();
        assert_eq!(replay(&p).unwrap().records[0].raw, None);
    }

    #[test]
    fn bad_headers() {
        assert!(matches!(replay_bytes(b""), Err(IngestError::BadHeader(_))));
        let mut v = Vec::new();
        encode_record(&mut v, br#"{"format":"other","version":1,"market":{"exchange":"a","symbol":"b","contract_kind":"LINEAR_PERP"}}"#);
        assert!(matches!(replay_bytes(&v), Err(IngestError::BadHeader(_))));
    }
}
