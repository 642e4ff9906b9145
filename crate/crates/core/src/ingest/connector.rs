//! Live connections: one websocket task and one open-interest poll task per
//! market, feeding a single ordered sequencer.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use futures_util::{SinkExt, StreamExt};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::{self, Message};

use crate::model::{EpochMs, MarketEvent, MarketId};

use super::capture::{CaptureRecord, CaptureWriter, TsSource};
use super::deadletter::{DeadLetter, DeadLetterEntry};
use super::venue::{Feed, Observation, Outcome, VenueAdapter};
use super::{ConnectorConfig, IngestError, OiChannel, DEFAULT_CLOCK_SKEW_MS};

/// Consumer of sequenced records, called from a single thread in order.
pub trait EventSink: Send + 'static {
    fn accept(&mut self, rec: CaptureRecord) -> Result<(), IngestError>;

    fn flush(&mut self) -> Result<(), IngestError> {
        Ok(())
    }
}

impl EventSink for CaptureWriter {
    fn accept(&mut self, rec: CaptureRecord) -> Result<(), IngestError> {
        self.append(&rec)
    }

    fn flush(&mut self) -> Result<(), IngestError> {
        CaptureWriter::flush(self)
    }
}

impl<F> EventSink for F
where
    F: FnMut(CaptureRecord) -> Result<(), IngestError> + Send + 'static,
{
    fn accept(&mut self, rec: CaptureRecord) -> Result<(), IngestError> {
        self(rec)
    }
}

/// Assigns per-market sequence numbers and picks event timestamps.
#[derive(Debug)]
pub struct Sequencer {
    market: Arc<MarketId>,
    next_seq: u64,
    max_skew_ms: i64,
    skew_warnings: u64,
}

impl Sequencer {
    pub fn new(market: Arc<MarketId>, next_seq: u64) -> Self {
        Sequencer { market, next_seq, max_skew_ms: DEFAULT_CLOCK_SKEW_MS, skew_warnings: 0 }
    }

    pub fn with_max_skew(mut self, ms: i64) -> Self {
        self.max_skew_ms = ms;
        self
    }

    pub fn skew_warnings(&self) -> u64 {
        self.skew_warnings
    }

    /// Venue time when the payload has one, receipt time otherwise.
    pub fn observation(
        &mut self,
        obs: Observation,
        recv_ts: EpochMs,
        raw: Option<Vec<u8>>,
    ) -> Result<CaptureRecord, IngestError> {
        let (ts, ts_source) = match obs.ts {
            Some(ts) => (ts, TsSource::Venue),
            None => (recv_ts, TsSource::Local),
        };
        let size = crate::model::Amount::new(obs.value, self.market.native_unit())?;
        let price = obs.price.map(crate::model::Price::new).transpose()?;
        let event = MarketEvent::new(self.market.clone(), ts, self.next_seq, obs.kind, size, price)?;
        let rec = CaptureRecord { recv_ts, event, ts_source, raw };
        if rec.skewed(self.max_skew_ms) {
            self.skew_warnings += 1;
            tracing::warn!(market = %self.market, ts, recv_ts, "venue timestamp ahead of local clock beyond allowed skew");
        }
        self.next_seq += 1;
        Ok(rec)
    }

    /// A feed outage marker `(from, until]`.
    pub fn gap(&mut self, from: EpochMs, until: EpochMs) -> Result<CaptureRecord, IngestError> {
        let event = MarketEvent::gap(self.market.clone(), from, until, self.next_seq)?;
        self.next_seq += 1;
        Ok(CaptureRecord { recv_ts: until, event, ts_source: TsSource::Local, raw: None })
    }
}

#[derive(Debug, Clone)]
pub struct StreamOptions {
    /// Quarantine file for payloads no rule explains.
    pub dead_letter: PathBuf,
    /// Keep the originating payload on the first event of each message.
    pub keep_raw: bool,
    pub max_skew_ms: i64,
    /// Bounded queue between connections and the sequencer.
    pub queue_capacity: usize,
    pub first_seq: u64,
}

impl StreamOptions {
    pub fn new(dead_letter: impl Into<PathBuf>) -> Self {
        StreamOptions {
            dead_letter: dead_letter.into(),
            keep_raw: false,
            max_skew_ms: DEFAULT_CLOCK_SKEW_MS,
            queue_capacity: 1 << 16,
            first_seq: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub events: u64,
    pub gaps: u64,
    pub quarantined: u64,
    pub ignored: u64,
    pub reconnects: u64,
    pub skew_warnings: u64,
}

enum Inbound {
    Message { recv_ts: EpochMs, feed: Feed, raw: Vec<u8>, outcome: Outcome },
    Gap { from: EpochMs, until: EpochMs },
    Fatal(IngestError),
}

/// Running connections for one market.
pub struct StreamHandle {
    stop: Arc<watch::Sender<bool>>,
    io: Vec<JoinHandle<()>>,
    sequencer: JoinHandle<Result<StreamStats, IngestError>>,
}

impl StreamHandle {
    /// Asks every task to stop; pending records are still delivered.
    pub fn stop(&self) {
        let _ = self.stop.send(true);
    }

    /// Waits for the stream to end (after [`Self::stop`] or a terminal error).
    pub async fn join(self) -> Result<StreamStats, IngestError> {
        let res = self.sequencer.await.map_err(|e| IngestError::Task(e.to_string()))?;
        let _ = self.stop.send(true);
        for t in self.io {
            let _ = t.await;
        }
        res
    }

    pub async fn shutdown(self) -> Result<StreamStats, IngestError> {
        self.stop();
        self.join().await
    }

    pub fn is_finished(&self) -> bool {
        self.sequencer.is_finished()
    }
}

fn now_ms() -> EpochMs {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as EpochMs).unwrap_or(0)
}

#[derive(Clone)]
struct Link {
    tx: mpsc::Sender<Inbound>,
    stop: Arc<watch::Sender<bool>>,
    overflow: Arc<AtomicBool>,
}

impl Link {
    /// False when the stream is over.
    fn push(&self, item: Inbound) -> bool {
        match self.tx.try_send(item) {
            Ok(()) => true,
            Err(mpsc::error::TrySendError::Full(_)) => {
                self.overflow.store(true, Ordering::SeqCst);
                let _ = self.stop.send(true);
                false
            }
            Err(mpsc::error::TrySendError::Closed(_)) => false,
        }
    }
}

/// Connects to a venue and streams normalized records into `sink`.
///
/// Must be called inside a tokio runtime. Websocket disconnects are retried
/// with the configured backoff and leave a gap marker spanning the outage.
/// A 4xx rejection (other than rate limiting) ends the stream with an error.
pub fn connect_and_stream(
    cfg: ConnectorConfig,
    adapter: VenueAdapter,
    sink: impl EventSink,
    opts: StreamOptions,
) -> Result<StreamHandle, IngestError> {
    cfg.validate()?;
    if **adapter.market() != cfg.market {
        return Err(IngestError::MarketMismatch { expected: cfg.market.to_string(), found: adapter.market().to_string() });
    }
    let dead = DeadLetter::open(&opts.dead_letter)?;
    let (tx, rx) = mpsc::channel(opts.queue_capacity.max(1));
    let (stop_tx, stop_rx) = watch::channel(false);
    let stop = Arc::new(stop_tx);
    let overflow = Arc::new(AtomicBool::new(false));
    let reconnects = Arc::new(AtomicU64::new(0));
    let link = Link { tx, stop: stop.clone(), overflow: overflow.clone() };
    let cfg = Arc::new(cfg);
    let adapter = Arc::new(adapter);

    let mut io = vec![tokio::spawn(ws_loop(cfg.clone(), adapter.clone(), link.clone(), stop_rx.clone(), reconnects.clone()))];
    if cfg.oi_channel == OiChannel::Poll {
        io.push(tokio::spawn(poll_loop(cfg.clone(), adapter.clone(), link.clone(), stop_rx)));
    }
    drop(link);

    let seq = Sequencer::new(adapter.market().clone(), opts.first_seq).with_max_skew(opts.max_skew_ms);
    let market = adapter.market().to_string();
    let stop_seq = stop.clone();
    let sequencer = tokio::task::spawn_blocking(move || {
        let res = run_sequencer(rx, seq, sink, dead, market, opts.keep_raw);
        if res.is_err() {
            let _ = stop_seq.send(true);
        }
        let mut stats = res?;
        stats.reconnects = reconnects.load(Ordering::SeqCst);
        if overflow.load(Ordering::SeqCst) {
            return Err(IngestError::Backpressure);
        }
        Ok(stats)
    });
    Ok(StreamHandle { stop, io, sequencer })
}

fn run_sequencer(
    mut rx: mpsc::Receiver<Inbound>,
    mut seq: Sequencer,
    mut sink: impl EventSink,
    mut dead: DeadLetter,
    market: String,
    keep_raw: bool,
) -> Result<StreamStats, IngestError> {
    let mut stats = StreamStats::default();
    while let Some(item) = rx.blocking_recv() {
        match item {
            Inbound::Message { recv_ts, feed, raw, outcome } => match outcome {
                Outcome::Events(obs) => {
                    let mut raw = keep_raw.then_some(raw);
                    for o in obs {
                        sink.accept(seq.observation(o, recv_ts, raw.take())?)?;
                        stats.events += 1;
                    }
                }
                Outcome::Ignored { .. } => stats.ignored += 1,
                Outcome::Quarantined { reason } => {
                    tracing::debug!(%market, %reason, "payload quarantined");
                    dead.push(&DeadLetterEntry::new(recv_ts, market.clone(), feed.as_str(), reason, &raw))?;
                    stats.quarantined += 1;
                }
            },
            Inbound::Gap { from, until } => {
                tracing::warn!(%market, from, until, "feed outage recorded");
                sink.accept(seq.gap(from, until)?)?;
                stats.gaps += 1;
            }
            Inbound::Fatal(e) => {
                sink.flush()?;
                return Err(e);
            }
        }
    }
    sink.flush()?;
    stats.skew_warnings = seq.skew_warnings();
    Ok(stats)
}

fn rejection(e: &tungstenite::Error) -> Option<u16> {
    match e {
        tungstenite::Error::Http(resp) => {
            let s = resp.status();
            (s.is_client_error() && s.as_u16() != 429).then_some(s.as_u16())
        }
        _ => None,
    }
}

async fn ws_loop(
    cfg: Arc<ConnectorConfig>,
    adapter: Arc<VenueAdapter>,
    link: Link,
    mut stop: watch::Receiver<bool>,
    reconnects: Arc<AtomicU64>,
) {
    let url = cfg.ws_url();
    let market = adapter.market().to_string();
    let mut attempt = 0usize;
    let mut down_since: Option<EpochMs> = None;
    let mut ever_connected = false;
    loop {
        if *stop.borrow() {
            return;
        }
        let conn = tokio::select! {
            r = tokio_tungstenite::connect_async(url.as_str()) => r,
            _ = stop.changed() => return,
        };
        match conn {
            Ok((mut ws, _)) => {
                if ever_connected {
                    reconnects.fetch_add(1, Ordering::SeqCst);
                }
                ever_connected = true;
                attempt = 0;
                if let Some(from) = down_since.take() {
                    if !link.push(Inbound::Gap { from, until: now_ms() }) {
                        return;
                    }
                }
                tracing::info!(%market, %url, "websocket connected");
                let mut ok = true;
                for s in adapter.subscriptions() {
                    ok &= ws.send(Message::text(s.clone())).await.is_ok();
                }
                let ping_every = adapter.client_ping().map(|p| Duration::from_millis(p.every_ms.max(1)));
                let mut ping = tokio::time::interval(ping_every.unwrap_or(Duration::from_secs(3600)));
                ping.tick().await;
                while ok {
                    tokio::select! {
                        _ = stop.changed() => {
                            let _ = ws.close(None).await;
                            return;
                        }
                        _ = ping.tick(), if ping_every.is_some() => {
                            let payload = adapter.client_ping().map(|p| p.payload.clone()).unwrap_or_default();
                            ok = ws.send(Message::text(payload)).await.is_ok();
                        }
                        msg = ws.next() => {
                            let recv_ts = now_ms();
                            let (raw, text) = match msg {
                                Some(Ok(Message::Text(t))) => (t.as_bytes().to_vec(), Ok(t.as_str().to_owned())),
                                Some(Ok(Message::Binary(b))) => (b.to_vec(), adapter.decode_binary(&b)),
                                Some(Ok(Message::Close(_))) | None => { ok = false; continue; }
                                Some(Ok(_)) => continue,
                                Some(Err(e)) => {
                                    tracing::warn!(%market, error = %e, "websocket read failed");
                                    ok = false;
                                    continue;
                                }
                            };
                            let (outcome, reply) = match text {
                                Ok(t) => {
                                    let n = adapter.normalize(Feed::Ws, &t);
                                    (n.outcome, n.reply)
                                }
                                Err(reason) => (Outcome::Quarantined { reason }, None),
                            };
                            if let Some(r) = reply {
                                ok = ws.send(Message::text(r)).await.is_ok();
                            }
                            if !link.push(Inbound::Message { recv_ts, feed: Feed::Ws, raw, outcome }) {
                                return;
                            }
                        }
                    }
                }
                tracing::warn!(%market, "websocket disconnected");
                down_since = Some(now_ms());
            }
            Err(e) => {
                if let Some(status) = rejection(&e) {
                    link.push(Inbound::Fatal(IngestError::Rejected { url: url.clone(), status }));
                    return;
                }
                if let tungstenite::Error::Url(_) = e {
                    link.push(Inbound::Fatal(IngestError::Config(format!("{market}: bad websocket url {url}: {e}"))));
                    return;
                }
                tracing::warn!(%market, error = %e, attempt, "websocket connect failed");
                down_since.get_or_insert_with(now_ms);
            }
        }
        let delay = cfg.backoff(attempt);
        attempt += 1;
        tokio::select! {
            _ = tokio::time::sleep(delay) => {}
            _ = stop.changed() => return,
        }
    }
}

async fn poll_loop(cfg: Arc<ConnectorConfig>, adapter: Arc<VenueAdapter>, link: Link, mut stop: watch::Receiver<bool>) {
    let Some(url) = cfg.rest_url() else { return };
    let market = adapter.market().to_string();
    let client = match reqwest::Client::builder().timeout(Duration::from_millis(cfg.oi_poll_ms.max(1_000) * 4)).build() {
        Ok(c) => c,
        Err(e) => {
            link.push(Inbound::Fatal(IngestError::Config(format!("{market}: http client: {e}"))));
            return;
        }
    };
    let mut tick = tokio::time::interval(Duration::from_millis(cfg.oi_poll_ms));
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            _ = tick.tick() => {}
            _ = stop.changed() => return,
        }
        let resp = match client.get(&url).send().await {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(%market, error = %e, "open-interest poll failed");
                continue;
            }
        };
        let status = resp.status();
        if status.is_client_error() && status.as_u16() != 429 {
            link.push(Inbound::Fatal(IngestError::Rejected { url: url.clone(), status: status.as_u16() }));
            return;
        }
        if !status.is_success() {
            tracing::warn!(%market, status = status.as_u16(), "open-interest poll not successful");
            continue;
        }
        let body = match resp.bytes().await {
            Ok(b) => b.to_vec(),
            Err(e) => {
                tracing::warn!(%market, error = %e, "open-interest body unreadable");
                continue;
            }
        };
        let recv_ts = now_ms();
        let outcome = match std::str::from_utf8(&body) {
            Ok(t) => adapter.normalize(Feed::Rest, t).outcome,
            Err(_) => Outcome::Quarantined { reason: "response is not UTF-8".into() },
        };
        if !link.push(Inbound::Message { recv_ts, feed: Feed::Rest, raw: body, outcome }) {
            return;
        }
    }
}
