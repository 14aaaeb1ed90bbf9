//! Periodic heartbeat sender. Runs on its own thread beside the sim loop and
//! receives ready-built sentences over a channel; only the newest one is
//! sent each period. Connections are retried with exponential backoff and
//! lines are written whole, never split.

use std::io::Write;
use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::mpsc::{Receiver, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::sentence::{encode, HeartbeatSentence};

const BACKOFF_INITIAL: Duration = Duration::from_secs(1);
const BACKOFF_MAX: Duration = Duration::from_secs(30);

/// Counters the sim surfaces as connection metrics.
#[derive(Debug, Default)]
pub struct ClientMetrics {
    pub sent: AtomicU32,
    pub connect_failures: AtomicU32,
    pub reconnects: AtomicU32,
}

pub struct HeartbeatClient {
    snapshot_tx: Sender<HeartbeatSentence>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
    pub metrics: Arc<ClientMetrics>,
}

impl HeartbeatClient {
    /// Spawn the send loop targeting `host:port` at `rate_hz`.
    pub fn start(host: String, port: u16, rate_hz: f64) -> Self {
        assert!(rate_hz > 0.0);
        let (snapshot_tx, snapshot_rx) = std::sync::mpsc::channel();
        let shutdown = Arc::new(AtomicBool::new(false));
        let metrics = Arc::new(ClientMetrics::default());
        let handle = {
            let shutdown = shutdown.clone();
            let metrics = metrics.clone();
            std::thread::spawn(move || run_loop(host, port, rate_hz, snapshot_rx, shutdown, metrics))
        };
        Self {
            snapshot_tx,
            shutdown,
            handle: Some(handle),
            metrics,
        }
    }

    /// Queue the latest vehicle state; older unsent snapshots are superseded.
    pub fn push_snapshot(&self, sentence: HeartbeatSentence) {
        let _ = self.snapshot_tx.send(sentence);
    }

    pub fn stop(mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for HeartbeatClient {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn drain_latest(rx: &Receiver<HeartbeatSentence>, current: &mut Option<HeartbeatSentence>) {
    loop {
        match rx.try_recv() {
            Ok(s) => *current = Some(s),
            Err(TryRecvError::Empty) | Err(TryRecvError::Disconnected) => break,
        }
    }
}

fn run_loop(
    host: String,
    port: u16,
    rate_hz: f64,
    rx: Receiver<HeartbeatSentence>,
    shutdown: Arc<AtomicBool>,
    metrics: Arc<ClientMetrics>,
) {
    let period = Duration::from_secs_f64(1.0 / rate_hz);
    let mut stream: Option<TcpStream> = None;
    let mut backoff = BACKOFF_INITIAL;
    let mut latest: Option<HeartbeatSentence> = None;
    let mut next_send = Instant::now() + period;
    let mut was_connected = false;
    while !shutdown.load(Ordering::SeqCst) {
        // connect (or reconnect) outside the send cadence
        if stream.is_none() {
            match TcpStream::connect((host.as_str(), port)) {
                Ok(s) => {
                    let _ = s.set_nodelay(true);
                    stream = Some(s);
                    backoff = BACKOFF_INITIAL;
                    if was_connected {
                        metrics.reconnects.fetch_add(1, Ordering::SeqCst);
                    }
                    was_connected = true;
                }
                Err(_) => {
                    metrics.connect_failures.fetch_add(1, Ordering::SeqCst);
                    interruptible_sleep(backoff, &shutdown);
                    backoff = (backoff * 2).min(BACKOFF_MAX);
                    continue;
                }
            }
        }
        let now = Instant::now();
        if now < next_send {
            interruptible_sleep((next_send - now).min(Duration::from_millis(50)), &shutdown);
            continue;
        }
        next_send += period;
        drain_latest(&rx, &mut latest);
        let Some(sentence) = latest.as_ref() else {
            continue;
        };
        let line = encode(sentence);
        if let Some(s) = stream.as_mut() {
            // whole-line write; any failure drops the connection for retry
            if s.write_all(line.as_bytes()).and_then(|_| s.flush()).is_err() {
                stream = None;
            } else {
                metrics.sent.fetch_add(1, Ordering::SeqCst);
            }
        }
    }
}

fn interruptible_sleep(total: Duration, shutdown: &AtomicBool) {
    let step = Duration::from_millis(20);
    let deadline = Instant::now() + total;
    while Instant::now() < deadline && !shutdown.load(Ordering::SeqCst) {
        std::thread::sleep(step.min(deadline - Instant::now()));
    }
}
