//! Mock Technical Director server: accepts any number of clients, reassembles
//! lines across TCP segment boundaries, decodes each one and keeps a record
//! the tests (and the CLI) can read back.

use std::io::Read;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::sentence::{decode, HeartbeatError, HeartbeatSentence};

/// One received line, valid or not.
#[derive(Debug, Clone)]
pub struct ServerRecord {
    pub connection: usize,
    /// Seconds since the server started.
    pub received_at: f64,
    pub line: String,
    pub parsed: Result<HeartbeatSentence, HeartbeatError>,
}

pub struct MockTdServer {
    addr: SocketAddr,
    records: Arc<Mutex<Vec<ServerRecord>>>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockTdServer {
    /// Bind and start serving. Port 0 picks an ephemeral port; `echo` prints
    /// each received line to stdout.
    pub fn start(port: u16, echo: bool) -> std::io::Result<Self> {
        let listener = TcpListener::bind(("127.0.0.1", port))?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let records = Arc::new(Mutex::new(Vec::new()));
        let shutdown = Arc::new(AtomicBool::new(false));
        let handle = {
            let records = records.clone();
            let shutdown = shutdown.clone();
            Some(std::thread::spawn(move || {
                accept_loop(listener, records, shutdown, echo)
            }))
        };
        Ok(Self {
            addr,
            records,
            shutdown,
            handle,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    pub fn records(&self) -> Vec<ServerRecord> {
        self.records.lock().unwrap().clone()
    }

    pub fn valid_count(&self) -> usize {
        self.records
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.parsed.is_ok())
            .count()
    }

    pub fn stop(mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for MockTdServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn accept_loop(
    listener: TcpListener,
    records: Arc<Mutex<Vec<ServerRecord>>>,
    shutdown: Arc<AtomicBool>,
    echo: bool,
) {
    let started = Instant::now();
    let conn_counter = Arc::new(AtomicUsize::new(0));
    let mut workers = Vec::new();
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let id = conn_counter.fetch_add(1, Ordering::SeqCst);
                let records = records.clone();
                let shutdown = shutdown.clone();
                workers.push(std::thread::spawn(move || {
                    serve_connection(stream, id, records, shutdown, started, echo)
                }));
            }
            Err(ref e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(_) => break,
        }
    }
    for w in workers {
        let _ = w.join();
    }
}

fn serve_connection(
    mut stream: TcpStream,
    connection: usize,
    records: Arc<Mutex<Vec<ServerRecord>>>,
    shutdown: Arc<AtomicBool>,
    started: Instant,
    echo: bool,
) {
    let _ = stream.set_read_timeout(Some(Duration::from_millis(50)));
    let mut buffer: Vec<u8> = Vec::new();
    let mut chunk = [0u8; 1024];
    loop {
        if shutdown.load(Ordering::SeqCst) {
            return;
        }
        match stream.read(&mut chunk) {
            Ok(0) => return, // peer closed
            Ok(n) => {
                buffer.extend_from_slice(&chunk[..n]);
                // a line is complete only at '\n'; partial segments wait
                while let Some(pos) = buffer.iter().position(|&b| b == b'\n') {
                    let raw: Vec<u8> = buffer.drain(..=pos).collect();
                    let line = String::from_utf8_lossy(&raw).trim_end().to_string();
                    if line.is_empty() {
                        continue;
                    }
                    let parsed = decode(&line);
                    if echo {
                        match &parsed {
                            Ok(s) => println!(
                                "[td-server] conn {connection}: {} {}{} {}{} team {} mode {}",
                                line,
                                s.lat,
                                s.lat_hemisphere,
                                s.lon,
                                s.lon_hemisphere,
                                s.team_id,
                                s.mode.code()
                            ),
                            Err(e) => println!("[td-server] conn {connection}: REJECT {line} ({e})"),
                        }
                    }
                    records.lock().unwrap().push(ServerRecord {
                        connection,
                        received_at: started.elapsed().as_secs_f64(),
                        line,
                        parsed,
                    });
                }
            }
            Err(ref e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue
            }
            Err(_) => return,
        }
    }
}
