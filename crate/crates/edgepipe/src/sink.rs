use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::event::{PipelineEvent, WireEvent};

/// Destination for wire lines. Each call writes exactly one line.
pub trait Sink: Send {
    fn describe(&self) -> String;
    fn write_line(&mut self, line: &str) -> io::Result<()>;
}

/// Appends lines to a local file.
pub struct FileSink {
    path: PathBuf,
    file: Option<File>,
}

impl FileSink {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            file: None,
        }
    }
}

impl Sink for FileSink {
    fn describe(&self) -> String {
        format!("file:{}", self.path.display())
    }

    fn write_line(&mut self, line: &str) -> io::Result<()> {
        if self.file.is_none() {
            self.file = Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&self.path)?,
            );
        }
        let f = self.file.as_mut().expect("opened above");
        let res = f
            .write_all(format!("{line}\n").as_bytes())
            .and_then(|_| f.flush());
        if res.is_err() {
            self.file = None;
        }
        res
    }
}

/// JSON lines over a TCP connection, reconnecting after any failure.
pub struct TcpSink {
    addr: String,
    timeout: Duration,
    stream: Option<BufWriter<TcpStream>>,
}

impl TcpSink {
    pub fn new(addr: impl Into<String>) -> Self {
        Self {
            addr: addr.into(),
            timeout: Duration::from_secs(2),
            stream: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn connect(&self) -> io::Result<TcpStream> {
        let mut last = io::Error::new(
            io::ErrorKind::NotFound,
            format!("{} did not resolve", self.addr),
        );
        for a in self.addr.to_socket_addrs()? {
            match TcpStream::connect_timeout(&a, self.timeout) {
                Ok(s) => {
                    s.set_write_timeout(Some(self.timeout))?;
                    s.set_nodelay(true)?;
                    return Ok(s);
                }
                Err(e) => last = e,
            }
        }
        Err(last)
    }
}

impl Sink for TcpSink {
    fn describe(&self) -> String {
        format!("tcp:{}", self.addr)
    }

    fn write_line(&mut self, line: &str) -> io::Result<()> {
        if self.stream.is_none() {
            self.stream = Some(BufWriter::new(self.connect()?));
        }
        let s = self.stream.as_mut().expect("connected above");
        let res = s
            .write_all(line.as_bytes())
            .and_then(|_| s.write_all(b"\n"))
            .and_then(|_| s.flush());
        if res.is_err() {
            self.stream = None;
        }
        res
    }
}

/// One undeliverable event as stored in the dead-letter file.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct DeadLetterRecord {
    pub sink: String,
    pub attempts: u32,
    pub error: String,
    pub event: WireEvent,
}

/// Append-only local store for events whose delivery was abandoned.
pub struct DeadLetter {
    path: PathBuf,
}

impl DeadLetter {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &DeadLetterRecord) -> io::Result<()> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let line = serde_json::to_string(record).map_err(io::Error::other)?;
        f.write_all(format!("{line}\n").as_bytes())?;
        f.sync_data()
    }
}

/// Initial attempt plus `retries` more, waiting `base`, `2·base`, `4·base`, …
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base: Duration::from_millis(100),
        }
    }
}

impl RetryPolicy {
    pub fn delays(&self) -> impl Iterator<Item = Duration> + '_ {
        (0..self.retries).map(|i| self.base * 2u32.pow(i))
    }

    pub fn total_wait(&self) -> Duration {
        self.delays().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Acked {
        attempts: u32,
    },
    DeadLettered {
        attempts: u32,
    },
    /// Delivery failed and the dead-letter write failed too.
    Lost {
        attempts: u32,
    },
}

/// Result of handing one event to one sink. `seq` is assigned by that sink
/// and never reused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ack {
    pub sink: usize,
    pub seq: u64,
    pub outcome: Outcome,
}

struct Slot {
    sink: Box<dyn Sink>,
    next_seq: u64,
}

/// Fans events out to every sink with retry and dead-lettering.
pub struct Dispatcher {
    slots: Vec<Slot>,
    retry: RetryPolicy,
    dead_letter: DeadLetter,
}

impl Dispatcher {
    pub fn new(sinks: Vec<Box<dyn Sink>>, retry: RetryPolicy, dead_letter: DeadLetter) -> Self {
        Self {
            slots: sinks
                .into_iter()
                .map(|sink| Slot { sink, next_seq: 0 })
                .collect(),
            retry,
            dead_letter,
        }
    }

    pub fn sink_names(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.sink.describe()).collect()
    }

    pub fn dead_letter_path(&self) -> &Path {
        self.dead_letter.path()
    }

    pub fn dispatch(&mut self, event: &PipelineEvent) -> Vec<Ack> {
        let mut acks = Vec::with_capacity(self.slots.len());
        for (i, slot) in self.slots.iter_mut().enumerate() {
            let seq = slot.next_seq;
            slot.next_seq += 1;
            let wire = WireEvent::new(event, seq);
            let line = wire.to_line();
            let mut attempts = 1;
            let mut result = slot.sink.write_line(&line);
            for delay in self.retry.delays() {
                if result.is_ok() {
                    break;
                }
                std::thread::sleep(delay);
                attempts += 1;
                result = slot.sink.write_line(&line);
            }
            let outcome = match result {
                Ok(()) => Outcome::Acked { attempts },
                Err(e) => {
                    let name = slot.sink.describe();
                    log::warn!("{name}: giving up on seq {seq} after {attempts} attempts: {e}");
                    let record = DeadLetterRecord {
                        sink: name,
                        attempts,
                        error: e.to_string(),
                        event: wire,
                    };
                    match self.dead_letter.append(&record) {
                        Ok(()) => Outcome::DeadLettered { attempts },
                        Err(dl) => {
                            log::error!("dead letter {}: {dl}", self.dead_letter.path().display());
                            Outcome::Lost { attempts }
                        }
                    }
                }
            };
            acks.push(Ack {
                sink: i,
                seq,
                outcome,
            });
        }
        acks
    }
}
