//! Newline-delimited JSON bridge to an out-of-process policy.
//!
//! For every decision the core writes one `observe` message and reads back
//! one `act` message holding an index into the observed eligible list. When
//! the episode ends the core writes `episode_end`.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::egs::{EgsState, Policy, PolicyDecision};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const TIMEOUT_ENV: &str = "EGS_POLICY_TIMEOUT";

/// Messages written by the core.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CoreMessage {
    Observe(Observation),
    EpisodeEnd { reward_total: i64 },
}

/// Messages read from the policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicyMessage {
    Act { index: usize },
}

/// Per-node features are `[wcet, est, eft, lst, lft, lw, iw, ow]`. `tc` holds
/// the closure rows as hex (see [`crate::BoolMatrix::to_hex_rows`]) joined
/// by commas.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub step: usize,
    pub n: usize,
    pub features: Vec<[i64; 8]>,
    pub tc: String,
    pub eligible: Vec<[usize; 2]>,
    pub width: usize,
    pub lower_bound: usize,
}

impl Observation {
    pub fn from_state(state: &EgsState) -> Self {
        let a = &state.analysis;
        let t = &a.timing;
        let features = (0..state.task.n())
            .map(|i| {
                [
                    state.task.wcet()[i] as i64,
                    t.est[i],
                    t.eft[i],
                    t.lst[i],
                    t.lft[i],
                    a.lw()[i] as i64,
                    a.iw()[i] as i64,
                    a.ow()[i] as i64,
                ]
            })
            .collect();
        Observation {
            step: state.step,
            n: state.task.n(),
            features,
            tc: a.tc.to_hex_rows().join(","),
            eligible: state.mask.eligible().into_iter().map(|(i, j)| [i, j]).collect(),
            width: a.width,
            lower_bound: state.lower_bound,
        }
    }
}

/// Reads `EGS_POLICY_TIMEOUT` (seconds, fractional allowed), falling back to
/// [`DEFAULT_TIMEOUT`].
pub fn timeout_from_env() -> Duration {
    parse_timeout(std::env::var(TIMEOUT_ENV).ok().as_deref())
}

fn parse_timeout(value: Option<&str>) -> Duration {
    value
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|s| s.is_finite() && *s > 0.0)
        .map(Duration::from_secs_f64)
        .unwrap_or(DEFAULT_TIMEOUT)
}

/// A policy answering over a byte stream: a child process's stdio or a TCP
/// connection.
pub struct ExternalPolicy {
    writer: Option<Box<dyn Write + Send>>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    child: Option<Child>,
}

impl ExternalPolicy {
    pub fn from_streams<R, W>(reader: R, writer: W, timeout: Duration) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        ExternalPolicy {
            writer: Some(Box::new(writer)),
            lines: rx,
            timeout,
            child: None,
        }
    }

    /// Runs `command` through `sh -c` and talks to it over stdin/stdout.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut p = Self::from_streams(stdout, stdin, timeout);
        p.child = Some(child);
        Ok(p)
    }

    /// Connects to a policy listening on `addr`.
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(Self::from_streams(reader, stream, timeout))
    }

    pub fn send(&mut self, msg: &CoreMessage) -> Result<()> {
        let w = self.writer.as_mut().expect("writer open until drop");
        let mut line = serde_json::to_string(msg)?;
        line.push('\n');
        w.write_all(line.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::PolicyProtocol(format!("write failed: {e}")))
    }

    pub fn receive(&mut self) -> Result<PolicyMessage> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => serde_json::from_str(&line)
                .map_err(|e| Error::PolicyProtocol(format!("malformed message {line:?}: {e}"))),
            Ok(Err(e)) => Err(Error::PolicyProtocol(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::PolicyProtocol("policy closed the stream".into()))
            }
        }
    }
}

impl Policy for ExternalPolicy {
    fn select(&mut self, state: &EgsState, _rng: &mut ChaCha8Rng) -> Result<PolicyDecision> {
        let obs = Observation::from_state(state);
        let eligible = obs.eligible.clone();
        self.send(&CoreMessage::Observe(obs))?;
        let PolicyMessage::Act { index } = self.receive()?;
        let [i, j] = *eligible.get(index).ok_or_else(|| {
            Error::PolicyProtocol(format!(
                "action index {index} out of range for {} eligible edges",
                eligible.len()
            ))
        })?;
        Ok(PolicyDecision::certain((i, j)))
    }

    fn finish(&mut self, reward_total: i64) -> Result<()> {
        self.send(&CoreMessage::EpisodeEnd { reward_total })
    }
}

impl Drop for ExternalPolicy {
    fn drop(&mut self) {
        self.writer.take();
        if let Some(mut child) = self.child.take() {
            if let Ok(None) = child.try_wait() {
                let _ = child.kill();
            }
            let _ = child.wait();
        }
    }
}
