//! Client side of the newline-delimited JSON protocol spoken by external
//! model processes.
//!
//! ```text
//! -> {"op":"hello","version":1}
//! <- {"ok":true,"capabilities":["predict"]}
//! -> {"op":"predict","record":{"kind":"tabular","values":[...]}}
//! <- {"class":INT}  |  {"error":STRING}
//! -> {"op":"bye"}
//! ```
//!
//! One compact JSON object per line, UTF-8, one request in flight.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value as Json};

use super::{ModelError, Record};

pub const PROTOCOL_VERSION: u64 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

pub struct ChildProcessChannel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    timeout: Duration,
}

impl ChildProcessChannel {
    /// Spawns `command` with piped stdio and performs the handshake. The
    /// child's stderr is inherited.
    pub fn spawn(mut command: Command, timeout: Duration) -> Result<Self, ModelError> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ModelError::Backend(format!("failed to start model process: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut chan = Self { child, stdin, lines: rx, timeout };
        chan.handshake()?;
        Ok(chan)
    }

    /// Splits `cmdline` with shell quoting rules and spawns it.
    pub fn spawn_cmdline(cmdline: &str, timeout: Duration) -> Result<Self, ModelError> {
        let argv = shlex::split(cmdline)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| ModelError::Backend(format!("cannot parse command line `{cmdline}`")))?;
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..]);
        Self::spawn(cmd, timeout)
    }

    fn send(&mut self, msg: &Json) -> Result<(), ModelError> {
        let mut line = serde_json::to_string(msg).expect("JSON serialisation");
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| ModelError::Protocol(format!("write to model process failed: {e}")))
    }

    /// Waits for one response line. A child that closes its output without
    /// answering counts as not answering in time.
    fn receive(&mut self) -> Result<Json, ModelError> {
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(l) => l,
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => {
                return Err(ModelError::Timeout(self.timeout))
            }
        };
        serde_json::from_str(&line).map_err(|e| ModelError::Protocol(format!("malformed response `{line}`: {e}")))
    }

    fn handshake(&mut self) -> Result<(), ModelError> {
        self.send(&json!({"op": "hello", "version": PROTOCOL_VERSION}))?;
        let reply = self.receive()?;
        let ok = reply.get("ok").and_then(Json::as_bool) == Some(true);
        let predicts =
            reply.get("capabilities").and_then(Json::as_array).is_some_and(|caps| caps.iter().any(|c| c == "predict"));
        if !ok || !predicts {
            return Err(ModelError::Protocol(format!("unexpected handshake reply {reply}")));
        }
        Ok(())
    }

    pub fn predict(&mut self, record: &Record) -> Result<i64, ModelError> {
        self.send(&json!({"op": "predict", "record": record.to_wire_json()}))?;
        let reply = self.receive()?;
        if let Some(err) = reply.get("error") {
            let msg = err.as_str().map(str::to_string).unwrap_or_else(|| err.to_string());
            return Err(ModelError::Backend(msg));
        }
        reply
            .get("class")
            .and_then(Json::as_i64)
            .ok_or_else(|| ModelError::Protocol(format!("response lacks an integer `class`: {reply}")))
    }

    pub fn child_id(&self) -> u32 {
        self.child.id()
    }
}

impl Drop for ChildProcessChannel {
    fn drop(&mut self) {
        let _ = self.send(&json!({"op": "bye"}));
        for _ in 0..20 {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A model hosted in another process. Calls are serialised.
pub struct ExternalModel {
    channel: Mutex<ChildProcessChannel>,
}

impl ExternalModel {
    pub fn new(channel: ChildProcessChannel) -> Self {
        Self { channel: Mutex::new(channel) }
    }

    pub fn predict(&self, record: &Record) -> Result<i64, ModelError> {
        let mut chan = self.channel.lock().unwrap_or_else(|e| e.into_inner());
        chan.predict(record)
    }
}
