//! Logits from an external model process over JSON lines on its standard streams.
//!
//! ```text
//! > {"type":"init","n_bins":2000,"vocab_size":2010,"image":"figs/12.png"}
//! < {"type":"ready"}
//! > {"type":"step","prefix":[]}
//! < {"type":"logits","values":[0.1, ...]}
//! > {"type":"step","prefix":[50]}
//! < {"type":"logits","values":[...]}
//! ```
//!
//! Requests are strictly sequential: a step is sent only after the previous one was
//! answered. Scores are raw; `null` entries are read as NaN.

use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use crate::codec::{TokenId, Vocabulary};
use crate::decoder::{LogitSource, SourceError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgeConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub handshake_timeout: Duration,
    pub step_timeout: Duration,
    /// Keep every line exchanged, see [`Bridge::transcript`].
    pub keep_transcript: bool,
}

impl BridgeConfig {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            handshake_timeout: Duration::from_secs(30),
            step_timeout: Duration::from_secs(10),
            keep_transcript: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("invalid bridge config: {0}")]
    InvalidConfig(String),
    #[error("cannot start model process {command:?}: {source}")]
    Spawn { command: String, source: io::Error },
    #[error("model process did not answer the handshake within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("model process did not answer step {step} within {timeout:?}")]
    StepTimeout { step: usize, timeout: Duration },
    #[error("malformed response from model process: {message} (line: {line:?})")]
    Malformed { line: String, message: String },
    #[error("model process returned {actual} logits, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("model process reported an error: {0}")]
    Remote(String),
    #[error("model process exited{}", .status.map(|s| format!(" ({s})")).unwrap_or_default())]
    Exited { status: Option<ExitStatus> },
    #[error("pipe to model process failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Serialize)]
struct Init<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    n_bins: u32,
    vocab_size: usize,
    image: &'a str,
}

#[derive(Serialize)]
struct Step<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    prefix: &'a [TokenId],
}

/// A running model process. The process is killed when the bridge is dropped.
#[derive(Debug)]
pub struct Bridge {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<io::Result<String>>,
    vocab_size: usize,
    step_timeout: Duration,
    steps: usize,
    transcript: Option<Vec<(Direction, String)>>,
}

/// Start the model process and perform the handshake for one image.
pub fn open_bridge(
    config: &BridgeConfig,
    vocab: &Vocabulary,
    image_path: &Path,
) -> Result<Bridge, BridgeError> {
    let Some((program, args)) = config.command.split_first() else {
        return Err(BridgeError::InvalidConfig("empty command".into()));
    };
    if config.handshake_timeout.is_zero() || config.step_timeout.is_zero() {
        return Err(BridgeError::InvalidConfig(
            "timeouts must be positive".into(),
        ));
    }
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|source| BridgeError::Spawn {
            command: config.command.join(" "),
            source,
        })?;
    let stdin = child.stdin.take().expect("stdin is piped");
    let stdout = child.stdout.take().expect("stdout is piped");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                return;
            }
        }
    });
    let mut bridge = Bridge {
        child,
        stdin,
        lines: rx,
        vocab_size: vocab.size(),
        step_timeout: config.step_timeout,
        steps: 0,
        transcript: config.keep_transcript.then(Vec::new),
    };
    let init = Init {
        kind: "init",
        n_bins: vocab.n_bins(),
        vocab_size: vocab.size(),
        image: &image_path.to_string_lossy(),
    };
    bridge.send(&serde_json::to_string(&init).expect("init serializes"))?;
    let reply = bridge.receive(config.handshake_timeout, || {
        BridgeError::HandshakeTimeout(config.handshake_timeout)
    })?;
    match message_type(&reply)? {
        "ready" => Ok(bridge),
        other => Err(unexpected(&reply, other, "ready")),
    }
}

fn message_type(v: &(String, Value)) -> Result<&str, BridgeError> {
    v.1.get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| BridgeError::Malformed {
            line: v.0.clone(),
            message: "no \"type\" field".into(),
        })
}

fn unexpected(v: &(String, Value), got: &str, want: &str) -> BridgeError {
    if got == "error" {
        let msg = v.1.get("message").and_then(Value::as_str).unwrap_or("");
        return BridgeError::Remote(msg.to_owned());
    }
    BridgeError::Malformed {
        line: v.0.clone(),
        message: format!("expected type {want:?}, got {got:?}"),
    }
}

impl Bridge {
    /// Lines exchanged so far, when the config asked for a transcript.
    pub fn transcript(&self) -> &[(Direction, String)] {
        self.transcript.as_deref().unwrap_or(&[])
    }

    fn exited(&mut self) -> BridgeError {
        // give a process that just closed its stdout a moment to be reaped
        for _ in 0..20 {
            if let Ok(Some(status)) = self.child.try_wait() {
                return BridgeError::Exited {
                    status: Some(status),
                };
            }
            thread::sleep(Duration::from_millis(5));
        }
        BridgeError::Exited { status: None }
    }

    fn send(&mut self, line: &str) -> Result<(), BridgeError> {
        if let Some(t) = &mut self.transcript {
            t.push((Direction::Sent, line.to_owned()));
        }
        let res = writeln!(self.stdin, "{line}").and_then(|_| self.stdin.flush());
        match res {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Err(self.exited()),
            Err(e) => Err(e.into()),
        }
    }

    fn receive(
        &mut self,
        timeout: Duration,
        on_timeout: impl FnOnce() -> BridgeError,
    ) -> Result<(String, Value), BridgeError> {
        let line = match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(e.into()),
            Err(RecvTimeoutError::Timeout) => return Err(on_timeout()),
            Err(RecvTimeoutError::Disconnected) => return Err(self.exited()),
        };
        if let Some(t) = &mut self.transcript {
            t.push((Direction::Received, line.clone()));
        }
        let value = serde_json::from_str(&line).map_err(|e| BridgeError::Malformed {
            line: line.clone(),
            message: e.to_string(),
        })?;
        Ok((line, value))
    }

    /// One decode step: send the prefix and wait for its logits.
    pub fn step(&mut self, prefix: &[TokenId]) -> Result<Vec<f32>, BridgeError> {
        let step = self.steps;
        self.steps += 1;
        let req = Step {
            kind: "step",
            prefix,
        };
        self.send(&serde_json::to_string(&req).expect("step serializes"))?;
        let timeout = self.step_timeout;
        let reply = self.receive(timeout, || BridgeError::StepTimeout { step, timeout })?;
        let kind = message_type(&reply)?;
        if kind != "logits" {
            return Err(unexpected(&reply, kind, "logits"));
        }
        let malformed = |message: &str| BridgeError::Malformed {
            line: reply.0.clone(),
            message: message.to_owned(),
        };
        let values = reply
            .1
            .get("values")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed("no \"values\" list"))?;
        if values.len() != self.vocab_size {
            return Err(BridgeError::LengthMismatch {
                expected: self.vocab_size,
                actual: values.len(),
            });
        }
        values
            .iter()
            .map(|v| match v {
                Value::Null => Ok(f32::NAN),
                v => v
                    .as_f64()
                    .map(|x| x as f32)
                    .ok_or_else(|| malformed("non-numeric logit")),
            })
            .collect()
    }
}

impl LogitSource for Bridge {
    fn logits(&mut self, prefix: &[TokenId]) -> Result<Vec<f32>, SourceError> {
        Ok(self.step(prefix)?)
    }
}

impl Drop for Bridge {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str) -> BridgeConfig {
        let mut c = BridgeConfig::new(vec!["sh".into(), "-c".into(), script.into()]);
        c.handshake_timeout = Duration::from_millis(500);
        c.step_timeout = Duration::from_millis(500);
        c
    }

    #[test]
    fn defaults() {
        let c = BridgeConfig::new(vec!["x".into()]);
        assert_eq!(c.handshake_timeout, Duration::from_secs(30));
        assert_eq!(c.step_timeout, Duration::from_secs(10));
    }

    #[test]
    fn spawn_failure() {
        let c = BridgeConfig::new(vec!["/nonexistent/model-server".into()]);
        let e = open_bridge(&c, &Vocabulary::default(), Path::new("a.png")).unwrap_err();
        assert!(matches!(e, BridgeError::Spawn { .. }), "{e}");
    }

    #[test]
    fn empty_command_and_zero_timeout() {
        let v = Vocabulary::default();
        let e = open_bridge(&BridgeConfig::new(vec![]), &v, Path::new("a")).unwrap_err();
        assert!(matches!(e, BridgeError::InvalidConfig(_)));
        let mut c = sh("true");
        c.step_timeout = Duration::ZERO;
        assert!(matches!(
            open_bridge(&c, &v, Path::new("a")).unwrap_err(),
            BridgeError::InvalidConfig(_)
        ));
    }

    #[test]
    fn silent_server_times_out() {
        let e =
            open_bridge(&sh("sleep 5"), &Vocabulary::default(), Path::new("a.png")).unwrap_err();
        assert!(matches!(e, BridgeError::HandshakeTimeout(_)), "{e}");
    }

    #[test]
    fn exiting_server() {
        let e = open_bridge(&sh("exit 4"), &Vocabulary::default(), Path::new("a.png")).unwrap_err();
        assert!(matches!(e, BridgeError::Exited { .. }), "{e}");
    }

    #[test]
    fn short_logits_name_both_lengths() {
        let script =
            r#"read l; echo '{"type":"ready"}'; read l; echo '{"type":"logits","values":[1,2,3]}'"#;
        let mut b = open_bridge(&sh(script), &Vocabulary::default(), Path::new("a.png")).unwrap();
        let e = b.step(&[]).unwrap_err();
        assert!(matches!(
            e,
            BridgeError::LengthMismatch {
                expected: 2010,
                actual: 3
            }
        ));
        let msg = e.to_string();
        assert!(msg.contains("2010") && msg.contains('3'), "{msg}");
    }

    #[test]
    fn garbage_reply_is_malformed() {
        let script = r#"read l; echo 'hello'"#;
        let e = open_bridge(&sh(script), &Vocabulary::default(), Path::new("a.png")).unwrap_err();
        assert!(matches!(e, BridgeError::Malformed { .. }), "{e}");
    }

    #[test]
    fn remote_error_is_reported() {
        let script = r#"read l; echo '{"type":"error","message":"no weights"}'"#;
        let e = open_bridge(&sh(script), &Vocabulary::default(), Path::new("a.png")).unwrap_err();
        assert!(
            matches!(e, BridgeError::Remote(ref m) if m == "no weights"),
            "{e}"
        );
    }

    #[test]
    fn init_line_layout() {
        let script = r#"read l; echo '{"type":"ready"}'; sleep 1"#;
        let mut c = sh(script);
        c.keep_transcript = true;
        let v = Vocabulary::new(4).unwrap();
        let b = open_bridge(&c, &v, Path::new("figs/1.png")).unwrap();
        assert_eq!(
            b.transcript()[0],
            (
                Direction::Sent,
                r#"{"type":"init","n_bins":4,"vocab_size":14,"image":"figs/1.png"}"#.to_owned()
            )
        );
        assert_eq!(b.transcript()[1].0, Direction::Received);
    }
}
