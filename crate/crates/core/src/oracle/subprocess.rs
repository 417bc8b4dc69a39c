//! Client for a model served by a child process over JSON lines.
//!
//! Requests, one per line on the child's stdin:
//! `{"id": 3, "features": ["male", 45, 40.5]}` or `{"id": 3, "tokens": ["i", "am"]}`.
//! Responses, one per line on its stdout, in any order:
//! `{"id": 3, "label": "1"}`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::data::{FeatureSchema, Sample};
use crate::oracle::{OracleError, PredictionOracle};

/// One child process per oracle. Concurrent callers are serialized on an
/// internal lock, so each batch is written and answered as a unit.
pub struct SubprocessOracle {
    channel: Mutex<Channel>,
    schema: Option<FeatureSchema>,
    timeout: Duration,
}

struct Channel {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    responses: Receiver<std::io::Result<String>>,
    next_id: u64,
    failed: Option<String>,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    label: Value,
}

impl SubprocessOracle {
    /// Starts `argv[0]` with the remaining arguments. `schema` turns feature
    /// vectors into named values on the wire; without it raw numbers are sent.
    pub fn spawn(
        argv: &[String],
        timeout: Duration,
        schema: Option<FeatureSchema>,
    ) -> Result<Self, OracleError> {
        let command = argv.join(" ");
        let (program, args) = argv.split_first().ok_or_else(|| OracleError::Spawn {
            command: command.clone(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| OracleError::Spawn {
                command: command.clone(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("oracle-reader".into())
            .spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    let stop = line.is_err();
                    if tx.send(line).is_err() || stop {
                        break;
                    }
                }
            })
            .map_err(|source| OracleError::Spawn { command, source })?;
        Ok(SubprocessOracle {
            channel: Mutex::new(Channel {
                child,
                stdin: Some(BufWriter::new(stdin)),
                responses: rx,
                next_id: 0,
                failed: None,
            }),
            schema,
            timeout,
        })
    }

    fn check_labels(&self, labels: Vec<String>) -> Result<Vec<String>, OracleError> {
        if let Some(schema) = &self.schema {
            if let Some(bad) = labels.iter().find(|l| !schema.labels.contains(l)) {
                return Err(OracleError::Malformed {
                    line: bad.clone(),
                    reason: format!("not one of the schema labels {:?}", schema.labels),
                });
            }
        }
        Ok(labels)
    }

    fn request(&self, id: u64, sample: &Sample) -> Value {
        match sample {
            Sample::Tokens(tokens) => json!({ "id": id, "tokens": tokens }),
            Sample::Features(row) => {
                let features: Vec<Value> = match &self.schema {
                    Some(schema) => schema
                        .features
                        .iter()
                        .zip(row)
                        .map(|(spec, &v)| spec.json_value(v))
                        .collect(),
                    None => row.iter().map(|&v| Value::from(v)).collect(),
                };
                json!({ "id": id, "features": features })
            }
        }
    }
}

impl Channel {
    fn exit_status(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => status.to_string(),
            Ok(None) => "closed its output".to_string(),
            Err(e) => e.to_string(),
        }
    }

    fn batch(&mut self, requests: Vec<(u64, Value)>, timeout: Duration) -> Result<Vec<String>, OracleError> {
        let first_id = self.next_id;
        self.next_id += requests.len() as u64;
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| OracleError::Exited("input already closed".into()))?;
        let written = requests
            .iter()
            .try_for_each(|(_, req)| writeln!(stdin, "{req}"))
            .and_then(|_| stdin.flush());
        if written.is_err() {
            return Err(OracleError::Exited(self.exit_status()));
        }

        let n = requests.len();
        let mut labels: Vec<Option<String>> = vec![None; n];
        let mut pending = n;
        let deadline = Instant::now() + timeout;
        while pending > 0 {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let line = match self.responses.recv_timeout(remaining) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(OracleError::Io(e)),
                Err(RecvTimeoutError::Timeout) => return Err(OracleError::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    // Give the child a moment to be reaped so the status is informative.
                    thread::sleep(Duration::from_millis(20));
                    return Err(OracleError::Exited(self.exit_status()));
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let resp: Response = serde_json::from_str(&line).map_err(|e| OracleError::Malformed {
                line: line.clone(),
                reason: e.to_string(),
            })?;
            let label = match resp.label {
                Value::String(s) => s,
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                other => {
                    return Err(OracleError::Malformed {
                        line,
                        reason: format!("label must be a string, got {other}"),
                    })
                }
            };
            let slot = resp
                .id
                .checked_sub(first_id)
                .filter(|&i| i < n as u64)
                .ok_or(OracleError::UnexpectedId(resp.id))? as usize;
            if labels[slot].replace(label).is_some() {
                return Err(OracleError::Malformed {
                    line,
                    reason: format!("duplicate answer for id {}", resp.id),
                });
            }
            pending -= 1;
        }
        Ok(labels.into_iter().map(|l| l.expect("all answered")).collect())
    }
}

impl PredictionOracle for SubprocessOracle {
    fn predict_batch(&self, samples: &[Sample]) -> Result<Vec<String>, OracleError> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let mut channel = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(reason) = &channel.failed {
            return Err(OracleError::Exited(format!(
                "oracle unusable after earlier failure: {reason}"
            )));
        }
        let base = channel.next_id;
        let requests = samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let id = base + i as u64;
                (id, self.request(id, s))
            })
            .collect();
        let result = channel
            .batch(requests, self.timeout)
            .and_then(|labels| self.check_labels(labels));
        if let Err(e) = &result {
            channel.failed = Some(e.to_string());
        }
        result
    }
}

impl Drop for SubprocessOracle {
    fn drop(&mut self) {
        let channel = self.channel.get_mut().unwrap_or_else(|p| p.into_inner());
        // Closing stdin lets a well-behaved adapter exit on end-of-input.
        channel.stdin.take();
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = channel.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = channel.child.kill();
        let _ = channel.child.wait();
    }
}
