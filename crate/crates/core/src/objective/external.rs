//! Client side of the external-objective worker protocol.
//!
//! Newline-delimited JSON, one request and one response per line:
//!
//! ```text
//! -> {"id":3,"op":"evaluate","trajectory":[...],"config_override":{}}
//! <- {"id":3,"ok":true,"dynamic_range":1.0,"manifolds":[{"class_id":0,...}]}
//! <- {"id":3,"ok":false,"error":"..."}
//! ```
//!
//! Each call blocks until the matching response arrives or the timeout
//! expires. Responses carrying an older id (left over from a timed-out
//! request) are skipped.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};

use super::manifold::{ManifoldGrid, ManifoldScoring, ManifoldSet};
use super::Objective;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub struct ExternalClient {
    child: Option<Child>,
    writer: Option<Box<dyn Write + Send>>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    timeout: Duration,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    #[serde(default)]
    id: Option<u64>,
    ok: bool,
    #[serde(default)]
    manifolds: Option<Vec<ManifoldGrid>>,
    #[serde(default)]
    dynamic_range: Option<f64>,
    #[serde(default)]
    error: Option<String>,
}

fn failed(msg: impl Into<String>) -> Error {
    Error::EvaluationFailed(msg.into())
}

impl ExternalClient {
    /// Starts `command[0]` with the remaining arguments and talks to it over
    /// its standard input/output.
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self> {
        let (prog, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("external objective command is empty".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| failed(format!("cannot start {prog:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut client = Self::from_streams(BufReader::new(stdout), stdin, timeout);
        client.child = Some(child);
        Ok(client)
    }

    pub fn from_streams<R, W>(reader: R, writer: W, timeout: Duration) -> Self
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        ExternalClient {
            child: None,
            writer: Some(Box::new(writer)),
            lines: rx,
            next_id: 1,
            timeout,
        }
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    fn send(&mut self, msg: &Value) -> Result<()> {
        let w = self.writer.as_mut().ok_or_else(|| failed("worker input closed"))?;
        let mut line = serde_json::to_string(msg)?;
        line.push('\n');
        w.write_all(line.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| failed(format!("writing request: {e}")))
    }

    fn await_response(&mut self, id: u64, allow_missing_id: bool) -> Result<WireResponse> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(remaining) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(failed(format!("reading response: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(failed(format!("request {id} timed out after {:?}", self.timeout)))
                }
                Err(RecvTimeoutError::Disconnected) => return Err(failed("worker closed its output")),
            };
            if line.trim().is_empty() {
                continue;
            }
            let resp: WireResponse =
                serde_json::from_str(&line).map_err(|e| failed(format!("malformed response {line:?}: {e}")))?;
            match resp.id {
                Some(r) if r == id => return Ok(resp),
                Some(r) if r < id => continue,
                Some(r) => return Err(failed(format!("response id {r} while waiting for {id}"))),
                None if allow_missing_id => return Ok(resp),
                None => return Err(failed(format!("response without id while waiting for {id}"))),
            }
        }
    }

    fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn ping(&mut self) -> Result<()> {
        let id = self.take_id();
        self.send(&json!({"id": id, "op": "ping"}))?;
        let resp = self.await_response(id, true)?;
        if resp.ok {
            Ok(())
        } else {
            Err(failed(resp.error.unwrap_or_else(|| "ping rejected".into())))
        }
    }

    /// Sends one trajectory and returns the validated manifolds.
    pub fn request_manifolds(&mut self, trajectory: &[f64], config_override: &Value) -> Result<ManifoldSet> {
        let id = self.take_id();
        self.send(&json!({
            "id": id,
            "op": "evaluate",
            "trajectory": trajectory,
            "config_override": config_override,
        }))?;
        let resp = self.await_response(id, false)?;
        if !resp.ok {
            return Err(failed(resp.error.unwrap_or_else(|| format!("request {id} failed without message"))));
        }
        let set = ManifoldSet {
            dynamic_range: resp
                .dynamic_range
                .ok_or_else(|| failed(format!("response {id} lacks dynamic_range")))?,
            manifolds: resp
                .manifolds
                .ok_or_else(|| failed(format!("response {id} lacks manifolds")))?,
        };
        set.validate().map_err(|e| failed(format!("response {id}: {e}")))?;
        Ok(set)
    }
}

impl Drop for ExternalClient {
    fn drop(&mut self) {
        self.writer.take();
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_millis(500);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => return,
                    Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                    _ => break,
                }
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Remote manifolds scored locally.
pub struct ExternalObjective {
    client: ExternalClient,
    scoring: ManifoldScoring,
    seed: u64,
    config_override: Value,
}

impl ExternalObjective {
    pub fn new(client: ExternalClient, scoring: ManifoldScoring, seed: u64, config_override: Value) -> Self {
        ExternalObjective {
            client,
            scoring,
            seed,
            config_override,
        }
    }

    pub fn client(&mut self) -> &mut ExternalClient {
        &mut self.client
    }
}

impl Objective for ExternalObjective {
    fn evaluate(&mut self, t: &Trajectory) -> Result<f64> {
        let set = self.client.request_manifolds(t.values(), &self.config_override)?;
        self.scoring
            .score(&set, self.seed)
            .map_err(|e| failed(format!("scoring returned manifolds: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::ssim::Image;
    use std::io::{pipe, BufReader};

    fn canned() -> ManifoldSet {
        let grid = |id: usize, v: f64| ManifoldGrid::new(id, 1, 2, vec![Image::filled(4, 4, v), Image::filled(4, 4, v * 0.5)]).unwrap();
        ManifoldSet {
            dynamic_range: 1.0,
            manifolds: vec![grid(0, 0.2), grid(1, 0.9)],
        }
    }

    /// In-process worker: answers each request line with `reply(request)`.
    fn worker(reply: impl Fn(&Value) -> Option<String> + Send + 'static) -> ExternalClient {
        let (req_r, req_w) = pipe().unwrap();
        let (resp_r, mut resp_w) = pipe().unwrap();
        thread::spawn(move || {
            for line in BufReader::new(req_r).lines() {
                let Ok(line) = line else { break };
                let v: Value = serde_json::from_str(&line).unwrap();
                if let Some(out) = reply(&v) {
                    if writeln!(resp_w, "{out}").is_err() {
                        break;
                    }
                }
            }
        });
        ExternalClient::from_streams(BufReader::new(resp_r), req_w, Duration::from_secs(5))
    }

    fn ok_reply(v: &Value) -> Option<String> {
        let set = canned();
        Some(
            json!({"id": v["id"], "ok": true, "dynamic_range": set.dynamic_range, "manifolds": set.manifolds})
                .to_string(),
        )
    }

    #[test]
    fn evaluate_matches_local_scoring() {
        let client = worker(ok_reply);
        let scoring = ManifoldScoring::default();
        let mut obj = ExternalObjective::new(client, scoring, 4, json!({}));
        let t = Trajectory::new(vec![1.0, 2.0]).unwrap();
        let remote = obj.evaluate(&t).unwrap();
        assert_eq!(remote, scoring.score(&canned(), 4).unwrap());
        assert_eq!(obj.evaluate(&t).unwrap(), remote);
    }

    #[test]
    fn error_response_becomes_evaluation_failure() {
        let mut client = worker(|v| Some(json!({"id": v["id"], "ok": false, "error": "boom"}).to_string()));
        let err = client.request_manifolds(&[1.0], &json!({})).unwrap_err();
        assert!(matches!(err, Error::EvaluationFailed(ref m) if m.contains("boom")));
    }

    #[test]
    fn stale_ids_are_skipped() {
        let mut client = worker(|v| {
            let id = v["id"].as_u64().unwrap();
            let stale = json!({"id": 0, "ok": false, "error": "late"}).to_string();
            Some(format!("{stale}\n{}", ok_reply(&json!({"id": id})).unwrap()))
        });
        client.request_manifolds(&[1.0], &json!({})).unwrap();
    }

    #[test]
    fn silent_worker_times_out() {
        let (req_r, req_w) = pipe().unwrap();
        let (resp_r, _resp_w) = pipe().unwrap();
        let _keep = req_r;
        let mut client = ExternalClient::from_streams(BufReader::new(resp_r), req_w, Duration::from_millis(50));
        let err = client.request_manifolds(&[1.0], &json!({})).unwrap_err();
        assert!(matches!(err, Error::EvaluationFailed(ref m) if m.contains("timed out")));
    }

    #[test]
    fn malformed_manifolds_rejected() {
        let mut client = worker(|v| {
            Some(json!({"id": v["id"], "ok": true, "dynamic_range": 1.0, "manifolds": [
                {"class_id": 0, "rows": 1, "cols": 1, "h": 2, "w": 2, "pixels": [0.0, 1.0]}
            ]}).to_string())
        });
        assert!(client.request_manifolds(&[1.0], &json!({})).is_err());
    }

    #[test]
    fn ping_accepts_bare_ok() {
        let mut client = worker(|_| Some(r#"{"ok":true}"#.to_string()));
        client.ping().unwrap();
    }
}
