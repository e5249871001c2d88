//! Line-delimited JSON protocol to an external predictor process.
//!
//! Each request is one line `{"version":1,"id":N,"task":"match"|"tag"|"generate",…}`
//! and each reply one line carrying the same `id`. Replies may arrive in any
//! order; the client routes them by id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::codec::{history_tokens, Tag, TagSequence};
use super::matcher::Matcher;
use super::tagger::Tagger;
use super::PredictError;
use crate::model::{ApiResult, Instruction, InstructionId, Manual, Speaker, Utterance};

pub const BRIDGE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireUtterance {
    pub turn: usize,
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireInstruction {
    pub id: InstructionId,
    pub condition: String,
    pub solution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api: Option<String>,
    /// Attribute mentions in API input order.
    #[serde(default)]
    pub mentions: Vec<String>,
}

impl From<&Instruction> for WireInstruction {
    fn from(i: &Instruction) -> Self {
        WireInstruction {
            id: i.id.clone(),
            condition: i.condition.clone(),
            solution: i.solution.clone(),
            api: i.api.as_ref().map(|a| a.text.clone()),
            mentions: i
                .api
                .iter()
                .flat_map(|a| a.mentions.iter().map(|m| m.attribute.to_string()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum BridgeTask {
    Match {
        history: Vec<WireUtterance>,
        candidates: Vec<WireInstruction>,
    },
    Tag {
        history: Vec<WireUtterance>,
        tokens: Vec<String>,
        instruction: WireInstruction,
        max_args: usize,
    },
    Generate {
        history: Vec<WireUtterance>,
        instructions: Vec<WireInstruction>,
        results: Vec<ApiResult>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeRequest {
    pub version: u32,
    pub id: u64,
    #[serde(flatten)]
    pub task: BridgeTask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredInstruction {
    pub id: InstructionId,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BridgeReply {
    pub version: u32,
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<ScoredInstruction>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Sends one request line and returns the matching reply line.
pub trait Transport: Send + Sync {
    fn exchange(&self, id: u64, line: String, timeout: Duration) -> Result<String, PredictError>;
}

/// In-process transport calling a function; used for tests and embedding.
pub struct FnTransport<F>(pub F);

impl<F> Transport for FnTransport<F>
where
    F: Fn(BridgeRequest) -> String + Send + Sync,
{
    fn exchange(&self, _id: u64, line: String, _timeout: Duration) -> Result<String, PredictError> {
        let req: BridgeRequest =
            serde_json::from_str(&line).map_err(|e| PredictError::Malformed(e.to_string()))?;
        Ok((self.0)(req))
    }
}

type Pending = Arc<Mutex<HashMap<u64, Sender<String>>>>;

/// A child process speaking the protocol on its standard input and output.
pub struct ChildTransport {
    child: Mutex<Child>,
    stdin: Mutex<ChildStdin>,
    pending: Pending,
}

impl ChildTransport {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, PredictError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PredictError::Unavailable(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let pending: Pending = Arc::default();
        let routes = Arc::clone(&pending);
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(serde_json::Value::as_u64));
                let Some(id) = id else {
                    log::warn!("bridge reply without id dropped");
                    continue;
                };
                if let Some(tx) = routes.lock().expect("routes lock").remove(&id) {
                    let _ = tx.send(line);
                }
            }
            routes.lock().expect("routes lock").clear();
        });
        Ok(ChildTransport {
            child: Mutex::new(child),
            stdin: Mutex::new(stdin),
            pending,
        })
    }
}

impl Transport for ChildTransport {
    fn exchange(&self, id: u64, line: String, timeout: Duration) -> Result<String, PredictError> {
        let (tx, rx) = mpsc::channel();
        self.pending.lock().expect("pending lock").insert(id, tx);
        {
            let mut stdin = self.stdin.lock().expect("stdin lock");
            writeln!(stdin, "{line}")
                .and_then(|_| stdin.flush())
                .map_err(|e| PredictError::Unavailable(e.to_string()))?;
        }
        match rx.recv_timeout(timeout) {
            Ok(reply) => Ok(reply),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                self.pending.lock().expect("pending lock").remove(&id);
                Err(PredictError::Timeout(timeout.as_millis() as u64))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(PredictError::Unavailable("predictor exited".into()))
            }
        }
    }
}

impl Drop for ChildTransport {
    fn drop(&mut self) {
        if let Ok(mut c) = self.child.lock() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

/// Produces a free-text agent response.
pub trait Generator: Send + Sync {
    fn generate(
        &self,
        history: &[Utterance<'_>],
        instructions: &[&Instruction],
        results: &[ApiResult],
    ) -> Result<String, PredictError>;
}

/// Client side of the protocol; usable as matcher, tagger and generator.
pub struct BridgeClient {
    transport: Box<dyn Transport>,
    timeout: Duration,
    next_id: AtomicU64,
}

fn wire_history(history: &[Utterance<'_>]) -> Vec<WireUtterance> {
    history
        .iter()
        .map(|u| WireUtterance {
            turn: u.turn,
            speaker: u.speaker,
            text: u.text.to_string(),
        })
        .collect()
}

impl BridgeClient {
    pub fn new(transport: Box<dyn Transport>, timeout: Duration) -> Self {
        BridgeClient {
            transport,
            timeout,
            next_id: AtomicU64::new(1),
        }
    }

    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self, PredictError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| PredictError::Unavailable("empty command".into()))?;
        Ok(Self::new(
            Box::new(ChildTransport::spawn(program, args)?),
            timeout,
        ))
    }

    pub fn request(&self, task: BridgeTask) -> Result<BridgeReply, PredictError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let line = serde_json::to_string(&BridgeRequest {
            version: BRIDGE_VERSION,
            id,
            task,
        })
        .expect("request serializes");
        let raw = self.transport.exchange(id, line, self.timeout)?;
        let reply: BridgeReply =
            serde_json::from_str(&raw).map_err(|e| PredictError::Malformed(e.to_string()))?;
        if reply.version != BRIDGE_VERSION {
            return Err(PredictError::Version {
                got: reply.version,
                expected: BRIDGE_VERSION,
            });
        }
        if reply.id != id {
            return Err(PredictError::Malformed(format!(
                "reply id {} for request {id}",
                reply.id
            )));
        }
        if let Some(e) = reply.error {
            return Err(PredictError::Malformed(format!("predictor error: {e}")));
        }
        Ok(reply)
    }
}

impl Matcher for BridgeClient {
    fn score(&self, history: &[Utterance<'_>], manual: &Manual) -> Result<Vec<f64>, PredictError> {
        let candidates = manual
            .instructions
            .iter()
            .map(WireInstruction::from)
            .collect();
        let reply = self.request(BridgeTask::Match {
            history: wire_history(history),
            candidates,
        })?;
        let scored = reply
            .scores
            .ok_or_else(|| PredictError::Malformed("missing scores".into()))?;
        let position: HashMap<&InstructionId, usize> = manual
            .instructions
            .iter()
            .enumerate()
            .map(|(k, i)| (&i.id, k))
            .collect();
        let mut scores = vec![0.0; manual.instructions.len()];
        for s in scored {
            let k = *position.get(&s.id).ok_or_else(|| {
                PredictError::Malformed(format!("unknown instruction id {}", s.id))
            })?;
            if !(0.0..=1.0).contains(&s.score) {
                return Err(PredictError::Malformed(format!(
                    "score {} outside [0, 1]",
                    s.score
                )));
            }
            scores[k] = s.score;
        }
        Ok(scores)
    }
}

impl Tagger for BridgeClient {
    fn tag(
        &self,
        history: &[Utterance<'_>],
        instruction: &Instruction,
        max_args: usize,
    ) -> Result<TagSequence, PredictError> {
        let tokens = history_tokens(history);
        let reply = self.request(BridgeTask::Tag {
            history: wire_history(history),
            tokens: tokens.iter().map(|t| t.text.clone()).collect(),
            instruction: instruction.into(),
            max_args,
        })?;
        let raw = reply
            .tags
            .ok_or_else(|| PredictError::Malformed("missing tags".into()))?;
        if raw.len() != tokens.len() {
            return Err(PredictError::Malformed(format!(
                "{} tags for {} tokens",
                raw.len(),
                tokens.len()
            )));
        }
        let mut seq = TagSequence::all_o(&tokens);
        for (slot, t) in seq.tags.iter_mut().zip(&raw) {
            let tag: Tag = t
                .parse()
                .map_err(|_| PredictError::Malformed(format!("bad tag {t}")))?;
            if tag.index().is_some_and(|k| k > max_args) {
                return Err(PredictError::Malformed(format!(
                    "tag {t} exceeds max_args {max_args}"
                )));
            }
            *slot = tag;
        }
        Ok(seq)
    }
}

impl Generator for BridgeClient {
    fn generate(
        &self,
        history: &[Utterance<'_>],
        instructions: &[&Instruction],
        results: &[ApiResult],
    ) -> Result<String, PredictError> {
        let reply = self.request(BridgeTask::Generate {
            history: wire_history(history),
            instructions: instructions
                .iter()
                .map(|i| WireInstruction::from(*i))
                .collect(),
            results: results.to_vec(),
        })?;
        reply
            .text
            .ok_or_else(|| PredictError::Malformed("missing text".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlu::codec::utterance;

    fn manual() -> Manual {
        let i = |id: &str| Instruction {
            id: id.into(),
            family: id.into(),
            domain: "hotel".into(),
            condition: "c".into(),
            solution: "s".into(),
            api: None,
        };
        Manual {
            id: "m".into(),
            instructions: vec![i("a"), i("b")],
        }
    }

    fn reply(req: &BridgeRequest, scores: Vec<ScoredInstruction>) -> String {
        serde_json::to_string(&BridgeReply {
            version: 1,
            id: req.id,
            scores: Some(scores),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn echo_scores_are_routed_by_id() {
        let client = BridgeClient::new(
            Box::new(FnTransport(|r: BridgeRequest| {
                reply(
                    &r,
                    vec![ScoredInstruction {
                        id: "b".into(),
                        score: 1.0,
                    }],
                )
            })),
            Duration::from_secs(1),
        );
        let h = [utterance(0, Speaker::User, "hi")];
        assert_eq!(client.score(&h, &manual()).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn unknown_instruction_is_malformed() {
        let client = BridgeClient::new(
            Box::new(FnTransport(|r: BridgeRequest| {
                reply(
                    &r,
                    vec![ScoredInstruction {
                        id: "zz".into(),
                        score: 1.0,
                    }],
                )
            })),
            Duration::from_secs(1),
        );
        let h = [utterance(0, Speaker::User, "hi")];
        assert!(matches!(
            client.score(&h, &manual()),
            Err(PredictError::Malformed(_))
        ));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let client = BridgeClient::new(
            Box::new(FnTransport(|r: BridgeRequest| {
                serde_json::to_string(&BridgeReply {
                    version: 9,
                    id: r.id,
                    ..Default::default()
                })
                .unwrap()
            })),
            Duration::from_secs(1),
        );
        let h = [utterance(0, Speaker::User, "hi")];
        assert_eq!(
            client.score(&h, &manual()),
            Err(PredictError::Version {
                got: 9,
                expected: 1
            })
        );
    }

    #[test]
    fn silent_child_times_out() {
        let client = BridgeClient::spawn(
            &["sleep".to_string(), "5".to_string()],
            Duration::from_millis(100),
        )
        .unwrap();
        let h = [utterance(0, Speaker::User, "hi")];
        assert_eq!(client.score(&h, &manual()), Err(PredictError::Timeout(100)));
    }

    #[test]
    fn missing_program_is_unavailable() {
        let r = BridgeClient::spawn(
            &["/nonexistent/predictor".to_string()],
            Duration::from_millis(100),
        );
        assert!(matches!(r, Err(PredictError::Unavailable(_))));
    }
}
