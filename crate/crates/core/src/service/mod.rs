//! Session server for external trainers: line-delimited JSON messages, one
//! response per request.
//!
//! Request: `{"kind": K, "session_id": S, "body": {...}}`. Successful
//! responses repeat the request kind (`close` answers `ack`); failures answer
//! `error` with `{"code", "message"}`.

mod config;
mod transport;

pub use config::{ConfigError, ServiceConfig};
pub use transport::{serve_lines, serve_stdio, serve_tcp};

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::builtin::SYSTEM_PROMPT;
use crate::env::{EpisodeError, EpisodeState, Environment};
use crate::eval::{evaluate_episode, EpisodeRecord};
use crate::model::DatasetSample;
use crate::reward::score_total;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Hello,
    Reset,
    Step,
    Score,
    Close,
    Error,
    Ack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMessage {
    pub kind: MessageKind,
    #[serde(default)]
    pub session_id: String,
    #[serde(default)]
    pub body: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProtocolError {
    NoSession,
    BadRequest,
    EpisodeClosed,
}

impl SessionMessage {
    fn reply(kind: MessageKind, session_id: &str, body: Value) -> Self {
        Self {
            kind,
            session_id: session_id.to_string(),
            body,
        }
    }

    fn error(session_id: &str, code: ProtocolError, message: impl Into<String>) -> Self {
        Self::reply(
            MessageKind::Error,
            session_id,
            json!({"code": code, "message": message.into()}),
        )
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResetBody {
    sample_id: Option<String>,
    dataset_index: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepBody {
    assistant_text: String,
}

/// Shared server state: one immutable environment, a dataset, and the open
/// episodes keyed by session id.
pub struct Service {
    env: Environment,
    samples: Vec<DatasetSample>,
    by_id: HashMap<String, usize>,
    lambda: f64,
    max_turns: usize,
    seed: u64,
    sessions: Mutex<HashMap<String, Arc<Mutex<EpisodeState>>>>,
    next_session: AtomicU64,
}

impl Service {
    pub fn new(env: Environment, samples: Vec<DatasetSample>, lambda: f64, max_turns: usize) -> Self {
        let by_id = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        Self {
            env,
            samples,
            by_id,
            lambda,
            max_turns,
            seed: 0,
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn samples(&self) -> &[DatasetSample] {
        &self.samples
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }

    fn session(&self, id: &str) -> Option<Arc<Mutex<EpisodeState>>> {
        self.sessions.lock().expect("session map poisoned").get(id).cloned()
    }

    /// Handles one raw line. Never fails: malformed input yields an error
    /// message.
    pub fn handle_line(&self, line: &str) -> String {
        let reply = match serde_json::from_str::<SessionMessage>(line) {
            Ok(msg) => self.handle_message(msg),
            Err(e) => {
                let sid = serde_json::from_str::<Value>(line)
                    .ok()
                    .and_then(|v| v.get("session_id").and_then(Value::as_str).map(str::to_string))
                    .unwrap_or_default();
                SessionMessage::error(&sid, ProtocolError::BadRequest, format!("malformed message: {e}"))
            }
        };
        serde_json::to_string(&reply).expect("replies serialize")
    }

    pub fn handle_message(&self, msg: SessionMessage) -> SessionMessage {
        let sid = msg.session_id.as_str();
        match msg.kind {
            MessageKind::Hello => SessionMessage::reply(
                MessageKind::Hello,
                sid,
                json!({
                    "protocol": 1,
                    "functions": self.env.registry().len(),
                    "samples": self.samples.len(),
                    "lambda": self.lambda,
                    "max_turns": self.max_turns,
                }),
            ),
            MessageKind::Reset => self.reset(sid, msg.body),
            MessageKind::Step => self.step(sid, msg.body),
            MessageKind::Score => self.score(sid),
            MessageKind::Close => {
                let removed = self.sessions.lock().expect("session map poisoned").remove(sid);
                match removed {
                    Some(_) => SessionMessage::reply(MessageKind::Ack, sid, json!({})),
                    None => SessionMessage::error(sid, ProtocolError::NoSession, format!("no session {sid:?}")),
                }
            }
            MessageKind::Error | MessageKind::Ack => {
                SessionMessage::error(sid, ProtocolError::BadRequest, "not a request kind")
            }
        }
    }

    fn reset(&self, sid: &str, body: Value) -> SessionMessage {
        let body: ResetBody = match body {
            Value::Null => ResetBody::default(),
            b => match serde_json::from_value(b) {
                Ok(b) => b,
                Err(e) => return SessionMessage::error(sid, ProtocolError::BadRequest, e.to_string()),
            },
        };
        let sid = if sid.is_empty() {
            format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed))
        } else {
            sid.to_string()
        };
        let index = match (&body.sample_id, body.dataset_index) {
            (Some(id), None) => self.by_id.get(id).copied(),
            (None, Some(i)) => (i < self.samples.len()).then_some(i),
            (None, None) if self.samples.is_empty() => None,
            (None, None) => Some(rng::stream(self.seed, &["reset", &sid]).random_range(0..self.samples.len())),
            (Some(_), Some(_)) => {
                return SessionMessage::error(&sid, ProtocolError::BadRequest, "give sample_id or dataset_index, not both")
            }
        };
        let Some(index) = index else {
            return SessionMessage::error(&sid, ProtocolError::BadRequest, "no such sample");
        };
        let sample = self.samples[index].clone();
        let reply = json!({
            "sample_id": sample.id,
            "system_prompt": SYSTEM_PROMPT,
            "tools": self.env.registry().tools_json(),
            "query": sample.query,
        });
        let episode = EpisodeState::with_max_turns(sample, self.max_turns);
        self.sessions
            .lock()
            .expect("session map poisoned")
            .insert(sid.clone(), Arc::new(Mutex::new(episode)));
        SessionMessage::reply(MessageKind::Reset, &sid, reply)
    }

    fn step(&self, sid: &str, body: Value) -> SessionMessage {
        let Some(ep) = self.session(sid) else {
            return SessionMessage::error(sid, ProtocolError::NoSession, format!("no session {sid:?}"));
        };
        let body: StepBody = match serde_json::from_value(body) {
            Ok(b) => b,
            Err(e) => return SessionMessage::error(sid, ProtocolError::BadRequest, e.to_string()),
        };
        let mut ep = ep.lock().expect("episode poisoned");
        match ep.step(&self.env, &body.assistant_text) {
            Ok(out) => {
                let mut v = serde_json::to_value(&out).expect("step outcome serializes");
                v["turn_count"] = json!(ep.turn_count());
                SessionMessage::reply(MessageKind::Step, sid, v)
            }
            Err(EpisodeError::Closed) => {
                SessionMessage::error(sid, ProtocolError::EpisodeClosed, "episode is closed")
            }
        }
    }

    fn score(&self, sid: &str) -> SessionMessage {
        let Some(ep) = self.session(sid) else {
            return SessionMessage::error(sid, ProtocolError::NoSession, format!("no session {sid:?}"));
        };
        let ep = ep.lock().expect("episode poisoned");
        let gt = &ep.sample.ground_truth;
        let reward = score_total(&ep.calls(), &ep.observations(), gt, self.env.registry(), self.lambda);
        let eval = evaluate_episode(&EpisodeRecord {
            id: ep.sample.id.clone(),
            ground_truth: gt.clone(),
            logic: ep.sample.logic,
            pred_turns: ep.pred_turns(),
        });
        SessionMessage::reply(MessageKind::Score, sid, json!({"reward": reward, "eval": eval}))
    }
}
