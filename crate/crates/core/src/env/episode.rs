use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::protocol::{parse_tool_calls, render_parse_error, render_tool_response, ParseError};
use super::{Environment, DEFAULT_MAX_TURNS};
use crate::model::{DatasetSample, Observation, ToolCall};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// 1-based index of the assistant message that issued the call.
    pub turn: usize,
    pub call: ToolCall,
    pub observation: Observation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub responses_text: String,
    pub calls: Vec<ToolCall>,
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<ParseError>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EpisodeError {
    #[error("episode is closed")]
    Closed,
}

/// One rollout: the sample being answered and the calls made so far.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub sample: DatasetSample,
    transcript: Vec<TranscriptEntry>,
    turn_count: usize,
    closed: bool,
    max_turns: usize,
}

impl EpisodeState {
    pub fn new(sample: DatasetSample) -> Self {
        Self::with_max_turns(sample, DEFAULT_MAX_TURNS)
    }

    pub fn with_max_turns(sample: DatasetSample, max_turns: usize) -> Self {
        Self {
            sample,
            transcript: Vec::new(),
            turn_count: 0,
            closed: false,
            max_turns: max_turns.max(1),
        }
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn turn_count(&self) -> usize {
        self.turn_count
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn calls(&self) -> Vec<ToolCall> {
        self.transcript.iter().map(|e| e.call.clone()).collect()
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.transcript.iter().map(|e| e.observation.clone()).collect()
    }

    /// Calls grouped by assistant message. Turns that produced no calls (a
    /// parse error) appear as empty groups.
    pub fn pred_turns(&self) -> Vec<Vec<ToolCall>> {
        let mut out = vec![Vec::new(); self.turn_count];
        for e in &self.transcript {
            out[e.turn - 1].push(e.call.clone());
        }
        out
    }

    /// Processes one assistant message.
    pub fn step(&mut self, env: &Environment, assistant_text: &str) -> Result<StepOutcome, EpisodeError> {
        if self.closed {
            return Err(EpisodeError::Closed);
        }
        let calls = match parse_tool_calls(assistant_text) {
            Ok(calls) => calls,
            Err(e) => {
                self.turn_count += 1;
                let done = self.turn_count >= self.max_turns;
                self.closed = done;
                return Ok(StepOutcome {
                    responses_text: render_parse_error(&e),
                    calls: Vec::new(),
                    done,
                    parse_error: Some(e),
                });
            }
        };
        if calls.is_empty() {
            self.closed = true;
            return Ok(StepOutcome {
                responses_text: String::new(),
                calls,
                done: true,
                parse_error: None,
            });
        }
        self.turn_count += 1;
        let mut rendered = Vec::with_capacity(calls.len());
        for call in &calls {
            let observation = env.execute(call);
            rendered.push(render_tool_response(&observation));
            self.transcript.push(TranscriptEntry {
                turn: self.turn_count,
                call: call.clone(),
                observation,
            });
        }
        let done = self.turn_count >= self.max_turns;
        self.closed = done;
        Ok(StepOutcome {
            responses_text: rendered.join("\n"),
            calls,
            done,
            parse_error: None,
        })
    }
}
