//! Benchmark-style evaluation: strict matching, turn and call accuracy,
//! complexity strata and the three-level error breakdown.

pub mod cfb;
mod predictions;
mod report;

pub use predictions::{
    execute_record, join_predictions, parse_prediction, read_predictions, Prediction, PredictionError,
};
pub use report::render_table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{GroundTruth, LogicType, ToolCall};
use crate::reward::align_calls;
use crate::template::{dependency_pattern, longest_path, DependencyPattern};

/// Strict match: same function and canonically equal arguments.
pub fn match_call(pred: &ToolCall, gt: &ToolCall) -> bool {
    pred.matches(gt)
}

/// `(n_succ, n_total)`: the number of leading ground-truth turns whose calls
/// all appear in the predicted turn at the same position.
pub fn turn_accuracy(pred_turns: &[Vec<ToolCall>], gt: &GroundTruth) -> (usize, usize) {
    let gt_turns = gt.turns();
    let mut n_succ = 0;
    for (t, want) in gt_turns.iter().enumerate() {
        let Some(got) = pred_turns.get(t) else { break };
        let mut used = vec![false; got.len()];
        let ok = want.iter().all(|&i| {
            let g = &gt.calls[i].call;
            match (0..got.len()).find(|&k| !used[k] && match_call(&got[k], g)) {
                Some(k) => {
                    used[k] = true;
                    true
                }
                None => false,
            }
        });
        if !ok {
            break;
        }
        n_succ += 1;
    }
    (n_succ, gt_turns.len())
}

/// For each predicted call, the ground-truth call it was greedily matched to.
fn greedy_matches(pred: &[ToolCall], gt: &GroundTruth) -> Vec<Option<usize>> {
    let mut taken = vec![false; gt.calls.len()];
    pred.iter()
        .map(|p| {
            let i = (0..gt.calls.len()).find(|&i| !taken[i] && match_call(p, &gt.calls[i].call))?;
            taken[i] = true;
            Some(i)
        })
        .collect()
}

/// `(matched, total)` under greedy in-order matching.
pub fn call_accuracy(pred: &[ToolCall], gt: &GroundTruth) -> (usize, usize) {
    let matched = greedy_matches(pred, gt).iter().filter(|m| m.is_some()).count();
    (matched, gt.calls.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stratum {
    pub depth: usize,
    pub pattern: DependencyPattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logic: Option<LogicType>,
}

pub fn stratify(gt: &GroundTruth, logic: Option<LogicType>) -> Stratum {
    let edges = gt.edges();
    let n = gt.calls.len();
    Stratum {
        depth: longest_path(n, &edges),
        pattern: dependency_pattern(n, &edges),
        logic,
    }
}

impl Stratum {
    pub fn labels(&self) -> Vec<String> {
        let mut out = vec![
            format!("depth={}", self.depth),
            format!("pattern={}", self.pattern.as_str()),
        ];
        if let Some(l) = self.logic {
            out.push(format!("logic={}", l.as_str()));
        }
        out
    }
}

/// How a produced call relates to the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallVerdict {
    Correct,
    /// Function is in the ground truth but no call matched exactly.
    ParamError,
    /// Function does not appear in the ground truth.
    FunctionError,
}

/// Per-call verdicts plus, for wrong-parameter calls, which kinds of
/// parameter were wrong: `(query_err, dependency_err)`.
fn classify_calls(pred: &[ToolCall], gt: &GroundTruth) -> Vec<(CallVerdict, bool, bool)> {
    let greedy = greedy_matches(pred, gt);
    let owner = align_calls(pred, gt).inverse(pred.len());
    pred.iter()
        .enumerate()
        .map(|(k, p)| {
            if greedy[k].is_some() {
                return (CallVerdict::Correct, false, false);
            }
            let paired = owner[k].or_else(|| gt.calls.iter().position(|c| c.call.function == p.function));
            let Some(i) = paired else {
                return (CallVerdict::FunctionError, false, false);
            };
            let g = &gt.calls[i];
            let mut query_err = false;
            let mut dep_err = false;
            let keys = g.call.args.keys().chain(p.args.keys());
            for key in keys {
                let same = matches!(
                    (p.args.get(key), g.call.args.get(key)),
                    (Some(a), Some(b)) if crate::canon::canonical_eq(a, b)
                );
                if !same {
                    if g.dependency_args.iter().any(|d| d == key) {
                        dep_err = true;
                    } else {
                        query_err = true;
                    }
                }
            }
            (CallVerdict::ParamError, query_err, dep_err)
        })
        .collect()
}

/// One evaluated episode: the ground truth and the predicted calls grouped by
/// assistant message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub id: String,
    pub ground_truth: GroundTruth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logic: Option<LogicType>,
    pub pred_turns: Vec<Vec<ToolCall>>,
}

impl EpisodeRecord {
    pub fn flat_calls(&self) -> Vec<ToolCall> {
        self.pred_turns.iter().flatten().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEval {
    pub id: String,
    pub n_succ: usize,
    pub n_total: usize,
    pub matched_calls: usize,
    pub total_calls: usize,
    pub stratum: Stratum,
}

pub fn evaluate_episode(rec: &EpisodeRecord) -> SampleEval {
    let (n_succ, n_total) = turn_accuracy(&rec.pred_turns, &rec.ground_truth);
    let (matched_calls, total_calls) = call_accuracy(&rec.flat_calls(), &rec.ground_truth);
    SampleEval {
        id: rec.id.clone(),
        n_succ,
        n_total,
        matched_calls,
        total_calls,
        stratum: stratify(&rec.ground_truth, rec.logic),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CallLevel {
    pub produced_calls: usize,
    pub function_selection_err: f64,
    pub parameter_err: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterLevel {
    pub correct_function_calls: usize,
    pub query_param_err: f64,
    pub dependency_param_err: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceLevel {
    pub samples: usize,
    pub incomplete: usize,
    pub stopped_after_correct: f64,
    pub stopped_after_func_err: f64,
    pub stopped_after_param_err: f64,
    pub stopped_without_calls: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub call_level: CallLevel,
    pub parameter_level: ParameterLevel,
    pub sequence_level: SequenceLevel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StratumStats {
    pub count: usize,
    pub turns_succeeded: usize,
    pub turns_total: usize,
    pub turn_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub turns_succeeded: usize,
    pub turns_total: usize,
    pub turn_acc: f64,
    pub calls_matched: usize,
    pub calls_total: usize,
    pub call_acc: f64,
    pub strata: BTreeMap<String, StratumStats>,
    pub errors: ErrorBreakdown,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Raw counts behind an [`EvalReport`]; merging is associative.
#[derive(Debug, Clone, Default)]
pub struct EvalAccumulator {
    samples: usize,
    turns: (usize, usize),
    calls: (usize, usize),
    strata: BTreeMap<String, (usize, usize, usize)>,
    produced: usize,
    func_err: usize,
    param_err: usize,
    correct_fn: usize,
    query_err: usize,
    dep_err: usize,
    incomplete: usize,
    stopped: [usize; 4],
}

impl EvalAccumulator {
    pub fn add(&mut self, rec: &EpisodeRecord) -> SampleEval {
        let s = evaluate_episode(rec);
        self.samples += 1;
        self.turns.0 += s.n_succ;
        self.turns.1 += s.n_total;
        self.calls.0 += s.matched_calls;
        self.calls.1 += s.total_calls;
        for label in s.stratum.labels() {
            let e = self.strata.entry(label).or_default();
            e.0 += 1;
            e.1 += s.n_succ;
            e.2 += s.n_total;
        }
        let flat = rec.flat_calls();
        let verdicts = classify_calls(&flat, &rec.ground_truth);
        self.produced += flat.len();
        for (v, q, d) in &verdicts {
            match v {
                CallVerdict::Correct => self.correct_fn += 1,
                CallVerdict::ParamError => {
                    self.param_err += 1;
                    self.correct_fn += 1;
                    self.query_err += *q as usize;
                    self.dep_err += *d as usize;
                }
                CallVerdict::FunctionError => self.func_err += 1,
            }
        }
        if s.n_succ < s.n_total {
            self.incomplete += 1;
            let bucket = match verdicts.last() {
                Some((CallVerdict::Correct, ..)) => 0,
                Some((CallVerdict::FunctionError, ..)) => 1,
                Some((CallVerdict::ParamError, ..)) => 2,
                None => 3,
            };
            self.stopped[bucket] += 1;
        }
        s
    }

    pub fn merge(&mut self, other: EvalAccumulator) {
        self.samples += other.samples;
        self.turns.0 += other.turns.0;
        self.turns.1 += other.turns.1;
        self.calls.0 += other.calls.0;
        self.calls.1 += other.calls.1;
        for (k, v) in other.strata {
            let e = self.strata.entry(k).or_default();
            e.0 += v.0;
            e.1 += v.1;
            e.2 += v.2;
        }
        self.produced += other.produced;
        self.func_err += other.func_err;
        self.param_err += other.param_err;
        self.correct_fn += other.correct_fn;
        self.query_err += other.query_err;
        self.dep_err += other.dep_err;
        self.incomplete += other.incomplete;
        for i in 0..4 {
            self.stopped[i] += other.stopped[i];
        }
    }

    pub fn finish(&self) -> EvalReport {
        let n = self.samples;
        EvalReport {
            samples: n,
            turns_succeeded: self.turns.0,
            turns_total: self.turns.1,
            turn_acc: ratio(self.turns.0, self.turns.1),
            calls_matched: self.calls.0,
            calls_total: self.calls.1,
            call_acc: ratio(self.calls.0, self.calls.1),
            strata: self
                .strata
                .iter()
                .map(|(k, &(count, s, t))| {
                    (
                        k.clone(),
                        StratumStats {
                            count,
                            turns_succeeded: s,
                            turns_total: t,
                            turn_acc: ratio(s, t),
                        },
                    )
                })
                .collect(),
            errors: ErrorBreakdown {
                call_level: CallLevel {
                    produced_calls: self.produced,
                    function_selection_err: ratio(self.func_err, self.produced),
                    parameter_err: ratio(self.param_err, self.produced),
                },
                parameter_level: ParameterLevel {
                    correct_function_calls: self.correct_fn,
                    query_param_err: ratio(self.query_err, self.correct_fn),
                    dependency_param_err: ratio(self.dep_err, self.correct_fn),
                },
                sequence_level: SequenceLevel {
                    samples: n,
                    incomplete: self.incomplete,
                    stopped_after_correct: ratio(self.stopped[0], n),
                    stopped_after_func_err: ratio(self.stopped[1], n),
                    stopped_after_param_err: ratio(self.stopped[2], n),
                    stopped_without_calls: ratio(self.stopped[3], n),
                },
            },
        }
    }
}

pub fn evaluate(records: &[EpisodeRecord]) -> EvalReport {
    let mut acc = EvalAccumulator::default();
    for r in records {
        acc.add(r);
    }
    acc.finish()
}

pub fn classify_errors(records: &[EpisodeRecord]) -> ErrorBreakdown {
    evaluate(records).errors
}
