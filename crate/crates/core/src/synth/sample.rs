use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::cache::{CacheStore, EntryId, InvertedIndex};
use crate::model::{Observation, ToolCall};
use crate::path::ExtractError;
use crate::template::WorkflowTemplate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub entry: EntryId,
    pub call: ToolCall,
    pub observation: Observation,
    /// Parameters whose values were propagated from earlier observations.
    pub dependency_args: Vec<String>,
}

/// A sampled execution of one template over the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub template_id: String,
    pub seed: u64,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    /// Parameters of step `t` that a query must state explicitly.
    pub fn query_params(&self, t: usize) -> impl Iterator<Item = (&String, &Value)> {
        let step = &self.steps[t];
        step.call
            .args
            .iter()
            .filter(|(k, _)| !step.dependency_args.contains(k))
    }
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("no consistent trace after {restarts} restarts")]
    Exhausted { restarts: usize },
    #[error("step {step} param {param:?}: {source} (cache is not closed under the template)")]
    Closure {
        step: usize,
        param: String,
        #[source]
        source: ExtractError,
    },
}

/// Walks the template over the cache. Root steps draw uniformly among all
/// entries of their function; dependent steps draw among entries whose
/// dependency arguments equal the values extracted from earlier steps. An
/// empty candidate set restarts from the first step.
pub fn sample_trace<R: Rng + ?Sized>(
    template: &WorkflowTemplate,
    store: &CacheStore,
    index: &InvertedIndex,
    rng: &mut R,
    seed: u64,
    max_restarts: usize,
) -> Result<Trace, SampleError> {
    'attempt: for _ in 0..=max_restarts {
        let mut steps: Vec<TraceStep> = Vec::with_capacity(template.len());
        for (t, function) in template.pattern.iter().enumerate() {
            let mut bound: Vec<(&str, &Value)> = Vec::new();
            if let Some(dep) = template.step(t) {
                for (param, binding) in &dep.dependency_args {
                    let v = binding
                        .from_field
                        .extract(&steps[binding.from_step].observation)
                        .map_err(|source| SampleError::Closure {
                            step: t,
                            param: param.clone(),
                            source,
                        })?;
                    bound.push((param.as_str(), v));
                }
            }
            let candidates: Vec<EntryId> = if bound.is_empty() {
                index.all_for(function).to_vec()
            } else {
                index.query(function, &bound)
            };
            if candidates.is_empty() {
                continue 'attempt;
            }
            let id = candidates[rng.random_range(0..candidates.len())];
            let entry = store.entry(id).expect("index ids point into the store");
            steps.push(TraceStep {
                entry: id,
                call: entry.call.clone(),
                observation: entry.observation.clone(),
                dependency_args: bound.iter().map(|(k, _)| k.to_string()).collect(),
            });
        }
        return Ok(Trace {
            template_id: template.id.clone(),
            seed,
            steps,
        });
    }
    Err(SampleError::Exhausted {
        restarts: max_restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::cache::{build_cache, build_index};
    use crate::canon::canonical_eq;
    use crate::rng;
    use crate::template::parse_template;
    use serde_json::json;

    /// Re-extracts every binding from the trace's own observations.
    fn bindings_hold(template: &WorkflowTemplate, trace: &Trace) -> bool {
        trace.steps.len() == template.len()
            && template.pattern.iter().zip(&trace.steps).all(|(f, s)| &s.call.function == f)
            && template.dependencies.iter().all(|(&t, dep)| {
                dep.dependency_args.iter().all(|(param, b)| {
                    let want = b.from_field.extract(&trace.steps[b.from_step].observation).unwrap();
                    trace.steps[t].call.args.get(param).is_some_and(|got| canonical_eq(got, want))
                })
            })
    }

    #[test]
    fn single_chain_is_recovered_exactly() {
        let car = builtin::car_rental_sample();
        let store = builtin::fixture_cache(std::slice::from_ref(&car)).unwrap();
        let index = build_index(&store);
        let t = builtin::template("car_rental_packages").unwrap();
        let trace = sample_trace(&t, &store, &index, &mut rng::stream(1, &[]), 1, 10).unwrap();
        let calls: Vec<_> = trace.steps.iter().map(|s| s.call.clone()).collect();
        let gt: Vec<_> = car.ground_truth.tool_calls().cloned().collect();
        assert_eq!(calls, gt);
        assert_eq!(trace.steps[2].dependency_args, vec!["search_key", "vehicle_id"]);
    }

    #[test]
    fn never_intersecting_constraint_exhausts() {
        let store = build_cache(vec![
            (
                ToolCall::from_value("A", json!({"q": 1})).unwrap(),
                Observation::ok(json!({"id": "x"})).unwrap(),
            ),
            (
                ToolCall::from_value("B", json!({"id": "y"})).unwrap(),
                Observation::ok(json!({"ok": 1})).unwrap(),
            ),
        ])
        .unwrap();
        let index = build_index(&store);
        let t = parse_template(
            r#"{"pattern": ["A", "B"], "dependencies": {"1": {"depends_on": [0],
                "dependency_args": {"id": {"from_step": 0, "from_field": "id"}}}}}"#,
        )
        .unwrap();
        let err = sample_trace(&t, &store, &index, &mut rng::stream(0, &[]), 0, 7).unwrap_err();
        assert!(matches!(err, SampleError::Exhausted { restarts: 7 }));
    }

    #[test]
    fn missing_path_is_a_closure_error() {
        let store = build_cache(vec![(
            ToolCall::from_value("A", json!({})).unwrap(),
            Observation::ok(json!({"other": 1})).unwrap(),
        )])
        .unwrap();
        let index = build_index(&store);
        let t = parse_template(
            r#"{"pattern": ["A", "B"], "dependencies": {"1": {"depends_on": [0],
                "dependency_args": {"id": {"from_step": 0, "from_field": "id"}}}}}"#,
        )
        .unwrap();
        let err = sample_trace(&t, &store, &index, &mut rng::stream(0, &[]), 0, 3).unwrap_err();
        assert!(matches!(err, SampleError::Closure { step: 1, .. }));
    }

    #[test]
    fn random_traces_satisfy_their_bindings() {
        let store = builtin::mock_cache(12, 3).unwrap();
        let index = build_index(&store);
        let templates = builtin::templates();
        let mut checked = 0;
        for i in 0..100u64 {
            let t = &templates[i as usize % templates.len()];
            let mut rng = rng::stream(i, &["oracle"]);
            if let Ok(trace) = sample_trace(t, &store, &index, &mut rng, i, 10) {
                assert!(bindings_hold(t, &trace), "{} seed {i}", t.id);
                checked += 1;
            }
        }
        assert!(checked >= 95, "only {checked} traces sampled");
    }
}
