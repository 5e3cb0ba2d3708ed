//! Workflow templates: ordered function patterns with dependency bindings.
//!
//! Documents use the layout
//!
//! ```json
//! {"pattern": ["A", "B"],
//!  "dependencies": {"1": {"depends_on": [0],
//!                         "dependency_args": {"x": {"from_step": 0, "from_field": "[0].x"}}}}}
//! ```
//!
//! plus optional `id` and `logic` keys.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::LogicType;
use crate::path::{parse_path, PathExpr, PathSyntaxError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyArg {
    pub from_step: usize,
    pub from_field: PathExpr,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StepDependency {
    pub depends_on: Vec<usize>,
    pub dependency_args: BTreeMap<String, DependencyArg>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowTemplate {
    pub id: String,
    pub pattern: Vec<String>,
    /// Keyed by step index; steps without an entry are independent.
    pub dependencies: BTreeMap<usize, StepDependency>,
    pub logic: Option<LogicType>,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dependency cycle: step {step} depends on step {on}")]
    Cycle { step: usize, on: usize },
    #[error("bad from_field for step {step} param {param:?}: {source}")]
    PathSyntax {
        step: usize,
        param: String,
        #[source]
        source: PathSyntaxError,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    #[serde(default)]
    id: Option<String>,
    pattern: Vec<String>,
    #[serde(default)]
    dependencies: BTreeMap<String, RawStep>,
    #[serde(default)]
    logic: Option<LogicType>,
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    depends_on: Vec<usize>,
    #[serde(default)]
    dependency_args: BTreeMap<String, RawArg>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArg {
    from_step: usize,
    from_field: String,
}

/// Parses one template document. A missing `id` key yields an empty id.
pub fn parse_template(doc: &str) -> Result<WorkflowTemplate, TemplateError> {
    let raw: RawTemplate =
        serde_json::from_str(doc).map_err(|e| TemplateError::Schema(e.to_string()))?;
    if raw.pattern.is_empty() {
        return Err(TemplateError::Schema("pattern is empty".into()));
    }
    if let Some(bad) = raw.pattern.iter().position(String::is_empty) {
        return Err(TemplateError::Schema(format!("pattern[{bad}] is empty")));
    }
    let n = raw.pattern.len();
    let mut dependencies = BTreeMap::new();
    for (key, step) in raw.dependencies {
        let idx: usize = key
            .parse()
            .map_err(|_| TemplateError::Schema(format!("dependency key {key:?} is not a step index")))?;
        if idx >= n {
            return Err(TemplateError::Schema(format!(
                "dependency key {idx} beyond pattern length {n}"
            )));
        }
        for &d in &step.depends_on {
            if d >= idx {
                return Err(TemplateError::Cycle { step: idx, on: d });
            }
        }
        let mut args = BTreeMap::new();
        for (param, arg) in step.dependency_args {
            if arg.from_step >= idx {
                return Err(TemplateError::Cycle {
                    step: idx,
                    on: arg.from_step,
                });
            }
            if !step.depends_on.contains(&arg.from_step) {
                return Err(TemplateError::Schema(format!(
                    "step {idx} param {param:?} reads step {} which is not in depends_on",
                    arg.from_step
                )));
            }
            let from_field =
                parse_path(&arg.from_field).map_err(|source| TemplateError::PathSyntax {
                    step: idx,
                    param: param.clone(),
                    source,
                })?;
            args.insert(
                param,
                DependencyArg {
                    from_step: arg.from_step,
                    from_field,
                },
            );
        }
        let mut depends_on = step.depends_on;
        depends_on.sort_unstable();
        depends_on.dedup();
        dependencies.insert(
            idx,
            StepDependency {
                depends_on,
                dependency_args: args,
            },
        );
    }
    Ok(WorkflowTemplate {
        id: raw.id.unwrap_or_default(),
        pattern: raw.pattern,
        dependencies,
        logic: raw.logic,
    })
}

/// Loads every `*.json` template in a directory, sorted by file name. Files
/// without an `id` key take their file stem as id.
pub fn load_templates_dir(dir: &Path) -> Result<Vec<WorkflowTemplate>, TemplateError> {
    let io = |source| TemplateError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    let mut ids = BTreeSet::new();
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(|source| TemplateError::Io {
            path: p.display().to_string(),
            source,
        })?;
        let mut t = parse_template(&text)?;
        if t.id.is_empty() {
            t.id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        if !ids.insert(t.id.clone()) {
            return Err(TemplateError::Schema(format!("duplicate template id {:?}", t.id)));
        }
        out.push(t);
    }
    Ok(out)
}

impl WorkflowTemplate {
    /// Renders the template back into its document layout.
    pub fn to_value(&self) -> Value {
        let mut deps = serde_json::Map::new();
        for (idx, step) in &self.dependencies {
            deps.insert(
                idx.to_string(),
                json!({
                    "depends_on": step.depends_on,
                    "dependency_args": step.dependency_args,
                }),
            );
        }
        let mut doc = json!({
            "id": self.id,
            "pattern": self.pattern,
            "dependencies": deps,
        });
        if let Some(logic) = self.logic {
            doc["logic"] = json!(logic);
        }
        doc
    }

    pub fn serialize(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("template serialization")
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }

    pub fn step(&self, idx: usize) -> Option<&StepDependency> {
        self.dependencies.get(&idx)
    }

    pub fn depends_on(&self, idx: usize) -> &[usize] {
        self.step(idx).map(|s| s.depends_on.as_slice()).unwrap_or(&[])
    }

    pub fn is_dependency_arg(&self, idx: usize, param: &str) -> bool {
        self.step(idx)
            .is_some_and(|s| s.dependency_args.contains_key(param))
    }

    /// Edges `(j, i)` meaning step i depends on step j.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.dependencies
            .iter()
            .flat_map(|(&i, s)| s.depends_on.iter().map(move |&j| (j, i)))
            .collect()
    }

    /// Turn index (1-based) per step: independent steps share turn 1 and each
    /// dependent step lands one turn after its latest prerequisite.
    pub fn turn_layers(&self) -> Vec<usize> {
        turn_layers(self.len(), &self.edges())
    }

    pub fn depth(&self) -> usize {
        longest_path(self.len(), &self.edges())
    }

    pub fn dependency_pattern(&self) -> DependencyPattern {
        dependency_pattern(self.len(), &self.edges())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyPattern {
    Linear,
    FanOut,
}

impl DependencyPattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            DependencyPattern::Linear => "linear",
            DependencyPattern::FanOut => "fan_out",
        }
    }
}

/// Kahn topological order, or `None` when the edges contain a cycle.
pub fn topo_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for &(j, i) in edges {
        if j >= n || i >= n {
            return None;
        }
        indeg[i] += 1;
        children[j].push(i);
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Number of edges on the longest dependency chain.
pub fn longest_path(n: usize, edges: &[(usize, usize)]) -> usize {
    turn_layers(n, edges).into_iter().max().map_or(0, |l| l - 1)
}

pub fn turn_layers(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let order = topo_order(n, edges).expect("dependency graph must be acyclic");
    let mut layer = vec![1usize; n];
    for v in order {
        for &(j, i) in edges {
            if j == v {
                layer[i] = layer[i].max(layer[v] + 1);
            }
        }
    }
    layer
}

pub fn dependency_pattern(n: usize, edges: &[(usize, usize)]) -> DependencyPattern {
    let mut children = vec![BTreeSet::new(); n];
    let mut has_parent = vec![false; n];
    for &(j, i) in edges {
        children[j].insert(i);
        has_parent[i] = true;
    }
    let roots = has_parent.iter().filter(|p| !**p).count();
    if roots >= 2 || children.iter().any(|c| c.len() >= 2) {
        DependencyPattern::FanOut
    } else {
        DependencyPattern::Linear
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const CAR_RENTAL: &str = r#"{"pattern": ["Search_Car_Location",
             "Search_Car_Rentals", "Get_Packages"],
 "dependencies": {
   "1": {"depends_on": [0],
         "dependency_args": {
           "pick_up_latitude": {"from_step": 0,
             "from_field": "[0].coordinates.latitude"},
           "pick_up_longitude": {"from_step": 0,
             "from_field": "[0].coordinates.longitude"}}},
   "2": {"depends_on": [1],
         "dependency_args": {
           "vehicle_id": {"from_step": 1,
             "from_field": "search_results[0].vehicle_id"},
           "search_key": {"from_step": 1,
             "from_field": "search_context.searchKey"}}}}}"#;

    #[test]
    fn parses_car_rental_document() {
        let t = parse_template(CAR_RENTAL).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.edges(), vec![(0, 1), (1, 2)]);
        let n_args: usize = t.dependencies.values().map(|s| s.dependency_args.len()).sum();
        assert_eq!(n_args, 4);
        assert_eq!(
            t.step(1).unwrap().dependency_args["pick_up_latitude"]
                .from_field
                .render(),
            "[0].coordinates.latitude"
        );
        assert_eq!(t.depth(), 2);
        assert_eq!(t.dependency_pattern(), DependencyPattern::Linear);
        assert_eq!(t.turn_layers(), vec![1, 2, 3]);
    }

    #[test]
    fn single_step_without_dependencies() {
        let t = parse_template(r#"{"pattern": ["Get_Exchange_Rates"], "dependencies": {}}"#).unwrap();
        assert!(t.edges().is_empty());
        assert_eq!(t.depth(), 0);
        assert_eq!(t.dependency_pattern(), DependencyPattern::Linear);
    }

    #[test]
    fn self_dependency_is_a_cycle() {
        let doc = r#"{"pattern": ["A", "B"], "dependencies": {"1": {"depends_on": [0],
            "dependency_args": {"x": {"from_step": 1, "from_field": "x"}}}}}"#;
        assert!(matches!(parse_template(doc), Err(TemplateError::Cycle { step: 1, on: 1 })));
        let doc = r#"{"pattern": ["A", "B"], "dependencies": {"0": {"depends_on": [1]}}}"#;
        assert!(matches!(parse_template(doc), Err(TemplateError::Cycle { step: 0, on: 1 })));
    }

    #[test]
    fn schema_and_path_errors() {
        assert!(matches!(parse_template(r#"{"dependencies": {}}"#), Err(TemplateError::Schema(_))));
        assert!(matches!(parse_template(r#"{"pattern": []}"#), Err(TemplateError::Schema(_))));
        let doc = r#"{"pattern": ["A", "B"], "dependencies": {"1": {"depends_on": [],
            "dependency_args": {"x": {"from_step": 0, "from_field": "x"}}}}}"#;
        assert!(matches!(parse_template(doc), Err(TemplateError::Schema(_))));
        let doc = r#"{"pattern": ["A", "B"], "dependencies": {"1": {"depends_on": [0],
            "dependency_args": {"x": {"from_step": 0, "from_field": "x..y"}}}}}"#;
        assert!(matches!(
            parse_template(doc),
            Err(TemplateError::PathSyntax { step: 1, .. })
        ));
        let doc = r#"{"pattern": ["A"], "dependencies": {"3": {"depends_on": []}}}"#;
        assert!(matches!(parse_template(doc), Err(TemplateError::Schema(_))));
    }

    #[test]
    fn fan_out_detection() {
        // two independent 2-chains
        assert_eq!(longest_path(4, &[(0, 2), (1, 3)]), 1);
        assert_eq!(dependency_pattern(4, &[(0, 2), (1, 3)]), DependencyPattern::FanOut);
        // one node with two children
        assert_eq!(dependency_pattern(3, &[(0, 1), (0, 2)]), DependencyPattern::FanOut);
        assert_eq!(dependency_pattern(1, &[]), DependencyPattern::Linear);
    }

    fn arb_template() -> impl Strategy<Value = WorkflowTemplate> {
        (1usize..6)
            .prop_flat_map(|n| {
                let names = prop::collection::vec("[A-Z][a-z]{1,6}(_[A-Z][a-z]{1,6})?", n);
                let deps = prop::collection::vec(
                    (prop::collection::vec(any::<bool>(), 5), "[a-z_]{1,8}", 0usize..3),
                    n,
                );
                (names, deps)
            })
            .prop_map(|(pattern, raw)| {
                let mut dependencies = BTreeMap::new();
                for (i, (mask, param, idx)) in raw.into_iter().enumerate().skip(1) {
                    let on: Vec<usize> = (0..i).filter(|&j| mask[j]).collect();
                    if on.is_empty() {
                        continue;
                    }
                    let mut args = BTreeMap::new();
                    args.insert(
                        param,
                        DependencyArg {
                            from_step: on[0],
                            from_field: parse_path(&format!("items[{idx}].id")).unwrap(),
                        },
                    );
                    dependencies.insert(
                        i,
                        StepDependency {
                            depends_on: on,
                            dependency_args: args,
                        },
                    );
                }
                WorkflowTemplate {
                    id: "t".into(),
                    pattern,
                    dependencies,
                    logic: None,
                }
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(t in arb_template()) {
            let back = parse_template(&t.serialize()).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn parsed_dependencies_form_a_partial_order(t in arb_template()) {
            let order = topo_order(t.len(), &t.edges());
            prop_assert!(order.is_some());
            for (j, i) in t.edges() {
                prop_assert!(j < i);
            }
        }
    }
}
