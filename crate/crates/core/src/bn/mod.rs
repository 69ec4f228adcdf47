//! Discrete Bayesian networks: model files, validation and exact queries.
//!
//! A [`Network`] is immutable once built and every query takes `&self`, so a
//! loaded model can be shared across threads freely.

mod factor;
mod inference;
mod model_file;

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{InferenceError, ModelError};

pub use model_file::{ModelDocument, VariableRecord};

/// Tolerance on the column sums of a conditional probability table.
pub const CPT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// Local distribution of `child` given `parents`.
///
/// `table[parent_index * |child| + child_state]`, where `parent_index`
/// enumerates parent-state combinations with the last parent varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: usize,
    pub parents: Vec<usize>,
    pub table: Vec<f64>,
}

/// Observed evidence for one patient.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(default)]
    pub assignments: BTreeMap<String, String>,
    /// Exogenous CRC probability replacing the inferred one.
    #[serde(default, alias = "priorOverride", skip_serializing_if = "Option::is_none")]
    pub prior_override: Option<f64>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, variable: &str, state: &str) -> Self {
        self.assignments.insert(variable.to_owned(), state.to_owned());
        self
    }

    pub fn with_override(mut self, p: f64) -> Self {
        self.prior_override = Some(p);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
    index: HashMap<String, usize>,
    topo: Vec<usize>,
    target: usize,
    target_state: usize,
}

impl Network {
    /// Builds and validates a network. `parents[i]` and `tables[i]` belong to
    /// `variables[i]`; parents are referenced by name.
    pub fn new(
        variables: Vec<Variable>,
        parents: Vec<Vec<String>>,
        tables: Vec<Vec<f64>>,
        target: &str,
        target_state: Option<&str>,
    ) -> Result<Self, ModelError> {
        assert_eq!(variables.len(), parents.len());
        assert_eq!(variables.len(), tables.len());

        let mut index = HashMap::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateVariable(v.name.clone()));
            }
            if v.states.len() < 2 {
                return Err(ModelError::TooFewStates(v.name.clone()));
            }
            for (j, s) in v.states.iter().enumerate() {
                if v.states[..j].contains(s) {
                    return Err(ModelError::DuplicateState {
                        variable: v.name.clone(),
                        state: s.clone(),
                    });
                }
            }
        }

        let mut cpts = Vec::with_capacity(variables.len());
        for (child, (names, table)) in parents.into_iter().zip(tables).enumerate() {
            let var = &variables[child];
            let mut ps = Vec::with_capacity(names.len());
            for p in &names {
                let &pi = index.get(p).ok_or_else(|| ModelError::DanglingParent {
                    variable: var.name.clone(),
                    parent: p.clone(),
                })?;
                if ps.contains(&pi) {
                    return Err(ModelError::RepeatedParent {
                        variable: var.name.clone(),
                        parent: p.clone(),
                    });
                }
                ps.push(pi);
            }
            let columns: usize = ps.iter().map(|&p| variables[p].cardinality()).product();
            let k = var.cardinality();
            if table.len() != columns * k {
                return Err(ModelError::CptLength {
                    variable: var.name.clone(),
                    expected: columns * k,
                    found: table.len(),
                });
            }
            if let Some(&bad) = table.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(ModelError::CptRange {
                    variable: var.name.clone(),
                    value: bad,
                });
            }
            for (column, chunk) in table.chunks(k).enumerate() {
                let sum: f64 = chunk.iter().sum();
                if (sum - 1.0).abs() > CPT_SUM_TOLERANCE {
                    return Err(ModelError::CptSum {
                        variable: var.name.clone(),
                        column,
                        sum,
                    });
                }
            }
            cpts.push(Cpt {
                child,
                parents: ps,
                table,
            });
        }

        let topo = topological_order(&variables, &cpts)?;

        let &t = index
            .get(target)
            .ok_or_else(|| ModelError::UnknownTarget(target.to_owned()))?;
        let target_state = match target_state {
            Some(s) => variables[t]
                .state_index(s)
                .ok_or_else(|| ModelError::UnknownTargetState {
                    target: target.to_owned(),
                    state: s.to_owned(),
                })?,
            None => variables[t].cardinality() - 1,
        };

        Ok(Self {
            variables,
            cpts,
            index,
            topo,
            target: t,
            target_state,
        })
    }

    pub fn from_json_str(source: &str) -> Result<Self, ModelError> {
        ModelDocument::from_json_str(source)?.into_network()
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, crate::Error> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_json_str(&text)?)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument::from_network(self)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.index.get(name).map(|&i| &self.variables[i])
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn cpt(&self, variable: usize) -> &Cpt {
        &self.cpts[variable]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn target(&self) -> &Variable {
        &self.variables[self.target]
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    /// Index of the "has CRC" state of the target.
    pub fn target_state(&self) -> usize {
        self.target_state
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// `P(child = state | parents = parent_states)`.
    pub fn conditional(&self, child: usize, full: &[usize]) -> f64 {
        let cpt = &self.cpts[child];
        let k = self.variables[child].cardinality();
        let mut column = 0;
        for &p in &cpt.parents {
            column = column * self.variables[p].cardinality() + full[p];
        }
        cpt.table[column * k + full[child]]
    }

    /// Probability of one complete assignment (state index per variable).
    pub fn joint_probability(&self, full: &[usize]) -> f64 {
        (0..self.variables.len()).map(|v| self.conditional(v, full)).product()
    }

    /// Maps named evidence onto state indices, one slot per variable.
    pub fn resolve(&self, evidence: &Evidence) -> Result<Vec<Option<usize>>, InferenceError> {
        let mut out = vec![None; self.variables.len()];
        for (name, state) in &evidence.assignments {
            let &v = self
                .index
                .get(name)
                .ok_or_else(|| InferenceError::UnknownVariable(name.clone()))?;
            let s = self.variables[v]
                .state_index(state)
                .ok_or_else(|| InferenceError::UnknownState {
                    variable: name.clone(),
                    state: state.clone(),
                })?;
            out[v] = Some(s);
        }
        if let Some(p) = evidence.prior_override {
            if !(p > 0.0 && p < 1.0) {
                return Err(InferenceError::InvalidOverride(p));
            }
        }
        Ok(out)
    }

    /// Posterior distribution of `query` given the evidence.
    ///
    /// A prior override replaces the target's posterior by
    /// `(override, 1 - override)` on the (has-CRC, other) states.
    pub fn posterior(&self, evidence: &Evidence, query: &str) -> Result<Vec<f64>, InferenceError> {
        let q = self
            .variable_index(query)
            .ok_or_else(|| InferenceError::UnknownVariable(query.to_owned()))?;
        let resolved = self.resolve(evidence)?;
        if let (Some(p), true) = (evidence.prior_override, q == self.target) {
            return Ok(self.override_distribution(p));
        }
        inference::posterior(self, &resolved, q)
    }

    /// Posterior from already-resolved evidence (no override handling).
    pub fn posterior_resolved(&self, evidence: &[Option<usize>], query: usize) -> Result<Vec<f64>, InferenceError> {
        inference::posterior(self, evidence, query)
    }

    /// `p(has CRC | evidence)`.
    pub fn posterior_crc(&self, evidence: &Evidence) -> Result<f64, InferenceError> {
        let dist = self.posterior(evidence, &self.variables[self.target].name.clone())?;
        Ok(dist[self.target_state])
    }

    fn override_distribution(&self, p: f64) -> Vec<f64> {
        let k = self.variables[self.target].cardinality();
        let mut dist = vec![0.0; k];
        dist[self.target_state] = p;
        // The remaining mass goes to the first non-target state.
        let other = if self.target_state == 0 { 1 } else { 0 };
        dist[other] = 1.0 - p;
        dist
    }

    /// Draws one complete assignment by ancestral sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut full = vec![0usize; self.variables.len()];
        for &v in &self.topo {
            let cpt = &self.cpts[v];
            let k = self.variables[v].cardinality();
            let mut column = 0;
            for &p in &cpt.parents {
                column = column * self.variables[p].cardinality() + full[p];
            }
            let probs = &cpt.table[column * k..column * k + k];
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = k - 1;
            for (s, &pr) in probs.iter().enumerate() {
                acc += pr;
                if u < acc {
                    pick = s;
                    break;
                }
            }
            full[v] = pick;
        }
        full
    }
}

fn topological_order(variables: &[Variable], cpts: &[Cpt]) -> Result<Vec<usize>, ModelError> {
    let n = variables.len();
    let mut indegree = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for cpt in cpts {
        indegree[cpt.child] = cpt.parents.len();
        for &p in &cpt.parents {
            children[p].push(cpt.child);
        }
    }
    // Kahn with a name-ordered frontier keeps the order deterministic.
    let mut ready: std::collections::BTreeSet<(&str, usize)> = (0..n)
        .filter(|&v| indegree[v] == 0)
        .map(|v| (variables[v].name.as_str(), v))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(first) = ready.iter().next().copied() {
        ready.remove(&first);
        let v = first.1;
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert((variables[c].name.as_str(), c));
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n)
            .filter(|&v| indegree[v] > 0)
            .map(|v| variables[v].name.clone())
            .min()
            .unwrap_or_default();
        return Err(ModelError::Cycle(stuck));
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Network {
        Network::from_json_str(
            r#"{
              "target": "B",
              "variables": [
                {"name": "A", "states": ["a0", "a1"], "parents": [], "cpt": [0.3, 0.7]},
                {"name": "B", "states": ["no", "yes"], "parents": ["A"], "cpt": [0.9, 0.1, 0.2, 0.8]}
              ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn minimal_chain_loads() {
        let net = chain();
        assert_eq!(net.len(), 2);
        assert_eq!(net.target().name, "B");
        assert_eq!(net.target_state(), 1);
    }

    #[test]
    fn empty_evidence_root_marginal_is_prior() {
        let net = chain();
        let d = net.posterior(&Evidence::new(), "A").unwrap();
        assert!((d[0] - 0.3).abs() < 1e-12 && (d[1] - 0.7).abs() < 1e-12);
        let b = net.posterior(&Evidence::new(), "B").unwrap();
        assert!((b[1] - (0.3 * 0.1 + 0.7 * 0.8)).abs() < 1e-12);
    }

    #[test]
    fn bad_column_sum_names_variable() {
        let err = Network::from_json_str(
            r#"{"target": "A", "variables": [
                {"name": "A", "states": ["x", "y"], "parents": [], "cpt": [0.5, 0.4]}
            ]}"#,
        )
        .unwrap_err();
        match err {
            ModelError::CptSum { variable, .. } => assert_eq!(variable, "A"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cycle_and_dangling_parent_rejected() {
        let cyc = Network::from_json_str(
            r#"{"target": "A", "variables": [
                {"name": "A", "states": ["x", "y"], "parents": ["B"], "cpt": [0.5, 0.5, 0.5, 0.5]},
                {"name": "B", "states": ["x", "y"], "parents": ["A"], "cpt": [0.5, 0.5, 0.5, 0.5]}
            ]}"#,
        )
        .unwrap_err();
        assert!(matches!(cyc, ModelError::Cycle(ref v) if v == "A"));

        let dangling = Network::from_json_str(
            r#"{"target": "A", "variables": [
                {"name": "A", "states": ["x", "y"], "parents": ["Z"], "cpt": [0.5, 0.5, 0.5, 0.5]}
            ]}"#,
        )
        .unwrap_err();
        assert!(matches!(dangling, ModelError::DanglingParent { ref parent, .. } if parent == "Z"));
    }

    #[test]
    fn malformed_document_is_parse_error() {
        assert!(matches!(
            Network::from_json_str("{ not json").unwrap_err(),
            ModelError::Parse(_)
        ));
    }

    #[test]
    fn override_replaces_target_posterior() {
        let net = chain();
        let ev = Evidence::new().with("A", "a1").with_override(0.1);
        assert_eq!(net.posterior_crc(&ev).unwrap(), 0.1);
        let d = net.posterior(&ev, "B").unwrap();
        assert_eq!(d, vec![0.9, 0.1]);
        // Non-target queries ignore the override.
        assert_eq!(net.posterior(&ev, "A").unwrap(), vec![0.0, 1.0]);
        assert!(net.posterior_crc(&Evidence::new().with_override(1.0)).is_err());
    }

    #[test]
    fn evidence_forces_point_mass() {
        let net = chain();
        let d = net.posterior(&Evidence::new().with("B", "yes"), "B").unwrap();
        assert_eq!(d, vec![0.0, 1.0]);
    }

    #[test]
    fn unknown_names_are_reported() {
        let net = chain();
        assert!(matches!(
            net.posterior(&Evidence::new().with("Q", "x"), "B"),
            Err(InferenceError::UnknownVariable(ref v)) if v == "Q"
        ));
        assert!(matches!(
            net.posterior(&Evidence::new().with("A", "zz"), "B"),
            Err(InferenceError::UnknownState { .. })
        ));
    }

    #[test]
    fn contradiction_distinct_from_underflow() {
        let net = Network::from_json_str(
            r#"{"target": "B", "variables": [
                {"name": "A", "states": ["x", "y"], "parents": [], "cpt": [1.0, 0.0]},
                {"name": "B", "states": ["no", "yes"], "parents": ["A"], "cpt": [0.5, 0.5, 0.5, 0.5]}
            ]}"#,
        )
        .unwrap();
        assert!(matches!(
            net.posterior(&Evidence::new().with("A", "y"), "B"),
            Err(InferenceError::Contradiction)
        ));
        let tiny = Network::from_json_str(
            r#"{"target": "B", "variables": [
                {"name": "A", "states": ["x", "y"], "parents": [], "cpt": [1.0, 1e-310]},
                {"name": "B", "states": ["no", "yes"], "parents": ["A"], "cpt": [0.5, 0.5, 0.5, 0.5]}
            ]}"#,
        )
        .unwrap();
        assert!(matches!(
            tiny.posterior(&Evidence::new().with("A", "y"), "B"),
            Err(InferenceError::Underflow(_))
        ));
    }
}
