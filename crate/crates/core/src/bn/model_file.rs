use serde::{Deserialize, Serialize};

use super::{Network, Variable};
use crate::error::ModelError;

/// JSON model document.
///
/// ```json
/// {
///   "target": "CRC",
///   "target_state": "yes",
///   "variables": [
///     {"name": "Age", "states": ["young", "old"], "parents": [], "cpt": [0.6, 0.4]},
///     {"name": "CRC", "states": ["no", "yes"], "parents": ["Age"],
///      "cpt": [0.999, 0.001, 0.99, 0.01]}
///   ]
/// }
/// ```
///
/// `cpt[parent_index * |states| + state]`, last parent varying fastest.
/// `target_state` defaults to the last state of the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_state: Option<String>,
    pub variables: Vec<VariableRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableRecord {
    pub name: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    pub cpt: Vec<f64>,
}

impl ModelDocument {
    pub fn from_json_str(source: &str) -> Result<Self, ModelError> {
        serde_json::from_str(source).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialize")
    }

    pub fn into_network(self) -> Result<Network, ModelError> {
        let mut variables = Vec::with_capacity(self.variables.len());
        let mut parents = Vec::with_capacity(self.variables.len());
        let mut tables = Vec::with_capacity(self.variables.len());
        for r in self.variables {
            variables.push(Variable {
                name: r.name,
                states: r.states,
            });
            parents.push(r.parents);
            tables.push(r.cpt);
        }
        Network::new(variables, parents, tables, &self.target, self.target_state.as_deref())
    }

    pub fn from_network(net: &Network) -> Self {
        let variables = net
            .variables()
            .iter()
            .enumerate()
            .map(|(i, v)| VariableRecord {
                name: v.name.clone(),
                states: v.states.clone(),
                parents: net
                    .cpt(i)
                    .parents
                    .iter()
                    .map(|&p| net.variables()[p].name.clone())
                    .collect(),
                cpt: net.cpt(i).table.clone(),
            })
            .collect();
        let target = net.target();
        Self {
            target: target.name.clone(),
            target_state: Some(target.states[net.target_state()].clone()),
            variables,
        }
    }
}
