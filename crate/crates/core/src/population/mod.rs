//! Population-scale planning: members with cached posteriors, EU-ordered
//! allocation under operational limits, Monte Carlo outcome simulation and
//! parameter sweeps.

mod allocate;
mod simulate;
mod sweep;

pub use allocate::{
    allocate, national_baseline, top_eu_for_test, AllocationMode, AllocationResult, Assignment, OperationalLimits,
    StrategyCache,
};
pub use simulate::{analytic_sensitivity, detection_probability, simulate, Confusion, RunOutcome, SimulationReport};
pub use sweep::{benchmark_device, sweep_lambda, sweep_pe, DeviceBenchmark, LambdaSweepPoint, PeSweepPoint};

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bn::{Evidence, Network};
use crate::error::{Error, PopulationError};
use crate::par::{self, Exec};

/// State code for an unobserved variable.
pub const MISSING: u8 = u8::MAX;

/// Name of the optional ground-truth column in population files.
pub const TRUTH_COLUMN: &str = "true_crc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMember {
    pub id: u64,
    /// State index per network variable, [`MISSING`] when unobserved. The
    /// target slot is always [`MISSING`].
    pub states: Box<[u8]>,
    pub true_crc: Option<bool>,
    /// `p(CRC | states)`; 0 until [`Population::compute_posteriors`] runs.
    pub p_crc: f64,
}

impl PopulationMember {
    pub fn resolved(&self) -> Vec<Option<usize>> {
        self.states
            .iter()
            .map(|&s| (s != MISSING).then_some(usize::from(s)))
            .collect()
    }

    pub fn evidence(&self, net: &Network) -> Evidence {
        let mut ev = Evidence::new();
        for (v, &s) in self.states.iter().enumerate() {
            if s != MISSING {
                let var = &net.variables()[v];
                ev = ev.with(&var.name, &var.states[usize::from(s)]);
            }
        }
        ev
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// Network variable names, in network order.
    pub variables: Vec<String>,
    pub members: Vec<PopulationMember>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Fills `p_crc` for every member. Identical evidence patterns are
    /// inferred once.
    pub fn compute_posteriors(&mut self, net: &Network, exec: Exec) -> Result<(), Error> {
        self.check_network(net)?;
        let mut keys: HashMap<&[u8], usize> = HashMap::new();
        let mut unique: Vec<&PopulationMember> = Vec::new();
        let mut slot = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let next = unique.len();
            let k = *keys.entry(&m.states).or_insert_with(|| {
                unique.push(m);
                next
            });
            slot.push(k);
        }
        let target = net.target_index();
        let ts = net.target_state();
        let posts: Vec<Result<f64, Error>> = par::map(exec, &unique, |m| {
            let d = net.posterior_resolved(&m.resolved(), target)?;
            Ok(d[ts])
        });
        let posts: Vec<f64> = posts
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.map_err(|e| match e {
                    Error::Inference(inner) => Error::Population(PopulationError::Row {
                        row: unique[i].id as usize,
                        reason: inner.to_string(),
                    }),
                    other => other,
                })
            })
            .collect::<Result<_, _>>()?;
        for (m, k) in self.members.iter_mut().zip(slot) {
            m.p_crc = posts[k];
        }
        Ok(())
    }

    fn check_network(&self, net: &Network) -> Result<(), PopulationError> {
        let names: Vec<&str> = net.variables().iter().map(|v| v.name.as_str()).collect();
        if names != self.variables.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(PopulationError::Csv(
                "population variables do not match the model".into(),
            ));
        }
        Ok(())
    }

    /// Writes the population as CSV: one column per non-target variable
    /// (state labels, empty when missing), then `true_crc` if any member has it.
    pub fn write_csv<W: Write>(&self, net: &Network, out: W) -> Result<(), Error> {
        self.check_network(net)?;
        let target = net.target_index();
        let with_truth = self.members.iter().any(|m| m.true_crc.is_some());
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = net
            .variables()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target)
            .map(|(_, v)| v.name.as_str())
            .collect();
        if with_truth {
            header.push(TRUTH_COLUMN);
        }
        w.write_record(&header).map_err(csv_error)?;
        for m in &self.members {
            let mut row: Vec<&str> = Vec::with_capacity(header.len());
            for (v, &s) in m.states.iter().enumerate() {
                if v == target {
                    continue;
                }
                row.push(if s == MISSING {
                    ""
                } else {
                    &net.variables()[v].states[usize::from(s)]
                });
            }
            if with_truth {
                row.push(match m.true_crc {
                    Some(true) => "true",
                    Some(false) => "false",
                    None => "",
                });
            }
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a population CSV. Columns must be model variables (other than
    /// the target) or `true_crc`; members are numbered by row from 0.
    pub fn read_csv<R: Read>(net: &Network, input: R) -> Result<Self, Error> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(csv_error)?.clone();
        let target = net.target_index();
        enum Column {
            Var(usize),
            Truth,
        }
        let mut columns = Vec::with_capacity(header.len());
        for name in header.iter() {
            if name == TRUTH_COLUMN {
                columns.push(Column::Truth);
                continue;
            }
            match net.variable_index(name) {
                Some(v) if v != target => columns.push(Column::Var(v)),
                Some(_) => {
                    return Err(PopulationError::Csv(format!(
                        "target `{name}` cannot be a column; use `{TRUTH_COLUMN}`"
                    ))
                    .into())
                }
                None => return Err(PopulationError::Csv(format!("unknown column `{name}`")).into()),
            }
        }
        let mut members = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record.map_err(csv_error)?;
            let mut states = vec![MISSING; net.len()].into_boxed_slice();
            let mut truth = None;
            for (col, field) in columns.iter().zip(record.iter()) {
                if field.is_empty() {
                    continue;
                }
                match *col {
                    Column::Var(v) => {
                        let var = &net.variables()[v];
                        let s = var.state_index(field).ok_or_else(|| PopulationError::Row {
                            row,
                            reason: format!("variable `{}` has no state `{field}`", var.name),
                        })?;
                        states[v] = s as u8;
                    }
                    Column::Truth => {
                        truth = Some(parse_truth(field).ok_or_else(|| PopulationError::Row {
                            row,
                            reason: format!("`{field}` is not a truth value"),
                        })?);
                    }
                }
            }
            members.push(PopulationMember {
                id: row as u64,
                states,
                true_crc: truth,
                p_crc: 0.0,
            });
        }
        if members.is_empty() {
            return Err(PopulationError::EmptyPopulation.into());
        }
        Ok(Self {
            variables: net.variables().iter().map(|v| v.name.clone()).collect(),
            members,
        })
    }

    pub fn from_path(net: &Network, path: impl AsRef<std::path::Path>) -> Result<Self, Error> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(net, std::io::BufReader::new(f))
    }

    /// State index of `variable` for each member (`None` when missing).
    pub fn column(&self, variable: &str) -> Result<Vec<Option<usize>>, PopulationError> {
        let v = self
            .variables
            .iter()
            .position(|n| n == variable)
            .ok_or_else(|| PopulationError::MissingVariable(variable.to_owned()))?;
        Ok(self
            .members
            .iter()
            .map(|m| (m.states[v] != MISSING).then_some(usize::from(m.states[v])))
            .collect())
    }
}

fn parse_truth(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn csv_error(e: csv::Error) -> Error {
    PopulationError::Csv(e.to_string()).into()
}

/// Forward-samples `size` complete members from the network. Member `i` draws
/// from its own position in the keystream, so the result does not depend on
/// the execution mode. Posteriors are left uncomputed.
pub fn generate_population(net: &Network, size: usize, seed: u64, exec: Exec) -> Result<Population, Error> {
    if size == 0 {
        return Err(PopulationError::EmptyPopulation.into());
    }
    let target = net.target_index();
    let ts = net.target_state();
    let stride = (2 * net.len()).next_power_of_two() as u128;
    let members = par::map_range(exec, size, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        rng.set_word_pos(i as u128 * stride);
        let full = net.sample(&mut rng);
        let mut states: Box<[u8]> = full.iter().map(|&s| s as u8).collect();
        states[target] = MISSING;
        PopulationMember {
            id: i as u64,
            states,
            true_crc: Some(full[target] == ts),
            p_crc: 0.0,
        }
    });
    Ok(Population {
        variables: net.variables().iter().map(|v| v.name.clone()).collect(),
        members,
    })
}
