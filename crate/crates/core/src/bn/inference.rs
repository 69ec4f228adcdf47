//! Variable elimination with a min-fill ordering.

use std::collections::BTreeSet;

use super::factor::Factor;
use super::Network;
use crate::error::InferenceError;

/// Smallest evidence probability accepted before reporting underflow.
pub(crate) const UNDERFLOW_FLOOR: f64 = 1e-300;

pub(crate) fn posterior(net: &Network, evidence: &[Option<usize>], query: usize) -> Result<Vec<f64>, InferenceError> {
    let n = net.len();
    debug_assert_eq!(evidence.len(), n);

    // Only ancestors of the query and of observed variables matter; the
    // rest are barren and sum to one.
    let mut relevant = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| v == query || evidence[v].is_some()).collect();
    while let Some(v) = stack.pop() {
        if relevant[v] {
            continue;
        }
        relevant[v] = true;
        stack.extend(net.cpt(v).parents.iter().copied());
    }

    let mut factors: Vec<Factor> = (0..n)
        .filter(|&v| relevant[v])
        .map(|v| cpt_factor(net, v).restrict(evidence))
        .collect();

    let mut hidden: BTreeSet<usize> = (0..n)
        .filter(|&v| relevant[v] && v != query && evidence[v].is_none())
        .collect();

    while let Some(var) = next_min_fill(net, &factors, &hidden) {
        hidden.remove(&var);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(var));
        factors = rest;
        let merged = touching
            .iter()
            .fold(Factor::scalar(1.0), |acc, f| acc.product(f))
            .sum_out(var);
        factors.push(merged);
    }

    let result = factors.iter().fold(Factor::scalar(1.0), |acc, f| acc.product(f));

    let z: f64 = result.values.iter().sum();
    if z == 0.0 || z.is_nan() {
        return Err(InferenceError::Contradiction);
    }
    if z < UNDERFLOW_FLOOR {
        return Err(InferenceError::Underflow(z));
    }

    let k = net.variables()[query].cardinality();
    match evidence[query] {
        Some(s) => {
            let mut d = vec![0.0; k];
            d[s] = 1.0;
            Ok(d)
        }
        None => {
            debug_assert_eq!(result.vars, vec![query]);
            Ok(result.values.iter().map(|x| x / z).collect())
        }
    }
}

fn cpt_factor(net: &Network, v: usize) -> Factor {
    let cpt = net.cpt(v);
    let mut vars = cpt.parents.clone();
    vars.push(v);
    let cards = vars.iter().map(|&x| net.variables()[x].cardinality()).collect();
    Factor {
        vars,
        cards,
        values: cpt.table.clone(),
    }
}

/// Picks the hidden variable whose elimination adds the fewest fill edges;
/// ties go to the lexicographically smallest name.
fn next_min_fill(net: &Network, factors: &[Factor], hidden: &BTreeSet<usize>) -> Option<usize> {
    let mut best: Option<(usize, &str, usize)> = None;
    for &v in hidden {
        let mut neighbours = BTreeSet::new();
        for f in factors.iter().filter(|f| f.contains(v)) {
            neighbours.extend(f.vars.iter().copied().filter(|&x| x != v));
        }
        let nb: Vec<usize> = neighbours.into_iter().collect();
        let mut fill = 0;
        for i in 0..nb.len() {
            for j in i + 1..nb.len() {
                let adjacent = factors.iter().any(|f| f.contains(nb[i]) && f.contains(nb[j]));
                if !adjacent {
                    fill += 1;
                }
            }
        }
        let name = net.variables()[v].name.as_str();
        let better = match best {
            None => true,
            Some((bf, bn, _)) => fill < bf || (fill == bf && name < bn),
        };
        if better {
            best = Some((fill, name, v));
        }
    }
    best.map(|(_, _, v)| v)
}
