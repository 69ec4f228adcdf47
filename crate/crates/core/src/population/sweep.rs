use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    allocate, simulate, AllocationMode, AllocationResult, OperationalLimits, Population, SimulationReport,
    StrategyCache,
};
use crate::error::{Error, PopulationError};
use crate::policy::{device_dominance, evaluate_all, rank, DeviceDominance, EvalOptions};
use crate::preference::PreferenceParams;
use crate::screening::{InterventionCatalog, InterventionId, InterventionSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeSweepPoint {
    pub pe_info: f64,
    pub pe_cost: f64,
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub counts: BTreeMap<InterventionId, u64>,
    pub total_screened: u64,
    /// Calibration failure at this point, if any; counts are then empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepPoint {
    pub lambdas: [f64; 4],
    pub counts: BTreeMap<InterventionId, u64>,
    pub total_screened: u64,
}

fn allocate_with(
    population: &Population,
    catalog: &InterventionCatalog,
    params: &PreferenceParams,
    limits: &OperationalLimits,
    options: EvalOptions,
) -> Result<AllocationResult, Error> {
    let cache = StrategyCache::build(population, catalog, params, options)?;
    Ok(allocate(population, &cache, limits, AllocationMode::Static))
}

/// Re-calibrates the utility with the PE point moved to each
/// `(info, cost)` of the grid and re-allocates. Points run in grid order,
/// info outermost.
pub fn sweep_pe(
    population: &Population,
    catalog: &InterventionCatalog,
    base: &PreferenceParams,
    limits: &OperationalLimits,
    pe_info_grid: &[f64],
    pe_cost_grid: &[f64],
    options: EvalOptions,
) -> Result<Vec<PeSweepPoint>, Error> {
    if pe_info_grid.is_empty() || pe_cost_grid.is_empty() {
        return Err(PopulationError::EmptyGrid.into());
    }
    let mut out = Vec::with_capacity(pe_info_grid.len() * pe_cost_grid.len());
    for &info in pe_info_grid {
        for &cost in pe_cost_grid {
            let mut p = base.clone();
            p.pe_anchor.info = info;
            p.pe_anchor.cost = cost;
            let point = match p.recalibrated() {
                Ok(p) => {
                    let r = allocate_with(population, catalog, &p, limits, options)?;
                    PeSweepPoint {
                        pe_info: info,
                        pe_cost: cost,
                        a: p.a,
                        b: p.b,
                        rho: p.rho,
                        total_screened: r.total_screened(),
                        counts: r.counts,
                        error: None,
                    }
                }
                Err(e) => PeSweepPoint {
                    pe_info: info,
                    pe_cost: cost,
                    a: f64::NAN,
                    b: f64::NAN,
                    rho: f64::NAN,
                    counts: BTreeMap::new(),
                    total_screened: 0,
                    error: Some(e.to_string()),
                },
            };
            out.push(point);
        }
    }
    Ok(out)
}

/// Re-allocates with each set of λ overrides (comfort level → λ) applied to
/// `base`; `(a, b, ρ)` stay fixed.
pub fn sweep_lambda(
    population: &Population,
    catalog: &InterventionCatalog,
    base: &PreferenceParams,
    limits: &OperationalLimits,
    overrides: &[BTreeMap<u8, f64>],
    options: EvalOptions,
) -> Result<Vec<LambdaSweepPoint>, Error> {
    if overrides.is_empty() {
        return Err(PopulationError::EmptyGrid.into());
    }
    overrides
        .iter()
        .map(|o| {
            let p = crate::preference::PreferenceOverrides {
                lambdas: o.clone(),
                ..Default::default()
            }
            .apply(base)?;
            let r = allocate_with(population, catalog, &p, limits, options)?;
            Ok(LambdaSweepPoint {
                lambdas: p.lambdas,
                total_screened: r.total_screened(),
                counts: r.counts,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceBenchmark {
    pub dominance: DeviceDominance,
    /// Best EU of the device's strategies at each requested prior.
    pub device_eu: Vec<(f64, f64)>,
    pub allocation: AllocationResult,
    pub simulation: SimulationReport,
}

/// Dominance check, catalog extension, re-allocation and re-simulation for
/// a new screening device.
#[allow(clippy::too_many_arguments)]
pub fn benchmark_device(
    device: InterventionSpec,
    population: &Population,
    catalog: &InterventionCatalog,
    params: &PreferenceParams,
    limits: &OperationalLimits,
    probe_priors: &[f64],
    runs: usize,
    seed: u64,
    options: EvalOptions,
) -> Result<DeviceBenchmark, Error> {
    let mut extended = catalog.clone();
    let id = device.id.clone();
    extended.insert(device)?;
    let dominance = device_dominance(&extended, &id)?;
    let device_eu = probe_priors
        .iter()
        .map(|&p| {
            let best = rank(evaluate_all(p, &extended, params, options)?)
                .into_iter()
                .find(|e| e.strategy.screening == id)
                .map(|e| e.expected_utility)
                .unwrap_or(f64::NAN);
            Ok((p, best))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let allocation = allocate_with(population, &extended, params, limits, options)?;
    let simulation = simulate(population, &allocation, &extended, runs, seed, options.exec)?;
    Ok(DeviceBenchmark {
        dominance,
        device_eu,
        allocation,
        simulation,
    })
}
