use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::Json;
use serde::{Deserialize, Serialize};

use screenwise_core::info::{entropy, linear_grid, v_info_curve};
use screenwise_core::policy::{
    device_dominance, evaluate_all, rank, recommendation_report, ComplicationMode, DeviceDominance, EvalOptions,
    RecommendationReport,
};
use screenwise_core::population::{benchmark_device as run_benchmark, DeviceBenchmark, OperationalLimits};
use screenwise_core::preference::PreferenceOverrides;
use screenwise_core::{Evidence, InterventionId, InterventionSpec};

use crate::error::ApiError;
use crate::jobs::{load_population, PopulationRef};
use crate::AppState;

type Shared = State<Arc<AppState>>;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct PosteriorResponse {
    pub p_crc: f64,
    pub entropy: f64,
}

pub async fn posterior(State(s): Shared, Json(ev): Json<Evidence>) -> Result<Json<PosteriorResponse>, ApiError> {
    let p = s.network.posterior_crc(&ev)?;
    Ok(Json(PosteriorResponse {
        p_crc: p,
        entropy: entropy(p),
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct RecommendRequest {
    pub evidence: Option<Evidence>,
    pub p_crc: Option<f64>,
    pub overrides: PreferenceOverrides,
    pub top_k: Option<usize>,
    pub complication_mode: ComplicationMode,
}

pub async fn recommend(
    State(s): Shared,
    Json(req): Json<RecommendRequest>,
) -> Result<Json<RecommendationReport>, ApiError> {
    let p = match (&req.evidence, req.p_crc) {
        (Some(ev), None) => s.network.posterior_crc(ev)?,
        (None, Some(p)) => p,
        _ => return Err(ApiError::bad_request("give exactly one of `evidence` and `pCrc`")),
    };
    let params = req.overrides.apply(&s.params)?;
    let options = EvalOptions {
        mode: req.complication_mode,
        ..Default::default()
    };
    let report = tokio::task::spawn_blocking(move || recommendation_report(p, &s.catalog, &params, req.top_k, options))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(report))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BenchmarkRequest {
    pub device: InterventionSpec,
    /// Priors at which the device's best EU is reported.
    #[serde(default = "default_probes")]
    pub probe_priors: Vec<f64>,
    /// With a population the device is also allocated and simulated.
    #[serde(default)]
    pub population: Option<PopulationRef>,
    #[serde(default)]
    pub limits: Option<OperationalLimits>,
    #[serde(default)]
    pub overrides: PreferenceOverrides,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_probes() -> Vec<f64> {
    vec![0.00085]
}

fn default_runs() -> usize {
    100
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct BenchmarkResponse {
    pub dominance: DeviceDominance,
    pub device_eu: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population: Option<DeviceBenchmark>,
}

pub async fn benchmark_device(
    State(s): Shared,
    Json(req): Json<BenchmarkRequest>,
) -> Result<Json<BenchmarkResponse>, ApiError> {
    let params = req.overrides.apply(&s.params)?;
    let out = tokio::task::spawn_blocking(move || -> Result<BenchmarkResponse, ApiError> {
        let options = EvalOptions::default();
        if let Some(r) = &req.population {
            let pop = load_population(&s, r)?;
            let limits = req.limits.unwrap_or_else(OperationalLimits::reference);
            let b = run_benchmark(
                req.device,
                &pop,
                &s.catalog,
                &params,
                &limits,
                &req.probe_priors,
                req.runs,
                req.seed,
                options,
            )?;
            return Ok(BenchmarkResponse {
                dominance: b.dominance.clone(),
                device_eu: b.device_eu.clone(),
                population: Some(b),
            });
        }
        let mut catalog = (*s.catalog).clone();
        let id = req.device.id.clone();
        catalog.insert(req.device)?;
        let dominance = device_dominance(&catalog, &id)?;
        let device_eu = req
            .probe_priors
            .iter()
            .map(|&p| {
                let best = rank(evaluate_all(p, &catalog, &params, options)?)
                    .into_iter()
                    .find(|e| e.strategy.screening == id)
                    .map_or(f64::NAN, |e| e.expected_utility);
                Ok((p, best))
            })
            .collect::<Result<Vec<_>, screenwise_core::Error>>()?;
        Ok(BenchmarkResponse {
            dominance,
            device_eu,
            population: None,
        })
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
pub struct CurveQuery {
    #[serde(default)]
    pub methods: String,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
}

fn default_points() -> usize {
    101
}

fn default_lo() -> f64 {
    0.0001
}

fn default_hi() -> f64 {
    0.55
}

pub const MAX_CURVE_POINTS: usize = 10_000;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CurvesResponse {
    /// Method → `(p, value)` pairs.
    pub curves: BTreeMap<String, Vec<(f64, f64)>>,
}

pub async fn curves(State(s): Shared, Query(q): Query<CurveQuery>) -> Result<Json<CurvesResponse>, ApiError> {
    let methods: Vec<&str> = q.methods.split(',').map(str::trim).filter(|m| !m.is_empty()).collect();
    if methods.is_empty() {
        return Err(ApiError::bad_request("`methods` must list at least one method"));
    }
    if q.points == 0 || q.points > MAX_CURVE_POINTS {
        return Err(ApiError::bad_request(format!(
            "`points` must be in 1..={MAX_CURVE_POINTS}"
        )));
    }
    if !(q.lo > 0.0 && q.lo <= q.hi && q.hi < 1.0) {
        return Err(ApiError::bad_request("need 0 < lo ≤ hi < 1"));
    }
    let grid = linear_grid(q.lo, q.hi, q.points);
    let mut curves = BTreeMap::new();
    for m in methods {
        let spec = s.catalog.get(&InterventionId::from(m))?;
        curves.insert(m.to_owned(), v_info_curve(spec, &grid)?);
    }
    Ok(Json(CurvesResponse { curves }))
}
