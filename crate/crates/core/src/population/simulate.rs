use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AllocationResult, Population};
use crate::error::{Error, PopulationError};
use crate::par::{self, Exec};
use crate::policy::Strategy;
use crate::screening::{Complication, InterventionCatalog, InterventionId, InterventionSpec, ResultState};

/// Members per accumulation chunk. Chunk sums are combined in order, so
/// totals do not depend on how chunks are scheduled.
const CHUNK: usize = 4096;
/// Keystream words reserved per member and run.
const WORDS_PER_MEMBER: u128 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tn: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tp: f64,
}

impl Confusion {
    pub fn total(&self) -> f64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.sensitivity());
        ratio(2.0 * p * r, p + r)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunOutcome {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
    pub total_cost: f64,
    pub colonoscopies: u64,
}

impl RunOutcome {
    fn add(&mut self, o: &RunOutcome) {
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tp += o.tp;
        self.total_cost += o.total_cost;
        self.colonoscopies += o.colonoscopies;
    }

    fn confusion(&self) -> Confusion {
        Confusion {
            tn: self.tn as f64,
            fp: self.fp as f64,
            fn_: self.fn_ as f64,
            tp: self.tp as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub runs: usize,
    pub seed: u64,
    pub population: usize,
    pub mean: Confusion,
    pub sd: Confusion,
    /// Metrics of the mean confusion matrix.
    pub sensitivity: f64,
    pub precision: f64,
    pub f1: f64,
    pub cost_per_patient: f64,
    pub cost_per_patient_sd: f64,
    pub per_run: Vec<RunOutcome>,
}

/// Sampling plan of one strategy.
struct Plan {
    screen: Option<Test>,
    col_if_positive: bool,
    col_if_negative: bool,
    direct_col: bool,
}

struct Test {
    sensitivity: f64,
    specificity: f64,
    cost: f64,
    complications: Vec<(f64, f64)>,
}

impl Test {
    fn new(spec: &InterventionSpec) -> Self {
        Self {
            sensitivity: spec.sensitivity,
            specificity: spec.specificity,
            cost: spec.unit_cost,
            complications: cumulative(&spec.complications),
        }
    }

    fn positive(&self, crc: bool, u: f64) -> bool {
        if crc {
            u < self.sensitivity
        } else {
            u >= self.specificity
        }
    }

    fn complication_cost(&self, u: f64) -> f64 {
        self.complications
            .iter()
            .find(|(cum, _)| u < *cum)
            .or(self.complications.last())
            .map_or(0.0, |c| c.1)
    }
}

fn cumulative(c: &[Complication]) -> Vec<(f64, f64)> {
    let mut acc = 0.0;
    c.iter()
        .map(|x| {
            acc += x.probability;
            (acc, x.cost)
        })
        .collect()
}

impl Plan {
    fn new(strategy: &Strategy, catalog: &InterventionCatalog) -> Result<Self, Error> {
        let spec = catalog.get(&strategy.screening)?;
        let screen = (spec.id != InterventionId::NoScreening).then(|| Test::new(spec));
        Ok(Self {
            direct_col: screen.is_none() && strategy.colonoscopy_after(ResultState::NoResult),
            col_if_positive: strategy.colonoscopy_after(ResultState::PredictedTrue),
            col_if_negative: strategy.colonoscopy_after(ResultState::PredictedFalse),
            screen,
        })
    }

    fn does_nothing(&self) -> bool {
        self.screen.is_none() && !self.direct_col
    }
}

/// Probability that a member with CRC is predicted positive under the
/// strategy (see [`simulate`] for the classification rule).
pub fn detection_probability(strategy: &Strategy, catalog: &InterventionCatalog) -> Result<f64, Error> {
    let spec = catalog.get(&strategy.screening)?;
    let col = catalog.colonoscopy().sensitivity;
    if spec.id == InterventionId::NoScreening {
        return Ok(if strategy.colonoscopy_after(ResultState::NoResult) {
            col
        } else {
            0.0
        });
    }
    let pos = if strategy.colonoscopy_after(ResultState::PredictedTrue) {
        col
    } else {
        1.0
    };
    let neg = if strategy.colonoscopy_after(ResultState::PredictedFalse) {
        col
    } else {
        0.0
    };
    Ok(spec.sensitivity * pos + (1.0 - spec.sensitivity) * neg)
}

/// Expected sensitivity of an allocation: mean detection probability over
/// members with CRC (weighted by `p_crc` where the truth is unknown).
pub fn analytic_sensitivity(
    population: &Population,
    allocation: &AllocationResult,
    catalog: &InterventionCatalog,
) -> Result<f64, Error> {
    check_alignment(population, allocation)?;
    let mut cache: HashMap<&Strategy, f64> = HashMap::new();
    let (mut num, mut den) = (0.0, 0.0);
    for (m, a) in population.members.iter().zip(&allocation.assignments) {
        let w = match m.true_crc {
            Some(t) => f64::from(u8::from(t)),
            None => m.p_crc,
        };
        if w == 0.0 {
            continue;
        }
        let d = match cache.get(&a.strategy) {
            Some(&d) => d,
            None => {
                let d = detection_probability(&a.strategy, catalog)?;
                cache.insert(&a.strategy, d);
                d
            }
        };
        num += w * d;
        den += w;
    }
    Ok(ratio(num, den))
}

fn check_alignment(population: &Population, allocation: &AllocationResult) -> Result<(), PopulationError> {
    let aligned = population.len() == allocation.assignments.len()
        && population
            .members
            .iter()
            .zip(&allocation.assignments)
            .all(|(m, a)| m.id == a.member);
    if aligned {
        Ok(())
    } else {
        Err(PopulationError::Csv("allocation does not match the population".into()))
    }
}

/// Monte Carlo outcomes of an allocation.
///
/// Per run and member: CRC is the member's truth (or drawn from `p_crc`),
/// the screening result follows sensitivity and specificity, the colonoscopy
/// rule is applied, and complications are drawn. A member counts as
/// predicted CRC when a colonoscopy ran and was positive, or when the
/// screening was positive and the strategy does no colonoscopy after a
/// positive result. Run `r`, member `i` draws from stream `r + 1` at word
/// `16 i` of a ChaCha8 generator seeded with `seed`, so results are
/// identical for any thread count.
pub fn simulate(
    population: &Population,
    allocation: &AllocationResult,
    catalog: &InterventionCatalog,
    runs: usize,
    seed: u64,
    exec: Exec,
) -> Result<SimulationReport, Error> {
    if population.is_empty() {
        return Err(PopulationError::EmptyPopulation.into());
    }
    check_alignment(population, allocation)?;
    let mut plans: Vec<Plan> = Vec::new();
    let mut plan_index: HashMap<&Strategy, u16> = HashMap::new();
    let mut member_plan = Vec::with_capacity(population.len());
    for a in &allocation.assignments {
        let k = match plan_index.get(&a.strategy) {
            Some(&k) => k,
            None => {
                plans.push(Plan::new(&a.strategy, catalog)?);
                let k = (plans.len() - 1) as u16;
                plan_index.insert(&a.strategy, k);
                k
            }
        };
        member_plan.push(k);
    }
    let col = Test::new(catalog.colonoscopy());
    let chunks = population.len().div_ceil(CHUNK);
    let members = &population.members;

    let partials = par::map_range(exec, runs * chunks, |task| {
        let (run, chunk) = (task / chunks, task % chunks);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run as u64 + 1);
        let mut out = RunOutcome::default();
        let lo = chunk * CHUNK;
        let hi = (lo + CHUNK).min(members.len());
        for i in lo..hi {
            let m = &members[i];
            let plan = &plans[usize::from(member_plan[i])];
            if plan.does_nothing() {
                if let Some(t) = m.true_crc {
                    if t {
                        out.fn_ += 1;
                    } else {
                        out.tn += 1;
                    }
                    continue;
                }
            }
            rng.set_word_pos(i as u128 * WORDS_PER_MEMBER);
            let u: [f64; 5] = std::array::from_fn(|_| rng.gen());
            let crc = m.true_crc.unwrap_or(u[0] < m.p_crc);
            let mut cost = 0.0;
            let (colonoscopy, screen_positive) = match &plan.screen {
                None => (plan.direct_col, false),
                Some(t) => {
                    let pos = t.positive(crc, u[1]);
                    cost += t.cost + t.complication_cost(u[2]);
                    (
                        if pos {
                            plan.col_if_positive
                        } else {
                            plan.col_if_negative
                        },
                        pos,
                    )
                }
            };
            let predicted = if colonoscopy {
                out.colonoscopies += 1;
                cost += col.cost + col.complication_cost(u[4]);
                col.positive(crc, u[3])
            } else {
                screen_positive
            };
            match (crc, predicted) {
                (false, false) => out.tn += 1,
                (false, true) => out.fp += 1,
                (true, false) => out.fn_ += 1,
                (true, true) => out.tp += 1,
            }
            out.total_cost += cost;
        }
        out
    });

    let per_run: Vec<RunOutcome> = partials
        .chunks(chunks.max(1))
        .map(|c| {
            let mut r = RunOutcome::default();
            for p in c {
                r.add(p);
            }
            r
        })
        .collect();
    Ok(summarize(per_run, runs, seed, population.len()))
}

fn summarize(per_run: Vec<RunOutcome>, runs: usize, seed: u64, n: usize) -> SimulationReport {
    let field = |f: fn(&RunOutcome) -> f64| -> (f64, f64) { mean_sd(per_run.iter().map(f)) };
    let (tn, tn_sd) = field(|r| r.tn as f64);
    let (fp, fp_sd) = field(|r| r.fp as f64);
    let (fn_, fn_sd) = field(|r| r.fn_ as f64);
    let (tp, tp_sd) = field(|r| r.tp as f64);
    let (cost, cost_sd) = mean_sd(per_run.iter().map(|r| r.total_cost / n as f64));
    let mean = Confusion { tn, fp, fn_, tp };
    debug_assert!(per_run.iter().all(|r| r.confusion().total() as usize == n));
    SimulationReport {
        runs,
        seed,
        population: n,
        mean,
        sd: Confusion {
            tn: tn_sd,
            fp: fp_sd,
            fn_: fn_sd,
            tp: tp_sd,
        },
        sensitivity: mean.sensitivity(),
        precision: mean.precision(),
        f1: mean.f1(),
        cost_per_patient: cost,
        cost_per_patient_sd: cost_sd,
        per_run,
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
