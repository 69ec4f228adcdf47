use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Population;
use crate::bn::Network;
use crate::error::{Error, PopulationError};
use crate::par;
use crate::policy::{enumerate_strategies, evaluate_all, rank, ColRule, EvalOptions, Strategy};
use crate::preference::PreferenceParams;
use crate::screening::{InterventionCatalog, InterventionId};

/// Per-intervention caps on the number of administered tests. Interventions
/// without an entry are unlimited; colonoscopies after a screening result are
/// never counted, and no screening never runs out.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OperationalLimits {
    pub caps: BTreeMap<InterventionId, u64>,
}

impl OperationalLimits {
    pub fn unlimited() -> Self {
        Self::default()
    }

    /// Capacities of the reference national programme.
    pub fn reference() -> Self {
        Self::unlimited()
            .with(InterventionId::Colonoscopy, 3000)
            .with(InterventionId::Gfobt, 30_000)
            .with(InterventionId::Fit, 42_000)
            .with(InterventionId::BloodBased, 7000)
            .with(InterventionId::Sdna, 6000)
            .with(InterventionId::Ctc, 2000)
            .with(InterventionId::Cc, 2000)
    }

    /// Every intervention of the catalog capped at zero.
    pub fn zero(catalog: &InterventionCatalog) -> Self {
        let mut l = Self::unlimited();
        for s in catalog.specs() {
            if s.id != InterventionId::NoScreening {
                l.caps.insert(s.id.clone(), 0);
            }
        }
        l
    }

    pub fn with(mut self, id: InterventionId, cap: u64) -> Self {
        self.caps.insert(id, cap);
        self
    }

    pub fn cap(&self, id: &InterventionId) -> Option<u64> {
        if *id == InterventionId::NoScreening {
            None
        } else {
            self.caps.get(id).copied()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMode {
    /// Members are processed once, in order of unconstrained best EU; an
    /// exhausted method is replaced by the member's next best.
    #[default]
    Static,
    /// At every step the member with the highest EU among still-available
    /// methods is served next.
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub member: u64,
    pub strategy: Strategy,
    pub expected_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    /// One entry per member, in population order.
    pub assignments: Vec<Assignment>,
    /// Members per resource, `NoScreening` included.
    pub counts: BTreeMap<InterventionId, u64>,
    pub exhausted: BTreeSet<InterventionId>,
}

impl AllocationResult {
    pub fn count(&self, id: &InterventionId) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    /// Members receiving any test or direct colonoscopy.
    pub fn total_screened(&self) -> u64 {
        self.counts
            .iter()
            .filter(|(id, _)| **id != InterventionId::NoScreening)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn mean_expected_utility(&self) -> f64 {
        self.assignments.iter().map(|a| a.expected_utility).sum::<f64>() / self.assignments.len() as f64
    }

    fn from_assignments(assignments: Vec<Assignment>, exhausted: BTreeSet<InterventionId>) -> Self {
        let mut counts = BTreeMap::new();
        for a in &assignments {
            *counts.entry(a.strategy.resource()).or_insert(0) += 1;
        }
        Self {
            assignments,
            counts,
            exhausted,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Ranked {
    strategy: u16,
    eu: f64,
}

/// Ranked strategy lists per distinct posterior value of a population.
#[derive(Debug, Clone)]
pub struct StrategyCache {
    strategies: Vec<Strategy>,
    resources: Vec<InterventionId>,
    ranked: HashMap<u64, Arc<[Ranked]>>,
}

impl StrategyCache {
    pub fn build(
        population: &Population,
        catalog: &InterventionCatalog,
        params: &PreferenceParams,
        options: EvalOptions,
    ) -> Result<Self, Error> {
        if population.is_empty() {
            return Err(PopulationError::EmptyPopulation.into());
        }
        let strategies = enumerate_strategies(catalog);
        let index: HashMap<&Strategy, u16> = strategies.iter().enumerate().map(|(i, s)| (s, i as u16)).collect();
        let mut ps: Vec<u64> = population.members.iter().map(|m| m.p_crc.to_bits()).collect();
        ps.sort_unstable();
        ps.dedup();
        let inner = EvalOptions {
            exec: par::Exec::Sequential,
            ..options
        };
        let lists = par::map(options.exec, &ps, |&bits| {
            evaluate_all(f64::from_bits(bits), catalog, params, inner).map(|e| {
                rank(e)
                    .into_iter()
                    .map(|e| Ranked {
                        strategy: index[&e.strategy],
                        eu: e.expected_utility,
                    })
                    .collect::<Arc<[Ranked]>>()
            })
        });
        let mut ranked = HashMap::with_capacity(ps.len());
        for (bits, list) in ps.into_iter().zip(lists) {
            ranked.insert(bits, list?);
        }
        Ok(Self {
            resources: strategies.iter().map(Strategy::resource).collect(),
            strategies,
            ranked,
        })
    }

    fn list(&self, p: f64) -> &[Ranked] {
        &self.ranked[&p.to_bits()]
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    /// Best strategy for a posterior among resources passing `available`.
    fn best(&self, p: f64, available: impl Fn(&InterventionId) -> bool) -> Option<Ranked> {
        self.list(p)
            .iter()
            .find(|r| available(&self.resources[usize::from(r.strategy)]))
            .copied()
    }

    /// EU of a given strategy at a posterior present in the cache.
    pub fn expected_utility(&self, p: f64, strategy: &Strategy) -> Option<f64> {
        self.list(p)
            .iter()
            .find(|r| &self.strategies[usize::from(r.strategy)] == strategy)
            .map(|r| r.eu)
    }

    /// Unconstrained best strategy and EU.
    pub fn best_unconstrained(&self, p: f64) -> (&Strategy, f64) {
        let r = self.list(p)[0];
        (&self.strategies[usize::from(r.strategy)], r.eu)
    }
}

/// Tracks usage against limits.
struct Budget<'a> {
    limits: &'a OperationalLimits,
    used: BTreeMap<InterventionId, u64>,
    exhausted: BTreeSet<InterventionId>,
}

impl<'a> Budget<'a> {
    fn new(limits: &'a OperationalLimits) -> Self {
        let exhausted = limits
            .caps
            .iter()
            .filter(|(id, cap)| **cap == 0 && **id != InterventionId::NoScreening)
            .map(|(id, _)| id.clone())
            .collect();
        Self {
            limits,
            used: BTreeMap::new(),
            exhausted,
        }
    }

    fn available(&self, id: &InterventionId) -> bool {
        !self.exhausted.contains(id)
    }

    fn take(&mut self, id: &InterventionId) {
        let n = self.used.entry(id.clone()).or_insert(0);
        *n += 1;
        if let Some(cap) = self.limits.cap(id) {
            if *n >= cap {
                self.exhausted.insert(id.clone());
            }
        }
    }
}

struct HeapEntry {
    eu: f64,
    member: usize,
    id: u64,
    strategy: u16,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Higher EU first, then lower member id.
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.eu.total_cmp(&other.eu).then(other.id.cmp(&self.id))
    }
}

/// Greedy EU-ordered allocation under operational limits. The population
/// must have posteriors computed and the cache must be built from it.
pub fn allocate(
    population: &Population,
    cache: &StrategyCache,
    limits: &OperationalLimits,
    mode: AllocationMode,
) -> AllocationResult {
    let n = population.len();
    let mut budget = Budget::new(limits);
    let mut chosen: Vec<Option<Ranked>> = vec![None; n];
    let members = &population.members;
    match mode {
        AllocationMode::Static => {
            let mut order: Vec<(f64, u64, usize)> = members
                .iter()
                .enumerate()
                .map(|(i, m)| (cache.best_unconstrained(m.p_crc).1, m.id, i))
                .collect();
            order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for (_, _, i) in order {
                let r = cache
                    .best(members[i].p_crc, |id| budget.available(id))
                    .expect("no screening is always available");
                budget.take(&cache.resources[usize::from(r.strategy)]);
                chosen[i] = Some(r);
            }
        }
        AllocationMode::Dynamic => {
            let mut heap: BinaryHeap<HeapEntry> = members
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let r = cache
                        .best(m.p_crc, |id| budget.available(id))
                        .expect("no screening is always available");
                    HeapEntry {
                        eu: r.eu,
                        member: i,
                        id: m.id,
                        strategy: r.strategy,
                    }
                })
                .collect();
            while let Some(e) = heap.pop() {
                let resource = &cache.resources[usize::from(e.strategy)];
                if budget.available(resource) {
                    budget.take(resource);
                    chosen[e.member] = Some(Ranked {
                        strategy: e.strategy,
                        eu: e.eu,
                    });
                } else {
                    // Stale entry: re-queue at the member's current best.
                    let r = cache
                        .best(members[e.member].p_crc, |id| budget.available(id))
                        .expect("no screening is always available");
                    heap.push(HeapEntry {
                        eu: r.eu,
                        strategy: r.strategy,
                        ..e
                    });
                }
            }
        }
    }
    let assignments = members
        .iter()
        .zip(chosen)
        .map(|(m, r)| {
            let r = r.expect("every member is assigned");
            Assignment {
                member: m.id,
                strategy: cache.strategies[usize::from(r.strategy)].clone(),
                expected_utility: r.eu,
            }
        })
        .collect();
    AllocationResult::from_assignments(assignments, budget.exhausted)
}

fn fixed_assignment(
    population: &Population,
    cache: &StrategyCache,
    pick: impl Fn(usize) -> bool,
    strategy: &Strategy,
) -> AllocationResult {
    let none = Strategy::no_screening(false);
    let assignments = population
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let s = if pick(i) { strategy } else { &none };
            Assignment {
                member: m.id,
                strategy: s.clone(),
                expected_utility: cache.expected_utility(m.p_crc, s).unwrap_or(f64::NAN),
            }
        })
        .collect();
    AllocationResult::from_assignments(assignments, BTreeSet::new())
}

/// Age-based programme: members whose `variable` state is in `band` get
/// `test` with colonoscopy after a positive result; everyone else is not
/// screened. Members with the variable missing are not screened.
pub fn national_baseline(
    population: &Population,
    net: &Network,
    cache: &StrategyCache,
    variable: &str,
    band: &[String],
    test: &InterventionId,
) -> Result<AllocationResult, Error> {
    let column = population.column(variable)?;
    let var = net
        .variable(variable)
        .ok_or_else(|| PopulationError::MissingVariable(variable.to_owned()))?;
    let states: Vec<usize> = band
        .iter()
        .map(|s| {
            var.state_index(s).ok_or_else(|| {
                Error::from(crate::error::InferenceError::UnknownState {
                    variable: variable.to_owned(),
                    state: s.clone(),
                })
            })
        })
        .collect::<Result<_, _>>()?;
    let strategy = Strategy::test(test.clone(), ColRule::IF_POSITIVE);
    Ok(fixed_assignment(
        population,
        cache,
        |i| column[i].is_some_and(|s| states.contains(&s)),
        &strategy,
    ))
}

/// The `budget` members with the highest EU for `test` with colonoscopy
/// after a positive result receive it (ties by member id).
pub fn top_eu_for_test(
    population: &Population,
    cache: &StrategyCache,
    test: &InterventionId,
    budget: usize,
) -> Result<AllocationResult, Error> {
    let strategy = Strategy::test(test.clone(), ColRule::IF_POSITIVE);
    let mut scored: Vec<(f64, u64, usize)> = population
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            cache
                .expected_utility(m.p_crc, &strategy)
                .map(|eu| (eu, m.id, i))
                .ok_or_else(|| crate::error::CatalogError::Unknown(test.to_string()).into())
        })
        .collect::<Result<_, Error>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut pick = vec![false; population.len()];
    for &(_, _, i) in scored.iter().take(budget) {
        pick[i] = true;
    }
    Ok(fixed_assignment(population, cache, |i| pick[i], &strategy))
}
