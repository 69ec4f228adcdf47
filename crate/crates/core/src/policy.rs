//! Screening strategies, their expected utility, recommendations and
//! intervention dominance.
//!
//! A strategy is a screening choice plus a rule deciding colonoscopy from the
//! screening result. Its expected utility is computed exactly from the finite
//! outcome tree: CRC, screening result, screening complication, colonoscopy
//! result and colonoscopy complication. The information entering the value
//! node of a branch is the expected `v_info` given the observed screening
//! result and colonoscopy decision, not the unobservable pointwise value.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, InfoError};
use crate::info::{entropy, single_test_info, InfoModel};
use crate::par::{self, Exec};
use crate::preference::PreferenceParams;
use crate::screening::{
    combined_comfort, Complication, InterventionCatalog, InterventionId, InterventionSpec, ResultState,
};

/// Colonoscopy decision as a function of the screening result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColRule {
    /// The only rule for no screening: one flag, no result to condition on.
    Unconditional {
        colonoscopy: bool,
    },
    ByResult {
        if_positive: bool,
        if_negative: bool,
    },
}

impl ColRule {
    pub const NEVER: ColRule = ColRule::ByResult {
        if_positive: false,
        if_negative: false,
    };
    pub const IF_POSITIVE: ColRule = ColRule::ByResult {
        if_positive: true,
        if_negative: false,
    };
    pub const IF_NEGATIVE: ColRule = ColRule::ByResult {
        if_positive: false,
        if_negative: true,
    };
    pub const ALWAYS: ColRule = ColRule::ByResult {
        if_positive: true,
        if_negative: true,
    };

    pub fn colonoscopy(self, result: ResultState) -> bool {
        match (self, result) {
            (ColRule::Unconditional { colonoscopy }, _) => colonoscopy,
            (ColRule::ByResult { if_positive, .. }, ResultState::PredictedTrue) => if_positive,
            (ColRule::ByResult { if_negative, .. }, ResultState::PredictedFalse) => if_negative,
            (ColRule::ByResult { .. }, ResultState::NoResult) => false,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ColRule::Unconditional { colonoscopy: false } => "none",
            ColRule::Unconditional { colonoscopy: true } => "col",
            ColRule::ByResult {
                if_positive: false,
                if_negative: false,
            } => "never-col",
            ColRule::ByResult {
                if_positive: true,
                if_negative: false,
            } => "col-if-positive",
            ColRule::ByResult {
                if_positive: false,
                if_negative: true,
            } => "col-if-negative",
            ColRule::ByResult {
                if_positive: true,
                if_negative: true,
            } => "always-col",
        }
    }

    fn from_label(s: &str) -> Option<Self> {
        [
            ColRule::Unconditional { colonoscopy: false },
            ColRule::Unconditional { colonoscopy: true },
            ColRule::NEVER,
            ColRule::IF_POSITIVE,
            ColRule::IF_NEGATIVE,
            ColRule::ALWAYS,
        ]
        .into_iter()
        .find(|r| r.label() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Strategy {
    pub screening: InterventionId,
    pub rule: ColRule,
}

impl Strategy {
    pub fn no_screening(colonoscopy: bool) -> Self {
        Self {
            screening: InterventionId::NoScreening,
            rule: ColRule::Unconditional { colonoscopy },
        }
    }

    pub fn test(id: InterventionId, rule: ColRule) -> Self {
        Self { screening: id, rule }
    }

    /// The limited resource this strategy consumes: the screening test, or
    /// `Colonoscopy` for direct colonoscopy, or `NoScreening`.
    pub fn resource(&self) -> InterventionId {
        match (&self.screening, self.rule) {
            (InterventionId::NoScreening, ColRule::Unconditional { colonoscopy: true }) => InterventionId::Colonoscopy,
            (id, _) => id.clone(),
        }
    }

    pub fn colonoscopy_after(&self, result: ResultState) -> bool {
        self.rule.colonoscopy(result)
    }

    /// Checks that the rule matches the reachable results of the screening.
    pub fn validate(&self, catalog: &InterventionCatalog) -> Result<(), Error> {
        let spec = catalog.get(&self.screening)?;
        let ok = match self.rule {
            ColRule::Unconditional { .. } => spec.id == InterventionId::NoScreening,
            ColRule::ByResult { .. } => spec.id.is_test(),
        };
        if ok {
            Ok(())
        } else {
            Err(crate::error::CatalogError::Invalid {
                id: self.screening.to_string(),
                reason: format!("rule {} does not fit this intervention", self.rule.label()),
            }
            .into())
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.screening, self.rule.label())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    /// Parses `ID/rule`, e.g. `FIT/col-if-positive` or `NoScreening/none`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (id, rule) = s
            .split_once('/')
            .ok_or_else(|| format!("strategy `{s}` is not of the form ID/rule"))?;
        let id: InterventionId = id.parse().map_err(|e| format!("{e}"))?;
        let rule = ColRule::from_label(rule).ok_or_else(|| format!("unknown colonoscopy rule `{rule}`"))?;
        let valid = matches!(rule, ColRule::Unconditional { .. }) == (id == InterventionId::NoScreening);
        if !valid {
            return Err(format!("rule `{}` does not fit `{id}`", rule.label()));
        }
        Ok(Self { screening: id, rule })
    }
}

/// How complication costs enter the utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplicationMode {
    /// A chance node: the utility sees each realized complication cost.
    #[default]
    InsideUtility,
    /// Complications collapse to their expected cost before the utility.
    ExpectedCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalOptions {
    pub mode: ComplicationMode,
    pub exec: Exec,
}

/// Expected utility of one screening-result branch under both colonoscopy
/// decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchEu {
    pub result: ResultState,
    pub probability: f64,
    pub eu_no_col: f64,
    pub eu_col: f64,
    /// Decision the strategy takes on this branch.
    pub colonoscopy: bool,
}

impl BranchEu {
    pub fn chosen(&self) -> f64 {
        if self.colonoscopy {
            self.eu_col
        } else {
            self.eu_no_col
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyEvaluation {
    pub strategy: Strategy,
    pub label: String,
    pub expected_utility: f64,
    pub branches: Vec<BranchEu>,
    pub expected_cost: f64,
    pub expected_info: f64,
}

impl StrategyEvaluation {
    pub fn branch(&self, result: ResultState) -> Option<&BranchEu> {
        self.branches.iter().find(|b| b.result == result)
    }
}

/// All strategies: no screening with and without colonoscopy, and each test
/// with the four result-conditional rules.
pub fn enumerate_strategies(catalog: &InterventionCatalog) -> Vec<Strategy> {
    let mut out = vec![Strategy::no_screening(false), Strategy::no_screening(true)];
    for t in catalog.tests() {
        for rule in [
            ColRule::NEVER,
            ColRule::IF_POSITIVE,
            ColRule::IF_NEGATIVE,
            ColRule::ALWAYS,
        ] {
            out.push(Strategy::test(t.id.clone(), rule));
        }
    }
    out
}

fn complications(spec: &InterventionSpec, mode: ComplicationMode) -> Vec<Complication> {
    match mode {
        ComplicationMode::InsideUtility => spec.complications.clone(),
        ComplicationMode::ExpectedCost => vec![Complication {
            cost: spec.expected_complication_cost(),
            ..Complication::NONE
        }],
    }
}

/// Evaluator for one prior; reuses the information model across strategies.
struct Evaluator<'a> {
    catalog: &'a InterventionCatalog,
    params: &'a PreferenceParams,
    mode: ComplicationMode,
    p: f64,
}

impl Evaluator<'_> {
    fn branch_eu(
        &self,
        model: &InfoModel<'_>,
        screen: &InterventionSpec,
        result: ResultState,
        colonoscopy: bool,
    ) -> Result<f64, InfoError> {
        let info = model.expected_given_result(result, colonoscopy)?;
        let comfort = combined_comfort(screen, colonoscopy);
        let col = self.catalog.colonoscopy();
        let screen_comps = complications(screen, self.mode);
        let col_comps = if colonoscopy {
            complications(col, self.mode)
        } else {
            vec![Complication::NONE]
        };
        let base = screen.unit_cost + if colonoscopy { col.unit_cost } else { 0.0 };
        // Within a branch the information is fixed, and complications are
        // independent of CRC and of the colonoscopy result, so the
        // expectation over those two sums out.
        let mut eu = 0.0;
        for s in &screen_comps {
            for c in &col_comps {
                eu += s.probability * c.probability * self.params.utility(base + s.cost + c.cost, info, comfort);
            }
        }
        Ok(eu)
    }

    fn evaluate(&self, strategy: &Strategy) -> Result<StrategyEvaluation, Error> {
        let screen = self.catalog.get(&strategy.screening)?;
        let col = self.catalog.colonoscopy();
        let model = InfoModel::new(self.p, Some(screen), col)?;
        let mut branches = Vec::with_capacity(2);
        let (mut eu, mut cost) = (0.0, 0.0);
        for &rs in model.screening_results() {
            let prs = model.screen_result_probability(rs);
            if prs == 0.0 {
                continue;
            }
            let take = strategy.colonoscopy_after(rs);
            let b = BranchEu {
                result: rs,
                probability: prs,
                eu_no_col: self.branch_eu(&model, screen, rs, false)?,
                eu_col: self.branch_eu(&model, screen, rs, true)?,
                colonoscopy: take,
            };
            eu += prs * b.chosen();
            let mut c = screen.unit_cost + screen.expected_complication_cost();
            if take {
                c += col.unit_cost + col.expected_complication_cost();
            }
            cost += prs * c;
            branches.push(b);
        }
        Ok(StrategyEvaluation {
            label: strategy.to_string(),
            strategy: strategy.clone(),
            expected_utility: eu,
            branches,
            expected_cost: cost,
            expected_info: model.expected(|rs| strategy.colonoscopy_after(rs)),
        })
    }
}

pub fn evaluate_strategy(
    p_crc: f64,
    strategy: &Strategy,
    catalog: &InterventionCatalog,
    params: &PreferenceParams,
) -> Result<StrategyEvaluation, Error> {
    evaluate_strategy_with(p_crc, strategy, catalog, params, ComplicationMode::default())
}

pub fn evaluate_strategy_with(
    p_crc: f64,
    strategy: &Strategy,
    catalog: &InterventionCatalog,
    params: &PreferenceParams,
    mode: ComplicationMode,
) -> Result<StrategyEvaluation, Error> {
    strategy.validate(catalog)?;
    Evaluator {
        catalog,
        params,
        mode,
        p: p_crc,
    }
    .evaluate(strategy)
}

/// Evaluates every strategy of the catalog, in enumeration order.
pub fn evaluate_all(
    p_crc: f64,
    catalog: &InterventionCatalog,
    params: &PreferenceParams,
    options: EvalOptions,
) -> Result<Vec<StrategyEvaluation>, Error> {
    if !(p_crc > 0.0 && p_crc < 1.0) {
        return Err(InfoError::DegeneratePrior(p_crc).into());
    }
    let ev = Evaluator {
        catalog,
        params,
        mode: options.mode,
        p: p_crc,
    };
    let strategies = enumerate_strategies(catalog);
    par::map(options.exec, &strategies, |s| ev.evaluate(s))
        .into_iter()
        .collect()
}

/// Descending EU, then lower expected cost, then strategy order.
pub fn ranking_order(a: &StrategyEvaluation, b: &StrategyEvaluation) -> Ordering {
    b.expected_utility
        .total_cmp(&a.expected_utility)
        .then(a.expected_cost.total_cmp(&b.expected_cost))
        .then_with(|| a.strategy.cmp(&b.strategy))
}

pub fn rank(mut evaluations: Vec<StrategyEvaluation>) -> Vec<StrategyEvaluation> {
    evaluations.sort_by(ranking_order);
    evaluations
}

/// Ranked strategies, optionally truncated to `top_k`.
pub fn recommend(
    p_crc: f64,
    catalog: &InterventionCatalog,
    params: &PreferenceParams,
    top_k: Option<usize>,
) -> Result<Vec<StrategyEvaluation>, Error> {
    recommend_with(p_crc, catalog, params, top_k, EvalOptions::default())
}

pub fn recommend_with(
    p_crc: f64,
    catalog: &InterventionCatalog,
    params: &PreferenceParams,
    top_k: Option<usize>,
    options: EvalOptions,
) -> Result<Vec<StrategyEvaluation>, Error> {
    let mut ranked = rank(evaluate_all(p_crc, catalog, params, options)?);
    if let Some(k) = top_k {
        ranked.truncate(k);
    }
    Ok(ranked)
}

/// Best strategy of each resource, ranked; the second entry is the best
/// alternative using a different method from the top recommendation.
pub fn best_per_method(ranked: &[StrategyEvaluation]) -> Vec<StrategyEvaluation> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    let mut sorted: Vec<&StrategyEvaluation> = ranked.iter().collect();
    sorted.sort_by(|a, b| ranking_order(a, b));
    for e in sorted {
        let r = e.strategy.resource();
        if !seen.contains(&r) {
            seen.push(r);
            out.push(e.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationReport {
    pub p_crc: f64,
    pub entropy: f64,
    pub strategies: Vec<StrategyEvaluation>,
    pub best_per_method: Vec<StrategyEvaluation>,
}

pub fn recommendation_report(
    p_crc: f64,
    catalog: &InterventionCatalog,
    params: &PreferenceParams,
    top_k: Option<usize>,
    options: EvalOptions,
) -> Result<RecommendationReport, Error> {
    let all = recommend_with(p_crc, catalog, params, None, options)?;
    let per_method = best_per_method(&all);
    let mut strategies = all;
    if let Some(k) = top_k {
        strategies.truncate(k);
    }
    Ok(RecommendationReport {
        p_crc,
        entropy: entropy(p_crc),
        strategies,
        best_per_method: per_method,
    })
}

// ---------------------------------------------------------------------------
// Dominance

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Better,
    Equal,
    Worse,
}

impl Comparison {
    fn of(dominator: f64, other: f64, higher_is_better: bool) -> Self {
        match dominator.partial_cmp(&other) {
            Some(Ordering::Equal) | None => Comparison::Equal,
            Some(Ordering::Greater) if higher_is_better => Comparison::Better,
            Some(Ordering::Less) if !higher_is_better => Comparison::Better,
            _ => Comparison::Worse,
        }
    }
}

/// How the dominator compares on each criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriteriaWitness {
    pub cost: Comparison,
    pub sensitivity: Comparison,
    pub specificity: Comparison,
    pub comfort: Comparison,
}

impl CriteriaWitness {
    fn compare(dominator: &InterventionSpec, other: &InterventionSpec) -> Self {
        Self {
            cost: Comparison::of(dominator.unit_cost, other.unit_cost, false),
            sensitivity: Comparison::of(dominator.sensitivity, other.sensitivity, true),
            specificity: Comparison::of(dominator.specificity, other.specificity, true),
            comfort: Comparison::of(
                f64::from(dominator.comfort.level()),
                f64::from(other.comfort.level()),
                true,
            ),
        }
    }

    fn all(&self) -> [Comparison; 4] {
        [self.cost, self.sensitivity, self.specificity, self.comfort]
    }

    fn no_worse(&self) -> bool {
        !self.all().contains(&Comparison::Worse)
    }

    fn tie(&self) -> bool {
        self.all().iter().all(|c| *c == Comparison::Equal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRecord {
    pub dominated: InterventionId,
    pub by: InterventionId,
    pub witness: CriteriaWitness,
    /// Identical on every criterion; reported once for the pair.
    pub tie: bool,
    /// `(p, info of dominated, info of dominator)` on the requested grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub info: Vec<(f64, f64, f64)>,
}

/// Pairs of screening tests where one is no worse on cost, sensitivity,
/// specificity and comfort, and strictly better on at least one.
pub fn dominance_filter(catalog: &InterventionCatalog, p_grid: &[f64]) -> Result<Vec<DominanceRecord>, Error> {
    let tests = catalog.tests();
    let mut out = Vec::new();
    for a in &tests {
        for b in &tests {
            if a.id == b.id {
                continue;
            }
            let w = CriteriaWitness::compare(b, a);
            if !w.no_worse() {
                continue;
            }
            let tie = w.tie();
            if tie && a.id > b.id {
                continue;
            }
            let info = p_grid
                .iter()
                .map(|&p| Ok((p, single_test_info(p, a)?, single_test_info(p, b)?)))
                .collect::<Result<Vec<_>, InfoError>>()?;
            out.push(DominanceRecord {
                dominated: a.id.clone(),
                by: b.id.clone(),
                witness: w,
                tie,
                info,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDominance {
    pub device: InterventionId,
    pub dominated: bool,
    pub by: Vec<InterventionId>,
    pub ties: Vec<InterventionId>,
    pub records: Vec<DominanceRecord>,
}

/// Dominance status of one test of the catalog against the others.
pub fn device_dominance(catalog: &InterventionCatalog, device: &InterventionId) -> Result<DeviceDominance, Error> {
    catalog.get(device)?;
    let records: Vec<DominanceRecord> = dominance_filter(catalog, &[])?
        .into_iter()
        .filter(|r| &r.dominated == device || (r.tie && &r.by == device))
        .collect();
    let other = |r: &DominanceRecord| {
        if &r.dominated == device {
            r.by.clone()
        } else {
            r.dominated.clone()
        }
    };
    let by = records.iter().filter(|r| !r.tie).map(other).collect();
    let ties = records.iter().filter(|r| r.tie).map(other).collect();
    Ok(DeviceDominance {
        device: device.clone(),
        dominated: records.iter().any(|r| !r.tie),
        by,
        ties,
        records,
    })
}
