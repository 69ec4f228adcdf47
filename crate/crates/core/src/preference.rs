//! Value and utility of screening outcomes, λ elicitation and utility
//! calibration.
//!
//! The value of an outcome with total cost `c`, information `i` and comfort
//! level `k` is `λ_k·i − log10(c + 1)`; its utility is `a − b·exp(−ρ·v)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::PreferenceError;
use crate::screening::Comfort;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub cost: f64,
    pub info: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeAnchor {
    pub cost: f64,
    pub info: f64,
    /// Probability of the best outcome making the lottery indifferent to
    /// this sure outcome.
    pub pe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreferenceParams {
    /// λ for comfort levels 1..=4, in order.
    pub lambdas: [f64; 4],
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub best: Anchor,
    pub worst: Anchor,
    pub pe_anchor: PeAnchor,
    /// Comfort level at which anchors and the PE point are valued.
    pub calibration_comfort: u8,
}

impl Default for PreferenceParams {
    fn default() -> Self {
        Self {
            lambdas: [4.01, 4.17, 6.80, 7.0],
            a: 1.015,
            b: 0.872,
            rho: 0.039,
            best: Anchor { cost: 0.0, info: 15.75 },
            worst: Anchor {
                cost: 8131.71,
                info: 0.0,
            },
            pe_anchor: PeAnchor {
                cost: 50.0,
                info: 4.1,
                pe: 0.7,
            },
            calibration_comfort: 3,
        }
    }
}

impl PreferenceParams {
    pub fn lambda(&self, comfort: Comfort) -> f64 {
        self.lambdas[usize::from(comfort.level()) - 1]
    }

    pub fn value(&self, cost: f64, info: f64, comfort: Comfort) -> f64 {
        value(cost, info, comfort, self)
    }

    pub fn utility(&self, cost: f64, info: f64, comfort: Comfort) -> f64 {
        utility(cost, info, comfort, self)
    }

    /// Utility of a value directly.
    pub fn utility_of_value(&self, v: f64) -> f64 {
        self.a - self.b * (-self.rho * v).exp()
    }

    /// Value whose utility is `u`, i.e. the certainty equivalent of a
    /// lottery with expected utility `u`.
    pub fn value_of_utility(&self, u: f64) -> f64 {
        -((self.a - u) / self.b).ln() / self.rho
    }

    /// Re-solves `(a, b, ρ)` from the anchors and PE point.
    pub fn recalibrated(mut self) -> Result<Self, PreferenceError> {
        let k = Comfort::new(self.calibration_comfort)
            .ok_or(PreferenceError::ComfortOutOfRange(self.calibration_comfort))?;
        let c = calibrate_utility(self.best, self.worst, self.pe_anchor, self.lambda(k))?;
        self.a = c.a;
        self.b = c.b;
        self.rho = c.rho;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), PreferenceError> {
        if let Some(&l) = self.lambdas.iter().find(|l| !(**l > 0.0)) {
            return Err(PreferenceError::NonPositiveLambda(l));
        }
        if !(self.rho > 0.0) || !self.a.is_finite() || !(self.b > 0.0) {
            return Err(PreferenceError::Calibration(format!(
                "need ρ > 0, b > 0 and finite a (got a={}, b={}, ρ={})",
                self.a, self.b, self.rho
            )));
        }
        if Comfort::new(self.calibration_comfort).is_none() {
            return Err(PreferenceError::ComfortOutOfRange(self.calibration_comfort));
        }
        Ok(())
    }

    /// Violations of `λ4 ≥ λ3 ≥ λ2 ≥ λ1`, reported rather than enforced.
    pub fn monotonicity_warnings(&self) -> Vec<String> {
        monotonicity_warnings(&self.lambdas)
    }
}

/// Partial update of [`PreferenceParams`], e.g. from a request body.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreferenceOverrides {
    /// Comfort level (1..=4) → λ.
    pub lambdas: BTreeMap<u8, f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rho: Option<f64>,
    pub pe: Option<f64>,
    pub pe_info: Option<f64>,
    pub pe_cost: Option<f64>,
    /// Re-solve `(a, b, ρ)` after applying the other overrides. Implied by
    /// any PE override.
    pub recalibrate: bool,
}

impl PreferenceOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, base: &PreferenceParams) -> Result<PreferenceParams, PreferenceError> {
        let mut p = base.clone();
        for (&k, &l) in &self.lambdas {
            if !(1..=4).contains(&k) {
                return Err(PreferenceError::ComfortOutOfRange(k));
            }
            p.lambdas[usize::from(k) - 1] = l;
        }
        if let Some(v) = self.pe {
            p.pe_anchor.pe = v;
        }
        if let Some(v) = self.pe_info {
            p.pe_anchor.info = v;
        }
        if let Some(v) = self.pe_cost {
            p.pe_anchor.cost = v;
        }
        let pe_changed = self.pe.is_some() || self.pe_info.is_some() || self.pe_cost.is_some();
        if self.recalibrate || pe_changed {
            p = p.recalibrated()?;
        }
        if let Some(v) = self.a {
            p.a = v;
        }
        if let Some(v) = self.b {
            p.b = v;
        }
        if let Some(v) = self.rho {
            p.rho = v;
        }
        p.validate()?;
        Ok(p)
    }
}

pub fn total_cost(intervention_costs: f64, complication_cost: f64) -> Result<f64, PreferenceError> {
    for c in [intervention_costs, complication_cost] {
        if !(c >= 0.0) {
            return Err(PreferenceError::NegativeCost(c));
        }
    }
    Ok(intervention_costs + complication_cost)
}

pub fn value(cost: f64, info: f64, comfort: Comfort, params: &PreferenceParams) -> f64 {
    params.lambda(comfort) * info - (cost + 1.0).log10()
}

pub fn utility(cost: f64, info: f64, comfort: Comfort, params: &PreferenceParams) -> f64 {
    params.utility_of_value(value(cost, info, comfort, params))
}

pub fn monotonicity_warnings(lambdas: &[f64; 4]) -> Vec<String> {
    let warnings: Vec<String> = (1..4)
        .filter(|&i| lambdas[i] < lambdas[i - 1])
        .map(|i| format!("λ{} = {} is below λ{} = {}", i + 1, lambdas[i], i, lambdas[i - 1]))
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    warnings
}

/// λ making `(info_fixed, cost_fixed)` indifferent to
/// `(info_adjusted, indifference_cost)` at the same comfort level.
///
/// `adjusted_stated_cost` is the originally stated cost of the adjusted
/// option, if it had one; the indifference cost must lie below it.
pub fn elicit_lambda_pair(
    info_fixed: f64,
    cost_fixed: f64,
    info_adjusted: f64,
    adjusted_stated_cost: Option<f64>,
    indifference_cost: f64,
) -> Result<f64, PreferenceError> {
    for c in [cost_fixed, indifference_cost] {
        if !(c >= 0.0) {
            return Err(PreferenceError::NegativeCost(c));
        }
    }
    if let Some(stated) = adjusted_stated_cost {
        if !(indifference_cost < stated) {
            return Err(PreferenceError::IndifferenceTooHigh {
                indifference: indifference_cost,
                stated,
            });
        }
    }
    if info_fixed == info_adjusted {
        return Err(PreferenceError::EqualInformation(info_fixed));
    }
    let lambda = ((cost_fixed + 1.0) / (indifference_cost + 1.0)).log10() / (info_fixed - info_adjusted);
    if !(lambda > 0.0) {
        return Err(PreferenceError::NonPositiveLambda(lambda));
    }
    Ok(lambda)
}

/// Median of the pairwise estimates (midpoint of the central two for an
/// even count).
pub fn robustify_lambda(estimates: &[f64]) -> Result<f64, PreferenceError> {
    if estimates.is_empty() {
        return Err(PreferenceError::NoEstimates);
    }
    if let Some(&l) = estimates.iter().find(|l| !(**l > 0.0)) {
        return Err(PreferenceError::NonPositiveLambda(l));
    }
    let mut v = estimates.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    /// `u(worst) − 0`, `u(best) − 1`, `u(pe) − pe`.
    pub residuals: [f64; 3],
    /// The PE a risk-neutral (linear) utility would give.
    pub linear_pe: f64,
}

const RHO_BRACKET: (f64, f64) = (1e-6, 10.0);
const RHO_TOLERANCE: f64 = 1e-10;

/// Utility the PE point gets when `u(worst) = 0` and `u(best) = 1` at the
/// given ρ, from values `(v_worst, v_pe, v_best)`.
fn normalized_utility(rho: f64, vw: f64, vpe: f64, vb: f64) -> f64 {
    (-(-rho * (vpe - vw)).exp_m1()) / (-(-rho * (vb - vw)).exp_m1())
}

/// Solves `u(worst) = 0`, `u(best) = 1`, `u(pe) = pe` for `(a, b, ρ)` with
/// all three points valued at weight `lambda`.
pub fn calibrate_utility(
    best: Anchor,
    worst: Anchor,
    pe: PeAnchor,
    lambda: f64,
) -> Result<Calibration, PreferenceError> {
    let v = |cost: f64, info: f64| lambda * info - (cost + 1.0).log10();
    let (vw, vb, vpe) = (v(worst.cost, worst.info), v(best.cost, best.info), v(pe.cost, pe.info));
    if !(vw < vpe && vpe < vb) {
        return Err(PreferenceError::Calibration(format!(
            "values must satisfy worst < pe < best (got {vw:.6}, {vpe:.6}, {vb:.6})"
        )));
    }
    if !(pe.pe > 0.0 && pe.pe < 1.0) {
        return Err(PreferenceError::Calibration(format!(
            "PE value {} must lie strictly between 0 and 1",
            pe.pe
        )));
    }
    let linear = (vpe - vw) / (vb - vw);
    let f = |rho: f64| normalized_utility(rho, vw, vpe, vb) - pe.pe;
    let (mut lo, mut hi) = RHO_BRACKET;
    let (flo, fhi) = (f(lo), f(hi));
    if flo >= 0.0 {
        if (pe.pe - linear).abs() <= 1e-6 * linear.max(1.0) || pe.pe >= linear {
            return Err(PreferenceError::RiskNeutralLimit { pe: pe.pe, linear });
        }
        return Err(PreferenceError::Calibration(format!(
            "PE {} is below the risk-neutral value {linear:.6}; no ρ in [{lo}, {hi}] fits \
             (f({lo}) = {flo:.3e})",
            pe.pe
        )));
    }
    if fhi < 0.0 {
        return Err(PreferenceError::Calibration(format!(
            "PE {} needs ρ above {hi} (f({hi}) = {fhi:.3e})",
            pe.pe
        )));
    }
    while hi - lo > RHO_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    let a = 1.0 / (-(-rho * (vb - vw)).exp_m1());
    let b = a * (rho * vw).exp();
    let u = |x: f64| a - b * (-rho * x).exp();
    Ok(Calibration {
        a,
        b,
        rho,
        residuals: [u(vw), u(vb) - 1.0, u(vpe) - pe.pe],
        linear_pe: linear,
    })
}

/// PE value the anchors imply for a given ρ (inverse of calibration).
pub fn pe_for_rho(rho: f64, params: &PreferenceParams) -> f64 {
    let k = Comfort::new(params.calibration_comfort).unwrap_or(Comfort::MINOR);
    let l = params.lambda(k);
    let v = |cost: f64, info: f64| l * info - (cost + 1.0).log10();
    normalized_utility(
        rho,
        v(params.worst.cost, params.worst.info),
        v(params.pe_anchor.cost, params.pe_anchor.info),
        v(params.best.cost, params.best.info),
    )
}

// ---------------------------------------------------------------------------
// Pairwise elicitation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOption {
    pub label: String,
    pub info: f64,
    /// `None` for a synthetic option whose cost the respondent supplies.
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairQuestion {
    pub comfort: u8,
    pub a: PairOption,
    pub b: PairOption,
}

impl PairQuestion {
    /// Which option gets its cost adjusted to the indifference cost: the
    /// unpriced option if there is one, otherwise the option not preferred.
    pub fn adjusted(&self, preferred: Choice) -> Choice {
        match (&self.a.cost, &self.b.cost) {
            (None, _) => Choice::A,
            (_, None) => Choice::B,
            _ => match preferred {
                Choice::A => Choice::B,
                Choice::B => Choice::A,
            },
        }
    }

    pub fn estimate(&self, preferred: Choice, indifference_cost: f64) -> Result<f64, PreferenceError> {
        let (fixed, adjusted) = match self.adjusted(preferred) {
            Choice::A => (&self.b, &self.a),
            Choice::B => (&self.a, &self.b),
        };
        let cost_fixed = fixed
            .cost
            .ok_or_else(|| PreferenceError::Transcript("both options lack a cost".into()))?;
        elicit_lambda_pair(fixed.info, cost_fixed, adjusted.info, adjusted.cost, indifference_cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub comfort: u8,
    pub a: PairOption,
    pub b: PairOption,
    pub preferred: Choice,
    pub indifference_cost: f64,
}

impl TranscriptRecord {
    pub fn question(&self) -> PairQuestion {
        PairQuestion {
            comfort: self.comfort,
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }
}

/// Replayable record of an interview.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
    #[serde(default = "default_lambda4")]
    pub lambda4: f64,
    /// PE answer; when present the utility is calibrated too.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pe: Option<f64>,
}

fn default_lambda4() -> f64 {
    7.0
}

impl Transcript {
    pub fn from_json_str(s: &str) -> Result<Self, PreferenceError> {
        serde_json::from_str(s).map_err(|e| PreferenceError::Transcript(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcripts always serialize")
    }

    pub fn replay(&self, base: &PreferenceParams) -> Result<ElicitationOutcome, PreferenceError> {
        let mut session = ElicitationSession::new(self.records.iter().map(|r| r.question()).collect());
        session.lambda4 = self.lambda4;
        for (i, r) in self.records.iter().enumerate() {
            session.answer(i, r.preferred, r.indifference_cost)?;
        }
        if let Some(pe) = self.pe {
            session.answer_pe(pe)?;
        }
        session.result(base)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub preferred: Choice,
    pub indifference_cost: f64,
    pub lambda: f64,
}

/// An interview in progress: questions are answered strictly in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationSession {
    pub questions: Vec<PairQuestion>,
    pub answers: Vec<Answer>,
    pub lambda4: f64,
    pub pe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationOutcome {
    /// Pairwise estimates by comfort level, in answer order.
    pub estimates: BTreeMap<u8, Vec<f64>>,
    pub lambdas: [f64; 4],
    pub warnings: Vec<String>,
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerError {
    /// The answer is not for the question currently asked.
    OutOfOrder { expected: Option<usize>, got: usize },
}

impl ElicitationSession {
    pub fn new(questions: Vec<PairQuestion>) -> Self {
        Self {
            questions,
            answers: Vec::new(),
            lambda4: default_lambda4(),
            pe: None,
        }
    }

    /// Index of the next unanswered pair, if any.
    pub fn next_index(&self) -> Option<usize> {
        (self.answers.len() < self.questions.len()).then_some(self.answers.len())
    }

    pub fn next_question(&self) -> Option<&PairQuestion> {
        self.next_index().map(|i| &self.questions[i])
    }

    pub fn is_complete(&self) -> bool {
        self.next_index().is_none()
    }

    pub fn check_order(&self, index: usize) -> Result<(), AnswerError> {
        match self.next_index() {
            Some(i) if i == index => Ok(()),
            expected => Err(AnswerError::OutOfOrder { expected, got: index }),
        }
    }

    /// Records an answer and returns its λ estimate. Answers must arrive in
    /// question order.
    pub fn answer(&mut self, index: usize, preferred: Choice, indifference_cost: f64) -> Result<f64, PreferenceError> {
        self.check_order(index)
            .map_err(|e| PreferenceError::Transcript(format!("{e:?}")))?;
        let q = &self.questions[index];
        if !(1..=3).contains(&q.comfort) {
            return Err(PreferenceError::ComfortOutOfRange(q.comfort));
        }
        let lambda = q.estimate(preferred, indifference_cost)?;
        self.answers.push(Answer {
            preferred,
            indifference_cost,
            lambda,
        });
        Ok(lambda)
    }

    pub fn answer_pe(&mut self, pe: f64) -> Result<(), PreferenceError> {
        if !(pe > 0.0 && pe < 1.0) {
            return Err(PreferenceError::Calibration(format!(
                "PE value {pe} must lie strictly between 0 and 1"
            )));
        }
        self.pe = Some(pe);
        Ok(())
    }

    /// Median λ per answered comfort level; unanswered levels keep the
    /// values in `base`. Requires at least one answer.
    pub fn result(&self, base: &PreferenceParams) -> Result<ElicitationOutcome, PreferenceError> {
        if self.answers.is_empty() {
            return Err(PreferenceError::NoEstimates);
        }
        let mut estimates: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
        for (q, a) in self.questions.iter().zip(&self.answers) {
            estimates.entry(q.comfort).or_default().push(a.lambda);
        }
        let mut lambdas = base.lambdas;
        for (&k, v) in &estimates {
            lambdas[usize::from(k) - 1] = robustify_lambda(v)?;
        }
        lambdas[3] = self.lambda4;
        let warnings = monotonicity_warnings(&lambdas);
        let calibration = match self.pe {
            Some(pe) => {
                let k = Comfort::new(base.calibration_comfort)
                    .ok_or(PreferenceError::ComfortOutOfRange(base.calibration_comfort))?;
                let lambda = lambdas[usize::from(k.level()) - 1];
                Some(calibrate_utility(
                    base.best,
                    base.worst,
                    PeAnchor { pe, ..base.pe_anchor },
                    lambda,
                )?)
            }
            None => None,
        };
        Ok(ElicitationOutcome {
            estimates,
            lambdas,
            warnings,
            calibration,
        })
    }
}

/// Questions for an interview: every pair of priced options sharing a comfort
/// level, in the given order, plus one synthetic unpriced option paired with
/// each level that has a single option.
pub fn generate_questions(options: &[(u8, PairOption)], synthetic_info: f64) -> Vec<PairQuestion> {
    let mut out = Vec::new();
    for level in 1..=3u8 {
        let at: Vec<&PairOption> = options.iter().filter(|(k, _)| *k == level).map(|(_, o)| o).collect();
        if at.len() == 1 {
            out.push(PairQuestion {
                comfort: level,
                a: at[0].clone(),
                b: PairOption {
                    label: "Synthetic".into(),
                    info: synthetic_info,
                    cost: None,
                },
            });
        }
        for i in 0..at.len() {
            for j in i + 1..at.len() {
                out.push(PairQuestion {
                    comfort: level,
                    a: at[i].clone(),
                    b: at[j].clone(),
                });
            }
        }
    }
    out
}
