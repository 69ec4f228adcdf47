//! Information attribute of a screening strategy.
//!
//! For a patient with prior `p = p(CRC)`, a screening result `r_s` and a
//! colonoscopy result `r_c` (independent given CRC), the pointwise value is
//!
//! ```text
//! v_info(crc, r_s, r_c) = [ ln p(crc|r_s)/p(crc) + ln p(crc|r_s,r_c)/p(crc|r_s) ] / H(CRC)
//! ```
//!
//! where each log-ratio is 0 when its result is `NoResult`, and `H` is the
//! binary entropy of the patient's own prior. Its expectation is the mutual
//! information `MI(CRC; (R_s, R_c)) / H(CRC)`, which lies in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::InfoError;
use crate::screening::{InterventionId, InterventionSpec, ResultState};

/// Binary entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    term(p) + term(1.0 - p)
}

/// `p(crc | result)` for a performed test by Bayes' rule; `NoResult` leaves
/// the prior unchanged.
pub fn posterior_after(p: f64, spec: &InterventionSpec, result: ResultState) -> f64 {
    if result == ResultState::NoResult {
        return p;
    }
    let num = spec.likelihood(result, true) * p;
    let den = num + spec.likelihood(result, false) * (1.0 - p);
    if den == 0.0 {
        p
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCell {
    pub screening_result: ResultState,
    pub crc: bool,
    pub colonoscopy_performed: bool,
    pub colonoscopy_result: ResultState,
    pub v_info: f64,
    /// `P(crc, r_s, r_c)` given the cell's colonoscopy decision.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoTable {
    pub screening: InterventionId,
    pub cells: Vec<OutcomeCell>,
}

/// Information bookkeeping for one patient prior and one screening choice.
#[derive(Debug, Clone, Copy)]
pub struct InfoModel<'a> {
    p: f64,
    h: f64,
    screen: Option<&'a InterventionSpec>,
    colonoscopy: &'a InterventionSpec,
}

impl<'a> InfoModel<'a> {
    /// `screen = None` (or the no-screening spec) means no screening test.
    pub fn new(
        p: f64,
        screen: Option<&'a InterventionSpec>,
        colonoscopy: &'a InterventionSpec,
    ) -> Result<Self, InfoError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(InfoError::DegeneratePrior(p));
        }
        let screen = screen.filter(|s| s.id != InterventionId::NoScreening);
        Ok(Self {
            p,
            h: entropy(p),
            screen,
            colonoscopy,
        })
    }

    pub fn prior(&self) -> f64 {
        self.p
    }

    pub fn entropy(&self) -> f64 {
        self.h
    }

    pub fn screen(&self) -> Option<&'a InterventionSpec> {
        self.screen
    }

    /// Screening results that can occur.
    pub fn screening_results(&self) -> &'static [ResultState] {
        if self.screen.is_some() {
            &ResultState::PERFORMED
        } else {
            &[ResultState::NoResult]
        }
    }

    pub fn screen_likelihood(&self, rs: ResultState, crc: bool) -> f64 {
        match (self.screen, rs) {
            (None, ResultState::NoResult) => 1.0,
            (None, _) => 0.0,
            (Some(_), ResultState::NoResult) => 0.0,
            (Some(s), r) => s.likelihood(r, crc),
        }
    }

    fn colonoscopy_likelihood(&self, rc: ResultState, crc: bool, performed: bool) -> f64 {
        match (performed, rc) {
            (false, ResultState::NoResult) => 1.0,
            (false, _) | (true, ResultState::NoResult) => 0.0,
            (true, r) => self.colonoscopy.likelihood(r, crc),
        }
    }

    pub fn prob_crc(&self, crc: bool) -> f64 {
        if crc {
            self.p
        } else {
            1.0 - self.p
        }
    }

    /// `P(r_s)`.
    pub fn screen_result_probability(&self, rs: ResultState) -> f64 {
        self.p * self.screen_likelihood(rs, true) + (1.0 - self.p) * self.screen_likelihood(rs, false)
    }

    /// `p(crc | r_s)`.
    pub fn posterior_screen(&self, rs: ResultState) -> f64 {
        match self.screen {
            Some(s) => posterior_after(self.p, s, rs),
            None => self.p,
        }
    }

    /// `p(crc | r_s, r_c)`.
    pub fn posterior_both(&self, rs: ResultState, rc: ResultState) -> f64 {
        posterior_after(self.posterior_screen(rs), self.colonoscopy, rc)
    }

    /// Joint `P(crc, r_s, r_c)` under a colonoscopy decision.
    pub fn cell_probability(&self, crc: bool, rs: ResultState, col: bool, rc: ResultState) -> f64 {
        self.prob_crc(crc) * self.screen_likelihood(rs, crc) * self.colonoscopy_likelihood(rc, crc, col)
    }

    /// Pointwise normalized information of one outcome; zero-probability
    /// outcomes are assigned 0.
    pub fn v_info(&self, crc: bool, rs: ResultState, col: bool, rc: ResultState) -> f64 {
        if self.cell_probability(crc, rs, col, rc) == 0.0 {
            return 0.0;
        }
        let ratio = |after: f64, before: f64| {
            if crc {
                (after / before).ln()
            } else {
                ((1.0 - after) / (1.0 - before)).ln()
            }
        };
        let q = self.posterior_screen(rs);
        let first = ratio(q, self.p);
        let second = if col {
            ratio(self.posterior_both(rs, rc), q)
        } else {
            0.0
        };
        (first + second) / self.h
    }

    fn colonoscopy_results(col: bool) -> &'static [ResultState] {
        if col {
            &ResultState::PERFORMED
        } else {
            &[ResultState::NoResult]
        }
    }

    /// `E_{crc, r_c | r_s}[v_info]` for a fixed colonoscopy decision.
    pub fn expected_given_result(&self, rs: ResultState, col: bool) -> Result<f64, InfoError> {
        let prs = self.screen_result_probability(rs);
        if prs == 0.0 {
            return Err(InfoError::UnreachableResult(rs.to_string()));
        }
        let mut total = 0.0;
        for crc in [true, false] {
            for &rc in Self::colonoscopy_results(col) {
                let w = self.cell_probability(crc, rs, col, rc);
                if w > 0.0 {
                    total += w * self.v_info(crc, rs, col, rc);
                }
            }
        }
        Ok(total / prs)
    }

    /// Total expectation under a colonoscopy rule: `MI(CRC; (R_s, R_c)) / H`.
    pub fn expected(&self, rule: impl Fn(ResultState) -> bool) -> f64 {
        self.screening_results()
            .iter()
            .filter_map(|&rs| {
                let prs = self.screen_result_probability(rs);
                (prs > 0.0).then(|| prs * self.expected_given_result(rs, rule(rs)).unwrap())
            })
            .sum()
    }

    /// All outcome cells, both colonoscopy decisions, in table order:
    /// screening result, CRC (false first), then no colonoscopy, colonoscopy
    /// negative, colonoscopy positive.
    pub fn table(&self) -> InfoTable {
        let mut cells = Vec::new();
        let order: &[ResultState] = if self.screen.is_some() {
            &[ResultState::PredictedFalse, ResultState::PredictedTrue]
        } else {
            &[ResultState::NoResult]
        };
        for &rs in order {
            for crc in [false, true] {
                for (col, rc) in [
                    (false, ResultState::NoResult),
                    (true, ResultState::PredictedFalse),
                    (true, ResultState::PredictedTrue),
                ] {
                    cells.push(OutcomeCell {
                        screening_result: rs,
                        crc,
                        colonoscopy_performed: col,
                        colonoscopy_result: rc,
                        v_info: self.v_info(crc, rs, col, rc),
                        probability: self.cell_probability(crc, rs, col, rc),
                    });
                }
            }
        }
        InfoTable {
            screening: self.screen.map(|s| s.id.clone()).unwrap_or(InterventionId::NoScreening),
            cells,
        }
    }
}

/// Pointwise value of one outcome cell.
pub fn v_info(
    p: f64,
    screen: Option<&InterventionSpec>,
    colonoscopy: &InterventionSpec,
    crc: bool,
    screening_result: ResultState,
    colonoscopy_performed: bool,
    colonoscopy_result: ResultState,
) -> Result<f64, InfoError> {
    let m = InfoModel::new(p, screen, colonoscopy)?;
    Ok(m.v_info(crc, screening_result, colonoscopy_performed, colonoscopy_result))
}

pub fn expected_v_info_given_result(
    p: f64,
    screen: Option<&InterventionSpec>,
    colonoscopy: &InterventionSpec,
    screening_result: ResultState,
    colonoscopy_performed: bool,
) -> Result<f64, InfoError> {
    InfoModel::new(p, screen, colonoscopy)?.expected_given_result(screening_result, colonoscopy_performed)
}

pub fn expected_v_info(
    p: f64,
    screen: Option<&InterventionSpec>,
    colonoscopy: &InterventionSpec,
    rule: impl Fn(ResultState) -> bool,
) -> Result<f64, InfoError> {
    Ok(InfoModel::new(p, screen, colonoscopy)?.expected(rule))
}

/// Normalized MI of a single test on its own, `MI(CRC; R) / H(CRC)`.
pub fn single_test_info(p: f64, test: &InterventionSpec) -> Result<f64, InfoError> {
    if test.id == InterventionId::NoScreening {
        InfoModel::new(p, None, test)?;
        return Ok(0.0);
    }
    // A lone test is a screening step with no colonoscopy afterwards.
    Ok(InfoModel::new(p, Some(test), test)?.expected(|_| false))
}

/// `(p, single_test_info)` over a grid of priors.
pub fn v_info_curve(test: &InterventionSpec, grid: &[f64]) -> Result<Vec<(f64, f64)>, InfoError> {
    grid.iter()
        .map(|&p| single_test_info(p, test).map(|v| (p, v)))
        .collect()
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// CSV with a `p` column and one column per test, values to 6 decimals.
pub fn curves_csv(tests: &[&InterventionSpec], grid: &[f64]) -> Result<String, InfoError> {
    let curves: Vec<Vec<(f64, f64)>> = tests.iter().map(|t| v_info_curve(t, grid)).collect::<Result<_, _>>()?;
    let mut out = String::from("p");
    for t in tests {
        out.push(',');
        out.push_str(t.id.as_str());
    }
    out.push('\n');
    for (i, &p) in grid.iter().enumerate() {
        out.push_str(&format_probability(p));
        for c in &curves {
            out.push(',');
            out.push_str(&format!("{:.6}", c[i].1));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Probabilities print with 6 decimals, or 6 significant digits below 1e-3.
pub fn format_probability(p: f64) -> String {
    if p != 0.0 && p.abs() < 1e-3 {
        format!("{:.5e}", p)
    } else {
        format!("{p:.6}")
    }
}
