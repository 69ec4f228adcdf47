//! Acceptance suite: one test per criterion, each printing a single
//! `PASS`/`FAIL` line with the failing checks.
//!
//! Run with `cargo test -p screenwise-core --test acceptance`.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use screenwise_core::bn::{Network, Variable};
use screenwise_core::bundled::{self, crc_network};
use screenwise_core::info::{expected_v_info, expected_v_info_given_result, posterior_after, single_test_info, v_info};
use screenwise_core::par::Exec;
use screenwise_core::policy::{
    best_per_method, device_dominance, enumerate_strategies, evaluate_strategy, recommend, ColRule, EvalOptions,
    Strategy,
};
use screenwise_core::population::{
    allocate, national_baseline, simulate, sweep_lambda, top_eu_for_test, AllocationMode, AllocationResult,
    OperationalLimits, Population, StrategyCache,
};
use screenwise_core::preference::{calibrate_utility, robustify_lambda, PreferenceParams, Transcript};
use screenwise_core::screening::{
    default_catalog, Complication, ComplicationKind, InterventionCatalog, InterventionId, InterventionSpec, ResultState,
};

struct Report {
    name: &'static str,
    checks: Vec<(String, bool)>,
}

impl Report {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn abs(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        self.check(format!("{what}: {got:.6} vs {want} ±{tol}"), ok);
    }

    fn rel(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let ok = ((got - want) / want).abs() <= tol;
        self.check(format!("{what}: {got:.4} vs {want} ±{:.0}%", tol * 100.0), ok);
    }

    fn finish(self) {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        let n = self.checks.len();
        let line = if failed.is_empty() {
            format!("\nPASS {} ({n} checks)\n", self.name)
        } else {
            format!(
                "\nFAIL {} ({} of {n} checks failed: {})\n",
                self.name,
                failed.len(),
                failed.join("; ")
            )
        };
        // Straight to the stream, so the line shows up without --nocapture.
        let _ = std::io::stdout().lock().write_all(line.as_bytes());
        assert!(failed.is_empty(), "{} failed: {failed:#?}", self.name);
    }
}

fn benchmark_p() -> f64 {
    crc_network()
        .posterior_crc(&bundled::profile("benchmark").unwrap())
        .unwrap()
}

#[test]
fn posterior_chain() {
    let mut r = Report::new("posterior chain");
    let cat = default_catalog();
    let fit = cat.get(&InterventionId::Fit).unwrap().clone();
    let col = cat.colonoscopy().clone();
    let chain = |p: f64| {
        let neg = posterior_after(p, &fit, ResultState::PredictedFalse);
        let pos = posterior_after(p, &fit, ResultState::PredictedTrue);
        let pos_neg = posterior_after(pos, &col, ResultState::PredictedFalse);
        let pos_pos = posterior_after(pos, &col, ResultState::PredictedTrue);
        [neg, pos, pos_neg, pos_pos]
    };
    let want = [0.0002, 0.02, 0.0006, 0.65];
    let names = ["FIT-", "FIT+", "FIT+ COL-", "FIT+ COL+"];
    for (label, p) in [("p=0.00085", 0.00085), ("model benchmark", benchmark_p())] {
        for ((got, w), n) in chain(p).into_iter().zip(want).zip(names) {
            r.abs(&format!("{label} {n}"), got, w, 0.005);
        }
    }
    // Whole path from evidence: model inference, then the chain.
    let net = crc_network();
    let ev = bundled::profile("benchmark").unwrap();
    let mut best = Duration::MAX;
    for _ in 0..50 {
        let t = Instant::now();
        let p = net.posterior_crc(&ev).unwrap();
        std::hint::black_box(chain(p));
        best = best.min(t.elapsed());
    }
    r.check(format!("runtime {best:?} < 1 ms"), best < Duration::from_millis(1));
    r.finish();
}

#[test]
fn v_info_cells() {
    let mut r = Report::new("v_info cells");
    let p = benchmark_p();
    let cat = default_catalog();
    let col = cat.colonoscopy();
    let fit = cat.get(&InterventionId::Fit).unwrap();
    use ResultState::*;
    let cells = [
        ("none crc+ col+", None, true, NoResult, true, PredictedTrue, 654.93),
        ("none crc+ col-", None, true, NoResult, true, PredictedFalse, -509.19),
        ("none crc- col-", None, false, NoResult, true, PredictedFalse, 0.12),
        ("none crc- col+", None, false, NoResult, true, PredictedTrue, -11.44),
        (
            "FIT- crc- no col",
            Some(fit),
            false,
            PredictedFalse,
            false,
            NoResult,
            0.09,
        ),
        (
            "FIT- crc+ no col",
            Some(fit),
            true,
            PredictedFalse,
            false,
            NoResult,
            -196.80,
        ),
        (
            "FIT+ crc+ col+",
            Some(fit),
            true,
            PredictedTrue,
            true,
            PredictedTrue,
            966.01,
        ),
        (
            "FIT+ crc- col+",
            Some(fit),
            false,
            PredictedTrue,
            true,
            PredictedTrue,
            -151.00,
        ),
    ];
    for (name, screen, crc, rs, c, rc, want) in cells {
        let got = v_info(p, screen, col, crc, rs, c, rc).unwrap();
        r.rel(name, got, want, 0.01);
    }
    r.finish();
}

#[test]
fn expected_info() {
    let mut r = Report::new("expected info");
    let p = benchmark_p();
    let cat = default_catalog();
    let col = cat.colonoscopy();
    let g = |id: InterventionId| cat.get(&id).unwrap();
    let only_col = expected_v_info(p, None, col, |_| true).unwrap();
    r.abs("no screening + colonoscopy", only_col, 0.532, 0.01);
    use ResultState::*;
    let cond = [
        (InterventionId::Fit, PredictedFalse, false, 0.049),
        (InterventionId::Fit, PredictedFalse, true, 0.187),
        (InterventionId::Fit, PredictedTrue, false, 5.722),
        (InterventionId::Fit, PredictedTrue, true, 15.802),
        (InterventionId::Sdna, PredictedFalse, false, 0.086),
        (InterventionId::Sdna, PredictedFalse, true, 0.134),
        (InterventionId::Sdna, PredictedTrue, false, 0.911),
        (InterventionId::Sdna, PredictedTrue, true, 4.394),
    ];
    for (id, rs, c, want) in cond {
        let got = expected_v_info_given_result(p, Some(g(id.clone())), col, rs, c).unwrap();
        r.abs(&format!("E[v | {id} {rs}, col={c}]"), got, want, 0.01);
    }
    let single = [
        (InterventionId::Gfobt, 0.129),
        (InterventionId::Fit, 0.245),
        (InterventionId::BloodBased, 0.121),
        (InterventionId::Sdna, 0.197),
        (InterventionId::Ctc, 0.159),
        (InterventionId::Cc, 0.225),
        (InterventionId::Colonoscopy, 0.532),
    ];
    for (id, want) in single {
        let got = single_test_info(p, g(id.clone())).unwrap();
        r.abs(&format!("single {id}"), got, want, 0.01);
    }
    r.finish();
}

#[test]
fn elicitation() {
    let mut r = Report::new("elicitation");
    let t = Transcript::from_json_str(bundled::SAMPLE_TRANSCRIPT_JSON).unwrap();
    let out = t.replay(&PreferenceParams::default()).unwrap();
    let level3 = &out.estimates[&3];
    let want = [5.04, 10.57, 16.28, 6.40, 7.2, 6.17];
    r.check(format!("{} comfort-3 pairs", level3.len()), level3.len() == want.len());
    for (i, (&got, w)) in level3.iter().zip(want).enumerate() {
        r.abs(&format!("pair {}", i + 1), got, w, 0.02);
    }
    r.abs("λ1", out.lambdas[0], 4.01, 0.02);
    r.abs("λ2", out.lambdas[1], 4.17, 0.02);
    r.abs("λ3 median of replayed pairs", out.lambdas[2], 6.80, 0.02);
    r.abs(
        "λ3 median of tabulated pairs",
        robustify_lambda(&want).unwrap(),
        6.80,
        0.02,
    );
    r.abs("λ4", out.lambdas[3], 7.0, 0.0);
    r.finish();
}

#[test]
fn utility_calibration() {
    let mut r = Report::new("utility calibration");
    let p = PreferenceParams::default();
    let c = calibrate_utility(p.best, p.worst, p.pe_anchor, 6.80).unwrap();
    r.abs("a", c.a, 1.015, 0.002);
    r.abs("b", c.b, 0.872, 0.002);
    r.abs("ρ", c.rho, 0.039, 0.002);
    r.check(
        format!("residuals {:?} < 1e-6", c.residuals),
        c.residuals.iter().all(|x| x.abs() < 1e-6),
    );
    r.finish();
}

#[test]
fn individual_recommendations() {
    let mut r = Report::new("individual recommendations");
    let net = crc_network();
    let cat = default_catalog();
    let base = PreferenceParams::default();
    let low_rho = PreferenceParams {
        rho: 0.005,
        ..base.clone()
    };
    let p_of = |name: &str| net.posterior_crc(&bundled::profile(name).unwrap()).unwrap();
    let cases = [
        (
            "benchmark",
            p_of("benchmark"),
            &base,
            Strategy::no_screening(false),
            0.143,
            0.142,
        ),
        (
            "ρ=0.005",
            p_of("benchmark"),
            &low_rho,
            Strategy::test(InterventionId::Fit, ColRule::IF_POSITIVE),
            0.147,
            0.145,
        ),
        (
            "added evidence",
            p_of("benchmark_diabetes_hypertension"),
            &base,
            Strategy::test(InterventionId::Sdna, ColRule::IF_POSITIVE),
            0.146,
            0.145,
        ),
        (
            "p=0.1",
            p_of("family_history"),
            &base,
            Strategy::test(InterventionId::Fit, ColRule::NEVER),
            0.183,
            0.173,
        ),
    ];
    for (name, p, params, top, eu1, eu2) in cases {
        let ranked = recommend(p, &cat, params, None).unwrap();
        let per = best_per_method(&ranked);
        r.check(
            format!("{name}: top {} (want {top})", ranked[0].strategy),
            ranked[0].strategy == top,
        );
        r.abs(&format!("{name}: top EU"), ranked[0].expected_utility, eu1, 0.01);
        r.abs(
            &format!("{name}: second EU ({})", per[1].strategy),
            per[1].expected_utility,
            eu2,
            0.01,
        );
    }
    r.abs(
        "added-evidence posterior",
        p_of("benchmark_diabetes_hypertension"),
        0.0039,
        0.0001,
    );
    r.finish();
}

#[test]
fn device_benchmarking() {
    let mut r = Report::new("device benchmarking");
    let dev1 = InterventionSpec::test("Dev1", 0.85, 0.8, 250.0, 2);
    let dev2 = InterventionSpec::test("Dev2", 0.85, 0.94, 3.0, 3);
    let with = |d: &InterventionSpec| {
        let mut c = default_catalog();
        c.insert(d.clone()).unwrap();
        c
    };
    let d1 = device_dominance(&with(&dev1), &dev1.id).unwrap();
    r.check(
        format!("Dev1 dominated by {:?}", d1.by),
        d1.dominated && d1.by.contains(&InterventionId::Sdna),
    );
    let cat2 = with(&dev2);
    let d2 = device_dominance(&cat2, &dev2.id).unwrap();
    r.check("Dev2 non-dominated", !d2.dominated);
    let p = benchmark_p();
    let ranked = recommend(p, &cat2, &PreferenceParams::default(), None).unwrap();
    let dev_best = ranked.iter().find(|e| e.strategy.screening == dev2.id).unwrap();
    r.abs("Dev2 benchmark EU", dev_best.expected_utility, 0.179, 0.01);

    let tests = default_catalog();
    let others: Vec<&InterventionSpec> = tests.tests();
    let mut beaten_at = Vec::new();
    for i in 1..55 {
        let q = i as f64 / 100.0;
        let d = single_test_info(q, &dev2).unwrap();
        for o in &others {
            if single_test_info(q, o).unwrap() >= d {
                beaten_at.push(format!("{}@{q}", o.id));
            }
        }
    }
    r.check(
        format!("Dev2 curve above all tests on 0.01..0.54 (beaten at {beaten_at:?})"),
        beaten_at.is_empty(),
    );
    let low = 0.0009;
    let fit = single_test_info(low, tests.get(&InterventionId::Fit).unwrap()).unwrap();
    r.check(
        format!("FIT above Dev2 at p={low}"),
        fit > single_test_info(low, &dev2).unwrap(),
    );
    r.finish();
}

struct PopulationFixture {
    net: Network,
    catalog: InterventionCatalog,
    population: Population,
    cache: StrategyCache,
}

fn fixture() -> &'static PopulationFixture {
    static F: OnceLock<PopulationFixture> = OnceLock::new();
    F.get_or_init(|| {
        let net = crc_network();
        let catalog = default_catalog();
        let mut population =
            screenwise_core::population::generate_population(&net, 350_000, 2024, Exec::Parallel).unwrap();
        population.compute_posteriors(&net, Exec::Parallel).unwrap();
        let cache = StrategyCache::build(
            &population,
            &catalog,
            &PreferenceParams::default(),
            EvalOptions::default(),
        )
        .unwrap();
        PopulationFixture {
            net,
            catalog,
            population,
            cache,
        }
    })
}

/// Independent closed form of the detection probability under the
/// classification rule (colonoscopy result when one is done, otherwise the
/// screening result).
fn detection(strategy: &Strategy, catalog: &InterventionCatalog) -> f64 {
    let col = catalog.colonoscopy().sensitivity;
    if strategy.screening == InterventionId::NoScreening {
        return if strategy.colonoscopy_after(ResultState::NoResult) {
            col
        } else {
            0.0
        };
    }
    let se = catalog.get(&strategy.screening).unwrap().sensitivity;
    let on_pos = if strategy.colonoscopy_after(ResultState::PredictedTrue) {
        col
    } else {
        1.0
    };
    let on_neg = if strategy.colonoscopy_after(ResultState::PredictedFalse) {
        col
    } else {
        0.0
    };
    se * on_pos + (1.0 - se) * on_neg
}

fn sensitivity_oracle(r: &mut Report, label: &str, f: &PopulationFixture, alloc: &AllocationResult, runs: usize) {
    let rep = simulate(&f.population, alloc, &f.catalog, runs, 99, Exec::Parallel).unwrap();
    let (mut mean, mut var, mut pos) = (0.0, 0.0, 0.0);
    for (m, a) in f.population.members.iter().zip(&alloc.assignments) {
        if m.true_crc == Some(true) {
            let d = detection(&a.strategy, &f.catalog);
            mean += d;
            var += d * (1.0 - d);
            pos += 1.0;
        }
    }
    let analytic = mean / pos;
    let tp: f64 = rep.per_run.iter().map(|x| x.tp as f64).sum();
    let empirical = tp / (pos * runs as f64);
    let sigma = (var * runs as f64).sqrt() / (pos * runs as f64);
    r.check(
        format!(
            "(d) {label}: empirical sensitivity {empirical:.5} vs analytic {analytic:.5} (3σ = {:.5})",
            3.0 * sigma
        ),
        (empirical - analytic).abs() <= 3.0 * sigma,
    );
}

#[test]
fn population_results() {
    let mut r = Report::new("population results");
    let f = fixture();
    let limits = OperationalLimits::reference();

    // (a)
    let limited = allocate(&f.population, &f.cache, &limits, AllocationMode::Static);
    for (id, &cap) in &limits.caps {
        r.check(
            format!("(a) {id} used {} ≤ {cap}", limited.count(id)),
            limited.count(id) <= cap,
        );
    }
    r.check(
        format!(
            "(a) saturated FIT {} / sDNA {}",
            limited.count(&InterventionId::Fit),
            limited.count(&InterventionId::Sdna)
        ),
        limited.count(&InterventionId::Fit) == 42_000 && limited.count(&InterventionId::Sdna) == 6000,
    );
    r.check(
        "(a) one strategy per member",
        limited.assignments.len() == f.population.len()
            && limited.counts.values().sum::<u64>() == f.population.len() as u64,
    );

    // (b)
    let free = allocate(
        &f.population,
        &f.cache,
        &OperationalLimits::unlimited(),
        AllocationMode::Static,
    );
    let used: Vec<&InterventionId> = free
        .counts
        .iter()
        .filter(|(id, n)| **n > 0 && **id != InterventionId::NoScreening)
        .map(|(id, _)| id)
        .collect();
    r.check(
        format!("(b) unconstrained methods {used:?} ⊆ {{FIT, sDNA}}"),
        used.iter()
            .all(|id| matches!(id, InterventionId::Fit | InterventionId::Sdna)),
    );

    // (c)
    let band = ["54-64".to_string()];
    let baseline = national_baseline(&f.population, &f.net, &f.cache, "Age", &band, &InterventionId::Fit).unwrap();
    let budget = baseline.count(&InterventionId::Fit) as usize;
    let top = top_eu_for_test(&f.population, &f.cache, &InterventionId::Fit, budget).unwrap();
    let t = Instant::now();
    let sb = simulate(&f.population, &baseline, &f.catalog, 200, 7, Exec::Parallel).unwrap();
    let elapsed = t.elapsed();
    let st = simulate(&f.population, &top, &f.catalog, 200, 7, Exec::Parallel).unwrap();
    r.check(
        format!(
            "(c) detected {:.1} (EU-ordered) ≥ {:.1} (age band) at {budget} FIT",
            st.mean.tp, sb.mean.tp
        ),
        st.mean.tp >= sb.mean.tp,
    );
    r.check(
        format!("200-run simulation of 350k members in {elapsed:?} < 10 min"),
        elapsed < Duration::from_secs(600),
    );

    // (d)
    sensitivity_oracle(&mut r, "age band", f, &baseline, 200);
    sensitivity_oracle(&mut r, "unconstrained", f, &free, 200);

    // (e)
    let sweeps = sweep_lambda(
        &f.population,
        &f.catalog,
        &PreferenceParams::default(),
        &OperationalLimits::unlimited(),
        &[Default::default(), [(3u8, 6.3)].into(), [(1u8, 4.8), (2u8, 5.0)].into()],
        EvalOptions::default(),
    )
    .unwrap();
    r.check(
        format!(
            "(e) λ3=6.3 screenings {} < {}",
            sweeps[1].total_screened, sweeps[0].total_screened
        ),
        sweeps[1].total_screened < sweeps[0].total_screened,
    );
    let sdna = |i: usize| sweeps[i].counts.get(&InterventionId::Sdna).copied().unwrap_or(0);
    r.check(
        format!("(e) λ1=4.8, λ2=5 sDNA {} > {}", sdna(2), sdna(0)),
        sdna(2) > sdna(0),
    );
    r.finish();
}

// ---------------------------------------------------------------------------
// Oracle equivalence

fn random_network(rng: &mut ChaCha8Rng) -> Network {
    let n = rng.gen_range(2..=6);
    let mut variables = Vec::new();
    let mut parents = Vec::new();
    let mut tables = Vec::new();
    for i in 0..n {
        let k = rng.gen_range(2..=3);
        let name = format!("V{i}");
        let ps: Vec<usize> = (0..i).filter(|_| rng.gen_bool(0.5)).take(3).collect();
        let cols: usize = ps
            .iter()
            .map(|&p: &usize| variables.get(p).map_or(2, |v: &Variable| v.states.len()))
            .product();
        let mut t = Vec::with_capacity(cols * k);
        for _ in 0..cols {
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let s: f64 = w.iter().sum();
            t.extend(w.iter().map(|x| x / s));
        }
        variables.push(Variable {
            name,
            states: (0..k).map(|s| format!("s{s}")).collect(),
        });
        parents.push(ps.iter().map(|p| format!("V{p}")).collect());
        tables.push(t);
    }
    let target = format!("V{}", rng.gen_range(0..n));
    Network::new(variables, parents, tables, &target, None).unwrap()
}

/// Posterior by summing the full joint.
fn brute_force(net: &Network, evidence: &[Option<usize>], query: usize) -> Vec<f64> {
    let cards: Vec<usize> = net.variables().iter().map(|v| v.states.len()).collect();
    let mut out = vec![0.0; cards[query]];
    let mut full = vec![0usize; cards.len()];
    'outer: loop {
        if full.iter().zip(evidence).all(|(s, e)| e.is_none_or(|e| e == *s)) {
            out[full[query]] += net.joint_probability(&full);
        }
        for d in (0..cards.len()).rev() {
            full[d] += 1;
            if full[d] < cards[d] {
                continue 'outer;
            }
            full[d] = 0;
        }
        break;
    }
    let z: f64 = out.iter().sum();
    out.iter().map(|x| x / z).collect()
}

/// Binary entropy and branch information computed from scratch.
fn oracle_branch_info(p: f64, screen: Option<(f64, f64)>, col: (f64, f64), rs: Option<bool>, c: bool) -> f64 {
    let h = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
    let lik = |t: (f64, f64), pos: bool, crc: bool| match (crc, pos) {
        (true, true) => t.0,
        (true, false) => 1.0 - t.0,
        (false, true) => 1.0 - t.1,
        (false, false) => t.1,
    };
    let bayes = |q: f64, t: (f64, f64), pos: bool| {
        let a = lik(t, pos, true) * q;
        a / (a + lik(t, pos, false) * (1.0 - q))
    };
    let pmi = |after: f64, before: f64, crc: bool| {
        if crc {
            (after / before).ln()
        } else {
            ((1.0 - after) / (1.0 - before)).ln()
        }
    };
    let (q, ls) = match (screen, rs) {
        (Some(t), Some(pos)) => (bayes(p, t, pos), [lik(t, pos, false), lik(t, pos, true)]),
        _ => (p, [1.0, 1.0]),
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for crc in [false, true] {
        let w = if crc { p } else { 1.0 - p } * ls[usize::from(crc)];
        if w == 0.0 {
            continue;
        }
        den += w;
        if c {
            for pos in [false, true] {
                let wc = lik(col, pos, crc);
                if wc > 0.0 {
                    num += w * wc * (pmi(q, p, crc) + pmi(bayes(q, col, pos), q, crc)) / h;
                }
            }
        } else {
            num += w * pmi(q, p, crc) / h;
        }
    }
    num / den
}

fn draw_complication(rng: &mut ChaCha8Rng, comps: &[Complication]) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for c in comps {
        acc += c.probability;
        if u < acc {
            return c.cost;
        }
    }
    comps.last().map_or(0.0, |c| c.cost)
}

#[test]
fn oracle_equivalence() {
    let mut r = Report::new("oracle equivalence");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let net = random_network(&mut rng);
        let n = net.len();
        let mut ev = vec![None; n];
        for (v, slot) in ev.iter_mut().enumerate() {
            if rng.gen_bool(0.35) {
                *slot = Some(rng.gen_range(0..net.variables()[v].states.len()));
            }
        }
        let query = rng.gen_range(0..n);
        ev[query] = None;
        let exact = net.posterior_resolved(&ev, query).unwrap();
        let brute = brute_force(&net, &ev, query);
        for (a, b) in exact.iter().zip(&brute) {
            worst = worst.max((a - b).abs());
        }
    }
    r.check(
        format!("VE vs brute force on 200 networks: max error {worst:.2e} < 1e-9"),
        worst < 1e-9,
    );

    const SAMPLES: usize = 10_000_000;
    for cfg in 0..20 {
        let mut catalog = default_catalog();
        catalog
            .insert(
                InterventionSpec::test(
                    "RandomDevice",
                    rng.gen_range(0.5..0.99),
                    rng.gen_range(0.5..0.99),
                    rng.gen_range(0.0..600.0),
                    rng.gen_range(2..=3),
                )
                .with_complications(vec![
                    Complication {
                        kind: ComplicationKind::None,
                        probability: 0.99,
                        cost: 0.0,
                    },
                    Complication {
                        kind: ComplicationKind::Bleeding,
                        probability: 0.01,
                        cost: rng.gen_range(100.0..3000.0),
                    },
                ]),
            )
            .unwrap();
        let strategies = enumerate_strategies(&catalog);
        let strategy = strategies[rng.gen_range(0..strategies.len())].clone();
        let p = 10f64.powf(rng.gen_range(-3.5..-0.3));
        let params = PreferenceParams {
            rho: rng.gen_range(0.005..0.08),
            ..PreferenceParams::default()
        };
        let exact = evaluate_strategy(p, &strategy, &catalog, &params)
            .unwrap()
            .expected_utility;

        let spec = catalog.get(&strategy.screening).unwrap();
        let colspec = catalog.colonoscopy();
        let screened = strategy.screening != InterventionId::NoScreening;
        let screen_t = screened.then_some((spec.sensitivity, spec.specificity));
        let col_t = (colspec.sensitivity, colspec.specificity);
        // Branch information for each (result, colonoscopy) pair.
        let info = |rs: Option<bool>, c: bool| oracle_branch_info(p, screen_t, col_t, rs, c);
        let infos = [
            [info(Some(false), false), info(Some(false), true)],
            [info(Some(true), false), info(Some(true), true)],
            [info(None, false), info(None, true)],
        ];
        let lambda = |k: u8| params.lambdas[usize::from(k) - 1];
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..SAMPLES {
            let crc = rng.gen::<f64>() < p;
            let (slot, rs) = if screened {
                let u: f64 = rng.gen();
                let pos = if crc {
                    u < spec.sensitivity
                } else {
                    u >= spec.specificity
                };
                (
                    usize::from(pos),
                    if pos {
                        ResultState::PredictedTrue
                    } else {
                        ResultState::PredictedFalse
                    },
                )
            } else {
                (2, ResultState::NoResult)
            };
            let c = strategy.colonoscopy_after(rs);
            let mut cost = 0.0;
            if screened {
                cost += spec.unit_cost + draw_complication(&mut rng, &spec.complications);
            }
            if c {
                // The colonoscopy result only moves the information, which is
                // already averaged within the branch; draw it anyway.
                let _rc: f64 = rng.gen();
                cost += colspec.unit_cost + draw_complication(&mut rng, &colspec.complications);
            }
            let comfort = if c { 1 } else { spec.comfort.level() };
            let v = lambda(comfort) * infos[slot][usize::from(c)] - (cost + 1.0).log10();
            let u = params.a - params.b * (-params.rho * v).exp();
            sum += u;
            sq += u * u;
        }
        let n = SAMPLES as f64;
        let mean = sum / n;
        let sd = ((sq / n - mean * mean).max(0.0) * n / (n - 1.0)).sqrt();
        let se = sd / n.sqrt();
        let tol = (3.0 * se).max(1e-12);
        r.check(
            format!(
                "MC config {cfg} ({strategy}, p={p:.4}): exact {exact:.6} vs MC {mean:.6} ± {:.2e}",
                3.0 * se
            ),
            (exact - mean).abs() <= tol,
        );
    }
    r.finish();
}
