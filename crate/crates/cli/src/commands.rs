use std::collections::BTreeMap;
use std::path::Path;

use serde_json::json;

use screenwise_core::bundled;
use screenwise_core::info::{curves_csv, entropy, linear_grid, v_info_curve};
use screenwise_core::policy::{
    device_dominance, evaluate_all, rank, recommendation_report, ComplicationMode, EvalOptions,
};
use screenwise_core::population::{
    allocate, benchmark_device, generate_population, national_baseline, simulate, sweep_lambda, sweep_pe,
    AllocationMode, AllocationResult, OperationalLimits, Population, StrategyCache,
};
use screenwise_core::preference::{calibrate_utility, PeAnchor, PreferenceOverrides, Transcript};
use screenwise_core::screening::{default_catalog, Comfort};
use screenwise_core::{
    Evidence, Exec, InterventionCatalog, InterventionId, InterventionSpec, Network, PreferenceParams,
};

use crate::args::*;
use crate::config::{Config, LimitsSpec};
use crate::error::CliError;
use crate::output::{self, cost, num, prob, table, Output};

/// Curves longer than this are refused.
pub const MAX_CURVE_POINTS: usize = 10_000;

/// Model, catalog and parameters shared by the subcommands.
pub struct Ctx {
    pub net: Network,
    pub catalog: InterventionCatalog,
    /// Defaults with the config file's `[preferences]` applied.
    pub params: PreferenceParams,
    pub seed: u64,
    pub config: Config,
}

/// Fails with a usage error when a flag points at a missing file.
pub fn existing(path: &Path) -> Result<&Path, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::usage(format!("file `{}` does not exist", path.display())))
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = crate::read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

impl Ctx {
    pub fn load(
        model: Option<&str>,
        catalog: Option<&Path>,
        seed: Option<u64>,
        config: Config,
    ) -> Result<Self, CliError> {
        let net = match model.or(config.model.as_deref()) {
            None | Some("bundled") => bundled::crc_network(),
            Some(p) => Network::from_path(existing(Path::new(p))?)?,
        };
        let catalog = match catalog.or(config.catalog.as_deref()) {
            None => default_catalog(),
            Some(p) => InterventionCatalog::from_path(existing(p)?)?,
        };
        let params = config.preferences.overrides()?.apply(&PreferenceParams::default())?;
        Ok(Self {
            net,
            catalog,
            params,
            seed: seed.or(config.seed).unwrap_or(0),
            config,
        })
    }

    fn params(&self, prefs: &PreferenceArgs) -> Result<PreferenceParams, CliError> {
        let overrides = preference_overrides(prefs)?;
        let p = overrides.apply(&self.params)?;
        for w in p.monotonicity_warnings() {
            log::warn!("{w}");
        }
        Ok(p)
    }

    fn limits(&self, args: &LimitArgs, default: &str) -> Result<OperationalLimits, CliError> {
        let spec = match (&args.limits, &self.config.limits) {
            (Some(s), _) => LimitsSpec::Named(s.clone()),
            (None, Some(s)) => s.clone(),
            (None, None) => LimitsSpec::Named(default.to_owned()),
        };
        let mut limits = match spec {
            LimitsSpec::Caps(caps) => OperationalLimits { caps },
            LimitsSpec::Named(n) => match n.as_str() {
                "reference" => OperationalLimits::reference(),
                "none" => OperationalLimits::unlimited(),
                path => parse_json(existing(Path::new(path))?)?,
            },
        };
        for c in &args.cap {
            let (id, n) = split_pair(c, "--cap", "ID=N")?;
            let n: u64 = n
                .parse()
                .map_err(|_| CliError::usage(format!("--cap `{c}`: `{n}` is not a count")))?;
            limits.caps.insert(InterventionId::from(id), n);
        }
        for id in limits.caps.keys() {
            if *id != InterventionId::NoScreening {
                self.catalog.get(id)?;
            }
        }
        Ok(limits)
    }

    fn population(&self, args: &PopulationArgs) -> Result<Population, CliError> {
        let mut pop = match (&args.population, args.size) {
            (Some(p), _) => Population::from_path(&self.net, existing(p)?)?,
            (None, Some(n)) => generate_population(&self.net, n, self.seed, Exec::Parallel)?,
            (None, None) => return Err(CliError::usage("give --population FILE or --size N")),
        };
        pop.compute_posteriors(&self.net, Exec::Parallel)?;
        Ok(pop)
    }
}

fn split_pair<'a>(s: &'a str, flag: &str, form: &str) -> Result<(&'a str, &'a str), CliError> {
    s.split_once('=')
        .map(|(a, b)| (a.trim(), b.trim()))
        .ok_or_else(|| CliError::usage(format!("{flag} `{s}` is not of the form {form}")))
}

fn parse_f64(s: &str, flag: &str) -> Result<f64, CliError> {
    s.parse()
        .map_err(|_| CliError::usage(format!("{flag}: `{s}` is not a number")))
}

fn lambda_map(items: &[&str], flag: &str) -> Result<BTreeMap<u8, f64>, CliError> {
    items
        .iter()
        .map(|item| {
            let (k, v) = split_pair(item, flag, "LEVEL=VALUE")?;
            let k: u8 = k
                .parse()
                .map_err(|_| CliError::usage(format!("{flag}: `{k}` is not a comfort level")))?;
            Ok((k, parse_f64(v, flag)?))
        })
        .collect()
}

pub fn preference_overrides(a: &PreferenceArgs) -> Result<PreferenceOverrides, CliError> {
    let items: Vec<&str> = a.lambda.iter().map(String::as_str).collect();
    Ok(PreferenceOverrides {
        lambdas: lambda_map(&items, "--lambda")?,
        a: a.a,
        b: a.b,
        rho: a.rho,
        pe: a.pe,
        pe_info: a.pe_info,
        pe_cost: a.pe_cost,
        recalibrate: a.recalibrate,
    })
}

/// Profile file, bundled profile name (a `.json` suffix is ignored), then
/// `--evidence` pairs and the override.
pub fn evidence(a: &EvidenceArgs) -> Result<Evidence, CliError> {
    let mut ev = match &a.profile {
        None => Evidence::new(),
        Some(p) if Path::new(p).is_file() => parse_json(Path::new(p))?,
        Some(p) => {
            let name = Path::new(p).file_name().and_then(|n| n.to_str()).unwrap_or(p);
            let name = name.strip_suffix(".json").unwrap_or(name);
            bundled::profile(name).ok_or_else(|| {
                let known: Vec<&str> = bundled::PROFILES.iter().map(|(n, _)| *n).collect();
                CliError::usage(format!(
                    "`{p}` is neither a file nor a bundled profile ({})",
                    known.join(", ")
                ))
            })?
        }
    };
    for e in &a.evidence {
        let (var, state) = split_pair(e, "--evidence", "VAR=STATE")?;
        ev = ev.with(var, state);
    }
    if let Some(p) = a.prior_override {
        ev = ev.with_override(p);
    }
    Ok(ev)
}

fn alloc_mode(m: AllocModeArg) -> AllocationMode {
    match m {
        AllocModeArg::Static => AllocationMode::Static,
        AllocModeArg::Dynamic => AllocationMode::Dynamic,
    }
}

fn complication_mode(m: ModeArg) -> ComplicationMode {
    match m {
        ModeArg::InsideUtility => ComplicationMode::InsideUtility,
        ModeArg::ExpectedCost => ComplicationMode::ExpectedCost,
    }
}

pub fn infer(ctx: &Ctx, a: &EvidenceArgs) -> Result<Output, CliError> {
    let p = ctx.net.posterior_crc(&evidence(a)?)?;
    let h = entropy(p);
    let text = format!("p(CRC)   {}\nentropy  {}\n", prob(p), num(h));
    let csv = output::csv(&["p_crc", "entropy"], &[vec![prob(p), num(h)]]);
    Ok(Output::new(text, &json!({ "p_crc": p, "entropy": h }), Some(csv)))
}

pub fn recommend(ctx: &Ctx, a: &RecommendArgs) -> Result<Output, CliError> {
    let p = match a.p_crc {
        Some(p) => p,
        None => ctx.net.posterior_crc(&evidence(&a.evidence)?)?,
    };
    let params = ctx.params(&a.prefs)?;
    let options = EvalOptions {
        mode: complication_mode(a.complication_mode),
        ..Default::default()
    };
    let report = recommendation_report(p, &ctx.catalog, &params, a.top_k, options)?;
    let rows: Vec<Vec<String>> = report
        .strategies
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                e.label.clone(),
                num(e.expected_utility),
                cost(e.expected_cost),
                num(e.expected_info),
            ]
        })
        .collect();
    let header = ["rank", "strategy", "eu", "cost", "info"];
    let text = format!(
        "p(CRC) = {}, entropy = {}\n\n{}",
        prob(report.p_crc),
        num(report.entropy),
        table(&header, &rows)
    );
    Ok(Output::new(text, &report, Some(output::csv(&header, &rows))))
}

pub fn elicit(ctx: &Ctx, a: &ElicitArgs) -> Result<Output, CliError> {
    let path = Path::new(&a.transcript);
    let source = if path.is_file() {
        crate::read_input(path)?
    } else {
        if a.transcript != "sample" {
            return Err(CliError::usage(format!(
                "transcript `{}` does not exist (use `sample` for the bundled one)",
                a.transcript
            )));
        }
        bundled::SAMPLE_TRANSCRIPT_JSON.to_owned()
    };
    let mut transcript = Transcript::from_json_str(&source)?;
    if a.pe.is_some() {
        transcript.pe = a.pe;
    }
    let outcome = transcript.replay(&ctx.params)?;
    let rows: Vec<Vec<String>> = (1..=4u8)
        .map(|k| {
            let est = outcome.estimates.get(&k).map_or(String::new(), |v| {
                v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
            });
            vec![
                k.to_string(),
                format!("{:.4}", outcome.lambdas[usize::from(k) - 1]),
                est,
            ]
        })
        .collect();
    let mut text = table(&["comfort", "lambda", "pairwise estimates"], &rows);
    if let Some(c) = &outcome.calibration {
        text += &format!("\na = {:.6}, b = {:.6}, rho = {:.6}\n", c.a, c.b, c.rho);
    }
    for w in &outcome.warnings {
        text += &format!("warning: {w}\n");
    }
    let csv_rows: Vec<Vec<String>> = rows
        .into_iter()
        .map(|mut r| {
            r[2] = r[2].replace(' ', ";");
            r
        })
        .collect();
    Ok(Output::new(
        text,
        &outcome,
        Some(output::csv(&["comfort", "lambda", "estimates"], &csv_rows)),
    ))
}

pub fn calibrate(ctx: &Ctx, a: &CalibrateArgs) -> Result<Output, CliError> {
    let p = &ctx.params;
    let k =
        Comfort::new(p.calibration_comfort).ok_or_else(|| CliError::validation("calibration comfort out of range"))?;
    let lambda = a.lambda.unwrap_or(p.lambda(k));
    let pe = PeAnchor {
        cost: a.pe_cost.unwrap_or(p.pe_anchor.cost),
        info: a.pe_info.unwrap_or(p.pe_anchor.info),
        pe: a.pe.unwrap_or(p.pe_anchor.pe),
    };
    let c = calibrate_utility(p.best, p.worst, pe, lambda)?;
    let rows = vec![vec![num(c.a), num(c.b), num(c.rho)]];
    let text = format!(
        "{}\nresiduals  {:.2e} {:.2e} {:.2e}\nrisk-neutral PE  {}\n",
        table(&["a", "b", "rho"], &rows),
        c.residuals[0],
        c.residuals[1],
        c.residuals[2],
        num(c.linear_pe)
    );
    Ok(Output::new(text, &c, Some(output::csv(&["a", "b", "rho"], &rows))))
}

pub fn gen_population(ctx: &Ctx, a: &GenArgs) -> Result<Output, CliError> {
    let pop = generate_population(&ctx.net, a.size, ctx.seed, Exec::Parallel)?;
    let mut buf = Vec::new();
    pop.write_csv(&ctx.net, &mut buf)?;
    Ok(Output::csv_only(String::from_utf8(buf).expect("CSV is UTF-8")))
}

fn count_rows(catalog: &InterventionCatalog, counts: &BTreeMap<InterventionId, u64>) -> Vec<Vec<String>> {
    let mut ids: Vec<&InterventionId> = catalog.specs().map(|s| &s.id).collect();
    ids.extend(counts.keys().filter(|k| !ids.contains(k)).collect::<Vec<_>>());
    ids.into_iter()
        .map(|id| vec![id.to_string(), counts.get(id).copied().unwrap_or(0).to_string()])
        .collect()
}

fn allocation_text(catalog: &InterventionCatalog, r: &AllocationResult) -> String {
    let mut text = table(&["intervention", "members"], &count_rows(catalog, &r.counts));
    text += &format!(
        "\nscreened  {}\nmean EU   {}\n",
        r.total_screened(),
        num(r.mean_expected_utility())
    );
    if !r.exhausted.is_empty() {
        let e: Vec<String> = r.exhausted.iter().map(|i| i.to_string()).collect();
        text += &format!("exhausted {}\n", e.join(", "));
    }
    text
}

fn allocation_csv(r: &AllocationResult) -> String {
    let rows: Vec<Vec<String>> = r
        .assignments
        .iter()
        .map(|a| vec![a.member.to_string(), a.strategy.to_string(), num(a.expected_utility)])
        .collect();
    output::csv(&["member", "strategy", "eu"], &rows)
}

pub fn allocate_cmd(ctx: &Ctx, a: &AllocateArgs) -> Result<Output, CliError> {
    let params = ctx.params(&a.prefs)?;
    let limits = ctx.limits(&a.limits, "reference")?;
    let pop = ctx.population(&a.population)?;
    let cache = StrategyCache::build(&pop, &ctx.catalog, &params, EvalOptions::default())?;
    let r = allocate(&pop, &cache, &limits, alloc_mode(a.mode));
    Ok(Output::new(
        allocation_text(&ctx.catalog, &r),
        &r,
        Some(allocation_csv(&r)),
    ))
}

pub fn simulate_cmd(ctx: &Ctx, a: &SimulateArgs) -> Result<Output, CliError> {
    let params = ctx.params(&a.prefs)?;
    let pop = ctx.population(&a.population)?;
    let cache = StrategyCache::build(&pop, &ctx.catalog, &params, EvalOptions::default())?;
    let alloc = match &a.baseline_test {
        Some(t) => {
            let id = InterventionId::from(t.as_str());
            ctx.catalog.get(&id)?;
            national_baseline(&pop, &ctx.net, &cache, &a.band_variable, &a.band, &id)?
        }
        None => allocate(&pop, &cache, &ctx.limits(&a.limits, "reference")?, alloc_mode(a.mode)),
    };
    let sim = simulate(&pop, &alloc, &ctx.catalog, a.runs, ctx.seed, Exec::Parallel)?;
    let m = &sim.mean;
    let mut text = allocation_text(&ctx.catalog, &alloc);
    text += &format!(
        "\n{} runs, seed {}\nmean   TN {:.1}  FP {:.1}  FN {:.1}  TP {:.1}\nsd     TN {:.1}  FP {:.1}  FN {:.1}  TP {:.1}\n\
         sensitivity  {}\nprecision    {}\nF1           {}\ncost/patient {} (sd {})\n",
        sim.runs,
        sim.seed,
        m.tn,
        m.fp,
        m.fn_,
        m.tp,
        sim.sd.tn,
        sim.sd.fp,
        sim.sd.fn_,
        sim.sd.tp,
        num(sim.sensitivity),
        num(sim.precision),
        num(sim.f1),
        cost(sim.cost_per_patient),
        cost(sim.cost_per_patient_sd),
    );
    let rows: Vec<Vec<String>> = sim
        .per_run
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                i.to_string(),
                r.tn.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
                r.tp.to_string(),
                cost(r.total_cost),
                r.colonoscopies.to_string(),
            ]
        })
        .collect();
    let csv = output::csv(&["run", "tn", "fp", "fn", "tp", "total_cost", "colonoscopies"], &rows);
    Ok(Output::new(
        text,
        &json!({ "counts": alloc.counts, "exhausted": alloc.exhausted, "simulation": sim }),
        Some(csv),
    ))
}

fn device_spec(a: &DeviceArgs) -> Result<InterventionSpec, CliError> {
    if let Some(p) = &a.device {
        return parse_json(existing(p)?);
    }
    let (Some(name), Some(se), Some(sp), Some(c), Some(k)) = (&a.name, a.sensitivity, a.specificity, a.cost, a.comfort)
    else {
        return Err(CliError::usage(
            "give --device FILE or --name with --sensitivity, --specificity, --cost and --comfort",
        ));
    };
    if Comfort::new(k).is_none() {
        return Err(CliError::validation(format!("comfort level {k} is outside 1..=4")));
    }
    let spec = InterventionSpec::test(name.as_str(), se, sp, c, k);
    spec.validate()?;
    Ok(spec)
}

pub fn benchmark_device_cmd(ctx: &Ctx, a: &DeviceArgs) -> Result<Output, CliError> {
    let device = device_spec(a)?;
    let id = device.id.clone();
    let params = ctx.params(&a.prefs)?;
    let options = EvalOptions::default();
    let has_population = a.population.population.is_some() || a.population.size.is_some();
    let (dominance, device_eu, body, extra) = if has_population {
        let pop = ctx.population(&a.population)?;
        let limits = ctx.limits(&a.limits, "reference")?;
        let mut extended = ctx.catalog.clone();
        extended.insert(device.clone())?;
        let b = benchmark_device(
            device,
            &pop,
            &ctx.catalog,
            &params,
            &limits,
            &a.probe,
            a.runs,
            ctx.seed,
            options,
        )?;
        let extra = format!(
            "\n{}\nsensitivity  {}\nF1           {}\ncost/patient {}\n",
            allocation_text(&extended, &b.allocation),
            num(b.simulation.sensitivity),
            num(b.simulation.f1),
            cost(b.simulation.cost_per_patient)
        );
        (
            b.dominance.clone(),
            b.device_eu.clone(),
            serde_json::to_value(&b).expect("serializes"),
            extra,
        )
    } else {
        let mut catalog = ctx.catalog.clone();
        catalog.insert(device)?;
        let dominance = device_dominance(&catalog, &id)?;
        let device_eu = a
            .probe
            .iter()
            .map(|&p| {
                let best = rank(evaluate_all(p, &catalog, &params, options)?)
                    .into_iter()
                    .find(|e| e.strategy.screening == id)
                    .map_or(f64::NAN, |e| e.expected_utility);
                Ok((p, best))
            })
            .collect::<Result<Vec<_>, screenwise_core::Error>>()?;
        let body = json!({ "dominance": dominance, "device_eu": device_eu });
        (dominance, device_eu, body, String::new())
    };
    let mut text = if dominance.dominated {
        let by: Vec<String> = dominance.by.iter().map(|i| i.to_string()).collect();
        format!("{id} is dominated by {}\n", by.join(", "))
    } else {
        format!("{id} is not dominated\n")
    };
    if !dominance.ties.is_empty() {
        let t: Vec<String> = dominance.ties.iter().map(|i| i.to_string()).collect();
        text += &format!("ties with {}\n", t.join(", "));
    }
    let rows: Vec<Vec<String>> = device_eu.iter().map(|&(p, eu)| vec![prob(p), num(eu)]).collect();
    text += "\n";
    text += &table(&["p", "best device eu"], &rows);
    text += &extra;
    Ok(Output {
        text,
        json: Some(body),
        csv: Some(output::csv(&["p", "device_eu"], &rows)),
    })
}

pub fn curves(ctx: &Ctx, a: &CurveArgs) -> Result<Output, CliError> {
    let methods: Vec<&str> = a.methods.iter().map(|m| m.trim()).filter(|m| !m.is_empty()).collect();
    if methods.is_empty() {
        return Err(CliError::usage("--methods must list at least one method"));
    }
    if a.points == 0 || a.points > MAX_CURVE_POINTS {
        return Err(CliError::validation(format!(
            "--points must be in 1..={MAX_CURVE_POINTS}"
        )));
    }
    if !(a.lo > 0.0 && a.lo <= a.hi && a.hi < 1.0) {
        return Err(CliError::validation("need 0 < lo ≤ hi < 1"));
    }
    let specs: Vec<&InterventionSpec> = methods
        .iter()
        .map(|m| ctx.catalog.get(&InterventionId::from(*m)))
        .collect::<Result<_, _>>()?;
    let grid = linear_grid(a.lo, a.hi, a.points);
    let csv = curves_csv(&specs, &grid)?;
    let mut map = BTreeMap::new();
    for s in &specs {
        map.insert(s.id.to_string(), v_info_curve(s, &grid)?);
    }
    Ok(Output {
        text: csv.clone(),
        json: Some(json!({ "curves": map })),
        csv: Some(csv),
    })
}

fn count_columns(catalog: &InterventionCatalog) -> Vec<InterventionId> {
    catalog.specs().map(|s| s.id.clone()).collect()
}

pub fn sweep_pe_cmd(ctx: &Ctx, a: &SweepPeArgs) -> Result<Output, CliError> {
    let mut params = ctx.params(&PreferenceArgs {
        lambda: a.lambda.clone(),
        ..Default::default()
    })?;
    if let Some(pe) = a.pe {
        params.pe_anchor.pe = pe;
    }
    let limits = ctx.limits(&a.limits, "reference")?;
    let pop = ctx.population(&a.population)?;
    let points = sweep_pe(
        &pop,
        &ctx.catalog,
        &params,
        &limits,
        &a.pe_info,
        &a.pe_cost,
        EvalOptions::default(),
    )?;
    let ids = count_columns(&ctx.catalog);
    let mut header: Vec<String> = ["pe_info", "pe_cost", "a", "b", "rho", "screened"]
        .map(String::from)
        .to_vec();
    header.extend(ids.iter().map(|i| i.to_string()));
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut r = vec![
                num(p.pe_info),
                cost(p.pe_cost),
                num(p.a),
                num(p.b),
                num(p.rho),
                p.total_screened.to_string(),
            ];
            r.extend(ids.iter().map(|i| p.counts.get(i).copied().unwrap_or(0).to_string()));
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut text = table(&h, &rows);
    for p in points.iter().filter(|p| p.error.is_some()) {
        text += &format!(
            "pe_info {} pe_cost {}: {}\n",
            p.pe_info,
            p.pe_cost,
            p.error.as_deref().unwrap_or_default()
        );
    }
    Ok(Output::new(text, &points, Some(output::csv(&h, &rows))))
}

pub fn sweep_lambda_cmd(ctx: &Ctx, a: &SweepLambdaArgs) -> Result<Output, CliError> {
    let params = ctx.params(&a.prefs)?;
    let limits = ctx.limits(&a.limits, "reference")?;
    let pop = ctx.population(&a.population)?;
    let mut sets = vec![BTreeMap::new()];
    for s in &a.set {
        let items: Vec<&str> = s.split(',').filter(|x| !x.trim().is_empty()).collect();
        sets.push(lambda_map(&items, "--set")?);
    }
    let points = sweep_lambda(&pop, &ctx.catalog, &params, &limits, &sets, EvalOptions::default())?;
    let ids = count_columns(&ctx.catalog);
    let mut header: Vec<String> = ["lambda1", "lambda2", "lambda3", "lambda4", "screened"]
        .map(String::from)
        .to_vec();
    header.extend(ids.iter().map(|i| i.to_string()));
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut r: Vec<String> = p.lambdas.iter().map(|l| format!("{l:.4}")).collect();
            r.push(p.total_screened.to_string());
            r.extend(ids.iter().map(|i| p.counts.get(i).copied().unwrap_or(0).to_string()));
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    Ok(Output::new(table(&h, &rows), &points, Some(output::csv(&h, &rows))))
}
