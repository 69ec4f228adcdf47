use std::collections::HashMap;
use std::sync::OnceLock;

use proptest::prelude::*;

use screenwise_core::bundled::crc_network;
use screenwise_core::par::Exec;
use screenwise_core::policy::EvalOptions;
use screenwise_core::population::{
    allocate, generate_population, simulate, AllocationMode, OperationalLimits, Population, StrategyCache,
};
use screenwise_core::screening::{default_catalog, InterventionId};
use screenwise_core::PreferenceParams;

fn population() -> &'static (Population, StrategyCache) {
    static P: OnceLock<(Population, StrategyCache)> = OnceLock::new();
    P.get_or_init(|| {
        let net = crc_network();
        let mut pop = generate_population(&net, 20_000, 11, Exec::Parallel).unwrap();
        pop.compute_posteriors(&net, Exec::Parallel).unwrap();
        let cache = StrategyCache::build(
            &pop,
            &default_catalog(),
            &PreferenceParams::default(),
            EvalOptions::default(),
        )
        .unwrap();
        (pop, cache)
    })
}

fn tight_limits() -> OperationalLimits {
    OperationalLimits::unlimited()
        .with(InterventionId::Sdna, 150)
        .with(InterventionId::Fit, 300)
        .with(InterventionId::Colonoscopy, 10)
}

#[test]
fn limits_hold_and_everyone_is_assigned() {
    let (pop, cache) = population();
    for mode in [AllocationMode::Static, AllocationMode::Dynamic] {
        for limits in [
            tight_limits(),
            OperationalLimits::reference(),
            OperationalLimits::zero(&default_catalog()),
        ] {
            let r = allocate(pop, cache, &limits, mode);
            assert_eq!(r.assignments.len(), pop.len());
            assert_eq!(r.counts.values().sum::<u64>(), pop.len() as u64);
            for (id, &n) in &r.counts {
                if let Some(cap) = limits.cap(id) {
                    assert!(n <= cap, "{id}: {n} > {cap}");
                }
            }
        }
    }
}

#[test]
fn removing_limits_never_lowers_a_members_eu() {
    let (pop, cache) = population();
    let free = allocate(pop, cache, &OperationalLimits::unlimited(), AllocationMode::Static);
    for mode in [AllocationMode::Static, AllocationMode::Dynamic] {
        let capped = allocate(pop, cache, &tight_limits(), mode);
        for (f, c) in free.assignments.iter().zip(&capped.assignments) {
            assert!(f.expected_utility >= c.expected_utility - 1e-15);
        }
    }
}

#[test]
fn zero_limits_leave_everyone_unscreened() {
    let (pop, cache) = population();
    let r = allocate(
        pop,
        cache,
        &OperationalLimits::zero(&default_catalog()),
        AllocationMode::Static,
    );
    assert_eq!(r.total_screened(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn allocation_ignores_member_order(seed in any::<u64>(), dynamic in any::<bool>()) {
        let (pop, cache) = population();
        let mode = if dynamic { AllocationMode::Dynamic } else { AllocationMode::Static };
        let a = allocate(pop, cache, &tight_limits(), mode);
        let mut shuffled = pop.clone();
        let n = shuffled.members.len();
        let mut s = seed | 1;
        for i in (1..n).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            shuffled.members.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let b = allocate(&shuffled, cache, &tight_limits(), mode);
        let by_id: HashMap<u64, _> = b.assignments.iter().map(|x| (x.member, &x.strategy)).collect();
        for x in &a.assignments {
            prop_assert_eq!(&x.strategy, by_id[&x.member]);
        }
        prop_assert_eq!(a.counts, b.counts);
    }
}

#[test]
fn confusion_rows_match_truth_and_metrics_agree() {
    let (pop, cache) = population();
    let alloc = allocate(pop, cache, &OperationalLimits::reference(), AllocationMode::Static);
    let positives = pop.members.iter().filter(|m| m.true_crc == Some(true)).count() as u64;
    let rep = simulate(pop, &alloc, &default_catalog(), 20, 5, Exec::Parallel).unwrap();
    for run in &rep.per_run {
        assert_eq!(run.tn + run.fp + run.fn_ + run.tp, pop.len() as u64);
        assert_eq!(run.tp + run.fn_, positives);
    }
    let m = rep.mean;
    let (sens, prec) = (m.tp / (m.tp + m.fn_), m.tp / (m.tp + m.fp));
    assert_eq!(rep.sensitivity, sens);
    assert_eq!(rep.precision, prec);
    assert_eq!(rep.f1, 2.0 * prec * sens / (prec + sens));
    for v in [rep.sensitivity, rep.precision, rep.f1] {
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn results_do_not_depend_on_threads_or_mode() {
    let net = crc_network();
    let cat = default_catalog();
    let mut a = generate_population(&net, 3000, 3, Exec::Parallel).unwrap();
    let mut b = generate_population(&net, 3000, 3, Exec::Sequential).unwrap();
    assert_eq!(a, b);
    a.compute_posteriors(&net, Exec::Parallel).unwrap();
    b.compute_posteriors(&net, Exec::Sequential).unwrap();
    assert_eq!(a, b);
    let cache = StrategyCache::build(&a, &cat, &PreferenceParams::default(), EvalOptions::default()).unwrap();
    let alloc = allocate(&a, &cache, &OperationalLimits::reference(), AllocationMode::Static);
    let par = simulate(&a, &alloc, &cat, 10, 8, Exec::Parallel).unwrap();
    let seq = simulate(&a, &alloc, &cat, 10, 8, Exec::Sequential).unwrap();
    let two = screenwise_core::par::with_threads(2, || simulate(&a, &alloc, &cat, 10, 8, Exec::Parallel).unwrap());
    assert_eq!(par, seq);
    assert_eq!(par, two);
}

#[test]
fn csv_round_trip_keeps_members() {
    let net = crc_network();
    let mut pop = generate_population(&net, 500, 21, Exec::Parallel).unwrap();
    let mut buf = Vec::new();
    pop.write_csv(&net, &mut buf).unwrap();
    let mut back = Population::read_csv(&net, buf.as_slice()).unwrap();
    pop.compute_posteriors(&net, Exec::Sequential).unwrap();
    back.compute_posteriors(&net, Exec::Sequential).unwrap();
    assert_eq!(pop, back);
}

#[test]
fn prevalence_tracks_the_model_marginal() {
    let (pop, _) = population();
    let net = crc_network();
    let marginal = net.posterior_crc(&Default::default()).unwrap();
    let n = pop.len() as f64;
    let cases = pop.members.iter().filter(|m| m.true_crc == Some(true)).count() as f64;
    let sigma = (n * marginal * (1.0 - marginal)).sqrt();
    assert!(
        (cases - n * marginal).abs() <= 3.0 * sigma,
        "{cases} vs {}",
        n * marginal
    );
}
