use std::sync::OnceLock;

use hubnet::config::RunConfig;
use hubnet::designspace::{demand_distance_rank, direct_link_set, enumerate_all, Design, DesignGrid, Topology};
use hubnet::evaluator::{hub_delay, route_od, CostParams, Evaluator, Thresholds};
use hubnet::experiments::{stress_scenarios, StressConfig};
use hubnet::ingest::{synth_environment, NetworkData, RegimeConfig};
use hubnet::posterior::{fit_posterior, sample_scenarios, GammaPosterior, PosteriorState, PriorConfig, Scenario};
use hubnet::risk::{
    empirical_cvar, empirical_var, pareto_indices, scenario_best_probabilities, select_best, summarize_all,
    DesignSummary, Normalizers, RiskConfig, Weights,
};
use hubnet::{par, rng, verify};
use proptest::prelude::*;
use rand::Rng;

struct Fixture {
    network: NetworkData,
    state: PosteriorState,
    designs: Vec<Design>,
    scenarios: Vec<Scenario>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let regime = RegimeConfig::sim_default();
        let (network, panel) = synth_environment(11, &regime).unwrap();
        let speed = regime.travel.speed(&network.distances);
        let state = fit_posterior(&network, &panel, &PriorConfig::default(), speed).unwrap();
        let rank = demand_distance_rank(&state.mean_demand_matrix(), &network.distances);
        let designs = enumerate_all(&network, &DesignGrid::sim_default(), &rank, state.mean_total_demand()).unwrap();
        let scenarios = sample_scenarios(&state, 16, 5).unwrap();
        Fixture { network, state, designs, scenarios }
    })
}

fn thresholds() -> Thresholds {
    Thresholds { service_target: 60.0, hold_threshold: 5.0 }
}

fn evaluator(net: &NetworkData) -> Evaluator<'_> {
    Evaluator::new(net, CostParams::sim_default(), thresholds()).unwrap()
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0e3..1.0e3f64, 1..120)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cvar_equals_ru_minimum(y in samples(), alpha in 0.01..0.99f64) {
        let v = empirical_cvar(&y, alpha).unwrap();
        let brute = verify::brute_force_cvar(&y, alpha);
        prop_assert!((v - brute).abs() <= 1e-9 * brute.abs().max(1.0));
    }

    #[test]
    fn cvar_is_coherent(y in samples(), alpha in 0.01..0.98f64, bump in 0.0..1.0f64, c in -100.0..100.0f64, lam in 0.01..50.0f64) {
        let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale;
        let v = empirical_cvar(&y, alpha).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        prop_assert!(v >= mean - tol);
        prop_assert!(v >= empirical_var(&y, alpha).unwrap() - tol);
        let alpha2 = alpha + (0.99 - alpha) * bump;
        prop_assert!(empirical_cvar(&y, alpha2).unwrap() >= v - tol);
        let shifted: Vec<f64> = y.iter().map(|x| x + c).collect();
        prop_assert!((empirical_cvar(&shifted, alpha).unwrap() - (v + c)).abs() <= 1e-12 * (scale + c.abs()));
        let scaled: Vec<f64> = y.iter().map(|x| x * lam).collect();
        prop_assert!((empirical_cvar(&scaled, alpha).unwrap() - lam * v).abs() <= 1e-12 * lam * scale);
    }

    #[test]
    fn pareto_matches_pairwise_dominance(pts in prop::collection::vec((0u8..6, 0u8..6), 1..60)) {
        let pts: Vec<(f64, f64)> = pts.into_iter().map(|(a, b)| (f64::from(a), f64::from(b))).collect();
        prop_assert_eq!(pareto_indices(&pts), verify::brute_force_pareto(&pts));
    }

    #[test]
    fn pareto_matches_pairwise_dominance_continuous(pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..100)) {
        prop_assert_eq!(pareto_indices(&pts), verify::brute_force_pareto(&pts));
    }

    #[test]
    fn hub_delay_is_monotone(load in 0.0..5000.0f64, dl in 0.0..500.0f64, cap in 1.0..500.0f64, k in 1.0..3.0f64, rel in 0.05..1.0f64, gamma in 0.0..0.2f64) {
        let h = hub_delay(load, cap, rel, gamma).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(hub_delay(load + dl, cap, rel, gamma).unwrap() >= h);
        prop_assert!(hub_delay(load, cap * k, rel, gamma).unwrap() <= h);
        prop_assert!(hub_delay(load, cap, (rel * k).min(1.0), gamma).unwrap() <= h);
    }

    #[test]
    fn gamma_posterior_mean_shrinks(a in 0.1..20.0f64, b in 0.1..10.0f64, counts in prop::collection::vec(0u32..60, 1..30)) {
        let prior = GammaPosterior::new(a, b).unwrap();
        let total: u32 = counts.iter().sum();
        let sample_mean = f64::from(total) / counts.len() as f64;
        let post = prior.update(f64::from(total), counts.len() as f64);
        let (lo, hi) = if prior.mean() < sample_mean { (prior.mean(), sample_mean) } else { (sample_mean, prior.mean()) };
        if (prior.mean() - sample_mean).abs() > 1e-9 {
            prop_assert!(post.mean() > lo && post.mean() < hi);
        }
    }

    #[test]
    fn capacity_increase_never_hurts(d in 0usize..200, s in 0usize..16, k in 1.0..2.5f64) {
        let f = fixture();
        let hubbed: Vec<&Design> = f.designs.iter().filter(|d| !d.hubs.is_empty()).collect();
        let design = hubbed[d % hubbed.len()];
        let mut bigger = design.clone();
        bigger.capacity_multiplier *= k;
        bigger.hub_capacity.iter_mut().for_each(|c| *c *= k);
        let ev = evaluator(&f.network);
        let a = ev.evaluate(design, &f.scenarios[s]).unwrap();
        let b = ev.evaluate(&bigger, &f.scenarios[s]).unwrap();
        prop_assert!(b.max_hub_delay <= a.max_hub_delay);
        prop_assert!(b.max_arrival <= a.max_arrival);
    }

    #[test]
    fn reliability_increase_never_hurts(d in 0usize..200, s in 0usize..16, lift in 0.0..1.0f64) {
        let f = fixture();
        let hubbed: Vec<&Design> = f.designs.iter().filter(|d| !d.hubs.is_empty()).collect();
        let design = hubbed[d % hubbed.len()];
        let mut better = f.scenarios[s].clone();
        better.hub_reliability.iter_mut().for_each(|r| *r += (1.0 - *r) * lift);
        let ev = evaluator(&f.network);
        let a = ev.evaluate(design, &f.scenarios[s]).unwrap();
        let b = ev.evaluate(design, &better).unwrap();
        prop_assert!(b.max_hub_delay <= a.max_hub_delay);
    }

    #[test]
    fn adding_direct_link_never_slows_any_pair(d in 0usize..200, s in 0usize..16, i in 0usize..9, j in 0usize..9, delays in prop::collection::vec(0.0..10.0f64, 3)) {
        prop_assume!(i != j);
        let f = fixture();
        let candidates: Vec<&Design> = f.designs.iter().filter(|d| d.topology.allows_direct() && d.topology != Topology::FC).collect();
        let design = candidates[d % candidates.len()];
        let mut more = design.clone();
        if !more.direct_links.contains(&(i, j)) {
            more.direct_links.push((i, j));
            more.direct_links.sort_unstable();
        }
        let ev = evaluator(&f.network);
        let sc = &f.scenarios[s];
        let dl = &delays[..design.hubs.len()];
        for a in 0..9 {
            for b in 0..9 {
                if a == b { continue; }
                let before = route_od(design, &f.network, sc, &ev.params, dl, a, b).unwrap();
                let after = route_od(&more, &f.network, sc, &ev.params, dl, a, b).unwrap();
                prop_assert!(after.arrival <= before.arrival);
            }
        }
        let r0 = ev.evaluate(design, sc).unwrap();
        let r1 = ev.evaluate(&more, sc).unwrap();
        prop_assert!(r1.max_arrival <= r0.max_arrival);
        prop_assert!(r1.max_hub_delay <= r0.max_hub_delay);
    }

    #[test]
    fn cost_is_additive(d in 0usize..200, s in 0usize..16) {
        let f = fixture();
        let design = &f.designs[d % f.designs.len()];
        let r = evaluator(&f.network).evaluate(design, &f.scenarios[s]).unwrap();
        let b = r.breakdown;
        prop_assert!((r.total_cost - (b.fixed + b.variable + b.sorting + b.capacity)).abs() <= 1e-9);
        prop_assert!(r.max_hub_delay >= 0.0);
    }

    #[test]
    fn direct_sets_are_nested(f1 in 0.0..1.0f64, f2 in 0.0..1.0f64) {
        let f = fixture();
        let rank = demand_distance_rank(&f.state.mean_demand_matrix(), &f.network.distances);
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let small = direct_link_set(&f.network, &rank, lo);
        let large = direct_link_set(&f.network, &rank, hi);
        prop_assert!(small.iter().all(|p| large.contains(p)));
    }

    #[test]
    fn scenario_best_counts_are_exact(b in 1usize..40, designs in 1usize..6, seed in any::<u64>()) {
        let mut g = rng::substream(seed, &[1]);
        let results: Vec<Vec<hubnet::evaluator::EvaluationResult>> = (0..designs)
            .map(|_| (0..b).map(|s| {
                let mut r = dummy_result(s);
                r.total_cost = g.random_range(0.0..10.0);
                r.max_arrival = g.random_range(0.0..50.0);
                r.emission = g.random_range(0.0..5.0);
                r.max_hub_delay = g.random_range(0.0..10.0);
                r
            }).collect())
            .collect();
        let labels: Vec<String> = (0..designs).map(|d| format!("D{d}")).collect();
        let winners: Vec<(&str, &[hubnet::evaluator::EvaluationResult])> =
            labels.iter().zip(&results).map(|(l, r)| (l.as_str(), r.as_slice())).collect();
        let out = scenario_best_probabilities(&winners, &risk_config()).unwrap();
        let wins: usize = out.iter().map(|s| s.wins).sum();
        prop_assert_eq!(wins, b);
        for s in &out {
            prop_assert_eq!(s.probability, s.wins as f64 / b as f64);
        }
    }

    #[test]
    fn selection_ignores_affine_cost_rescaling(scale in 0.01..100.0f64, shift in -5.0..5.0f64) {
        let f = fixture();
        let cfg = risk_config();
        let summaries = summaries(f, &cfg);
        let (best, _) = select_best(&summaries).unwrap();
        let mut moved: Vec<DesignSummary> = summaries.clone();
        for s in &mut moved {
            s.mean_cost = s.mean_cost * scale + shift;
        }
        let norms = Normalizers::from_summaries(&moved).unwrap();
        let rescored = hubnet::risk::rescore(&moved, &cfg.weights, &norms);
        let (best2, _) = select_best(&rescored).unwrap();
        prop_assert_eq!(best.label, best2.label);
    }
}

fn dummy_result(scenario_id: usize) -> hubnet::evaluator::EvaluationResult {
    hubnet::evaluator::EvaluationResult {
        scenario_id,
        total_cost: 0.0,
        breakdown: Default::default(),
        max_arrival: 0.0,
        max_hub_delay: 0.0,
        hub_loads: Vec::new(),
        service_ok: true,
        hold_ok: true,
        emission: 0.0,
    }
}

fn risk_config() -> RiskConfig {
    RiskConfig {
        alpha: 0.9,
        service_target: 60.0,
        hold_threshold: 5.0,
        eps_t: 0.05,
        eps_k: 0.05,
        weights: Weights::default(),
    }
}

fn summaries(f: &Fixture, cfg: &RiskConfig) -> Vec<DesignSummary> {
    static S: OnceLock<Vec<DesignSummary>> = OnceLock::new();
    S.get_or_init(|| {
        let results = evaluator(&f.network).evaluate_designs(&f.designs, &f.scenarios).unwrap();
        summarize_all(&f.designs, &results, cfg).unwrap().0
    })
    .clone()
}

#[test]
fn labels_are_injective() {
    let f = fixture();
    let mut labels: Vec<&str> = f.designs.iter().map(|d| d.label.as_str()).collect();
    let n = labels.len();
    labels.sort_unstable();
    labels.dedup();
    assert_eq!(labels.len(), n);
    assert_eq!(n, 136);
}

#[test]
fn one_hub_variants_collapse() {
    let f = fixture();
    let ev = evaluator(&f.network);
    let one_hub: Vec<&Design> =
        f.designs.iter().filter(|d| d.hubs.len() == 1 && d.topology == Topology::DSAHS).collect();
    assert!(!one_hub.is_empty());
    for d in one_hub {
        let base = ev.evaluate_batch(d, &f.scenarios).unwrap();
        for t in [Topology::DMAHS, Topology::DRAHS] {
            let mut v = d.clone();
            v.topology = t;
            v.r = 1;
            assert_eq!(ev.evaluate_batch(&v, &f.scenarios).unwrap(), base);
        }
    }
}

#[test]
fn fc_never_holds() {
    let f = fixture();
    let fc = f.designs.iter().find(|d| d.topology == Topology::FC).unwrap();
    for r in evaluator(&f.network).evaluate_batch(fc, &f.scenarios).unwrap() {
        assert_eq!(r.max_hub_delay, 0.0);
        assert!(r.hold_ok);
    }
}

#[test]
fn sampling_is_thread_count_invariant() {
    let f = fixture();
    let a = par::with_threads(1, || sample_scenarios(&f.state, 40, 9).unwrap());
    let b = par::with_threads(8, || sample_scenarios(&f.state, 40, 9).unwrap());
    assert_eq!(a, b);
    for s in &a {
        assert!(s.hub_reliability.iter().all(|&r| r > 0.0 && r <= 1.0));
    }
}

#[test]
fn identity_stress_is_plain_sampling() {
    let f = fixture();
    let stressed = stress_scenarios(
        &f.state,
        &StressConfig { amplification: 1.0, disruption_prob: 0.0, disruption_time_factor: 2.0, count: 25, seed: 3 },
    )
    .unwrap();
    assert_eq!(stressed, sample_scenarios(&f.state, 25, 3).unwrap());
}

#[test]
fn predictive_demand_is_overdispersed() {
    let post = GammaPosterior::new(4.0, 0.5).unwrap();
    let mut g = rng::substream(17, &[0]);
    let n = 20_000;
    let xs: Vec<f64> = (0..n).map(|_| f64::from(post.sample_predictive(&mut g))).collect();
    let mean = hubnet::stats::mean(&xs);
    let var = hubnet::stats::variance(&xs);
    // loose standard error of the sample variance
    let se = var * (3.0 / n as f64).sqrt();
    assert!(var >= mean - 3.0 * se, "var {var} mean {mean}");
}

#[test]
fn default_configs_are_valid() {
    RunConfig::sim_default().validate().unwrap();
    RunConfig::cab_default().validate().unwrap();
}
