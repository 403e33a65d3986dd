//! Future stress testing, deterministic baselines, preference sensitivity and
//! the statistical harness for the CVaR and argmin consistency results.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::designspace::{Design, Topology};
use crate::error::{Error, Result};
use crate::evaluator::{EvaluationResult, Evaluator};
use crate::matrix::Square;
use crate::par;
use crate::posterior::{sample_one, PosteriorState, Scenario};
use crate::risk::{self, DesignSummary, Normalizers, RiskConfig, Weights};
use crate::rng::{self, tag};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressConfig {
    /// Multiplier on the Poisson demand intensity.
    pub amplification: f64,
    pub disruption_prob: f64,
    pub disruption_time_factor: f64,
    pub count: usize,
    pub seed: u64,
}

impl StressConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::validation("stress scenario count must be positive"));
        }
        if !(self.amplification > 0.0) || !(self.disruption_time_factor > 0.0) {
            return Err(Error::validation("stress factors must be positive"));
        }
        if !(0.0..=1.0).contains(&self.disruption_prob) {
            return Err(Error::validation("disruption probability must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Posterior-predictive scenarios with amplified demand and random arc
/// disruptions. With amplification 1 and probability 0 this reproduces
/// `sample_scenarios(state, count, seed)` exactly.
pub fn stress_scenarios(state: &PosteriorState, cfg: &StressConfig) -> Result<Vec<Scenario>> {
    cfg.validate()?;
    state.validate()?;
    Ok(par::map_range(cfg.count, |b| {
        let mut s = sample_one(state, cfg.seed, b, cfg.amplification);
        if cfg.disruption_prob > 0.0 {
            let mut g = rng::substream(cfg.seed, &[tag::STRESS_DISRUPTION, b as u64]);
            let n = s.travel_time.n();
            for i in 0..n {
                for j in 0..n {
                    if i != j && g.random::<f64>() < cfg.disruption_prob {
                        *s.travel_time.get_mut(i, j) *= cfg.disruption_time_factor;
                    }
                }
            }
        }
        s
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    /// Cheapest design meeting both thresholds in the nominal scenario.
    MeanOnly,
    /// Cheapest design in the nominal scenario, thresholds ignored.
    CostPriority,
}

/// Single scenario of posterior point summaries: rounded mean demand, median
/// travel times, mean hub reliabilities and the mean cost multiplier.
pub fn nominal_scenario(state: &PosteriorState) -> Scenario {
    let n = state.node_count();
    let demand = Square::from_fn(n, |i, j| if i == j { 0 } else { state.demand.get(i, j).mean().round() as u32 });
    let travel_time = Square::from_fn(n, |i, j| if i == j { 0.0 } else { state.traveltime.get(i, j).median() });
    let mut hub_reliability = vec![1.0; n];
    for (&h, p) in state.hubs.iter().zip(&state.hub_reliability) {
        hub_reliability[h] = p.mean();
    }
    let c = state.cost;
    let expected_var = if c.alpha > 1.0 { c.beta / (c.alpha - 1.0) } else { 0.0 };
    Scenario {
        scenario_id: 0,
        demand,
        travel_time,
        hub_reliability,
        cost_multiplier: (c.location + 0.5 * expected_var).exp(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineChoice {
    pub index: usize,
    pub nominal: EvaluationResult,
    /// False when no candidate met the nominal thresholds in mean-only mode.
    pub nominally_feasible: bool,
}

/// Deterministic design choice from one nominal scenario. Ties go to the
/// smaller label.
pub fn deterministic_baseline(
    candidates: &[Design],
    state: &PosteriorState,
    evaluator: &Evaluator<'_>,
    mode: BaselineMode,
) -> Result<BaselineChoice> {
    if candidates.is_empty() {
        return Err(Error::validation("deterministic baseline needs candidates"));
    }
    let nominal = nominal_scenario(state);
    let results = evaluator.evaluate_designs(candidates, std::slice::from_ref(&nominal))?;
    let cheapest = |filter: &dyn Fn(&EvaluationResult) -> bool| {
        (0..candidates.len()).filter(|&d| filter(&results[d][0])).min_by(|&a, &b| {
            results[a][0]
                .total_cost
                .total_cmp(&results[b][0].total_cost)
                .then_with(|| candidates[a].label.cmp(&candidates[b].label))
        })
    };
    let (index, feasible) = match mode {
        BaselineMode::CostPriority => (cheapest(&|_| true).unwrap(), true),
        BaselineMode::MeanOnly => match cheapest(&|r| r.service_ok && r.hold_ok) {
            Some(i) => (i, true),
            None => (cheapest(&|_| true).unwrap(), false),
        },
    };
    Ok(BaselineChoice { index, nominal: results[index][0].clone(), nominally_feasible: feasible })
}

/// Relative improvements of `new` over `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub cvar_reduction_pct: f64,
    pub p95_reduction_pct: f64,
    pub service_gain_pp: f64,
    pub hold_gain_pp: f64,
    pub cost_premium_pct: f64,
}

impl Gains {
    pub fn between(new: &DesignSummary, base: &DesignSummary) -> Self {
        Self {
            cvar_reduction_pct: reduction_pct(base.cvar_max_arrival, new.cvar_max_arrival),
            p95_reduction_pct: reduction_pct(base.p95_max_arrival, new.p95_max_arrival),
            service_gain_pp: (new.service_reliability - base.service_reliability) * 100.0,
            hold_gain_pp: (new.hold_reliability - base.hold_reliability) * 100.0,
            cost_premium_pct: (new.mean_cost - base.mean_cost) / base.mean_cost * 100.0,
        }
    }
}

pub fn reduction_pct(base: f64, new: f64) -> f64 {
    (base - new) / base * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub summary: DesignSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub methods: Vec<MethodMetrics>,
    pub baseline: usize,
    /// One entry per method, relative to `methods[baseline]`.
    pub gains: Vec<Gains>,
}

impl ComparisonReport {
    pub fn from_metrics(methods: Vec<MethodMetrics>, baseline: usize) -> Result<Self> {
        if baseline >= methods.len() {
            return Err(Error::validation("baseline index out of range"));
        }
        let base = methods[baseline].summary.clone();
        let gains = methods.iter().map(|m| Gains::between(&m.summary, &base)).collect();
        Ok(Self { methods, baseline, gains })
    }
}

/// Evaluates named designs on one shared scenario list and reports gains
/// relative to `baseline`. Scores use the supplied (training) normalizers.
pub fn compare_designs(
    designs: &[(String, Design)],
    scenarios: &[Scenario],
    evaluator: &Evaluator<'_>,
    config: &RiskConfig,
    normalizers: &Normalizers,
    baseline: usize,
) -> Result<ComparisonReport> {
    if designs.len() < 2 {
        return Err(Error::validation("comparison needs at least two designs"));
    }
    if scenarios.is_empty() {
        return Err(Error::validation("comparison needs scenarios"));
    }
    let only: Vec<Design> = designs.iter().map(|(_, d)| d.clone()).collect();
    let results = evaluator.evaluate_designs(&only, scenarios)?;
    let methods = designs
        .iter()
        .zip(&results)
        .map(|((name, d), res)| {
            Ok(MethodMetrics { method: name.clone(), summary: risk::summarize_design(d, res, config, normalizers)? })
        })
        .collect::<Result<Vec<_>>>()?;
    ComparisonReport::from_metrics(methods, baseline)
}

/// A named weight profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub name: String,
    pub weights: Weights,
}

/// Twenty `(omega_c, omega_t, omega_e)` rows with `lambda_s = lambda_h = 0.5`.
pub fn sim_weight_rows() -> Vec<WeightRow> {
    let mut rows = Vec::new();
    for (c, times) in [(15, 7), (25, 6), (35, 5), (45, 2)] {
        for k in 0..times {
            let t = 15 + 10 * k;
            let e = 100 - c - t;
            rows.push(WeightRow {
                name: format!("c{c:02}-t{t:02}-e{e:02}"),
                weights: Weights {
                    cost: f64::from(c) / 100.0,
                    time: f64::from(t) / 100.0,
                    emission: f64::from(e) / 100.0,
                    service: 0.5,
                    hold: 0.5,
                },
            });
        }
    }
    rows
}

pub fn cab_weight_rows() -> Vec<WeightRow> {
    let row = |name: &str, cost, time, emission, service, hold| WeightRow {
        name: name.to_string(),
        weights: Weights { cost, time, emission, service, hold },
    };
    vec![
        row("cost-dominant", 0.70, 0.20, 0.04, 0.03, 0.03),
        row("balanced", 0.55, 0.30, 0.05, 0.05, 0.05),
        row("tail-risk", 0.42, 0.38, 0.05, 0.08, 0.07),
        row("reliability", 0.30, 0.42, 0.05, 0.13, 0.10),
        row("time-critical", 0.25, 0.50, 0.05, 0.10, 0.10),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub profile: String,
    pub weights: Weights,
    pub selected: DesignSummary,
}

/// Re-scores cached summaries under each weight row and selects per row.
/// Performs no evaluations.
pub fn sensitivity_grid(
    summaries: &[DesignSummary],
    normalizers: &Normalizers,
    rows: &[WeightRow],
) -> Result<Vec<SensitivityRow>> {
    if rows.is_empty() {
        return Err(Error::validation("sensitivity grid needs at least one weight row"));
    }
    rows.iter()
        .map(|row| {
            row.weights.validate()?;
            let scored = risk::rescore(summaries, &row.weights, normalizers);
            let (selected, _) = risk::select_best(&scored)?;
            Ok(SensitivityRow { profile: row.name.clone(), weights: row.weights, selected })
        })
        .collect()
}

/// Closed-form CVaR of `exp(sigma Z)`, `Z ~ N(0, 1)`.
pub fn lognormal_cvar(sigma: f64, alpha: f64) -> f64 {
    let z = Normal::standard();
    let q = z.inverse_cdf(alpha);
    (0.5 * sigma * sigma).exp() * z.cdf(sigma - q) / (1.0 - alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub samples: usize,
    pub median_abs_error: f64,
}

/// Median over `replications` of `|CVaR_B - reference|` for each `B`.
pub fn cvar_error_curve<F>(
    seed: u64,
    sizes: &[usize],
    replications: usize,
    alpha: f64,
    reference: f64,
    draw: F,
) -> Result<Vec<ErrorPoint>>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes.is_empty() {
        return Err(Error::validation("harness sizes must be nonempty and increasing"));
    }
    sizes
        .iter()
        .enumerate()
        .map(|(si, &b)| {
            let errs = par::map_range(replications, |rep| {
                let mut g = rng::substream(seed, &[tag::HARNESS, 1, si as u64, rep as u64]);
                let xs: Vec<f64> = (0..b).map(|_| draw(&mut g)).collect();
                risk::empirical_cvar(&xs, alpha).map(|c| (c - reference).abs())
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
            Ok(ErrorPoint { samples: b, median_abs_error: stats::median(&errs) })
        })
        .collect()
}

/// Fraction of replications in which empirical CVaR selects the design with
/// the lower true risk. Losses are `mu_d + eta + xi_d` with a shared standard
/// normal `eta` and idiosyncratic `xi_d ~ N(0, 0.5^2)`; the true CVaRs differ by `gap`.
pub fn argmin_selection_frequency(seed: u64, samples: usize, replications: usize, gap: f64, alpha: f64) -> Result<f64> {
    let hits = par::map_range(replications, |rep| {
        let mut g = rng::substream(seed, &[tag::HARNESS, 2, rep as u64]);
        let mut a = Vec::with_capacity(samples);
        let mut b = Vec::with_capacity(samples);
        for _ in 0..samples {
            let eta: f64 = g.sample(StandardNormal);
            let xa: f64 = g.sample(StandardNormal);
            let xb: f64 = g.sample(StandardNormal);
            a.push(eta + 0.5 * xa);
            b.push(gap + eta + 0.5 * xb);
        }
        Ok::<bool, Error>(risk::empirical_cvar(&a, alpha)? < risk::empirical_cvar(&b, alpha)?)
    })
    .into_iter()
    .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / replications.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub cvar_curve: Vec<ErrorPoint>,
    pub cvar_decreasing: bool,
    pub selection_samples: usize,
    pub selection_frequency: f64,
    pub selection_pass: bool,
}

impl HarnessReport {
    pub fn passed(&self) -> bool {
        self.cvar_decreasing && self.selection_pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub sizes: Vec<usize>,
    pub cvar_replications: usize,
    pub alpha: f64,
    pub selection_samples: usize,
    pub selection_replications: usize,
    pub gap: f64,
    pub min_selection_frequency: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            sizes: vec![64, 256, 1024],
            cvar_replications: 100,
            alpha: 0.9,
            selection_samples: 2000,
            selection_replications: 200,
            gap: 0.2,
            min_selection_frequency: 0.99,
        }
    }
}

/// CVaR consistency on lognormal(0, 1) and argmin consistency under a gap.
pub fn theorem_harness(seed: u64, cfg: &HarnessConfig) -> Result<HarnessReport> {
    let reference = lognormal_cvar(1.0, cfg.alpha);
    let curve = cvar_error_curve(seed, &cfg.sizes, cfg.cvar_replications, cfg.alpha, reference, |g| {
        g.sample::<f64, _>(StandardNormal).exp()
    })?;
    let decreasing = curve.windows(2).all(|w| w[1].median_abs_error < w[0].median_abs_error);
    let freq = argmin_selection_frequency(seed, cfg.selection_samples, cfg.selection_replications, cfg.gap, cfg.alpha)?;
    Ok(HarnessReport {
        cvar_curve: curve,
        cvar_decreasing: decreasing,
        selection_samples: cfg.selection_samples,
        selection_frequency: freq,
        selection_pass: freq >= cfg.min_selection_frequency,
    })
}

/// Designs of the given topology, for callers that filter candidate lists.
pub fn of_topology(designs: &[Design], t: Topology) -> Vec<&Design> {
    designs.iter().filter(|d| d.topology == t).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::{sample_scenarios, BetaPosterior, GammaPosterior, NIGPosterior};

    fn state() -> PosteriorState {
        PosteriorState {
            demand: Square::filled(4, GammaPosterior { shape: 40.0, rate: 4.0 }),
            traveltime: Square::filled(4, NIGPosterior { location: 1.0, kappa: 20.0, alpha: 30.0, beta: 3.0 }),
            hub_reliability: vec![BetaPosterior { alpha: 90.0, beta: 10.0 }],
            cost: NIGPosterior { location: 0.0, kappa: 50.0, alpha: 50.0, beta: 0.5 },
            hubs: vec![1],
        }
    }

    fn stress(amplification: f64, p: f64, factor: f64, count: usize) -> StressConfig {
        StressConfig { amplification, disruption_prob: p, disruption_time_factor: factor, count, seed: 77 }
    }

    #[test]
    fn identity_stress_matches_sampling() {
        let st = state();
        assert_eq!(stress_scenarios(&st, &stress(1.0, 0.0, 1.8, 30)).unwrap(), sample_scenarios(&st, 30, 77).unwrap());
    }

    #[test]
    fn full_disruption_doubles_travel_times() {
        let st = state();
        let plain = sample_scenarios(&st, 10, 77).unwrap();
        let hit = stress_scenarios(&st, &stress(1.0, 1.0, 2.0, 10)).unwrap();
        for (p, h) in plain.iter().zip(&hit) {
            for (a, b) in p.travel_time.as_slice().iter().zip(h.travel_time.as_slice()) {
                assert_eq!(*b, 2.0 * a);
            }
            assert_eq!(p.demand, h.demand);
        }
    }

    #[test]
    fn amplified_demand_mean() {
        let st = state();
        let s = stress_scenarios(&st, &stress(1.22, 0.26, 1.8, 180)).unwrap();
        assert_eq!(s.len(), 180);
        let totals: Vec<f64> = s.iter().map(|x| x.total_demand() as f64).collect();
        let m = stats::mean(&totals);
        let se = (stats::variance(&totals) / 180.0).sqrt();
        let expect = 1.22 * st.mean_total_demand();
        assert!((m - expect).abs() < 3.0 * se, "{m} vs {expect} (se {se})");
        assert!(stress_scenarios(&st, &stress(1.0, 0.0, 1.8, 0)).is_err());
    }

    fn summary(cvar: f64, p95: f64, service: f64, hold: f64, cost: f64) -> DesignSummary {
        DesignSummary {
            label: "x".into(),
            topology: Topology::DSAHS,
            hubs: "4,8,3".into(),
            direct_links: 4,
            capacity_multiplier: 1.85,
            direct_fraction: 0.12,
            mean_cost: cost,
            p95_cost: cost,
            mean_max_arrival: 0.0,
            p95_max_arrival: p95,
            cvar_max_arrival: cvar,
            service_reliability: service,
            hold_reliability: hold,
            mean_emission: 0.0,
            mean_max_hub_delay: 0.0,
            score: 0.0,
            feasible_service: true,
            feasible_hold: true,
        }
    }

    #[test]
    fn gains_fixture() {
        let new = summary(78.484113, 69.957250, 0.900000, 0.833333, 12.538900);
        let base = summary(84.723397, 75.617107, 0.811111, 0.622222, 12.273285);
        let g = Gains::between(&new, &base);
        assert!((g.cvar_reduction_pct - 7.364298).abs() < 5e-6);
        assert!((g.p95_reduction_pct - 7.484889).abs() < 5e-6);
        assert!((g.service_gain_pp - 8.8889).abs() < 1e-3);
        assert!((g.hold_gain_pp - 21.1111).abs() < 1e-3);
        assert!((g.cost_premium_pct - 2.164174).abs() < 5e-6);
        let same = Gains::between(&base, &base);
        assert_eq!(
            (
                same.cvar_reduction_pct,
                same.p95_reduction_pct,
                same.service_gain_pp,
                same.hold_gain_pp,
                same.cost_premium_pct
            ),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn weight_rows() {
        let rows = sim_weight_rows();
        assert_eq!(rows.len(), 20);
        assert_eq!(rows[0].weights.emission, 0.70);
        assert_eq!(rows[19].weights.time, 0.25);
        for r in &rows {
            let w = r.weights;
            assert!((w.cost + w.time + w.emission - 1.0).abs() < 1e-9, "{}", r.name);
        }
        for r in cab_weight_rows() {
            let w = r.weights;
            assert!((w.cost + w.time + w.emission + w.service + w.hold - 1.0).abs() < 1e-9, "{}", r.name);
        }
        assert_eq!(cab_weight_rows().len(), 5);
    }

    #[test]
    fn lognormal_cvar_value() {
        // Reference from scipy: exp(0.5) * norm.cdf(1 - norm.ppf(0.9)) / 0.1.
        let v = lognormal_cvar(1.0, 0.9);
        assert!((v - 6.415894817744785).abs() < 1e-9, "{v}");
    }

    #[test]
    fn constant_generator_has_zero_error() {
        let curve = cvar_error_curve(3, &[8, 32], 5, 0.9, 2.5, |_| 2.5).unwrap();
        assert!(curve.iter().all(|p| p.median_abs_error == 0.0));
        assert!(cvar_error_curve(3, &[32, 8], 5, 0.9, 2.5, |_| 2.5).is_err());
    }
}
