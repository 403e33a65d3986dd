//! Posterior risk statistics, Bayes-risk scoring, Pareto extraction,
//! scenario-best probabilities and final selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::designspace::{Design, Topology};
use crate::error::{Error, Result};
use crate::evaluator::{EvaluationResult, Thresholds};
use crate::stats;

/// Score weights `(omega_c, omega_t, omega_e, lambda_s, lambda_h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub cost: f64,
    pub time: f64,
    pub emission: f64,
    pub service: f64,
    pub hold: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { cost: 0.25, time: 0.55, emission: 0.20, service: 0.5, hold: 0.5 }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.cost, self.time, self.emission, self.service, self.hold];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::validation("weights must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub alpha: f64,
    pub service_target: f64,
    pub hold_threshold: f64,
    pub eps_t: f64,
    pub eps_k: f64,
    pub weights: Weights,
}

impl RiskConfig {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds { service_target: self.service_target, hold_threshold: self.hold_threshold }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.service_target > 0.0 && self.hold_threshold > 0.0) {
            return Err(Error::validation("thresholds must be positive"));
        }
        if !(0.0..1.0).contains(&self.eps_t) || !(0.0..1.0).contains(&self.eps_k) {
            return Err(Error::validation("tolerances must lie in [0, 1)"));
        }
        self.weights.validate()
    }
}

/// Rockafellar–Uryasev CVaR of the empirical distribution, in closed form.
pub fn empirical_cvar(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::validation("CVaR of an empty sample"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    let zeta = sorted[var_index(alpha, b)];
    let excess: f64 = sorted.iter().map(|&y| (y - zeta).max(0.0)).sum();
    Ok(zeta + excess / ((1.0 - alpha) * b as f64))
}

/// Zero-based index of the `ceil(alpha B)` order statistic.
pub fn var_index(alpha: f64, b: usize) -> usize {
    let k = (alpha * b as f64 - 1e-9).ceil().max(1.0) as usize;
    k.min(b) - 1
}

/// Empirical VaR: the `ceil(alpha B)` order statistic.
pub fn empirical_var(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::validation("VaR of an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[var_index(alpha, sorted.len())])
}

/// Fraction of samples at or below `threshold`.
pub fn reliability(samples: &[f64], threshold: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::validation("reliability of an empty sample"));
    }
    Ok(samples.iter().filter(|&&y| y <= threshold).count() as f64 / samples.len() as f64)
}

/// Min-max range of one score component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut it = values.into_iter();
        let first = it.next()?;
        Some(it.fold(Self { min: first, max: first }, |r, v| Self { min: r.min.min(v), max: r.max.max(v) }))
    }

    /// `(v - min) / (max - min)`, or 0 when the range is degenerate.
    pub fn normalize(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub cost: Range,
    pub cvar: Range,
    pub emission: Range,
}

impl Normalizers {
    pub fn from_summaries(summaries: &[DesignSummary]) -> Result<Self> {
        let r = |f: fn(&DesignSummary) -> f64| {
            Range::of(summaries.iter().map(f)).ok_or_else(|| Error::validation("normalizers need at least one design"))
        };
        Ok(Self { cost: r(|s| s.mean_cost)?, cvar: r(|s| s.cvar_max_arrival)?, emission: r(|s| s.mean_emission)? })
    }

    fn validate(&self) -> Result<()> {
        for r in [self.cost, self.cvar, self.emission] {
            if !(r.min.is_finite() && r.max.is_finite() && r.max >= r.min) {
                return Err(Error::validation("normalizers must be finite with max >= min"));
            }
        }
        Ok(())
    }
}

/// Posterior summary of one design over a scenario set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub label: String,
    pub topology: Topology,
    /// 1-based hub ids joined by commas, or "--".
    pub hubs: String,
    pub direct_links: usize,
    pub capacity_multiplier: f64,
    pub direct_fraction: f64,
    pub mean_cost: f64,
    pub p95_cost: f64,
    pub mean_max_arrival: f64,
    pub p95_max_arrival: f64,
    pub cvar_max_arrival: f64,
    pub service_reliability: f64,
    pub hold_reliability: f64,
    pub mean_emission: f64,
    pub mean_max_hub_delay: f64,
    pub score: f64,
    pub feasible_service: bool,
    pub feasible_hold: bool,
}

impl DesignSummary {
    pub fn feasible(&self) -> bool {
        self.feasible_service && self.feasible_hold
    }
}

/// All summary fields except `score`, which is left at zero.
pub fn raw_summary(design: &Design, results: &[EvaluationResult], config: &RiskConfig) -> Result<DesignSummary> {
    if results.is_empty() {
        return Err(Error::validation(format!("no results to summarize for {}", design.label)));
    }
    let costs: Vec<f64> = results.iter().map(|r| r.total_cost).collect();
    let arrivals: Vec<f64> = results.iter().map(|r| r.max_arrival).collect();
    let delays: Vec<f64> = results.iter().map(|r| r.max_hub_delay).collect();
    let emissions: Vec<f64> = results.iter().map(|r| r.emission).collect();
    let service = reliability(&arrivals, config.service_target)?;
    let hold = reliability(&delays, config.hold_threshold)?;
    let hubs = if design.hubs.is_empty() {
        "--".to_string()
    } else {
        design.hubs.iter().map(|h| (h + 1).to_string()).collect::<Vec<_>>().join(",")
    };
    Ok(DesignSummary {
        label: design.label.clone(),
        topology: design.topology,
        hubs,
        direct_links: design.direct_links.len(),
        capacity_multiplier: design.capacity_multiplier,
        direct_fraction: design.direct_fraction,
        mean_cost: stats::mean(&costs),
        p95_cost: stats::quantile(&costs, 0.95),
        mean_max_arrival: stats::mean(&arrivals),
        p95_max_arrival: stats::quantile(&arrivals, 0.95),
        cvar_max_arrival: empirical_cvar(&arrivals, config.alpha)?,
        service_reliability: service,
        hold_reliability: hold,
        mean_emission: stats::mean(&emissions),
        mean_max_hub_delay: stats::mean(&delays),
        score: 0.0,
        feasible_service: service >= 1.0 - config.eps_t,
        feasible_hold: hold >= 1.0 - config.eps_k,
    })
}

/// Bayes-risk score of a summary under the given weights and normalizers.
pub fn score(s: &DesignSummary, w: &Weights, n: &Normalizers) -> f64 {
    w.cost * n.cost.normalize(s.mean_cost)
        + w.time * n.cvar.normalize(s.cvar_max_arrival)
        + w.emission * n.emission.normalize(s.mean_emission)
        + w.service * (1.0 - s.service_reliability)
        + w.hold * (1.0 - s.hold_reliability)
}

pub fn summarize_design(
    design: &Design,
    results: &[EvaluationResult],
    config: &RiskConfig,
    normalizers: &Normalizers,
) -> Result<DesignSummary> {
    normalizers.validate()?;
    let mut s = raw_summary(design, results, config)?;
    s.score = score(&s, &config.weights, normalizers);
    Ok(s)
}

/// Summaries of every design, scored with normalizers taken over the same set.
pub fn summarize_all(
    designs: &[Design],
    results: &[Vec<EvaluationResult>],
    config: &RiskConfig,
) -> Result<(Vec<DesignSummary>, Normalizers)> {
    if designs.len() != results.len() {
        return Err(Error::validation("one result list per design required"));
    }
    let raw: Vec<DesignSummary> =
        crate::par::map_range(designs.len(), |d| raw_summary(&designs[d], &results[d], config))
            .into_iter()
            .collect::<Result<_>>()?;
    let norms = Normalizers::from_summaries(&raw)?;
    Ok((rescore(&raw, &config.weights, &norms), norms))
}

/// Copies of `summaries` re-scored under new weights.
pub fn rescore(summaries: &[DesignSummary], weights: &Weights, normalizers: &Normalizers) -> Vec<DesignSummary> {
    summaries.iter().map(|s| DesignSummary { score: score(s, weights, normalizers), ..s.clone() }).collect()
}

/// Indices of points not dominated in `(x, y)` minimisation, in input order.
pub fn pareto_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(points[a].1.total_cmp(&points[b].1)));
    let mut keep = vec![false; points.len()];
    let mut best_prev = f64::INFINITY;
    let mut g = 0;
    while g < order.len() {
        let x = points[order[g]].0;
        let mut end = g;
        while end < order.len() && points[order[end]].0 == x {
            end += 1;
        }
        let group_min = points[order[g]].1;
        if group_min < best_prev {
            for &i in &order[g..end] {
                if points[i].1 == group_min {
                    keep[i] = true;
                }
            }
            best_prev = group_min;
        }
        g = end;
    }
    (0..points.len()).filter(|&i| keep[i]).collect()
}

/// Non-dominated summaries in `(mean_cost, cvar_max_arrival)`, in input order.
pub fn pareto_front(summaries: &[DesignSummary]) -> Vec<DesignSummary> {
    let pts: Vec<(f64, f64)> = summaries.iter().map(|s| (s.mean_cost, s.cvar_max_arrival)).collect();
    pareto_indices(&pts).into_iter().map(|i| summaries[i].clone()).collect()
}

fn rank_cmp(a: &DesignSummary, b: &DesignSummary) -> Ordering {
    b.feasible().cmp(&a.feasible()).then(a.score.total_cmp(&b.score)).then_with(|| a.label.cmp(&b.label))
}

/// Feasible-first ascending-score ranking; returns the winner and the order.
pub fn select_best(summaries: &[DesignSummary]) -> Result<(DesignSummary, Vec<usize>)> {
    if summaries.is_empty() {
        return Err(Error::validation("cannot select from an empty candidate set"));
    }
    let mut order: Vec<usize> = (0..summaries.len()).collect();
    order.sort_by(|&a, &b| rank_cmp(&summaries[a], &summaries[b]));
    Ok((summaries[order[0]].clone(), order))
}

/// Index of the selected design within each topology present, in `Topology::ALL` order.
pub fn best_by_topology(summaries: &[DesignSummary]) -> Vec<usize> {
    Topology::ALL
        .iter()
        .filter_map(|&t| {
            (0..summaries.len())
                .filter(|&i| summaries[i].topology == t)
                .min_by(|&a, &b| rank_cmp(&summaries[a], &summaries[b]))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBest {
    pub label: String,
    pub wins: usize,
    pub probability: f64,
    pub mean_loss: f64,
}

/// Per-winner fraction of scenarios in which it has the smallest
/// scenario-normalized loss; ties go to the smallest label.
pub fn scenario_best_probabilities(
    winners: &[(&str, &[EvaluationResult])],
    config: &RiskConfig,
) -> Result<Vec<ScenarioBest>> {
    let Some((_, first)) = winners.first() else {
        return Err(Error::validation("scenario-best needs at least one design"));
    };
    let b = first.len();
    if b == 0 {
        return Err(Error::validation("scenario-best needs at least one scenario"));
    }
    for (label, res) in winners {
        if res.len() != b || res.iter().zip(first.iter()).any(|(x, y)| x.scenario_id != y.scenario_id) {
            return Err(Error::validation(format!("scenario list for {label} does not match")));
        }
    }
    let w = &config.weights;
    let mut wins = vec![0usize; winners.len()];
    let mut loss_sum = vec![0.0; winners.len()];
    for s in 0..b {
        let col = |f: fn(&EvaluationResult) -> f64| Range::of(winners.iter().map(|(_, r)| f(&r[s]))).unwrap();
        let (rc, ra, re) = (col(|r| r.total_cost), col(|r| r.max_arrival), col(|r| r.emission));
        let mut best: Option<(f64, usize)> = None;
        for (d, (label, res)) in winners.iter().enumerate() {
            let r = &res[s];
            let loss = w.cost * rc.normalize(r.total_cost)
                + w.time * ra.normalize(r.max_arrival)
                + w.emission * re.normalize(r.emission)
                + w.service * f64::from(u8::from(r.max_arrival > config.service_target))
                + w.hold * f64::from(u8::from(r.max_hub_delay > config.hold_threshold));
            loss_sum[d] += loss;
            let better = match best {
                None => true,
                Some((bl, bd)) => loss < bl || (loss == bl && *label < winners[bd].0),
            };
            if better {
                best = Some((loss, d));
            }
        }
        wins[best.unwrap().1] += 1;
    }
    Ok(winners
        .iter()
        .enumerate()
        .map(|(d, (label, _))| ScenarioBest {
            label: label.to_string(),
            wins: wins[d],
            probability: wins[d] as f64 / b as f64,
            mean_loss: loss_sum[d] / b as f64,
        })
        .collect())
}
