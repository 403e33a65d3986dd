//! Scenario evaluation of a single design: allocation, routing, hub loads,
//! congestion-adjusted hub delays, arrival times, costs and emissions.
//!
//! Evaluation is two-pass. Pass one routes every OD pair with zero hub delay
//! and accumulates hub loads; hub delays are then fixed from those loads and
//! pass two re-routes once. Arrival times, final loads and costs come from
//! pass two, and `max_hub_delay` reports the delays pass two routed against.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use serde::{Deserialize, Serialize};

use crate::designspace::{Design, Topology};
use crate::error::{Error, Result};
use crate::ingest::NetworkData;
use crate::par;
use crate::posterior::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Millions per hub.
    pub fixed_hub_cost: f64,
    /// Millions per direct link.
    pub direct_link_open_cost: f64,
    /// Millions per parcel-distance on access legs.
    pub unit_access_cost: f64,
    /// Multiplier on access cost for inter-hub legs.
    pub interhub_discount: f64,
    /// Millions per parcel-distance on direct links.
    pub unit_direct_cost: f64,
    /// Millions per hub sort.
    pub sorting_cost_per_parcel: f64,
    /// Millions per unit of installed capacity (parcels/hour).
    pub capacity_install_cost: f64,
    /// Hours added at the origin of a direct route.
    pub local_service_time: f64,
    /// Emission units per parcel-distance.
    pub emission_rate: f64,
}

impl CostParams {
    pub fn sim_default() -> Self {
        Self {
            fixed_hub_cost: 0.08,
            direct_link_open_cost: 0.004,
            unit_access_cost: 2.0e-5,
            interhub_discount: 0.7,
            unit_direct_cost: 5.4e-5,
            sorting_cost_per_parcel: 1.5e-3,
            capacity_install_cost: 4.0e-3,
            local_service_time: 0.5,
            emission_rate: 1.0e-3,
        }
    }

    pub fn cab_default() -> Self {
        Self {
            fixed_hub_cost: 0.08,
            direct_link_open_cost: 0.004,
            unit_access_cost: 1.6e-6,
            interhub_discount: 0.7,
            unit_direct_cost: 2.4e-6,
            sorting_cost_per_parcel: 1.0e-4,
            capacity_install_cost: 2.0e-3,
            local_service_time: 0.5,
            emission_rate: 1.0e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.fixed_hub_cost,
            self.direct_link_open_cost,
            self.unit_access_cost,
            self.interhub_discount,
            self.unit_direct_cost,
            self.sorting_cost_per_parcel,
            self.capacity_install_cost,
            self.local_service_time,
            self.emission_rate,
        ];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::validation("cost parameters must be finite and nonnegative"));
        }
        if self.interhub_discount > 1.0 {
            return Err(Error::validation("interhub discount must not exceed 1"));
        }
        Ok(())
    }
}

/// Service target `T*` and hold threshold `d_t`, in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub service_target: f64,
    pub hold_threshold: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub fixed: f64,
    pub variable: f64,
    pub sorting: f64,
    pub capacity: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.fixed + self.variable + self.sorting + self.capacity
    }
}

/// Outcome of one design under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub scenario_id: usize,
    pub total_cost: f64,
    pub breakdown: CostBreakdown,
    pub max_arrival: f64,
    pub max_hub_delay: f64,
    /// Parcels sorted at each design hub; aligned with `Design::hubs`.
    pub hub_loads: Vec<f64>,
    pub service_ok: bool,
    pub hold_ok: bool,
    pub emission: f64,
}

/// `u + gamma u^2` with `u = load / (installed * reliability)`.
pub fn hub_delay(load: f64, installed: f64, reliability: f64, gamma: f64) -> Result<f64> {
    if !(installed > 0.0) {
        return Err(Error::validation(format!("installed capacity must be positive, got {installed}")));
    }
    if !(reliability > 0.0 && reliability <= 1.0) {
        return Err(Error::validation(format!("reliability must lie in (0, 1], got {reliability}")));
    }
    let u = load / (installed * reliability);
    Ok(u + gamma * u * u)
}

/// Hub sequence of a route, as positions into `Design::hubs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    Direct,
    OneHub(usize),
    TwoHub(usize, usize),
}

impl Path {
    fn visits(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            Path::Direct => (None, None),
            Path::OneHub(k) => (Some(k), None),
            Path::TwoHub(k, l) => (Some(k), Some(l)),
        };
        a.into_iter().chain(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Route {
    pub arrival: f64,
    pub path: Path,
    /// Per-parcel transport cost before the scenario cost multiplier.
    pub flow_cost: f64,
    /// Per-parcel distance with the inter-hub discount applied.
    pub weighted_distance: f64,
}

/// Allocation and direct-link lookups for one design on one network.
#[derive(Debug, Clone)]
pub struct RoutingPlan {
    n: usize,
    /// Hub positions each node may use, sorted by position.
    alloc: Vec<Vec<usize>>,
    direct: Vec<bool>,
    hub_nodes: Vec<usize>,
}

impl RoutingPlan {
    pub fn new(design: &Design, network: &NetworkData) -> Result<Self> {
        let n = network.node_count;
        let h = design.hubs.len();
        let mut direct = vec![false; n * n];
        for &(i, j) in &design.direct_links {
            if i >= n || j >= n || i == j {
                return Err(Error::validation(format!("direct link ({i},{j}) invalid for {}", design.label)));
            }
            direct[i * n + j] = true;
        }
        if design.hubs.iter().any(|&k| k >= n) {
            return Err(Error::validation(format!("hub index out of range in {}", design.label)));
        }
        let take = match design.topology {
            Topology::FC => 0,
            Topology::SAHS | Topology::DSAHS => 1.min(h),
            Topology::MAHS | Topology::DMAHS => h,
            Topology::RAHS | Topology::DRAHS => design.r.min(h),
        };
        let alloc = (0..n)
            .map(|i| {
                let mut by_distance: Vec<usize> = (0..h).collect();
                by_distance.sort_by(|&a, &b| {
                    let (ka, kb) = (design.hubs[a], design.hubs[b]);
                    network.distances.at(i, ka).total_cmp(&network.distances.at(i, kb)).then(ka.cmp(&kb))
                });
                let mut chosen: Vec<usize> = by_distance.into_iter().take(take).collect();
                chosen.sort_unstable();
                chosen
            })
            .collect();
        Ok(Self { n, alloc, direct, hub_nodes: design.hubs.clone() })
    }

    pub fn allocation(&self, node: usize) -> &[usize] {
        &self.alloc[node]
    }

    pub fn is_direct(&self, i: usize, j: usize) -> bool {
        self.direct[i * self.n + j]
    }

    fn hub_key(&self, p: Path) -> [usize; 2] {
        // Direct sorts before any hub list; a one-hub list sorts before its two-hub extensions.
        match p {
            Path::Direct => [0, 0],
            Path::OneHub(k) => [self.hub_nodes[k] + 1, 0],
            Path::TwoHub(k, l) => [self.hub_nodes[k] + 1, self.hub_nodes[l] + 1],
        }
    }

    fn better(&self, a: &Route, b: &Route) -> bool {
        match a.arrival.total_cmp(&b.arrival) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => match a.flow_cost.total_cmp(&b.flow_cost) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => self.hub_key(a.path) < self.hub_key(b.path),
            },
        }
    }

    /// Fastest admissible route from `i` to `j` given per-hub delays.
    pub fn route(
        &self,
        network: &NetworkData,
        scenario: &Scenario,
        params: &CostParams,
        hub_delays: &[f64],
        i: usize,
        j: usize,
    ) -> Option<Route> {
        let tau = &scenario.travel_time;
        let dist = &network.distances;
        let nodes = &self.hub_nodes;
        let disc = params.interhub_discount;
        let mut best: Option<Route> = None;
        let mut offer = |r: Route| {
            if best.as_ref().is_none_or(|b| self.better(&r, b)) {
                best = Some(r);
            }
        };
        if self.is_direct(i, j) {
            let d = dist.at(i, j);
            offer(Route {
                arrival: tau.at(i, j) + params.local_service_time,
                path: Path::Direct,
                flow_cost: d * params.unit_direct_cost,
                weighted_distance: d,
            });
        }
        let (ai, aj) = (&self.alloc[i], &self.alloc[j]);
        for &k in ai {
            let hk = nodes[k];
            for &l in aj {
                let hl = nodes[l];
                if k == l {
                    let d = dist.at(i, hk) + dist.at(hk, j);
                    offer(Route {
                        arrival: tau.at(i, hk) + hub_delays[k] + tau.at(hk, j),
                        path: Path::OneHub(k),
                        flow_cost: d * params.unit_access_cost,
                        weighted_distance: d,
                    });
                } else {
                    let access = dist.at(i, hk) + dist.at(hl, j);
                    let trunk = dist.at(hk, hl);
                    offer(Route {
                        arrival: tau.at(i, hk) + hub_delays[k] + tau.at(hk, hl) + hub_delays[l] + tau.at(hl, j),
                        path: Path::TwoHub(k, l),
                        flow_cost: access * params.unit_access_cost + trunk * params.unit_access_cost * disc,
                        weighted_distance: access + trunk * disc,
                    });
                }
            }
        }
        best
    }
}

/// Routes a single OD pair; builds the routing plan on the fly.
pub fn route_od(
    design: &Design,
    network: &NetworkData,
    scenario: &Scenario,
    params: &CostParams,
    hub_delays: &[f64],
    i: usize,
    j: usize,
) -> Result<Route> {
    let plan = RoutingPlan::new(design, network)?;
    plan.route(network, scenario, params, hub_delays, i, j).ok_or_else(|| Error::InfeasibleRoute {
        design: design.label.clone(),
        origin: i,
        destination: j,
    })
}

struct Pass {
    routes: Vec<Route>,
    loads: Vec<f64>,
}

fn route_all(
    plan: &RoutingPlan,
    design: &Design,
    network: &NetworkData,
    scenario: &Scenario,
    params: &CostParams,
    delays: &[f64],
) -> Result<Pass> {
    let n = network.node_count;
    let mut routes = Vec::with_capacity(n * n.saturating_sub(1));
    let mut loads = vec![0.0; design.hubs.len()];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = plan.route(network, scenario, params, delays, i, j).ok_or_else(|| Error::InfeasibleRoute {
                design: design.label.clone(),
                origin: i,
                destination: j,
            })?;
            let w = f64::from(scenario.demand.at(i, j));
            for k in r.path.visits() {
                loads[k] += w;
            }
            routes.push(r);
        }
    }
    Ok(Pass { routes, loads })
}

fn evaluate_with_plan(
    plan: &RoutingPlan,
    design: &Design,
    network: &NetworkData,
    scenario: &Scenario,
    params: &CostParams,
    thresholds: &Thresholds,
) -> Result<EvaluationResult> {
    let n = network.node_count;
    if scenario.demand.n() != n || scenario.travel_time.n() != n || scenario.hub_reliability.len() != n {
        return Err(Error::validation("scenario shape disagrees with network"));
    }
    let zero = vec![0.0; design.hubs.len()];
    let first = route_all(plan, design, network, scenario, params, &zero)?;
    let delays = design
        .hubs
        .iter()
        .enumerate()
        .map(|(k, &node)| {
            hub_delay(
                first.loads[k],
                design.hub_capacity[k],
                scenario.hub_reliability[node],
                design.congestion_gamma[k],
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let second = route_all(plan, design, network, scenario, params, &delays)?;

    let mut variable = 0.0;
    let mut emission_distance = 0.0;
    let mut max_arrival: f64 = 0.0;
    let mut idx = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = &second.routes[idx];
            idx += 1;
            let w = f64::from(scenario.demand.at(i, j));
            variable += w * r.flow_cost;
            emission_distance += w * r.weighted_distance;
            max_arrival = max_arrival.max(r.arrival);
        }
    }
    let sorts: f64 = second.loads.iter().sum();
    let breakdown = CostBreakdown {
        fixed: params.fixed_hub_cost * design.hubs.len() as f64
            + params.direct_link_open_cost * design.direct_links.len() as f64,
        variable: variable * scenario.cost_multiplier,
        sorting: params.sorting_cost_per_parcel * sorts,
        capacity: params.capacity_install_cost * design.total_capacity(),
    };
    let max_hub_delay = delays.iter().copied().fold(0.0, f64::max);
    Ok(EvaluationResult {
        scenario_id: scenario.scenario_id,
        total_cost: breakdown.total(),
        breakdown,
        max_arrival,
        max_hub_delay,
        hub_loads: second.loads,
        service_ok: max_arrival <= thresholds.service_target,
        hold_ok: max_hub_delay <= thresholds.hold_threshold,
        emission: params.emission_rate * emission_distance,
    })
}

/// Counts design-scenario evaluations performed through it.
#[derive(Debug, Default)]
pub struct EvaluationCounter(AtomicU64);

impl EvaluationCounter {
    pub fn get(&self) -> u64 {
        self.0.load(AtomicOrdering::Relaxed)
    }

    fn add(&self, n: usize) {
        self.0.fetch_add(n as u64, AtomicOrdering::Relaxed);
    }
}

/// Evaluation settings shared by every call, plus an evaluation counter.
#[derive(Debug)]
pub struct Evaluator<'a> {
    pub network: &'a NetworkData,
    pub params: CostParams,
    pub thresholds: Thresholds,
    pub counter: EvaluationCounter,
}

impl<'a> Evaluator<'a> {
    pub fn new(network: &'a NetworkData, params: CostParams, thresholds: Thresholds) -> Result<Self> {
        params.validate()?;
        if !(thresholds.service_target > 0.0 && thresholds.hold_threshold > 0.0) {
            return Err(Error::validation("thresholds must be positive"));
        }
        Ok(Self { network, params, thresholds, counter: EvaluationCounter::default() })
    }

    pub fn evaluations(&self) -> u64 {
        self.counter.get()
    }

    pub fn evaluate(&self, design: &Design, scenario: &Scenario) -> Result<EvaluationResult> {
        let plan = RoutingPlan::new(design, self.network)?;
        self.counter.add(1);
        evaluate_with_plan(&plan, design, self.network, scenario, &self.params, &self.thresholds)
    }

    /// One result per scenario, in scenario order.
    pub fn evaluate_batch(&self, design: &Design, scenarios: &[Scenario]) -> Result<Vec<EvaluationResult>> {
        let plan = RoutingPlan::new(design, self.network)?;
        self.counter.add(scenarios.len());
        par::map(scenarios, |s| evaluate_with_plan(&plan, design, self.network, s, &self.params, &self.thresholds))
            .into_iter()
            .collect()
    }

    /// Same as `evaluate_batch` but always on the calling thread.
    pub fn evaluate_batch_sequential(&self, design: &Design, scenarios: &[Scenario]) -> Result<Vec<EvaluationResult>> {
        let plan = RoutingPlan::new(design, self.network)?;
        self.counter.add(scenarios.len());
        scenarios
            .iter()
            .map(|s| evaluate_with_plan(&plan, design, self.network, s, &self.params, &self.thresholds))
            .collect()
    }

    /// Results indexed `[design][scenario]`, parallel over all pairs.
    pub fn evaluate_designs(&self, designs: &[Design], scenarios: &[Scenario]) -> Result<Vec<Vec<EvaluationResult>>> {
        let plans = designs.iter().map(|d| RoutingPlan::new(d, self.network)).collect::<Result<Vec<_>>>()?;
        let b = scenarios.len();
        self.counter.add(designs.len() * b);
        let flat = par::map_range(designs.len() * b, |idx| {
            let (d, s) = (idx / b.max(1), idx % b.max(1));
            evaluate_with_plan(&plans[d], &designs[d], self.network, &scenarios[s], &self.params, &self.thresholds)
        });
        let mut out: Vec<Vec<EvaluationResult>> = Vec::with_capacity(designs.len());
        let mut it = flat.into_iter();
        for _ in designs {
            out.push(it.by_ref().take(b).collect::<Result<Vec<_>>>()?);
        }
        Ok(out)
    }

    /// Sequential counterpart of `evaluate_designs`.
    pub fn evaluate_designs_sequential(
        &self,
        designs: &[Design],
        scenarios: &[Scenario],
    ) -> Result<Vec<Vec<EvaluationResult>>> {
        designs.iter().map(|d| self.evaluate_batch_sequential(d, scenarios)).collect()
    }
}

/// Convenience wrapper around `Evaluator::evaluate`.
pub fn evaluate_design(
    design: &Design,
    network: &NetworkData,
    scenario: &Scenario,
    params: &CostParams,
    thresholds: &Thresholds,
) -> Result<EvaluationResult> {
    Evaluator::new(network, params.clone(), *thresholds)?.evaluate(design, scenario)
}

/// Convenience wrapper around `Evaluator::evaluate_batch`.
pub fn evaluate_batch(
    design: &Design,
    network: &NetworkData,
    scenarios: &[Scenario],
    params: &CostParams,
    thresholds: &Thresholds,
) -> Result<Vec<EvaluationResult>> {
    Evaluator::new(network, params.clone(), *thresholds)?.evaluate_batch(design, scenarios)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designspace::design_label;
    use crate::matrix::Square;

    fn line_network(n: usize, hubs: Vec<usize>) -> NetworkData {
        NetworkData {
            node_count: n,
            distances: Square::from_fn(n, |i, j| (i as f64 - j as f64).abs() * 10.0),
            flows_baseline: Square::from_fn(n, |i, j| if i == j { 0.0 } else { 1.0 }),
            candidate_hubs: hubs,
            node_labels: (1..=n).collect(),
            demand_scale: 1.0,
        }
    }

    fn scenario(n: usize, w: u32, tau: impl Fn(usize, usize) -> f64) -> Scenario {
        Scenario {
            scenario_id: 0,
            demand: Square::from_fn(n, |i, j| if i == j { 0 } else { w }),
            travel_time: Square::from_fn(n, |i, j| if i == j { 0.0 } else { tau(i, j) }),
            hub_reliability: vec![1.0; n],
            cost_multiplier: 1.0,
        }
    }

    fn design(t: Topology, hubs: Vec<usize>, r: usize, cap: f64, direct: Vec<(usize, usize)>) -> Design {
        let h = hubs.len();
        Design {
            topology: t,
            label: design_label(t, &hubs, 1.0, None, None),
            hubs,
            r,
            capacity_multiplier: 1.0,
            direct_fraction: 0.0,
            direct_links: direct,
            hub_capacity: vec![cap; h],
            congestion_gamma: vec![0.0; h],
        }
    }

    fn thresholds() -> Thresholds {
        Thresholds { service_target: 100.0, hold_threshold: 10.0 }
    }

    #[test]
    fn hub_delay_examples() {
        assert_eq!(hub_delay(0.0, 25.0, 0.8, 0.05).unwrap(), 0.0);
        assert!((hub_delay(100.0, 25.0, 0.8, 0.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((hub_delay(100.0, 25.0, 0.8, 0.1).unwrap() - 7.5).abs() < 1e-12);
        assert!(hub_delay(1.0, 0.0, 0.8, 0.1).is_err());
        assert!(hub_delay(1.0, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn fc_arrival_is_direct() {
        let net = line_network(4, vec![]);
        let all: Vec<(usize, usize)> = crate::matrix::off_diagonal_pairs(4).collect();
        let d = design(Topology::FC, vec![], 0, 1.0, all);
        let s = scenario(4, 3, |i, j| 1.0 + (i * 4 + j) as f64);
        let params = CostParams::sim_default();
        for (i, j) in crate::matrix::off_diagonal_pairs(4) {
            let r = route_od(&d, &net, &s, &params, &[], i, j).unwrap();
            assert_eq!(r.arrival, s.travel_time.at(i, j) + params.local_service_time);
        }
        let res = evaluate_design(&d, &net, &s, &params, &thresholds()).unwrap();
        assert_eq!(res.max_hub_delay, 0.0);
        assert!(res.hold_ok);
        assert_eq!(res.breakdown.sorting, 0.0);
        assert_eq!(res.breakdown.capacity, 0.0);
        assert_eq!(res.breakdown.fixed, params.direct_link_open_cost * 12.0);
    }

    #[test]
    fn single_hub_sorted_once() {
        let net = line_network(3, vec![1]);
        let d = design(Topology::SAHS, vec![1], 0, 1.0, vec![]);
        let s = scenario(3, 1, |_, _| 2.0);
        let r = route_od(&d, &net, &s, &CostParams::sim_default(), &[4.0], 0, 2).unwrap();
        assert_eq!(r.arrival, 2.0 + 4.0 + 2.0);
        assert_eq!(r.path, Path::OneHub(0));
        let r = route_od(&d, &net, &s, &CostParams::sim_default(), &[4.0], 1, 2).unwrap();
        assert_eq!(r.arrival, 4.0 + 2.0);
    }

    #[test]
    fn empty_hubs_without_direct_is_infeasible() {
        let net = line_network(3, vec![1]);
        let d = design(Topology::SAHS, vec![], 0, 1.0, vec![]);
        let s = scenario(3, 1, |_, _| 1.0);
        assert!(matches!(
            route_od(&d, &net, &s, &CostParams::sim_default(), &[], 0, 2),
            Err(Error::InfeasibleRoute { .. })
        ));
    }

    #[test]
    fn mahs_route_matches_enumeration() {
        let net = line_network(3, vec![0, 2]);
        let tau = |i: usize, j: usize| [[0.0, 3.0, 7.0], [2.5, 0.0, 1.5], [6.0, 4.0, 0.0]][i][j];
        let s = scenario(3, 1, tau);
        let delays = [1.25, 0.5];
        let hubs = [0usize, 2];
        let d = design(Topology::DMAHS, vec![0, 2], 0, 1.0, vec![(1, 0)]);
        let params = CostParams::sim_default();
        for (i, j) in crate::matrix::off_diagonal_pairs(3) {
            let mut best = f64::INFINITY;
            if (i, j) == (1, 0) {
                best = best.min(tau(i, j) + params.local_service_time);
            }
            for k in 0..2 {
                for l in 0..2 {
                    let (hk, hl) = (hubs[k], hubs[l]);
                    let a = if k == l {
                        tau(i, hk) + delays[k] + tau(hk, j)
                    } else {
                        tau(i, hk) + delays[k] + tau(hk, hl) + delays[l] + tau(hl, j)
                    };
                    best = best.min(a);
                }
            }
            let r = route_od(&d, &net, &s, &params, &delays, i, j).unwrap();
            assert_eq!(r.arrival, best, "pair ({i},{j})");
        }
    }

    #[test]
    fn cost_matches_leg_sum() {
        // Hub at node 1; pairs route through it, (0,2) also has a direct link.
        let net = line_network(3, vec![1]);
        let s = scenario(3, 2, |i, j| if (i, j) == (0, 2) { 0.1 } else { 1.0 });
        let d = design(Topology::DSAHS, vec![1], 0, 4.0, vec![(0, 2)]);
        let p = CostParams::sim_default();
        let res = evaluate_design(&d, &net, &s, &p, &thresholds()).unwrap();
        // Hub-routed pairs: (0,1),(1,0),(1,2),(2,1) distance 10 each, (2,0) distance 20.
        let access = 2.0 * (4.0 * 10.0 + 20.0) * p.unit_access_cost;
        let direct = 2.0 * 20.0 * p.unit_direct_cost;
        assert!((res.breakdown.variable - (access + direct)).abs() < 1e-12);
        assert_eq!(res.hub_loads, vec![10.0]);
        assert!((res.breakdown.sorting - 10.0 * p.sorting_cost_per_parcel).abs() < 1e-12);
        assert!((res.breakdown.fixed - (p.fixed_hub_cost + p.direct_link_open_cost)).abs() < 1e-12);
        assert!((res.breakdown.capacity - 4.0 * p.capacity_install_cost).abs() < 1e-12);
        assert!((res.total_cost - res.breakdown.total()).abs() < 1e-9);
        assert!((res.emission - p.emission_rate * 2.0 * 80.0).abs() < 1e-12);
        assert_eq!(res.max_hub_delay, 10.0 / 4.0);
    }

    #[test]
    fn zero_demand_costs() {
        let net = line_network(3, vec![1]);
        let s = scenario(3, 0, |_, _| 1.0);
        let d = design(Topology::SAHS, vec![1], 0, 4.0, vec![]);
        let p = CostParams::sim_default();
        let res = evaluate_design(&d, &net, &s, &p, &thresholds()).unwrap();
        assert_eq!(res.breakdown.variable, 0.0);
        assert_eq!(res.breakdown.sorting, 0.0);
        assert_eq!(res.total_cost, res.breakdown.fixed + res.breakdown.capacity);
        assert_eq!(res.max_arrival, 2.0);
    }

    #[test]
    fn batch_order_and_duplicates() {
        let net = line_network(4, vec![1, 2]);
        let d = design(Topology::MAHS, vec![1, 2], 0, 3.0, vec![]);
        let mut scenarios: Vec<Scenario> = (0..6)
            .map(|b| {
                let mut s = scenario(4, b as u32, |i, j| 1.0 + ((i + j + b) % 3) as f64);
                s.scenario_id = b;
                s
            })
            .collect();
        scenarios.push(scenarios[2].clone());
        let p = CostParams::sim_default();
        let ev = Evaluator::new(&net, p, thresholds()).unwrap();
        let par = ev.evaluate_batch(&d, &scenarios).unwrap();
        let seq = ev.evaluate_batch_sequential(&d, &scenarios).unwrap();
        assert_eq!(par, seq);
        assert_eq!(par[2], par[6]);
        assert!(ev.evaluate_batch(&d, &[]).unwrap().is_empty());
        assert_eq!(ev.evaluations(), 14);
    }
}
