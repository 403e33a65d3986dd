//! Topology classes, structural constraints and candidate-design grids.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::NetworkData;
use crate::matrix::{off_diagonal_pairs, Square};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Topology {
    FC,
    SAHS,
    MAHS,
    RAHS,
    DSAHS,
    DMAHS,
    DRAHS,
}

impl Topology {
    pub const ALL: [Topology; 7] = [
        Topology::FC,
        Topology::SAHS,
        Topology::MAHS,
        Topology::RAHS,
        Topology::DSAHS,
        Topology::DMAHS,
        Topology::DRAHS,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Topology::FC => "FC",
            Topology::SAHS => "SAHS",
            Topology::MAHS => "MAHS",
            Topology::RAHS => "RAHS",
            Topology::DSAHS => "DSAHS",
            Topology::DMAHS => "DMAHS",
            Topology::DRAHS => "DRAHS",
        }
    }

    pub fn allows_direct(self) -> bool {
        matches!(self, Topology::FC | Topology::DSAHS | Topology::DMAHS | Topology::DRAHS)
    }

    pub fn has_allocation_bound(self) -> bool {
        matches!(self, Topology::RAHS | Topology::DRAHS)
    }

    pub fn is_single_allocation(self) -> bool {
        matches!(self, Topology::SAHS | Topology::DSAHS)
    }

    /// Pure hub-and-spoke counterpart of a direct variant.
    pub fn base(self) -> Topology {
        match self {
            Topology::DSAHS => Topology::SAHS,
            Topology::DMAHS => Topology::MAHS,
            Topology::DRAHS => Topology::RAHS,
            t => t,
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Topology::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation(format!("unknown topology {s:?}")))
    }
}

/// A fully specified candidate network design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub topology: Topology,
    /// Node indices, in candidate-list order.
    pub hubs: Vec<usize>,
    /// Allocation bound; meaningful for RAHS/DRAHS only.
    pub r: usize,
    pub capacity_multiplier: f64,
    pub direct_fraction: f64,
    /// Sorted ordered OD pairs.
    pub direct_links: Vec<(usize, usize)>,
    /// Installed sorting capacity per hub, parcels/hour; aligned with `hubs`.
    pub hub_capacity: Vec<f64>,
    /// Aligned with `hubs`.
    pub congestion_gamma: Vec<f64>,
    pub label: String,
}

impl Design {
    pub fn total_capacity(&self) -> f64 {
        self.hub_capacity.iter().sum()
    }

    pub fn hub_string(&self) -> String {
        hub_string(&self.hubs)
    }
}

fn hub_string(hubs: &[usize]) -> String {
    if hubs.is_empty() {
        "none".to_string()
    } else {
        hubs.iter().map(|h| (h + 1).to_string()).collect::<Vec<_>>().join("-")
    }
}

/// Deterministic label `TAG|H=..|cap=..[|dirq=..][|R=..]` with 1-based hub ids.
pub fn design_label(topology: Topology, hubs: &[usize], cap: f64, dirq: Option<f64>, r: Option<usize>) -> String {
    let mut s = format!("{}|H={}|cap={:.2}", topology.as_str(), hub_string(hubs), cap);
    if let Some(q) = dirq {
        s.push_str(&format!("|dirq={q:.2}"));
    }
    if let Some(r) = r {
        s.push_str(&format!("|R={r}"));
    }
    s
}

/// A direct-connection level: its label and, optionally, an explicit pair count
/// overriding `ceil(label * P)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectLevel {
    pub label: f64,
    #[serde(default)]
    pub count: Option<usize>,
}

impl DirectLevel {
    pub fn fraction(label: f64) -> Self {
        Self { label, count: None }
    }

    pub fn resolve_count(&self, pair_count: usize) -> usize {
        self.count.unwrap_or_else(|| fraction_count(self.label, pair_count)).min(pair_count)
    }
}

fn fraction_count(fraction: f64, pair_count: usize) -> usize {
    ((fraction * pair_count as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Enumeration grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignGrid {
    /// Inclusive subset-size range for single-allocation topologies.
    pub single_subset_sizes: (usize, usize),
    /// Inclusive subset-size range for multiple and R-allocation topologies.
    pub multi_subset_sizes: (usize, usize),
    pub capacity_levels: Vec<f64>,
    pub direct_levels: Vec<DirectLevel>,
    pub r_values: Vec<usize>,
    /// Reference sorting window `d_ref` in hours.
    pub sorting_window_hours: f64,
    pub congestion_gamma: f64,
}

impl DesignGrid {
    pub fn sim_default() -> Self {
        Self {
            single_subset_sizes: (1, 3),
            multi_subset_sizes: (2, 3),
            capacity_levels: vec![1.05, 1.40, 1.85],
            direct_levels: vec![DirectLevel::fraction(0.06), DirectLevel::fraction(0.12)],
            r_values: vec![2],
            sorting_window_hours: 8.0,
            congestion_gamma: 0.05,
        }
    }

    pub fn cab_default() -> Self {
        Self {
            single_subset_sizes: (1, 3),
            multi_subset_sizes: (1, 3),
            capacity_levels: vec![0.90, 1.10, 1.40, 1.65],
            direct_levels: vec![
                DirectLevel { label: 0.45, count: Some(44) },
                DirectLevel { label: 0.55, count: Some(56) },
                DirectLevel { label: 0.60, count: Some(68) },
                DirectLevel { label: 0.65, count: Some(76) },
            ],
            r_values: vec![1],
            sorting_window_hours: 8.0,
            congestion_gamma: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("single", self.single_subset_sizes), ("multi", self.multi_subset_sizes)] {
            if lo == 0 || lo > hi {
                return Err(Error::validation(format!("{name} subset size range ({lo}, {hi}) invalid")));
            }
        }
        if self.capacity_levels.is_empty() || self.capacity_levels.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::validation("capacity levels must be nonempty and positive"));
        }
        if self.direct_levels.is_empty() || self.direct_levels.iter().any(|d| !(0.0..=1.0).contains(&d.label)) {
            return Err(Error::validation("direct levels must be nonempty and in [0, 1]"));
        }
        if self.r_values.is_empty() || self.r_values.contains(&0) {
            return Err(Error::validation("R values must be nonempty and at least 1"));
        }
        if !(self.sorting_window_hours > 0.0) || !(self.congestion_gamma >= 0.0) {
            return Err(Error::validation("sorting window must be positive and gamma nonnegative"));
        }
        Ok(())
    }
}

/// All subsets of `items` with size in `[lo, hi]`, ordered by size, then by
/// position in `items`. Each subset preserves the order of `items`.
pub fn subsets_in_order(items: &[usize], lo: usize, hi: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    let mut out = Vec::new();
    for size in lo..=hi.min(n) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().map(|&p| items[p]).collect());
            let Some(pos) = (0..size).rev().find(|&p| idx[p] != p + n - size) else {
                break;
            };
            idx[pos] += 1;
            for q in pos + 1..size {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    out
}

/// Ordered OD pairs ranked by `demand_rank` descending, ties by `(origin, destination)`.
pub fn ranked_pairs(demand_rank: &Square<f64>) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = off_diagonal_pairs(demand_rank.n()).collect();
    pairs.sort_by(|&a, &b| demand_rank.at(b.0, b.1).total_cmp(&demand_rank.at(a.0, a.1)).then(a.cmp(&b)));
    pairs
}

/// The `count` top-ranked pairs, returned sorted.
pub fn direct_link_top(demand_rank: &Square<f64>, count: usize) -> Vec<(usize, usize)> {
    let mut top: Vec<(usize, usize)> = ranked_pairs(demand_rank).into_iter().take(count).collect();
    top.sort_unstable();
    top
}

/// The `ceil(fraction * P)` pairs with largest `demand_rank`.
pub fn direct_link_set(network: &NetworkData, demand_rank: &Square<f64>, fraction: f64) -> Vec<(usize, usize)> {
    let p = network.od_pair_count();
    direct_link_top(demand_rank, fraction_count(fraction.clamp(0.0, 1.0), p))
}

/// Ranking key used for direct links: mean demand times distance.
pub fn demand_distance_rank(mean_demand: &Square<f64>, distances: &Square<f64>) -> Square<f64> {
    Square::from_fn(mean_demand.n(), |i, j| mean_demand.at(i, j) * distances.at(i, j))
}

/// Per-hub installed capacity `cap * total / (|hubs| * d_ref)`.
pub fn hub_capacity(cap: f64, hub_count: usize, mean_total_demand: f64, sorting_window_hours: f64) -> f64 {
    cap * mean_total_demand / (hub_count.max(1) as f64 * sorting_window_hours)
}

/// Label fraction, sorted direct links and recorded `direct_fraction`.
type DirectOption = (Option<f64>, Vec<(usize, usize)>, f64);

/// Enumerates candidate designs for one topology.
pub fn enumerate_designs(
    network: &NetworkData,
    grid: &DesignGrid,
    topology: Topology,
    demand_rank: &Square<f64>,
    mean_total_demand: f64,
) -> Result<Vec<Design>> {
    grid.validate()?;
    if demand_rank.n() != network.node_count || demand_rank.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("demand rank must be a finite n x n matrix"));
    }
    if !(mean_total_demand >= 0.0) {
        return Err(Error::validation("mean total demand must be nonnegative"));
    }
    let n = network.node_count;
    if topology == Topology::FC {
        let all: Vec<(usize, usize)> = off_diagonal_pairs(n).collect();
        return Ok(vec![Design {
            topology,
            hubs: Vec::new(),
            r: 0,
            capacity_multiplier: 1.0,
            direct_fraction: 1.0,
            direct_links: all,
            hub_capacity: Vec::new(),
            congestion_gamma: Vec::new(),
            label: design_label(topology, &[], 1.0, None, None),
        }]);
    }
    if network.candidate_hubs.is_empty() {
        return Err(Error::validation(format!("{topology} requires at least one candidate hub")));
    }
    let (lo, hi) = if topology.is_single_allocation() { grid.single_subset_sizes } else { grid.multi_subset_sizes };
    let subsets = subsets_in_order(&network.candidate_hubs, lo, hi);
    let ranked = ranked_pairs(demand_rank);
    let direct_options: Vec<DirectOption> = if topology.allows_direct() {
        let p = network.od_pair_count();
        grid.direct_levels
            .iter()
            .map(|lvl| {
                let count = lvl.resolve_count(p);
                let mut set: Vec<(usize, usize)> = ranked[..count].to_vec();
                set.sort_unstable();
                (Some(lvl.label), set, lvl.label)
            })
            .collect()
    } else {
        vec![(None, Vec::new(), 0.0)]
    };
    let r_options: Vec<Option<usize>> =
        if topology.has_allocation_bound() { grid.r_values.iter().map(|&r| Some(r)).collect() } else { vec![None] };

    let mut out = Vec::new();
    for hubs in &subsets {
        for &cap in &grid.capacity_levels {
            let e = hub_capacity(cap, hubs.len(), mean_total_demand, grid.sorting_window_hours);
            for (dirq, links, fraction) in &direct_options {
                for &r in &r_options {
                    if r.is_some_and(|r| r > hubs.len()) {
                        continue;
                    }
                    out.push(Design {
                        topology,
                        hubs: hubs.clone(),
                        r: r.unwrap_or(0),
                        capacity_multiplier: cap,
                        direct_fraction: *fraction,
                        direct_links: links.clone(),
                        hub_capacity: vec![e; hubs.len()],
                        congestion_gamma: vec![grid.congestion_gamma; hubs.len()],
                        label: design_label(topology, hubs, cap, *dirq, r),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Every topology's designs, concatenated in `Topology::ALL` order.
pub fn enumerate_all(
    network: &NetworkData,
    grid: &DesignGrid,
    demand_rank: &Square<f64>,
    mean_total_demand: f64,
) -> Result<Vec<Design>> {
    let per: Vec<Result<Vec<Design>>> =
        crate::par::map(&Topology::ALL, |&t| enumerate_designs(network, grid, t, demand_rank, mean_total_demand));
    let mut out = Vec::new();
    for designs in per {
        out.extend(designs?);
    }
    Ok(out)
}

pub const VIOLATION_FC_HUBS: &str = "FC requires empty hub set";
pub const VIOLATION_PURE_DIRECT: &str = "pure hub-and-spoke forbids direct links";
pub const VIOLATION_R_EXCEEDS: &str = "R exceeds hub count";

/// Checks every structural invariant; returns all violations found.
pub fn validate_design(design: &Design, network: &NetworkData) -> std::result::Result<(), Vec<String>> {
    let mut v: Vec<String> = Vec::new();
    let n = network.node_count;
    let t = design.topology;
    if t == Topology::FC {
        if !design.hubs.is_empty() {
            v.push(VIOLATION_FC_HUBS.to_string());
        }
        if design.direct_links.len() != network.od_pair_count() {
            v.push("FC requires every ordered OD pair as a direct link".to_string());
        }
    } else {
        if design.hubs.is_empty() {
            v.push(format!("{t} requires a nonempty hub set"));
        }
        if !t.allows_direct() && !design.direct_links.is_empty() {
            v.push(VIOLATION_PURE_DIRECT.to_string());
        }
    }
    if t.has_allocation_bound() {
        if design.r == 0 {
            v.push("R must be at least 1".to_string());
        } else if design.r > design.hubs.len() {
            v.push(VIOLATION_R_EXCEEDS.to_string());
        }
    }
    for &h in &design.hubs {
        if !network.candidate_hubs.contains(&h) {
            v.push(format!("hub {} is not a candidate hub", h + 1));
        }
    }
    let mut seen = design.hubs.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != design.hubs.len() {
        v.push("hub set contains duplicates".to_string());
    }
    if design.hub_capacity.len() != design.hubs.len() || design.congestion_gamma.len() != design.hubs.len() {
        v.push("hub capacity and gamma must align with hubs".to_string());
    }
    if design.hub_capacity.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        v.push("hub capacity must be positive".to_string());
    }
    if design.congestion_gamma.iter().any(|&g| !(g >= 0.0) || !g.is_finite()) {
        v.push("congestion gamma must be nonnegative".to_string());
    }
    if !(design.capacity_multiplier > 0.0) {
        v.push("capacity multiplier must be positive".to_string());
    }
    if !(0.0..=1.0).contains(&design.direct_fraction) {
        v.push("direct fraction must lie in [0, 1]".to_string());
    }
    if design.direct_links.iter().any(|&(i, j)| i == j || i >= n || j >= n) {
        v.push("direct links must be ordered OD pairs of distinct nodes".to_string());
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}
