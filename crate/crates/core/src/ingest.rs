//! Network data and historical panels.
//!
//! Two sources feed the pipeline: the CAB25 benchmark (a 25-node flow matrix
//! followed by a 25-node distance matrix in plain text) and a synthetic
//! nine-node multi-regime environment. In both cases a daily operational panel
//! is generated around a static baseline, with regime-dependent demand,
//! travel-time and hub-reliability behaviour.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Square;
use crate::rng::{self, tag};

/// Node count of the CAB benchmark.
pub const CAB_NODES: usize = 25;

/// Default CAB subnetwork (1-based source labels).
pub const CAB_DEFAULT_SUBSET: [usize; 12] = [3, 4, 6, 7, 9, 12, 14, 17, 18, 21, 22, 25];

/// Default CAB candidate hubs as 0-based case-study indices (1-based: 12, 1, 3, 5).
pub const CAB_DEFAULT_HUBS: [usize; 4] = [11, 0, 2, 4];

/// Default mean off-diagonal scaled daily OD demand for CAB.
pub const CAB_TARGET_MEAN_DEMAND: f64 = 24.0;

/// Static network: distances, baseline daily flows and candidate hubs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkData {
    pub node_count: usize,
    pub distances: Square<f64>,
    /// Parcels per day; zero diagonal.
    pub flows_baseline: Square<f64>,
    /// 0-based node indices, in preference order.
    pub candidate_hubs: Vec<usize>,
    /// Labels in the originating data set (1-based CAB labels, or 1..n).
    pub node_labels: Vec<usize>,
    /// Multiplier applied to raw flows to obtain `flows_baseline`.
    pub demand_scale: f64,
}

impl NetworkData {
    pub fn od_pair_count(&self) -> usize {
        self.node_count * self.node_count.saturating_sub(1)
    }

    pub fn with_candidate_hubs(mut self, hubs: Vec<usize>) -> Result<Self> {
        self.candidate_hubs = hubs;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_count;
        if self.distances.n() != n || self.flows_baseline.n() != n || self.node_labels.len() != n {
            return Err(Error::validation("network matrices disagree with node_count"));
        }
        for i in 0..n {
            if self.distances.at(i, i) != 0.0 {
                return Err(Error::validation(format!("distance diagonal nonzero at node {i}")));
            }
            if self.flows_baseline.at(i, i) != 0.0 {
                return Err(Error::validation(format!("flow diagonal nonzero at node {i}")));
            }
            for j in 0..n {
                let d = self.distances.at(i, j);
                if !(d >= 0.0) || !d.is_finite() {
                    return Err(Error::validation(format!("invalid distance at ({i},{j})")));
                }
                if (d - self.distances.at(j, i)).abs() > 1e-9 {
                    return Err(Error::validation(format!("distances asymmetric at ({i},{j})")));
                }
                if !(self.flows_baseline.at(i, j) >= 0.0) {
                    return Err(Error::validation(format!("negative flow at ({i},{j})")));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for &h in &self.candidate_hubs {
            if h >= n {
                return Err(Error::validation(format!("candidate hub {h} out of range")));
            }
            if !seen.insert(h) {
                return Err(Error::validation(format!("duplicate candidate hub {h}")));
            }
        }
        Ok(())
    }
}

/// Operating regime of a historical day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Normal,
    Surge,
    Storm,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Normal, Regime::Surge, Regime::Storm];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Normal => "normal",
            Regime::Surge => "surge",
            Regime::Storm => "storm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "normal" => Some(Regime::Normal),
            "surge" => Some(Regime::Surge),
            "storm" => Some(Regime::Storm),
            _ => None,
        }
    }
}

/// How arc median travel times are derived from distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelCalibration {
    /// Fixed speed in distance units per hour.
    Speed(f64),
    /// Choose the speed so that the mean log median travel time over all
    /// ordered pairs equals the given value.
    TargetMeanLog(f64),
}

impl TravelCalibration {
    pub fn speed(&self, distances: &Square<f64>) -> f64 {
        match *self {
            TravelCalibration::Speed(s) => s,
            TravelCalibration::TargetMeanLog(target) => {
                let logs: Vec<f64> = distances.off_diagonal_values().into_iter().map(|d| d.max(1e-9).ln()).collect();
                if logs.is_empty() {
                    return 1.0;
                }
                let mean_log = logs.iter().sum::<f64>() / logs.len() as f64;
                (mean_log - target).exp()
            }
        }
    }
}

/// Regime composition and regime-conditional generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    pub day_counts: BTreeMap<Regime, usize>,
    pub demand_multiplier: BTreeMap<Regime, f64>,
    pub traveltime_multiplier: BTreeMap<Regime, f64>,
    /// Additive shift on the logit of the hub success probability.
    pub reliability_shift: BTreeMap<Regime, f64>,
    /// Standard deviation of the daily log cost multiplier.
    pub cost_sigma: f64,
    /// Normal-regime hub sorting success probability.
    pub reliability_base: f64,
    /// Pseudo-trials per hub-day.
    pub reliability_trials: u32,
    /// Log-scale travel-time standard deviation on normal days; other
    /// regimes scale it by their travel-time multiplier.
    pub travel_log_sd: f64,
    pub travel: TravelCalibration,
}

fn regime_map(normal: f64, surge: f64, storm: f64) -> BTreeMap<Regime, f64> {
    BTreeMap::from([(Regime::Normal, normal), (Regime::Surge, surge), (Regime::Storm, storm)])
}

impl RegimeConfig {
    /// Synthetic experiment: 67 normal, 24 surge, 9 storm days.
    pub fn sim_default() -> Self {
        Self {
            day_counts: BTreeMap::from([(Regime::Normal, 67), (Regime::Surge, 24), (Regime::Storm, 9)]),
            demand_multiplier: regime_map(1.0, 2.2, 1.0),
            traveltime_multiplier: regime_map(1.0, 1.15, 1.8),
            reliability_shift: regime_map(0.0, -0.26, -1.2),
            cost_sigma: 0.08,
            reliability_base: 0.88,
            reliability_trials: 100,
            travel_log_sd: 0.30,
            travel: TravelCalibration::TargetMeanLog(1.90),
        }
    }

    /// CAB pseudo-panel: 120 days with milder surges.
    pub fn cab_default() -> Self {
        Self {
            day_counts: BTreeMap::from([(Regime::Normal, 96), (Regime::Surge, 16), (Regime::Storm, 8)]),
            demand_multiplier: regime_map(1.0, 1.35, 1.0),
            traveltime_multiplier: regime_map(1.0, 1.15, 1.8),
            reliability_shift: regime_map(0.0, -0.26, -1.2),
            cost_sigma: 0.06,
            reliability_base: 0.88,
            reliability_trials: 100,
            travel_log_sd: 0.30,
            travel: TravelCalibration::TargetMeanLog(2.04),
        }
    }

    pub fn total_days(&self) -> usize {
        self.day_counts.values().sum()
    }

    fn get(map: &BTreeMap<Regime, f64>, r: Regime, default: f64) -> f64 {
        map.get(&r).copied().unwrap_or(default)
    }

    pub fn demand_mult(&self, r: Regime) -> f64 {
        Self::get(&self.demand_multiplier, r, 1.0)
    }

    pub fn travel_mult(&self, r: Regime) -> f64 {
        Self::get(&self.traveltime_multiplier, r, 1.0)
    }

    /// Success probability for a hub on a day of regime `r`.
    pub fn reliability_prob(&self, r: Regime) -> f64 {
        let p = self.reliability_base.clamp(1e-9, 1.0 - 1e-9);
        let logit = (p / (1.0 - p)).ln() + Self::get(&self.reliability_shift, r, 0.0);
        1.0 / (1.0 + (-logit).exp())
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_days() == 0 {
            return Err(Error::validation("regime day counts must sum to a positive number of days"));
        }
        for r in Regime::ALL {
            if !(self.demand_mult(r) > 0.0) || !(self.travel_mult(r) > 0.0) {
                return Err(Error::validation(format!("multipliers for {} must be positive", r.as_str())));
            }
        }
        if !(self.cost_sigma >= 0.0) || !(self.travel_log_sd >= 0.0) {
            return Err(Error::validation("standard deviations must be nonnegative"));
        }
        if !(self.reliability_base > 0.0 && self.reliability_base <= 1.0) {
            return Err(Error::validation("reliability_base must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Regime sequence of length `days`. When `days` equals the configured
    /// total the counts are used exactly; otherwise they are rescaled by
    /// largest remainder. The order is a seeded shuffle.
    pub fn regime_sequence(&self, seed: u64, days: usize) -> Vec<Regime> {
        let total = self.total_days();
        let mut counts: Vec<(Regime, usize)> =
            Regime::ALL.iter().map(|&r| (r, self.day_counts.get(&r).copied().unwrap_or(0))).collect();
        if total != days && total > 0 {
            let mut scaled: Vec<(Regime, usize, f64)> = counts
                .iter()
                .map(|&(r, c)| {
                    let exact = c as f64 * days as f64 / total as f64;
                    (r, exact.floor() as usize, exact - exact.floor())
                })
                .collect();
            let mut short = days - scaled.iter().map(|s| s.1).sum::<usize>();
            let mut order: Vec<usize> = (0..scaled.len()).collect();
            order.sort_by(|&a, &b| scaled[b].2.total_cmp(&scaled[a].2).then(a.cmp(&b)));
            for idx in order {
                if short == 0 {
                    break;
                }
                scaled[idx].1 += 1;
                short -= 1;
            }
            counts = scaled.into_iter().map(|(r, c, _)| (r, c)).collect();
        }
        let mut seq: Vec<Regime> = counts.into_iter().flat_map(|(r, c)| std::iter::repeat_n(r, c)).collect();
        seq.shuffle(&mut rng::substream(seed, &[tag::REGIME_ORDER]));
        seq
    }
}

/// Daily observations over `days` periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricalPanel {
    pub days: usize,
    pub node_count: usize,
    /// `demand[t]` is the OD parcel count matrix of day `t`.
    pub demand: Vec<Square<u32>>,
    /// Hours; diagonal zero.
    pub travel_time: Vec<Square<f64>>,
    pub cost_multiplier: Vec<f64>,
    /// `(successes, trials)` per candidate hub, in candidate order.
    pub hub_reliability_obs: Vec<Vec<(u32, u32)>>,
    pub regimes: Vec<Regime>,
}

impl HistoricalPanel {
    pub fn empty(node_count: usize) -> Self {
        Self {
            days: 0,
            node_count,
            demand: Vec::new(),
            travel_time: Vec::new(),
            cost_multiplier: Vec::new(),
            hub_reliability_obs: Vec::new(),
            regimes: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.days;
        if self.demand.len() != t
            || self.travel_time.len() != t
            || self.cost_multiplier.len() != t
            || self.hub_reliability_obs.len() != t
            || self.regimes.len() != t
        {
            return Err(Error::validation("panel series lengths disagree with day count"));
        }
        for (day, m) in self.demand.iter().enumerate() {
            if m.n() != self.node_count {
                return Err(Error::validation(format!("day {day}: demand matrix has wrong size")));
            }
            for i in 0..self.node_count {
                if m.at(i, i) != 0 {
                    return Err(Error::validation(format!("day {day}: demand diagonal nonzero")));
                }
            }
        }
        for (day, obs) in self.hub_reliability_obs.iter().enumerate() {
            for (k, &(s, n)) in obs.iter().enumerate() {
                if s > n {
                    return Err(Error::validation(format!("day {day}, hub slot {k}: successes {s} exceed trials {n}")));
                }
            }
        }
        if self.cost_multiplier.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::validation("cost multipliers must be positive"));
        }
        Ok(())
    }

    pub fn mean_offdiag_demand(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for m in &self.demand {
            for v in m.off_diagonal_values() {
                sum += f64::from(v);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    pub fn mean_observed_reliability(&self) -> f64 {
        let (s, n) = self
            .hub_reliability_obs
            .iter()
            .flatten()
            .fold((0u64, 0u64), |(a, b), &(s, n)| (a + u64::from(s), b + u64::from(n)));
        if n == 0 {
            f64::NAN
        } else {
            s as f64 / n as f64
        }
    }

    /// Sum of each day's demand over all OD pairs, separated by regime.
    pub fn daily_totals_by_regime(&self) -> BTreeMap<Regime, Vec<f64>> {
        let mut out: BTreeMap<Regime, Vec<f64>> = BTreeMap::new();
        for (m, &r) in self.demand.iter().zip(&self.regimes) {
            let total: u64 = m.as_slice().iter().map(|&v| u64::from(v)).sum();
            out.entry(r).or_default().push(total as f64);
        }
        out
    }
}

struct Token<'a> {
    offset: usize,
    text: &'a str,
}

fn tokenize(raw: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (idx, ch) in raw.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { offset: s, text: &raw[s..idx] });
            }
        } else if start.is_none() {
            start = Some(idx);
        }
    }
    if let Some(s) = start {
        out.push(Token { offset: s, text: &raw[s..] });
    }
    out
}

/// Parses CAB25 text and returns the induced subnetwork on `subset`
/// (1-based source labels), with flows scaled so the mean off-diagonal
/// daily demand equals `target_mean_demand`.
///
/// Leading non-numeric tokens are skipped. A single leading numeric token
/// equal to 25 followed by exactly 1250 numbers is read as a node-count
/// header. The first 625 numbers are the flow matrix and the next 625 the
/// distance matrix, both row-major.
pub fn parse_cab(raw_text: &str, subset: &[usize], target_mean_demand: f64) -> Result<NetworkData> {
    let tokens = tokenize(raw_text);
    let first_numeric = tokens.iter().position(|t| t.text.parse::<f64>().is_ok()).unwrap_or(tokens.len());
    let mut numeric: Vec<(usize, f64)> = Vec::with_capacity(2 * CAB_NODES * CAB_NODES + 1);
    for tok in &tokens[first_numeric..] {
        let v: f64 = tok.text.parse().map_err(|_| Error::Parse {
            offset: tok.offset,
            message: format!("expected a number, found {:?}", tok.text),
        })?;
        numeric.push((tok.offset, v));
    }
    let expected = 2 * CAB_NODES * CAB_NODES;
    if numeric.len() == expected + 1 && numeric[0].1 == CAB_NODES as f64 {
        numeric.remove(0);
    }
    if numeric.len() != expected {
        let offset = if numeric.len() > expected { numeric[expected].0 } else { raw_text.len() };
        return Err(Error::Parse {
            offset,
            message: format!("expected {expected} numeric tokens, found {}", numeric.len()),
        });
    }

    let mut seen = BTreeSet::new();
    for &label in subset {
        if label == 0 || label > CAB_NODES {
            return Err(Error::validation(format!("CAB label {label} outside 1..={CAB_NODES}")));
        }
        if !seen.insert(label) {
            return Err(Error::validation(format!("duplicate CAB label {label}")));
        }
    }
    if subset.is_empty() {
        return Err(Error::validation("CAB subset must be nonempty"));
    }

    let cell = |block: usize, i: usize, j: usize| numeric[block * CAB_NODES * CAB_NODES + i * CAB_NODES + j].1;
    let n = subset.len();
    let idx: Vec<usize> = subset.iter().map(|l| l - 1).collect();
    let raw_flows = Square::from_fn(n, |a, b| if a == b { 0.0 } else { cell(0, idx[a], idx[b]) });
    let distances = Square::from_fn(n, |a, b| if a == b { 0.0 } else { cell(1, idx[a], idx[b]) });

    let off = raw_flows.off_diagonal_values();
    let mean_raw = if off.is_empty() { 0.0 } else { off.iter().sum::<f64>() / off.len() as f64 };
    let demand_scale = if mean_raw > 0.0 { target_mean_demand / mean_raw } else { 1.0 };
    let flows_baseline = raw_flows.map(|v| v * demand_scale);

    let net = NetworkData {
        node_count: n,
        distances,
        flows_baseline,
        candidate_hubs: Vec::new(),
        node_labels: subset.to_vec(),
        demand_scale,
    };
    net.validate()?;
    Ok(net)
}

/// Reads and parses a CAB file from disk.
pub fn load_cab(path: &Path, subset: &[usize], target_mean_demand: f64) -> Result<NetworkData> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cab(&text, subset, target_mean_demand)
}

/// CAB-format text (25x25 flows, then 25x25 distances) with synthetic values:
/// points scattered over a 2800 x 1600 box and gravity-model flows. Used where
/// the real benchmark file is unavailable.
pub fn synthetic_cab_text(seed: u64) -> String {
    let mut g = rng::substream(seed, &[tag::SYNTH_GEOMETRY, 25]);
    let pts: Vec<(f64, f64)> =
        (0..CAB_NODES).map(|_| (g.random_range(0.0..2800.0), g.random_range(0.0..1600.0))).collect();
    let masses: Vec<f64> = (0..CAB_NODES)
        .map(|_| {
            let z: f64 = g.sample(StandardNormal);
            (0.8 * z).exp()
        })
        .collect();
    let dist = |i: usize, j: usize| {
        let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
        (dx * dx + dy * dy).sqrt()
    };
    let mut s = String::from("25\n");
    for i in 0..CAB_NODES {
        let row: Vec<String> = (0..CAB_NODES)
            .map(|j| {
                let f = if i == j { 0.0 } else { 1000.0 * masses[i] * masses[j] * (-dist(i, j) / 1500.0).exp() };
                format!("{f:.3}")
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    for i in 0..CAB_NODES {
        let row: Vec<String> = (0..CAB_NODES).map(|j| format!("{:.3}", dist(i, j))).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Geometry and intensity settings of the synthetic environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub nodes: usize,
    /// 0-based candidate hubs.
    pub hubs: Vec<usize>,
    /// Box extent in distance units.
    pub width: f64,
    pub height: f64,
    /// Mean off-diagonal base intensity on normal days.
    pub mean_base_demand: f64,
    /// Log-scale spread of node masses in the gravity model.
    pub mass_log_sd: f64,
    /// Distance decay length of the gravity model.
    pub decay_length: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            nodes: 9,
            hubs: vec![3, 7, 2],
            width: 1000.0,
            height: 700.0,
            mean_base_demand: 11.1,
            mass_log_sd: 0.7,
            decay_length: 900.0,
        }
    }
}

/// Synthetic nine-node network with candidate hubs {4, 8, 3} (1-based) and a
/// regime-mixed panel, using [`SynthParams::default`].
pub fn synth_environment(seed: u64, regime: &RegimeConfig) -> Result<(NetworkData, HistoricalPanel)> {
    synth_environment_with(seed, regime, &SynthParams::default())
}

pub fn synth_environment_with(
    seed: u64,
    regime: &RegimeConfig,
    params: &SynthParams,
) -> Result<(NetworkData, HistoricalPanel)> {
    regime.validate()?;
    let n = params.nodes;
    if n == 0 {
        return Err(Error::validation("synthetic network needs at least one node"));
    }
    let mut geo = rng::substream(seed, &[tag::SYNTH_GEOMETRY]);
    // Hubs sit in the central part of the box, spokes anywhere.
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (lo, hi) = if params.hubs.contains(&i) { (0.3, 0.7) } else { (0.0, 1.0) };
            let x = geo.random_range(lo..hi) * params.width;
            let y = geo.random_range(lo..hi) * params.height;
            (x, y)
        })
        .collect();
    let distances = Square::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            let (dx, dy) = (coords[i].0 - coords[j].0, coords[i].1 - coords[j].1);
            (dx * dx + dy * dy).sqrt()
        }
    });

    let mut mass_rng = rng::substream(seed, &[tag::SYNTH_DEMAND_BASE]);
    let masses: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = mass_rng.sample(StandardNormal);
            (params.mass_log_sd * z).exp()
        })
        .collect();
    let gravity = Square::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            masses[i] * masses[j] * (-distances.at(i, j) / params.decay_length).exp()
        }
    });
    let off = gravity.off_diagonal_values();
    let mean_g = if off.is_empty() { 1.0 } else { off.iter().sum::<f64>() / off.len() as f64 };
    let flows_baseline = gravity.map(|g| g * params.mean_base_demand / mean_g);

    let net = NetworkData {
        node_count: n,
        distances,
        flows_baseline,
        candidate_hubs: params.hubs.clone(),
        node_labels: (1..=n).collect(),
        demand_scale: 1.0,
    };
    net.validate()?;
    let panel = build_pseudo_panel(&net, seed, regime, regime.total_days())?;
    Ok((net, panel))
}

/// Generates a daily panel around `network`'s baseline flows and distances.
///
/// Each (day, OD) cell, each day's cost multiplier, and each (day, hub)
/// reliability count uses its own substream of `seed`.
pub fn build_pseudo_panel(
    network: &NetworkData,
    seed: u64,
    regime: &RegimeConfig,
    days: usize,
) -> Result<HistoricalPanel> {
    if days == 0 {
        return Err(Error::validation("panel needs a positive number of days"));
    }
    regime.validate()?;
    network.validate()?;
    let n = network.node_count;
    let regimes = regime.regime_sequence(seed, days);
    let speed = regime.travel.speed(&network.distances);
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(Error::validation("travel-time calibration produced a nonpositive speed"));
    }

    let mut demand = Vec::with_capacity(days);
    let mut travel_time = Vec::with_capacity(days);
    let mut cost_multiplier = Vec::with_capacity(days);
    let mut hub_reliability_obs = Vec::with_capacity(days);
    for (t, &r) in regimes.iter().enumerate() {
        let dm = regime.demand_mult(r);
        let tm = regime.travel_mult(r);
        let sd = regime.travel_log_sd * tm;
        let day = t as u64;
        demand.push(Square::from_fn(n, |i, j| {
            if i == j {
                return 0;
            }
            let lambda = network.flows_baseline.at(i, j) * dm;
            let mut g = rng::substream(seed, &[tag::PANEL_DEMAND, day, i as u64, j as u64]);
            poisson(&mut g, lambda)
        }));
        travel_time.push(Square::from_fn(n, |i, j| {
            if i == j {
                return 0.0;
            }
            let median = (network.distances.at(i, j) / speed).max(0.01) * tm;
            let mut g = rng::substream(seed, &[tag::PANEL_TRAVEL, day, i as u64, j as u64]);
            let z: f64 = g.sample(StandardNormal);
            median * (sd * z).exp()
        }));
        let mut g = rng::substream(seed, &[tag::PANEL_COST, day]);
        let z: f64 = g.sample(StandardNormal);
        cost_multiplier.push((regime.cost_sigma * z).exp());
        let p = regime.reliability_prob(r);
        let trials = regime.reliability_trials;
        hub_reliability_obs.push(
            (0..network.candidate_hubs.len())
                .map(|k| {
                    let mut g = rng::substream(seed, &[tag::PANEL_RELIABILITY, day, k as u64]);
                    let s = Binomial::new(u64::from(trials), p).map(|b| b.sample(&mut g) as u32).unwrap_or(trials);
                    (s, trials)
                })
                .collect(),
        );
    }
    let panel =
        HistoricalPanel { days, node_count: n, demand, travel_time, cost_multiplier, hub_reliability_obs, regimes };
    panel.validate()?;
    Ok(panel)
}

/// Poisson draw that treats nonpositive or non-finite intensities as zero.
pub(crate) fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u32 {
    if !(lambda > 1e-300) || !lambda.is_finite() {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(p) => {
            let v: f64 = p.sample(rng);
            v.min(u32::MAX as f64) as u32
        }
        Err(_) => 0,
    }
}

const PANEL_OD: &str = "panel_od.csv";
const PANEL_COST: &str = "panel_cost.csv";
const PANEL_RELIABILITY: &str = "panel_reliability.csv";
const PANEL_REGIMES: &str = "panel_regimes.csv";

/// Writes the panel as four CSV files into `dir`.
pub fn export_panel(panel: &HistoricalPanel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut od = csv::Writer::from_path(dir.join(PANEL_OD))?;
    od.write_record(["day", "origin", "destination", "demand", "travel_time"])?;
    for t in 0..panel.days {
        for (i, j) in crate::matrix::off_diagonal_pairs(panel.node_count) {
            od.write_record([
                t.to_string(),
                i.to_string(),
                j.to_string(),
                panel.demand[t].at(i, j).to_string(),
                panel.travel_time[t].at(i, j).to_string(),
            ])?;
        }
    }
    od.flush().map_err(|e| Error::io(dir.join(PANEL_OD), e))?;

    let mut cost = csv::Writer::from_path(dir.join(PANEL_COST))?;
    cost.write_record(["day", "cost_multiplier"])?;
    for (t, c) in panel.cost_multiplier.iter().enumerate() {
        cost.write_record([t.to_string(), c.to_string()])?;
    }
    cost.flush().map_err(|e| Error::io(dir.join(PANEL_COST), e))?;

    let mut rel = csv::Writer::from_path(dir.join(PANEL_RELIABILITY))?;
    rel.write_record(["day", "hub_slot", "successes", "trials"])?;
    for (t, obs) in panel.hub_reliability_obs.iter().enumerate() {
        for (k, (s, n)) in obs.iter().enumerate() {
            rel.write_record([t.to_string(), k.to_string(), s.to_string(), n.to_string()])?;
        }
    }
    rel.flush().map_err(|e| Error::io(dir.join(PANEL_RELIABILITY), e))?;

    let mut reg = csv::Writer::from_path(dir.join(PANEL_REGIMES))?;
    reg.write_record(["day", "regime"])?;
    for (t, r) in panel.regimes.iter().enumerate() {
        reg.write_record([t.to_string(), r.as_str().to_string()])?;
    }
    reg.flush().map_err(|e| Error::io(dir.join(PANEL_REGIMES), e))?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, file: &str) -> Result<T> {
    rec.get(idx)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::validation(format!("{file}: bad field {idx} in record {:?}", rec)))
}

/// Reads a panel written by [`export_panel`]. `node_count` and `hub_count`
/// fix the matrix and reliability shapes.
pub fn import_panel(dir: &Path, node_count: usize, hub_count: usize) -> Result<HistoricalPanel> {
    let mut regimes = Vec::new();
    let mut rdr = csv::Reader::from_path(dir.join(PANEL_REGIMES))?;
    for rec in rdr.records() {
        let rec = rec?;
        let label: String = field(&rec, 1, PANEL_REGIMES)?;
        regimes.push(Regime::parse(&label).ok_or_else(|| Error::validation(format!("unknown regime {label:?}")))?);
    }
    let days = regimes.len();
    let mut demand = vec![Square::filled(node_count, 0u32); days];
    let mut travel_time = vec![Square::filled(node_count, 0.0f64); days];
    let mut rdr = csv::Reader::from_path(dir.join(PANEL_OD))?;
    for rec in rdr.records() {
        let rec = rec?;
        let t: usize = field(&rec, 0, PANEL_OD)?;
        let i: usize = field(&rec, 1, PANEL_OD)?;
        let j: usize = field(&rec, 2, PANEL_OD)?;
        if t >= days || i >= node_count || j >= node_count || i == j {
            return Err(Error::validation(format!("{PANEL_OD}: index out of range in {:?}", rec)));
        }
        demand[t].set(i, j, field(&rec, 3, PANEL_OD)?);
        travel_time[t].set(i, j, field(&rec, 4, PANEL_OD)?);
    }
    let mut cost_multiplier = vec![1.0; days];
    let mut rdr = csv::Reader::from_path(dir.join(PANEL_COST))?;
    for rec in rdr.records() {
        let rec = rec?;
        let t: usize = field(&rec, 0, PANEL_COST)?;
        if t >= days {
            return Err(Error::validation(format!("{PANEL_COST}: day {t} out of range")));
        }
        cost_multiplier[t] = field(&rec, 1, PANEL_COST)?;
    }
    let mut hub_reliability_obs = vec![vec![(0u32, 0u32); hub_count]; days];
    let mut rdr = csv::Reader::from_path(dir.join(PANEL_RELIABILITY))?;
    for rec in rdr.records() {
        let rec = rec?;
        let t: usize = field(&rec, 0, PANEL_RELIABILITY)?;
        let k: usize = field(&rec, 1, PANEL_RELIABILITY)?;
        if t >= days || k >= hub_count {
            return Err(Error::validation(format!("{PANEL_RELIABILITY}: index out of range")));
        }
        hub_reliability_obs[t][k] = (field(&rec, 2, PANEL_RELIABILITY)?, field(&rec, 3, PANEL_RELIABILITY)?);
    }
    let panel =
        HistoricalPanel { days, node_count, demand, travel_time, cost_multiplier, hub_reliability_obs, regimes };
    panel.validate()?;
    Ok(panel)
}
