//! End-to-end design pipeline: fit, sample, enumerate, evaluate, select,
//! stress and sensitivity, with per-stage CSV outputs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::config::{Experiment, RunConfig};
use crate::designspace::{demand_distance_rank, enumerate_all, Design, Topology};
use crate::error::{Error, Result};
use crate::evaluator::{EvaluationResult, Evaluator};
use crate::experiments::{
    deterministic_baseline, sensitivity_grid, stress_scenarios, BaselineChoice, BaselineMode, ComparisonReport,
    SensitivityRow, StressConfig,
};
use crate::ingest::{self, HistoricalPanel, NetworkData};
use crate::posterior::{fit_posterior, posterior_summary, sample_scenarios, PosteriorState, Scenario};
use crate::report::{fmt6, sha256_hex, OutputDir, MANIFEST_NAME, PARTIAL_SUFFIX};
use crate::risk::{self, DesignSummary, Normalizers, ScenarioBest};
use crate::rng::{self, tag};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Fit,
    Sample,
    Enumerate,
    Evaluate,
    Select,
    Stress,
    Sensitivity,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Fit,
        Stage::Sample,
        Stage::Enumerate,
        Stage::Evaluate,
        Stage::Select,
        Stage::Stress,
        Stage::Sensitivity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Fit => "fit",
            Stage::Sample => "sample",
            Stage::Enumerate => "enumerate",
            Stage::Evaluate => "evaluate",
            Stage::Select => "select",
            Stage::Stress => "stress",
            Stage::Sensitivity => "sensitivity",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Seeds of the independent random streams, derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub data: u64,
    pub scenarios: u64,
    pub stress: u64,
    pub harness: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Self {
        Self {
            data: rng::derive_key(master, &[tag::SYNTH_GEOMETRY]),
            scenarios: rng::derive_key(master, &[tag::TRAINING_SCENARIOS]),
            stress: rng::derive_key(master, &[tag::STRESS_SCENARIOS]),
            harness: rng::derive_key(master, &[tag::HARNESS]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Inputs {
    pub network: NetworkData,
    pub panel: HistoricalPanel,
    /// SHA-256 over the resolved config and every input file read.
    pub input_hash: String,
}

/// Builds or loads the network and panel for the configured experiment.
pub fn load_inputs(cfg: &RunConfig, seed: u64) -> Result<Inputs> {
    let seeds = Seeds::derive(seed);
    let mut hashed = cfg.to_json().into_bytes();
    hashed.extend_from_slice(format!("seed={seed}\n").as_bytes());
    let (network, mut panel) = match cfg.experiment {
        Experiment::Sim => ingest::synth_environment_with(seeds.data, &cfg.regime, &cfg.synth)?,
        Experiment::Cab => {
            let path = cfg
                .data
                .cab_path
                .as_ref()
                .ok_or_else(|| Error::Config("the cab experiment requires data.cab_path".into()))?;
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            hashed.extend_from_slice(&bytes);
            let text = String::from_utf8_lossy(&bytes);
            let net = ingest::parse_cab(&text, &cfg.data.subset, cfg.data.target_mean_demand)?
                .with_candidate_hubs(cfg.data.candidate_hubs.clone())?;
            let panel = ingest::build_pseudo_panel(&net, seeds.data, &cfg.regime, cfg.regime.total_days())?;
            (net, panel)
        }
    };
    if let Some(dir) = &cfg.data.panel_dir {
        panel = ingest::import_panel(dir, network.node_count, network.candidate_hubs.len())?;
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        for f in files {
            hashed.extend_from_slice(&std::fs::read(&f).map_err(|e| Error::io(&f, e))?);
        }
    }
    Ok(Inputs { network, panel, input_hash: sha256_hex(&hashed) })
}

/// Every intermediate product of a run; fields fill in stage order.
#[derive(Debug)]
pub struct Pipeline<'a> {
    pub cfg: &'a RunConfig,
    pub seed: u64,
    pub seeds: Seeds,
    pub inputs: &'a Inputs,
    pub evaluator: Evaluator<'a>,
    pub state: Option<PosteriorState>,
    pub scenarios: Vec<Scenario>,
    pub designs: Vec<Design>,
    pub results: Vec<Vec<EvaluationResult>>,
    /// In `designs` order.
    pub summaries: Vec<DesignSummary>,
    pub normalizers: Option<Normalizers>,
    pub ranking: Vec<usize>,
    /// Index into `designs` per topology.
    pub topology_winners: Vec<usize>,
    pub scenario_best: Vec<ScenarioBest>,
    pub baseline: Option<BaselineChoice>,
    pub comparison: Option<ComparisonReport>,
    pub sensitivity: Vec<SensitivityRow>,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig, inputs: &'a Inputs, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            seed,
            seeds: Seeds::derive(seed),
            inputs,
            evaluator: Evaluator::new(&inputs.network, cfg.costs.clone(), cfg.risk.thresholds())?,
            state: None,
            scenarios: Vec::new(),
            designs: Vec::new(),
            results: Vec::new(),
            summaries: Vec::new(),
            normalizers: None,
            ranking: Vec::new(),
            topology_winners: Vec::new(),
            scenario_best: Vec::new(),
            baseline: None,
            comparison: None,
            sensitivity: Vec::new(),
        })
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Fit => self.fit(),
            Stage::Sample => self.sample(),
            Stage::Enumerate => self.enumerate(),
            Stage::Evaluate => self.evaluate(),
            Stage::Select => self.select(),
            Stage::Stress => self.stress(),
            Stage::Sensitivity => self.sensitivity(),
        }
    }

    pub fn run_through(&mut self, last: Stage) -> Result<()> {
        for st in Stage::ALL.into_iter().filter(|s| *s <= last) {
            self.run_stage(st)?;
        }
        Ok(())
    }

    pub fn state(&self) -> &PosteriorState {
        self.state.as_ref().expect("fit stage has run")
    }

    fn fit(&mut self) -> Result<()> {
        let net = &self.inputs.network;
        let speed = self.cfg.regime.travel.speed(&net.distances);
        self.state = Some(fit_posterior(net, &self.inputs.panel, &self.cfg.priors, speed)?);
        Ok(())
    }

    fn sample(&mut self) -> Result<()> {
        self.scenarios = sample_scenarios(self.state(), self.cfg.scenarios, self.seeds.scenarios)?;
        Ok(())
    }

    fn enumerate(&mut self) -> Result<()> {
        let state = self.state();
        let net = &self.inputs.network;
        let rank = demand_distance_rank(&state.mean_demand_matrix(), &net.distances);
        self.designs = enumerate_all(net, &self.cfg.grid, &rank, state.mean_total_demand())?;
        Ok(())
    }

    fn evaluate(&mut self) -> Result<()> {
        self.results = self.evaluator.evaluate_designs(&self.designs, &self.scenarios)?;
        Ok(())
    }

    fn select(&mut self) -> Result<()> {
        let (summaries, norms) = risk::summarize_all(&self.designs, &self.results, &self.cfg.risk)?;
        let (_, ranking) = risk::select_best(&summaries)?;
        self.topology_winners = risk::best_by_topology(&summaries);
        let winners: Vec<(&str, &[EvaluationResult])> = self
            .topology_winners
            .iter()
            .map(|&d| (self.designs[d].label.as_str(), self.results[d].as_slice()))
            .collect();
        self.scenario_best = risk::scenario_best_probabilities(&winners, &self.cfg.risk)?;
        self.baseline =
            Some(deterministic_baseline(&self.designs, self.state(), &self.evaluator, self.cfg.baseline_mode)?);
        self.summaries = summaries;
        self.normalizers = Some(norms);
        self.ranking = ranking;
        Ok(())
    }

    pub fn selected(&self) -> usize {
        self.ranking[0]
    }

    pub fn baseline_index(&self) -> usize {
        self.baseline.as_ref().expect("select stage has run").index
    }

    /// Scenario-best probability of the selected design among topology winners.
    pub fn selected_scenario_best(&self) -> f64 {
        let label = &self.designs[self.selected()].label;
        self.scenario_best.iter().find(|s| &s.label == label).map_or(0.0, |s| s.probability)
    }

    /// Bayesian selection, deterministic baseline and, for the cab
    /// experiment, the best FC design.
    pub fn compared_designs(&self) -> Vec<(String, Design)> {
        let mut v = vec![
            ("bayesian".to_string(), self.designs[self.selected()].clone()),
            (
                match self.cfg.baseline_mode {
                    BaselineMode::MeanOnly => "deterministic-mean-only",
                    BaselineMode::CostPriority => "deterministic-cost-priority",
                }
                .to_string(),
                self.designs[self.baseline_index()].clone(),
            ),
        ];
        if self.cfg.experiment == Experiment::Cab {
            if let Some(&fc) = self.topology_winners.iter().find(|&&d| self.designs[d].topology == Topology::FC) {
                v.push(("fully-connected".to_string(), self.designs[fc].clone()));
            }
        }
        v
    }

    fn stress(&mut self) -> Result<()> {
        let s = self.cfg.stress;
        let scenarios = stress_scenarios(
            self.state(),
            &StressConfig {
                amplification: s.amplification,
                disruption_prob: s.disruption_prob,
                disruption_time_factor: s.disruption_time_factor,
                count: s.count,
                seed: self.seeds.stress,
            },
        )?;
        let norms = self.normalizers.expect("select stage has run");
        self.comparison = Some(crate::experiments::compare_designs(
            &self.compared_designs(),
            &scenarios,
            &self.evaluator,
            &self.cfg.risk,
            &norms,
            1,
        )?);
        Ok(())
    }

    fn sensitivity(&mut self) -> Result<()> {
        let norms = self.normalizers.expect("select stage has run");
        self.sensitivity = sensitivity_grid(&self.summaries, &norms, &self.cfg.sensitivity)?;
        Ok(())
    }

    /// Writes the CSV outputs of `stage`.
    pub fn write_stage(&self, stage: Stage, out: &mut OutputDir) -> Result<()> {
        match stage {
            Stage::Fit => self.write_fit(out),
            Stage::Sample => self.write_sample(out),
            Stage::Enumerate => self.write_enumerate(out),
            Stage::Evaluate => self.write_evaluate(out),
            Stage::Select => self.write_select(out),
            Stage::Stress => self.write_stress(out),
            Stage::Sensitivity => self.write_sensitivity(out),
        }
    }

    fn write_fit(&self, out: &mut OutputDir) -> Result<()> {
        let st = self.state();
        let sum = posterior_summary(st);
        let prior_only = if self.inputs.panel.days == 0 { "true" } else { "false" }.to_string();
        let row = |c: &str, m: &str, q: &str, v: f64| vec![c.into(), m.into(), q.into(), fmt6(v), prior_only.clone()];
        out.write_csv(
            "posterior_summary.csv",
            &["component", "model", "posterior_quantity", "value", "prior_only"],
            vec![
                row("demand", "gamma-poisson", "mean daily OD intensity", sum.mean_intensity),
                row("travel time", "lognormal normal-inverse-gamma", "mean log travel time", sum.mean_log_travel_time),
                row("hub reliability", "beta-binomial", "mean candidate-hub reliability", sum.mean_reliability),
                row("cost multiplier", "lognormal normal-inverse-gamma", "mean log cost multiplier", sum.mean_log_cost),
            ],
        )?;
        let n = st.node_count();
        let pairs: Vec<(usize, usize)> = crate::matrix::off_diagonal_pairs(n).collect();
        out.write_csv(
            "posterior_demand.csv",
            &["origin", "destination", "shape", "rate", "mean"],
            pairs.iter().map(|&(i, j)| {
                let g = st.demand.get(i, j);
                vec![(i + 1).to_string(), (j + 1).to_string(), fmt6(g.shape), fmt6(g.rate), fmt6(g.mean())]
            }),
        )?;
        out.write_csv(
            "posterior_traveltime.csv",
            &["origin", "destination", "location", "kappa", "alpha", "beta"],
            pairs.iter().map(|&(i, j)| {
                let p = st.traveltime.get(i, j);
                vec![
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    fmt6(p.location),
                    fmt6(p.kappa),
                    fmt6(p.alpha),
                    fmt6(p.beta),
                ]
            }),
        )?;
        out.write_csv(
            "posterior_reliability.csv",
            &["hub", "alpha", "beta", "mean"],
            st.hubs
                .iter()
                .zip(&st.hub_reliability)
                .map(|(h, b)| vec![(h + 1).to_string(), fmt6(b.alpha), fmt6(b.beta), fmt6(b.mean())]),
        )?;
        let c = st.cost;
        out.write_csv(
            "posterior_cost.csv",
            &["location", "kappa", "alpha", "beta"],
            vec![vec![fmt6(c.location), fmt6(c.kappa), fmt6(c.alpha), fmt6(c.beta)]],
        )
    }

    fn write_sample(&self, out: &mut OutputDir) -> Result<()> {
        let hubs = &self.state().hubs;
        out.write_csv(
            "scenarios.csv",
            &[
                "scenario_id",
                "total_demand",
                "mean_travel_time",
                "max_travel_time",
                "min_hub_reliability",
                "cost_multiplier",
            ],
            self.scenarios.iter().map(|s| {
                let tt = s.travel_time.off_diagonal_values();
                let min_rel = hubs.iter().map(|&h| s.hub_reliability[h]).fold(1.0, f64::min);
                vec![
                    s.scenario_id.to_string(),
                    s.total_demand().to_string(),
                    fmt6(stats::mean(&tt)),
                    fmt6(tt.iter().copied().fold(0.0, f64::max)),
                    fmt6(min_rel),
                    fmt6(s.cost_multiplier),
                ]
            }),
        )
    }

    fn write_enumerate(&self, out: &mut OutputDir) -> Result<()> {
        out.write_csv(
            "candidate_counts.csv",
            &["topology", "candidates"],
            Topology::ALL
                .iter()
                .map(|&t| vec![t.to_string(), self.designs.iter().filter(|d| d.topology == t).count().to_string()]),
        )?;
        out.write_csv(
            "designs.csv",
            &[
                "label",
                "topology",
                "hubs",
                "capacity_multiplier",
                "direct_fraction",
                "r",
                "direct_links",
                "hub_capacity",
            ],
            self.designs.iter().map(|d| {
                vec![
                    d.label.clone(),
                    d.topology.to_string(),
                    d.hub_string(),
                    fmt6(d.capacity_multiplier),
                    fmt6(d.direct_fraction),
                    d.r.to_string(),
                    d.direct_links.len().to_string(),
                    d.hub_capacity.first().map_or_else(String::new, |&e| fmt6(e)),
                ]
            }),
        )
    }

    fn write_evaluate(&self, out: &mut OutputDir) -> Result<()> {
        let rows = self.designs.iter().zip(&self.results).flat_map(|(d, res)| {
            res.iter().map(move |r| {
                vec![
                    d.label.clone(),
                    r.scenario_id.to_string(),
                    fmt6(r.total_cost),
                    fmt6(r.breakdown.fixed),
                    fmt6(r.breakdown.variable),
                    fmt6(r.breakdown.sorting),
                    fmt6(r.breakdown.capacity),
                    fmt6(r.max_arrival),
                    fmt6(r.max_hub_delay),
                    r.service_ok.to_string(),
                    r.hold_ok.to_string(),
                    fmt6(r.emission),
                ]
            })
        });
        out.write_csv(
            "evaluations.csv",
            &[
                "design_label",
                "scenario_id",
                "cost",
                "F",
                "V",
                "S",
                "K",
                "max_arrival",
                "max_hub_delay",
                "service_ok",
                "hold_ok",
                "emission",
            ],
            rows,
        )
    }

    fn write_select(&self, out: &mut OutputDir) -> Result<()> {
        let ranked: Vec<&DesignSummary> = self.ranking.iter().map(|&i| &self.summaries[i]).collect();
        out.write_csv(
            "design_summaries.csv",
            SUMMARY_HEADER,
            ranked.iter().enumerate().map(|(r, s)| summary_row(r + 1, s)),
        )?;
        out.write_csv(
            "top_designs.csv",
            SUMMARY_HEADER,
            ranked.iter().take(20).enumerate().map(|(r, s)| summary_row(r + 1, s)),
        )?;
        let mut winners = self.topology_winners.clone();
        winners.sort_by_key(|w| self.ranking.iter().position(|r| r == w));
        out.write_csv(
            "best_by_topology.csv",
            SUMMARY_HEADER,
            winners.iter().enumerate().map(|(r, &w)| summary_row(r + 1, &self.summaries[w])),
        )?;
        let front = risk::pareto_front(&self.summaries);
        out.write_csv(
            "pareto_front.csv",
            SUMMARY_HEADER,
            front.iter().enumerate().map(|(r, s)| summary_row(r + 1, s)),
        )?;
        let mut sb: Vec<(&ScenarioBest, Topology)> = self
            .scenario_best
            .iter()
            .zip(&self.topology_winners)
            .map(|(s, &d)| (s, self.designs[d].topology))
            .collect();
        sb.sort_by(|a, b| b.0.wins.cmp(&a.0.wins).then_with(|| a.0.label.cmp(&b.0.label)));
        out.write_csv(
            "scenario_best.csv",
            &["topology", "label", "probability_scenario_best", "wins", "scenarios", "mean_scenario_loss"],
            sb.iter().map(|(s, t)| {
                vec![
                    t.to_string(),
                    s.label.clone(),
                    fmt6(s.probability),
                    s.wins.to_string(),
                    self.scenarios.len().to_string(),
                    fmt6(s.mean_loss),
                ]
            }),
        )?;
        let base = self.baseline.as_ref().expect("select stage has run");
        let rows = [("bayesian", self.selected(), true), ("deterministic", base.index, base.nominally_feasible)];
        out.write_csv(
            "selection.csv",
            &[
                "method",
                "label",
                "topology",
                "hubs",
                "direct_links",
                "capacity_multiplier",
                "mean_cost",
                "mean_max_arrival",
                "cvar_max_arrival",
                "service_reliability",
                "hold_reliability",
                "nominally_feasible",
            ],
            rows.iter().map(|&(m, d, f)| {
                let s = &self.summaries[d];
                vec![
                    m.into(),
                    s.label.clone(),
                    s.topology.to_string(),
                    s.hubs.clone(),
                    s.direct_links.to_string(),
                    format!("{:.2}", s.capacity_multiplier),
                    fmt6(s.mean_cost),
                    fmt6(s.mean_max_arrival),
                    fmt6(s.cvar_max_arrival),
                    fmt6(s.service_reliability),
                    fmt6(s.hold_reliability),
                    f.to_string(),
                ]
            }),
        )
    }

    fn write_stress(&self, out: &mut OutputDir) -> Result<()> {
        let rep = self.comparison.as_ref().expect("stress stage has run");
        out.write_csv(
            "stress_comparison.csv",
            &[
                "method",
                "label",
                "mean_cost",
                "p95_cost",
                "mean_max_arrival",
                "p95_max_arrival",
                "cvar_max_arrival",
                "service_reliability",
                "hold_reliability",
                "mean_max_hub_delay",
                "score",
            ],
            rep.methods.iter().map(|m| {
                let s = &m.summary;
                vec![
                    m.method.clone(),
                    s.label.clone(),
                    fmt6(s.mean_cost),
                    fmt6(s.p95_cost),
                    fmt6(s.mean_max_arrival),
                    fmt6(s.p95_max_arrival),
                    fmt6(s.cvar_max_arrival),
                    fmt6(s.service_reliability),
                    fmt6(s.hold_reliability),
                    fmt6(s.mean_max_hub_delay),
                    fmt6(s.score),
                ]
            }),
        )?;
        let base = &rep.methods[rep.baseline].method;
        out.write_csv(
            "stress_gains.csv",
            &[
                "method",
                "baseline",
                "cvar_reduction_pct",
                "p95_reduction_pct",
                "service_gain_pp",
                "hold_gain_pp",
                "cost_premium_pct",
            ],
            rep.methods.iter().zip(&rep.gains).enumerate().filter(|(i, _)| *i != rep.baseline).map(|(_, (m, g))| {
                vec![
                    m.method.clone(),
                    base.clone(),
                    fmt6(g.cvar_reduction_pct),
                    fmt6(g.p95_reduction_pct),
                    fmt6(g.service_gain_pp),
                    fmt6(g.hold_gain_pp),
                    fmt6(g.cost_premium_pct),
                ]
            }),
        )
    }

    fn write_sensitivity(&self, out: &mut OutputDir) -> Result<()> {
        out.write_csv(
            "sensitivity.csv",
            &[
                "profile",
                "omega_c",
                "omega_t",
                "omega_e",
                "lambda_s",
                "lambda_h",
                "topology",
                "hubs",
                "label",
                "score",
                "mean_cost",
                "cvar_max_arrival",
                "service_reliability",
                "hold_reliability",
            ],
            self.sensitivity.iter().map(|r| {
                let (w, s) = (r.weights, &r.selected);
                vec![
                    r.profile.clone(),
                    format!("{:.2}", w.cost),
                    format!("{:.2}", w.time),
                    format!("{:.2}", w.emission),
                    format!("{:.2}", w.service),
                    format!("{:.2}", w.hold),
                    s.topology.to_string(),
                    s.hubs.clone(),
                    s.label.clone(),
                    fmt6(s.score),
                    fmt6(s.mean_cost),
                    fmt6(s.cvar_max_arrival),
                    fmt6(s.service_reliability),
                    fmt6(s.hold_reliability),
                ]
            }),
        )
    }
}

const SUMMARY_HEADER: &[&str] = &[
    "rank",
    "label",
    "topology",
    "hubs",
    "direct_links",
    "capacity_multiplier",
    "direct_fraction",
    "mean_cost",
    "p95_cost",
    "mean_max_arrival",
    "p95_max_arrival",
    "cvar_max_arrival",
    "service_reliability",
    "hold_reliability",
    "mean_emission",
    "mean_max_hub_delay",
    "score",
    "feasible_service",
    "feasible_hold",
];

fn summary_row(rank: usize, s: &DesignSummary) -> Vec<String> {
    vec![
        rank.to_string(),
        s.label.clone(),
        s.topology.to_string(),
        s.hubs.clone(),
        s.direct_links.to_string(),
        format!("{:.2}", s.capacity_multiplier),
        format!("{:.2}", s.direct_fraction),
        fmt6(s.mean_cost),
        fmt6(s.p95_cost),
        fmt6(s.mean_max_arrival),
        fmt6(s.p95_max_arrival),
        fmt6(s.cvar_max_arrival),
        fmt6(s.service_reliability),
        fmt6(s.hold_reliability),
        fmt6(s.mean_emission),
        fmt6(s.mean_max_hub_delay),
        fmt6(s.score),
        s.feasible_service.to_string(),
        s.feasible_hold.to_string(),
    ]
}

/// Stages a command computes and the subset whose outputs it writes.
pub fn stages_for(command: &str) -> Result<(Stage, Vec<Stage>)> {
    if command == "run" {
        return Ok((Stage::Sensitivity, Stage::ALL.to_vec()));
    }
    let st: Stage = command.parse()?;
    Ok((st, vec![st]))
}

/// Outcome of a command that completed.
#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub seed: u64,
    pub input_hash: String,
    pub files: Vec<String>,
    pub selected: Option<String>,
}

/// Failure of a command, split by whether the inputs were at fault.
#[derive(Debug)]
pub enum CommandError {
    Input(Error),
    Stage(Stage, Error),
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandError::Input(e) => write!(f, "{e}"),
            CommandError::Stage(s, e) => write!(f, "stage {s} failed: {e}"),
        }
    }
}

/// Runs a pipeline command and writes its outputs and manifest into `out_dir`.
/// On a stage failure, outputs written so far are renamed with `.partial`.
pub fn execute(command: &str, cfg: &RunConfig, out_dir: &Path) -> std::result::Result<CommandOutcome, CommandError> {
    let (last, emit) = stages_for(command).map_err(CommandError::Input)?;
    cfg.validate().map_err(CommandError::Input)?;
    let seed = cfg.seed.ok_or_else(|| {
        CommandError::Input(Error::Config("a seed is required (--seed, HUBNET_SEED or config)".into()))
    })?;
    let inputs = load_inputs(cfg, seed).map_err(CommandError::Input)?;
    let mut out = OutputDir::create(out_dir, &inputs.input_hash).map_err(CommandError::Input)?;
    let config_value = serde_json::to_value(cfg).map_err(|e| CommandError::Input(Error::Config(e.to_string())))?;

    let mut pipe = Pipeline::new(cfg, &inputs, seed).map_err(CommandError::Input)?;
    for st in Stage::ALL.into_iter().filter(|s| *s <= last) {
        let res =
            pipe.run_stage(st).and_then(|_| if emit.contains(&st) { pipe.write_stage(st, &mut out) } else { Ok(()) });
        if let Err(e) = res {
            let _ = out.mark_partial();
            let _ = out.write_manifest(command, seed, &config_value).and_then(|_| {
                let m = out.path().join(MANIFEST_NAME);
                std::fs::rename(&m, out.path().join(format!("{MANIFEST_NAME}{PARTIAL_SUFFIX}")))
                    .map_err(|e| Error::io(m, e))
            });
            return Err(CommandError::Stage(st, e));
        }
    }
    out.write_manifest(command, seed, &config_value).map_err(|e| CommandError::Stage(last, e))?;
    Ok(CommandOutcome {
        seed,
        input_hash: inputs.input_hash.clone(),
        files: out.written().iter().map(|r| r.file.clone()).collect(),
        selected: (last >= Stage::Select).then(|| pipe.designs[pipe.selected()].label.clone()),
    })
}

/// In-memory run of every stage.
pub fn run_in_memory<'a>(cfg: &'a RunConfig, inputs: &'a Inputs, seed: u64) -> Result<Pipeline<'a>> {
    let mut p = Pipeline::new(cfg, inputs, seed)?;
    p.run_through(Stage::Sensitivity)?;
    Ok(p)
}
