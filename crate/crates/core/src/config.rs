//! Run configuration: experiment defaults plus JSON overrides.
//!
//! A config file is a JSON object merged over the defaults of its
//! `experiment` (RFC 7386 merge-patch semantics), so any subset of fields
//! may be given.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::designspace::DesignGrid;
use crate::error::{Error, Result};
use crate::evaluator::CostParams;
use crate::experiments::{cab_weight_rows, sim_weight_rows, BaselineMode, HarnessConfig, WeightRow};
use crate::ingest::{RegimeConfig, SynthParams, CAB_DEFAULT_HUBS, CAB_DEFAULT_SUBSET, CAB_TARGET_MEAN_DEMAND};
use crate::posterior::PriorConfig;
use crate::risk::{RiskConfig, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Sim,
    Cab,
}

/// Input data. Only `panel_dir` applies to the sim experiment, whose network
/// comes from `RunConfig::synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// CAB25 text file; required for the `cab` experiment.
    pub cab_path: Option<PathBuf>,
    /// 1-based CAB node labels of the subnetwork.
    pub subset: Vec<usize>,
    /// 0-based candidate hubs within the subnetwork.
    pub candidate_hubs: Vec<usize>,
    pub target_mean_demand: f64,
    /// Directory holding an exported panel to use instead of a generated one.
    pub panel_dir: Option<PathBuf>,
}

/// Stress settings; the scenario seed is derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressSettings {
    pub amplification: f64,
    pub disruption_prob: f64,
    pub disruption_time_factor: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: Option<u64>,
    pub data: DataConfig,
    pub synth: SynthParams,
    pub regime: RegimeConfig,
    pub priors: PriorConfig,
    /// Posterior-predictive training scenarios `B`.
    pub scenarios: usize,
    pub stress: StressSettings,
    pub risk: RiskConfig,
    pub grid: DesignGrid,
    pub costs: CostParams,
    pub baseline_mode: BaselineMode,
    pub sensitivity: Vec<WeightRow>,
    pub harness: HarnessConfig,
}

impl RunConfig {
    pub fn sim_default() -> Self {
        Self {
            experiment: Experiment::Sim,
            seed: None,
            data: DataConfig {
                cab_path: None,
                subset: Vec::new(),
                candidate_hubs: Vec::new(),
                target_mean_demand: CAB_TARGET_MEAN_DEMAND,
                panel_dir: None,
            },
            synth: SynthParams::default(),
            regime: RegimeConfig::sim_default(),
            priors: PriorConfig::default(),
            scenarios: 70,
            stress: StressSettings {
                amplification: 1.22,
                disruption_prob: 0.26,
                disruption_time_factor: 1.8,
                count: 90,
            },
            risk: RiskConfig {
                alpha: 0.90,
                service_target: 60.0,
                hold_threshold: 5.0,
                eps_t: 0.05,
                eps_k: 0.05,
                weights: Weights::default(),
            },
            grid: DesignGrid { sorting_window_hours: 3.0, ..DesignGrid::sim_default() },
            costs: CostParams::sim_default(),
            baseline_mode: BaselineMode::MeanOnly,
            sensitivity: sim_weight_rows(),
            harness: HarnessConfig::default(),
        }
    }

    pub fn cab_default() -> Self {
        Self {
            experiment: Experiment::Cab,
            seed: None,
            data: DataConfig {
                cab_path: None,
                subset: CAB_DEFAULT_SUBSET.to_vec(),
                candidate_hubs: CAB_DEFAULT_HUBS.to_vec(),
                target_mean_demand: CAB_TARGET_MEAN_DEMAND,
                panel_dir: None,
            },
            synth: SynthParams::default(),
            regime: RegimeConfig::cab_default(),
            priors: PriorConfig::default(),
            scenarios: 120,
            stress: StressSettings {
                amplification: 1.22,
                disruption_prob: 0.26,
                disruption_time_factor: 1.8,
                count: 180,
            },
            risk: RiskConfig {
                alpha: 0.90,
                service_target: 34.0,
                hold_threshold: 8.0,
                eps_t: 0.05,
                eps_k: 0.05,
                weights: Weights::default(),
            },
            grid: DesignGrid::cab_default(),
            costs: CostParams::cab_default(),
            baseline_mode: BaselineMode::CostPriority,
            sensitivity: cab_weight_rows(),
            harness: HarnessConfig::default(),
        }
    }

    pub fn defaults_for(experiment: Experiment) -> Self {
        match experiment {
            Experiment::Sim => Self::sim_default(),
            Experiment::Cab => Self::cab_default(),
        }
    }

    /// Defaults of the patch's `experiment` (sim if absent) merged with `patch`.
    pub fn from_json_value(patch: &Value) -> Result<Self> {
        if !patch.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        let experiment = match patch.get("experiment") {
            None => Experiment::Sim,
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("experiment: {e}")))?,
        };
        let mut base =
            serde_json::to_value(Self::defaults_for(experiment)).map_err(|e| Error::Config(e.to_string()))?;
        merge_patch(&mut base, patch);
        let cfg: Self = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        Self::from_json_value(&v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios == 0 {
            return Err(Error::Config("scenarios must be positive".into()));
        }
        if self.stress.count == 0 {
            return Err(Error::Config("stress.count must be positive".into()));
        }
        self.risk.validate()?;
        self.grid.validate()?;
        self.costs.validate()?;
        self.regime.validate()?;
        if self.sensitivity.is_empty() {
            return Err(Error::Config("sensitivity needs at least one weight row".into()));
        }
        Ok(())
    }

    /// Pretty JSON with a trailing newline; stable field order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// RFC 7386 JSON merge-patch.
pub fn merge_patch(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    t.remove(k);
                } else {
                    merge_patch(t.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        (t, p) => *t = p.clone(),
    }
}
