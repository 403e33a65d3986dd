//! Conjugate posterior updating and posterior-predictive scenario sampling.
//!
//! Demand uses a Gamma–Poisson model per OD pair, travel times and the cost
//! multiplier use Normal–Inverse-Gamma updating on the log scale, and hub
//! reliability uses a Beta–Binomial model per candidate hub. Scenario `b`
//! of a sample with seed `s` draws from substreams keyed by `(s, b, variable)`,
//! so scenarios can be generated in any order or in parallel.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::ingest::{HistoricalPanel, NetworkData};
use crate::matrix::Square;
use crate::par;
use crate::rng::{self, tag};

/// Lower clamp for sampled hub reliabilities.
pub const RELIABILITY_FLOOR: f64 = 1e-6;

/// Gamma distribution in shape/rate form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPosterior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPosterior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::validation(format!("Gamma parameters must be positive, got ({shape}, {rate})")));
        }
        Ok(Self { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    /// Conjugate update with `total` events observed over `periods` periods.
    pub fn update(&self, total: f64, periods: f64) -> Self {
        Self { shape: self.shape + total, rate: self.rate + periods }
    }

    pub fn log_density(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * lambda.ln() - self.rate * lambda
    }

    /// Draws an intensity, then a Poisson count given it.
    pub fn sample_predictive<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let lambda = self.sample_rate(rng);
        crate::ingest::poisson(rng, lambda)
    }

    pub fn sample_rate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match Gamma::new(self.shape, 1.0 / self.rate) {
            Ok(g) => g.sample(rng),
            Err(_) => self.mean(),
        }
    }
}

/// Normal–Inverse-Gamma distribution over `(mu, sigma^2)` of a log-scale
/// normal model: `sigma^2 ~ IG(alpha, beta)`, `mu | sigma^2 ~ N(location, sigma^2 / kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NIGPosterior {
    pub location: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NIGPosterior {
    pub fn new(location: f64, kappa: f64, alpha: f64, beta: f64) -> Result<Self> {
        let ok = location.is_finite()
            && kappa > 0.0
            && alpha > 0.0
            && beta > 0.0
            && kappa.is_finite()
            && alpha.is_finite()
            && beta.is_finite();
        if !ok {
            return Err(Error::validation(format!("NIG parameters invalid: ({location}, {kappa}, {alpha}, {beta})")));
        }
        Ok(Self { location, kappa, alpha, beta })
    }

    /// Conjugate update with log-scale observations `ys`.
    pub fn update_log(&self, ys: &[f64]) -> Self {
        if ys.is_empty() {
            return *self;
        }
        let n = ys.len() as f64;
        let ybar = ys.iter().sum::<f64>() / n;
        let ss: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
        let kappa_n = self.kappa + n;
        Self {
            location: (self.kappa * self.location + n * ybar) / kappa_n,
            kappa: kappa_n,
            alpha: self.alpha + n / 2.0,
            beta: self.beta
                + 0.5 * ss
                + self.kappa * n * (ybar - self.location) * (ybar - self.location) / (2.0 * kappa_n),
        }
    }

    /// Joint log density at `(mu, sigma2)`.
    pub fn log_density(&self, mu: f64, sigma2: f64) -> f64 {
        if sigma2 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let var_mu = sigma2 / self.kappa;
        let normal = -0.5 * (2.0 * std::f64::consts::PI * var_mu).ln()
            - (mu - self.location) * (mu - self.location) / (2.0 * var_mu);
        let inv_gamma =
            self.alpha * self.beta.ln() - ln_gamma(self.alpha) - (self.alpha + 1.0) * sigma2.ln() - self.beta / sigma2;
        normal + inv_gamma
    }

    /// Draws `(mu, sigma^2)`.
    pub fn sample_params<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let precision = match Gamma::new(self.alpha, 1.0 / self.beta) {
            Ok(g) => g.sample(rng),
            Err(_) => self.alpha / self.beta,
        };
        let sigma2 = if precision > 0.0 { 1.0 / precision } else { f64::MAX };
        let z: f64 = rng.sample(StandardNormal);
        let mu = self.location + (sigma2 / self.kappa).sqrt() * z;
        (mu, sigma2)
    }

    /// Posterior-predictive draw on the log scale.
    pub fn sample_predictive_log<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (mu, sigma2) = self.sample_params(rng);
        let z: f64 = rng.sample(StandardNormal);
        mu + sigma2.sqrt() * z
    }

    /// Predictive median on the original scale, `exp(location)`.
    pub fn median(&self) -> f64 {
        self.location.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPosterior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPosterior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::validation(format!("Beta parameters must be positive, got ({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn update(&self, successes: f64, failures: f64) -> Self {
        Self { alpha: self.alpha + successes, beta: self.beta + failures }
    }

    pub fn log_density(&self, p: f64) -> f64 {
        if p <= 0.0 || p >= 1.0 {
            return f64::NEG_INFINITY;
        }
        ln_gamma(self.alpha + self.beta) - ln_gamma(self.alpha) - ln_gamma(self.beta)
            + (self.alpha - 1.0) * p.ln()
            + (self.beta - 1.0) * (1.0 - p).ln()
    }

    /// Draw clamped to `[RELIABILITY_FLOOR, 1]`.
    pub fn sample_clamped<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = match Beta::new(self.alpha, self.beta) {
            Ok(b) => b.sample(rng),
            Err(_) => self.mean(),
        };
        p.clamp(RELIABILITY_FLOOR, 1.0)
    }
}

/// Prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Demand prior strength: `a0 = c0 * baseline flow`, `b0 = c0`.
    pub demand_strength: f64,
    /// Floor for `a0` when the baseline flow is zero.
    pub demand_shape_floor: f64,
    pub travel_kappa0: f64,
    pub travel_alpha0: f64,
    pub travel_beta0: f64,
    pub cost: NIGPosterior,
    pub reliability_alpha0: f64,
    pub reliability_beta0: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            demand_strength: 1.0,
            demand_shape_floor: 1e-3,
            travel_kappa0: 1.0,
            travel_alpha0: 2.0,
            travel_beta0: 0.5,
            cost: NIGPosterior { location: 0.0, kappa: 1.0, alpha: 2.0, beta: 0.01 },
            reliability_alpha0: 8.0,
            reliability_beta0: 2.0,
        }
    }
}

/// Fitted parameters of every model component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    /// Per OD pair; diagonal entries are unused.
    pub demand: Square<GammaPosterior>,
    pub traveltime: Square<NIGPosterior>,
    /// Per candidate hub, aligned with `hubs`.
    pub hub_reliability: Vec<BetaPosterior>,
    pub cost: NIGPosterior,
    /// Candidate hub node indices.
    pub hubs: Vec<usize>,
}

impl PosteriorState {
    pub fn node_count(&self) -> usize {
        self.demand.n()
    }

    /// Sum of posterior mean intensities over all OD pairs.
    pub fn mean_total_demand(&self) -> f64 {
        self.demand.off_diagonal().map(|(i, j)| self.demand.get(i, j).mean()).sum()
    }

    pub fn mean_demand_matrix(&self) -> Square<f64> {
        let n = self.node_count();
        Square::from_fn(n, |i, j| if i == j { 0.0 } else { self.demand.get(i, j).mean() })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        if self.traveltime.n() != n {
            return Err(Error::validation("posterior travel-time shape disagrees with demand"));
        }
        if self.hub_reliability.len() != self.hubs.len() || self.hubs.iter().any(|&h| h >= n) {
            return Err(Error::validation("posterior hub reliability shape invalid"));
        }
        Ok(())
    }
}

/// One posterior-predictive draw of future operating conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: usize,
    pub demand: Square<u32>,
    /// Hours; zero diagonal.
    pub travel_time: Square<f64>,
    /// Realized reliability factor per node; 1.0 for nodes that are not
    /// candidate hubs.
    pub hub_reliability: Vec<f64>,
    pub cost_multiplier: f64,
}

impl Scenario {
    pub fn total_demand(&self) -> u64 {
        self.demand.as_slice().iter().map(|&v| u64::from(v)).sum()
    }
}

/// Gamma posterior per OD pair: `Gamma(a0 + sum_t w_t, b0 + T)`.
pub fn fit_demand(panel: &HistoricalPanel, prior: &Square<(f64, f64)>) -> Result<Square<GammaPosterior>> {
    let n = panel.node_count;
    if prior.n() != n {
        return Err(Error::validation("demand prior shape disagrees with panel"));
    }
    let mut out = Square::filled(n, GammaPosterior { shape: 1.0, rate: 1.0 });
    for (i, j) in prior.off_diagonal().collect::<Vec<_>>() {
        let (a0, b0) = prior.at(i, j);
        let g = GammaPosterior::new(a0, b0)
            .map_err(|_| Error::validation(format!("demand prior for ({i},{j}) must be positive")))?;
        let total: f64 = panel.demand.iter().map(|m| f64::from(m.at(i, j))).sum();
        out.set(i, j, g.update(total, panel.days as f64));
    }
    Ok(out)
}

/// Normal–Inverse-Gamma update applied to `log(observations)`.
pub fn fit_lognormal(observations: &[f64], prior: &NIGPosterior) -> Result<NIGPosterior> {
    if let Some(bad) = observations.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::validation(format!("lognormal observation must be positive, got {bad}")));
    }
    let ys: Vec<f64> = observations.iter().map(|x| x.ln()).collect();
    Ok(prior.update_log(&ys))
}

/// Beta posterior per candidate hub from `(successes, trials)` counts.
pub fn fit_reliability(panel: &HistoricalPanel, prior: &[(f64, f64)]) -> Result<Vec<BetaPosterior>> {
    let mut out = Vec::with_capacity(prior.len());
    for (k, &(a0, b0)) in prior.iter().enumerate() {
        let b = BetaPosterior::new(a0, b0)?;
        let (mut s, mut f) = (0u64, 0u64);
        for (day, obs) in panel.hub_reliability_obs.iter().enumerate() {
            let Some(&(succ, trials)) = obs.get(k) else { continue };
            if succ > trials {
                return Err(Error::validation(format!(
                    "day {day}, hub slot {k}: successes {succ} exceed trials {trials}"
                )));
            }
            s += u64::from(succ);
            f += u64::from(trials - succ);
        }
        out.push(b.update(s as f64, f as f64));
    }
    Ok(out)
}

/// Fits every component from a panel. Travel-time priors centre on the
/// distance-implied median `distance / speed`.
pub fn fit_posterior(
    network: &NetworkData,
    panel: &HistoricalPanel,
    priors: &PriorConfig,
    speed: f64,
) -> Result<PosteriorState> {
    panel.validate()?;
    let n = network.node_count;
    if panel.node_count != n {
        return Err(Error::validation("panel node count disagrees with network"));
    }
    if !(priors.demand_strength > 0.0) {
        return Err(Error::validation("demand prior strength must be positive"));
    }
    let demand_prior = Square::from_fn(n, |i, j| {
        let c0 = priors.demand_strength;
        let a0 = (c0 * network.flows_baseline.at(i, j)).max(priors.demand_shape_floor);
        if i == j {
            (1.0, 1.0)
        } else {
            (a0, c0)
        }
    });
    let demand = fit_demand(panel, &demand_prior)?;

    let mut traveltime = Square::filled(
        n,
        NIGPosterior {
            location: 0.0,
            kappa: priors.travel_kappa0,
            alpha: priors.travel_alpha0,
            beta: priors.travel_beta0,
        },
    );
    for (i, j) in crate::matrix::off_diagonal_pairs(n) {
        let median = (network.distances.at(i, j) / speed).max(0.01);
        let prior = NIGPosterior::new(median.ln(), priors.travel_kappa0, priors.travel_alpha0, priors.travel_beta0)?;
        let obs: Vec<f64> = panel.travel_time.iter().map(|m| m.at(i, j)).collect();
        traveltime.set(i, j, fit_lognormal(&obs, &prior)?);
    }

    let hub_prior = vec![(priors.reliability_alpha0, priors.reliability_beta0); network.candidate_hubs.len()];
    let hub_reliability = fit_reliability(panel, &hub_prior)?;
    let cost_prior = NIGPosterior::new(priors.cost.location, priors.cost.kappa, priors.cost.alpha, priors.cost.beta)?;
    let cost = fit_lognormal(&panel.cost_multiplier, &cost_prior)?;
    Ok(PosteriorState { demand, traveltime, hub_reliability, cost, hubs: network.candidate_hubs.clone() })
}

const VAR_DEMAND: u64 = 0;
const VAR_TRAVEL: u64 = 1;
const VAR_RELIABILITY: u64 = 2;
const VAR_COST: u64 = 3;

/// Draws scenario `scenario_id`, with demand intensities multiplied by
/// `demand_factor` before the Poisson draw.
pub fn sample_one(state: &PosteriorState, seed: u64, scenario_id: usize, demand_factor: f64) -> Scenario {
    let n = state.node_count();
    let b = scenario_id as u64;
    let mut g = rng::substream(seed, &[tag::SCENARIO, b, VAR_DEMAND]);
    let demand = Square::from_fn(n, |i, j| {
        if i == j {
            return 0;
        }
        let lambda = state.demand.get(i, j).sample_rate(&mut g) * demand_factor;
        crate::ingest::poisson(&mut g, lambda)
    });
    let mut g = rng::substream(seed, &[tag::SCENARIO, b, VAR_TRAVEL]);
    let travel_time = Square::from_fn(n, |i, j| {
        if i == j {
            return 0.0;
        }
        state.traveltime.get(i, j).sample_predictive_log(&mut g).exp()
    });
    let mut g = rng::substream(seed, &[tag::SCENARIO, b, VAR_RELIABILITY]);
    let mut hub_reliability = vec![1.0; n];
    for (&node, post) in state.hubs.iter().zip(&state.hub_reliability) {
        hub_reliability[node] = post.sample_clamped(&mut g);
    }
    let mut g = rng::substream(seed, &[tag::SCENARIO, b, VAR_COST]);
    let cost_multiplier = state.cost.sample_predictive_log(&mut g).exp();
    Scenario { scenario_id, demand, travel_time, hub_reliability, cost_multiplier }
}

/// `count` posterior-predictive scenarios with ids `0..count`.
pub fn sample_scenarios(state: &PosteriorState, count: usize, seed: u64) -> Result<Vec<Scenario>> {
    if count == 0 {
        return Err(Error::validation("scenario count must be positive"));
    }
    state.validate()?;
    Ok(par::map_range(count, |b| sample_one(state, seed, b, 1.0)))
}

/// Headline posterior quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Average of the OD Gamma posterior means.
    pub mean_intensity: f64,
    /// Average NIG location over arcs.
    pub mean_log_travel_time: f64,
    /// Average Beta mean over candidate hubs.
    pub mean_reliability: f64,
    pub mean_log_cost: f64,
}

pub fn posterior_summary(state: &PosteriorState) -> PosteriorSummary {
    let pairs: Vec<(usize, usize)> = state.demand.off_diagonal().collect();
    let np = pairs.len().max(1) as f64;
    let mean_intensity = pairs.iter().map(|&(i, j)| state.demand.get(i, j).mean()).sum::<f64>() / np;
    let mean_log_travel_time = pairs.iter().map(|&(i, j)| state.traveltime.get(i, j).location).sum::<f64>() / np;
    let mean_reliability = if state.hub_reliability.is_empty() {
        f64::NAN
    } else {
        state.hub_reliability.iter().map(BetaPosterior::mean).sum::<f64>() / state.hub_reliability.len() as f64
    };
    PosteriorSummary { mean_intensity, mean_log_travel_time, mean_reliability, mean_log_cost: state.cost.location }
}
