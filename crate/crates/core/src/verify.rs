//! Independent oracle checks: conjugate updates against numerical
//! integration, CVaR against brute-force Rockafellar–Uryasev minimisation,
//! Pareto extraction against pairwise dominance, run determinism across
//! thread counts, and the statistical consistency harness.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{theorem_harness, HarnessConfig, HarnessReport};
use crate::ingest::poisson;
use crate::posterior::{BetaPosterior, GammaPosterior, NIGPosterior};
use crate::report::{fmt6, OutputDir};
use crate::risk::{empirical_cvar, pareto_indices, var_index};
use crate::rng::{self, tag};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// Worst observed discrepancy, in the check's own units.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

/// Composite Simpson weights for `n` (odd) equally spaced nodes.
fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    debug_assert!(n % 2 == 1 && n >= 3);
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
    let h = (hi - lo) / (n - 1) as f64;
    ((0..n).map(|i| lo + h * i as f64).collect(), h)
}

/// Relative L1 distance between a closed-form density and a numerically
/// normalised unnormalised log density, both on the same weighted nodes.
fn relative_l1(closed_log: &[f64], unnorm_log: &[f64], weights: &[f64]) -> f64 {
    let m = unnorm_log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let q: Vec<f64> = unnorm_log.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = q.iter().zip(weights).map(|(q, w)| q * w).sum();
    let mut diff = 0.0;
    let mut mass = 0.0;
    for ((cl, q), w) in closed_log.iter().zip(&q).zip(weights) {
        let p = cl.exp();
        diff += (p - q / z).abs() * w;
        mass += p * w;
    }
    diff / mass
}

fn log_softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Gamma–Poisson: posterior density of `ln lambda` against the grid
/// normalisation of prior × Poisson likelihood.
pub fn gamma_poisson_case<R: Rng>(g: &mut R) -> Result<f64> {
    let prior = GammaPosterior::new(g.random_range(0.5..5.0), g.random_range(0.2..3.0))?;
    let lambda = g.random_range(0.5..20.0);
    let days = g.random_range(1..=10);
    let counts: Vec<u32> = (0..days).map(|_| poisson(g, lambda)).collect();
    let total: u32 = counts.iter().sum();
    let post = prior.update(f64::from(total), days as f64);

    let center = (post.shape / post.rate).ln();
    let lo = center - (40.0 / post.shape + 10.0 / post.shape.sqrt());
    let hi = center + 10.0 / post.shape.sqrt() + 4.0;
    let (ts, h) = linspace(lo, hi, 20_001);
    let w = simpson_weights(ts.len(), h);
    let closed: Vec<f64> = ts.iter().map(|&t| post.log_density(t.exp()) + t).collect();
    let unnorm: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let l = t.exp();
            let lik: f64 = counts.iter().map(|&x| f64::from(x) * t - l - ln_gamma(f64::from(x) + 1.0)).sum();
            prior.log_density(l) + t + lik
        })
        .collect();
    Ok(relative_l1(&closed, &unnorm, &w))
}

/// Beta–Binomial: posterior density of `logit p`.
pub fn beta_binomial_case<R: Rng>(g: &mut R) -> Result<f64> {
    let prior = BetaPosterior::new(g.random_range(0.5..10.0), g.random_range(0.5..10.0))?;
    let p_true = g.random_range(0.05..0.95);
    let days = g.random_range(1..=5);
    let (mut succ, mut fail) = (0u32, 0u32);
    for _ in 0..days {
        let trials = g.random_range(1..=100u32);
        let s = (0..trials).filter(|_| g.random::<f64>() < p_true).count() as u32;
        succ += s;
        fail += trials - s;
    }
    let post = prior.update(f64::from(succ), f64::from(fail));

    // log p = -softplus(-t), log(1 - p) = -softplus(t).
    let logit_density = |a: f64, b: f64, t: f64| {
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) - a * log_softplus(-t) - b * log_softplus(t)
    };
    let center = (post.alpha / post.beta).ln();
    let lo = center - (40.0 / post.alpha + 10.0);
    let hi = center + (40.0 / post.beta + 10.0);
    let (ts, h) = linspace(lo, hi, 20_001);
    let w = simpson_weights(ts.len(), h);
    let closed: Vec<f64> = ts.iter().map(|&t| logit_density(post.alpha, post.beta, t)).collect();
    let unnorm: Vec<f64> = ts
        .iter()
        .map(|&t| {
            logit_density(prior.alpha, prior.beta, t)
                - f64::from(succ) * log_softplus(-t)
                - f64::from(fail) * log_softplus(t)
        })
        .collect();
    Ok(relative_l1(&closed, &unnorm, &w))
}

/// Normal–Inverse-Gamma: joint posterior of `(mu, ln sigma^2)`, integrated on
/// a grid standardised by the posterior scale of `mu` at each variance.
pub fn normal_inverse_gamma_case<R: Rng>(g: &mut R) -> Result<f64> {
    let prior = NIGPosterior::new(
        g.random_range(-2.0..2.0),
        g.random_range(0.5..5.0),
        g.random_range(1.0..5.0),
        g.random_range(0.1..2.0),
    )?;
    let mu_true = g.random_range(-2.0..2.0);
    let sd_true = g.random_range(0.1..1.0);
    let n = g.random_range(2..=10);
    let normal = Normal::new(mu_true, sd_true).map_err(|e| Error::validation(e.to_string()))?;
    let ys: Vec<f64> = (0..n).map(|_| normal.sample(g)).collect();
    let post = prior.update_log(&ys);

    let s_center = (post.beta / post.alpha).ln();
    let s_lo = s_center - 10.0 / post.alpha.sqrt() - 4.0;
    let s_hi = s_center + 40.0 / post.alpha + 10.0 / post.alpha.sqrt();
    let (ss, hs) = linspace(s_lo, s_hi, 1201);
    let (zs, hz) = linspace(-12.0, 12.0, 241);
    let ws = simpson_weights(ss.len(), hs);
    let wz = simpson_weights(zs.len(), hz);

    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut closed = Vec::with_capacity(ss.len() * zs.len());
    let mut unnorm = Vec::with_capacity(ss.len() * zs.len());
    let mut weights = Vec::with_capacity(ss.len() * zs.len());
    for (&s, &w_s) in ss.iter().zip(&ws) {
        let sigma2 = s.exp();
        let scale = (sigma2 / post.kappa).sqrt();
        // d mu d sigma2 = scale * sigma2 dz ds
        let jac = scale.ln() + s;
        for (&z, &w_z) in zs.iter().zip(&wz) {
            let mu = post.location + scale * z;
            closed.push(post.log_density(mu, sigma2) + jac);
            let lik: f64 = ys.iter().map(|y| -half_ln_2pi - 0.5 * s - (y - mu) * (y - mu) / (2.0 * sigma2)).sum();
            unnorm.push(prior.log_density(mu, sigma2) + jac + lik);
            weights.push(w_s * w_z);
        }
    }
    Ok(relative_l1(&closed, &unnorm, &weights))
}

type Case = fn(&mut rand_chacha::ChaCha8Rng) -> Result<f64>;

/// Conjugacy oracle: `cases` random small cases per model family.
pub fn conjugacy_check(seed: u64, cases: usize, tolerance: f64) -> Result<CheckResult> {
    let start = Instant::now();
    let families: [(&str, Case); 3] = [
        ("gamma-poisson", gamma_poisson_case),
        ("normal-inverse-gamma", normal_inverse_gamma_case),
        ("beta-binomial", beta_binomial_case),
    ];
    let mut worst = 0.0_f64;
    let mut detail = Vec::new();
    for (fi, (name, case)) in families.iter().enumerate() {
        let errs = crate::par::map_range(cases, |c| {
            let mut g = rng::substream(seed, &[tag::VERIFY, 1, fi as u64, c as u64]);
            case(&mut g)
        });
        let fam_worst = errs.into_iter().collect::<Result<Vec<f64>>>()?.into_iter().fold(0.0, f64::max);
        detail.push(format!("{name} max={fam_worst:.3e}"));
        worst = worst.max(fam_worst);
    }
    Ok(CheckResult {
        name: "conjugacy".into(),
        passed: worst < tolerance,
        cases: cases * families.len(),
        worst,
        tolerance,
        detail: detail.join("; "),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Rockafellar–Uryasev objective minimised over every sample value; the
/// objective is piecewise linear and convex with breakpoints at the samples.
pub fn brute_force_cvar(samples: &[f64], alpha: f64) -> f64 {
    let denom = (1.0 - alpha) * samples.len() as f64;
    samples
        .iter()
        .map(|&zeta| zeta + samples.iter().map(|&y| (y - zeta).max(0.0)).sum::<f64>() / denom)
        .fold(f64::INFINITY, f64::min)
}

fn random_sample<R: Rng>(g: &mut R) -> Vec<f64> {
    let n = g.random_range(1..=200);
    let kind = g.random_range(0..4);
    (0..n)
        .map(|_| {
            let z: f64 = g.sample(StandardNormal);
            match kind {
                0 => z,
                1 => (0.8 * z).exp() * 30.0,
                2 => (z * 2.0).round(),
                _ => g.random_range(0.0..100.0),
            }
        })
        .collect()
}

fn random_alpha<R: Rng>(g: &mut R, n: usize) -> f64 {
    if n >= 2 && g.random_bool(0.3) {
        // alpha * n lands on an integer
        g.random_range((n / 2).max(1)..n) as f64 / n as f64
    } else {
        g.random_range(0.5..0.99)
    }
}

/// CVaR oracle for an arbitrary implementation: equality with the brute-force
/// minimiser plus the coherence properties (mean and VaR bounds, monotonicity
/// in alpha, translation equivariance, positive homogeneity).
pub fn cvar_check_with<F>(seed: u64, instances: usize, cvar: F) -> Result<CheckResult>
where
    F: Fn(&[f64], f64) -> f64 + Sync + Send,
{
    let start = Instant::now();
    let outcomes = crate::par::map_range(instances, |c| {
        let mut g = rng::substream(seed, &[tag::VERIFY, 2, c as u64]);
        let y = random_sample(&mut g);
        let alpha = random_alpha(&mut g, y.len());
        let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let v = cvar(&y, alpha);
        let mut failures = Vec::new();

        let oracle_err = (v - brute_force_cvar(&y, alpha)).abs() / scale.max(1.0);
        if oracle_err > 1e-9 {
            failures.push("brute-force");
        }
        let tol = 1e-12 * scale;
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        if v < mean - tol {
            failures.push("mean bound");
        }
        let mut sorted = y.clone();
        sorted.sort_by(f64::total_cmp);
        if v < sorted[var_index(alpha, y.len())] - tol {
            failures.push("VaR bound");
        }
        let alpha2 = alpha + (0.999 - alpha) * g.random::<f64>();
        if cvar(&y, alpha2) < v - tol {
            failures.push("monotone in alpha");
        }
        let c: f64 = g.random_range(-50.0..50.0);
        let shifted: Vec<f64> = y.iter().map(|x| x + c).collect();
        if (cvar(&shifted, alpha) - (v + c)).abs() > 1e-12 * (scale + c.abs()) {
            failures.push("translation");
        }
        let lam: f64 = g.random_range(0.01..100.0);
        let scaled: Vec<f64> = y.iter().map(|x| x * lam).collect();
        if (cvar(&scaled, alpha) - lam * v).abs() > 1e-12 * lam * scale {
            failures.push("homogeneity");
        }
        (oracle_err, failures)
    });
    let worst = outcomes.iter().map(|o| o.0).fold(0.0, f64::max);
    let mut failed: Vec<String> = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.1.is_empty())
        .map(|(i, o)| format!("#{i}: {}", o.1.join(",")))
        .collect();
    let n_failed = failed.len();
    failed.truncate(5);
    Ok(CheckResult {
        name: "cvar".into(),
        passed: n_failed == 0,
        cases: instances,
        worst,
        tolerance: 1e-9,
        detail: if n_failed == 0 {
            "all properties hold".into()
        } else {
            format!("{n_failed} failing instances, e.g. {}", failed.join("; "))
        },
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn cvar_check(seed: u64, instances: usize) -> Result<CheckResult> {
    cvar_check_with(seed, instances, |y, a| empirical_cvar(y, a).unwrap_or(f64::NAN))
}

/// Pairwise-dominance Pareto set, in input order.
pub fn brute_force_pareto(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let (xi, yi) = points[i];
            !points.iter().any(|&(xj, yj)| xj <= xi && yj <= yi && (xj < xi || yj < yi))
        })
        .collect()
}

pub fn pareto_check(seed: u64, sets: usize) -> Result<CheckResult> {
    let start = Instant::now();
    let mismatches: Vec<usize> = crate::par::map_range(sets, |s| {
        let mut g = rng::substream(seed, &[tag::VERIFY, 3, s as u64]);
        let n = g.random_range(1..=80);
        let discrete = g.random_bool(0.5);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                if discrete {
                    (f64::from(g.random_range(0..8u8)), f64::from(g.random_range(0..8u8)))
                } else {
                    (g.random_range(0.0..1.0), g.random_range(0.0..1.0))
                }
            })
            .collect();
        (pareto_indices(&pts) != brute_force_pareto(&pts)).then_some(s)
    })
    .into_iter()
    .flatten()
    .collect();
    Ok(CheckResult {
        name: "pareto".into(),
        passed: mismatches.is_empty(),
        cases: sets,
        worst: mismatches.len() as f64,
        tolerance: 0.0,
        detail: if mismatches.is_empty() { "exact match".into() } else { format!("mismatching sets {mismatches:?}") },
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn dir_digest(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        files.push((name, std::fs::read(&p).map_err(|e| Error::io(&p, e))?));
    }
    files.sort();
    Ok(files)
}

/// Runs the full pipeline twice per thread count in `scratch` and compares
/// every output file byte for byte.
pub fn determinism_check(cfg: &RunConfig, scratch: &Path, threads: &[usize]) -> Result<CheckResult> {
    let start = Instant::now();
    let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
    let mut mismatch = Vec::new();
    let mut runs = 0;
    for &t in threads {
        for rep in 0..2 {
            let dir = scratch.join(format!("threads-{t}-{rep}"));
            let outcome = crate::par::with_threads(t, || crate::pipeline::execute("run", cfg, &dir));
            outcome.map_err(|e| Error::validation(format!("determinism run failed: {e}")))?;
            let files = dir_digest(&dir)?;
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            runs += 1;
            match &reference {
                None => reference = Some(files),
                Some(r) if *r != files => mismatch.push(format!("threads={t} run={rep}")),
                Some(_) => {}
            }
        }
    }
    let _ = std::fs::remove_dir(scratch);
    Ok(CheckResult {
        name: "determinism".into(),
        passed: mismatch.is_empty(),
        cases: runs,
        worst: mismatch.len() as f64,
        tolerance: 0.0,
        detail: if mismatch.is_empty() {
            format!("byte-identical outputs across threads {threads:?}")
        } else {
            format!("outputs differ: {}", mismatch.join(", "))
        },
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn harness_check(seed: u64, cfg: &HarnessConfig) -> Result<(CheckResult, HarnessReport)> {
    let start = Instant::now();
    let rep = theorem_harness(seed, cfg)?;
    let curve: Vec<String> =
        rep.cvar_curve.iter().map(|p| format!("B={}:{:.4}", p.samples, p.median_abs_error)).collect();
    Ok((
        CheckResult {
            name: "consistency-harness".into(),
            passed: rep.passed(),
            cases: cfg.cvar_replications * cfg.sizes.len() + cfg.selection_replications,
            worst: rep.selection_frequency,
            tolerance: cfg.min_selection_frequency,
            detail: format!(
                "cvar error {} decreasing={}; selection frequency {:.3} at B={}",
                curve.join(" "),
                rep.cvar_decreasing,
                rep.selection_frequency,
                rep.selection_samples
            ),
            seconds: start.elapsed().as_secs_f64(),
        },
        rep,
    ))
}

/// Every check, in a fixed order.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn write(&self, out: &mut OutputDir) -> Result<()> {
        out.write_csv(
            "verify_report.csv",
            &["check", "passed", "cases", "worst", "tolerance", "detail"],
            self.checks.iter().map(|c| {
                vec![
                    c.name.clone(),
                    c.passed.to_string(),
                    c.cases.to_string(),
                    format!("{:.3e}", c.worst),
                    format!("{:.3e}", c.tolerance),
                    c.detail.clone(),
                ]
            }),
        )
    }
}

/// Runs every oracle suite. `scratch` holds the temporary determinism runs.
pub fn run_all(cfg: &RunConfig, seed: u64, scratch: &Path) -> Result<VerifyReport> {
    let key = rng::derive_key(seed, &[tag::VERIFY]);
    let harness_seed = crate::pipeline::Seeds::derive(seed).harness;
    let mut det_cfg = cfg.clone();
    det_cfg.seed = Some(seed);
    let checks = vec![
        conjugacy_check(key, 100, 1e-6)?,
        cvar_check(key, 1000)?,
        pareto_check(key, 500)?,
        determinism_check(&det_cfg, scratch, &[1, 8])?,
        harness_check(harness_seed, &cfg.harness)?.0,
    ];
    Ok(VerifyReport { checks })
}

/// One-line summary per check: `name PASS|FAIL detail`.
pub fn summary_lines(report: &VerifyReport) -> Vec<String> {
    report
        .checks
        .iter()
        .map(|c| {
            format!(
                "{:<20} {} cases={} worst={} ({:.2}s) {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.cases,
                fmt6(c.worst),
                c.seconds,
                c.detail
            )
        })
        .collect()
}
