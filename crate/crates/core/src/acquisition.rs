//! Acquisition functions and candidate generation.
//!
//! The preference-augmented acquisition multiplies the GP posterior with a
//! Gaussian belief built from the soft Copeland score. The belief's variance is
//! inflated by `γ t² σ_f²`, so its influence fades and the acquisition falls
//! back to plain UCB as `t` grows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{Domain, GpModel};
use crate::optim::pattern_search_max;
use crate::pref::SoftCopeland;
use crate::sobol::Sobol;

pub const DEFAULT_BETA_SQRT: f64 = 2.0;
pub const DEFAULT_GAMMA: f64 = 0.01;
pub const DEFAULT_GAMMA_PIBO: f64 = 10.0;
pub const AF_SEEDS: usize = 512;
pub const AF_RESTARTS: usize = 10;
pub const AF_POLISH_EVALS: usize = 200;
pub const THOMPSON_GRID: usize = 1024;
const PIBO_FLOOR: f64 = 1e-12;

/// How the soft Copeland score is mapped onto the objective's scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RhoConvention {
    /// `μ_π = m_y·c + s_y`, slope `m_y`.
    PaperLiteral,
    /// `μ_π = s_y·c + m_y`, slope `s_y`.
    #[default]
    Swapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcqConfig {
    pub beta_sqrt: f64,
    pub gamma: f64,
    pub t: usize,
    #[serde(default)]
    pub rho: RhoConvention,
}

impl Default for AcqConfig {
    fn default() -> Self {
        Self { beta_sqrt: DEFAULT_BETA_SQRT, gamma: DEFAULT_GAMMA, t: 1, rho: RhoConvention::default() }
    }
}

impl AcqConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::input(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.beta_sqrt >= 0.0 && self.beta_sqrt.is_finite()) {
            return Err(Error::input(format!("beta_sqrt must be nonnegative, got {}", self.beta_sqrt)));
        }
        if self.t == 0 {
            return Err(Error::input("t must be at least 1"));
        }
        Ok(())
    }

    pub fn at(self, t: usize) -> Self {
        Self { t, ..self }
    }
}

/// Confidence schedule `β_t = 2 ln(|D| π² t² / (6δ))` for a finite domain of
/// `domain_size` points; returns `β_t^{1/2}`.
pub fn scheduled_beta_sqrt(domain_size: usize, t: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) || domain_size == 0 || t == 0 {
        return Err(Error::input("schedule needs |D| ≥ 1, t ≥ 1 and δ in (0, 1)"));
    }
    let pi2 = std::f64::consts::PI.powi(2);
    let arg = domain_size as f64 * pi2 * (t as f64).powi(2) / (6.0 * delta);
    Ok((2.0 * arg.ln()).max(0.0).sqrt())
}

/// Mean and standard deviation of the raw objective observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YStats {
    pub mean: f64,
    pub std: f64,
}

impl YStats {
    pub fn from_gp(gp: &GpModel) -> Self {
        Self { mean: gp.y_mean, std: gp.y_std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledBelief {
    pub mu_pi: f64,
    pub var_pi: f64,
}

pub fn scale_belief(cop_mean: f64, cop_var: f64, stats: YStats, sigma_f_sq: f64, cfg: &AcqConfig) -> ScaledBelief {
    let s_y = if stats.std > 0.0 {
        stats.std
    } else {
        tracing::warn!("zero observation spread; belief scaling uses unit std");
        1.0
    };
    let (offset, slope) = match cfg.rho {
        RhoConvention::PaperLiteral => (s_y, stats.mean),
        RhoConvention::Swapped => (stats.mean, s_y),
    };
    let t = cfg.t as f64;
    ScaledBelief {
        mu_pi: slope * cop_mean + offset,
        var_pi: slope * slope * cop_var.max(0.0) + cfg.gamma * t * t * sigma_f_sq,
    }
}

/// Moments of the normalized product `N(μ_π, σ²_π)·N(μ_f, σ²_f)`.
pub fn product_of_gaussians(mu_pi: f64, var_pi: f64, mu_f: f64, var_f: f64) -> (f64, f64) {
    let denom = var_pi + var_f;
    if !(denom > 0.0) {
        return (mu_f, 0.0);
    }
    let w_pi = var_f / denom;
    let mean = w_pi * mu_pi + (1.0 - w_pi) * mu_f;
    // var_pi·var_f/denom, written to stay finite when var_pi is huge.
    let var = if var_pi.is_infinite() { var_f } else { var_pi * (var_f / denom) };
    (mean, var)
}

pub fn ucb(gp: &GpModel, x: &[f64], beta_sqrt: f64) -> f64 {
    let (m, v) = gp.posterior_unchecked(x);
    m + beta_sqrt * v.sqrt()
}

/// Posterior moments of the belief-augmented model at `x`.
pub fn augmented_posterior(gp: &GpModel, sc: &SoftCopeland, x: &[f64], cfg: &AcqConfig, stats: YStats) -> (f64, f64) {
    let (mu_f, var_f) = gp.posterior_unchecked(x);
    let b = scale_belief(sc.copeland_mean(x), sc.copeland_var(x), stats, var_f, cfg);
    product_of_gaussians(b.mu_pi, b.var_pi, mu_f, var_f)
}

pub fn coexbo_af(gp: &GpModel, sc: &SoftCopeland, x: &[f64], cfg: &AcqConfig, stats: YStats) -> f64 {
    let (m, v) = augmented_posterior(gp, sc, x, cfg, stats);
    m + cfg.beta_sqrt * v.sqrt()
}

/// `ucb(x) · max(copeland_mean(x), ε)^{γ/t}`.
pub fn pibo_af(gp: &GpModel, sc: &SoftCopeland, x: &[f64], beta_sqrt: f64, gamma_pibo: f64, t: usize) -> f64 {
    let exponent = gamma_pibo / t.max(1) as f64;
    ucb(gp, x, beta_sqrt) * sc.copeland_mean(x).max(PIBO_FLOOR).powf(exponent)
}

/// Best point of `af`: score 512 scrambled Sobol seeds, polish the best
/// `restarts` with compass search. Exact ties keep the lowest seed index.
pub fn maximize_af<F>(af: F, domain: &Domain, restarts: usize, seed: u64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let d = domain.dim();
    let seeds: Vec<Vec<f64>> = Sobol::scrambled(d, seed)?
        .points(AF_SEEDS)
        .into_iter()
        .map(|u| domain.from_unit(&u))
        .collect();
    let score = |x: &[f64]| {
        let v = af(x);
        if v.is_nan() { f64::NEG_INFINITY } else { v }
    };
    let values: Vec<f64> = seeds.iter().map(|x| score(x)).collect();
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let step: Vec<f64> = (0..d).map(|i| 0.5 * (AF_SEEDS as f64).powf(-1.0 / d as f64) * domain.width(i)).collect();
    let mut best = (seeds[order[0]].clone(), values[order[0]]);
    for &i in order.iter().take(restarts.max(1)) {
        let (x, v) = pattern_search_max(score, &seeds[i], values[i], &domain.lower, &domain.upper, &step, AF_POLISH_EVALS);
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best.0)
}

/// `x1` maximizes UCB, `x2` maximizes `second`; both searches share a seed.
pub fn generate_pair_with<F>(gp: &GpModel, second: F, beta_sqrt: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64]) -> f64,
{
    let x1 = maximize_af(|x| ucb(gp, x, beta_sqrt), &gp.domain, AF_RESTARTS, seed)?;
    let x2 = maximize_af(second, &gp.domain, AF_RESTARTS, seed)?;
    Ok((x1, x2))
}

pub fn generate_pair(
    gp: &GpModel,
    sc: &SoftCopeland,
    cfg: &AcqConfig,
    stats: YStats,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    generate_pair_with(gp, |x| coexbo_af(gp, sc, x, cfg, stats), cfg.beta_sqrt, seed)
}

/// Argmax of one joint posterior draw over a 1024-point Sobol grid.
pub fn thompson_candidate(gp: &GpModel, seed: u64) -> Result<Vec<f64>> {
    let grid: Vec<Vec<f64>> = Sobol::scrambled(gp.dim(), crate::rng::derive(seed, &[crate::rng::tag("ts-grid")]))?
        .points(THOMPSON_GRID)
        .into_iter()
        .map(|u| gp.domain.from_unit(&u))
        .collect();
    let draw = gp.sample_posterior(&grid, 1, seed)?;
    let mut best = 0;
    for j in 1..grid.len() {
        if draw[(0, j)] > draw[(0, best)] {
            best = j;
        }
    }
    Ok(grid[best].clone())
}

/// Two-point UCB batch with a kriging believer: the second point maximizes
/// UCB after conditioning on the first point at its posterior mean.
pub fn batch_ucb(gp: &GpModel, beta_sqrt: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let x1 = maximize_af(|x| ucb(gp, x, beta_sqrt), &gp.domain, AF_RESTARTS, seed)?;
    let believer = gp.with_observation(&x1, gp.posterior_mean(&x1))?;
    let x2 = maximize_af(|x| ucb(&believer, x, beta_sqrt), &gp.domain, AF_RESTARTS, seed)?;
    Ok((x1, x2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretDiagnostics {
    pub r_ratio_bound: f64,
    pub delta_mu: f64,
}

/// `sqrt[(ρ²𝕍 + γ(t−1)²σ²(x2)) / (ρ²𝕍 + γ(t−1)²σ²(x2) + σ²(x1))]`.
pub fn regret_ratio(rho_var: f64, gamma: f64, t: usize, var_x1: f64, var_x2: f64) -> Result<f64> {
    if !(var_x1 > 0.0) {
        return Err(Error::input("regret ratio undefined when σ²(x1) = 0"));
    }
    let tm1 = t.saturating_sub(1) as f64;
    let a = rho_var.max(0.0) + gamma * tm1 * tm1 * var_x2.max(0.0);
    Ok((a / (a + var_x1)).sqrt())
}

/// Regret-ratio bound and normalized mean gap for a generated pair.
pub fn regret_ratio_bound(
    gp: &GpModel,
    sc: &SoftCopeland,
    x1: &[f64],
    x2: &[f64],
    cfg: &AcqConfig,
    stats: YStats,
) -> Result<RegretDiagnostics> {
    let (mu1, var1) = gp.posterior(x1)?;
    let (_, var2) = gp.posterior(x2)?;
    let slope = match cfg.rho {
        RhoConvention::PaperLiteral => stats.mean,
        RhoConvention::Swapped => if stats.std > 0.0 { stats.std } else { 1.0 },
    };
    let rho_var = slope * slope * sc.copeland_var(x2);
    let r = regret_ratio(rho_var, cfg.gamma, cfg.t, var1, var2)?;
    let (mu_aug, _) = augmented_posterior(gp, sc, x2, cfg, stats);
    let delta_mu = if cfg.beta_sqrt > 0.0 {
        (mu1 - mu_aug).abs() / (2.0 * cfg.beta_sqrt * var1.sqrt())
    } else {
        f64::INFINITY
    };
    Ok(RegretDiagnostics { r_ratio_bound: r, delta_mu })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn belief_scaling_examples() {
        let cfg = AcqConfig { beta_sqrt: 2.0, gamma: 1.0, t: 1, rho: RhoConvention::PaperLiteral };
        let b = scale_belief(0.7, 0.0, YStats { mean: 3.0, std: 2.0 }, 2.0, &cfg);
        assert_eq!(b.var_pi, 2.0);
        let b = scale_belief(0.7, 0.4, YStats { mean: 0.0, std: 2.0 }, 2.0, &cfg);
        assert_eq!((b.mu_pi, b.var_pi), (2.0, 2.0));
        let cfg = AcqConfig { gamma: 0.01, t: 1000, ..cfg };
        let b = scale_belief(0.3, 1.0, YStats { mean: 1.0, std: 2.0 }, 1.0, &cfg);
        assert!((b.var_pi - (1.0 + 1e4)).abs() < 1e-9);
    }

    #[test]
    fn equal_gaussians_halve_variance() {
        let (m, v) = product_of_gaussians(1.5, 2.0, 1.5, 2.0);
        assert_eq!((m, v), (1.5, 1.0));
        assert_eq!(product_of_gaussians(3.0, 0.0, 1.0, 0.0), (1.0, 0.0));
        let (m, v) = product_of_gaussians(3.0, f64::INFINITY, 1.0, 0.5);
        assert_eq!((m, v), (1.0, 0.5));
    }

    #[test]
    fn regret_ratio_substitution() {
        // γ(t−1)²σ²(x2) = 1 with γ = 1, t = 2, σ²(x2) = 1.
        let r = regret_ratio(0.0, 1.0, 2, 1.0, 1.0).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(regret_ratio(0.0, 1.0, 2, 0.0, 1.0).is_err());
        assert!(regret_ratio(0.3, 1.0, 5, 1e-3, 1.0).unwrap() < 1.0);
    }

    #[test]
    fn schedule_grows_with_t() {
        let a = scheduled_beta_sqrt(100, 1, 0.1).unwrap();
        let b = scheduled_beta_sqrt(100, 10, 0.1).unwrap();
        assert!(b > a && a > 0.0);
    }

    #[test]
    fn maximizer_finds_known_point() {
        let domain = Domain::new(vec![-2.0, 0.0], vec![2.0, 1.0]).unwrap();
        let target = [0.731, 0.244];
        let af = |x: &[f64]| -((x[0] - target[0]).powi(2) + (x[1] - target[1]).powi(2));
        let x = maximize_af(af, &domain, AF_RESTARTS, 4).unwrap();
        let diam = (16.0f64 + 1.0).sqrt();
        assert!(((x[0] - target[0]).powi(2) + (x[1] - target[1]).powi(2)).sqrt() < 1e-3 * diam, "{x:?}");
        let c = maximize_af(|_| 1.0, &domain, AF_RESTARTS, 4).unwrap();
        assert!(domain.contains(&c));
    }
}
