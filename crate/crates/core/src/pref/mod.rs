//! Preference learning from pairwise duels.
//!
//! Duels are mirrored so that `p(a ≻ b) + p(b ≻ a) = 1`, labels are turned
//! into log-Dirichlet regression targets with heteroscedastic noise, and a GP
//! over the joint `(x1, x2)` space models the latent class scores. The soft
//! Copeland score, the average win probability of `x` against the whole
//! domain, is then approximated in closed form by Bayesian quadrature.
//!
//! With tied lengthscales across both halves of the joint input the kernel is
//! invariant to swapping the halves, and the "x2 wins" channel is exactly the
//! mirror image of the "x1 wins" channel. Only one channel is factorized:
//! `f0(a, b)` is evaluated as `f1(b, a)`.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gp::regression::{self, gram, Conditioned, FitOptions, Hyper, MeanModel, NoiseModel, Spec};
use crate::gp::Domain;
use crate::sobol::Sobol;

pub const DEFAULT_ALPHA_EPS: f64 = 0.01;
pub const DEFAULT_N_MC: usize = 256;
pub const BELIEF_GRID: usize = 4096;
/// Hyperparameters are fitted on at most this many duels (mirrors included
/// on top); the posterior always conditions on every duel.
pub const FIT_SUBSAMPLE: usize = 200;
pub const PREF_RESTARTS: usize = 3;
const VX_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelRecord {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// 1 when `x1` was preferred, 0 otherwise.
    pub y_pref: u8,
}

pub fn augment_duels(duels: &[DuelRecord]) -> Vec<DuelRecord> {
    let mut out = duels.to_vec();
    out.extend(duels.iter().map(|d| DuelRecord { x1: d.x2.clone(), x2: d.x1.clone(), y_pref: 1 - d.y_pref }));
    out
}

/// Log-Dirichlet regression targets and noise variances for both classes.
///
/// Row `c` holds class `c` (class 1 = "first arm wins"). With
/// `α = 1[label = c] + alpha_eps`, the noise is `ln(1/α + 1)` and the target
/// is `ln α − noise/2`.
pub fn dirichlet_transform(labels: &[u8], alpha_eps: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(alpha_eps > 0.0 && alpha_eps.is_finite()) {
        return Err(Error::input(format!("alpha_eps must be positive, got {alpha_eps}")));
    }
    if let Some(bad) = labels.iter().find(|l| **l > 1) {
        return Err(Error::input(format!("labels must be 0 or 1, got {bad}")));
    }
    let n = labels.len();
    let mut targets = DMatrix::zeros(2, n);
    let mut noise = DMatrix::zeros(2, n);
    for (i, &label) in labels.iter().enumerate() {
        for c in 0..2u8 {
            let a = f64::from(u8::from(label == c)) + alpha_eps;
            let s = (1.0 / a + 1.0).ln();
            noise[(c as usize, i)] = s;
            targets[(c as usize, i)] = a.ln() - s / 2.0;
        }
    }
    Ok((targets, noise))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefParams {
    /// One lengthscale per input dimension, shared by both arms.
    pub lengthscales: Vec<f64>,
    pub outputscale: f64,
    pub constant_mean: f64,
}

#[derive(Serialize, Deserialize)]
struct PreferenceRecord {
    domain: Domain,
    alpha_eps: f64,
    duels: Vec<DuelRecord>,
    params: PrefParams,
}

/// Dirichlet-transform GP classifier over duels.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PreferenceRecord", into = "PreferenceRecord")]
pub struct PreferenceGp {
    pub domain: Domain,
    pub alpha_eps: f64,
    /// Original (unmirrored) duels.
    pub duels: Vec<DuelRecord>,
    pub params: PrefParams,
    inner: Conditioned,
    linv: DMatrix<f64>,
}

impl From<PreferenceGp> for PreferenceRecord {
    fn from(g: PreferenceGp) -> Self {
        Self { domain: g.domain, alpha_eps: g.alpha_eps, duels: g.duels, params: g.params }
    }
}

impl TryFrom<PreferenceRecord> for PreferenceGp {
    type Error = Error;

    fn try_from(r: PreferenceRecord) -> Result<Self> {
        PreferenceGp::condition(r.domain, r.alpha_eps, r.duels, r.params)
    }
}

fn joint_unit(domain: &Domain, duels: &[DuelRecord]) -> DMatrix<f64> {
    let d = domain.dim();
    let mut z = DMatrix::zeros(duels.len(), 2 * d);
    for (i, duel) in duels.iter().enumerate() {
        for j in 0..d {
            z[(i, j)] = (duel.x1[j] - domain.lower[j]) / domain.width(j);
            z[(i, d + j)] = (duel.x2[j] - domain.lower[j]) / domain.width(j);
        }
    }
    z
}

fn pref_spec(d: usize, noise: DVector<f64>, targets: &DVector<f64>) -> Spec {
    let lo = targets.min();
    let hi = targets.max();
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
    Spec {
        tie: (0..d).chain(0..d).collect(),
        n_ls: d,
        noise: NoiseModel::Fixed(noise),
        mean: MeanModel::Constant,
        mean_bounds: (lo, hi),
    }
}

/// Class-1 targets and noise for the mirrored duel set.
fn channel_one(augmented: &[DuelRecord], alpha_eps: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let labels: Vec<u8> = augmented.iter().map(|d| d.y_pref).collect();
    let (t, s) = dirichlet_transform(&labels, alpha_eps)?;
    Ok((t.row(1).transpose(), s.row(1).transpose()))
}

fn validate_duels(domain: &Domain, duels: &[DuelRecord]) -> Result<()> {
    if duels.is_empty() {
        return Err(Error::input("need at least one duel"));
    }
    for d in duels {
        Error::check_dim(domain.dim(), d.x1.len())?;
        Error::check_dim(domain.dim(), d.x2.len())?;
        if d.y_pref > 1 {
            return Err(Error::input(format!("y_pref must be 0 or 1, got {}", d.y_pref)));
        }
        if !domain.contains(&d.x1) || !domain.contains(&d.x2) {
            return Err(Error::input("duel arm lies outside the domain"));
        }
    }
    if duels.iter().all(|d| d.x1 == d.x2) {
        return Err(Error::Degenerate(format!(
            "all {} duels compare a point with itself; preferences carry no information",
            duels.len()
        )));
    }
    Ok(())
}

/// Fits the preference GP on the mirrored duel set.
pub fn fit_preference_gp(duels: &[DuelRecord], domain: &Domain, alpha_eps: f64, seed: u64) -> Result<PreferenceGp> {
    fit_preference_gp_with(duels, domain, alpha_eps, seed, None, PREF_RESTARTS)
}

pub fn fit_preference_gp_with(
    duels: &[DuelRecord],
    domain: &Domain,
    alpha_eps: f64,
    seed: u64,
    warm: Option<&PrefParams>,
    restarts: usize,
) -> Result<PreferenceGp> {
    domain.validate()?;
    validate_duels(domain, duels)?;
    let d = domain.dim();
    let mut rng = crate::rng::rng(seed);

    let fit_duels: Vec<DuelRecord> = if duels.len() > FIT_SUBSAMPLE {
        let mut idx = sample_indices(&mut rng, duels.len(), FIT_SUBSAMPLE).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| duels[i].clone()).collect()
    } else {
        duels.to_vec()
    };
    let aug = augment_duels(&fit_duels);
    let (t, s) = channel_one(&aug, alpha_eps)?;
    let spec = pref_spec(d, s, &t);
    let init = match warm {
        Some(p) => Hyper {
            lengthscales: p.lengthscales.clone(),
            outputscale: p.outputscale,
            noise: 0.0,
            mean: p.constant_mean,
        },
        None => {
            let mean = t.mean();
            let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t.len() as f64;
            Hyper { lengthscales: vec![0.3; d], outputscale: var.max(0.1), noise: 0.0, mean }
        }
    };
    let z = joint_unit(domain, &aug);
    let h = regression::fit(&spec, &z, &t, &init, &FitOptions { restarts, max_iter: 60 }, &mut rng);
    let params = PrefParams { lengthscales: h.lengthscales, outputscale: h.outputscale, constant_mean: h.mean };
    PreferenceGp::condition(domain.clone(), alpha_eps, duels.to_vec(), params)
}

impl PreferenceGp {
    pub fn condition(domain: Domain, alpha_eps: f64, duels: Vec<DuelRecord>, params: PrefParams) -> Result<Self> {
        domain.validate()?;
        validate_duels(&domain, &duels)?;
        Error::check_dim(domain.dim(), params.lengthscales.len())?;
        let aug = augment_duels(&duels);
        let (t, s) = channel_one(&aug, alpha_eps)?;
        let spec = pref_spec(domain.dim(), s, &t);
        let hyper = Hyper {
            lengthscales: params.lengthscales.clone(),
            outputscale: params.outputscale,
            noise: 0.0,
            mean: params.constant_mean,
        };
        let inner = Conditioned::new(&spec, joint_unit(&domain, &aug), &t, hyper, "preference gp")?;
        let n = inner.len();
        let linv = inner.factor.half_solve(&DMatrix::identity(n, n));
        Ok(Self { domain, alpha_eps, duels, params, inner, linv })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Mirrored duel inputs in joint unit coordinates, one row per node.
    pub fn nodes(&self) -> &DMatrix<f64> {
        &self.inner.z
    }

    /// Mean and variance of the latent score difference `f1 − f0` at each row
    /// of `pairs` (joint unit coordinates).
    fn diff_moments(&self, pairs: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let m = pairs.nrows();
        let mut q = DMatrix::zeros(2 * m, 2 * d);
        for i in 0..m {
            for j in 0..d {
                q[(i, j)] = pairs[(i, j)];
                q[(i, d + j)] = pairs[(i, d + j)];
                q[(m + i, j)] = pairs[(i, d + j)];
                q[(m + i, d + j)] = pairs[(i, j)];
            }
        }
        let v = self.inner.hyper.outputscale;
        let kq = gram(&q, &self.inner.z, &self.inner.ls, v);
        let means = &kq * &self.inner.alpha;
        let w = &self.linv * kq.transpose();
        let var = |c: usize| (v - w.column(c).norm_squared()).max(0.0);
        let mean_diff = (0..m).map(|i| means[i] - means[m + i]).collect();
        let var_diff = (0..m).map(|i| var(i) + var(m + i)).collect();
        (mean_diff, var_diff)
    }

    fn probabilities(&self, pairs: &DMatrix<f64>, zs: &[f64]) -> Vec<(f64, f64)> {
        const CHUNK: usize = 512;
        let mut out = Vec::with_capacity(pairs.nrows());
        let mut start = 0;
        while start < pairs.nrows() {
            let len = CHUNK.min(pairs.nrows() - start);
            let block = pairs.rows(start, len).into_owned();
            let (mu, var) = self.diff_moments(&block);
            for (m, v) in mu.into_iter().zip(var) {
                out.push(softmax_moments(m, v.sqrt(), zs));
            }
            start += len;
        }
        out
    }

    /// Win probability moments for many raw-coordinate pairs, sharing one set
    /// of Monte-Carlo draws across all of them.
    pub fn predict_preferences(&self, pairs: &[(Vec<f64>, Vec<f64>)], n_mc: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
        if n_mc == 0 {
            return Err(Error::input("n_mc must be at least 1"));
        }
        let d = self.dim();
        let mut q = DMatrix::zeros(pairs.len(), 2 * d);
        for (i, (a, b)) in pairs.iter().enumerate() {
            Error::check_dim(d, a.len())?;
            Error::check_dim(d, b.len())?;
            for j in 0..d {
                q[(i, j)] = (a[j] - self.domain.lower[j]) / self.domain.width(j);
                q[(i, d + j)] = (b[j] - self.domain.lower[j]) / self.domain.width(j);
            }
        }
        Ok(self.probabilities(&q, &antithetic_normals(n_mc, seed)))
    }
}

/// Antithetic standard-normal draws; an odd count gets a zero midpoint.
fn antithetic_normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = crate::rng::rng(seed);
    let mut zs = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        let z: f64 = rng.sample(StandardNormal);
        zs.push(z);
        zs.push(-z);
    }
    if n % 2 == 1 {
        zs.push(0.0);
    }
    zs
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `(E[p], E[p(1−p)])` for `p = sigmoid(m + s·z)` over the given draws.
fn softmax_moments(m: f64, s: f64, zs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut var = 0.0;
    for &z in zs {
        let p = sigmoid(m + s * z);
        mean += p;
        var += p * (1.0 - p);
    }
    let n = zs.len() as f64;
    (mean / n, var / n)
}

/// Probability that `x1` beats `x2`: mean and `E[p(1−p)]` of the two-class
/// softmax over joint latent draws.
pub fn predict_preference(g: &PreferenceGp, x1: &[f64], x2: &[f64], n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    Ok(g.predict_preferences(&[(x1.to_vec(), x2.to_vec())], n_mc, seed)?[0])
}

/// Monte-Carlo soft Copeland score: average win probability of `x` against
/// uniform opponents.
pub fn mc_soft_copeland(g: &PreferenceGp, x: &[f64], n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::input("n_samples must be at least 1"));
    }
    let mut rng = crate::rng::rng(crate::rng::derive(seed, &[crate::rng::tag("opponents")]));
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..n_samples)
        .map(|_| {
            let u: Vec<f64> = (0..g.dim()).map(|j| rng.random_range(g.domain.lower[j]..=g.domain.upper[j])).collect();
            (x.to_vec(), u)
        })
        .collect();
    let probs = g.predict_preferences(&pairs, DEFAULT_N_MC, seed)?;
    Ok(probs.iter().map(|p| p.0).sum::<f64>() / n_samples as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BqParams {
    pub lengthscale: f64,
    pub outputscale: f64,
    pub noise: f64,
}

/// Closed-form soft Copeland belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftCopeland {
    pub domain: Domain,
    pub params: BqParams,
    /// First-arm halves of the quadrature nodes, unit coordinates.
    pub centers: Vec<Vec<f64>>,
    /// Node weights with the opponent half already integrated over the box.
    pub omega: Vec<f64>,
    pub omega_var: Vec<f64>,
    /// `v·(2πℓ²)^{d_joint/2}`.
    pub v_prime: f64,
    pub v_x: f64,
    /// Set when `v′·1ᵀω` was not positive and the normalizer was floored.
    pub normalizer_clamped: bool,
}

pub fn build_soft_copeland(g: &PreferenceGp, n_mc: usize, seed: u64) -> Result<SoftCopeland> {
    build_soft_copeland_with(g, n_mc, seed, None, PREF_RESTARTS)
}

/// Gaussian mass of `N(c, ℓ²)` inside `[0, 1]`.
fn box_mass(c: f64, l: f64) -> f64 {
    let cdf = |z: f64| 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    cdf((1.0 - c) / l) - cdf(-c / l)
}

pub fn build_soft_copeland_with(
    g: &PreferenceGp,
    n_mc: usize,
    seed: u64,
    warm: Option<&BqParams>,
    restarts: usize,
) -> Result<SoftCopeland> {
    if n_mc == 0 {
        return Err(Error::input("n_mc must be at least 1"));
    }
    let d = g.dim();
    let nodes = g.nodes().clone();
    let n = nodes.nrows();
    let probs = g.probabilities(&nodes, &antithetic_normals(n_mc, seed));
    let y_bq = DVector::from_iterator(n, probs.iter().map(|p| p.0));
    let y_var = DVector::from_iterator(n, probs.iter().map(|p| p.0 * (1.0 - p.0)));

    let spec = Spec { tie: vec![0; 2 * d], n_ls: 1, noise: NoiseModel::Learned, mean: MeanModel::Zero, mean_bounds: (0.0, 0.0) };
    let init = match warm {
        Some(p) => Hyper { lengthscales: vec![p.lengthscale], outputscale: p.outputscale, noise: p.noise, mean: 0.0 },
        None => Hyper { lengthscales: vec![0.3], outputscale: 0.3, noise: 1e-2, mean: 0.0 },
    };
    let mut rng = crate::rng::rng(crate::rng::derive(seed, &[crate::rng::tag("bq")]));
    let (fz, fy) = if n > 2 * FIT_SUBSAMPLE {
        let mut idx = sample_indices(&mut rng, n, 2 * FIT_SUBSAMPLE).into_vec();
        idx.sort_unstable();
        (
            DMatrix::from_fn(idx.len(), 2 * d, |i, j| nodes[(idx[i], j)]),
            DVector::from_iterator(idx.len(), idx.iter().map(|&i| y_bq[i])),
        )
    } else {
        (nodes.clone(), y_bq.clone())
    };
    let h = regression::fit(&spec, &fz, &fy, &init, &FitOptions { restarts, max_iter: 60 }, &mut rng);
    let mean_gp = Conditioned::new(&spec, nodes.clone(), &y_bq, h.clone(), "soft copeland")?;
    let omega_var = mean_gp.factor.solve_vec(&y_var);

    let l = h.lengthscales[0];
    let v_prime = h.outputscale * (2.0 * std::f64::consts::PI * l * l).powf(d as f64);
    // The opponent is uniform on the unit box, so each node's second half is
    // integrated against the box rather than the whole line.
    let half_mass = |i: usize, offset: usize| -> f64 {
        (0..d).map(|j| box_mass(nodes[(i, offset + j)], l)).product()
    };
    let opp: Vec<f64> = (0..n).map(|i| half_mass(i, d)).collect();
    let omega: Vec<f64> = (0..n).map(|i| mean_gp.alpha[i] * opp[i]).collect();
    let omega_var: Vec<f64> = (0..n).map(|i| omega_var[i] * opp[i]).collect();
    let total = v_prime * (0..n).map(|i| omega[i] * half_mass(i, 0)).sum::<f64>();
    let normalizer_clamped = !(total > VX_FLOOR);
    if normalizer_clamped {
        tracing::warn!(total, "soft copeland normalizer not positive; clamping");
    }
    Ok(SoftCopeland {
        domain: g.domain.clone(),
        params: BqParams { lengthscale: l, outputscale: h.outputscale, noise: h.noise },
        centers: (0..n).map(|i| (0..d).map(|j| nodes[(i, j)]).collect()).collect(),
        omega,
        omega_var,
        v_prime,
        v_x: total.max(VX_FLOOR).sqrt(),
        normalizer_clamped,
    })
}

impl SoftCopeland {
    fn weighted_density(&self, x: &[f64], weights: &[f64]) -> f64 {
        let u = self.domain.to_unit(x);
        let l2 = self.params.lengthscale * self.params.lengthscale;
        let d = u.len() as f64;
        let norm = (2.0 * std::f64::consts::PI * l2).powf(-d / 2.0);
        let mut s = 0.0;
        for (c, w) in self.centers.iter().zip(weights) {
            let r2: f64 = c.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
            s += w * (-0.5 * r2 / l2).exp();
        }
        self.v_prime / self.v_x * norm * s
    }

    pub fn copeland_mean(&self, x: &[f64]) -> f64 {
        self.weighted_density(x, &self.omega)
    }

    pub fn copeland_var(&self, x: &[f64]) -> f64 {
        self.weighted_density(x, &self.omega_var).max(0.0)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
}

/// Draws `count` points proportionally to `max(copeland_mean, 0)` over a fixed
/// low-discrepancy grid. Falls back to uniform weights when nothing is positive.
pub fn sample_from_belief(sc: &SoftCopeland, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let grid: Vec<Vec<f64>> = Sobol::new(sc.dim())?
        .points(BELIEF_GRID)
        .into_iter()
        .map(|u| sc.domain.from_unit(&u))
        .collect();
    let mut weights: Vec<f64> = grid.iter().map(|x| sc.copeland_mean(x).max(0.0)).collect();
    if !weights.iter().any(|w| *w > 0.0) {
        tracing::warn!("belief is nonpositive everywhere; sampling uniformly");
        weights.iter_mut().for_each(|w| *w = 1.0);
    }
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Numerical {
        context: "belief sampling",
        detail: e.to_string(),
    })?;
    let mut rng = crate::rng::rng(seed);
    Ok((0..count).map(|_| grid[dist.sample(&mut rng)].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augmentation_mirrors_labels() {
        assert!(augment_duels(&[]).is_empty());
        let d = DuelRecord { x1: vec![0.1], x2: vec![0.9], y_pref: 1 };
        let aug = augment_duels(&[d.clone()]);
        assert_eq!(aug, vec![d, DuelRecord { x1: vec![0.9], x2: vec![0.1], y_pref: 0 }]);
    }

    #[test]
    fn dirichlet_values() {
        let (t, s) = dirichlet_transform(&[1, 0], 0.01).unwrap();
        assert!((s[(1, 0)] - (1.0f64 / 1.01 + 1.0).ln()).abs() < 1e-15);
        assert!((s[(1, 0)] - 0.6881).abs() < 1e-4);
        assert!((t[(1, 0)] - (1.01f64.ln() - s[(1, 0)] / 2.0)).abs() < 1e-15);
        // Flipping the label swaps the channels.
        assert_eq!(t[(0, 1)], t[(1, 0)]);
        assert_eq!(t[(1, 1)], t[(0, 0)]);
        assert!(dirichlet_transform(&[1], 0.0).is_err());
        let (t, _) = dirichlet_transform(&[1], 1e9).unwrap();
        assert!((t[(0, 0)] - t[(1, 0)]).abs() < 1e-8);
    }

    #[test]
    fn antithetic_pairs_cancel() {
        let zs = antithetic_normals(7, 3);
        assert_eq!(zs.len(), 7);
        assert!(zs.iter().sum::<f64>().abs() < 1e-12);
        let (m, _) = softmax_moments(0.0, 2.0, &zs);
        assert_eq!(m, 0.5);
    }

    #[test]
    fn identical_duels_are_degenerate() {
        let d = DuelRecord { x1: vec![0.5], x2: vec![0.5], y_pref: 1 };
        let err = fit_preference_gp(&[d.clone(), d], &Domain::unit(1), 0.01, 0).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }
}
