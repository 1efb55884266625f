//! Shapley explanations of the surrogate and acquisition values.
//!
//! Coalition values come from a kernel-ridge conditional-mean estimator on the
//! reference set `R = X_train ∪ {x}`: the posterior mean and covariance at `R`
//! are projected onto the query through a kernel that only sees the
//! coordinates in the coalition. With every feature present the projection is
//! (up to the ridge term) the indicator of `x` itself, so the full coalition
//! recovers the posterior at `x`; a feature whose lengthscale is effectively
//! infinite never changes any coalition's value.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gp::{Domain, GpModel};
use crate::linalg::cholesky_jitter;
use crate::pref::SoftCopeland;

pub const MAX_EXACT_DIM: usize = 16;
pub const HEATMAP_SIZE: usize = 64;
pub const DEFAULT_LAMBDA_PER_POINT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Af,
    Mean,
    Std,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyAttribution {
    pub base: f64,
    pub phi: Vec<f64>,
    pub target: Target,
}

impl ShapleyAttribution {
    pub fn total(&self) -> f64 {
        self.base + self.phi.iter().sum::<f64>()
    }
}

/// Cooperative game over the input features at a fixed query point.
#[derive(Debug, Clone)]
pub struct CoalitionGame {
    dim: usize,
    /// Reference points (unit coordinates), query last.
    r: DMatrix<f64>,
    lengthscales: Vec<f64>,
    outputscale: f64,
    prior_mean: f64,
    f_tilde: DVector<f64>,
    k_tilde: DMatrix<f64>,
    lambda: f64,
    beta_sqrt: f64,
}

impl CoalitionGame {
    /// `lambda_s` defaults to `1e-6·|R|`.
    pub fn new(gp: &GpModel, x: &[f64], beta_sqrt: f64, lambda_s: Option<f64>) -> Result<Self> {
        Error::check_dim(gp.dim(), x.len())?;
        let mut refs = gp.data.x.clone();
        refs.push(x.to_vec());
        let n = refs.len();
        let lambda = lambda_s.unwrap_or(DEFAULT_LAMBDA_PER_POINT * n as f64);
        if !(lambda > 0.0) {
            return Err(Error::input("lambda_s must be positive"));
        }
        let d = gp.dim();
        let r = DMatrix::from_fn(n, d, |i, j| (refs[i][j] - gp.domain.lower[j]) / gp.domain.width(j));
        Ok(Self {
            dim: d,
            r,
            lengthscales: gp.params.lengthscales.clone(),
            outputscale: gp.params.outputscale,
            prior_mean: gp.y_mean + gp.y_std * gp.params.constant_mean,
            f_tilde: gp.posterior_means(&refs)?,
            k_tilde: gp.posterior_cov(&refs, &refs)?,
            lambda,
            beta_sqrt,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Mean term and (clamped) variance term of the coalition `mask`.
    pub fn terms(&self, mask: u32) -> (f64, f64) {
        let n = self.r.nrows();
        let q = n - 1;
        let dims: Vec<usize> = (0..self.dim).filter(|j| mask >> j & 1 == 1).collect();
        let mut k = DMatrix::from_fn(n, n, |i, l| {
            let s: f64 = dims
                .iter()
                .map(|&j| ((self.r[(i, j)] - self.r[(l, j)]) / self.lengthscales[j]).powi(2))
                .sum();
            self.outputscale * (-0.5 * s).exp()
        });
        let kx = k.column(q).into_owned();
        for i in 0..n {
            k[(i, i)] += self.lambda;
        }
        let b = match cholesky_jitter(&k, "coalition value") {
            Ok(f) => f.solve_vec(&kx),
            Err(_) => DVector::from_element(n, 1.0 / n as f64),
        };
        let mean = self.prior_mean + b.dot(&self.f_tilde.add_scalar(-self.prior_mean));
        let var = (b.transpose() * &self.k_tilde * &b)[(0, 0)].max(0.0);
        (mean, var)
    }

    pub fn value(&self, mask: u32, target: Target) -> f64 {
        let (m, v) = self.terms(mask);
        match target {
            Target::Af => m + self.beta_sqrt * v.sqrt(),
            Target::Mean => m,
            Target::Std => v.sqrt(),
        }
    }

    /// Exact Shapley values for all three targets from one enumeration.
    pub fn shapley_all(&self) -> Result<[ShapleyAttribution; 3]> {
        let d = self.dim;
        if d > MAX_EXACT_DIM {
            return Err(Error::Unsupported(format!(
                "exact Shapley enumeration supports at most {MAX_EXACT_DIM} features, got {d}"
            )));
        }
        let terms: Vec<(f64, f64)> = (0..1u32 << d).map(|m| self.terms(m)).collect();
        let value = |m: usize, t: Target| {
            let (mean, var) = terms[m];
            match t {
                Target::Af => mean + self.beta_sqrt * var.sqrt(),
                Target::Mean => mean,
                Target::Std => var.sqrt(),
            }
        };
        let weights = coalition_weights(d);
        let attr = |t: Target| {
            let mut phi = vec![0.0; d];
            for (j, p) in phi.iter_mut().enumerate() {
                let bit = 1usize << j;
                for m in 0..(1usize << d) {
                    if m & bit == 0 {
                        *p += weights[m.count_ones() as usize] * (value(m | bit, t) - value(m, t));
                    }
                }
            }
            ShapleyAttribution { base: value(0, t), phi, target: t }
        };
        Ok([attr(Target::Af), attr(Target::Mean), attr(Target::Std)])
    }
}

/// `c_s = 1/d · C(d−1, s)⁻¹` for `s = 0..d−1`.
pub fn coalition_weights(d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(d);
    let mut binom = 1.0f64;
    for s in 0..d {
        out.push(1.0 / (d as f64 * binom));
        binom = binom * (d - 1 - s) as f64 / (s + 1) as f64;
    }
    out
}

fn mask_of(subset: &[usize], d: usize) -> Result<u32> {
    let mut mask = 0u32;
    for &j in subset {
        if j >= d {
            return Err(Error::input(format!("feature index {j} out of range for dimension {d}")));
        }
        mask |= 1 << j;
    }
    Ok(mask)
}

/// Value of coalition `subset` (0-based feature indices) for the UCB target.
pub fn value_function(gp: &GpModel, x: &[f64], subset: &[usize], beta_sqrt: f64, lambda_s: Option<f64>) -> Result<f64> {
    if gp.dim() > 31 {
        return Err(Error::Unsupported("coalitions support at most 31 features".into()));
    }
    let game = CoalitionGame::new(gp, x, beta_sqrt, lambda_s)?;
    Ok(game.value(mask_of(subset, gp.dim())?, Target::Af))
}

pub fn shapley_values(gp: &GpModel, x: &[f64], beta_sqrt: f64, target: Target, lambda_s: Option<f64>) -> Result<ShapleyAttribution> {
    let all = CoalitionGame::new(gp, x, beta_sqrt, lambda_s)?.shapley_all()?;
    Ok(all.into_iter().find(|a| a.target == target).expect("all targets present"))
}

/// The two features with the largest mean |φ| over both candidates; ties go to
/// the lower index. 0-based.
pub fn top2_dims(a1: &ShapleyAttribution, a2: &ShapleyAttribution) -> Result<(usize, usize)> {
    Error::check_dim(a1.phi.len(), a2.phi.len())?;
    let d = a1.phi.len();
    if d < 2 {
        return Err(Error::input("top-2 selection needs at least two features"));
    }
    let score: Vec<f64> = (0..d).map(|j| 0.5 * (a1.phi[j].abs() + a2.phi[j].abs())).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let (i, j) = (order[0], order[1]);
    Ok((i.min(j), i.max(j)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Bounding box of the three points on `dims`, doubled about its center and
/// clipped to the domain. Axes with zero extent are padded by 5% of the
/// domain width instead.
pub fn view_rectangle(x1: &[f64], x2: &[f64], x_best: &[f64], dims: (usize, usize), domain: &Domain) -> Result<Rect> {
    for p in [x1, x2, x_best] {
        Error::check_dim(domain.dim(), p.len())?;
    }
    let mut lo = Vec::with_capacity(2);
    let mut hi = Vec::with_capacity(2);
    for j in [dims.0, dims.1] {
        if j >= domain.dim() {
            return Err(Error::input(format!("dimension {j} out of range")));
        }
        let a = x1[j].min(x2[j]).min(x_best[j]);
        let b = x1[j].max(x2[j]).max(x_best[j]);
        let (l, h) = if b > a {
            let c = 0.5 * (a + b);
            (c - (b - a), c + (b - a))
        } else {
            let pad = 0.05 * domain.width(j);
            (a - pad, b + pad)
        };
        lo.push(l.max(domain.lower[j]));
        hi.push(h.min(domain.upper[j]));
    }
    Ok(Rect { lo, hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub prob_mean: f64,
    pub prob_var: f64,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that the chosen `x1` really is better than `x2`:
/// Monte-Carlo mean and variance of `Φ((f(x1) − f(x2))/√λ)` under the
/// posterior, where `λ` is the noise variance in raw units.
pub fn selection_accuracy(gp_after: &GpModel, x1: &[f64], x2: &[f64], n_mc: usize, seed: u64) -> Result<Feedback> {
    Error::check_dim(gp_after.dim(), x1.len())?;
    Error::check_dim(gp_after.dim(), x2.len())?;
    if n_mc == 0 {
        return Err(Error::input("n_mc must be at least 1"));
    }
    if x1 == x2 {
        return Ok(Feedback { prob_mean: 0.5, prob_var: 0.0 });
    }
    let pts = [x1.to_vec(), x2.to_vec()];
    let mean = gp_after.posterior_means(&pts)?;
    let cov = gp_after.posterior_cov(&pts, &pts)?;
    let mu = mean[0] - mean[1];
    let sd = (cov[(0, 0)] + cov[(1, 1)] - 2.0 * cov[(0, 1)]).max(0.0).sqrt();
    let noise_sd = (gp_after.params.noise * gp_after.y_std * gp_after.y_std).sqrt();
    let mut rng = crate::rng::rng(seed);
    let vals: Vec<f64> = (0..n_mc)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            std_normal_cdf((mu + sd * z) / noise_sd)
        })
        .collect();
    let m = vals.iter().sum::<f64>() / n_mc as f64;
    let v = vals.iter().map(|p| (p - m).powi(2)).sum::<f64>() / n_mc as f64;
    Ok(Feedback { prob_mean: m, prob_var: v })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateExplanation {
    pub x: Vec<f64>,
    pub af_shapley: ShapleyAttribution,
    pub mean_shapley: ShapleyAttribution,
    pub std_shapley: ShapleyAttribution,
}

/// Row-major 64×64 grids; row index runs along `top2[1]`, column along `top2[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmaps {
    pub gp_mean: Vec<Vec<f64>>,
    pub gp_std: Vec<Vec<f64>>,
    pub belief: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub candidates: Vec<CandidateExplanation>,
    pub top2: [usize; 2],
    pub rect: Rect,
    pub heatmaps: Heatmaps,
    pub incumbent: Vec<f64>,
    pub feedback: Option<Feedback>,
}

fn explain_candidate(gp: &GpModel, x: &[f64], beta_sqrt: f64) -> Result<CandidateExplanation> {
    let [af, mean, std] = CoalitionGame::new(gp, x, beta_sqrt, None)?.shapley_all()?;
    Ok(CandidateExplanation { x: x.to_vec(), af_shapley: af, mean_shapley: mean, std_shapley: std })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Assembles the explanation shown alongside a candidate pair.
pub fn build_bundle(
    gp: &GpModel,
    sc: &SoftCopeland,
    x1: &[f64],
    x2: &[f64],
    incumbent: &[f64],
    beta_sqrt: f64,
    feedback: Option<Feedback>,
) -> Result<ExplanationBundle> {
    let c1 = explain_candidate(gp, x1, beta_sqrt)?;
    let c2 = explain_candidate(gp, x2, beta_sqrt)?;
    let d = gp.dim();
    let (i, j) = if d >= 2 { top2_dims(&c1.af_shapley, &c2.af_shapley)? } else { (0, 0) };
    let rect = view_rectangle(x1, x2, incumbent, (i, j), &gp.domain)?;

    let mid: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| 0.5 * (a + b)).collect();
    let cols = linspace(rect.lo[0], rect.hi[0], HEATMAP_SIZE);
    let rows = linspace(rect.lo[1], rect.hi[1], HEATMAP_SIZE);
    let mut gp_mean = Vec::with_capacity(HEATMAP_SIZE);
    let mut gp_std = Vec::with_capacity(HEATMAP_SIZE);
    let mut belief = Vec::with_capacity(HEATMAP_SIZE);
    for &rv in &rows {
        let mut m_row = Vec::with_capacity(HEATMAP_SIZE);
        let mut s_row = Vec::with_capacity(HEATMAP_SIZE);
        let mut b_row = Vec::with_capacity(HEATMAP_SIZE);
        for &cv in &cols {
            let mut p = mid.clone();
            p[j] = rv;
            p[i] = cv;
            let (m, v) = gp.posterior_unchecked(&p);
            m_row.push(m);
            s_row.push(v.sqrt());
            b_row.push(sc.copeland_mean(&p));
        }
        gp_mean.push(m_row);
        gp_std.push(s_row);
        belief.push(b_row);
    }
    Ok(ExplanationBundle {
        candidates: vec![c1, c2],
        top2: [i, j],
        rect,
        heatmaps: Heatmaps { gp_mean, gp_std, belief },
        incumbent: incumbent.to_vec(),
        feedback,
    })
}
