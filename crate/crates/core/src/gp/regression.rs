//! Shared exact-GP regression machinery.
//!
//! Works on inputs that are already mapped into model space. A tie map assigns
//! each input coordinate to one lengthscale parameter, which lets the same code
//! fit ARD kernels, isotropic kernels and kernels whose lengthscales are shared
//! between the two halves of a joint input.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{cholesky_jitter, Factor};
use crate::optim::lbfgs_box;

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 10.0);
pub const OUTPUTSCALE_BOUNDS: (f64, f64) = (1e-4, 1e3);
pub const NOISE_BOUNDS: (f64, f64) = (1e-6, 10.0);

#[derive(Debug, Clone)]
pub enum NoiseModel {
    Learned,
    Fixed(DVector<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanModel {
    Zero,
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyper {
    pub lengthscales: Vec<f64>,
    pub outputscale: f64,
    /// Homoscedastic noise; ignored when the noise model is fixed.
    pub noise: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct Spec {
    pub tie: Vec<usize>,
    pub n_ls: usize,
    pub noise: NoiseModel,
    pub mean: MeanModel,
    pub mean_bounds: (f64, f64),
}

impl Spec {
    pub fn ard(dim: usize, noise: NoiseModel, mean: MeanModel, mean_bounds: (f64, f64)) -> Self {
        Self { tie: (0..dim).collect(), n_ls: dim, noise, mean, mean_bounds }
    }

    fn n_params(&self) -> usize {
        self.n_ls
            + 1
            + usize::from(matches!(self.noise, NoiseModel::Learned))
            + usize::from(self.mean == MeanModel::Constant)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![LENGTHSCALE_BOUNDS.0.ln(); self.n_ls];
        let mut hi = vec![LENGTHSCALE_BOUNDS.1.ln(); self.n_ls];
        lo.push(OUTPUTSCALE_BOUNDS.0.ln());
        hi.push(OUTPUTSCALE_BOUNDS.1.ln());
        if matches!(self.noise, NoiseModel::Learned) {
            lo.push(NOISE_BOUNDS.0.ln());
            hi.push(NOISE_BOUNDS.1.ln());
        }
        if self.mean == MeanModel::Constant {
            lo.push(self.mean_bounds.0);
            hi.push(self.mean_bounds.1);
        }
        (lo, hi)
    }

    pub fn encode(&self, h: &Hyper) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        let mut th: Vec<f64> = h.lengthscales.iter().map(|l| l.ln()).collect();
        th.push(h.outputscale.ln());
        if matches!(self.noise, NoiseModel::Learned) {
            th.push(h.noise.ln());
        }
        if self.mean == MeanModel::Constant {
            th.push(h.mean);
        }
        th.iter().zip(lo.iter().zip(&hi)).map(|(v, (l, u))| v.clamp(*l, *u)).collect()
    }

    pub fn decode(&self, th: &[f64]) -> Hyper {
        let mut i = self.n_ls;
        let lengthscales = th[..i].iter().map(|v| v.exp()).collect();
        let outputscale = th[i].exp();
        i += 1;
        let noise = if matches!(self.noise, NoiseModel::Learned) {
            i += 1;
            th[i - 1].exp()
        } else {
            0.0
        };
        let mean = if self.mean == MeanModel::Constant { th[i] } else { 0.0 };
        Hyper { lengthscales, outputscale, noise, mean }
    }

    /// Per-input-coordinate lengthscales.
    pub fn expand(&self, h: &Hyper) -> Vec<f64> {
        self.tie.iter().map(|&k| h.lengthscales[k]).collect()
    }

    fn noise_diag(&self, h: &Hyper, n: usize) -> DVector<f64> {
        match &self.noise {
            NoiseModel::Learned => DVector::from_element(n, h.noise),
            NoiseModel::Fixed(v) => v.clone(),
        }
    }
}

/// `v·exp(−½ Σ ((a_i − b_i)/ℓ_i)²)` between the rows of `a` and `b`.
pub fn gram(a: &DMatrix<f64>, b: &DMatrix<f64>, ls: &[f64], outputscale: f64) -> DMatrix<f64> {
    let inv: Vec<f64> = ls.iter().map(|l| 1.0 / l).collect();
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let mut s = 0.0;
        for (k, w) in inv.iter().enumerate() {
            let d = (a[(i, k)] - b[(j, k)]) * w;
            s += d * d;
        }
        outputscale * (-0.5 * s).exp()
    })
}

pub fn gram_row(x: &[f64], b: &DMatrix<f64>, ls: &[f64], outputscale: f64) -> DVector<f64> {
    DVector::from_fn(b.nrows(), |j, _| {
        let mut s = 0.0;
        for (k, l) in ls.iter().enumerate() {
            let d = (x[k] - b[(j, k)]) / l;
            s += d * d;
        }
        outputscale * (-0.5 * s).exp()
    })
}

/// Negative log marginal likelihood and its gradient in the encoded space.
fn objective(spec: &Spec, z: &DMatrix<f64>, t: &DVector<f64>, th: &[f64]) -> Option<(f64, Vec<f64>)> {
    let h = spec.decode(th);
    let n = z.nrows();
    let ls = spec.expand(&h);
    let k_rbf = gram(z, z, &ls, h.outputscale);
    let mut k = k_rbf.clone();
    let noise = spec.noise_diag(&h, n);
    for i in 0..n {
        k[(i, i)] += noise[i];
    }
    let factor = cholesky_jitter(&k, "marginal likelihood").ok()?;
    let r = t.map(|v| v - h.mean);
    let alpha = factor.solve_vec(&r);
    let nll = 0.5 * r.dot(&alpha) + 0.5 * factor.log_det() + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !nll.is_finite() {
        return None;
    }

    // W = ααᵀ − K⁻¹; dL/dθ = ½ tr(W ∂K/∂θ) = ½ Σ W ⊙ ∂K/∂θ.
    let mut w = factor.inverse();
    w.iter_mut().for_each(|v| *v = -*v);
    w.ger(1.0, &alpha, &alpha, 1.0);
    let wk: DMatrix<f64> = w.component_mul(&k_rbf);

    let mut grad = vec![0.0; spec.n_params()];
    for i in 0..n {
        for j in 0..i {
            let c = wk[(i, j)];
            if c == 0.0 {
                continue;
            }
            for (dim, &p) in spec.tie.iter().enumerate() {
                let d = (z[(i, dim)] - z[(j, dim)]) / ls[dim];
                // Off-diagonal entries appear twice in the symmetric sum.
                grad[p] += c * d * d;
            }
        }
    }
    let mut idx = spec.n_ls;
    grad[idx] = 0.5 * wk.sum();
    idx += 1;
    if matches!(spec.noise, NoiseModel::Learned) {
        grad[idx] = 0.5 * h.noise * w.trace();
        idx += 1;
    }
    if spec.mean == MeanModel::Constant {
        grad[idx] = alpha.sum();
    }
    // Gradient of the log likelihood above; negate for minimization.
    grad.iter_mut().for_each(|g| *g = -*g);
    Some((nll, grad))
}

pub struct FitOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

/// Maximizes the marginal likelihood from `init` followed by random restarts.
pub fn fit(
    spec: &Spec,
    z: &DMatrix<f64>,
    t: &DVector<f64>,
    init: &Hyper,
    opts: &FitOptions,
    rng: &mut ChaCha8Rng,
) -> Hyper {
    let (lo, hi) = spec.bounds();
    let mut starts = vec![spec.encode(init)];
    for _ in 1..opts.restarts.max(1) {
        let mut th = Vec::with_capacity(lo.len());
        for _ in 0..spec.n_ls {
            th.push(rng.random_range((0.05f64).ln()..(2.0f64).ln()));
        }
        th.push(rng.random_range((0.1f64).ln()..(10.0f64).ln()));
        if matches!(spec.noise, NoiseModel::Learned) {
            th.push(rng.random_range((1e-4f64).ln()..(0.5f64).ln()));
        }
        if spec.mean == MeanModel::Constant {
            let (a, b) = spec.mean_bounds;
            let mid = 0.5 * (a + b);
            th.push(mid + rng.random_range(-0.25..0.25) * (b - a));
        }
        starts.push(th);
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for th0 in starts {
        let (th, f) = lbfgs_box(|th| objective(spec, z, t, th), &th0, &lo, &hi, opts.max_iter);
        if f.is_finite() && best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((th, f));
        }
    }
    match best {
        Some((th, _)) => spec.decode(&th),
        None => {
            tracing::warn!("all marginal-likelihood restarts failed; keeping initial hyperparameters");
            init.clone()
        }
    }
}

/// Conditioned regression model in model space.
#[derive(Debug, Clone)]
pub struct Conditioned {
    pub z: DMatrix<f64>,
    pub ls: Vec<f64>,
    pub hyper: Hyper,
    pub factor: Factor,
    pub alpha: DVector<f64>,
}

impl Conditioned {
    pub fn new(spec: &Spec, z: DMatrix<f64>, t: &DVector<f64>, hyper: Hyper, context: &'static str) -> Result<Self> {
        let n = z.nrows();
        let ls = spec.expand(&hyper);
        let mut k = gram(&z, &z, &ls, hyper.outputscale);
        let noise = spec.noise_diag(&hyper, n);
        for i in 0..n {
            k[(i, i)] += noise[i];
        }
        let factor = cholesky_jitter(&k, context)?;
        let alpha = factor.solve_vec(&t.map(|v| v - hyper.mean));
        Ok(Self { z, ls, hyper, factor, alpha })
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }

    /// Latent mean and variance at one model-space point.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        if self.is_empty() {
            return (self.hyper.mean, self.hyper.outputscale);
        }
        let k = gram_row(x, &self.z, &self.ls, self.hyper.outputscale);
        let mean = self.hyper.mean + k.dot(&self.alpha);
        let v = self.factor.half_solve_vec(&k);
        let var = (self.hyper.outputscale - v.norm_squared()).max(0.0);
        (mean, var)
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        if self.is_empty() {
            return self.hyper.mean;
        }
        self.hyper.mean + gram_row(x, &self.z, &self.ls, self.hyper.outputscale).dot(&self.alpha)
    }

    /// Latent posterior covariance between two sets of model-space points.
    pub fn cov(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let prior = gram(a, b, &self.ls, self.hyper.outputscale);
        if self.is_empty() {
            return prior;
        }
        let va = self.factor.half_solve(&gram(&self.z, a, &self.ls, self.hyper.outputscale));
        let vb = self.factor.half_solve(&gram(&self.z, b, &self.ls, self.hyper.outputscale));
        prior - va.tr_mul(&vb)
    }

    pub fn means(&self, a: &DMatrix<f64>) -> DVector<f64> {
        if self.is_empty() {
            return DVector::from_element(a.nrows(), self.hyper.mean);
        }
        let k = gram(a, &self.z, &self.ls, self.hyper.outputscale);
        (k * &self.alpha).add_scalar(self.hyper.mean)
    }
}
