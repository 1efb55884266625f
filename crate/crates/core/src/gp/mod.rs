//! Gaussian process regression with an ARD RBF kernel.
//!
//! Inputs are mapped to the unit cube of the model's [`Domain`] and outputs are
//! standardized before fitting, so [`KernelParams`] live in that normalized
//! space: lengthscales are unit-cube lengths, outputscale and noise are in
//! standardized output units. Predictions are reported in raw output units.

pub mod regression;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky_jitter;
use regression::{Conditioned, FitOptions, Hyper, MeanModel, NoiseModel, Spec};

pub const FIT_RESTARTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Self { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn unit(dim: usize) -> Self {
        Self { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() {
            return Err(Error::input("domain must have at least one dimension"));
        }
        Error::check_dim(self.lower.len(), self.upper.len())?;
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::input(format!("domain bound {i}: need lower < upper, got [{l}, {u}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| (v - self.lower[i]) / self.width(i)).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, v)| self.lower[i] + v * self.width(i)).collect()
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        Error::check_dim(x.len(), y.len())?;
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) {
        self.x.push(x);
        self.y.push(y);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub outputscale: f64,
    pub lengthscales: Vec<f64>,
    pub noise: f64,
    pub constant_mean: f64,
}

impl KernelParams {
    pub fn default_for(dim: usize) -> Self {
        Self { outputscale: 1.0, lengthscales: vec![0.3; dim], noise: 1e-2, constant_mean: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.outputscale > 0.0
            && self.noise > 0.0
            && self.constant_mean.is_finite()
            && self.lengthscales.iter().all(|l| *l > 0.0 && l.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("kernel parameters must be positive and finite: {self:?}")))
        }
    }

    fn hyper(&self) -> Hyper {
        Hyper {
            lengthscales: self.lengthscales.clone(),
            outputscale: self.outputscale,
            noise: self.noise,
            mean: self.constant_mean,
        }
    }

    fn from_hyper(h: Hyper) -> Self {
        Self { outputscale: h.outputscale, lengthscales: h.lengthscales, noise: h.noise, constant_mean: h.mean }
    }
}

/// ARD RBF kernel `v·exp(−½ Σ ((x1_i − x2_i)/ℓ_i)²)`.
pub fn rbf_kernel(x1: &[f64], x2: &[f64], params: &KernelParams) -> Result<f64> {
    Error::check_dim(params.lengthscales.len(), x1.len())?;
    Error::check_dim(params.lengthscales.len(), x2.len())?;
    let s: f64 = x1
        .iter()
        .zip(x2)
        .zip(&params.lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    Ok(params.outputscale * (-0.5 * s).exp())
}

#[derive(Serialize, Deserialize)]
struct GpRecord {
    params: KernelParams,
    domain: Domain,
    data: Dataset,
    y_mean: f64,
    y_std: f64,
}

/// A conditioned GP surrogate. Immutable; fitting and updating return new models.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GpRecord", into = "GpRecord")]
pub struct GpModel {
    pub params: KernelParams,
    pub domain: Domain,
    pub data: Dataset,
    pub y_mean: f64,
    pub y_std: f64,
    inner: Conditioned,
}

impl From<GpModel> for GpRecord {
    fn from(m: GpModel) -> Self {
        Self { params: m.params, domain: m.domain, data: m.data, y_mean: m.y_mean, y_std: m.y_std }
    }
}

impl TryFrom<GpRecord> for GpModel {
    type Error = Error;

    fn try_from(r: GpRecord) -> Result<Self> {
        GpModel::condition(r.params, r.domain, r.data, r.y_mean, r.y_std)
    }
}

fn spec(dim: usize) -> Spec {
    Spec::ard(dim, NoiseModel::Learned, MeanModel::Constant, (-3.0, 3.0))
}

/// Standardization constants: mean and sample standard deviation.
pub fn standardization(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    if y.is_empty() {
        return (0.0, 1.0);
    }
    let mean = y.iter().sum::<f64>() / n;
    if y.len() < 2 {
        return (mean, 1.0);
    }
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    if std > 0.0 && std.is_finite() {
        (mean, std)
    } else {
        tracing::warn!("observations have zero spread; using unit scale");
        (mean, 1.0)
    }
}

impl GpModel {
    /// Model with no data: predictions equal the prior.
    pub fn prior(params: KernelParams, domain: Domain) -> Result<Self> {
        Self::condition(params, domain, Dataset::default(), 0.0, 1.0)
    }

    /// Conditions on `data` with fixed hyperparameters and standardization.
    pub fn condition(params: KernelParams, domain: Domain, data: Dataset, y_mean: f64, y_std: f64) -> Result<Self> {
        domain.validate()?;
        params.validate()?;
        Error::check_dim(domain.dim(), params.lengthscales.len())?;
        Error::check_dim(data.x.len(), data.y.len())?;
        if !(y_std > 0.0) {
            return Err(Error::input("y_std must be positive"));
        }
        let z = unit_matrix(&domain, &data.x)?;
        let t = DVector::from_iterator(data.len(), data.y.iter().map(|v| (v - y_mean) / y_std));
        let inner = Conditioned::new(&spec(domain.dim()), z, &t, params.hyper(), "gp posterior")?;
        Ok(Self { params, domain, data, y_mean, y_std, inner })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Cholesky factor of `K_XX + λI` in standardized units.
    pub fn chol(&self) -> DMatrix<f64> {
        self.inner.factor.l()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.inner.alpha
    }

    /// Diagonal jitter that was needed to factorize the Gram matrix.
    pub fn jitter(&self) -> f64 {
        self.inner.factor.jitter
    }

    /// Returns the model conditioned on one more observation, keeping the
    /// hyperparameters and standardization constants.
    pub fn with_observation(&self, x: &[f64], y: f64) -> Result<Self> {
        Error::check_dim(self.dim(), x.len())?;
        let mut data = self.data.clone();
        data.push(x.to_vec(), y);
        Self::condition(self.params.clone(), self.domain.clone(), data, self.y_mean, self.y_std)
    }

    /// Posterior mean and variance of the latent function in raw units.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64)> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(self.posterior_unchecked(x))
    }

    pub(crate) fn posterior_unchecked(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.inner.predict(&self.domain.to_unit(x));
        (self.y_mean + self.y_std * m, self.y_std * self.y_std * v)
    }

    pub fn posterior_mean(&self, x: &[f64]) -> f64 {
        self.y_mean + self.y_std * self.inner.predict_mean(&self.domain.to_unit(x))
    }

    pub fn posterior_means(&self, xs: &[Vec<f64>]) -> Result<DVector<f64>> {
        let z = unit_matrix(&self.domain, xs)?;
        Ok(self.inner.means(&z).map(|m| self.y_mean + self.y_std * m))
    }

    pub fn posterior_cov(&self, x1: &[Vec<f64>], x2: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let a = unit_matrix(&self.domain, x1)?;
        let b = unit_matrix(&self.domain, x2)?;
        Ok(self.inner.cov(&a, &b) * (self.y_std * self.y_std))
    }

    /// `count` joint posterior draws at `xs`, one per row.
    pub fn sample_posterior(&self, xs: &[Vec<f64>], count: usize, seed: u64) -> Result<DMatrix<f64>> {
        let m = xs.len();
        if count == 0 || m == 0 {
            return Ok(DMatrix::zeros(count, m));
        }
        let mean = self.posterior_means(xs)?;
        let cov = self.posterior_cov(xs, xs)?;
        let factor = cholesky_jitter(&cov, "posterior sampling")?;
        let l = factor.l();
        let mut rng = crate::rng::rng(seed);
        let z = DMatrix::from_fn(m, count, |_, _| StandardNormal.sample(&mut rng));
        let draws = l * z;
        Ok(DMatrix::from_fn(count, m, |i, j| mean[j] + draws[(j, i)]))
    }

    /// Log marginal likelihood of the standardized data under the current
    /// hyperparameters.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.data.len() as f64;
        let t = DVector::from_iterator(
            self.data.len(),
            self.data.y.iter().map(|v| (v - self.y_mean) / self.y_std - self.params.constant_mean),
        );
        -0.5 * t.dot(&self.inner.alpha) - 0.5 * self.inner.factor.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

fn unit_matrix(domain: &Domain, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = domain.dim();
    for x in xs {
        Error::check_dim(d, x.len())?;
    }
    Ok(DMatrix::from_fn(xs.len(), d, |i, j| (xs[i][j] - domain.lower[j]) / domain.width(j)))
}

/// Fits hyperparameters by maximizing the marginal likelihood.
pub fn fit_gp(data: &Dataset, domain: &Domain, seed: u64) -> Result<GpModel> {
    fit_gp_with(data, domain, seed, None, FIT_RESTARTS)
}

/// As [`fit_gp`], optionally starting the first restart from `warm`.
pub fn fit_gp_with(
    data: &Dataset,
    domain: &Domain,
    seed: u64,
    warm: Option<&KernelParams>,
    restarts: usize,
) -> Result<GpModel> {
    domain.validate()?;
    if data.len() < 2 {
        return Err(Error::input(format!("need at least 2 observations to fit, got {}", data.len())));
    }
    for x in &data.x {
        if !domain.contains(x) {
            return Err(Error::input(format!("training input {x:?} lies outside the domain")));
        }
    }
    if data.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("observations must be finite"));
    }
    let (y_mean, y_std) = standardization(&data.y);
    let z = unit_matrix(domain, &data.x)?;
    let t = DVector::from_iterator(data.len(), data.y.iter().map(|v| (v - y_mean) / y_std));
    let init = warm.cloned().unwrap_or_else(|| KernelParams::default_for(domain.dim()));
    let mut rng = crate::rng::rng(seed);
    let hyper = regression::fit(
        &spec(domain.dim()),
        &z,
        &t,
        &init.hyper(),
        &FitOptions { restarts, max_iter: 100 },
        &mut rng,
    );
    GpModel::condition(KernelParams::from_hyper(hyper), domain.clone(), data.clone(), y_mean, y_std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy(n: usize, seed: u64) -> (Dataset, Domain) {
        use rand::Rng;
        let mut rng = crate::rng::rng(seed);
        let domain = Domain::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0)]).collect();
        let y = x.iter().map(|p| (3.0 * p[0]).sin() + 0.5 * p[1] * p[1]).collect();
        (Dataset::new(x, y).unwrap(), domain)
    }

    #[test]
    fn kernel_examples() {
        let p = KernelParams { outputscale: 2.5, lengthscales: vec![0.7, 1.1], noise: 0.1, constant_mean: 0.0 };
        assert_eq!(rbf_kernel(&[0.3, 0.1], &[0.3, 0.1], &p).unwrap(), 2.5);
        let p1 = KernelParams { outputscale: 1.0, lengthscales: vec![1.0], noise: 0.1, constant_mean: 0.0 };
        assert_relative_eq!(rbf_kernel(&[0.0], &[1.0], &p1).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        assert!(rbf_kernel(&[0.0], &[1.0, 2.0], &p1).is_err());
    }

    #[test]
    fn prior_model_predicts_prior() {
        let p = KernelParams { outputscale: 1.7, lengthscales: vec![0.2], noise: 0.1, constant_mean: 0.4 };
        let gp = GpModel::prior(p, Domain::unit(1)).unwrap();
        let (m, v) = gp.posterior(&[0.3]).unwrap();
        assert_eq!((m, v), (0.4, 1.7));
        let k = gp.posterior_cov(&[vec![0.1], vec![0.5]], &[vec![0.1], vec![0.5]]).unwrap();
        assert_relative_eq!(k[(0, 1)], 1.7 * (-0.5f64 * 2.0 * 2.0).exp(), epsilon = 1e-14);
    }

    #[test]
    fn fit_is_deterministic_and_interpolates() {
        let (data, domain) = toy(15, 1);
        let a = fit_gp(&data, &domain, 5).unwrap();
        let b = fit_gp(&data, &domain, 5).unwrap();
        assert_eq!(a.params, b.params);
        for (x, y) in data.x.iter().zip(&data.y) {
            let (m, _) = a.posterior(x).unwrap();
            assert!((m - y).abs() < 0.1, "{m} vs {y}");
        }
    }

    #[test]
    fn two_points_interpolate() {
        let data = Dataset::new(vec![vec![0.2], vec![0.8]], vec![1.0, 3.0]).unwrap();
        let gp = fit_gp(&data, &Domain::unit(1), 0).unwrap();
        for (x, y) in data.x.iter().zip(&data.y) {
            let (m, _) = gp.posterior(x).unwrap();
            assert!((m - y).abs() < 0.5, "{m} vs {y}");
        }
    }

    #[test]
    fn single_point_fit_rejected() {
        let data = Dataset::new(vec![vec![0.2]], vec![1.0]).unwrap();
        assert!(matches!(fit_gp(&data, &Domain::unit(1), 0), Err(Error::Input(_))));
    }

    #[test]
    fn serialization_round_trip_is_lossless() {
        let (data, domain) = toy(10, 2);
        let gp = fit_gp(&data, &domain, 1).unwrap();
        let s = serde_json::to_string(&gp).unwrap();
        let back: GpModel = serde_json::from_str(&s).unwrap();
        assert_eq!(s, serde_json::to_string(&back).unwrap());
        assert_eq!(gp.posterior(&[0.1, 0.3]).unwrap(), back.posterior(&[0.1, 0.3]).unwrap());
    }

    #[test]
    fn chol_reconstructs_gram() {
        let (data, domain) = toy(12, 4);
        let gp = fit_gp(&data, &domain, 3).unwrap();
        let l = gp.chol();
        let mut k = DMatrix::from_fn(12, 12, |i, j| {
            let a = domain.to_unit(&data.x[i]);
            let b = domain.to_unit(&data.x[j]);
            rbf_kernel(&a, &b, &gp.params).unwrap()
        });
        for i in 0..12 {
            k[(i, i)] += gp.params.noise + gp.jitter();
        }
        let rel = (&l * l.transpose() - &k).norm() / k.norm();
        assert!(rel < 1e-8, "{rel}");
    }

    #[test]
    fn sampling_is_deterministic_and_empty_for_zero_count() {
        let (data, domain) = toy(8, 5);
        let gp = fit_gp(&data, &domain, 0).unwrap();
        let xs = vec![vec![0.0, 1.0], vec![0.5, 0.5]];
        assert_eq!(gp.sample_posterior(&xs, 0, 1).unwrap().nrows(), 0);
        assert_eq!(gp.sample_posterior(&xs, 4, 9).unwrap(), gp.sample_posterior(&xs, 4, 9).unwrap());
    }
}
