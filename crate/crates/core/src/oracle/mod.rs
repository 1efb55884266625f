//! Ground-truth objectives, noisy observation and synthetic humans.
//!
//! Every objective is expressed for maximization.

pub mod expr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Ackley,
    HolderTable,
    StyblinskiTang,
    Michalewicz,
    Rosenbrock,
}

impl Builtin {
    pub fn eval(self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        match self {
            Builtin::Ackley => {
                let (a, b, c) = (20.0, 0.2, 2.0 * std::f64::consts::PI);
                let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
                let cs = x.iter().map(|v| (c * v).cos()).sum::<f64>() / d;
                a * (-b * sq.sqrt()).exp() + cs.exp() - a - std::f64::consts::E
            }
            Builtin::HolderTable => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                (x[0].sin() * x[1].cos() * (1.0 - r / std::f64::consts::PI).abs().exp()).abs()
            }
            Builtin::StyblinskiTang => -0.5 * x.iter().map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v).sum::<f64>(),
            Builtin::Michalewicz => x
                .iter()
                .enumerate()
                .map(|(i, v)| v.sin() * ((i as f64 + 1.0) * v * v / std::f64::consts::PI).sin().powi(20))
                .sum(),
            Builtin::Rosenbrock => -x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
                .sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Vec<f64>>,
}

/// Preset / custom objective definition as stored in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveDef {
    pub name: String,
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum: Option<Optimum>,
}

#[derive(Debug, Clone)]
enum Evaluator {
    Builtin(Builtin),
    Expr(expr::Expr),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ObjectiveDef", into = "ObjectiveDef")]
pub struct ObjectiveSpec {
    def: ObjectiveDef,
    domain: Domain,
    eval: Evaluator,
}

impl PartialEq for ObjectiveSpec {
    fn eq(&self, other: &Self) -> bool {
        self.def == other.def
    }
}

impl From<ObjectiveSpec> for ObjectiveDef {
    fn from(s: ObjectiveSpec) -> Self {
        s.def
    }
}

impl TryFrom<ObjectiveDef> for ObjectiveSpec {
    type Error = Error;

    fn try_from(def: ObjectiveDef) -> Result<Self> {
        load_custom_objective(def)
    }
}

/// Validates a definition and compiles its evaluator.
pub fn load_custom_objective(def: ObjectiveDef) -> Result<ObjectiveSpec> {
    if def.dim == 0 {
        return Err(Error::input("objective dimension must be at least 1"));
    }
    Error::check_dim(def.dim, def.lower.len())?;
    let domain = Domain::new(def.lower.clone(), def.upper.clone())?;
    let eval = match (&def.expression, def.builtin) {
        (Some(src), None) => Evaluator::Expr(expr::parse(src, def.dim)?),
        (None, Some(b)) => {
            if b == Builtin::HolderTable && def.dim != 2 {
                return Err(Error::input("holder_table is two-dimensional"));
            }
            Evaluator::Builtin(b)
        }
        _ => return Err(Error::input("objective needs exactly one of 'expression' or 'builtin'")),
    };
    if let Some(loc) = def.optimum.as_ref().and_then(|o| o.location.as_ref()) {
        Error::check_dim(def.dim, loc.len())?;
    }
    Ok(ObjectiveSpec { def, domain, eval })
}

impl ObjectiveSpec {
    pub fn name(&self) -> &str {
        &self.def.name
    }

    pub fn dim(&self) -> usize {
        self.def.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn optimum(&self) -> Option<&Optimum> {
        self.def.optimum.as_ref()
    }

    pub fn definition(&self) -> &ObjectiveDef {
        &self.def
    }

    /// Evaluates without the domain check.
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.eval {
            Evaluator::Builtin(b) => b.eval(x),
            Evaluator::Expr(e) => e.eval(x),
        }
    }
}

pub fn eval_objective(spec: &ObjectiveSpec, x: &[f64]) -> Result<f64> {
    Error::check_dim(spec.dim(), x.len())?;
    if !spec.domain.contains(x) {
        return Err(Error::input(format!("point {x:?} lies outside the domain of '{}'", spec.name())));
    }
    let v = spec.value(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical { context: "objective evaluation", detail: format!("non-finite value at {x:?}") })
    }
}

/// `f(x)` plus a Gaussian noise draw keyed by `seed`.
pub fn observe(spec: &ObjectiveSpec, x: &[f64], noise_var: f64, seed: u64) -> Result<f64> {
    if !(noise_var >= 0.0) {
        return Err(Error::input("noise_var must be nonnegative"));
    }
    let f = eval_objective(spec, x)?;
    if noise_var == 0.0 {
        return Ok(f);
    }
    let n = Normal::new(0.0, noise_var.sqrt()).map_err(|e| Error::input(e.to_string()))?;
    Ok(f + n.sample(&mut crate::rng::rng(seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticHumanConfig {
    pub sigma_pref_sq: f64,
    #[serde(default)]
    pub adversarial: bool,
}

impl SyntheticHumanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_pref_sq >= 0.0 && self.sigma_pref_sq.is_finite() {
            Ok(())
        } else {
            Err(Error::input("sigma_pref_sq must be nonnegative"))
        }
    }
}

/// Noise draws `(ε₁, ε₂)` and a tie-break uniform for one synthetic duel.
pub fn human_noise(cfg: &SyntheticHumanConfig, seed: u64) -> (f64, f64, f64) {
    let mut rng = crate::rng::rng(seed);
    let sd = cfg.sigma_pref_sq.sqrt();
    let e1: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * sd;
    let e2: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * sd;
    (e1, e2, rng.random())
}

/// Choice (1 or 2) given true values and pre-drawn noise.
pub fn decide(f1: f64, f2: f64, noise: (f64, f64, f64), adversarial: bool) -> u8 {
    let (a, b) = (f1 + noise.0, f2 + noise.1);
    let first = if a == b { noise.2 < 0.5 } else { a > b };
    if first != adversarial { 1 } else { 2 }
}

/// Synthetic human pick between two arms: the one with larger noisy value.
pub fn synthetic_select(spec: &ObjectiveSpec, x1: &[f64], x2: &[f64], cfg: &SyntheticHumanConfig, seed: u64) -> Result<u8> {
    cfg.validate()?;
    let f1 = eval_objective(spec, x1)?;
    let f2 = eval_objective(spec, x2)?;
    Ok(decide(f1, f2, human_noise(cfg, seed), cfg.adversarial))
}

/// Unassisted expert stand-in: best of 10 uniform draws under the human's
/// noisy perception.
pub fn manual_proposal(spec: &ObjectiveSpec, cfg: &SyntheticHumanConfig, seed: u64) -> Result<Vec<f64>> {
    const DRAWS: usize = 10;
    let mut rng = crate::rng::rng(seed);
    let sd = cfg.sigma_pref_sq.sqrt();
    let dom = spec.domain();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..DRAWS {
        let x: Vec<f64> = (0..spec.dim()).map(|j| rng.random_range(dom.lower[j]..=dom.upper[j])).collect();
        let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * sd;
        let mut v = eval_objective(spec, &x)? + noise;
        if cfg.adversarial {
            v = -v;
        }
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((x, v));
        }
    }
    Ok(best.expect("at least one draw").0)
}

fn builtin(name: &str, b: Builtin, lower: f64, upper: f64, dim: usize, optimum: Optimum) -> ObjectiveDef {
    ObjectiveDef {
        name: name.into(),
        dim,
        lower: vec![lower; dim],
        upper: vec![upper; dim],
        expression: None,
        builtin: Some(b),
        optimum: Some(optimum),
    }
}

pub const PRESET_NAMES: [&str; 7] =
    ["ackley", "holder_table", "styblinski_tang", "michalewicz", "rosenbrock", "gaussian_bump", "battery_ec"];

/// Shipped objective definitions by name.
pub fn preset(name: &str) -> Result<ObjectiveSpec> {
    let def = match name {
        "ackley" => builtin("ackley", Builtin::Ackley, -1.0, 1.0, 4, Optimum { value: 0.0, location: Some(vec![0.0; 4]) }),
        "holder_table" => builtin(
            "holder_table",
            Builtin::HolderTable,
            0.0,
            10.0,
            2,
            Optimum { value: 19.2085, location: Some(vec![8.05502, 9.66459]) },
        ),
        "styblinski_tang" => builtin(
            "styblinski_tang",
            Builtin::StyblinskiTang,
            -5.0,
            5.0,
            3,
            Optimum { value: 39.166166 * 3.0, location: Some(vec![-2.903534; 3]) },
        ),
        "michalewicz" => builtin(
            "michalewicz",
            Builtin::Michalewicz,
            0.0,
            std::f64::consts::PI,
            5,
            Optimum { value: 4.687658, location: None },
        ),
        "rosenbrock" => builtin("rosenbrock", Builtin::Rosenbrock, -5.0, 10.0, 3, Optimum { value: 0.0, location: Some(vec![1.0; 3]) }),
        "gaussian_bump" => ObjectiveDef {
            name: "gaussian_bump".into(),
            dim: 2,
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            expression: Some("exp(-((x1 - 0.3)^2 + (x2 - 0.7)^2) / 0.02)".into()),
            builtin: None,
            optimum: Some(Optimum { value: 1.0, location: Some(vec![0.3, 0.7]) }),
        },
        // Conductivity-like landscape over (salt concentration, EC fraction,
        // additive fraction): a dominant ridge plus two secondary modes.
        "battery_ec" => ObjectiveDef {
            name: "battery_ec".into(),
            dim: 3,
            lower: vec![0.0, 0.0, 0.0],
            upper: vec![2.0, 1.0, 1.0],
            expression: Some(
                "10*x1*exp(-0.9*x1)*exp(-((x2-0.45)^2)/0.08) \
                 + 3*exp(-((x1-1.6)^2/0.05 + (x2-0.8)^2/0.02 + (x3-0.2)^2/0.05)) \
                 + 2*exp(-((x1-0.4)^2/0.03 + (x3-0.8)^2/0.04)) - 1.5*x3^2"
                    .into(),
            ),
            builtin: None,
            optimum: None,
        },
        other => {
            return Err(Error::input(format!(
                "unknown objective '{other}'; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    load_custom_objective(def)
}
