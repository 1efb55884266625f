//! The optimization loop: propose a pair, explain it, take the expert's pick,
//! update both surrogates, observe the objective.

mod persist;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use persist::{load_session, save_session, session_from_json, session_to_json, SCHEMA_VERSION};

use crate::acquisition::{self, AcqConfig, RhoConvention, YStats};
use crate::error::{Error, Result};
use crate::explain::{self, ExplanationBundle, Feedback};
use crate::gp::{self, Dataset, GpModel};
use crate::oracle::{self, ObjectiveDef, ObjectiveSpec, SyntheticHumanConfig};
use crate::pref::{self, DuelRecord, PreferenceGp, SoftCopeland};
use crate::rng::{derive, tag};
use crate::sobol::Sobol;

/// Hyperparameter refits after the first one start from the previous optimum
/// and run a short, single-start search.
const REFIT_RESTARTS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Random,
    Manual,
    Ucb,
    Ts,
    PriorSampling,
    BatchUcb,
    BatchTs,
    Pibo,
    CoexboPibo,
    #[default]
    Coexbo,
}

impl Baseline {
    pub const ALL: [Baseline; 10] = [
        Baseline::Random,
        Baseline::Manual,
        Baseline::Ucb,
        Baseline::Ts,
        Baseline::PriorSampling,
        Baseline::BatchUcb,
        Baseline::BatchTs,
        Baseline::Pibo,
        Baseline::CoexboPibo,
        Baseline::Coexbo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Random => "random",
            Baseline::Manual => "manual",
            Baseline::Ucb => "ucb",
            Baseline::Ts => "ts",
            Baseline::PriorSampling => "prior_sampling",
            Baseline::BatchUcb => "batch_ucb",
            Baseline::BatchTs => "batch_ts",
            Baseline::Pibo => "pibo",
            Baseline::CoexboPibo => "coexbo_pibo",
            Baseline::Coexbo => "coexbo",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::input(format!("unknown baseline '{s}'")))
    }

    /// Whether a human judges a pair each iteration.
    pub fn uses_pairs(self) -> bool {
        matches!(self, Baseline::Random | Baseline::BatchUcb | Baseline::BatchTs | Baseline::CoexboPibo | Baseline::Coexbo)
    }

    /// Whether the preference belief is updated from new duels.
    pub fn learns_preferences(self) -> bool {
        matches!(self, Baseline::CoexboPibo | Baseline::Coexbo)
    }

    fn needs_belief(self) -> bool {
        matches!(self, Baseline::PriorSampling | Baseline::Pibo | Baseline::CoexboPibo | Baseline::Coexbo)
    }
}

impl std::fmt::Display for Baseline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectiveRef {
    Preset(String),
    Custom(ObjectiveDef),
}

impl ObjectiveRef {
    pub fn resolve(&self) -> Result<ObjectiveSpec> {
        match self {
            ObjectiveRef::Preset(name) => oracle::preset(name),
            ObjectiveRef::Custom(def) => oracle::load_custom_objective(def.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HumanSource {
    Synthetic(SyntheticHumanConfig),
    /// Choices arrive through `apply_choice`. The initial preference data is
    /// either supplied directly or labelled by a synthetic stand-in for the
    /// expert's prior knowledge.
    Interactive {
        #[serde(default)]
        initial_duels: Vec<DuelRecord>,
        #[serde(default)]
        prior_human: Option<SyntheticHumanConfig>,
    },
}

fn default_n_obj() -> usize {
    10
}
fn default_n_pref() -> usize {
    100
}
fn default_iterations() -> usize {
    50
}
fn default_beta_sqrt() -> f64 {
    acquisition::DEFAULT_BETA_SQRT
}
fn default_gamma() -> f64 {
    acquisition::DEFAULT_GAMMA
}
fn default_gamma_pibo() -> f64 {
    acquisition::DEFAULT_GAMMA_PIBO
}
fn default_alpha_eps() -> f64 {
    pref::DEFAULT_ALPHA_EPS
}
fn default_n_mc() -> usize {
    pref::DEFAULT_N_MC
}
fn default_true() -> bool {
    true
}
fn default_human() -> HumanSource {
    HumanSource::Synthetic(SyntheticHumanConfig { sigma_pref_sq: 0.1, adversarial: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub objective: ObjectiveRef,
    #[serde(default = "default_n_obj")]
    pub n_obj: usize,
    #[serde(default = "default_n_pref")]
    pub n_pref: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_beta_sqrt")]
    pub beta_sqrt: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_gamma_pibo")]
    pub gamma_pibo: f64,
    #[serde(default)]
    pub noise_var: f64,
    #[serde(default = "default_human")]
    pub human: HumanSource,
    #[serde(default)]
    pub baseline: Baseline,
    #[serde(default)]
    pub rho: RhoConvention,
    #[serde(default = "default_alpha_eps")]
    pub alpha_eps: f64,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default)]
    pub seed: u64,
    /// Build Shapley explanations and heatmaps with each pair.
    #[serde(default = "default_true")]
    pub explain: bool,
    /// Record zero wall-clock durations so traces are reproducible.
    #[serde(default)]
    pub deterministic_timing: bool,
}

impl SessionConfig {
    pub fn new(objective: ObjectiveRef, baseline: Baseline, seed: u64) -> Self {
        Self {
            objective,
            n_obj: default_n_obj(),
            n_pref: default_n_pref(),
            iterations: default_iterations(),
            beta_sqrt: default_beta_sqrt(),
            gamma: default_gamma(),
            gamma_pibo: default_gamma_pibo(),
            noise_var: 0.0,
            human: default_human(),
            baseline,
            rho: RhoConvention::default(),
            alpha_eps: default_alpha_eps(),
            n_mc: default_n_mc(),
            seed,
            explain: true,
            deterministic_timing: false,
        }
    }

    /// Field-level validation problems; empty when the config is usable.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Err(e) = self.objective.resolve() {
            out.push(("objective", e.to_string()));
        }
        if self.n_obj < 2 {
            out.push(("n_obj", "must be at least 2".into()));
        }
        if self.iterations < 1 {
            out.push(("iterations", "must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            out.push(("gamma", "must be positive".into()));
        }
        if !(self.gamma_pibo > 0.0 && self.gamma_pibo.is_finite()) {
            out.push(("gamma_pibo", "must be positive".into()));
        }
        if !(self.beta_sqrt >= 0.0 && self.beta_sqrt.is_finite()) {
            out.push(("beta_sqrt", "must be nonnegative".into()));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            out.push(("noise_var", "must be nonnegative".into()));
        }
        if !(self.alpha_eps > 0.0 && self.alpha_eps.is_finite()) {
            out.push(("alpha_eps", "must be positive".into()));
        }
        if self.n_mc < 1 {
            out.push(("n_mc", "must be at least 1".into()));
        }
        match &self.human {
            HumanSource::Synthetic(h) => {
                if h.validate().is_err() {
                    out.push(("human.sigma_pref_sq", "must be nonnegative".into()));
                }
                if self.n_pref < 2 {
                    out.push(("n_pref", "must be at least 2".into()));
                }
            }
            HumanSource::Interactive { initial_duels, prior_human } => {
                if !self.baseline.uses_pairs() {
                    out.push(("baseline", "interactive sessions need a pair-generating baseline".into()));
                }
                if let Some(h) = prior_human {
                    if h.validate().is_err() {
                        out.push(("human.prior_human.sigma_pref_sq", "must be nonnegative".into()));
                    }
                }
                let n = initial_duels.len() + if prior_human.is_some() { self.n_pref } else { 0 };
                if self.baseline.needs_belief() && n < 2 {
                    out.push(("human.initial_duels", "need at least 2 initial duels or a prior_human with n_pref ≥ 2".into()));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Input(p.iter().map(|(f, m)| format!("{f}: {m}")).collect::<Vec<_>>().join("; ")))
        }
    }

    fn acq(&self, t: usize) -> AcqConfig {
        AcqConfig { beta_sqrt: self.beta_sqrt, gamma: self.gamma, t, rho: self.rho }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Ready,
    AwaitingChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingPair {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub explanation: Option<ExplanationBundle>,
    pub gen_ms: f64,
    /// Unix time in milliseconds when the pair was issued.
    pub issued_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSummary {
    pub top2: [usize; 2],
    pub af_phi: [Vec<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub choice: u8,
    pub y: f64,
    pub regret: Option<f64>,
    pub selection_correct: Option<bool>,
    pub gen_ms: f64,
    pub human_ms: f64,
    pub feedback: Option<Feedback>,
    pub explanation: Option<ExplanationSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionState {
    pub schema_version: u32,
    pub config: SessionConfig,
    /// Resolved objective, so custom definitions survive a reload verbatim.
    pub objective: ObjectiveSpec,
    pub t: usize,
    pub data: Dataset,
    /// Duels before mirroring.
    pub duels: Vec<DuelRecord>,
    pub gp: GpModel,
    pub pref: Option<PreferenceGp>,
    pub copeland: Option<SoftCopeland>,
    pub history: Vec<IterationRecord>,
    /// Best noiseless objective value among queried points, when computable.
    pub best_true: Option<f64>,
    pub phase: Phase,
    pub pending: Option<PendingPair>,
    pub last_feedback: Option<Feedback>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceOutcome {
    pub feedback: Feedback,
    pub observed_y: f64,
    pub t: usize,
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn uniform_point(domain: &gp::Domain, rng: &mut impl Rng) -> Vec<f64> {
    (0..domain.dim()).map(|j| rng.random_range(domain.lower[j]..=domain.upper[j])).collect()
}

fn random_duels(spec: &ObjectiveSpec, human: &SyntheticHumanConfig, count: usize, seed: u64) -> Result<Vec<DuelRecord>> {
    let mut rng = crate::rng::rng(derive(seed, &[tag("init-duels")]));
    (0..count)
        .map(|k| {
            let x1 = uniform_point(spec.domain(), &mut rng);
            let x2 = uniform_point(spec.domain(), &mut rng);
            let choice = oracle::synthetic_select(spec, &x1, &x2, human, derive(seed, &[tag("init-human"), k as u64]))?;
            Ok(DuelRecord { x1, x2, y_pref: u8::from(choice == 1) })
        })
        .collect()
}

impl SessionState {
    pub fn iterations_done(&self) -> usize {
        self.history.len()
    }

    pub fn is_finished(&self) -> bool {
        self.history.len() >= self.config.iterations
    }

    pub fn y_stats(&self) -> YStats {
        YStats::from_gp(&self.gp)
    }

    fn seed(&self, label: &str) -> u64 {
        derive(self.config.seed, &[tag(label), self.t as u64])
    }

    /// Observed point with the highest noisy value.
    pub fn incumbent(&self) -> &[f64] {
        let i = self
            .data
            .y
            .iter()
            .enumerate()
            .fold(0, |b, (i, y)| if *y > self.data.y[b] { i } else { b });
        &self.data.x[i]
    }

    fn fit_belief(&mut self, first: bool) -> Result<()> {
        if self.duels.is_empty() {
            return Ok(());
        }
        let restarts = if first { pref::PREF_RESTARTS } else { REFIT_RESTARTS };
        let warm = self.pref.as_ref().map(|g| g.params.clone());
        let g = pref::fit_preference_gp_with(
            &self.duels,
            self.objective.domain(),
            self.config.alpha_eps,
            self.seed("pref"),
            warm.as_ref(),
            restarts,
        )?;
        let warm_bq = self.copeland.as_ref().map(|c| c.params.clone());
        let sc = pref::build_soft_copeland_with(&g, self.config.n_mc, self.seed("bq"), warm_bq.as_ref(), restarts)?;
        self.pref = Some(g);
        self.copeland = Some(sc);
        Ok(())
    }

    fn refit_gp(&mut self) -> Result<()> {
        self.gp = gp::fit_gp_with(
            &self.data,
            self.objective.domain(),
            self.seed("gp"),
            Some(&self.gp.params),
            REFIT_RESTARTS + 1,
        )?;
        Ok(())
    }

    fn belief(&self) -> Result<&SoftCopeland> {
        self.copeland.as_ref().ok_or_else(|| Error::State("no preference belief available".into()))
    }

    fn regret_of(&self, best: Option<f64>) -> Option<f64> {
        Some(self.objective.optimum()?.value - best?)
    }

    /// `(x1, x2)` for the configured method; single-query methods return the
    /// same point twice.
    fn propose(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let cfg = &self.config;
        let acq = cfg.acq(self.t);
        let seed = self.seed("propose");
        match cfg.baseline {
            Baseline::Random => {
                let mut rng = crate::rng::rng(seed);
                let d = self.objective.domain();
                Ok((uniform_point(d, &mut rng), uniform_point(d, &mut rng)))
            }
            Baseline::Manual => {
                let human = match &cfg.human {
                    HumanSource::Synthetic(h) => *h,
                    HumanSource::Interactive { .. } => {
                        return Err(Error::State("manual baseline needs a synthetic human".into()))
                    }
                };
                let x = oracle::manual_proposal(&self.objective, &human, seed)?;
                Ok((x.clone(), x))
            }
            Baseline::Ucb => {
                let x = acquisition::maximize_af(
                    |x| acquisition::ucb(&self.gp, x, cfg.beta_sqrt),
                    &self.gp.domain,
                    acquisition::AF_RESTARTS,
                    seed,
                )?;
                Ok((x.clone(), x))
            }
            Baseline::Ts => {
                let x = acquisition::thompson_candidate(&self.gp, seed)?;
                Ok((x.clone(), x))
            }
            Baseline::PriorSampling => {
                let x = pref::sample_from_belief(self.belief()?, 1, seed)?.remove(0);
                Ok((x.clone(), x))
            }
            Baseline::BatchUcb => acquisition::batch_ucb(&self.gp, cfg.beta_sqrt, seed),
            Baseline::BatchTs => Ok((
                acquisition::thompson_candidate(&self.gp, derive(seed, &[1]))?,
                acquisition::thompson_candidate(&self.gp, derive(seed, &[2]))?,
            )),
            Baseline::Pibo => {
                let sc = self.belief()?;
                let x = acquisition::maximize_af(
                    |x| acquisition::pibo_af(&self.gp, sc, x, cfg.beta_sqrt, cfg.gamma_pibo, self.t),
                    &self.gp.domain,
                    acquisition::AF_RESTARTS,
                    seed,
                )?;
                Ok((x.clone(), x))
            }
            Baseline::CoexboPibo => {
                let sc = self.belief()?;
                acquisition::generate_pair_with(
                    &self.gp,
                    |x| acquisition::pibo_af(&self.gp, sc, x, cfg.beta_sqrt, cfg.gamma_pibo, self.t),
                    cfg.beta_sqrt,
                    seed,
                )
            }
            Baseline::Coexbo => acquisition::generate_pair(&self.gp, self.belief()?, &acq, self.y_stats(), seed),
        }
    }

    /// Generates the next pair (and its explanation) and waits for a choice.
    pub fn step_candidates(&mut self) -> Result<&PendingPair> {
        if self.phase != Phase::Ready {
            return Err(Error::State("a candidate pair is already awaiting a choice".into()));
        }
        if self.is_finished() {
            return Err(Error::State(format!("iteration budget of {} reached", self.config.iterations)));
        }
        let start = Instant::now();
        let (x1, x2) = self.propose()?;
        let explanation = match (&self.copeland, self.config.explain && self.config.baseline.uses_pairs()) {
            (Some(sc), true) => Some(explain::build_bundle(
                &self.gp,
                sc,
                &x1,
                &x2,
                self.incumbent(),
                self.config.beta_sqrt,
                self.last_feedback,
            )?),
            _ => None,
        };
        let gen_ms = if self.config.deterministic_timing { 0.0 } else { start.elapsed().as_secs_f64() * 1e3 };
        self.pending = Some(PendingPair { x1, x2, explanation, gen_ms, issued_at_ms: now_ms() });
        self.phase = Phase::AwaitingChoice;
        Ok(self.pending.as_ref().expect("just set"))
    }

    /// Records the pick for the pending pair, observes the chosen point and
    /// refits the models.
    pub fn apply_choice(&mut self, choice: u8) -> Result<ChoiceOutcome> {
        self.apply_choice_timed(choice, None)
    }

    fn apply_choice_timed(&mut self, choice: u8, human_ms: Option<f64>) -> Result<ChoiceOutcome> {
        if self.phase != Phase::AwaitingChoice {
            return Err(Error::State("no candidate pair is awaiting a choice".into()));
        }
        if choice != 1 && choice != 2 {
            return Err(Error::input(format!("choice must be 1 or 2, got {choice}")));
        }
        let pending = self.pending.clone().expect("awaiting choice implies a pending pair");
        let human_ms = match (self.config.deterministic_timing, human_ms) {
            (true, _) => 0.0,
            (false, Some(ms)) => ms,
            (false, None) => now_ms().saturating_sub(pending.issued_at_ms) as f64,
        };
        let (chosen, other) = if choice == 1 { (&pending.x1, &pending.x2) } else { (&pending.x2, &pending.x1) };
        let is_pair = self.config.baseline.uses_pairs();

        let y = oracle::observe(&self.objective, chosen, self.config.noise_var, self.seed("observe"))?;
        self.data.push(chosen.clone(), y);
        if is_pair {
            self.duels.push(DuelRecord { x1: pending.x1.clone(), x2: pending.x2.clone(), y_pref: u8::from(choice == 1) });
        }

        let truth = |x: &[f64]| oracle::eval_objective(&self.objective, x).ok();
        let f_chosen = truth(chosen);
        let selection_correct = if is_pair {
            match (f_chosen, truth(other)) {
                (Some(a), Some(b)) => Some(a >= b),
                _ => None,
            }
        } else {
            None
        };
        self.best_true = match (self.best_true, f_chosen) {
            (Some(b), Some(f)) => Some(b.max(f)),
            (b, f) => b.or(f),
        };

        self.refit_gp()?;
        if self.config.baseline.learns_preferences() {
            self.fit_belief(false)?;
        }
        let feedback = explain::selection_accuracy(&self.gp, chosen, other, self.config.n_mc, self.seed("feedback"))?;
        self.history.push(IterationRecord {
            t: self.t,
            x1: pending.x1.clone(),
            x2: pending.x2.clone(),
            choice,
            y,
            regret: self.regret_of(self.best_true),
            selection_correct,
            gen_ms: pending.gen_ms,
            human_ms,
            feedback: Some(feedback),
            explanation: pending.explanation.as_ref().map(|b| ExplanationSummary {
                top2: b.top2,
                af_phi: [b.candidates[0].af_shapley.phi.clone(), b.candidates[1].af_shapley.phi.clone()],
            }),
        });
        self.t += 1;
        self.last_feedback = Some(feedback);
        self.pending = None;
        self.phase = Phase::Ready;
        Ok(ChoiceOutcome { feedback, observed_y: y, t: self.t })
    }

    /// Lets the configured synthetic human answer the pending pair.
    pub fn synthetic_choice(&self) -> Result<u8> {
        let pending = self.pending.as_ref().ok_or_else(|| Error::State("no pending pair".into()))?;
        if !self.config.baseline.uses_pairs() {
            return Ok(1);
        }
        match &self.config.human {
            HumanSource::Synthetic(h) => {
                oracle::synthetic_select(&self.objective, &pending.x1, &pending.x2, h, self.seed("human"))
            }
            HumanSource::Interactive { .. } => Err(Error::State("interactive sessions take choices from the caller".into())),
        }
    }

    /// One full synthetic iteration.
    pub fn step_synthetic(&mut self) -> Result<&IterationRecord> {
        self.step_candidates()?;
        let start = Instant::now();
        let choice = self.synthetic_choice()?;
        let human_ms = start.elapsed().as_secs_f64() * 1e3;
        self.apply_choice_timed(choice, Some(human_ms))?;
        Ok(self.history.last().expect("just pushed"))
    }
}

/// Initial design, initial duels and fitted models; `t = 1`.
pub fn init_session(cfg: SessionConfig) -> Result<SessionState> {
    cfg.validate()?;
    let objective = cfg.objective.resolve()?;
    let domain = objective.domain().clone();
    let seed = cfg.seed;

    let sobol = Sobol::scrambled(domain.dim(), derive(seed, &[tag("init-design")]))?;
    let mut data = Dataset::default();
    for (k, u) in sobol.points(cfg.n_obj).into_iter().enumerate() {
        let x = domain.from_unit(&u);
        let y = oracle::observe(&objective, &x, cfg.noise_var, derive(seed, &[tag("init-observe"), k as u64]))?;
        data.push(x, y);
    }
    let best_true = data
        .x
        .iter()
        .filter_map(|x| oracle::eval_objective(&objective, x).ok())
        .fold(None, |b: Option<f64>, f| Some(b.map_or(f, |b| b.max(f))));

    let duels = match &cfg.human {
        HumanSource::Synthetic(h) => random_duels(&objective, h, cfg.n_pref, seed)?,
        HumanSource::Interactive { initial_duels, prior_human } => {
            let mut d = initial_duels.clone();
            if let Some(h) = prior_human {
                d.extend(random_duels(&objective, h, cfg.n_pref, seed)?);
            }
            d
        }
    };

    let gp = gp::fit_gp(&data, &domain, derive(seed, &[tag("gp"), 0]))?;
    let mut state = SessionState {
        schema_version: SCHEMA_VERSION,
        config: cfg,
        objective,
        t: 1,
        data,
        duels,
        gp,
        pref: None,
        copeland: None,
        history: Vec::new(),
        best_true,
        phase: Phase::Ready,
        pending: None,
        last_feedback: None,
    };
    if state.config.baseline.needs_belief() {
        state.fit_belief(true)?;
    }
    Ok(state)
}

/// `f(x*) − best noiseless value among queried points`.
pub fn simple_regret(state: &SessionState) -> Result<f64> {
    let opt = state
        .objective
        .optimum()
        .ok_or_else(|| Error::UnknownOptimum(state.objective.name().to_string()))?;
    let best = state.best_true.ok_or_else(|| Error::State("no evaluated points".into()))?;
    Ok(opt.value - best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub regret: f64,
    pub selection_correct: Option<bool>,
    pub gen_ms: f64,
    pub human_ms: f64,
}

/// Runs `cfg.iterations` synthetic iterations of `kind` and returns the
/// regret trace.
pub fn run_baseline(kind: Baseline, cfg: &SessionConfig) -> Result<Vec<TraceRow>> {
    let mut cfg = cfg.clone();
    cfg.baseline = kind;
    if matches!(cfg.human, HumanSource::Interactive { .. }) {
        return Err(Error::input("benchmarks need a synthetic human"));
    }
    let mut state = init_session(cfg)?;
    if state.objective.optimum().is_none() {
        return Err(Error::UnknownOptimum(state.objective.name().to_string()));
    }
    let mut rows = Vec::with_capacity(state.config.iterations);
    while !state.is_finished() {
        let rec = state.step_synthetic()?;
        rows.push(TraceRow {
            t: rec.t,
            regret: rec.regret.expect("optimum known"),
            selection_correct: rec.selection_correct,
            gen_ms: rec.gen_ms,
            human_ms: rec.human_ms,
        });
    }
    Ok(rows)
}
