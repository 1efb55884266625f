//! Benchmark harness: suites of (task, baseline, seed) runs written as CSV
//! traces, summaries of final regret, replay and sweeps.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use coexbo_core::engine::{run_baseline, Baseline, HumanSource, ObjectiveRef, SessionConfig, TraceRow};
use coexbo_core::oracle::{self, SyntheticHumanConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const TRACE_HEADER: [&str; 8] = ["task", "baseline", "seed", "t", "regret", "selection_correct", "gen_ms", "human_ms"];
pub const SUMMARY_HEADER: [&str; 5] = ["task", "baseline", "n_seeds", "final_regret_mean", "final_regret_stderr"];
pub const SWEEP_NPREF: [usize; 3] = [10, 100, 500];
pub const SWEEP_SIGMA: [f64; 3] = [0.1, 1.0, 100.0];

#[derive(Debug, Parser)]
#[command(name = "coexbo", version, about = "Collaborative explainable Bayesian optimization benchmarks and session server")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every (task, baseline, seed) combination and write traces plus a summary.
    Bench(BenchArgs),
    /// Repeat a bench over initial-duel counts and human noise levels, honest and adversarial.
    Sweep(SweepArgs),
    /// Recompute the summary of an output directory from its trace files.
    Replay(ReplayArgs),
    /// Serve the interactive session API.
    Serve(ServeArgs),
    /// Write a saved session's history and pending pair as JSON for the UI.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SuiteArgs {
    /// Comma-separated objective names.
    #[arg(long, default_value = "ackley")]
    pub task: String,
    /// Comma-separated baselines, or `all`.
    #[arg(long, default_value = "coexbo")]
    pub baseline: String,
    /// A count `N` (seeds 0..N), a range `a..b`, or a list `1,4,7`.
    #[arg(long, default_value = "10")]
    pub seeds: String,
    #[arg(long, default_value_t = 50)]
    pub iters: usize,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "config")]
    pub gamma: Option<f64>,
    /// Square-root exploration weight of UCB.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "config")]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub nobj: usize,
    /// JSON session config used as the template for every run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Record zero durations so output files are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[arg(long, conflicts_with = "config")]
    pub npref: Option<usize>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "config")]
    pub sigma_pref: Option<f64>,
    #[arg(long, conflicts_with = "config")]
    pub adversarial: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    /// Comma-separated initial-duel counts.
    #[arg(long, default_value = "10,100,500")]
    pub npref: String,
    /// Comma-separated synthetic-human noise variances.
    #[arg(long, default_value = "0.1,1,100")]
    pub sigma_pref: String,
    /// Also run every setting with an adversarial human.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub adversarial: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Compare with the existing summary.csv and fail on any difference.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Defaults to $COEXBO_BIND, then 127.0.0.1:8080.
    #[arg(long)]
    pub bind: Option<String>,
    /// Defaults to $COEXBO_DATA_DIR, then ./coexbo-data.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub session: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A fully resolved benchmark suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub tasks: Vec<String>,
    pub baselines: Vec<Baseline>,
    pub seeds: Vec<u64>,
    /// Shared settings; objective, baseline and seed are filled in per run.
    pub template: SessionConfig,
    pub jobs: Option<usize>,
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect()
}

pub fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    let s = s.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        (a..b).collect()
    } else if s.contains(',') {
        split_list(s).into_iter().map(str::parse).collect::<Result<_, _>>()?
    } else {
        (0..s.parse::<u64>().context("seeds must be a count, a range a..b or a list")?).collect()
    };
    if seeds.is_empty() {
        bail!("no seeds selected");
    }
    if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
        bail!("seeds must be distinct");
    }
    Ok(seeds)
}

pub fn parse_baselines(s: &str) -> anyhow::Result<Vec<Baseline>> {
    if s.trim() == "all" {
        return Ok(Baseline::ALL.to_vec());
    }
    let out: Vec<Baseline> = split_list(s).into_iter().map(Baseline::parse).collect::<Result<_, _>>()?;
    if out.is_empty() {
        bail!("no baselines selected");
    }
    Ok(out)
}

fn parse_tasks(s: &str) -> anyhow::Result<Vec<String>> {
    let tasks: Vec<String> = split_list(s).into_iter().map(String::from).collect();
    if tasks.is_empty() {
        bail!("no tasks selected");
    }
    for t in &tasks {
        oracle::preset(t)?;
    }
    Ok(tasks)
}

impl SuiteSpec {
    fn from_suite(a: &SuiteArgs, npref: Option<usize>, human: Option<SyntheticHumanConfig>) -> anyhow::Result<Self> {
        let mut template = match &a.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => SessionConfig::new(ObjectiveRef::Preset("ackley".into()), Baseline::Coexbo, 0),
        };
        template.iterations = a.iters;
        template.n_obj = a.nobj;
        template.explain = false;
        template.deterministic_timing = a.no_timing;
        if let Some(g) = a.gamma {
            template.gamma = g;
        }
        if let Some(b) = a.beta {
            template.beta_sqrt = b;
        }
        if let Some(n) = npref {
            template.n_pref = n;
        }
        if let Some(h) = human {
            template.human = HumanSource::Synthetic(h);
        }
        let spec = SuiteSpec {
            tasks: parse_tasks(&a.task)?,
            baselines: parse_baselines(&a.baseline)?,
            seeds: parse_seeds(&a.seeds)?,
            template,
            jobs: a.jobs,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_bench(a: &BenchArgs) -> anyhow::Result<Self> {
        let human = (a.sigma_pref.is_some() || a.adversarial).then(|| SyntheticHumanConfig {
            sigma_pref_sq: a.sigma_pref.unwrap_or(0.1),
            adversarial: a.adversarial,
        });
        Self::from_suite(&a.suite, a.npref, human)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if matches!(self.template.human, HumanSource::Interactive { .. }) {
            bail!("benchmarks need a synthetic human");
        }
        if self.jobs == Some(0) {
            bail!("--jobs must be at least 1");
        }
        for task in &self.tasks {
            if oracle::preset(task)?.optimum().is_none() {
                bail!("task '{task}' has no known optimum, so regret is undefined");
            }
        }
        let probe = self.config_for(&self.tasks[0], self.baselines[0], self.seeds[0]);
        let problems = probe.problems();
        if !problems.is_empty() {
            let msg: Vec<String> = problems.iter().map(|(f, m)| format!("{f}: {m}")).collect();
            bail!("invalid settings: {}", msg.join("; "));
        }
        Ok(())
    }

    pub fn config_for(&self, task: &str, baseline: Baseline, seed: u64) -> SessionConfig {
        let mut cfg = self.template.clone();
        cfg.objective = ObjectiveRef::Preset(task.to_string());
        cfg.baseline = baseline;
        cfg.seed = seed;
        cfg
    }

    pub fn jobs(&self) -> Vec<(String, Baseline, u64)> {
        let mut out = Vec::new();
        for t in &self.tasks {
            for &b in &self.baselines {
                for &s in &self.seeds {
                    out.push((t.clone(), b, s));
                }
            }
        }
        out
    }
}

pub fn trace_path(out: &Path, task: &str, baseline: &str, seed: u64) -> PathBuf {
    out.join(task).join(baseline).join(format!("seed{seed}.csv"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub task: String,
    pub baseline: String,
    pub seed: u64,
    pub t: usize,
    pub regret: f64,
    pub selection_correct: Option<bool>,
    pub gen_ms: f64,
    pub human_ms: f64,
}

pub fn write_trace(path: &Path, task: &str, baseline: Baseline, seed: u64, rows: &[TraceRow]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(TraceRecord {
            task: task.to_string(),
            baseline: baseline.name().to_string(),
            seed,
            t: r.t,
            regret: r.regret,
            selection_correct: r.selection_correct,
            gen_ms: r.gen_ms,
            human_ms: r.human_ms,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> anyhow::Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != TRACE_HEADER {
        bail!("{}: unexpected header {:?}", path.display(), header);
    }
    let rows = r.deserialize().collect::<Result<Vec<TraceRecord>, _>>()?;
    if rows.is_empty() {
        bail!("{}: empty trace", path.display());
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub baseline: String,
    pub n_seeds: usize,
    pub final_regret_mean: f64,
    pub final_regret_stderr: f64,
}

/// Mean and standard error (sample std / √n; 0 for a single value).
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Summary rows ordered by task then baseline; seeds enter in ascending order.
pub fn summarize(finals: &BTreeMap<(String, String), BTreeMap<u64, f64>>) -> Vec<SummaryRow> {
    finals
        .iter()
        .map(|((task, baseline), by_seed)| {
            let v: Vec<f64> = by_seed.values().copied().collect();
            let (m, s) = mean_stderr(&v);
            SummaryRow { task: task.clone(), baseline: baseline.clone(), n_seeds: v.len(), final_regret_mean: m, final_regret_stderr: s }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub task: String,
    pub baseline: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub completed: usize,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub summary: Vec<SummaryRow>,
    pub manifest: Manifest,
}

/// Runs the suite, writing `{out}/{task}/{baseline}/seed{k}.csv`,
/// `{out}/summary.csv` and `{out}/manifest.json`. Failed runs are listed in the
/// manifest; the other runs are still written.
pub fn run_suite(spec: &SuiteSpec, out: &Path) -> anyhow::Result<SuiteReport> {
    spec.validate()?;
    fs::create_dir_all(out)?;
    let jobs = spec.jobs();
    let work = |(task, baseline, seed): &(String, Baseline, u64)| -> Result<f64, String> {
        let rows = run_baseline(*baseline, &spec.config_for(task, *baseline, *seed)).map_err(|e| e.to_string())?;
        write_trace(&trace_path(out, task, baseline.name(), *seed), task, *baseline, *seed, &rows)
            .map_err(|e| e.to_string())?;
        tracing::info!(task, baseline = baseline.name(), seed, "run finished");
        Ok(rows.last().map_or(f64::NAN, |r| r.regret))
    };
    let results: Vec<Result<f64, String>> = match spec.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(|| jobs.par_iter().map(work).collect()),
        None => jobs.par_iter().map(work).collect(),
    };

    let mut finals: BTreeMap<(String, String), BTreeMap<u64, f64>> = BTreeMap::new();
    let mut failures = Vec::new();
    for ((task, baseline, seed), res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => {
                finals.entry((task.clone(), baseline.name().to_string())).or_default().insert(*seed, r);
            }
            Err(error) => {
                tracing::error!(task, baseline = baseline.name(), seed, %error, "run failed");
                failures.push(Failure { task: task.clone(), baseline: baseline.name().into(), seed: *seed, error });
            }
        }
    }
    let summary = summarize(&finals);
    fs::write(out.join("summary.csv"), summary_csv(&summary)?)?;
    let manifest = Manifest { completed: jobs.len() - failures.len(), failures };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(SuiteReport { summary, manifest })
}

/// Summary text recomputed from every trace file under `out`.
pub fn replay(out: &Path) -> anyhow::Result<String> {
    let mut finals: BTreeMap<(String, String), BTreeMap<u64, f64>> = BTreeMap::new();
    for task_dir in sorted_dirs(out)? {
        for base_dir in sorted_dirs(&task_dir)? {
            for entry in fs::read_dir(&base_dir)? {
                let path = entry?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("csv") {
                    continue;
                }
                let rows = read_trace(&path)?;
                let last = rows.last().expect("nonempty");
                finals.entry((last.task.clone(), last.baseline.clone())).or_default().insert(last.seed, last.regret);
            }
        }
    }
    if finals.is_empty() {
        bail!("no trace files under {}", out.display());
    }
    summary_csv(&summarize(&finals))
}

fn sorted_dirs(p: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(p)
        .with_context(|| format!("reading {}", p.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn fmt_sigma(s: f64) -> String {
    format!("{s}")
}

/// Output directory name of one sweep setting.
pub fn sweep_variant(n_pref: usize, sigma: f64, adversarial: bool) -> String {
    format!("npref{n_pref}_sigma{}{}", fmt_sigma(sigma), if adversarial { "_adv" } else { "" })
}

/// Runs one suite per sweep setting under `{out}/{variant}/` and writes
/// `{out}/sweep_summary.csv` with a leading `variant` column.
pub fn run_sweep(a: &SweepArgs) -> anyhow::Result<Vec<Manifest>> {
    let npref: Vec<usize> = split_list(&a.npref).into_iter().map(str::parse).collect::<Result<_, _>>()?;
    let sigma: Vec<f64> = split_list(&a.sigma_pref).into_iter().map(str::parse).collect::<Result<_, _>>()?;
    if npref.is_empty() || sigma.is_empty() {
        bail!("sweep axes must be non-empty");
    }
    let mut adv = vec![false];
    if a.adversarial {
        adv.push(true);
    }
    let mut text = String::from("variant,");
    text.push_str(&SUMMARY_HEADER.join(","));
    text.push('\n');
    let mut manifests = Vec::new();
    for &n in &npref {
        for &s in &sigma {
            for &adversarial in &adv {
                let human = SyntheticHumanConfig { sigma_pref_sq: s, adversarial };
                let spec = SuiteSpec::from_suite(&a.suite, Some(n), Some(human))?;
                let variant = sweep_variant(n, s, adversarial);
                let report = run_suite(&spec, &a.suite.out.join(&variant))?;
                for line in summary_csv(&report.summary)?.lines().skip(1) {
                    text.push_str(&format!("{variant},{line}\n"));
                }
                manifests.push(report.manifest);
            }
        }
    }
    fs::write(a.suite.out.join("sweep_summary.csv"), text)?;
    Ok(manifests)
}

#[derive(Debug, Serialize)]
pub struct SessionExport<'a> {
    pub config: &'a SessionConfig,
    pub t: usize,
    pub phase: coexbo_core::engine::Phase,
    pub history: &'a [coexbo_core::engine::IterationRecord],
    pub pending: Option<&'a coexbo_core::engine::PendingPair>,
}

pub fn export_session(session: &Path) -> anyhow::Result<String> {
    let s = coexbo_core::engine::load_session(session)?;
    let e = SessionExport { config: &s.config, t: s.t, phase: s.phase, history: &s.history, pending: s.pending.as_ref() };
    Ok(serde_json::to_string_pretty(&e)?)
}
