//! Seeded experiment sweeps over task seeds, with CSV persistence.
//!
//! An experiment is a pure function of its [`ExperimentSpec`]: task seed `i`
//! is `spec.seed + i`, every environment is drawn from substreams of that
//! task seed, and rows are sorted before they are written, so reruns and
//! runs with different worker counts produce identical files.

mod config;
mod results;

pub use config::{parse_config, RunConfig, GLOBAL_KEYS};

pub use results::{
    format_float, parse_e, parse_kappa, read_results, sort_rows, summarize, write_results,
    write_summaries, ResultRow, Summary, NOT_APPLICABLE, ROW_HEADER, SUMMARY_HEADER,
};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algo::{
    independent_baseline, pavg_train, qavg_train, Algorithm, FedConfig, LocalUpdates, Model,
    ScheduleSpec, TrainTrace,
};
use crate::checks::{run_suite, Suite};
use crate::env::{
    interpolate_task, kappa1, kappa2_estimate, make_random_task, make_windy_cliff,
    make_windy_cliff_task, random_transitions, wind_draws, FederatedTask, TransitionMode,
};
use crate::error::{Error, Result};
use crate::mdp::{value_at, StateDistribution, StochasticPolicy, TabularMdp};
use crate::rng::{substream, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Train on interpolated tasks and evaluate on the base environment.
    KappaSweep,
    /// Training traces across communication periods.
    ESweep,
    /// Evaluate trained policies on freshly drawn environments.
    Generalization,
    /// Federated training against agents that never communicate.
    BaselineCompare,
    /// Numerical property suites.
    TheoremChecks,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::KappaSweep => "kappa_sweep",
            ExperimentKind::ESweep => "e_sweep",
            ExperimentKind::Generalization => "generalization",
            ExperimentKind::BaselineCompare => "baseline_compare",
            ExperimentKind::TheoremChecks => "theorem_checks",
        }
    }
}

fn default_num_states() -> usize {
    8
}
fn default_num_actions() -> usize {
    4
}
fn default_mode() -> TransitionMode {
    TransitionMode::Dirichlet
}
fn default_random_gamma() -> f64 {
    0.9
}
fn default_theta_high() -> f64 {
    1.0
}
fn default_windy_gamma() -> f64 {
    0.95
}

/// Environment family a task is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    RandomMdp {
        #[serde(default = "default_num_states")]
        num_states: usize,
        #[serde(default = "default_num_actions")]
        num_actions: usize,
        #[serde(default = "default_mode")]
        mode: TransitionMode,
        #[serde(default = "default_random_gamma")]
        gamma: f64,
    },
    WindyCliff {
        #[serde(default)]
        theta_low: f64,
        #[serde(default = "default_theta_high")]
        theta_high: f64,
        #[serde(default = "default_windy_gamma")]
        gamma: f64,
    },
}

impl Default for Family {
    fn default() -> Self {
        Family::RandomMdp {
            num_states: default_num_states(),
            num_actions: default_num_actions(),
            mode: default_mode(),
            gamma: default_random_gamma(),
        }
    }
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Qavg]
}
fn default_e_list() -> Vec<LocalUpdates> {
    vec![LocalUpdates::Every(1)]
}
fn default_n() -> usize {
    5
}
fn default_num_task_seeds() -> u64 {
    500
}
fn default_qavg_iters() -> u64 {
    5000
}
fn default_pavg_iters() -> u64 {
    2000
}
fn default_record_every() -> u64 {
    100
}
fn default_novel_env_count() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Value of the `experiment` column; defaults to the kind's name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub family: Family,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_e_list")]
    pub e_list: Vec<LocalUpdates>,
    /// Interpolation levels; empty means tasks are used as drawn.
    #[serde(default)]
    pub kappa_list: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_num_task_seeds")]
    pub num_task_seeds: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_qavg_iters")]
    pub qavg_iters: u64,
    #[serde(default = "default_pavg_iters")]
    pub pavg_iters: u64,
    /// Step sizes for every algorithm; each algorithm's default when absent.
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    /// Evaluation and training initial distribution; the family default
    /// (uniform for random MDPs, the start cell for WindyCliff) when absent.
    #[serde(default)]
    pub d0: Option<Vec<f64>>,
    #[serde(default = "default_novel_env_count")]
    pub novel_env_count: usize,
    /// Policy samples for the kappa2 estimate in kappa sweeps; 0 skips it.
    #[serde(default)]
    pub kappa2_samples: usize,
    /// Also evaluate non-communicating agents in generalization runs.
    #[serde(default)]
    pub include_baseline: bool,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            name: None,
            family: Family::default(),
            algorithms: default_algorithms(),
            e_list: default_e_list(),
            kappa_list: Vec::new(),
            n: default_n(),
            num_task_seeds: default_num_task_seeds(),
            seed: 0,
            qavg_iters: default_qavg_iters(),
            pavg_iters: default_pavg_iters(),
            schedule: None,
            record_every: default_record_every(),
            d0: None,
            novel_env_count: default_novel_env_count(),
            kappa2_samples: 0,
            include_baseline: false,
        }
    }

    pub fn experiment_name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.name())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.kind != ExperimentKind::TheoremChecks {
            if self.algorithms.is_empty() {
                return bad("algorithms must not be empty".into());
            }
            if self.e_list.is_empty() {
                return bad("e_list must not be empty".into());
            }
        }
        if self.kind == ExperimentKind::KappaSweep && self.kappa_list.is_empty() {
            return bad("kappa_sweep needs a nonempty kappa_list".into());
        }
        if let Some(k) = self.kappa_list.iter().find(|k| !(0.0..=1.0).contains(*k)) {
            return bad(format!("kappa values must lie in [0, 1], got {k}"));
        }
        if self.num_task_seeds == 0 {
            return bad("num_task_seeds must be at least 1".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.qavg_iters == 0 || self.pavg_iters == 0 {
            return bad("iteration counts must be at least 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if self.kind == ExperimentKind::Generalization && self.novel_env_count == 0 {
            return bad("novel_env_count must be at least 1".into());
        }
        if let Some(schedule) = &self.schedule {
            schedule.validate()?;
        }
        if let Some(d0) = &self.d0 {
            StateDistribution::new(d0.clone())?;
        }
        Ok(())
    }

    fn config(&self, algorithm: Algorithm, e: LocalUpdates, task_seed: u64) -> FedConfig {
        let iters = match algorithm {
            Algorithm::Qavg => self.qavg_iters,
            _ => self.pavg_iters,
        };
        let mut cfg = FedConfig::new(algorithm, e, iters).with_record_every(self.record_every);
        if let Some(schedule) = self.schedule {
            cfg = cfg.with_schedule(schedule);
        }
        cfg.seed = task_seed;
        cfg
    }
}

/// Environments drawn for one task seed: the base environment `P_0`, the
/// noise environments and the recipe for novel environments.
#[derive(Debug, Clone)]
pub struct TaskDraw {
    pub task_seed: u64,
    pub base: TabularMdp,
    pub noises: Vec<TabularMdp>,
    pub d0: StateDistribution,
    family: Family,
}

impl TaskDraw {
    pub fn new(spec: &ExperimentSpec, task_seed: u64) -> Result<Self> {
        let n = spec.n;
        let (base, noises, default_d0) = match spec.family {
            Family::RandomMdp {
                num_states,
                num_actions,
                mode,
                gamma,
            } => {
                let raw = make_random_task(task_seed, n + 1, num_states, num_actions, gamma, mode)?;
                let d0 = raw.d0().clone();
                let mut envs = raw.envs().to_vec();
                let noises = envs.split_off(1);
                (envs.pop().expect("n + 1 envs"), noises, d0)
            }
            Family::WindyCliff {
                theta_low,
                theta_high,
                gamma,
            } => {
                let raw = make_windy_cliff_task(task_seed, n, theta_low, theta_high, gamma)?;
                (
                    make_windy_cliff(0.0, gamma)?,
                    raw.envs().to_vec(),
                    raw.d0().clone(),
                )
            }
        };
        let d0 = match &spec.d0 {
            Some(p) => StateDistribution::new(p.clone())?,
            None => default_d0,
        };
        if d0.probs().len() != base.num_states() {
            return Err(Error::Config(format!(
                "d0 has {} entries but the family has {} states",
                d0.probs().len(),
                base.num_states()
            )));
        }
        Ok(TaskDraw {
            task_seed,
            base,
            noises,
            d0,
            family: spec.family,
        })
    }

    /// The noise environments as drawn (`kappa = None`) or interpolated
    /// towards the base.
    pub fn task(&self, kappa: Option<f64>) -> Result<FederatedTask> {
        match kappa {
            Some(k) => interpolate_task(&self.base, &self.noises, k, self.d0.clone()),
            None => FederatedTask::new(self.noises.clone(), self.d0.clone()),
        }
    }

    /// `count` fresh environments from the same family, interpolated like
    /// the training task. They come from substreams the training draw never
    /// touches.
    pub fn novel_envs(&self, count: usize, kappa: Option<f64>) -> Result<Vec<TabularMdp>> {
        let fresh: Vec<TabularMdp> = match self.family {
            Family::RandomMdp {
                num_states,
                num_actions,
                mode,
                ..
            } => (0..count)
                .map(|m| {
                    let mut rng = substream(self.task_seed, tags::NOVEL_TRANSITION, m as u64);
                    self.base.with_transitions(random_transitions(
                        &mut rng,
                        num_states,
                        num_actions,
                        mode,
                    ))
                })
                .collect::<Result<_>>()?,
            Family::WindyCliff {
                theta_low,
                theta_high,
                gamma,
            } => wind_draws(
                self.task_seed,
                tags::NOVEL_WIND,
                count,
                theta_low,
                theta_high,
            )?
            .into_iter()
            .map(|theta| make_windy_cliff(theta, gamma))
            .collect::<Result<_>>()?,
        };
        match kappa {
            Some(k) => Ok(interpolate_task(&self.base, &fresh, k, self.d0.clone())?
                .envs()
                .to_vec()),
            None => Ok(fresh),
        }
    }
}

pub fn train(task: &FederatedTask, config: &FedConfig) -> Result<TrainTrace> {
    match config.algorithm {
        Algorithm::Qavg => qavg_train(task, config),
        Algorithm::ProjPavg | Algorithm::SoftPavg => pavg_train(task, config),
    }
}

fn final_policy(trace: &TrainTrace) -> StochasticPolicy {
    trace
        .aggregate
        .as_ref()
        .expect("federated runs return an aggregate")
        .policy()
}

fn baseline_name(algorithm: Algorithm) -> String {
    format!("{algorithm}_baseline")
}

/// Row builder for one `(seed, algorithm, E, kappa)` cell.
struct Cell<'a> {
    experiment: &'a str,
    task_seed: u64,
    algorithm: String,
    e: Option<LocalUpdates>,
    kappa: Option<f64>,
}

impl Cell<'_> {
    fn row(&self, iter: u64, metric: impl Into<String>, value: f64) -> ResultRow {
        ResultRow {
            experiment: self.experiment.to_string(),
            task_seed: self.task_seed,
            algorithm: self.algorithm.clone(),
            e: self.e,
            kappa: self.kappa,
            iter,
            metric: metric.into(),
            value,
        }
    }
}

fn kappa_levels(spec: &ExperimentSpec) -> Vec<Option<f64>> {
    if spec.kappa_list.is_empty() {
        vec![None]
    } else {
        spec.kappa_list.iter().map(|&k| Some(k)).collect()
    }
}

fn trace_rows(cell: &Cell, trace: &TrainTrace, out: &mut Vec<ResultRow>) {
    for r in &trace.records {
        out.push(cell.row(r.iter, "objective", r.objective));
        if let Some(gap) = r.q_gap {
            out.push(cell.row(r.iter, "q_gap", gap));
        }
        if let Some(g) = r.grad_map_norm {
            out.push(cell.row(r.iter, "grad_map_norm", g));
        }
    }
}

fn kappa_sweep_seed(spec: &ExperimentSpec, draw: &TaskDraw) -> Result<Vec<ResultRow>> {
    let name = spec.experiment_name();
    let mut out = Vec::new();
    for kappa in kappa_levels(spec) {
        let task = draw.task(kappa)?;
        let meta = Cell {
            experiment: name,
            task_seed: draw.task_seed,
            algorithm: NOT_APPLICABLE.into(),
            e: None,
            kappa,
        };
        out.push(meta.row(0, "kappa1", kappa1(&task)));
        if spec.kappa2_samples > 0 {
            out.push(meta.row(
                0,
                "kappa2_estimate",
                kappa2_estimate(&task, spec.kappa2_samples, draw.task_seed)?,
            ));
        }
        for &algorithm in &spec.algorithms {
            for &e in &spec.e_list {
                let trace = train(&task, &spec.config(algorithm, e, draw.task_seed))?;
                let cell = Cell {
                    algorithm: algorithm.to_string(),
                    e: Some(e),
                    ..meta
                };
                let iter = trace.last().iter;
                let policy = final_policy(&trace);
                out.push(cell.row(iter, "p0_value", value_at(&draw.base, &policy, &draw.d0)?));
                out.push(cell.row(iter, "objective", trace.final_objective()));
            }
        }
    }
    Ok(out)
}

fn e_sweep_seed(spec: &ExperimentSpec, draw: &TaskDraw) -> Result<Vec<ResultRow>> {
    let mut out = Vec::new();
    for kappa in kappa_levels(spec) {
        let task = draw.task(kappa)?;
        for &algorithm in &spec.algorithms {
            for &e in &spec.e_list {
                let trace = train(&task, &spec.config(algorithm, e, draw.task_seed))?;
                let cell = Cell {
                    experiment: spec.experiment_name(),
                    task_seed: draw.task_seed,
                    algorithm: algorithm.to_string(),
                    e: Some(e),
                    kappa,
                };
                trace_rows(&cell, &trace, &mut out);
            }
        }
    }
    Ok(out)
}

fn novel_rows(
    cell: &Cell,
    iter: u64,
    policies: &[StochasticPolicy],
    novel: &[TabularMdp],
    d0: &StateDistribution,
    out: &mut Vec<ResultRow>,
) -> Result<()> {
    let mut total = 0.0;
    for (m, env) in novel.iter().enumerate() {
        // average over the policies being evaluated (one for federated runs)
        let mut value = 0.0;
        for policy in policies {
            value += value_at(env, policy, d0)?;
        }
        value /= policies.len() as f64;
        total += value;
        out.push(cell.row(iter, format!("novel_value_{m}"), value));
    }
    out.push(cell.row(iter, "novel_value_mean", total / novel.len() as f64));
    Ok(())
}

fn generalization_seed(spec: &ExperimentSpec, draw: &TaskDraw) -> Result<Vec<ResultRow>> {
    let mut out = Vec::new();
    for kappa in kappa_levels(spec) {
        let task = draw.task(kappa)?;
        let novel = draw.novel_envs(spec.novel_env_count, kappa)?;
        for &algorithm in &spec.algorithms {
            for &e in &spec.e_list {
                let cfg = spec.config(algorithm, e, draw.task_seed);
                let trace = train(&task, &cfg)?;
                let cell = Cell {
                    experiment: spec.experiment_name(),
                    task_seed: draw.task_seed,
                    algorithm: algorithm.to_string(),
                    e: Some(e),
                    kappa,
                };
                novel_rows(
                    &cell,
                    trace.last().iter,
                    &[final_policy(&trace)],
                    &novel,
                    &draw.d0,
                    &mut out,
                )?;
            }
            if spec.include_baseline {
                let cfg = spec.config(algorithm, LocalUpdates::Infinite, draw.task_seed);
                let trace = independent_baseline(&task, &cfg)?;
                let policies: Vec<StochasticPolicy> =
                    trace.agents.iter().map(Model::policy).collect();
                let cell = Cell {
                    experiment: spec.experiment_name(),
                    task_seed: draw.task_seed,
                    algorithm: baseline_name(algorithm),
                    e: None,
                    kappa,
                };
                novel_rows(
                    &cell,
                    trace.last().iter,
                    &policies,
                    &novel,
                    &draw.d0,
                    &mut out,
                )?;
            }
        }
    }
    Ok(out)
}

fn baseline_compare_seed(spec: &ExperimentSpec, draw: &TaskDraw) -> Result<Vec<ResultRow>> {
    let mut out = Vec::new();
    for kappa in kappa_levels(spec) {
        let task = draw.task(kappa)?;
        for &algorithm in &spec.algorithms {
            let cell = |name: String, e| Cell {
                experiment: spec.experiment_name(),
                task_seed: draw.task_seed,
                algorithm: name,
                e,
                kappa,
            };
            for &e in &spec.e_list {
                let trace = train(&task, &spec.config(algorithm, e, draw.task_seed))?;
                let c = cell(algorithm.to_string(), Some(e));
                for r in &trace.records {
                    out.push(c.row(r.iter, "objective", r.objective));
                }
            }
            let cfg = spec.config(algorithm, LocalUpdates::Infinite, draw.task_seed);
            let trace = independent_baseline(&task, &cfg)?;
            let c = cell(baseline_name(algorithm), None);
            for r in &trace.records {
                out.push(c.row(r.iter, "objective", r.objective));
            }
        }
    }
    Ok(out)
}

fn theorem_check_rows(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let cell = Cell {
        experiment: spec.experiment_name(),
        task_seed: spec.seed,
        algorithm: NOT_APPLICABLE.into(),
        e: None,
        kappa: None,
    };
    let mut out = Vec::new();
    for check in run_suite(Suite::All, spec.seed)? {
        out.push(cell.row(
            0,
            format!("{}_passed", check.name),
            if check.passed { 1.0 } else { 0.0 },
        ));
        if check.worst_slack.is_finite() {
            out.push(cell.row(0, format!("{}_worst_slack", check.name), check.worst_slack));
        }
    }
    Ok(out)
}

fn run_seed(spec: &ExperimentSpec, task_seed: u64) -> Result<Vec<ResultRow>> {
    let draw = TaskDraw::new(spec, task_seed)?;
    match spec.kind {
        ExperimentKind::KappaSweep => kappa_sweep_seed(spec, &draw),
        ExperimentKind::ESweep => e_sweep_seed(spec, &draw),
        ExperimentKind::Generalization => generalization_seed(spec, &draw),
        ExperimentKind::BaselineCompare => baseline_compare_seed(spec, &draw),
        ExperimentKind::TheoremChecks => unreachable!("handled by run_experiment"),
    }
}

/// Runs every task seed of `spec` on up to `workers` threads (`0` lets the
/// pool pick) and returns rows sorted by the composite key.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut rows = if spec.kind == ExperimentKind::TheoremChecks {
        theorem_check_rows(spec)?
    } else {
        let seeds: Vec<u64> = (0..spec.num_task_seeds).map(|i| spec.seed + i).collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
        let per_seed: Vec<Result<Vec<ResultRow>>> =
            pool.install(|| seeds.par_iter().map(|&s| run_seed(spec, s)).collect());
        let mut rows = Vec::new();
        for chunk in per_seed {
            rows.extend(chunk?);
        }
        rows
    };
    sort_rows(&mut rows);
    Ok(rows)
}

/// Row and summary files an experiment writes into `dir`.
pub fn output_paths(spec: &ExperimentSpec, dir: &Path) -> (PathBuf, PathBuf) {
    let name = spec.experiment_name();
    (
        dir.join(format!("{name}.csv")),
        dir.join(format!("{name}_summary.csv")),
    )
}

/// Writes the rows and their summary; returns the summary.
pub fn write_experiment(
    spec: &ExperimentSpec,
    rows: &[ResultRow],
    dir: &Path,
) -> Result<Vec<Summary>> {
    let (rows_path, summary_path) = output_paths(spec, dir);
    write_results(rows, &rows_path)?;
    let summaries = if rows.is_empty() {
        Vec::new()
    } else {
        summarize(rows)?
    };
    write_summaries(&summaries, &summary_path)?;
    Ok(summaries)
}

/// Aligned plain-text table of summaries, one line per group.
pub fn format_summary_table(summaries: &[Summary]) -> String {
    let header = [
        "experiment",
        "algorithm",
        "E",
        "kappa",
        "metric",
        "mean",
        "stderr",
        "count",
    ];
    let body: Vec<[String; 8]> = summaries
        .iter()
        .map(|s| {
            [
                s.experiment.clone(),
                s.algorithm.clone(),
                s.e.map_or_else(|| NOT_APPLICABLE.to_string(), |e| e.to_string()),
                s.kappa
                    .map_or_else(|| NOT_APPLICABLE.to_string(), |k| k.to_string()),
                s.metric.clone(),
                format!("{:.6}", s.mean),
                format!("{:.6}", s.stderr),
                s.count.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for line in &body {
        for (w, cell) in widths.iter_mut().zip(line) {
            *w = (*w).max(cell.len());
        }
    }
    let render = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i >= 5 {
                    format!("{c:>w$}")
                } else {
                    format!("{c:<w$}")
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = render(header.to_vec());
    out.push('\n');
    for line in &body {
        out.push_str(&render(line.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(kind);
        spec.family = Family::RandomMdp {
            num_states: 4,
            num_actions: 2,
            mode: TransitionMode::Dirichlet,
            gamma: 0.9,
        };
        spec.num_task_seeds = 2;
        spec.n = 3;
        spec.qavg_iters = 50;
        spec.pavg_iters = 20;
        spec.record_every = 10;
        spec
    }

    #[test]
    fn spec_parses_with_defaults() {
        let spec: ExperimentSpec = serde_json::from_str(r#"{"kind": "e_sweep"}"#).unwrap();
        assert_eq!(spec, ExperimentSpec::new(ExperimentKind::ESweep));
        let spec: ExperimentSpec = serde_json::from_str(
            r#"{"kind": "kappa_sweep", "family": {"type": "windy_cliff", "theta_high": 0.5},
                "e_list": [1, "inf"], "kappa_list": [0, 0.5]}"#,
        )
        .unwrap();
        assert_eq!(
            spec.family,
            Family::WindyCliff {
                theta_low: 0.0,
                theta_high: 0.5,
                gamma: 0.95
            }
        );
        assert_eq!(
            spec.e_list,
            vec![LocalUpdates::Every(1), LocalUpdates::Infinite]
        );
        let err = serde_json::from_str::<ExperimentSpec>(r#"{"kind": "e_sweep", "foo": 1}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("foo"), "{err}");
        let err = serde_json::from_str::<ExperimentSpec>(
            r#"{"kind": "e_sweep", "family": {"type": "random_mdp", "states": 3}}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("states"), "{err}");
    }

    #[test]
    fn validation() {
        let spec = small(ExperimentKind::KappaSweep);
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
        let mut spec = small(ExperimentKind::ESweep);
        spec.kappa_list = vec![1.5];
        assert!(spec.validate().is_err());
        let mut spec = small(ExperimentKind::ESweep);
        spec.d0 = Some(vec![1.0, 0.0]);
        assert!(run_experiment(&spec, 1).is_err());
    }

    #[test]
    fn zero_kappa_task_is_copies_of_the_base() {
        let spec = small(ExperimentKind::KappaSweep);
        let draw = TaskDraw::new(&spec, 3).unwrap();
        let task = draw.task(Some(0.0)).unwrap();
        assert_eq!(task.n(), 3);
        for env in task.envs() {
            assert_eq!(env, &draw.base);
        }
        assert_eq!(kappa1(&task), 0.0);
    }

    #[test]
    fn novel_envs_are_fresh() {
        let spec = small(ExperimentKind::Generalization);
        let draw = TaskDraw::new(&spec, 3).unwrap();
        let novel = draw.novel_envs(4, None).unwrap();
        assert_eq!(novel.len(), 4);
        for env in &novel {
            assert_eq!(env.rewards(), draw.base.rewards());
            assert!(draw
                .noises
                .iter()
                .all(|e| e.transitions() != env.transitions()));
        }
        assert_eq!(novel, draw.novel_envs(4, None).unwrap());
        let mut windy = small(ExperimentKind::Generalization);
        windy.family = Family::WindyCliff {
            theta_low: 0.0,
            theta_high: 1.0,
            gamma: 0.95,
        };
        let draw = TaskDraw::new(&windy, 3).unwrap();
        assert_eq!(draw.novel_envs(2, Some(0.5)).unwrap().len(), 2);
    }

    #[test]
    fn generalization_row_accounting() {
        let mut spec = small(ExperimentKind::Generalization);
        spec.novel_env_count = 3;
        let rows = run_experiment(&spec, 1).unwrap();
        assert_eq!(rows.len(), 2 * 3 + 2);
    }

    #[test]
    fn baseline_rows_are_labelled() {
        let mut spec = small(ExperimentKind::BaselineCompare);
        spec.e_list = vec![LocalUpdates::Every(2)];
        let rows = run_experiment(&spec, 1).unwrap();
        assert!(rows
            .iter()
            .any(|r| r.algorithm == "qavg_baseline" && r.e.is_none()));
        assert!(rows
            .iter()
            .any(|r| r.algorithm == "qavg" && r.e == Some(LocalUpdates::Every(2))));
    }
}
