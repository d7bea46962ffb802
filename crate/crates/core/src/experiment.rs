//! Batch sweeps: config resolution, parallel trial execution, and the
//! on-disk artifacts (trials, summaries, correlations, plot tables).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{correlate_experiment, CorrelationReport, LevelSummary, SCHEME};
use crate::controller::PolicyParams;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, Metric, MetricVector, Summary};
use crate::policies::PolicyTag;
use crate::predictive::PredictorRegistry;
use crate::scenario::{
    all_conditions, condition_index, find_condition, sample_scenario_with, trial_seed, Factor, Scenario,
    ScenarioParams, SweepCondition,
};
use crate::sim::{run_trial_with, sim_seed, Outcome, TrialConfig, TrialResult};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_TRIALS: usize = 100;
pub const PAPER_TRIALS: usize = 500;
/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SOCNAV_OUTPUT_DIR";

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CORRELATIONS_FILE: &str = "correlations.json";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";
pub const PLOT_DIR: &str = "plotdata";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Workers {
    Count(usize),
    Auto(AutoWorkers),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoWorkers {
    Auto,
}

impl Default for Workers {
    fn default() -> Self {
        Workers::Auto(AutoWorkers::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<PolicyParams>,
}

impl MethodSpec {
    pub fn tag(tag: &str) -> Self {
        MethodSpec { tag: tag.to_string(), name: None, params: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialSettings {
    pub dt: f64,
    pub time_limit: f64,
    pub goal_tolerance: f64,
    pub agent_goal_tolerance: f64,
}

impl Default for TrialSettings {
    fn default() -> Self {
        let tc = TrialConfig::default();
        TrialSettings {
            dt: tc.dt,
            time_limit: tc.time_limit,
            goal_tolerance: tc.goal_tolerance,
            agent_goal_tolerance: tc.agent_goal_tolerance,
        }
    }
}

/// A run description as written by the user. Everything but `methods` has a
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub experiment_seed: u64,
    pub trials_per_condition: usize,
    pub sweeps: Vec<String>,
    pub methods: Vec<MethodSpec>,
    pub trial: TrialSettings,
    pub human_params: PolicyParams,
    pub scenario: ScenarioParams,
    pub output_dir: PathBuf,
    pub workers: Workers,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            format_version: FORMAT_VERSION,
            experiment_seed: 0,
            trials_per_condition: DEFAULT_TRIALS,
            sweeps: Factor::ALL.iter().map(|f| f.as_str().to_string()).collect(),
            methods: Vec::new(),
            trial: TrialSettings::default(),
            human_params: PolicyParams::default(),
            scenario: ScenarioParams::default(),
            output_dir: PathBuf::from("results"),
            workers: Workers::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported format_version {}", self.format_version)));
        }
        if self.trials_per_condition == 0 {
            return Err(Error::Config("trials_per_condition must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        let t = &self.trial;
        if !(t.dt > 0.0 && t.time_limit >= t.dt && t.goal_tolerance >= 0.0 && t.agent_goal_tolerance >= 0.0) {
            return Err(Error::Config("trial timing must satisfy dt > 0 and time_limit >= dt".into()));
        }
        let mut sweeps = Vec::new();
        for s in &self.sweeps {
            let f = Factor::parse(s)?;
            if !sweeps.contains(&f) {
                sweeps.push(f);
            }
        }
        if sweeps.is_empty() {
            return Err(Error::Config("no sweeps given".into()));
        }
        sweeps.sort();

        let registry = PredictorRegistry::with_builtins();
        let mut methods: Vec<ResolvedMethod> = Vec::new();
        for m in &self.methods {
            let tag: PolicyTag = m.tag.parse().map_err(|_| Error::UnknownMethod(m.tag.clone()))?;
            let name = m.name.clone().unwrap_or_else(|| tag.as_str().to_string());
            if name.is_empty() || name.contains([',', '/', '\\', '"']) {
                return Err(Error::Config(format!("invalid method name `{name}`")));
            }
            if methods.iter().any(|x| x.name == name) {
                return Err(Error::Config(format!("duplicate method name `{name}`")));
            }
            let params = m.params.clone().unwrap_or_default();
            crate::controller::Controller::new(tag, &params, &registry)?;
            methods.push(ResolvedMethod { name, tag, params });
        }
        for tag in PolicyTag::ALL.iter().filter(|t| t.is_human_policy()) {
            crate::controller::Controller::new(*tag, &self.human_params, &registry)?;
        }
        let workers = match self.workers {
            Workers::Count(0) => return Err(Error::Config("workers must be at least 1".into())),
            Workers::Count(n) => n,
            Workers::Auto(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Ok(ResolvedConfig {
            format_version: FORMAT_VERSION,
            experiment_seed: self.experiment_seed,
            trials_per_condition: self.trials_per_condition,
            sweeps,
            methods,
            trial: self.trial.clone(),
            human_params: self.human_params.clone(),
            scenario: self.scenario.clone(),
            output_dir: self.output_dir.clone(),
            workers,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMethod {
    pub name: String,
    pub tag: PolicyTag,
    pub params: PolicyParams,
}

/// Fully expanded config; written next to the results so that one file
/// determines the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub format_version: u32,
    pub experiment_seed: u64,
    pub trials_per_condition: usize,
    pub sweeps: Vec<Factor>,
    pub methods: Vec<ResolvedMethod>,
    pub trial: TrialSettings,
    pub human_params: PolicyParams,
    pub scenario: ScenarioParams,
    pub output_dir: PathBuf,
    /// Does not influence any output.
    pub workers: usize,
}

impl ResolvedConfig {
    pub fn conditions(&self) -> Vec<SweepCondition> {
        all_conditions().into_iter().filter(|c| self.sweeps.contains(&c.factor)).collect()
    }

    pub fn trial_config(&self, method: &ResolvedMethod) -> TrialConfig {
        TrialConfig {
            dt: self.trial.dt,
            time_limit: self.trial.time_limit,
            goal_tolerance: self.trial.goal_tolerance,
            agent_goal_tolerance: self.trial.agent_goal_tolerance,
            ego_policy: method.tag,
            ego_params: method.params.clone(),
            human_params: self.human_params.clone(),
            record_full_trajectories: false,
        }
    }

    pub fn method(&self, name: &str) -> Result<&ResolvedMethod> {
        self.methods.iter().find(|m| m.name == name).ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(RESOLVED_CONFIG_FILE))
    }
}

/// One line of `trials.csv`. Absent metrics are empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub condition_id: String,
    pub factor: Factor,
    pub level_index: usize,
    pub method: String,
    pub trial_id: usize,
    pub seed: u64,
    pub scenario_hash: String,
    pub outcome: Outcome,
    pub time_to_goal: Option<f64>,
    pub min_distance: Option<f64>,
    pub path_irregularity: Option<f64>,
    pub steps: usize,
}

impl TrialRow {
    pub fn metrics(&self) -> MetricVector {
        MetricVector {
            success: self.outcome == Outcome::Success,
            time_to_goal: self.time_to_goal,
            min_distance: self.min_distance,
            path_irregularity: self.path_irregularity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub tag: PolicyTag,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition_id: String,
    pub factor: Factor,
    pub level_index: usize,
    pub label: String,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub format_version: u32,
    pub std_convention: String,
    pub min_distance_convention: String,
    pub min_rotation_convention: String,
    pub conditions: Vec<ConditionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationsFile {
    pub format_version: u32,
    pub scheme: String,
    pub reports: Vec<CorrelationReport>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<TrialRow>,
    pub summary: SummaryFile,
    pub correlations: CorrelationsFile,
}

/// The scenario every method faces for (condition, trial).
pub fn trial_scenario(cfg: &ResolvedConfig, cond: &SweepCondition, trial: usize) -> Result<Scenario> {
    let seed = trial_seed(cfg.experiment_seed, condition_index(cond), trial);
    sample_scenario_with(cond, seed, &cfg.scenario)
}

fn row_for(cond: &SweepCondition, method: &ResolvedMethod, trial: usize, sc: &Scenario, r: &TrialResult) -> TrialRow {
    TrialRow {
        condition_id: cond.id(),
        factor: cond.factor,
        level_index: cond.level_index,
        method: method.name.clone(),
        trial_id: trial,
        seed: sc.seed,
        scenario_hash: sc.hash_hex(),
        outcome: r.outcome,
        time_to_goal: r.time_to_goal,
        min_distance: r.min_agent_distance,
        path_irregularity: r.path_irregularity,
        steps: r.steps,
    }
}

/// Runs every (condition, method, trial) combination. Rows come back sorted
/// by (condition, method, trial) regardless of worker count.
pub fn run_trials(cfg: &ResolvedConfig) -> Result<Vec<TrialRow>> {
    let conditions = cfg.conditions();
    let jobs: Vec<(usize, usize)> = (0..conditions.len())
        .flat_map(|c| (0..cfg.trials_per_condition).map(move |t| (c, t)))
        .collect();
    let registry = PredictorRegistry::with_builtins();
    let run_job = |&(c, t): &(usize, usize)| -> Result<Vec<(usize, usize, usize, TrialRow)>> {
        let cond = &conditions[c];
        let sc = trial_scenario(cfg, cond, t)?;
        cfg.methods
            .iter()
            .enumerate()
            .map(|(m, method)| {
                let r = run_trial_with(&sc, &cfg.trial_config(method), sim_seed(sc.seed), &registry)?;
                Ok((c, m, t, row_for(cond, method, t, &sc, &r)))
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Invariant(format!("cannot start worker pool: {e}")))?;
    let nested: Vec<_> = pool.install(|| jobs.par_iter().map(run_job).collect::<Result<Vec<_>>>())?;
    let mut keyed: Vec<_> = nested.into_iter().flatten().collect();
    keyed.sort_by_key(|(c, m, t, _)| (*c, *m, *t));
    Ok(keyed.into_iter().map(|(.., row)| row).collect())
}

pub fn summarize(cfg: &ResolvedConfig, rows: &[TrialRow]) -> SummaryFile {
    let mut conditions = Vec::new();
    for cond in cfg.conditions() {
        let id = cond.id();
        let methods = cfg
            .methods
            .iter()
            .filter_map(|m| {
                let sel: Vec<_> = rows
                    .iter()
                    .filter(|r| r.condition_id == id && r.method == m.name)
                    .map(|r| (r.outcome, r.metrics()))
                    .collect();
                (!sel.is_empty()).then(|| MethodSummary { method: m.name.clone(), tag: m.tag, summary: aggregate(&sel) })
            })
            .collect();
        conditions.push(ConditionSummary {
            condition_id: id,
            factor: cond.factor,
            level_index: cond.level_index,
            label: cond.label(),
            methods,
        });
    }
    SummaryFile {
        format_version: FORMAT_VERSION,
        std_convention: "population".into(),
        min_distance_convention: "surface".into(),
        min_rotation_convention: "initial-misalignment".into(),
        conditions,
    }
}

/// One report per (factor present in the summaries, metric).
pub fn correlations(summary: &SummaryFile) -> CorrelationsFile {
    let mut by_factor: BTreeMap<Factor, Vec<LevelSummary>> = BTreeMap::new();
    for c in &summary.conditions {
        let entry = by_factor.entry(c.factor).or_default();
        for m in &c.methods {
            entry.push(LevelSummary { method: m.method.clone(), level_index: c.level_index, summary: m.summary.clone() });
        }
    }
    let reports = by_factor
        .iter()
        .flat_map(|(f, ls)| Metric::ALL.iter().map(move |m| correlate_experiment(ls, *f, *m)))
        .collect();
    CorrelationsFile { format_version: FORMAT_VERSION, scheme: SCHEME.into(), reports }
}

/// Rows of `plotdata/<factor>_<metric>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub level: String,
    pub method: String,
    pub mean: f64,
    pub std: f64,
}

pub fn plot_rows(summary: &SummaryFile, factor: Factor, metric: Metric) -> Vec<PlotRow> {
    summary
        .conditions
        .iter()
        .filter(|c| c.factor == factor)
        .flat_map(|c| {
            c.methods.iter().filter_map(move |m| {
                m.summary.metric(metric).map(|s| PlotRow {
                    level: c.label.clone(),
                    method: m.method.clone(),
                    mean: s.mean,
                    std: s.std,
                })
            })
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s.into_bytes()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt { path: path.to_path_buf(), reason: e.to_string() })
}

fn csv_bytes<T: Serialize>(path: &Path, rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Corrupt { path: path.to_path_buf(), reason: e.to_string() })?;
    }
    w.into_inner().map_err(|e| Error::Invariant(e.to_string()))
}

pub fn write_rows_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut bytes = csv_bytes(path, rows)?;
    if rows.is_empty() {
        bytes = format!("{}\n", header.join(",")).into_bytes();
    }
    write_file(path, &bytes)
}

pub fn read_trials(dir: &Path) -> Result<Vec<TrialRow>> {
    let path = dir.join(TRIALS_FILE);
    let mut r = csv::Reader::from_path(&path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&path, io),
        other => Error::Corrupt { path: path.clone(), reason: format!("{other:?}") },
    })?;
    r.deserialize()
        .collect::<std::result::Result<Vec<TrialRow>, _>>()
        .map_err(|e| Error::Corrupt { path: path.clone(), reason: e.to_string() })
}

pub const TRIAL_COLUMNS: [&str; 12] = [
    "condition_id",
    "factor",
    "level_index",
    "method",
    "trial_id",
    "seed",
    "scenario_hash",
    "outcome",
    "time_to_goal",
    "min_distance",
    "path_irregularity",
    "steps",
];

fn write_correlations(dir: &Path, c: &CorrelationsFile) -> Result<()> {
    write_file(&dir.join(CORRELATIONS_FILE), &json_bytes(c))
}

/// Resolves, runs, and writes all artifacts into `cfg.output_dir`.
pub fn run_experiments(cfg: &ResolvedConfig) -> Result<ExperimentOutput> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir.join(PLOT_DIR)).map_err(|e| Error::io(dir.join(PLOT_DIR), e))?;
    write_file(&dir.join(RESOLVED_CONFIG_FILE), &json_bytes(cfg))?;

    let rows = run_trials(cfg)?;
    let expected = cfg.conditions().len() * cfg.methods.len() * cfg.trials_per_condition;
    if rows.len() != expected {
        return Err(Error::Invariant(format!("{} trial rows, expected {expected}", rows.len())));
    }
    write_rows_csv(&dir.join(TRIALS_FILE), &rows, &TRIAL_COLUMNS)?;

    let summary = summarize(cfg, &rows);
    write_file(&dir.join(SUMMARY_FILE), &json_bytes(&summary))?;
    let correlations = correlations(&summary);
    write_correlations(dir, &correlations)?;
    for f in &cfg.sweeps {
        for m in Metric::ALL {
            let path = dir.join(PLOT_DIR).join(format!("{}_{}.csv", f.as_str(), m.as_str()));
            write_rows_csv(&path, &plot_rows(&summary, *f, m), &["level", "method", "mean", "std"])?;
        }
    }
    Ok(ExperimentOutput { rows, summary, correlations })
}

/// Recomputes `correlations.json` from `summary.json` alone.
pub fn analyze(dir: &Path) -> Result<CorrelationsFile> {
    let summary: SummaryFile = read_json(&dir.join(SUMMARY_FILE))?;
    if summary.conditions.is_empty() {
        return Err(Error::Corrupt { path: dir.join(SUMMARY_FILE), reason: "no conditions".into() });
    }
    let c = correlations(&summary);
    write_correlations(dir, &c)?;
    Ok(c)
}

/// Re-runs one recorded trial with full trajectories. The recorded seed must
/// regenerate the recorded scenario and the outcome must repeat.
pub fn replay(dir: &Path, condition: &str, method: &str, trial: usize) -> Result<(TrialResult, String)> {
    let cfg = ResolvedConfig::load(dir)?;
    let cond = find_condition(condition)?;
    let m = cfg.method(method)?;
    let rows = read_trials(dir)?;
    let row = rows
        .iter()
        .find(|r| r.condition_id == condition && r.method == method && r.trial_id == trial)
        .ok_or_else(|| Error::Config(format!("no trial {condition}/{method}/{trial} in {}", dir.display())))?;
    let sc = sample_scenario_with(&cond, row.seed, &cfg.scenario)?;
    if sc.hash_hex() != row.scenario_hash {
        return Err(Error::Invariant(format!(
            "scenario hash mismatch: recorded {}, regenerated {} from seed {}",
            row.scenario_hash,
            sc.hash_hex(),
            row.seed
        )));
    }
    let tc = TrialConfig { record_full_trajectories: true, ..cfg.trial_config(m) };
    let r = run_trial_with(&sc, &tc, sim_seed(sc.seed), &PredictorRegistry::with_builtins())?;
    if r.outcome != row.outcome || r.steps != row.steps {
        return Err(Error::Invariant(format!(
            "replay diverged: recorded {} after {} steps, got {} after {}",
            row.outcome.as_str(),
            row.steps,
            r.outcome.as_str(),
            r.steps
        )));
    }
    let csv = r.trajectory_csv(m.tag);
    Ok((r, csv))
}
