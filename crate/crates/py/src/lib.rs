//! Python bindings: scenario generation, single trials, metrics, statistics
//! and the experiment pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use socnav_core::analysis;
use socnav_core::experiment::{self, ExperimentConfig};
use socnav_core::metrics;
use socnav_core::scenario::{all_conditions, find_condition, sample_scenario};
use socnav_core::sim::{self, TrialConfig};
use socnav_core::{Error, PolicyTag, Vec2};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::UnknownMethod(_) | Error::InvalidSweep(_) | Error::UnknownCondition(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io { .. } | Error::Corrupt { .. } => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn xy(v: Vec2) -> (f64, f64) {
    (v.x, v.y)
}

fn points(pts: Vec<(f64, f64)>) -> Vec<Vec2> {
    pts.into_iter().map(|(x, y)| Vec2::new(x, y)).collect()
}

fn tag(s: &str) -> PyResult<PolicyTag> {
    s.parse().map_err(|_| PyValueError::new_err(format!("unknown policy `{s}`")))
}

/// One sampled scenario instance.
#[pyclass(module = "socnav", frozen)]
struct Scenario {
    inner: socnav_core::Scenario,
}

#[pymethods]
impl Scenario {
    /// Samples the scenario for a condition id such as `density-0.15`.
    #[staticmethod]
    fn generate(condition: &str, seed: u64) -> PyResult<Self> {
        let cond = find_condition(condition).map_err(to_py)?;
        Ok(Scenario { inner: sample_scenario(&cond, seed).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Scenario { inner: socnav_core::Scenario::from_json(s).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn hash(&self) -> String {
        self.inner.hash_hex()
    }

    #[getter]
    fn workspace(&self) -> (f64, f64) {
        (self.inner.workspace.w, self.inner.workspace.l)
    }

    #[getter]
    fn ego_start(&self) -> (f64, f64) {
        xy(self.inner.ego_start)
    }

    #[getter]
    fn ego_goal(&self) -> (f64, f64) {
        xy(self.inner.ego_goal)
    }

    #[getter]
    fn starts(&self) -> Vec<(f64, f64)> {
        self.inner.starts.iter().copied().map(xy).collect()
    }

    #[getter]
    fn goal_sequences(&self) -> Vec<Vec<(f64, f64)>> {
        self.inner.goal_sequences.iter().map(|g| g.iter().copied().map(xy).collect()).collect()
    }

    #[getter]
    fn policies(&self) -> Vec<&'static str> {
        self.inner.policies.iter().map(|p| p.as_str()).collect()
    }

    #[getter]
    fn radii(&self) -> Vec<f64> {
        self.inner.radii.clone()
    }

    fn __repr__(&self) -> String {
        format!("Scenario(n={}, seed={}, hash={})", self.inner.n, self.inner.seed, self.inner.hash_hex())
    }
}

#[pyclass(module = "socnav", frozen)]
struct TrialResult {
    inner: sim::TrialResult,
    ego_policy: PolicyTag,
}

#[pymethods]
impl TrialResult {
    /// `success`, `collision` or `timeout`.
    #[getter]
    fn outcome(&self) -> &'static str {
        self.inner.outcome.as_str()
    }

    #[getter]
    fn time_to_goal(&self) -> Option<f64> {
        self.inner.time_to_goal
    }

    #[getter]
    fn min_agent_distance(&self) -> Option<f64> {
        self.inner.min_agent_distance
    }

    #[getter]
    fn path_irregularity(&self) -> Option<f64> {
        self.inner.path_irregularity
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn human_collisions(&self) -> usize {
        self.inner.human_collisions
    }

    #[getter]
    fn ego_trajectory(&self) -> Vec<(f64, f64)> {
        self.inner.ego_trajectory.iter().map(|p| xy(p.position)).collect()
    }

    fn trajectory_csv(&self) -> String {
        self.inner.trajectory_csv(self.ego_policy)
    }

    fn __repr__(&self) -> String {
        format!("TrialResult(outcome={}, steps={})", self.inner.outcome.as_str(), self.inner.steps)
    }
}

/// Runs one trial. Without `seed` the simulation stream is derived from the
/// scenario seed, as the experiment runner does.
#[pyfunction]
#[pyo3(signature = (scenario, ego_policy = "orca", dt = 0.25, time_limit = 50.0, seed = None, record = false))]
fn run_trial(
    py: Python<'_>,
    scenario: &Scenario,
    ego_policy: &str,
    dt: f64,
    time_limit: f64,
    seed: Option<u64>,
    record: bool,
) -> PyResult<TrialResult> {
    let ego = tag(ego_policy)?;
    let tc = TrialConfig { dt, time_limit, record_full_trajectories: record, ..TrialConfig::with_ego(ego) };
    let seed = seed.unwrap_or_else(|| sim::sim_seed(scenario.inner.seed));
    let sc = &scenario.inner;
    let inner = py.detach(|| sim::run_trial(sc, &tc, seed)).map_err(to_py)?;
    Ok(TrialResult { inner, ego_policy: ego })
}

/// Returns `(rho, p_value)`.
#[pyfunction]
fn spearman(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64)> {
    let s = analysis::spearman(&xs, &ys).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((s.rho, s.p_value))
}

#[pyfunction]
fn path_irregularity(trajectory: Vec<(f64, f64)>, goal: (f64, f64)) -> Option<f64> {
    metrics::path_irregularity(&points(trajectory), Vec2::new(goal.0, goal.1))
}

/// `others` is a list of `(trajectory, radius)` pairs aligned with `ego`.
#[pyfunction]
fn min_agent_distance(ego: Vec<(f64, f64)>, ego_radius: f64, others: Vec<(Vec<(f64, f64)>, f64)>) -> Option<f64> {
    let others: Vec<(Vec<Vec2>, f64)> = others.into_iter().map(|(t, r)| (points(t), r)).collect();
    metrics::min_agent_distance(&points(ego), ego_radius, &others)
}

#[pyfunction]
fn conditions() -> Vec<String> {
    all_conditions().iter().map(|c| c.id()).collect()
}

/// Runs a sweep described by a JSON config and returns the output directory.
#[pyfunction]
#[pyo3(signature = (config_json, output_dir = None))]
fn run_experiments(py: Python<'_>, config_json: &str, output_dir: Option<PathBuf>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let resolved = cfg.resolve().map_err(to_py)?;
    py.detach(|| experiment::run_experiments(&resolved)).map_err(to_py)?;
    Ok(resolved.output_dir.to_string_lossy().into_owned())
}

/// Recomputes correlations from a run directory; returns them as JSON.
#[pyfunction]
fn analyze(dir: PathBuf) -> PyResult<String> {
    experiment::analyze(&dir).map_err(to_py)?;
    std::fs::read_to_string(dir.join(experiment::CORRELATIONS_FILE)).map_err(|e| PyOSError::new_err(e.to_string()))
}

/// Re-runs a recorded trial and returns its trajectory CSV.
#[pyfunction]
fn replay(py: Python<'_>, dir: PathBuf, condition: &str, method: &str, trial: usize) -> PyResult<String> {
    let (_, csv) = py.detach(|| experiment::replay(&dir, condition, method, trial)).map_err(to_py)?;
    Ok(csv)
}

#[pymodule]
fn socnav(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<TrialResult>()?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(path_irregularity, m)?)?;
    m.add_function(wrap_pyfunction!(min_agent_distance, m)?)?;
    m.add_function(wrap_pyfunction!(conditions, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiments, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    Ok(())
}
