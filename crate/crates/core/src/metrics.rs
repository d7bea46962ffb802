//! Per-trial metrics and per-condition aggregation.

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2};
use crate::sim::{Outcome, TrialResult};

/// Displacements shorter than this carry no heading sample.
pub const STATIONARY_EPS: f64 = 1e-6;
/// Paths shorter than this have no defined irregularity.
pub const MIN_ARC_LENGTH: f64 = 1e-9;

pub fn surface_distance(p: Vec2, rp: f64, q: Vec2, rq: f64) -> f64 {
    p.distance(q) - rp - rq
}

/// Unnecessary turning per metre of path: total absolute heading change
/// minus the initial misalignment with the goal bearing, divided by arc
/// length. `None` if the path has fewer than two moving steps or no length.
pub fn path_irregularity(traj: &[Vec2], goal: Vec2) -> Option<f64> {
    let mut headings = Vec::new();
    let mut arc = 0.0;
    for w in traj.windows(2) {
        let d = w[1] - w[0];
        let len = d.norm();
        arc += len;
        if len >= STATIONARY_EPS {
            headings.push(d.angle());
        }
    }
    if headings.is_empty() || arc < MIN_ARC_LENGTH {
        return None;
    }
    let total: f64 = headings.windows(2).map(|h| wrap_angle(h[1] - h[0]).abs()).sum();
    let needed = wrap_angle((goal - traj[0]).angle() - headings[0]).abs();
    Some((total - needed).max(0.0) / arc)
}

/// Smallest surface distance between the ego and any other agent over
/// matching trajectory samples. `None` with no other agents.
pub fn min_agent_distance(
    ego: &[Vec2],
    ego_radius: f64,
    others: &[(Vec<Vec2>, f64)],
) -> Option<f64> {
    others
        .iter()
        .flat_map(|(traj, r)| {
            ego.iter().zip(traj).map(move |(&p, &q)| surface_distance(p, ego_radius, q, *r))
        })
        .reduce(f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub success: bool,
    pub time_to_goal: Option<f64>,
    pub min_distance: Option<f64>,
    pub path_irregularity: Option<f64>,
}

impl MetricVector {
    pub fn from_result(r: &TrialResult) -> Self {
        MetricVector {
            success: r.outcome == Outcome::Success,
            time_to_goal: r.time_to_goal,
            min_distance: r.min_agent_distance,
            path_irregularity: r.path_irregularity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Success,
    Time,
    MinDistance,
    PathIrregularity,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Success, Metric::Time, Metric::MinDistance, Metric::PathIrregularity];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Success => "success",
            Metric::Time => "time",
            Metric::MinDistance => "min_distance",
            Metric::PathIrregularity => "path_irregularity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Option<Stat> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Stat { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub success: usize,
    pub collision: usize,
    pub timeout: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub success_rate: f64,
    pub counts: OutcomeCounts,
    /// Set when no trial succeeded, so the per-success statistics are absent.
    pub no_successes: bool,
    pub time_to_goal: Option<Stat>,
    pub min_distance: Option<Stat>,
    pub path_irregularity: Option<Stat>,
}

impl Summary {
    /// Success is averaged over all trials; the rest over successes only.
    pub fn metric(&self, m: Metric) -> Option<Stat> {
        match m {
            Metric::Success => {
                let p = self.success_rate;
                Some(Stat { mean: p, std: (p * (1.0 - p)).max(0.0).sqrt() })
            }
            Metric::Time => self.time_to_goal,
            Metric::MinDistance => self.min_distance,
            Metric::PathIrregularity => self.path_irregularity,
        }
    }
}

/// Panics on an empty slice.
pub fn aggregate(outcomes: &[(Outcome, MetricVector)]) -> Summary {
    assert!(!outcomes.is_empty(), "aggregate needs at least one trial");
    let mut counts = OutcomeCounts::default();
    for (o, _) in outcomes {
        match o {
            Outcome::Success => counts.success += 1,
            Outcome::Collision => counts.collision += 1,
            Outcome::Timeout => counts.timeout += 1,
        }
    }
    let successes: Vec<&MetricVector> =
        outcomes.iter().filter(|(o, _)| *o == Outcome::Success).map(|(_, m)| m).collect();
    let collect = |f: fn(&MetricVector) -> Option<f64>| -> Option<Stat> {
        Stat::of(&successes.iter().filter_map(|m| f(m)).collect::<Vec<_>>())
    };
    Summary {
        trials: outcomes.len(),
        success_rate: counts.success as f64 / outcomes.len() as f64,
        counts,
        no_successes: successes.is_empty(),
        time_to_goal: collect(|m| m.time_to_goal),
        min_distance: collect(|m| m.min_distance),
        path_irregularity: collect(|m| m.path_irregularity),
    }
}

pub fn aggregate_results(results: &[TrialResult]) -> Summary {
    let rows: Vec<_> = results.iter().map(|r| (r.outcome, MetricVector::from_result(r))).collect();
    aggregate(&rows)
}
