//! Sampling-based predictive controllers that score ego rollouts against
//! motion predictions of the other agents.
//!
//! Predictions come from a [`MotionPredictor`]; only the constant-velocity
//! predictor ships with the crate, but any other model can be registered by
//! name in a [`PredictorRegistry`] and selected from the experiment config.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::policies::{cv_action, AgentState, WorldSnapshot};
use crate::world::{clamp_action_to_walls, Workspace};

/// Predicted future positions of one non-ego agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedAgent {
    pub index: usize,
    pub radius: f64,
    /// `positions[k]` is the prediction `k + 1` steps ahead.
    pub positions: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub horizon: usize,
    pub agents: Vec<PredictedAgent>,
}

/// Maps the current snapshot to `horizon` future positions for every agent
/// other than `ego_index`.
pub trait MotionPredictor: Send + Sync {
    fn name(&self) -> &str;
    fn predict(&self, snapshot: &WorldSnapshot, ego_index: usize, horizon: usize) -> PredictionSet;
}

/// Straight-line extrapolation of the current velocity, ignoring walls.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocityPredictor;

impl MotionPredictor for ConstantVelocityPredictor {
    fn name(&self) -> &str {
        "cv"
    }

    fn predict(&self, snapshot: &WorldSnapshot, ego_index: usize, horizon: usize) -> PredictionSet {
        predict_cv(snapshot, ego_index, horizon)
    }
}

pub fn predict_cv(snapshot: &WorldSnapshot, ego_index: usize, horizon: usize) -> PredictionSet {
    assert!(horizon >= 1, "prediction horizon must be at least one step");
    let agents = snapshot
        .others(ego_index)
        .map(|(index, b)| PredictedAgent {
            index,
            radius: b.radius,
            positions: (1..=horizon)
                .map(|k| b.position + b.velocity * (k as f64 * snapshot.dt))
                .collect(),
        })
        .collect();
    PredictionSet { horizon, agents }
}

/// Named predictors available to the controllers.
#[derive(Clone)]
pub struct PredictorRegistry {
    predictors: BTreeMap<String, Arc<dyn MotionPredictor>>,
}

impl PredictorRegistry {
    pub fn empty() -> Self {
        PredictorRegistry { predictors: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(ConstantVelocityPredictor));
        r
    }

    pub fn register(&mut self, predictor: Arc<dyn MotionPredictor>) {
        self.predictors.insert(predictor.name().to_string(), predictor);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn MotionPredictor>> {
        self.predictors.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.predictors.keys().map(String::as_str)
    }
}

impl Default for PredictorRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl fmt::Debug for PredictorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

/// Cost weights and sampling settings for one controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    pub horizon: usize,
    pub goal_weight: f64,
    pub collision_penalty: f64,
    pub discomfort_weight: f64,
    /// Surface gap (m) below which discomfort accrues.
    pub discomfort_buffer: f64,
    pub smoothness_weight: f64,
    /// MPPI temperature.
    pub temperature: f64,
    pub samples: usize,
    /// Per-axis standard deviation of MPPI perturbations (m/s).
    pub noise_std: f64,
    /// Registered predictor name.
    pub predictor: String,
}

impl CostParams {
    pub fn mpc_default() -> Self {
        CostParams {
            horizon: 8,
            goal_weight: 1.0,
            collision_penalty: 1e4,
            discomfort_weight: 5.0,
            discomfort_buffer: 0.2,
            smoothness_weight: 0.1,
            temperature: 0.5,
            samples: 500,
            noise_std: 0.5,
            predictor: "cv".to_string(),
        }
    }

    pub fn mppi_default() -> Self {
        CostParams { samples: 400, ..Self::mpc_default() }
    }
}

impl Default for CostParams {
    fn default() -> Self {
        Self::mpc_default()
    }
}

/// A sequence of velocity commands, one per horizon step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence(pub Vec<Vec2>);

impl ControlSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Vec2 {
        self.0.first().copied().unwrap_or(Vec2::ZERO)
    }

    /// Drops the first command and repeats the last one.
    pub fn shifted(&self) -> ControlSequence {
        let mut v = self.0.clone();
        if let Some(&last) = v.last() {
            v.remove(0);
            v.push(last);
        }
        ControlSequence(v)
    }

    fn clipped(mut self, v_max: f64) -> ControlSequence {
        for u in &mut self.0 {
            *u = u.clamp_norm(v_max);
        }
        self
    }
}

/// Rolls the ego's own constant-velocity policy forward for `horizon` steps.
pub fn straight_to_goal(ego: &AgentState, dt: f64, horizon: usize) -> ControlSequence {
    let mut state = *ego;
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let u = cv_action(&state, dt);
        state.position += u * dt;
        out.push(u);
    }
    ControlSequence(out)
}

/// Penalty for a predicted center distance `d` given the summed radii.
pub fn proximity_penalty(d: f64, radius_sum: f64, cp: &CostParams) -> f64 {
    let gap = d - radius_sum;
    if d < radius_sum {
        cp.collision_penalty
    } else if gap < cp.discomfort_buffer {
        cp.discomfort_weight * (cp.discomfort_buffer - gap)
    } else {
        0.0
    }
}

/// Cost of driving the ego with `u` while the others follow `preds`.
pub fn rollout_cost(
    ego: &AgentState,
    u: &ControlSequence,
    preds: &PredictionSet,
    cp: &CostParams,
    ws: &Workspace,
    dt: f64,
) -> f64 {
    assert_eq!(u.len(), preds.horizon, "control length must match prediction horizon");
    let mut p = ego.position;
    let mut prev = ego.velocity;
    let mut cost = 0.0;
    for (k, &cmd) in u.0.iter().enumerate() {
        let applied = clamp_action_to_walls(p, cmd, ego.radius, dt, ws);
        p += applied * dt;
        cost += cp.goal_weight * p.distance(ego.current_goal);
        for agent in &preds.agents {
            cost += proximity_penalty(p.distance(agent.positions[k]), ego.radius + agent.radius, cp);
        }
        cost += cp.smoothness_weight * (cmd - prev).norm_sq();
        prev = cmd;
    }
    cost
}

/// Drops predicted agents that no command sequence with speed at most
/// `v_pref` can bring within the discomfort buffer. Their cost terms are
/// always zero, so rollout costs are unchanged.
fn reachable_predictions(ego: &AgentState, preds: &PredictionSet, cp: &CostParams, dt: f64) -> PredictionSet {
    let agents = preds
        .agents
        .iter()
        .filter(|a| {
            a.positions.iter().enumerate().any(|(k, q)| {
                let reach = ego.v_pref * dt * (k + 1) as f64;
                ego.position.distance(*q) - reach < ego.radius + a.radius + cp.discomfort_buffer
            })
        })
        .cloned()
        .collect();
    PredictionSet { horizon: preds.horizon, agents }
}

fn random_candidate<R: Rng + ?Sized>(rng: &mut R, v_pref: f64, horizon: usize) -> ControlSequence {
    let first = Vec2::from_angle(rng.random_range(0.0..TAU)) * rng.random_range(0.0..=v_pref);
    let second = Vec2::from_angle(rng.random_range(0.0..TAU)) * rng.random_range(0.0..=v_pref);
    let switch = rng.random_range(1..=horizon);
    ControlSequence((0..horizon).map(|k| if k < switch { first } else { second }).collect())
}

/// Random-shooting MPC. Candidate 0 is the straight-to-goal sequence; the
/// rest are two-piece constant-heading sequences. Returns the first command
/// of the cheapest candidate (ties go to the earliest).
pub fn mpc_cv_action<R: Rng + ?Sized>(
    ego: &AgentState,
    snapshot: &WorldSnapshot,
    cp: &CostParams,
    predictor: &dyn MotionPredictor,
    rng: &mut R,
) -> Vec2 {
    mpc_plan(ego, snapshot, cp, predictor, rng).0.first()
}

/// As [`mpc_cv_action`] but returns the winning sequence and its cost.
pub fn mpc_plan<R: Rng + ?Sized>(
    ego: &AgentState,
    snapshot: &WorldSnapshot,
    cp: &CostParams,
    predictor: &dyn MotionPredictor,
    rng: &mut R,
) -> (ControlSequence, f64) {
    let h = cp.horizon;
    let preds = reachable_predictions(ego, &predictor.predict(snapshot, ego.index, h), cp, snapshot.dt);
    let ws = &snapshot.workspace;
    let mut best = straight_to_goal(ego, snapshot.dt, h);
    let mut best_cost = rollout_cost(ego, &best, &preds, cp, ws, snapshot.dt);
    for _ in 1..cp.samples.max(1) {
        let cand = random_candidate(rng, ego.v_pref, h);
        let c = rollout_cost(ego, &cand, &preds, cp, ws, snapshot.dt);
        if c < best_cost {
            best = cand;
            best_cost = c;
        }
    }
    (best, best_cost)
}

/// Normalized importance weights `exp(-(S_k - min S) / temperature)`.
pub fn mppi_weights(costs: &[f64], temperature: f64) -> Vec<f64> {
    assert!(temperature > 0.0);
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = costs.iter().map(|&c| (-(c - min) / temperature).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// One MPPI update. Returns the command to execute now and the nominal
/// sequence to warm-start the next call.
pub fn mppi_cv_action<R: Rng + ?Sized>(
    ego: &AgentState,
    snapshot: &WorldSnapshot,
    cp: &CostParams,
    nominal: &ControlSequence,
    predictor: &dyn MotionPredictor,
    rng: &mut R,
) -> (Vec2, ControlSequence) {
    let updated = mppi_update(ego, snapshot, cp, nominal, predictor, rng);
    (updated.first(), updated.shifted())
}

/// The re-weighted nominal before the time shift.
pub fn mppi_update<R: Rng + ?Sized>(
    ego: &AgentState,
    snapshot: &WorldSnapshot,
    cp: &CostParams,
    nominal: &ControlSequence,
    predictor: &dyn MotionPredictor,
    rng: &mut R,
) -> ControlSequence {
    let h = cp.horizon;
    assert_eq!(nominal.len(), h, "nominal length must equal the horizon");
    let preds = reachable_predictions(ego, &predictor.predict(snapshot, ego.index, h), cp, snapshot.dt);
    let noise = Normal::new(0.0, cp.noise_std).expect("noise_std must be finite and non-negative");

    let samples: Vec<ControlSequence> = (0..cp.samples.max(1))
        .map(|_| {
            ControlSequence(
                nominal
                    .0
                    .iter()
                    .map(|&u| u + Vec2::new(noise.sample(rng), noise.sample(rng)))
                    .collect(),
            )
            .clipped(ego.v_pref)
        })
        .collect();
    let costs: Vec<f64> = samples
        .iter()
        .map(|u| rollout_cost(ego, u, &preds, cp, &snapshot.workspace, snapshot.dt))
        .collect();
    let weights = mppi_weights(&costs, cp.temperature);

    let mut mean = vec![Vec2::ZERO; h];
    for (w, u) in weights.iter().zip(&samples) {
        for (m, &c) in mean.iter_mut().zip(&u.0) {
            *m += c * *w;
        }
    }
    ControlSequence(mean).clipped(ego.v_pref)
}
