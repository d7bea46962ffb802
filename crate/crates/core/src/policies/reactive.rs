//! One-step lookahead planner over a discrete speed x heading action set.

use std::f64::consts::TAU;

use crate::geometry::Vec2;

use super::{AgentState, WorldSnapshot};

pub const SPEED_COUNT: usize = 5;
pub const HEADING_COUNT: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    pub speeds: Vec<f64>,
    pub headings: Vec<f64>,
    pub includes_stop: bool,
}

impl ActionSpace {
    /// All velocities, stop first, then speed-major.
    pub fn velocities(&self) -> Vec<Vec2> {
        let mut out = Vec::with_capacity(self.len());
        if self.includes_stop {
            out.push(Vec2::ZERO);
        }
        for &s in &self.speeds {
            for &h in &self.headings {
                out.push(Vec2::from_angle(h) * s);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.speeds.len() * self.headings.len() + usize::from(self.includes_stop)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Exponentially spaced speeds up to `v_pref`, 16 headings, and stop.
pub fn build_action_space(v_pref: f64) -> ActionSpace {
    assert!(v_pref > 0.0);
    let e = std::f64::consts::E;
    let speeds = (1..=SPEED_COUNT)
        .map(|i| {
            if i == SPEED_COUNT {
                v_pref
            } else {
                v_pref * ((i as f64 / SPEED_COUNT as f64).exp() - 1.0) / (e - 1.0)
            }
        })
        .collect();
    let headings = (0..HEADING_COUNT).map(|k| k as f64 * TAU / HEADING_COUNT as f64).collect();
    ActionSpace { speeds, headings, includes_stop: true }
}

/// Picks the action whose next position is closest to the goal among those
/// that stay clear of every other agent's constant-velocity next position.
pub fn reactive_action(me: &AgentState, snapshot: &WorldSnapshot) -> Vec2 {
    let dt = snapshot.dt;
    let others: Vec<(Vec2, f64)> = snapshot
        .others(me.index)
        .map(|(_, b)| (b.position + b.velocity * dt, b.radius + me.radius))
        .collect();

    let mut best: Option<(f64, Vec2)> = None;
    for action in build_action_space(me.v_pref).velocities() {
        let next = me.position + action * dt;
        if others.iter().any(|&(q, r)| next.distance(q) < r) {
            continue;
        }
        let d = next.distance(me.current_goal);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, action));
        }
    }
    best.map_or(Vec2::ZERO, |(_, a)| a)
}
