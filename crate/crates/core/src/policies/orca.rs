//! Optimal reciprocal collision avoidance. One velocity half-plane per
//! neighbour, each agent taking half of the avoidance effort, solved with
//! the incremental 2D LP and its least-violation fallback.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

use super::cv::cv_action;
use super::lp::{solve_lp2, solve_lp3_with_fixed, HalfPlane};
use crate::world::Workspace;
use super::{AgentState, Body, WorldSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrcaParams {
    /// Neighbours farther than this (center to center) are ignored.
    pub neighbor_dist: f64,
    /// Look-ahead window for the velocity obstacle, in seconds.
    pub time_horizon: f64,
    /// Added to every radius when building constraints.
    pub safety_margin: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        OrcaParams { neighbor_dist: 10.0, time_horizon: 5.0, safety_margin: 0.01 }
    }
}

/// The half-plane of velocities for `me` that avoid `other` for
/// `time_horizon` seconds, assuming `other` takes half the responsibility.
/// Overlapping discs use `time_step` so the pair separates on the next step.
pub fn orca_half_plane(me: &Body, other: &Body, time_horizon: f64, time_step: f64) -> HalfPlane {
    let rel_pos = other.position - me.position;
    let rel_vel = me.velocity - other.velocity;
    let dist_sq = rel_pos.norm_sq();
    let combined_radius = me.radius + other.radius;
    let combined_radius_sq = combined_radius * combined_radius;

    let direction;
    let u;
    if dist_sq > combined_radius_sq {
        let inv_horizon = 1.0 / time_horizon;
        // From the cut-off circle center to the relative velocity.
        let w = rel_vel - rel_pos * inv_horizon;
        let w_len_sq = w.norm_sq();
        let dot1 = w.dot(rel_pos);
        if dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_len_sq {
            // Closest boundary point lies on the cut-off circle.
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            direction = Vec2::new(unit_w.y, -unit_w.x);
            u = unit_w * (combined_radius * inv_horizon - w_len);
        } else {
            // Closest boundary point lies on one of the cone legs.
            let leg = (dist_sq - combined_radius_sq).sqrt();
            direction = if rel_pos.det(w) > 0.0 {
                Vec2::new(
                    rel_pos.x * leg - rel_pos.y * combined_radius,
                    rel_pos.x * combined_radius + rel_pos.y * leg,
                ) / dist_sq
            } else {
                -Vec2::new(
                    rel_pos.x * leg + rel_pos.y * combined_radius,
                    -rel_pos.x * combined_radius + rel_pos.y * leg,
                ) / dist_sq
            };
            u = direction * rel_vel.dot(direction) - rel_vel;
        }
    } else {
        let inv_step = 1.0 / time_step;
        let w = rel_vel - rel_pos * inv_step;
        let w_len = w.norm();
        let unit_w = if w_len > 1e-12 {
            w / w_len
        } else {
            // Coincident and co-moving; push apart along a fixed axis.
            let away = -rel_pos.normalize_or_zero();
            if away == Vec2::ZERO {
                Vec2::new(1.0, 0.0)
            } else {
                away
            }
        };
        direction = Vec2::new(unit_w.y, -unit_w.x);
        u = unit_w * (combined_radius * inv_step - w_len);
    }

    // Permitted side is to the left of `direction`.
    HalfPlane { point: me.velocity + u * 0.5, normal: direction.perp() }
}

/// Velocities that keep the disc inside the room for one step. Only walls
/// reachable within that step contribute.
pub fn wall_half_planes(me: &Body, ws: &Workspace, dt: f64, v_max: f64) -> Vec<HalfPlane> {
    ws.wall_distances(me.position)
        .into_iter()
        .filter_map(|(d, inward)| {
            let clearance = (d - me.radius - 1e-9).max(0.0);
            (clearance < v_max * dt).then(|| HalfPlane::new(-inward * (clearance / dt), inward))
        })
        .collect()
}

pub fn orca_action(me: &AgentState, snapshot: &WorldSnapshot, params: &OrcaParams) -> Vec2 {
    let preferred = cv_action(me, snapshot.dt);
    let inflate = |b: Body| Body { radius: b.radius + params.safety_margin, ..b };
    let body = inflate(me.body());
    let range_sq = params.neighbor_dist * params.neighbor_dist;
    let mut lines = wall_half_planes(&me.body(), &snapshot.workspace, snapshot.dt, me.v_pref);
    let fixed = lines.len();
    lines.extend(
        snapshot
            .others(me.index)
            .filter(|(_, b)| (b.position - me.position).norm_sq() < range_sq)
            .map(|(_, b)| orca_half_plane(&body, &inflate(*b), params.time_horizon, snapshot.dt)),
    );
    if lines.is_empty() {
        return preferred;
    }
    match solve_lp2(&lines, preferred, me.v_pref) {
        Ok(v) => v,
        Err(infeasible) => solve_lp3_with_fixed(&lines, fixed, infeasible, me.v_pref),
    }
    .clamp_norm(me.v_pref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::PolicyTag;
    use crate::world::Workspace;

    fn state(index: usize, pos: Vec2, vel: Vec2, goal: Vec2) -> AgentState {
        AgentState {
            index,
            position: pos,
            velocity: vel,
            radius: 0.3,
            current_goal: goal,
            v_pref: 1.0,
            policy: PolicyTag::Orca,
        }
    }

    fn snapshot(agents: &[AgentState]) -> WorldSnapshot {
        WorldSnapshot {
            time: 0.0,
            dt: 0.25,
            workspace: Workspace::new(20.0, 20.0),
            bodies: agents.iter().map(|a| a.body()).collect(),
        }
    }

    #[test]
    fn no_neighbours_gives_cv() {
        let me = state(0, Vec2::new(1.0, 1.0), Vec2::ZERO, Vec2::new(1.0, 5.0));
        let far = state(1, Vec2::new(19.0, 19.0), Vec2::ZERO, Vec2::new(19.0, 19.0));
        let snap = snapshot(&[me, far]);
        let v = orca_action(&me, &snap, &OrcaParams::default());
        assert_eq!(v, cv_action(&me, 0.25));
    }

    #[test]
    fn head_on_pair_is_mirror_symmetric() {
        let a = state(0, Vec2::new(7.0, 10.0), Vec2::new(1.0, 0.0), Vec2::new(13.0, 10.0));
        let b = state(1, Vec2::new(13.0, 10.0), Vec2::new(-1.0, 0.0), Vec2::new(7.0, 10.0));
        // Break the exact tie so both pick a side.
        let a = AgentState { position: a.position + Vec2::new(0.0, 0.01), ..a };
        let b = AgentState { position: b.position - Vec2::new(0.0, 0.01), ..b };
        let a = AgentState { current_goal: a.current_goal + Vec2::new(0.0, 0.01), ..a };
        let b = AgentState { current_goal: b.current_goal - Vec2::new(0.0, 0.01), ..b };
        let snap = snapshot(&[a, b]);
        let va = orca_action(&a, &snap, &OrcaParams::default());
        let vb = orca_action(&b, &snap, &OrcaParams::default());
        assert!((va.norm() - vb.norm()).abs() < 1e-9, "{va:?} {vb:?}");
        assert!((va.x + vb.x).abs() < 1e-9);
        assert!((va.y + vb.y).abs() < 1e-9);
        assert!(va.y.abs() > 1e-3, "expected a lateral dodge, got {va:?}");
    }

    #[test]
    fn enclosed_agent_falls_back() {
        let centre = Vec2::new(10.0, 10.0);
        let me = state(0, centre, Vec2::ZERO, Vec2::new(10.0, 15.0));
        let mut agents = vec![me];
        for k in 0..6 {
            let dir = Vec2::from_angle(k as f64 * std::f64::consts::PI / 3.0);
            let mut s = state(k + 1, centre + dir * 0.6, Vec2::ZERO, centre + dir * 0.6);
            s.policy = PolicyTag::Static;
            agents.push(s);
        }
        let snap = snapshot(&agents);
        let v = orca_action(&me, &snap, &OrcaParams::default());
        assert!(v.is_finite());
        assert!(v.norm() <= 1.0 + 1e-9);
    }

    #[test]
    fn half_plane_normal_is_unit() {
        let me = Body { position: Vec2::ZERO, velocity: Vec2::new(0.5, 0.1), radius: 0.3 };
        let other = Body { position: Vec2::new(2.0, 0.3), velocity: Vec2::new(-0.4, 0.0), radius: 0.3 };
        let hp = orca_half_plane(&me, &other, 5.0, 0.25);
        assert!((hp.normal.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn walls_only_bind_within_one_step() {
        let ws = Workspace::new(10.0, 10.0);
        let me = Body { position: Vec2::new(0.4, 5.0), velocity: Vec2::ZERO, radius: 0.3 };
        let hps = wall_half_planes(&me, &ws, 0.25, 1.0);
        assert_eq!(hps.len(), 1);
        // At most 0.1 m of travel toward the left wall in one 0.25 s step.
        assert!(hps[0].slack(Vec2::new(-0.4 + 1e-6, 0.0)) > 0.0);
        assert!(hps[0].slack(Vec2::new(-0.41, 0.0)) < 0.0);
        let centre = Body { position: Vec2::new(5.0, 5.0), ..me };
        assert!(wall_half_planes(&centre, &ws, 0.25, 1.0).is_empty());
    }

    #[test]
    fn orca_agent_is_never_wall_clamped() {
        // Pressed against a wall by a neighbour: the command itself must stay legal.
        let me = state(0, Vec2::new(0.35, 5.0), Vec2::new(-0.5, 0.0), Vec2::new(0.35, 1.0));
        let other = state(1, Vec2::new(1.1, 5.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, 5.0));
        let mut s = snapshot(&[me, other]);
        s.workspace = Workspace::new(10.0, 10.0);
        let v = orca_action(&me, &s, &OrcaParams::default());
        let clamped = crate::world::clamp_action_to_walls(me.position, v, 0.3, 0.25, &s.workspace);
        assert_eq!(v, clamped);
    }
}
