//! Social force model: a relaxation force toward the goal plus exponential
//! repulsion from other agents and from the walls.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

use super::{AgentState, WorldSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfmParams {
    /// Relaxation time toward the preferred velocity (s).
    pub tau: f64,
    /// Agent repulsion strength (m/s^2) and range (m).
    pub a: f64,
    pub b: f64,
    /// Wall repulsion strength (m/s^2) and range (m).
    pub a_wall: f64,
    pub b_wall: f64,
    /// Cap on any single repulsion term (m/s^2).
    pub f_max: f64,
}

impl Default for SfmParams {
    fn default() -> Self {
        SfmParams { tau: 0.5, a: 5.0, b: 0.35, a_wall: 5.0, b_wall: 0.2, f_max: 10.0 }
    }
}

const COINCIDENT_EPS: f64 = 1e-9;

/// Fixed pseudo-random unit vector for a coincident pair, antisymmetric in
/// the indices so the two agents are pushed apart.
fn coincident_direction(i: usize, j: usize) -> Vec2 {
    let (lo, hi, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
    let mut h = (lo as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (hi as u64).wrapping_add(0x632B_E59B_D9B4_E019);
    h ^= h >> 31;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 29;
    let angle = (h >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU;
    Vec2::from_angle(angle) * sign
}

/// Total acceleration acting on `me`.
pub fn sfm_force(me: &AgentState, snapshot: &WorldSnapshot, params: &SfmParams) -> Vec2 {
    let to_goal = (me.current_goal - me.position).normalize_or_zero();
    let mut force = (to_goal * me.v_pref - me.velocity) / params.tau;

    for (j, other) in snapshot.others(me.index) {
        let offset = me.position - other.position;
        let dist = offset.norm();
        let magnitude = (params.a * ((me.radius + other.radius - dist) / params.b).exp()).min(params.f_max);
        let direction = if dist < COINCIDENT_EPS {
            coincident_direction(me.index, j)
        } else {
            offset / dist
        };
        force += direction * magnitude;
    }

    for (dist, normal) in snapshot.workspace.wall_distances(me.position) {
        let magnitude = (params.a_wall * ((me.radius - dist) / params.b_wall).exp()).min(params.f_max);
        force += normal * magnitude;
    }
    force
}

pub fn sfm_action(me: &AgentState, snapshot: &WorldSnapshot, params: &SfmParams) -> Vec2 {
    let force = sfm_force(me, snapshot, params);
    (me.velocity + force * snapshot.dt).clamp_norm(me.v_pref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{Body, PolicyTag};
    use crate::world::Workspace;

    fn state(index: usize, pos: Vec2, goal: Vec2) -> AgentState {
        AgentState {
            index,
            position: pos,
            velocity: Vec2::ZERO,
            radius: 0.3,
            current_goal: goal,
            v_pref: 1.0,
            policy: PolicyTag::Sfm,
        }
    }

    fn snap(ws: Workspace, bodies: Vec<Body>) -> WorldSnapshot {
        WorldSnapshot { time: 0.0, dt: 0.25, workspace: ws, bodies }
    }

    #[test]
    fn isolated_agent_feels_only_driving_force() {
        let me = state(0, Vec2::new(50.0, 50.0), Vec2::new(55.0, 50.0));
        let s = snap(Workspace::new(100.0, 100.0), vec![me.body()]);
        let f = sfm_force(&me, &s, &SfmParams::default());
        assert!((f - Vec2::new(2.0, 0.0)).norm() < 1e-12, "{f:?}");
        let v = sfm_action(&me, &s, &SfmParams::default());
        assert!(v.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn touching_pair_repels_with_strength_a() {
        let params = SfmParams::default();
        let mut me = state(0, Vec2::new(50.0, 50.0), Vec2::new(50.0, 50.0));
        me.v_pref = 0.0;
        let other = state(1, Vec2::new(50.6, 50.0), Vec2::new(50.6, 50.0));
        let s = snap(Workspace::new(100.0, 100.0), vec![me.body(), other.body()]);
        let f = sfm_force(&me, &s, &params);
        assert!((f - Vec2::new(-params.a, 0.0)).norm() < 1e-12, "{f:?}");
    }

    #[test]
    fn three_agents_match_term_by_term_sum() {
        let p = SfmParams { tau: 0.7, a: 3.0, b: 0.4, a_wall: 4.0, b_wall: 0.3, f_max: 50.0 };
        let ws = Workspace::new(4.0, 3.0);
        let mut me = state(0, Vec2::new(0.6, 1.0), Vec2::new(3.0, 2.5));
        me.velocity = Vec2::new(0.2, -0.1);
        let b1 = Body { position: Vec2::new(1.3, 1.2), velocity: Vec2::ZERO, radius: 0.3 };
        let b2 = Body { position: Vec2::new(0.5, 1.9), velocity: Vec2::ZERO, radius: 0.25 };
        let s = snap(ws, vec![me.body(), b1, b2]);
        let f = sfm_force(&me, &s, &p);

        // Written out longhand.
        let (px, py) = (0.6f64, 1.0f64);
        let (gx, gy) = (3.0 - px, 2.5 - py);
        let gl = (gx * gx + gy * gy).sqrt();
        let mut fx = (gx / gl - 0.2) / 0.7;
        let mut fy = (gy / gl + 0.1) / 0.7;
        for (qx, qy, rj) in [(1.3f64, 1.2f64, 0.3f64), (0.5, 1.9, 0.25)] {
            let (dx, dy) = (px - qx, py - qy);
            let d = (dx * dx + dy * dy).sqrt();
            let m = 3.0 * ((0.3 + rj - d) / 0.4).exp();
            fx += m * dx / d;
            fy += m * dy / d;
        }
        fx += 4.0 * ((0.3 - px) / 0.3).exp();
        fx -= 4.0 * ((0.3 - (4.0 - px)) / 0.3).exp();
        fy += 4.0 * ((0.3 - py) / 0.3).exp();
        fy -= 4.0 * ((0.3 - (3.0 - py)) / 0.3).exp();
        assert!((f.x - fx).abs() < 1e-12 && (f.y - fy).abs() < 1e-12, "{f:?} vs ({fx}, {fy})");
    }

    #[test]
    fn coincident_agents_are_pushed_apart() {
        let params = SfmParams::default();
        let a = state(0, Vec2::new(50.0, 50.0), Vec2::new(50.0, 50.0));
        let b = state(1, Vec2::new(50.0, 50.0), Vec2::new(50.0, 50.0));
        let s = snap(Workspace::new(100.0, 100.0), vec![a.body(), b.body()]);
        let fa = sfm_force(&a, &s, &params);
        let fb = sfm_force(&b, &s, &params);
        let expected = (params.a * (0.6 / params.b).exp()).min(params.f_max);
        assert!((fa.norm() - expected).abs() < 1e-9);
        assert!((fa + fb).norm() < 1e-9);
    }
}
