use crate::geometry::Vec2;

use super::AgentState;

/// Distance below which an agent counts as sitting exactly on its goal.
pub const ARRIVAL_EPSILON: f64 = 1e-9;

/// Head straight for the goal at `v_pref`, slowing on the final step so the
/// agent lands on the goal instead of overshooting it.
pub fn cv_action(me: &AgentState, dt: f64) -> Vec2 {
    let to_goal = me.current_goal - me.position;
    let dist = to_goal.norm();
    if dist <= ARRIVAL_EPSILON {
        return Vec2::ZERO;
    }
    let speed = me.v_pref.min(dist / dt);
    to_goal * (speed / dist)
}

pub fn static_action(_me: &AgentState) -> Vec2 {
    Vec2::ZERO
}
