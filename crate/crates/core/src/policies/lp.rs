//! Two-dimensional linear programs over velocity space: the closest velocity
//! to a preferred one inside a disc and an intersection of half-planes,
//! solved incrementally one constraint at a time.

use crate::geometry::Vec2;

const PARALLEL_EPS: f64 = 1e-12;

/// The closed half-plane `{v : (v - point) . normal >= 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub point: Vec2,
    /// Unit normal pointing into the permitted side.
    pub normal: Vec2,
}

impl HalfPlane {
    pub fn new(point: Vec2, normal: Vec2) -> Self {
        HalfPlane { point, normal: normal.normalize_or_zero() }
    }

    /// Signed distance of `v` from the boundary; negative means violated.
    pub fn slack(&self, v: Vec2) -> f64 {
        (v - self.point).dot(self.normal)
    }

    /// Boundary direction with the permitted side on its left.
    fn direction(&self) -> Vec2 {
        Vec2::new(self.normal.y, -self.normal.x)
    }

    fn from_direction(point: Vec2, direction: Vec2) -> Self {
        HalfPlane { point, normal: direction.perp() }
    }
}

/// The constraint set was empty. `failed_at` is the first half-plane that
/// could not be satisfied together with its predecessors and `partial` the
/// optimum over those predecessors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Infeasible {
    pub failed_at: usize,
    pub partial: Vec2,
}

/// Optimizes along the boundary of half-plane `line_no` subject to the
/// earlier ones and the speed disc. With `direction_opt` the target is the
/// farthest point along `target` instead of the closest point to it.
fn solve_on_line(
    lines: &[HalfPlane],
    line_no: usize,
    radius: f64,
    target: Vec2,
    direction_opt: bool,
) -> Option<Vec2> {
    let line = &lines[line_no];
    let dir = line.direction();
    let dot = line.point.dot(dir);
    let discriminant = dot * dot + radius * radius - line.point.norm_sq();
    if discriminant < 0.0 {
        return None;
    }
    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for other in &lines[..line_no] {
        let other_dir = other.direction();
        let denominator = dir.det(other_dir);
        let numerator = other_dir.det(line.point - other.point);
        if denominator.abs() <= PARALLEL_EPS {
            if numerator < 0.0 {
                return None;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return None;
        }
    }

    let t = if direction_opt {
        if target.dot(dir) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        dir.dot(target - line.point).clamp(t_left, t_right)
    };
    Some(line.point + dir * t)
}

fn solve_incremental(
    lines: &[HalfPlane],
    radius: f64,
    target: Vec2,
    direction_opt: bool,
) -> Result<Vec2, Infeasible> {
    let mut result = if direction_opt {
        target * radius
    } else {
        target.clamp_norm(radius)
    };
    for i in 0..lines.len() {
        if lines[i].slack(result) < 0.0 {
            match solve_on_line(lines, i, radius, target, direction_opt) {
                Some(v) => result = v,
                None => return Err(Infeasible { failed_at: i, partial: result }),
            }
        }
    }
    Ok(result)
}

/// Closest velocity to `preferred` satisfying every half-plane with speed at
/// most `v_max`.
pub fn solve_lp2(halfplanes: &[HalfPlane], preferred: Vec2, v_max: f64) -> Result<Vec2, Infeasible> {
    assert!(v_max > 0.0, "v_max must be positive");
    solve_incremental(halfplanes, v_max, preferred, false)
}

/// Fallback for an infeasible set: the velocity within the speed disc that
/// minimizes the largest constraint violation. `infeasible` comes from a
/// failed [`solve_lp2`] over the same constraints.
pub fn solve_lp3(halfplanes: &[HalfPlane], infeasible: Infeasible, v_max: f64) -> Vec2 {
    solve_lp3_with_fixed(halfplanes, 0, infeasible, v_max)
}

/// As [`solve_lp3`], but the first `fixed` half-planes are hard constraints
/// (static obstacles) that are never traded off. They must be jointly
/// feasible.
pub fn solve_lp3_with_fixed(halfplanes: &[HalfPlane], fixed: usize, infeasible: Infeasible, v_max: f64) -> Vec2 {
    let mut result = infeasible.partial;
    let mut distance = 0.0;
    for i in infeasible.failed_at.max(fixed)..halfplanes.len() {
        let line_i = &halfplanes[i];
        if -line_i.slack(result) <= distance {
            continue;
        }
        let dir_i = line_i.direction();
        let mut projected = halfplanes[..fixed].to_vec();
        for line_j in &halfplanes[fixed..i] {
            let dir_j = line_j.direction();
            let determinant = dir_i.det(dir_j);
            let point = if determinant.abs() <= PARALLEL_EPS {
                if dir_i.dot(dir_j) > 0.0 {
                    continue;
                }
                (line_i.point + line_j.point) * 0.5
            } else {
                line_i.point + dir_i * (dir_j.det(line_i.point - line_j.point) / determinant)
            };
            projected.push(HalfPlane::from_direction(point, (dir_j - dir_i).normalize_or_zero()));
        }
        let target = Vec2::new(-dir_i.y, dir_i.x);
        if let Ok(v) = solve_incremental(&projected, v_max, target, true) {
            result = v;
        }
        distance = -line_i.slack(result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_returns_preferred() {
        let v = solve_lp2(&[], Vec2::new(0.3, -0.4), 1.0).unwrap();
        assert_eq!(v, Vec2::new(0.3, -0.4));
    }

    #[test]
    fn preferred_outside_disc_is_scaled() {
        let v = solve_lp2(&[], Vec2::new(3.0, 4.0), 1.0).unwrap();
        assert!((v - Vec2::new(0.6, 0.8)).norm() < 1e-12);
    }

    #[test]
    fn projects_onto_single_boundary() {
        let hp = HalfPlane::new(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0));
        let v = solve_lp2(&[hp], Vec2::ZERO, 2.0).unwrap();
        assert!((v - Vec2::new(1.0, 0.0)).norm() < 1e-12, "{v:?}");
    }

    #[test]
    fn opposing_half_planes_are_infeasible() {
        let a = HalfPlane::new(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0));
        let b = HalfPlane::new(Vec2::new(-1.0, 0.0), Vec2::new(-1.0, 0.0));
        assert!(solve_lp2(&[a, b], Vec2::ZERO, 5.0).is_err());
    }

    #[test]
    fn half_plane_beyond_speed_disc_is_infeasible() {
        let a = HalfPlane::new(Vec2::new(3.0, 0.0), Vec2::new(1.0, 0.0));
        let err = solve_lp2(&[a], Vec2::ZERO, 1.0).unwrap_err();
        assert_eq!(err.failed_at, 0);
    }

    #[test]
    fn lp3_balances_violation() {
        // x >= 1 and x <= -1: the least-worst point sits on x = 0.
        let a = HalfPlane::new(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0));
        let b = HalfPlane::new(Vec2::new(-1.0, 0.0), Vec2::new(-1.0, 0.0));
        let lines = [a, b];
        let err = solve_lp2(&lines, Vec2::ZERO, 5.0).unwrap_err();
        let v = solve_lp3(&lines, err, 5.0);
        assert!(v.x.abs() < 1e-9, "{v:?}");
        assert!(v.norm() <= 5.0 + 1e-9);
    }

    #[test]
    fn lp3_keeps_fixed_constraints() {
        // A hard wall at x >= 0.5 against two agent constraints pulling left.
        let wall = HalfPlane::new(Vec2::new(0.5, 0.0), Vec2::new(1.0, 0.0));
        let a = HalfPlane::new(Vec2::new(-0.5, 0.0), Vec2::new(-1.0, 0.0));
        let b = HalfPlane::new(Vec2::new(0.0, 0.8), Vec2::new(0.0, 1.0));
        let lines = [wall, a, b];
        let err = solve_lp2(&lines, Vec2::ZERO, 1.0).unwrap_err();
        let v = solve_lp3_with_fixed(&lines, 1, err, 1.0);
        assert!(wall.slack(v) >= -1e-12, "{v:?}");
        let free = solve_lp3(&lines, err, 1.0);
        assert!(wall.slack(free) < 0.0, "{free:?}");
    }
}
