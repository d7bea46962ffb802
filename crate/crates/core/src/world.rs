//! Workspace geometry: a rectangular room whose complement is the obstacle
//! region, plus the wall-clamping rule every policy's command goes through.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

/// Axis-aligned room `[0, w] x [0, l]`. Everything outside is obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub w: f64,
    pub l: f64,
}

impl Workspace {
    pub fn new(w: f64, l: f64) -> Self {
        assert!(w > 0.0 && l > 0.0, "workspace extents must be positive");
        Workspace { w, l }
    }

    pub fn area(&self) -> f64 {
        self.w * self.l
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.w / 2.0, self.l / 2.0)
    }

    /// The four wall distances from `p` paired with the unit normal pointing
    /// from the wall back into the room: left, right, bottom, top.
    pub fn wall_distances(&self, p: Vec2) -> [(f64, Vec2); 4] {
        [
            (p.x, Vec2::new(1.0, 0.0)),
            (self.w - p.x, Vec2::new(-1.0, 0.0)),
            (p.y, Vec2::new(0.0, 1.0)),
            (self.l - p.y, Vec2::new(0.0, -1.0)),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Vec2, radius: f64) -> Self {
        debug_assert!(radius > 0.0);
        Disc { center, radius }
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

/// Smallest distance from the disc edge to any wall; negative when the disc
/// overlaps the obstacle region.
pub fn wall_clearance(p: Vec2, r: f64, ws: &Workspace) -> f64 {
    p.x.min(ws.w - p.x).min(p.y).min(ws.l - p.y) - r
}

/// Zeroes each velocity component that would carry the disc across a wall
/// within one step of length `dt`. Tangential components are untouched.
pub fn clamp_action_to_walls(p: Vec2, v: Vec2, r: f64, dt: f64, ws: &Workspace) -> Vec2 {
    debug_assert!(dt > 0.0);
    let next = p + v * dt;
    let mut out = v;
    if (v.x < 0.0 && next.x - r < 0.0) || (v.x > 0.0 && next.x + r > ws.w) {
        out.x = 0.0;
    }
    if (v.y < 0.0 && next.y - r < 0.0) || (v.y > 0.0 && next.y + r > ws.l) {
        out.y = 0.0;
    }
    out
}

/// Strict overlap test; tangent discs do not collide.
pub fn discs_collide(a: &Disc, b: &Disc) -> bool {
    a.center.distance(b.center) < a.radius + b.radius
}
