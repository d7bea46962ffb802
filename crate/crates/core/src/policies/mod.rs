//! Reactive navigation policies. Each one maps an agent's own state plus a
//! kinematic snapshot of the world to a commanded velocity.

mod cv;
mod lp;
mod orca;
mod reactive;
mod sfm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::world::Workspace;

pub use cv::{cv_action, static_action, ARRIVAL_EPSILON};
pub use lp::{solve_lp2, solve_lp3, solve_lp3_with_fixed, HalfPlane, Infeasible};
pub use orca::{orca_action, orca_half_plane, wall_half_planes, OrcaParams};
pub use reactive::{build_action_space, reactive_action, ActionSpace};
pub use sfm::{sfm_action, sfm_force, SfmParams};

/// Every policy the simulator knows. Humans use the first four.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyTag {
    Static,
    Cv,
    Sfm,
    Orca,
    Rp,
    MpcCv,
    MppiCv,
}

impl PolicyTag {
    pub const ALL: [PolicyTag; 7] = [
        PolicyTag::Static,
        PolicyTag::Cv,
        PolicyTag::Sfm,
        PolicyTag::Orca,
        PolicyTag::Rp,
        PolicyTag::MpcCv,
        PolicyTag::MppiCv,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyTag::Static => "static",
            PolicyTag::Cv => "cv",
            PolicyTag::Sfm => "sfm",
            PolicyTag::Orca => "orca",
            PolicyTag::Rp => "rp",
            PolicyTag::MpcCv => "mpc_cv",
            PolicyTag::MppiCv => "mppi_cv",
        }
    }

    /// Whether the tag may be assigned to a simulated human.
    pub fn is_human_policy(&self) -> bool {
        matches!(self, PolicyTag::Static | PolicyTag::Cv | PolicyTag::Sfm | PolicyTag::Orca)
    }
}

impl fmt::Display for PolicyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown policy tag `{s}`"))
    }
}

/// The publicly observable part of an agent: what everybody else can see.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Full private state of one agent, handed only to that agent's policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    /// Index of this agent within the snapshot (0 is the ego).
    pub index: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub current_goal: Vec2,
    pub v_pref: f64,
    pub policy: PolicyTag,
}

impl AgentState {
    pub fn body(&self) -> Body {
        Body { position: self.position, velocity: self.velocity, radius: self.radius }
    }
}

/// Everything a policy may observe about the world at one instant. Other
/// agents' goals and policies are deliberately absent.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSnapshot {
    pub time: f64,
    pub dt: f64,
    pub workspace: Workspace,
    pub bodies: Vec<Body>,
}

impl WorldSnapshot {
    /// Bodies other than `index`, paired with their snapshot index.
    pub fn others(&self, index: usize) -> impl Iterator<Item = (usize, &Body)> {
        self.bodies.iter().enumerate().filter(move |(j, _)| *j != index)
    }
}
