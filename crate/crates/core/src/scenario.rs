//! Scenario construction: the base room, the four single-factor sweeps, and
//! seeded sampling of agent starts and goal sequences.

use std::f64::consts::TAU;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::policies::PolicyTag;
use crate::world::{wall_clearance, Workspace};

pub const DENSITY_LEVELS: [f64; 7] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35];
pub const WIDTH_LEVELS: [f64; 7] = [4.5, 4.0, 3.5, 3.0, 2.5, 2.0, 1.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Density,
    Directionality,
    #[serde(alias = "policy_mixture")]
    Mixture,
    Width,
}

impl Factor {
    pub const ALL: [Factor; 4] = [Factor::Density, Factor::Directionality, Factor::Mixture, Factor::Width];

    pub fn as_str(&self) -> &'static str {
        match self {
            Factor::Density => "density",
            Factor::Directionality => "directionality",
            Factor::Mixture => "mixture",
            Factor::Width => "width",
        }
    }

    pub fn parse(s: &str) -> Result<Factor> {
        match s.to_ascii_lowercase().as_str() {
            "density" => Ok(Factor::Density),
            "directionality" => Ok(Factor::Directionality),
            "mixture" | "policy_mixture" => Ok(Factor::Mixture),
            "width" => Ok(Factor::Width),
            _ => Err(Error::InvalidSweep(s.to_string())),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directionality {
    PassingOnly,
    CrossingOnly,
    PassingAndCrossing,
    CircleCrossing,
    Random,
}

impl Directionality {
    pub const ALL: [Directionality; 5] = [
        Directionality::PassingOnly,
        Directionality::CrossingOnly,
        Directionality::PassingAndCrossing,
        Directionality::CircleCrossing,
        Directionality::Random,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Directionality::PassingOnly => "passing_only",
            Directionality::CrossingOnly => "crossing_only",
            Directionality::PassingAndCrossing => "passing_and_crossing",
            Directionality::CircleCrossing => "circle_crossing",
            Directionality::Random => "random",
        }
    }
}

/// Head counts per human policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub orca: usize,
    pub sfm: usize,
    pub cv: usize,
    #[serde(rename = "static")]
    pub static_: usize,
}

impl MixtureSpec {
    pub const fn new(orca: usize, sfm: usize, cv: usize, static_: usize) -> Self {
        MixtureSpec { orca, sfm, cv, static_ }
    }

    pub fn total(&self) -> usize {
        self.orca + self.sfm + self.cv + self.static_
    }

    /// Roughly even ORCA/SFM split, ORCA taking the odd agent.
    pub fn cooperative(n: usize) -> Self {
        MixtureSpec::new(n.div_ceil(2), n / 2, 0, 0)
    }

    fn tags(&self) -> Vec<PolicyTag> {
        let mut v = Vec::with_capacity(self.total());
        v.extend(std::iter::repeat_n(PolicyTag::Orca, self.orca));
        v.extend(std::iter::repeat_n(PolicyTag::Sfm, self.sfm));
        v.extend(std::iter::repeat_n(PolicyTag::Cv, self.cv));
        v.extend(std::iter::repeat_n(PolicyTag::Static, self.static_));
        v
    }
}

/// The mixture levels from least to most complex.
pub const MIXTURES: [(&str, MixtureSpec); 5] = [
    ("sfm_only", MixtureSpec::new(0, 15, 0, 0)),
    ("orca_only", MixtureSpec::new(15, 0, 0, 0)),
    ("mix_1", MixtureSpec::new(8, 7, 0, 0)),
    ("mix_2", MixtureSpec::new(5, 5, 2, 3)),
    ("mix_3", MixtureSpec::new(4, 4, 4, 3)),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelValue {
    Density { agents_per_m2: f64 },
    Directionality { tag: Directionality },
    Mixture { label: String, spec: MixtureSpec },
    Width { meters: f64 },
}

/// One point of one factor sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCondition {
    pub factor: Factor,
    /// Ordinal intensity, 0 is the least complex level.
    pub level_index: usize,
    pub level: LevelValue,
}

impl SweepCondition {
    pub fn levels(factor: Factor) -> Vec<SweepCondition> {
        let mk = |level_index, level| SweepCondition { factor, level_index, level };
        match factor {
            Factor::Density => DENSITY_LEVELS
                .iter()
                .enumerate()
                .map(|(i, &d)| mk(i, LevelValue::Density { agents_per_m2: d }))
                .collect(),
            Factor::Directionality => Directionality::ALL
                .iter()
                .enumerate()
                .map(|(i, &tag)| mk(i, LevelValue::Directionality { tag }))
                .collect(),
            Factor::Mixture => MIXTURES
                .iter()
                .enumerate()
                .map(|(i, (label, spec))| mk(i, LevelValue::Mixture { label: label.to_string(), spec: *spec }))
                .collect(),
            Factor::Width => WIDTH_LEVELS
                .iter()
                .enumerate()
                .map(|(i, &w)| mk(i, LevelValue::Width { meters: w }))
                .collect(),
        }
    }

    /// Human-readable level, e.g. `0.15`, `circle_crossing`, `mix_2`.
    pub fn label(&self) -> String {
        match &self.level {
            LevelValue::Density { agents_per_m2 } => format!("{agents_per_m2:.2}"),
            LevelValue::Directionality { tag } => tag.as_str().to_string(),
            LevelValue::Mixture { label, .. } => label.clone(),
            LevelValue::Width { meters } => format!("{meters:.1}"),
        }
    }

    /// Stable identifier such as `density-0.15` or `mixture-mix_2`.
    pub fn id(&self) -> String {
        format!("{}-{}", self.factor, self.label())
    }
}

/// Every sweep condition in canonical order: density, directionality,
/// mixture, width. A condition's position here is its global index.
pub fn all_conditions() -> Vec<SweepCondition> {
    Factor::ALL.iter().flat_map(|&f| SweepCondition::levels(f)).collect()
}

pub fn condition_index(cond: &SweepCondition) -> usize {
    all_conditions()
        .iter()
        .position(|c| c == cond)
        .expect("condition is one of the canonical sweep levels")
}

pub fn find_condition(id: &str) -> Result<SweepCondition> {
    all_conditions()
        .into_iter()
        .find(|c| c.id() == id)
        .ok_or_else(|| Error::UnknownCondition(id.to_string()))
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scenario seed for one trial: `m(m(m(experiment) ^ condition) ^ trial)`
/// with `m` = SplitMix64. Depends on nothing else, so every method and every
/// execution order sees the same scenario.
pub fn trial_seed(experiment_seed: u64, condition_index: usize, trial_index: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(experiment_seed) ^ condition_index as u64) ^ trial_index as u64)
}

/// Tunables of the generator. Defaults reproduce the base room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub room_width: f64,
    pub room_length: f64,
    pub base_agents: usize,
    pub radius: f64,
    pub v_pref: f64,
    /// Ego start/goal distance from the bottom/top wall.
    pub ego_offset: f64,
    pub min_separation: f64,
    /// Lane distance from the walls.
    pub margin: f64,
    pub max_attempts: usize,
    pub goal_sequence_len: usize,
    pub circle_radius: f64,
    pub circle_noise: f64,
    /// Largest lane deviation from the travel axis, in degrees.
    pub lane_spread_deg: f64,
    pub random_min_travel: f64,
    /// Static agents keep at least this much distance from the ego goal.
    pub static_goal_clearance: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            room_width: 10.0,
            room_length: 10.0,
            base_agents: 15,
            radius: 0.3,
            v_pref: 1.0,
            ego_offset: 1.0,
            min_separation: 2.0 * 0.3 + 0.2,
            margin: 0.5,
            max_attempts: 1000,
            goal_sequence_len: 10,
            circle_radius: 4.0,
            circle_noise: 0.5,
            lane_spread_deg: 15.0,
            random_min_travel: 2.0,
            static_goal_clearance: 1.0,
        }
    }
}

impl ScenarioParams {
    fn base_workspace(&self) -> Workspace {
        Workspace::new(self.room_width, self.room_length)
    }

    fn circle_radius_for(&self, ws: &Workspace) -> f64 {
        self.circle_radius
            .min(ws.w.min(ws.l) / 2.0 - self.margin - self.circle_noise)
            .max(0.0)
    }
}

/// One complete, reproducible trial setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub ego_start: Vec2,
    pub ego_goal: Vec2,
    pub starts: Vec<Vec2>,
    pub goal_sequences: Vec<Vec<Vec2>>,
    pub policies: Vec<PolicyTag>,
    pub workspace: Workspace,
    pub v_pref: f64,
    pub radii: Vec<f64>,
    pub ego_radius: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(s: &str) -> Result<Scenario> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("invalid scenario JSON: {e}")))
    }

    /// First 64 bits of SHA-256 over the compact JSON form.
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_json().as_bytes());
        u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.hash())
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn validate(&self, min_separation: f64) -> std::result::Result<(), String> {
        let n = self.n;
        if self.starts.len() != n || self.goal_sequences.len() != n || self.policies.len() != n || self.radii.len() != n {
            return Err("per-agent list lengths differ from n".into());
        }
        let ws = &self.workspace;
        let all_starts = std::iter::once((self.ego_start, self.ego_radius))
            .chain(self.starts.iter().copied().zip(self.radii.iter().copied()));
        for (p, r) in all_starts.clone() {
            if wall_clearance(p, r, ws) < 0.0 {
                return Err(format!("start {p:?} overlaps a wall"));
            }
        }
        if wall_clearance(self.ego_goal, self.ego_radius, ws) < 0.0 {
            return Err("ego goal overlaps a wall".into());
        }
        for (seq, &r) in self.goal_sequences.iter().zip(&self.radii) {
            if let Some(g) = seq.iter().find(|g| wall_clearance(**g, r, ws) < 0.0) {
                return Err(format!("goal {g:?} overlaps a wall"));
            }
        }
        let pts: Vec<Vec2> = all_starts.map(|(p, _)| p).collect();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if pts[i].distance(pts[j]) < min_separation {
                    return Err(format!("starts {i} and {j} closer than {min_separation}"));
                }
            }
        }
        Ok(())
    }
}

/// `round(d * area)`.
pub fn agents_for_density(d: f64, ws: &Workspace) -> usize {
    assert!(d >= 0.0, "density must be non-negative");
    (d * ws.area()).round() as usize
}

/// How an individual agent picks its successive goals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Passing,
    Crossing,
    Circle,
    Random,
}

fn route_for<R: Rng + ?Sized>(tag: Directionality, rng: &mut R) -> Route {
    match tag {
        Directionality::PassingOnly => Route::Passing,
        Directionality::CrossingOnly => Route::Crossing,
        Directionality::PassingAndCrossing => {
            if rng.random_bool(0.5) {
                Route::Passing
            } else {
                Route::Crossing
            }
        }
        Directionality::CircleCrossing => Route::Circle,
        Directionality::Random => Route::Random,
    }
}

fn uniform_in_disc<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Vec2 {
    let r = radius * rng.random::<f64>().sqrt();
    Vec2::from_angle(rng.random_range(0.0..TAU)) * r
}

/// `[lo, hi]` shrunk by `margin` on both ends, collapsing to the midpoint
/// when the interval is too short.
fn inset(lo: f64, hi: f64, margin: f64) -> (f64, f64) {
    if hi - lo > 2.0 * margin {
        (lo + margin, hi - margin)
    } else {
        let mid = (lo + hi) / 2.0;
        (mid, mid)
    }
}

fn uniform_between<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

struct Sampler<'a> {
    ws: Workspace,
    params: &'a ScenarioParams,
    condition: String,
}

impl Sampler<'_> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::ScenarioGeneration { condition: self.condition.clone(), reason: reason.into() }
    }

    fn lane_span(&self) -> ((f64, f64), (f64, f64)) {
        let m = self.params.margin;
        (inset(0.0, self.ws.w, m), inset(0.0, self.ws.l, m))
    }

    fn circle_point<R: Rng + ?Sized>(&self, angle: f64, rng: &mut R) -> Vec2 {
        let c = self.ws.center();
        c + Vec2::from_angle(angle) * self.params.circle_radius_for(&self.ws)
            + uniform_in_disc(rng, self.params.circle_noise)
    }

    /// The goal that follows `from` for an agent on `route`.
    fn next_goal<R: Rng + ?Sized>(&self, route: Route, from: Vec2, rng: &mut R) -> Result<Vec2> {
        let ((x_lo, x_hi), (y_lo, y_hi)) = self.lane_span();
        let tan = self.params.lane_spread_deg.to_radians().tan();
        Ok(match route {
            Route::Passing => {
                let y = if from.y < self.ws.l / 2.0 { y_hi } else { y_lo };
                let spread = (y - from.y).abs() * tan;
                let x = (from.x + uniform_between(rng, -spread, spread)).clamp(x_lo, x_hi);
                Vec2::new(x, y)
            }
            Route::Crossing => {
                let x = if from.x < self.ws.w / 2.0 { x_hi } else { x_lo };
                let spread = (x - from.x).abs() * tan;
                let y = (from.y + uniform_between(rng, -spread, spread)).clamp(y_lo, y_hi);
                Vec2::new(x, y)
            }
            Route::Circle => {
                let rel = from - self.ws.center();
                let angle = if rel.norm() > 1e-9 {
                    rel.angle() + std::f64::consts::PI
                } else {
                    rng.random_range(0.0..TAU)
                };
                self.circle_point(angle, rng)
            }
            Route::Random => {
                for _ in 0..self.params.max_attempts {
                    let p = Vec2::new(uniform_between(rng, x_lo, x_hi), uniform_between(rng, y_lo, y_hi));
                    if p.distance(from) >= self.params.random_min_travel {
                        return Ok(p);
                    }
                }
                return Err(self.fail("no random goal far enough from the current position"));
            }
        })
    }

    fn lane_start<R: Rng + ?Sized>(&self, route: Route, rng: &mut R) -> Vec2 {
        let ((x_lo, x_hi), (y_lo, y_hi)) = self.lane_span();
        match route {
            Route::Passing => Vec2::new(
                uniform_between(rng, x_lo, x_hi),
                if rng.random_bool(0.5) { y_lo } else { y_hi },
            ),
            Route::Crossing => Vec2::new(
                if rng.random_bool(0.5) { x_lo } else { x_hi },
                uniform_between(rng, y_lo, y_hi),
            ),
            Route::Circle => self.circle_point(rng.random_range(0.0..TAU), rng),
            Route::Random => Vec2::new(uniform_between(rng, x_lo, x_hi), uniform_between(rng, y_lo, y_hi)),
        }
    }

    /// Where an agent is standing when the trial begins. Circle-crossing
    /// agents start on the circle; everyone else anywhere in the room, as if
    /// already under way.
    fn initial_position<R: Rng + ?Sized>(&self, route: Route, radius: f64, rng: &mut R) -> Vec2 {
        match route {
            Route::Circle => self.lane_start(route, rng),
            _ => Vec2::new(
                uniform_between(rng, radius, self.ws.w - radius),
                uniform_between(rng, radius, self.ws.l - radius),
            ),
        }
    }
}

/// One start/goal pair drawn from a directionality pattern.
pub fn sample_start_goal<R: Rng + ?Sized>(
    tag: Directionality,
    ws: &Workspace,
    params: &ScenarioParams,
    rng: &mut R,
) -> Result<(Vec2, Vec2)> {
    let sampler = Sampler { ws: *ws, params, condition: tag.as_str().to_string() };
    let route = route_for(tag, rng);
    let start = sampler.lane_start(route, rng);
    let goal = sampler.next_goal(route, start, rng)?;
    Ok((start, goal))
}

const PLACEMENT_GRID_STEP: f64 = 0.05;

fn placement_grid(ws: &Workspace, r: f64) -> impl Iterator<Item = Vec2> {
    let nx = ((ws.w - 2.0 * r) / PLACEMENT_GRID_STEP).floor().max(0.0) as usize;
    let ny = ((ws.l - 2.0 * r) / PLACEMENT_GRID_STEP).floor().max(0.0) as usize;
    (0..=ny).flat_map(move |j| {
        (0..=nx).map(move |i| Vec2::new(r + i as f64 * PLACEMENT_GRID_STEP, r + j as f64 * PLACEMENT_GRID_STEP))
    })
}

const PLACEMENT_PASSES: usize = 50;

/// One sequential placement pass; `None` if some agent found no room.
fn place_starts<R: Rng + ?Sized>(
    policies: &[PolicyTag],
    routes: &[Route],
    sampler: &Sampler<'_>,
    ego_start: Vec2,
    ego_goal: Vec2,
    rng: &mut R,
) -> Option<Vec<Vec2>> {
    let (ws, params) = (sampler.ws, sampler.params);
    let r = params.radius;
    let mut starts: Vec<Vec2> = Vec::with_capacity(policies.len());
    for (&policy, &route) in policies.iter().zip(routes) {
        let clear = |p: Vec2| {
            wall_clearance(p, r, &ws) >= 0.0
                && p.distance(ego_start) >= params.min_separation
                && starts.iter().all(|q| p.distance(*q) >= params.min_separation)
                && (policy != PolicyTag::Static || p.distance(ego_goal) >= params.static_goal_clearance)
        };
        let mut placed = (0..params.max_attempts)
            .map(|_| sampler.initial_position(route, r, rng))
            .find(|p| clear(*p));
        if placed.is_none() {
            // Crowded rooms: pick uniformly among the free points of a fine grid.
            let free: Vec<Vec2> = placement_grid(&ws, r).filter(|p| clear(*p)).collect();
            if !free.is_empty() {
                placed = Some(free[rng.random_range(0..free.len())]);
            }
        }
        starts.push(placed?);
    }
    Some(starts)
}

struct Setup {
    ws: Workspace,
    directionality: Directionality,
    mixture: MixtureSpec,
    label: String,
}

fn generate(setup: Setup, seed: u64, params: &ScenarioParams) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ws = setup.ws;
    let sampler = Sampler { ws, params, condition: setup.label };
    let r = params.radius;
    let ego_start = Vec2::new(ws.w / 2.0, params.ego_offset);
    let ego_goal = Vec2::new(ws.w / 2.0, ws.l - params.ego_offset);

    let mut policies = setup.mixture.tags();
    policies.shuffle(&mut rng);
    let n = policies.len();

    let routes: Vec<Route> = (0..n).map(|_| route_for(setup.directionality, &mut rng)).collect();
    let mut starts = None;
    for _ in 0..PLACEMENT_PASSES {
        starts = place_starts(&policies, &routes, &sampler, ego_start, ego_goal, &mut rng);
        if starts.is_some() {
            break;
        }
    }
    let starts = starts.ok_or_else(|| {
        sampler.fail(format!("no room for {n} agents after {PLACEMENT_PASSES} placement passes"))
    })?;

    let mut goal_sequences = Vec::with_capacity(n);
    for ((&policy, &route), &start) in policies.iter().zip(&routes).zip(&starts) {
        let goals = if policy == PolicyTag::Static {
            vec![start; params.goal_sequence_len]
        } else {
            let mut seq = Vec::with_capacity(params.goal_sequence_len);
            let mut from = start;
            for _ in 0..params.goal_sequence_len {
                let g = sampler.next_goal(route, from, &mut rng)?;
                seq.push(g);
                from = g;
            }
            seq
        };
        goal_sequences.push(goals);
    }

    Ok(Scenario {
        n,
        ego_start,
        ego_goal,
        starts,
        goal_sequences,
        policies,
        workspace: ws,
        v_pref: params.v_pref,
        radii: vec![r; n],
        ego_radius: r,
        seed,
    })
}

/// The unmodified base room: 15 agents (8 ORCA, 7 SFM) passing and crossing
/// in a 10 x 10 m room.
pub fn base_scenario(seed: u64) -> Scenario {
    base_scenario_with(seed, &ScenarioParams::default()).expect("base scenario is always feasible")
}

pub fn base_scenario_with(seed: u64, params: &ScenarioParams) -> Result<Scenario> {
    let setup = Setup {
        ws: params.base_workspace(),
        directionality: Directionality::PassingAndCrossing,
        mixture: MixtureSpec::cooperative(params.base_agents),
        label: "base".to_string(),
    };
    generate(setup, seed, params)
}

/// The base scenario with exactly one factor set to `cond`'s level.
pub fn sample_scenario(cond: &SweepCondition, seed: u64) -> Result<Scenario> {
    sample_scenario_with(cond, seed, &ScenarioParams::default())
}

pub fn sample_scenario_with(cond: &SweepCondition, seed: u64, params: &ScenarioParams) -> Result<Scenario> {
    let mut setup = Setup {
        ws: params.base_workspace(),
        directionality: Directionality::PassingAndCrossing,
        mixture: MixtureSpec::cooperative(params.base_agents),
        label: cond.id(),
    };
    match &cond.level {
        LevelValue::Density { agents_per_m2 } => {
            setup.mixture = MixtureSpec::cooperative(agents_for_density(*agents_per_m2, &setup.ws));
        }
        LevelValue::Directionality { tag } => setup.directionality = *tag,
        LevelValue::Mixture { spec, .. } => setup.mixture = *spec,
        LevelValue::Width { meters } => setup.ws = Workspace::new(*meters, params.room_length),
    }
    generate(setup, seed, params)
}
