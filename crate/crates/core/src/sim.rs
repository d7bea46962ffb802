//! Fixed-timestep synchronous simulation and single-trial execution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, PolicyParams};
use crate::error::Result;
use crate::geometry::Vec2;
use crate::metrics::{path_irregularity, surface_distance};
use crate::policies::{AgentState, Body, PolicyTag, WorldSnapshot};
use crate::predictive::PredictorRegistry;
use crate::scenario::{splitmix64, Scenario};
use crate::world::{clamp_action_to_walls, Workspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub dt: f64,
    pub time_limit: f64,
    /// Ego success radius around its goal.
    pub goal_tolerance: f64,
    /// Humans switch to their next goal inside this radius.
    pub agent_goal_tolerance: f64,
    pub ego_policy: PolicyTag,
    pub ego_params: PolicyParams,
    pub human_params: PolicyParams,
    pub record_full_trajectories: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            dt: 0.25,
            time_limit: 50.0,
            goal_tolerance: 0.3,
            agent_goal_tolerance: 0.2,
            ego_policy: PolicyTag::Cv,
            ego_params: PolicyParams::default(),
            human_params: PolicyParams::default(),
            record_full_trajectories: false,
        }
    }
}

impl TrialConfig {
    pub fn with_ego(ego_policy: PolicyTag) -> Self {
        TrialConfig { ego_policy, ..Self::default() }
    }

    pub fn max_steps(&self) -> usize {
        (self.time_limit / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Mutable state of one simulated agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub v_pref: f64,
    pub policy: PolicyTag,
    pub goals: Vec<Vec2>,
    pub goal_index: usize,
}

impl Agent {
    pub fn current_goal(&self) -> Vec2 {
        self.goals[self.goal_index % self.goals.len()]
    }

    pub fn body(&self) -> Body {
        Body { position: self.position, velocity: self.velocity, radius: self.radius }
    }
}

/// Complete world state. Agent 0 is the ego.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub step: usize,
    pub dt: f64,
    pub workspace: Workspace,
    pub agents: Vec<Agent>,
}

impl WorldState {
    pub fn from_scenario(sc: &Scenario, ego_policy: PolicyTag, dt: f64) -> Self {
        let mut agents = Vec::with_capacity(sc.n + 1);
        agents.push(Agent {
            position: sc.ego_start,
            velocity: Vec2::ZERO,
            radius: sc.ego_radius,
            v_pref: sc.v_pref,
            policy: ego_policy,
            goals: vec![sc.ego_goal],
            goal_index: 0,
        });
        for i in 0..sc.n {
            agents.push(Agent {
                position: sc.starts[i],
                velocity: Vec2::ZERO,
                radius: sc.radii[i],
                v_pref: sc.v_pref,
                policy: sc.policies[i],
                goals: sc.goal_sequences[i].clone(),
                goal_index: 0,
            });
        }
        WorldState { step: 0, dt, workspace: sc.workspace, agents }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            time: self.time(),
            dt: self.dt,
            workspace: self.workspace,
            bodies: self.agents.iter().map(Agent::body).collect(),
        }
    }

    pub fn agent_state(&self, index: usize) -> AgentState {
        let a = &self.agents[index];
        AgentState {
            index,
            position: a.position,
            velocity: a.velocity,
            radius: a.radius,
            current_goal: a.current_goal(),
            v_pref: a.v_pref,
            policy: a.policy,
        }
    }
}

/// Advances the world by one step. All policies read the same pre-step
/// snapshot; commands are wall-clamped, integrated, and humans that reached
/// their goal move on to the next one in their sequence. The ego's goal never
/// advances.
pub fn step(
    world: &WorldState,
    controllers: &mut [Controller],
    rng: &mut ChaCha8Rng,
    agent_goal_tolerance: f64,
) -> WorldState {
    assert_eq!(controllers.len(), world.agents.len(), "one controller per agent");
    let snapshot = world.snapshot();
    let commands: Vec<Vec2> = controllers
        .iter_mut()
        .enumerate()
        .map(|(i, c)| c.act(&world.agent_state(i), &snapshot, rng))
        .collect();

    let mut next = world.clone();
    for (i, (agent, cmd)) in next.agents.iter_mut().zip(commands).enumerate() {
        let v = clamp_action_to_walls(agent.position, cmd, agent.radius, world.dt, &world.workspace);
        agent.velocity = v;
        agent.position += v * world.dt;
        if i > 0 && agent.position.distance(agent.current_goal()) <= agent_goal_tolerance {
            agent.goal_index = (agent.goal_index + 1) % agent.goals.len();
        }
    }
    next.step += 1;
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }

    pub fn parse(s: &str) -> Option<Outcome> {
        match s {
            "success" => Some(Outcome::Success),
            "collision" => Some(Outcome::Collision),
            "timeout" => Some(Outcome::Timeout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub time: f64,
    pub position: Vec2,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub outcome: Outcome,
    /// Set only on success.
    pub time_to_goal: Option<f64>,
    /// Smallest ego-to-agent surface distance over all recorded steps;
    /// `None` with no other agents.
    pub min_agent_distance: Option<f64>,
    pub path_irregularity: Option<f64>,
    pub steps: usize,
    /// Overlapping human pairs summed over steps. These never end a trial.
    pub human_collisions: usize,
    pub ego_radius: f64,
    pub radii: Vec<f64>,
    pub policies: Vec<PolicyTag>,
    pub ego_goal: Vec2,
    pub ego_trajectory: Vec<TrajectoryPoint>,
    /// Per human, empty unless full trajectories were requested.
    pub agent_trajectories: Vec<Vec<TrajectoryPoint>>,
}

impl TrialResult {
    /// One CSV block with columns
    /// `step,time,agent_id,x,y,vx,vy,policy_tag`; agent 0 is the ego.
    pub fn trajectory_csv(&self, ego_policy: PolicyTag) -> String {
        let mut out = String::from("step,time,agent_id,x,y,vx,vy,policy_tag\n");
        for (k, ego) in self.ego_trajectory.iter().enumerate() {
            let rows = std::iter::once((0usize, ego, ego_policy)).chain(
                self.agent_trajectories
                    .iter()
                    .enumerate()
                    .filter_map(|(j, t)| t.get(k).map(|p| (j + 1, p, self.policies[j]))),
            );
            for (id, p, tag) in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    p.step, p.time, id, p.position.x, p.position.y, p.velocity.x, p.velocity.y, tag
                ));
            }
        }
        out
    }
}

fn trajectory_point(world: &WorldState, agent: &Agent) -> TrajectoryPoint {
    TrajectoryPoint { step: world.step, time: world.time(), position: agent.position, velocity: agent.velocity }
}

/// Seed of the in-trial stream (used by sampling controllers), derived from
/// the scenario seed so every method sees the same stream.
pub fn sim_seed(scenario_seed: u64) -> u64 {
    splitmix64(scenario_seed ^ 0x5EED_5EED_5EED_5EED)
}

/// Runs one trial to success, ego collision, or timeout.
pub fn run_trial(sc: &Scenario, tc: &TrialConfig, seed: u64) -> Result<TrialResult> {
    run_trial_with(sc, tc, seed, &PredictorRegistry::with_builtins())
}

pub fn run_trial_with(
    sc: &Scenario,
    tc: &TrialConfig,
    seed: u64,
    registry: &PredictorRegistry,
) -> Result<TrialResult> {
    assert!(tc.dt > 0.0 && tc.time_limit >= tc.dt, "invalid trial timing");
    let mut world = WorldState::from_scenario(sc, tc.ego_policy, tc.dt);
    let mut controllers = Vec::with_capacity(world.agents.len());
    controllers.push(Controller::new(tc.ego_policy, &tc.ego_params, registry)?);
    for tag in &sc.policies {
        controllers.push(Controller::new(*tag, &tc.human_params, registry)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let ego_r = sc.ego_radius;
    let min_surface = |w: &WorldState| -> Option<f64> {
        let ego = &w.agents[0];
        w.agents[1..]
            .iter()
            .map(|a| surface_distance(ego.position, ego_r, a.position, a.radius))
            .reduce(f64::min)
    };

    let mut ego_trajectory = vec![trajectory_point(&world, &world.agents[0])];
    let mut agent_trajectories: Vec<Vec<TrajectoryPoint>> = if tc.record_full_trajectories {
        world.agents[1..].iter().map(|a| vec![trajectory_point(&world, a)]).collect()
    } else {
        Vec::new()
    };
    let mut min_dist = min_surface(&world);
    let mut human_collisions = 0;
    let max_steps = tc.max_steps();

    let outcome = loop {
        world = step(&world, &mut controllers, &mut rng, tc.agent_goal_tolerance);
        ego_trajectory.push(trajectory_point(&world, &world.agents[0]));
        if tc.record_full_trajectories {
            for (t, a) in agent_trajectories.iter_mut().zip(&world.agents[1..]) {
                t.push(trajectory_point(&world, a));
            }
        }
        if let Some(d) = min_surface(&world) {
            min_dist = Some(min_dist.map_or(d, |m| m.min(d)));
        }
        for i in 1..world.agents.len() {
            for j in i + 1..world.agents.len() {
                let (a, b) = (&world.agents[i], &world.agents[j]);
                if surface_distance(a.position, a.radius, b.position, b.radius) < 0.0 {
                    human_collisions += 1;
                }
            }
        }

        let ego = &world.agents[0];
        if world.agents[1..]
            .iter()
            .any(|a| surface_distance(ego.position, ego_r, a.position, a.radius) < 0.0)
        {
            break Outcome::Collision;
        }
        if ego.position.distance(sc.ego_goal) <= tc.goal_tolerance {
            break Outcome::Success;
        }
        if world.step >= max_steps {
            break Outcome::Timeout;
        }
    };

    let positions: Vec<Vec2> = ego_trajectory.iter().map(|p| p.position).collect();
    Ok(TrialResult {
        outcome,
        time_to_goal: (outcome == Outcome::Success).then(|| world.time()),
        min_agent_distance: min_dist,
        path_irregularity: path_irregularity(&positions, sc.ego_goal),
        steps: world.step,
        human_collisions,
        ego_radius: ego_r,
        radii: sc.radii.clone(),
        policies: sc.policies.clone(),
        ego_goal: sc.ego_goal,
        ego_trajectory,
        agent_trajectories,
    })
}
