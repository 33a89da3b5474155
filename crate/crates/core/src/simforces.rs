//! Social-forces crowd simulation.
//!
//! Each agent is driven toward its goal by a relaxation term and pushed away
//! from other agents and the nearest obstacle cell by exponential
//! repulsions. Gaussian noise on the acceleration makes the generated
//! trajectories stochastic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{update_heading, AgentState, Dataset, Trajectory, Vec2, WorldMap};
use crate::scalar::Scalar;

/// Goal samples drawn before [`sample_goal`] gives up.
pub const MAX_GOAL_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfParams {
    pub desired_speed_mean: f64,
    pub desired_speed_std: f64,
    pub desired_speed_min: f64,
    pub desired_speed_max: f64,
    /// Relaxation time τ (s).
    pub relaxation_time: f64,
    pub agent_repulsion_strength: f64,
    pub agent_repulsion_range: f64,
    pub obstacle_repulsion_strength: f64,
    pub obstacle_repulsion_range: f64,
    /// Obstacle cells farther than this exert no force (m).
    pub obstacle_search_radius: f64,
    pub agent_radius: f64,
    /// Standard deviation of the per-axis acceleration noise (m/s²).
    pub force_noise_std: f64,
    /// Speed limit as a multiple of the agent's desired speed.
    pub max_speed_factor: f64,
    pub goal_radius: f64,
}

impl Default for SfParams {
    fn default() -> Self {
        Self {
            desired_speed_mean: 1.34,
            desired_speed_std: 0.26,
            desired_speed_min: 0.5,
            desired_speed_max: 2.2,
            relaxation_time: 0.5,
            agent_repulsion_strength: 2.1,
            agent_repulsion_range: 0.3,
            obstacle_repulsion_strength: 10.0,
            obstacle_repulsion_range: 0.2,
            obstacle_search_radius: 3.0,
            agent_radius: 0.3,
            force_noise_std: 0.3,
            max_speed_factor: 1.3,
            goal_radius: 0.5,
        }
    }
}

impl SfParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("desired_speed_mean", self.desired_speed_mean),
            ("desired_speed_min", self.desired_speed_min),
            ("relaxation_time", self.relaxation_time),
            ("agent_repulsion_strength", self.agent_repulsion_strength),
            ("agent_repulsion_range", self.agent_repulsion_range),
            ("obstacle_repulsion_strength", self.obstacle_repulsion_strength),
            ("obstacle_repulsion_range", self.obstacle_repulsion_range),
            ("obstacle_search_radius", self.obstacle_search_radius),
            ("agent_radius", self.agent_radius),
            ("max_speed_factor", self.max_speed_factor),
            ("goal_radius", self.goal_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.force_noise_std < 0.0 || self.desired_speed_std < 0.0 {
            return Err(Error::Config("standard deviations must be non-negative".into()));
        }
        if self.desired_speed_max < self.desired_speed_min {
            return Err(Error::Config("desired speed bounds are inverted".into()));
        }
        Ok(())
    }

    /// Copy with the acceleration noise disabled.
    pub fn noise_free(&self) -> Self {
        Self {
            force_noise_std: 0.0,
            ..*self
        }
    }
}

/// Axis-aligned region (world frame, m) that goals may be restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub dt: T,
    pub n_agents: usize,
    pub duration: T,
    pub rng_seed: u64,
    pub environment: WorldMap<T>,
    /// Where goals and start positions are drawn; the whole map when empty.
    pub goal_regions: Vec<GoalRegion>,
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.n_agents == 0 {
            return Err(Error::Config("at least one agent is required".into()));
        }
        if self.duration < T::zero() {
            return Err(Error::Config("duration must be non-negative".into()));
        }
        Ok(())
    }

    pub fn ticks(&self) -> usize {
        (self.duration / self.dt).round().to_usize().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimAgent<T> {
    pub state: AgentState<T>,
    pub goal: Vec2<T>,
    pub desired_speed: T,
}

/// What happens when an agent reaches its goal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalPolicy<'r> {
    /// Draw a fresh goal (data generation).
    Resample(&'r [GoalRegion]),
    /// Keep the goal; an agent sitting on it just decelerates (prediction
    /// rollouts).
    Hold,
}

/// Nearest occupied cell centre within `radius` of `p`, searched in square
/// rings of growing size. Cells outside the map count as occupied.
pub fn nearest_obstacle<T: Scalar>(map: &WorldMap<T>, p: Vec2<T>, radius: T) -> Option<Vec2<T>> {
    let (cx, cy) = map.cell_coords(p);
    let max_ring = (radius / map.resolution).ceil().to_i64().unwrap_or(0) + 1;
    let mut best: Option<(T, Vec2<T>)> = None;
    for ring in 0..=max_ring {
        // Every cell in this ring is at least (ring - 1) cells from p.
        if let Some((d, _)) = best {
            if T::from_i64(ring - 1).unwrap() * map.resolution > d {
                break;
            }
        }
        let mut visit = |ix: i64, iy: i64| {
            if map.occupied_or_outside(ix, iy) {
                let c = map.cell_center(ix, iy);
                let d = c.distance(p);
                if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, c));
                }
            }
        };
        if ring == 0 {
            visit(cx, cy);
            continue;
        }
        for ix in cx - ring..=cx + ring {
            visit(ix, cy - ring);
            visit(ix, cy + ring);
        }
        for iy in cy - ring + 1..=cy + ring - 1 {
            visit(cx - ring, iy);
            visit(cx + ring, iy);
        }
    }
    best.map(|(_, c)| c)
}

fn goal_term<T: Scalar>(agent: &SimAgent<T>, params: &SfParams) -> Option<Vec2<T>> {
    let to_goal = agent.goal - agent.state.position;
    let dist = to_goal.norm();
    if dist < T::c(1e-6) {
        return None;
    }
    let tau = T::c(params.relaxation_time);
    Some((to_goal * (agent.desired_speed / dist) - agent.state.velocity) * (T::one() / tau))
}

fn repulsion<T: Scalar>(agent: &SimAgent<T>, others: &[SimAgent<T>], map: &WorldMap<T>, params: &SfParams) -> Vec2<T> {
    let p = agent.state.position;
    let a = T::c(params.agent_repulsion_strength);
    let b = T::c(params.agent_repulsion_range);
    let two_r = T::c(2.0 * params.agent_radius);
    let mut f = Vec2::zero();
    for other in others {
        if other.state.id == agent.state.id {
            continue;
        }
        let diff = p - other.state.position;
        let d = diff.norm();
        if d > T::zero() {
            f += diff * (a * ((two_r - d) / b).exp() / d);
        }
    }
    if let Some(obstacle) = nearest_obstacle(map, p, T::c(params.obstacle_search_radius)) {
        let diff = p - obstacle;
        let d = diff.norm();
        if d > T::zero() {
            let a_obs = T::c(params.obstacle_repulsion_strength);
            let b_obs = T::c(params.obstacle_repulsion_range);
            let r = T::c(params.agent_radius);
            f += diff * (a_obs * ((r - d) / b_obs).exp() / d);
        }
    }
    f
}

/// Deterministic social force on `agent` (m/s²). `others` may include the
/// agent itself; it is skipped by id.
pub fn social_force<T: Scalar>(
    agent: &SimAgent<T>,
    others: &[SimAgent<T>],
    map: &WorldMap<T>,
    params: &SfParams,
) -> Result<Vec2<T>> {
    let goal = goal_term(agent, params).ok_or(Error::DegenerateGoal(agent.state.id))?;
    Ok(goal + repulsion(agent, others, map, params))
}

/// Uniform point in a free cell whose 8-neighbourhood holds no obstacle
/// closer than the agent radius.
pub fn sample_goal<T: Scalar, R: Rng + ?Sized>(map: &WorldMap<T>, params: &SfParams, rng: &mut R) -> Result<Vec2<T>> {
    sample_goal_in(map, params, &[], rng)
}

/// Like [`sample_goal`], restricted to the union of `regions` (whole map when
/// empty).
pub fn sample_goal_in<T: Scalar, R: Rng + ?Sized>(
    map: &WorldMap<T>,
    params: &SfParams,
    regions: &[GoalRegion],
    rng: &mut R,
) -> Result<Vec2<T>> {
    let ext = map.extent();
    let (ox, oy) = (map.origin.x.as_f64(), map.origin.y.as_f64());
    let (ex, ey) = (ext.x.as_f64(), ext.y.as_f64());
    for _ in 0..MAX_GOAL_SAMPLES {
        let (min, max) = if regions.is_empty() {
            ([ox, oy], [ox + ex, oy + ey])
        } else {
            let r = regions[rng.random_range(0..regions.len())];
            (r.min, r.max)
        };
        let x = min[0] + rng.random::<f64>() * (max[0] - min[0]);
        let y = min[1] + rng.random::<f64>() * (max[1] - min[1]);
        let p = Vec2::new(T::c(x), T::c(y));
        if goal_admissible(map, p, T::c(params.agent_radius)) {
            return Ok(p);
        }
    }
    Err(Error::GoalSampling(MAX_GOAL_SAMPLES))
}

/// `p` lies in a free cell and no occupied cell of its 8-neighbourhood has a
/// centre within `radius`.
pub fn goal_admissible<T: Scalar>(map: &WorldMap<T>, p: Vec2<T>, radius: T) -> bool {
    let Some((ix, iy)) = map.cell_of(p) else {
        return false;
    };
    if map.occupied(ix, iy) {
        return false;
    }
    for dy in -1..=1i64 {
        for dx in -1..=1i64 {
            let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
            if map.in_bounds(nx, ny) && map.occupied(nx as usize, ny as usize) && map.cell_center(nx, ny).distance(p) < radius {
                return false;
            }
        }
    }
    true
}

/// Advance every agent by one explicit-Euler step of length `dt`.
pub fn step<T: Scalar, R: Rng + ?Sized>(
    world: &[SimAgent<T>],
    map: &WorldMap<T>,
    params: &SfParams,
    dt: T,
    policy: GoalPolicy<'_>,
    rng: &mut R,
) -> Result<Vec<SimAgent<T>>> {
    if !(dt > T::zero()) {
        return Err(Error::Config("dt must be positive".into()));
    }
    let sigma = params.force_noise_std;
    let mut next = Vec::with_capacity(world.len());
    for agent in world {
        let goal = match goal_term(agent, params) {
            Some(f) => f,
            None if policy == GoalPolicy::Hold => agent.state.velocity * -(T::one() / T::c(params.relaxation_time)),
            None => return Err(Error::DegenerateGoal(agent.state.id)),
        };
        let mut accel = goal + repulsion(agent, world, map, params);
        if sigma > 0.0 {
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            accel += Vec2::new(T::c(sigma * nx), T::c(sigma * ny));
        }
        let max_speed = agent.desired_speed * T::c(params.max_speed_factor);
        let velocity = (agent.state.velocity + accel * dt).clamped(max_speed);
        let (position, velocity) = guarded_move(map, agent.state.position, velocity, dt);
        let heading = update_heading(agent.state.heading, velocity);
        next.push(SimAgent {
            state: AgentState::new(agent.state.id, position, velocity, heading),
            goal: agent.goal,
            desired_speed: agent.desired_speed,
        });
    }
    if let GoalPolicy::Resample(regions) = policy {
        let goal_radius = T::c(params.goal_radius);
        for agent in &mut next {
            if agent.goal.distance(agent.state.position) < goal_radius {
                agent.goal = sample_goal_in(map, params, regions, rng)?;
            }
        }
    }
    Ok(next)
}

/// Euler position update that never ends inside an occupied cell. A blocked
/// move slides along whichever axis is free, or stays put; the returned
/// velocity is the realised displacement over `dt`.
fn guarded_move<T: Scalar>(map: &WorldMap<T>, from: Vec2<T>, velocity: Vec2<T>, dt: T) -> (Vec2<T>, Vec2<T>) {
    let to = from + velocity * dt;
    if !map.is_occupied_at(to) || map.is_occupied_at(from) {
        return (to, velocity);
    }
    let slide_x = Vec2::new(to.x, from.y);
    let slide_y = Vec2::new(from.x, to.y);
    let mut candidates = [slide_x, slide_y];
    if velocity.y.abs() > velocity.x.abs() {
        candidates.swap(0, 1);
    }
    let target = candidates
        .into_iter()
        .find(|&p| !map.is_occupied_at(p))
        .unwrap_or(from);
    (target, (target - from) * (T::one() / dt))
}

/// Desired speed from the truncated normal of `params`.
pub fn sample_desired_speed<R: Rng + ?Sized>(params: &SfParams, rng: &mut R) -> f64 {
    for _ in 0..1000 {
        let z: f64 = rng.sample(StandardNormal);
        let v = params.desired_speed_mean + params.desired_speed_std * z;
        if (params.desired_speed_min..=params.desired_speed_max).contains(&v) {
            return v;
        }
    }
    params.desired_speed_mean.clamp(params.desired_speed_min, params.desired_speed_max)
}

/// Initial population: agents at rest on admissible, mutually separated
/// positions, each facing its first goal.
pub fn spawn_agents<T: Scalar, R: Rng + ?Sized>(
    map: &WorldMap<T>,
    params: &SfParams,
    n_agents: usize,
    regions: &[GoalRegion],
    rng: &mut R,
) -> Result<Vec<SimAgent<T>>> {
    let mut agents: Vec<SimAgent<T>> = Vec::with_capacity(n_agents);
    let min_gap = T::c(2.0 * params.agent_radius);
    for id in 0..n_agents as u64 {
        let mut position = sample_goal_in(map, params, regions, rng)?;
        for _ in 0..100 {
            if agents.iter().all(|a| a.state.position.distance(position) > min_gap) {
                break;
            }
            position = sample_goal_in(map, params, regions, rng)?;
        }
        let mut goal = sample_goal_in(map, params, regions, rng)?;
        while goal.distance(position) < T::c(params.goal_radius) {
            goal = sample_goal_in(map, params, regions, rng)?;
        }
        let heading = (goal - position).angle();
        agents.push(SimAgent {
            state: AgentState::new(id, position, Vec2::zero(), heading),
            goal,
            desired_speed: T::c(sample_desired_speed(params, rng)),
        });
    }
    Ok(agents)
}

/// Run a seeded simulation and record one trajectory per agent.
pub fn generate_dataset<T: Scalar>(config: &SimConfig<T>, params: &SfParams) -> Result<Dataset<T>> {
    config.validate()?;
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let map = &config.environment;
    let regions = config.goal_regions.as_slice();
    let mut agents = spawn_agents(map, params, config.n_agents, regions, &mut rng)?;
    let ticks = config.ticks();
    let mut samples: Vec<Vec<AgentState<T>>> = agents
        .iter()
        .map(|a| {
            let mut v = Vec::with_capacity(ticks + 1);
            v.push(a.state);
            v
        })
        .collect();
    for _ in 0..ticks {
        agents = step(&agents, map, params, config.dt, GoalPolicy::Resample(regions), &mut rng)?;
        for (record, a) in samples.iter_mut().zip(&agents) {
            record.push(a.state);
        }
    }
    let trajectories = agents
        .iter()
        .zip(samples)
        .map(|(a, samples)| Trajectory {
            agent_id: a.state.id,
            start_index: 0,
            samples,
            dt: config.dt,
        })
        .collect();
    Dataset::new(map.clone(), trajectories, config.dt)
}
