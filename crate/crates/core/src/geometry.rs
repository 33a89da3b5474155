//! Planar geometry, agent and world state, and heading-aligned frames.
//!
//! The world frame is right-handed with y pointing up and angles measured
//! counter-clockwise from the x-axis.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Speed (m/s) below which an agent's heading is held constant.
pub const V_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    /// Counter-clockwise rotation by `angle` radians.
    #[inline]
    pub fn rotated(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Unit vector, or zero for a zero-length input.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self * (T::one() / n)
        } else {
            Self::zero()
        }
    }

    /// Rescale to at most `max_norm`.
    pub fn clamped(self, max_norm: T) -> Self {
        let n = self.norm();
        if n > max_norm {
            self * (max_norm / n)
        } else {
            self
        }
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> AddAssign for Vec2<T> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> SubAssign for Vec2<T> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Wrap an angle into `[-π, π)`.
pub fn wrap_angle<T: Scalar>(angle: T) -> T {
    let two_pi = T::TAU();
    let mut a = (angle + T::PI()) % two_pi;
    if a < T::zero() {
        a += two_pi;
    }
    // `a` can round up to exactly 2π for tiny negative inputs.
    if a >= two_pi {
        a -= two_pi;
    }
    a - T::PI()
}

/// Heading implied by `velocity`, falling back to `previous` when the agent
/// is (nearly) stationary.
pub fn update_heading<T: Scalar>(previous: T, velocity: Vec2<T>) -> T {
    if velocity.norm() > T::c(V_EPS) {
        velocity.y.atan2(velocity.x)
    } else {
        previous
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState<T> {
    pub id: u64,
    pub position: Vec2<T>,
    pub velocity: Vec2<T>,
    /// Radians in `[-π, π)`.
    pub heading: T,
}

impl<T: Scalar> AgentState<T> {
    pub fn new(id: u64, position: Vec2<T>, velocity: Vec2<T>, heading: T) -> Self {
        Self {
            id,
            position,
            velocity,
            heading: wrap_angle(heading),
        }
    }

    /// State whose heading follows the velocity, or `fallback_heading` when
    /// the speed is below [`V_EPS`].
    pub fn from_motion(id: u64, position: Vec2<T>, velocity: Vec2<T>, fallback_heading: T) -> Self {
        Self::new(id, position, velocity, update_heading(fallback_heading, velocity))
    }

    /// Velocity expressed in the agent's heading-aligned frame.
    pub fn local_velocity(&self) -> Vec2<T> {
        self.velocity.rotated(-self.heading)
    }
}

/// Express a world-frame point in the frame centred on `agent` with its
/// x-axis along the agent heading.
pub fn world_to_agent_frame<T: Scalar>(p_world: Vec2<T>, agent: &AgentState<T>) -> Vec2<T> {
    (p_world - agent.position).rotated(-agent.heading)
}

/// Inverse of [`world_to_agent_frame`].
pub fn agent_to_world_frame<T: Scalar>(p_local: Vec2<T>, agent: &AgentState<T>) -> Vec2<T> {
    p_local.rotated(agent.heading) + agent.position
}

/// All agents present at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState<T> {
    pub time_index: i64,
    pub agents: Vec<AgentState<T>>,
}

impl<T: Scalar> WorldState<T> {
    pub fn new(time_index: i64, agents: Vec<AgentState<T>>) -> Result<Self> {
        let mut ids: Vec<u64> = agents.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate agent id in world state".into()));
        }
        Ok(Self { time_index, agents })
    }

    pub fn agent(&self, id: u64) -> Option<&AgentState<T>> {
        self.agents.iter().find(|a| a.id == id)
    }
}

/// Global static occupancy grid.
///
/// Cell `(ix, iy)` covers `origin + [ix, ix+1) × [iy, iy+1)` scaled by
/// `resolution`; `cells[iy * width + ix]` is 1 when occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap<T> {
    pub origin: Vec2<T>,
    pub resolution: T,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u8>,
}

impl<T: Scalar> WorldMap<T> {
    pub fn new(origin: Vec2<T>, resolution: T, width: usize, height: usize, cells: Vec<u8>) -> Result<Self> {
        if !(resolution > T::zero()) {
            return Err(Error::Config("map resolution must be positive".into()));
        }
        if cells.len() != width * height {
            return Err(Error::shape(format!(
                "map has {} cells, expected {}x{}",
                cells.len(),
                width,
                height
            )));
        }
        if cells.iter().any(|&c| c > 1) {
            return Err(Error::Config("map cells must be 0 or 1".into()));
        }
        Ok(Self {
            origin,
            resolution,
            width,
            height,
            cells,
        })
    }

    /// An all-free map.
    pub fn empty(origin: Vec2<T>, resolution: T, width: usize, height: usize) -> Self {
        Self::new(origin, resolution, width, height, vec![0; width * height]).expect("valid empty map")
    }

    /// Map size in metres.
    pub fn extent(&self) -> Vec2<T> {
        Vec2::new(
            T::from_usize_lossy(self.width) * self.resolution,
            T::from_usize_lossy(self.height) * self.resolution,
        )
    }

    /// Signed cell coordinates of the cell containing `p` (may lie outside).
    #[inline]
    pub fn cell_coords(&self, p: Vec2<T>) -> (i64, i64) {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        (
            fx.to_i64().unwrap_or(i64::MIN),
            fy.to_i64().unwrap_or(i64::MIN),
        )
    }

    pub fn cell_of(&self, p: Vec2<T>) -> Option<(usize, usize)> {
        let (ix, iy) = self.cell_coords(p);
        self.in_bounds(ix, iy).then_some((ix as usize, iy as usize))
    }

    #[inline]
    pub fn in_bounds(&self, ix: i64, iy: i64) -> bool {
        ix >= 0 && iy >= 0 && (ix as usize) < self.width && (iy as usize) < self.height
    }

    #[inline]
    pub fn occupied(&self, ix: usize, iy: usize) -> bool {
        self.cells[iy * self.width + ix] != 0
    }

    /// Occupancy of a signed cell; cells outside the map count as occupied.
    #[inline]
    pub fn occupied_or_outside(&self, ix: i64, iy: i64) -> bool {
        !self.in_bounds(ix, iy) || self.occupied(ix as usize, iy as usize)
    }

    /// Occupancy at a world point; points outside the map count as occupied.
    #[inline]
    pub fn is_occupied_at(&self, p: Vec2<T>) -> bool {
        let (ix, iy) = self.cell_coords(p);
        self.occupied_or_outside(ix, iy)
    }

    pub fn cell_center(&self, ix: i64, iy: i64) -> Vec2<T> {
        let half = T::c(0.5);
        Vec2::new(
            self.origin.x + (T::from_i64(ix).unwrap() + half) * self.resolution,
            self.origin.y + (T::from_i64(iy).unwrap() + half) * self.resolution,
        )
    }

    pub fn set(&mut self, ix: usize, iy: usize, occupied: bool) {
        self.cells[iy * self.width + ix] = u8::from(occupied);
    }

    /// Mark every cell whose centre lies in the axis-aligned box `[min, max]`.
    pub fn fill_rect(&mut self, min: Vec2<T>, max: Vec2<T>) {
        for iy in 0..self.height {
            for ix in 0..self.width {
                let c = self.cell_center(ix as i64, iy as i64);
                if c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y {
                    self.set(ix, iy, true);
                }
            }
        }
    }

    /// Surround the map with a wall `thickness` cells wide.
    pub fn add_border(&mut self, thickness: usize) {
        for iy in 0..self.height {
            for ix in 0..self.width {
                if ix < thickness || iy < thickness || ix + thickness >= self.width || iy + thickness >= self.height {
                    self.set(ix, iy, true);
                }
            }
        }
    }

    pub fn free_cell_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 0).count()
    }
}

/// Time-ordered states of one agent sampled at a fixed period.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub agent_id: u64,
    /// Time index of `samples[0]`; sample `k` has index `start_index + k`.
    pub start_index: i64,
    pub samples: Vec<AgentState<T>>,
    pub dt: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn end_index(&self) -> i64 {
        self.start_index + self.samples.len() as i64
    }

    pub fn at_time(&self, time_index: i64) -> Option<&AgentState<T>> {
        let k = time_index - self.start_index;
        (k >= 0).then(|| self.samples.get(k as usize)).flatten()
    }

    pub fn last(&self) -> Option<&AgentState<T>> {
        self.samples.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub map: WorldMap<T>,
    pub trajectories: Vec<Trajectory<T>>,
    pub dt: T,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(map: WorldMap<T>, trajectories: Vec<Trajectory<T>>, dt: T) -> Result<Self> {
        let ds = Self { map, trajectories, dt };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) {
            return Err(Error::Config("dataset dt must be positive".into()));
        }
        for t in &self.trajectories {
            if t.dt != self.dt {
                return Err(Error::DtMismatch {
                    expected: self.dt.as_f64(),
                    found: t.dt.as_f64(),
                });
            }
            if t.samples.iter().any(|s| s.id != t.agent_id) {
                return Err(Error::Config(format!(
                    "trajectory {} contains samples of another agent",
                    t.agent_id
                )));
            }
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }

    /// Lookup of which trajectories are present at each time index.
    pub fn time_index(&self) -> TimeIndex {
        let mut by_time: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (ti, t) in self.trajectories.iter().enumerate() {
            for k in 0..t.len() {
                by_time.entry(t.start_index + k as i64).or_default().push(ti);
            }
        }
        TimeIndex { by_time }
    }

    pub fn world_state(&self, index: &TimeIndex, time: i64) -> WorldState<T> {
        let agents = index
            .present(time)
            .iter()
            .filter_map(|&ti| self.trajectories[ti].at_time(time).copied())
            .collect();
        WorldState {
            time_index: time,
            agents,
        }
    }
}

/// Trajectory membership per time index of a [`Dataset`].
#[derive(Debug, Clone, Default)]
pub struct TimeIndex {
    by_time: BTreeMap<i64, Vec<usize>>,
}

impl TimeIndex {
    pub fn present(&self, time: i64) -> &[usize] {
        self.by_time.get(&time).map(Vec::as_slice).unwrap_or(&[])
    }
}
