//! Agent-centred model inputs: the heading-aligned local occupancy grid and
//! the angular pedestrian grid (APG).

use crate::error::{Error, Result};
use crate::geometry::{agent_to_world_frame, world_to_agent_frame, AgentState, Vec2, WorldMap, WorldState};
use crate::scalar::Scalar;
use crate::tensornn::Tensor;

/// Default local grid side length (m).
pub const GRID_EXTENT: f64 = 6.0;
/// Default local grid resolution (m per cell).
pub const GRID_RESOLUTION: f64 = 0.1;
/// Default number of angular cones.
pub const APG_CONES: usize = 72;
/// Default APG range (m).
pub const APG_RANGE: f64 = 6.0;
/// Distance assigned to an agent coincident with the query agent.
pub const MIN_APG_DISTANCE: f64 = 0.01;

/// Square occupancy extract centred on an agent and aligned with its heading.
///
/// Cell `(i, j)` has its centre at local
/// `((i + ½)·res − extent/2, (j + ½)·res − extent/2)`, so `i` runs along the
/// heading and `j` to the agent's left. Values are stored as `cells[j·n + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGrid<T> {
    pub size: usize,
    pub resolution: T,
    pub cells: Vec<T>,
}

impl<T: Scalar> LocalGrid<T> {
    pub fn zeros(size: usize, resolution: T) -> Self {
        Self {
            size,
            resolution,
            cells: vec![T::zero(); size * size],
        }
    }

    pub fn extent(&self) -> T {
        T::from_usize_lossy(self.size) * self.resolution
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.cells[j * self.size + i]
    }

    /// Local-frame centre of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> Vec2<T> {
        local_cell_center(i, j, self.resolution, self.extent())
    }

    /// `[1, n, n]` tensor view (rows follow `j`, columns follow `i`).
    pub fn to_tensor(&self) -> Tensor<T> {
        Tensor::from_vec(&[1, self.size, self.size], self.cells.clone()).expect("square grid")
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&v| v > T::c(0.5)).count()
    }
}

#[inline]
fn local_cell_center<T: Scalar>(i: usize, j: usize, resolution: T, extent: T) -> Vec2<T> {
    let half = T::c(0.5);
    Vec2::new(
        (T::from_usize_lossy(i) + half) * resolution - extent * half,
        (T::from_usize_lossy(j) + half) * resolution - extent * half,
    )
}

/// Number of cells per side for the given extent and resolution.
pub fn grid_cells<T: Scalar>(extent: T, resolution: T) -> Result<usize> {
    if !(resolution > T::zero()) || !(extent > T::zero()) {
        return Err(Error::Config("grid extent and resolution must be positive".into()));
    }
    let ratio = extent / resolution;
    let n = ratio.round();
    if (ratio - n).abs() > T::c(1e-6) * n.max(T::one()) {
        return Err(Error::Config(format!(
            "grid extent {extent} is not a multiple of resolution {resolution}"
        )));
    }
    Ok(n.to_usize().unwrap_or(0))
}

/// Nearest-neighbour extract of `map` around `agent`. Points outside the map
/// read as occupied.
pub fn extract_local_grid<T: Scalar>(
    map: &WorldMap<T>,
    agent: &AgentState<T>,
    extent: T,
    resolution: T,
) -> Result<LocalGrid<T>> {
    let n = grid_cells(extent, resolution)?;
    let mut grid = LocalGrid::zeros(n, resolution);
    let (s, c) = agent.heading.sin_cos();
    for j in 0..n {
        for i in 0..n {
            let l = local_cell_center(i, j, resolution, extent);
            let w = Vec2::new(c * l.x - s * l.y, s * l.x + c * l.y) + agent.position;
            if map.is_occupied_at(w) {
                grid.cells[j * n + i] = T::one();
            }
        }
    }
    Ok(grid)
}

/// World point sampled by local cell `(i, j)`; the reference used by
/// [`extract_local_grid`].
pub fn local_cell_world_point<T: Scalar>(
    agent: &AgentState<T>,
    i: usize,
    j: usize,
    extent: T,
    resolution: T,
) -> Vec2<T> {
    agent_to_world_frame(local_cell_center(i, j, resolution, extent), agent)
}

/// Minimum distance to another pedestrian per angular cone around the
/// query agent, clipped to `r_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApgVector<T> {
    pub values: Vec<T>,
    pub r_max: T,
}

impl<T: Scalar> ApgVector<T> {
    pub fn cones(&self) -> usize {
        self.values.len()
    }

    /// Values divided by `r_max`, in `(0, 1]`.
    pub fn normalized(&self) -> Vec<T> {
        self.values.iter().map(|&v| v / self.r_max).collect()
    }
}

/// Polar angle of a local-frame point, in `[0, 2π)`.
#[inline]
pub fn polar_angle<T: Scalar>(p: Vec2<T>) -> T {
    let two_pi = T::TAU();
    let mut phi = p.y.atan2(p.x);
    if phi < T::zero() {
        phi += two_pi;
    }
    if phi >= two_pi {
        phi = T::zero();
    }
    phi
}

/// Lower bound `γ_k = k·2π/K` of cone `k` (0-based); the upper bound of the
/// last cone is exactly 2π.
#[inline]
pub fn cone_lower<T: Scalar>(k: usize, cones: usize) -> T {
    if k >= cones {
        T::TAU()
    } else {
        T::from_usize_lossy(k) * (T::TAU() / T::from_usize_lossy(cones))
    }
}

/// Cone index `k` with `γ_k ≤ φ < γ_{k+1}` for `φ ∈ [0, 2π)`.
#[inline]
pub fn cone_index<T: Scalar>(phi: T, cones: usize) -> usize {
    let width = T::TAU() / T::from_usize_lossy(cones);
    let mut k = (phi / width).floor().to_usize().unwrap_or(0).min(cones - 1);
    while k > 0 && phi < cone_lower(k, cones) {
        k -= 1;
    }
    while k + 1 < cones && phi >= cone_lower(k + 1, cones) {
        k += 1;
    }
    k
}

/// Build the APG of `query_id` from the other agents in `world`.
pub fn build_apg<T: Scalar>(world: &WorldState<T>, query_id: u64, cones: usize, r_max: T) -> Result<ApgVector<T>> {
    if cones == 0 || !(r_max > T::zero()) {
        return Err(Error::Config("APG needs at least one cone and a positive range".into()));
    }
    let query = world.agent(query_id).ok_or(Error::UnknownAgent(query_id))?;
    let mut values = vec![r_max; cones];
    let min_rho = T::c(MIN_APG_DISTANCE);
    for other in world.agents.iter().filter(|a| a.id != query_id) {
        let local = world_to_agent_frame(other.position, query);
        let rho = local.norm().max(min_rho);
        if rho >= r_max {
            continue;
        }
        let k = cone_index(polar_angle(local), cones);
        if rho < values[k] {
            values[k] = rho;
        }
    }
    Ok(ApgVector { values, r_max })
}
