//! Procedural test environments: a walled corridor, optionally cluttered
//! with box obstacles, plus the goal regions at its two ends.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Vec2, WorldMap};
use crate::scalar::Scalar;
use crate::simforces::GoalRegion;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorridorSpec {
    pub length: f64,
    pub width: f64,
    pub resolution: f64,
    /// Wall thickness in cells.
    pub wall_cells: usize,
    /// Depth of the goal region at each end (m).
    pub end_zone: f64,
    pub obstacles: usize,
    pub obstacle_min_size: f64,
    pub obstacle_max_size: f64,
    /// Keep obstacles at least this far from the walls (m).
    pub obstacle_wall_clearance: f64,
    pub layout_seed: u64,
}

impl Default for CorridorSpec {
    fn default() -> Self {
        Self {
            length: 20.0,
            width: 7.0,
            resolution: 0.1,
            wall_cells: 2,
            end_zone: 2.5,
            obstacles: 0,
            obstacle_min_size: 0.4,
            obstacle_max_size: 1.2,
            obstacle_wall_clearance: 0.8,
            layout_seed: 0,
        }
    }
}

impl CorridorSpec {
    pub fn cluttered(obstacles: usize, layout_seed: u64) -> Self {
        Self {
            obstacles,
            layout_seed,
            ..Self::default()
        }
    }

    /// The map with origin at `(0, 0)`.
    pub fn build<T: Scalar>(&self) -> WorldMap<T> {
        let width = (self.length / self.resolution).round() as usize;
        let height = (self.width / self.resolution).round() as usize;
        let mut map = WorldMap::empty(Vec2::zero(), T::c(self.resolution), width, height);
        map.add_border(self.wall_cells);
        let mut rng = ChaCha8Rng::seed_from_u64(self.layout_seed);
        let wall = self.wall_cells as f64 * self.resolution;
        let x_lo = self.end_zone + 0.5;
        let x_hi = self.length - self.end_zone - 0.5;
        let y_lo = wall + self.obstacle_wall_clearance;
        let y_hi = self.width - wall - self.obstacle_wall_clearance;
        for _ in 0..self.obstacles {
            let sx = rng.random_range(self.obstacle_min_size..=self.obstacle_max_size);
            let sy = rng.random_range(self.obstacle_min_size..=self.obstacle_max_size);
            if x_hi - x_lo <= sx || y_hi - y_lo <= sy {
                break;
            }
            let x = rng.random_range(x_lo..x_hi - sx);
            let y = rng.random_range(y_lo..y_hi - sy);
            map.fill_rect(Vec2::new(T::c(x), T::c(y)), Vec2::new(T::c(x + sx), T::c(y + sy)));
        }
        map
    }

    /// Start and goal regions at the two corridor ends, inside the walls.
    pub fn end_regions(&self) -> Vec<GoalRegion> {
        let wall = self.wall_cells as f64 * self.resolution + 0.4;
        let (y0, y1) = (wall, self.width - wall);
        vec![
            GoalRegion {
                min: [wall, y0],
                max: [self.end_zone, y1],
            },
            GoalRegion {
                min: [self.length - self.end_zone, y0],
                max: [self.length - wall, y1],
            },
        ]
    }
}
