use std::f64::consts::TAU;

use pedpredict::encoders::{build_apg, extract_local_grid, ApgVector, LocalGrid};
use pedpredict::geometry::{world_to_agent_frame, AgentState, Vec2, WorldMap, WorldState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Loops over every (cone, agent) pair with its own polar conversion.
fn apg_oracle(world: &WorldState<f64>, query_id: u64, k: usize, r_max: f64) -> Vec<f64> {
    let q = world.agents.iter().find(|a| a.id == query_id).unwrap();
    let (s, c) = q.heading.sin_cos();
    let mut out = Vec::with_capacity(k);
    for cone in 0..k {
        let lo = cone as f64 * (TAU / k as f64);
        let hi = if cone + 1 == k { TAU } else { (cone + 1) as f64 * (TAU / k as f64) };
        let mut best = r_max;
        for other in &world.agents {
            if other.id == query_id {
                continue;
            }
            let dx = other.position.x - q.position.x;
            let dy = other.position.y - q.position.y;
            let lx = c * dx + s * dy;
            let ly = -s * dx + c * dy;
            let rho = lx.hypot(ly).max(0.01);
            let mut phi = ly.atan2(lx);
            if phi < 0.0 {
                phi += TAU;
            }
            if phi >= TAU {
                phi = 0.0;
            }
            if phi >= lo && phi < hi && rho < best {
                best = rho;
            }
        }
        out.push(best);
    }
    out
}

fn random_scene(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> WorldState<f64> {
    let agents = (0..n as u64)
        .map(|id| {
            AgentState::new(
                id,
                Vec2::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread)),
                Vec2::zero(),
                rng.random_range(-3.2..3.2),
            )
        })
        .collect();
    WorldState::new(0, agents).unwrap()
}

#[test]
fn apg_matches_oracle_on_random_scenes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for scene in 0..1000 {
        let n = rng.random_range(2..60);
        let world = random_scene(&mut rng, n, 8.0);
        let query = rng.random_range(0..n as u64);
        let apg = build_apg(&world, query, 72, 6.0).unwrap();
        assert_eq!(apg.values, apg_oracle(&world, query, 72, 6.0), "scene {scene}");
    }
}

#[test]
fn apg_matches_oracle_on_fifty_agents() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let world = random_scene(&mut rng, 51, 5.0);
    let apg = build_apg(&world, 0, 72, 6.0).unwrap();
    assert_eq!(apg.values, apg_oracle(&world, 0, 72, 6.0));
}

fn grid_oracle(map: &WorldMap<f64>, agent: &AgentState<f64>, n: usize, res: f64) -> Vec<f64> {
    let half = n as f64 * res / 2.0;
    let (s, c) = agent.heading.sin_cos();
    let mut cells = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let lx = (i as f64 + 0.5) * res - half;
            let ly = (j as f64 + 0.5) * res - half;
            let wx = c * lx - s * ly + agent.position.x;
            let wy = s * lx + c * ly + agent.position.y;
            let ix = ((wx - map.origin.x) / map.resolution).floor();
            let iy = ((wy - map.origin.y) / map.resolution).floor();
            let inside = ix >= 0.0 && iy >= 0.0 && (ix as usize) < map.width && (iy as usize) < map.height;
            let occupied = !inside || map.cells[iy as usize * map.width + ix as usize] == 1;
            cells[j * n + i] = if occupied { 1.0 } else { 0.0 };
        }
    }
    cells
}

fn random_map(rng: &mut ChaCha8Rng) -> WorldMap<f64> {
    let mut map = WorldMap::empty(Vec2::new(-4.0, -3.0), 0.1, 120, 90);
    for _ in 0..12 {
        let x = rng.random_range(-4.0..7.0);
        let y = rng.random_range(-3.0..5.0);
        let w = rng.random_range(0.1..2.0);
        let h = rng.random_range(0.1..2.0);
        map.fill_rect(Vec2::new(x, y), Vec2::new(x + w, y + h));
    }
    map
}

#[test]
fn local_grid_matches_per_cell_lookup() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let map = random_map(&mut rng);
    for pose in 0..100 {
        let agent = AgentState::new(
            pose,
            Vec2::new(rng.random_range(-5.0..9.0), rng.random_range(-4.0..7.0)),
            Vec2::zero(),
            rng.random_range(-3.2..3.2),
        );
        let grid = extract_local_grid(&map, &agent, 6.0, 0.1).unwrap();
        assert_eq!(grid.size, 60);
        assert_eq!(grid.cells, grid_oracle(&map, &agent, 60, 0.1), "pose {pose}");
    }
}

#[test]
fn grid_tensor_layout() {
    let mut map = WorldMap::<f64>::empty(Vec2::new(-5.0, -5.0), 0.1, 100, 100);
    // One cell 1 m to the left of an agent facing +x.
    let (ix, iy) = map.cell_of(Vec2::new(0.05, 1.05)).unwrap();
    map.set(ix, iy, true);
    let agent = AgentState::new(0, Vec2::zero(), Vec2::zero(), 0.0);
    let grid: LocalGrid<f64> = extract_local_grid(&map, &agent, 6.0, 0.1).unwrap();
    let t = grid.to_tensor();
    assert_eq!(t.shape(), &[1, 60, 60]);
    let (i, j) = (30, 40);
    assert_eq!(grid.get(i, j), 1.0);
    assert_eq!(t.data()[j * 60 + i], 1.0);
    assert_eq!(grid.occupied_count(), 1);
}

fn scene_strategy() -> impl Strategy<Value = (Vec<(f64, f64)>, f64)> {
    (prop::collection::vec((-7.0..7.0f64, -7.0..7.0f64), 1..30), -3.1..3.1f64)
}

fn world_from(query_heading: f64, others: &[(f64, f64)]) -> WorldState<f64> {
    let mut agents = vec![AgentState::new(0, Vec2::new(0.3, -0.2), Vec2::zero(), query_heading)];
    for (k, &(x, y)) in others.iter().enumerate() {
        agents.push(AgentState::new(k as u64 + 1, Vec2::new(x, y), Vec2::zero(), 0.0));
    }
    WorldState::new(0, agents).unwrap()
}

fn apg(world: &WorldState<f64>) -> ApgVector<f64> {
    build_apg(world, 0, 72, 6.0).unwrap()
}

proptest! {
    #[test]
    fn values_lie_in_range((others, h) in scene_strategy()) {
        let a = apg(&world_from(h, &others));
        prop_assert_eq!(a.values.len(), 72);
        prop_assert!(a.values.iter().all(|&v| v > 0.0 && v <= 6.0));
    }

    #[test]
    fn adding_an_agent_never_increases_values(
        (others, h) in scene_strategy(),
        extra in (-7.0..7.0f64, -7.0..7.0f64),
    ) {
        let before = apg(&world_from(h, &others));
        let mut more = others.clone();
        more.push(extra);
        let after = apg(&world_from(h, &more));
        for (b, a) in before.values.iter().zip(&after.values) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn deleting_a_non_minimizer_changes_nothing((others, h) in scene_strategy(), pick in 0usize..30) {
        let world = world_from(h, &others);
        let full = apg(&world);
        let victim = pick % others.len();
        let reduced: Vec<_> = others.iter().enumerate().filter(|&(k, _)| k != victim).map(|(_, &p)| p).collect();
        let without = apg(&world_from(h, &reduced));
        // The victim is a minimizer iff some cone value equals its distance and
        // no other agent in that cone attains it.
        let changed = full.values != without.values;
        if changed {
            let q = world.agents[0];
            let v = world.agents[victim + 1];
            let rho = world_to_agent_frame(v.position, &q).norm().max(0.01);
            prop_assert!(full.values.contains(&rho));
        }
    }

    #[test]
    fn rotation_by_whole_cones_shifts_cyclically(
        others in prop::collection::vec((0usize..72, 0.5..5.5f64, 0.2..0.8f64), 1..20),
        h in -3.1..3.1f64,
        m in 0usize..72,
    ) {
        // Place agents well inside their cones so rounding cannot move them.
        let width = TAU / 72.0;
        let q = AgentState::new(0, Vec2::new(1.0, 2.0), Vec2::zero(), h);
        let place = |heading: f64| -> WorldState<f64> {
            let mut agents = vec![AgentState::new(0, q.position, Vec2::zero(), heading)];
            for (k, &(cone, r, frac)) in others.iter().enumerate() {
                let phi = (cone as f64 + frac) * width + heading;
                let p = q.position + Vec2::new(r * phi.cos(), r * phi.sin());
                agents.push(AgentState::new(k as u64 + 1, p, Vec2::zero(), 0.0));
            }
            WorldState::new(0, agents).unwrap()
        };
        let base = apg(&place(h));
        let rotated = apg(&place(h + m as f64 * width));
        for k in 0..72 {
            prop_assert!((rotated.values[k] - base.values[k]).abs() < 1e-12);
        }
        // Rotating the whole scene (others and heading) by δ leaves the local
        // picture unchanged; rotating the others alone shifts by m cones.
        let mut shifted = place(h);
        for a in shifted.agents.iter_mut().skip(1) {
            a.position = q.position + (a.position - q.position).rotated(m as f64 * width);
        }
        let s = apg(&shifted);
        for k in 0..72 {
            prop_assert!((s.values[(k + m) % 72] - base.values[k]).abs() < 1e-12);
        }
    }
}
