//! Comparison predictors: constant velocity, constant acceleration and a
//! noise-free social-force rollout towards known destinations.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{AgentState, Vec2, WorldMap, WorldState};
use crate::scalar::Scalar;
use crate::simforces::{step, GoalPolicy, SfParams, SimAgent};

/// Recent samples of one agent, oldest first, at a fixed period.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedHistory<T> {
    pub samples: Vec<AgentState<T>>,
    pub dt: T,
}

/// `p_k = p₀ + k·dt·v₀` for `k = 1..=horizon`.
pub fn predict_cv<T: Scalar>(state: &AgentState<T>, horizon: usize, dt: T) -> Vec<Vec2<T>> {
    (1..=horizon)
        .map(|k| state.position + state.velocity * (T::from_usize_lossy(k) * dt))
        .collect()
}

/// Constant acceleration estimated from the last two velocity samples.
pub fn predict_cacc<T: Scalar>(history: &ObservedHistory<T>, horizon: usize) -> Result<Vec<Vec2<T>>> {
    let n = history.samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "constant acceleration needs 2 samples, got {n}"
        )));
    }
    let dt = history.dt;
    let last = &history.samples[n - 1];
    let accel = (last.velocity - history.samples[n - 2].velocity) * (T::one() / dt);
    // Closed form of p_k = p_{k-1} + dt·(v + k·dt·a): exact CV when a = 0.
    Ok((1..=horizon)
        .map(|k| {
            let kf = T::from_usize_lossy(k);
            let tri = dt * dt * kf * (kf + T::one()) / T::c(2.0);
            last.position + last.velocity * (kf * dt) + accel * tri
        })
        .collect())
}

/// Roll every agent of `world` forward together with the noise-free
/// social-force model and return `horizon` positions per agent.
///
/// Each agent's desired speed is its current speed, clamped to the
/// parameter range.
pub fn predict_sf<T: Scalar>(
    world: &WorldState<T>,
    map: &WorldMap<T>,
    destinations: &HashMap<u64, Vec2<T>>,
    horizon: usize,
    dt: T,
    params: &SfParams,
) -> Result<HashMap<u64, Vec<Vec2<T>>>> {
    let quiet = params.noise_free();
    let mut agents = world
        .agents
        .iter()
        .map(|a| {
            let goal = *destinations.get(&a.id).ok_or(Error::MissingDestination(a.id))?;
            let speed = a.velocity.norm().as_f64().clamp(quiet.desired_speed_min, quiet.desired_speed_max);
            Ok(SimAgent {
                state: *a,
                goal,
                desired_speed: T::c(speed),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: HashMap<u64, Vec<Vec2<T>>> =
        world.agents.iter().map(|a| (a.id, Vec::with_capacity(horizon))).collect();
    // Never sampled from: the rollout is noise-free and holds its goals.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..horizon {
        agents = step(&agents, map, &quiet, dt, GoalPolicy::Hold, &mut rng)?;
        for a in &agents {
            out.get_mut(&a.state.id).expect("agent set is fixed").push(a.state.position);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(p: (f64, f64), v: (f64, f64)) -> AgentState<f64> {
        AgentState::from_motion(0, Vec2::new(p.0, p.1), Vec2::new(v.0, v.1), 0.0)
    }

    #[test]
    fn cv_examples() {
        let xs = predict_cv(&state((0.0, 0.0), (1.0, 0.0)), 10, 0.3);
        for (k, p) in xs.iter().enumerate() {
            assert!((p.x - 0.3 * (k + 1) as f64).abs() < 1e-12 && p.y == 0.0);
        }
        let still = state((2.0, -1.0), (0.0, 0.0));
        assert!(predict_cv(&still, 10, 0.3).iter().all(|&p| p == still.position));
        let diag = predict_cv(&state((1.0, 2.0), (1.0, 1.0)), 3, 0.5);
        assert_eq!(diag, vec![Vec2::new(1.5, 2.5), Vec2::new(2.0, 3.0), Vec2::new(2.5, 3.5)]);
    }

    #[test]
    fn cacc_examples() {
        let h = ObservedHistory {
            samples: vec![state((0.0, 0.0), (0.0, 0.0)), state((0.0, 0.0), (0.3, 0.0))],
            dt: 0.3,
        };
        // a = (1, 0); v_k = 0.3 + 0.3k; p_k = Σ 0.3·v_j
        let expected = [0.18, 0.45, 0.81];
        let xs = predict_cacc(&h, 3).unwrap();
        for (p, e) in xs.iter().zip(expected) {
            assert!((p.x - e).abs() < 1e-12 && p.y == 0.0, "{p:?}");
        }
        let one = ObservedHistory {
            samples: vec![state((0.0, 0.0), (1.0, 0.0))],
            dt: 0.3,
        };
        assert!(predict_cacc(&one, 3).is_err());
    }

    #[test]
    fn sf_needs_destinations() {
        let world = WorldState::new(0, vec![state((1.0, 1.0), (1.0, 0.0))]).unwrap();
        let map = WorldMap::empty(Vec2::zero(), 0.1, 50, 50);
        let r = predict_sf(&world, &map, &HashMap::new(), 5, 0.3, &SfParams::default());
        assert!(matches!(r, Err(Error::MissingDestination(0))));
    }
}
