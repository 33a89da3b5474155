use std::collections::HashMap;

use pedpredict::baselines::{predict_cacc, predict_cv, predict_sf, ObservedHistory};
use pedpredict::geometry::{AgentState, Vec2, WorldMap, WorldState};
use pedpredict::simforces::{step, GoalPolicy, SfParams, SimAgent};
use pedpredict::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(p: (f64, f64), v: (f64, f64)) -> AgentState<f64> {
    AgentState::from_motion(0, Vec2::new(p.0, p.1), Vec2::new(v.0, v.1), 0.0)
}

#[test]
fn cv_unit_speed() {
    let got = predict_cv(&state((0.0, 0.0), (1.0, 0.0)), 10, 0.3);
    for (k, p) in got.iter().enumerate() {
        assert!((p.x - 0.3 * (k + 1) as f64).abs() < 1e-12 && p.y == 0.0);
    }
}

#[test]
fn cv_standing_still() {
    let got = predict_cv(&state((2.0, -1.0), (0.0, 0.0)), 10, 0.3);
    assert!(got.iter().all(|p| *p == Vec2::new(2.0, -1.0)));
}

#[test]
fn cv_diagonal_by_hand() {
    let got = predict_cv(&state((1.0, 2.0), (1.0, 1.0)), 3, 0.3);
    let expected = [(1.3, 2.3), (1.6, 2.6), (1.9, 2.9)];
    for (p, e) in got.iter().zip(expected) {
        assert!((p.x - e.0).abs() < 1e-12 && (p.y - e.1).abs() < 1e-12);
    }
}

#[test]
fn cacc_from_rest() {
    let history = ObservedHistory {
        samples: vec![state((0.0, 0.0), (0.0, 0.0)), state((0.0, 0.0), (0.3, 0.0))],
        dt: 0.3,
    };
    let got = predict_cacc(&history, 3).unwrap();
    // a = 1: v = 0.6, 0.9, 1.2 → x = 0.18, 0.45, 0.81.
    for (p, x) in got.iter().zip([0.18, 0.45, 0.81]) {
        assert!((p.x - x).abs() < 1e-12 && p.y == 0.0, "{p:?}");
    }
}

#[test]
fn cacc_stationary_history() {
    let s = state((4.0, 4.0), (0.0, 0.0));
    let got = predict_cacc(&ObservedHistory { samples: vec![s, s, s], dt: 0.3 }, 10).unwrap();
    assert!(got.iter().all(|p| *p == Vec2::new(4.0, 4.0)));
}

#[test]
fn cacc_needs_two_samples() {
    let one = ObservedHistory { samples: vec![state((0.0, 0.0), (1.0, 0.0))], dt: 0.3 };
    assert!(matches!(predict_cacc(&one, 10), Err(Error::InsufficientData(_))));
}

proptest! {
    #[test]
    fn cacc_without_acceleration_is_cv(px in -10.0..10.0f64, py in -10.0..10.0f64, vx in -2.0..2.0f64, vy in -2.0..2.0f64) {
        let s = state((px, py), (vx, vy));
        let history = ObservedHistory { samples: vec![s, s], dt: 0.3 };
        prop_assert_eq!(predict_cacc(&history, 10).unwrap(), predict_cv(&s, 10, 0.3));
    }

    #[test]
    fn sf_free_walker_is_straight(heading in -3.1..3.1f64, speed in 0.6..2.0f64) {
        let map = WorldMap::empty(Vec2::new(-60.0, -60.0), 0.2, 600, 600);
        let v = Vec2::new(heading.cos(), heading.sin()) * speed;
        let world = WorldState::new(0, vec![AgentState::from_motion(1, Vec2::zero(), v, 0.0)]).unwrap();
        let goal = v.normalized() * 50.0;
        let got = predict_sf(&world, &map, &HashMap::from([(1, goal)]), 10, 0.3, &SfParams::default()).unwrap();
        for (k, p) in got[&1].iter().enumerate() {
            prop_assert!(p.distance(v * ((k + 1) as f64 * 0.3)) < 1e-9);
        }
    }
}

#[test]
fn sf_converging_agents_match_simulator() {
    let map = WorldMap::empty(Vec2::new(-20.0, -20.0), 0.1, 400, 400);
    let a = AgentState::from_motion(1, Vec2::new(-2.0, 0.0), Vec2::new(1.2, 0.0), 0.0);
    let b = AgentState::from_motion(2, Vec2::new(2.0, 0.1), Vec2::new(-1.2, 0.0), 0.0);
    let goals = HashMap::from([(1, Vec2::new(10.0, 0.0)), (2, Vec2::new(-10.0, 0.1))]);
    let params = SfParams::default();
    let world = WorldState::new(0, vec![a, b]).unwrap();
    let got: HashMap<u64, Vec<Vec2<f64>>> = predict_sf(&world, &map, &goals, 10, 0.3, &params).unwrap();

    let mut agents: Vec<_> = [a, b]
        .iter()
        .map(|s| SimAgent { state: *s, goal: goals[&s.id], desired_speed: 1.2 })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let quiet = params.noise_free();
    for (a, b) in got[&1].iter().zip(&got[&2]) {
        agents = step(&agents, &map, &quiet, 0.3, GoalPolicy::Hold, &mut rng).unwrap();
        assert_eq!(*a, agents[0].state.position);
        assert_eq!(*b, agents[1].state.position);
    }
    // Repulsion pushes the walkers off the x axis.
    let lateral = got[&1].iter().map(|p| p.y.abs()).fold(0.0, f64::max);
    assert!(lateral > 1e-3, "{lateral}");
}

#[test]
fn sf_missing_destination() {
    let map = WorldMap::empty(Vec2::new(-5.0, -5.0), 0.1, 100, 100);
    let world = WorldState::new(0, vec![state((0.0, 0.0), (1.0, 0.0))]).unwrap();
    let err = predict_sf(&world, &map, &HashMap::new(), 10, 0.3, &SfParams::default()).unwrap_err();
    assert!(matches!(err, Error::MissingDestination(0)));
}
