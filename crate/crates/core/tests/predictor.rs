use pedpredict::autoencoder::Autoencoder;
use pedpredict::environments::CorridorSpec;
use pedpredict::eval::{evaluate, EvalConfig};
use pedpredict::geometry::{Dataset, Vec2};
use pedpredict::predictor::{
    integrate, training_loss, HiddenNodes, Predictor, PredictorConfig, StepFeatures, TrainConfig,
};
use pedpredict::simforces::{generate_dataset, SfParams, SimConfig};
use pedpredict::tensornn::{gradient_check, GradCheckConfig, Graph, ParamKind, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corridor(agents: usize, duration: f64, seed: u64) -> Dataset<f64> {
    let spec = CorridorSpec::cluttered(6, seed);
    let cfg = SimConfig {
        dt: 0.3,
        n_agents: agents,
        duration,
        rng_seed: seed,
        environment: spec.build(),
        goal_regions: spec.end_regions(),
    };
    generate_dataset(&cfg, &SfParams::default()).unwrap()
}

fn random_features(model: &Predictor<f64>, n: usize, seed: u64) -> Vec<StepFeatures<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vec = |len: usize, lo: f64, hi: f64| Tensor::vector((0..len).map(|_| rng.random_range(lo..hi)).collect());
    (0..n)
        .map(|_| StepFeatures {
            velocity: vec(2, -1.5, 1.5),
            apg: vec(72, 0.0, 1.0),
            grid: model.uses_grid().then(|| vec(2048, 0.0, 1.0)),
        })
        .collect()
}

fn no_grid() -> Predictor<f64> {
    Predictor::new(PredictorConfig::default().without_grid(), None, 1).unwrap()
}

#[test]
fn integrate_alternating_velocities() {
    let v: Vec<_> = (0..10)
        .map(|k| if k % 2 == 0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) })
        .collect();
    let agent = pedpredict::geometry::AgentState::new(0, Vec2::new(2.0, -1.0), Vec2::zero(), 0.0);
    let got = integrate(&v, &agent, 0.3);
    let (mut x, mut y): (f64, f64) = (2.0, -1.0);
    for (k, p) in got.iter().enumerate() {
        if k % 2 == 0 {
            x += 0.3;
        } else {
            y += 0.3;
        }
        assert!((p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12);
    }
}

#[test]
fn training_loss_matches_scalar_oracle() {
    let model = no_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pts = || -> Vec<Vec2<f64>> { (0..10).map(|_| Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect() };
    let (u, v) = (pts(), pts());
    let mut data = 0.0;
    for i in 0..10 {
        data += ((u[i].x - v[i].x).powi(2) + (u[i].y - v[i].y).powi(2)).sqrt();
    }
    let mut l2 = 0.0;
    for e in model.params.entries() {
        if e.kind == ParamKind::Weight {
            for w in e.tensor.data() {
                l2 += w * w;
            }
        }
    }
    let expected = data / 10.0 + 1e-4 * l2;
    let got = training_loss(&u, &v, &model.params, 1e-4).unwrap();
    assert!((got - expected).abs() < 1e-12 * expected, "{got} vs {expected}");

    // The recorded loss agrees with the closed form.
    let mut g = Graph::new();
    let bound = g.bind(&model.params);
    let flat: Vec<f64> = u.iter().flat_map(|p| [p.x, p.y]).collect();
    let out = g.constant(Tensor::vector(flat));
    let target = Tensor::vector(v.iter().flat_map(|p| [p.x, p.y]).collect());
    let loss = model.sequence_loss(&mut g, &bound, &[out], &[target], 1e-4).unwrap();
    assert!((g.scalar(loss) - expected).abs() < 1e-12 * expected);
}

#[test]
fn sessions_are_fresh_and_deterministic() {
    let model = no_grid();
    let h = model.init_session();
    assert!(h.is_zero());
    let f = &random_features(&model, 1, 2)[0];
    let a = model.predict_features(f, &model.init_session()).unwrap();
    let b = model.predict_features(f, &model.init_session()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.0.len(), 10);
}

#[test]
fn hidden_state_changes_predictions() {
    let model = no_grid();
    let feats = random_features(&model, 5, 3);
    let mut h = model.init_session();
    for f in &feats[..4] {
        h = model.predict_features(f, &h).unwrap().1;
    }
    let carried = model.predict_features(&feats[4], &h).unwrap().0;
    let fresh = model.predict_features(&feats[4], &model.init_session()).unwrap().0;
    let gap = carried
        .iter()
        .zip(&fresh)
        .map(|(a, b)| (a.x - b.x).abs().max((a.y - b.y).abs()))
        .fold(0.0, f64::max);
    assert!(gap > 1e-9, "{gap}");
}

#[test]
fn sessions_do_not_interact() {
    let model = no_grid();
    let fa = random_features(&model, 3, 4);
    let fb = random_features(&model, 3, 5);
    let alone = fa.iter().fold(model.init_session(), |h, f| model.predict_features(f, &h).unwrap().1);
    let (mut ha, mut hb) = (model.init_session(), model.init_session());
    for (a, b) in fa.iter().zip(&fb) {
        ha = model.predict_features(a, &ha).unwrap().1;
        hb = model.predict_features(b, &hb).unwrap().1;
    }
    assert_eq!(alone, ha);
}

#[test]
fn truncation_blocks_gradient_to_previous_subsequence() {
    let model = no_grid();
    let feats = random_features(&model, 6, 6);
    let targets: Vec<_> = (0..3).map(|k| Tensor::vector(vec![0.1 * k as f64; 20])).collect();
    for detach in [true, false] {
        let mut g = Graph::new();
        let bound = g.bind(&model.params);
        let h0 = HiddenNodes::constant(&mut g, &model.init_session());
        let first = model.unroll(&mut g, &bound, &feats[..3], h0, true).unwrap();
        let carry = if detach { first.hidden.detach(&mut g) } else { first.hidden };
        let second = model.unroll(&mut g, &bound, &feats[3..], carry, false).unwrap();
        let loss = model.sequence_loss(&mut g, &bound, &second.outputs, &targets, 1e-4).unwrap();
        let grads = g.backward(loss).unwrap();
        let total: f64 = first
            .inputs
            .iter()
            .flat_map(|x| [x.velocity, x.apg])
            .filter_map(|n| grads.get(n))
            .flatten()
            .map(|v| v.abs())
            .sum();
        if detach {
            assert_eq!(total, 0.0);
        } else {
            assert!(total > 0.0);
        }
    }
}

#[test]
fn full_model_gradient_check() {
    let ae = Autoencoder::<f64>::new(8);
    let model = Predictor::new(PredictorConfig::default(), Some(&ae), 8).unwrap();
    let feats = random_features(&model, 3, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let targets: Vec<_> = (0..3)
        .map(|_| Tensor::vector((0..20).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let report = gradient_check(
        &model.params,
        |g: &mut Graph<'_, f64>, b| {
            let h0 = HiddenNodes::constant(g, &model.init_session());
            let un = model.unroll(g, b, &feats, h0, false)?;
            model.sequence_loss(g, b, &un.outputs, &targets, 1e-4)
        },
        GradCheckConfig {
            max_entries_per_tensor: 16,
            ..GradCheckConfig::default()
        },
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-3, "{report:?}");
}

#[test]
fn training_keeps_convolutions_frozen() {
    let ae = Autoencoder::<f64>::new(10);
    let data = corridor(4, 9.0, 10);
    let mut model = Predictor::new(PredictorConfig::default(), Some(&ae), 10).unwrap();
    let fc = model.params.find("grid_fc.weight").unwrap();
    assert_eq!(model.params.get(fc), ae.params.get(ae.fc_enc.w));
    let frozen = model.frozen_names();
    assert_eq!(frozen.len(), 6);
    let bytes = |m: &Predictor<f64>| -> Vec<u64> {
        frozen
            .iter()
            .flat_map(|n| m.params.get(m.params.find(n).unwrap()).data().to_vec())
            .map(f64::to_bits)
            .collect()
    };
    let before = bytes(&model);
    let original: Vec<u64> = ae.convs.param_ids().iter().flat_map(|&id| ae.params.get(id).data().to_vec()).map(f64::to_bits).collect();
    assert_eq!(before, original);
    let seqs = model.build_sequences(&data).unwrap();
    let report = model
        .fit(
            &seqs,
            &TrainConfig {
                epochs: 1,
                max_steps: Some(3),
                ..TrainConfig::default()
            },
        )
        .unwrap();
    assert_eq!(report.optimizer_steps, 3);
    assert_eq!(bytes(&model), before);
    assert_ne!(model.params.get(fc), ae.params.get(ae.fc_enc.w));
}

#[test]
fn dt_mismatch_rejected() {
    let mut data = corridor(2, 6.0, 11);
    data.dt = 0.4;
    for t in &mut data.trajectories {
        t.dt = 0.4;
    }
    assert!(no_grid().build_sequences(&data).is_err());
}

#[test]
fn memorizes_one_trajectory() {
    let full = corridor(3, 12.0, 12);
    let one = Dataset::new(full.map.clone(), vec![full.trajectories[0].clone()], 0.3).unwrap();
    let config = PredictorConfig {
        dropout: 0.0,
        ..PredictorConfig::default()
    };
    let ae = Autoencoder::new(12);
    let mut model = Predictor::new(config, Some(&ae), 12).unwrap();
    let seqs = model.build_sequences(&one).unwrap();
    model
        .fit(
            &seqs,
            &TrainConfig {
                epochs: usize::MAX,
                max_steps: Some(2000),
                learning_rate: 3e-3,
                l2: 0.0,
                ..TrainConfig::default()
            },
        )
        .unwrap();
    let report = evaluate(&model, &one, &EvalConfig::default()).unwrap();
    assert!(report.average < 0.05, "{}", report.average);
}

#[test]
fn walks_forward_down_an_empty_corridor() {
    let spec = CorridorSpec::default();
    let cfg = SimConfig {
        dt: 0.3,
        n_agents: 10,
        duration: 300.0,
        rng_seed: 13,
        environment: spec.build(),
        goal_regions: spec.end_regions(),
    };
    let data = generate_dataset(&cfg, &SfParams::default()).unwrap();
    let mut model = Predictor::new(PredictorConfig::default().without_grid(), None, 13).unwrap();
    let seqs = model.build_sequences(&data).unwrap();
    model.fit(&seqs, &TrainConfig { epochs: 2, ..TrainConfig::default() }).unwrap();

    // A lone walker on the corridor axis at 1 m/s, heading +x.
    let map = spec.build::<f64>();
    let mut h = model.init_session();
    let mut out = Vec::new();
    for k in 0..6 {
        let agent = pedpredict::geometry::AgentState::from_motion(0, Vec2::new(4.0 + 0.3 * k as f64, 3.5), Vec2::new(1.0, 0.0), 0.0);
        let world = pedpredict::geometry::WorldState::new(k, vec![agent]).unwrap();
        let f = model.observe(&world, &map, 0).unwrap();
        (out, h) = model.predict_features(&f, &h).unwrap();
    }
    let mut mean = Vec2::zero();
    for v in &out {
        assert!((0.5..=1.5).contains(&v.norm()), "{out:?}");
        mean += *v;
    }
    assert!(mean.y.atan2(mean.x).abs() < 30f64.to_radians(), "{mean:?}");
}
