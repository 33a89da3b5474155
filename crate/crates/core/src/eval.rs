//! Per-step Euclidean prediction error over the horizon, and inference
//! timing across crowd sizes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{predict_cacc, predict_cv, predict_sf, ObservedHistory};
use crate::error::{Error, Result};
use crate::geometry::{AgentState, Dataset, Trajectory, Vec2, WorldMap, WorldState};
use crate::predictor::{integrate, Predictor, PredictorHidden};
use crate::scalar::Scalar;
use crate::simforces::SfParams;

/// `e_k = ‖pred_k − gt_k‖`.
pub fn prediction_error<T: Scalar>(pred: &[Vec2<T>], gt: &[Vec2<T>]) -> Result<Vec<T>> {
    if pred.len() != gt.len() {
        return Err(Error::shape(format!("{} predictions vs {} ground-truth positions", pred.len(), gt.len())));
    }
    Ok(pred.iter().zip(gt).map(|(&p, &g)| (p - g).norm()).collect())
}

/// What a forecaster sees at one timestep of one agent.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a, T> {
    pub dataset: &'a Dataset<T>,
    pub world: &'a WorldState<T>,
    pub trajectory: &'a Trajectory<T>,
    /// Index into `trajectory.samples` of the current observation.
    pub sample: usize,
    pub horizon: usize,
    /// Whether the harness will score the returned forecast. Forecasters
    /// may return an empty vector otherwise.
    pub scored: bool,
}

impl<T> StepContext<'_, T> {
    pub fn agent(&self) -> &AgentState<T> {
        &self.trajectory.samples[self.sample]
    }
}

/// A predictor driven one observation at a time, with per-agent state.
pub trait Forecaster<T: Scalar> {
    type Session;

    fn name(&self) -> String;

    fn start_session(&self, trajectory: &Trajectory<T>) -> Result<Self::Session>;

    /// Consume the current observation and forecast `ctx.horizon` world-frame
    /// positions.
    fn observe_and_predict(&self, session: &mut Self::Session, ctx: &StepContext<'_, T>) -> Result<Vec<Vec2<T>>>;
}

/// Returns the recorded future; its error is zero by construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthOracle;

impl<T: Scalar> Forecaster<T> for GroundTruthOracle {
    type Session = ();

    fn name(&self) -> String {
        "oracle".into()
    }

    fn start_session(&self, _: &Trajectory<T>) -> Result<()> {
        Ok(())
    }

    fn observe_and_predict(&self, _: &mut (), ctx: &StepContext<'_, T>) -> Result<Vec<Vec2<T>>> {
        let end = (ctx.sample + 1 + ctx.horizon).min(ctx.trajectory.len());
        Ok(ctx.trajectory.samples[ctx.sample + 1..end].iter().map(|s| s.position).collect())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl<T: Scalar> Forecaster<T> for ConstantVelocity {
    type Session = ();

    fn name(&self) -> String {
        "cv".into()
    }

    fn start_session(&self, _: &Trajectory<T>) -> Result<()> {
        Ok(())
    }

    fn observe_and_predict(&self, _: &mut (), ctx: &StepContext<'_, T>) -> Result<Vec<Vec2<T>>> {
        Ok(predict_cv(ctx.agent(), ctx.horizon, ctx.dataset.dt))
    }
}

/// Falls back to constant velocity on an agent's first observation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantAcceleration;

impl<T: Scalar> Forecaster<T> for ConstantAcceleration {
    type Session = Option<AgentState<T>>;

    fn name(&self) -> String {
        "cacc".into()
    }

    fn start_session(&self, _: &Trajectory<T>) -> Result<Self::Session> {
        Ok(None)
    }

    fn observe_and_predict(&self, previous: &mut Self::Session, ctx: &StepContext<'_, T>) -> Result<Vec<Vec2<T>>> {
        let current = *ctx.agent();
        let out = match previous.replace(current) {
            Some(prev) => predict_cacc(
                &ObservedHistory {
                    samples: vec![prev, current],
                    dt: ctx.dataset.dt,
                },
                ctx.horizon,
            )?,
            None => predict_cv(&current, ctx.horizon, ctx.dataset.dt),
        };
        Ok(out)
    }
}

/// Social-force rollout towards each agent's final recorded position.
#[derive(Debug, Clone)]
pub struct SocialForceBaseline {
    pub params: SfParams,
}

impl<T: Scalar> Forecaster<T> for SocialForceBaseline {
    type Session = ();

    fn name(&self) -> String {
        "sf".into()
    }

    fn start_session(&self, _: &Trajectory<T>) -> Result<()> {
        Ok(())
    }

    fn observe_and_predict(&self, _: &mut (), ctx: &StepContext<'_, T>) -> Result<Vec<Vec2<T>>> {
        if !ctx.scored {
            return Ok(Vec::new());
        }
        let destinations: HashMap<u64, Vec2<T>> = ctx
            .world
            .agents
            .iter()
            .map(|a| {
                let end = ctx
                    .dataset
                    .trajectories
                    .iter()
                    .find(|t| t.agent_id == a.id)
                    .and_then(Trajectory::last)
                    .ok_or(Error::MissingDestination(a.id))?;
                Ok((a.id, end.position))
            })
            .collect::<Result<_>>()?;
        let mut all = predict_sf(
            ctx.world,
            &ctx.dataset.map,
            &destinations,
            ctx.horizon,
            ctx.dataset.dt,
            &self.params,
        )?;
        all.remove(&ctx.trajectory.agent_id)
            .ok_or(Error::UnknownAgent(ctx.trajectory.agent_id))
    }
}

impl<T: Scalar> Forecaster<T> for Predictor<T> {
    type Session = PredictorHidden<T>;

    fn name(&self) -> String {
        if self.uses_grid() { "lstm" } else { "lstm-nogrid" }.into()
    }

    fn start_session(&self, _: &Trajectory<T>) -> Result<Self::Session> {
        Ok(self.init_session())
    }

    fn observe_and_predict(&self, hidden: &mut Self::Session, ctx: &StepContext<'_, T>) -> Result<Vec<Vec2<T>>> {
        let features = self.observe(ctx.world, &ctx.dataset.map, ctx.trajectory.agent_id)?;
        let (velocities, next) = self.predict_features(&features, hidden)?;
        *hidden = next;
        Ok(integrate(&velocities, ctx.agent(), T::c(self.config.dt)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Caller's statement that the evaluation map was not used for training.
    pub held_out: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            dt: 0.3,
            held_out: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// 1-based horizon step.
    pub step: usize,
    pub mean: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub forecaster: String,
    pub held_out: bool,
    pub dt: f64,
    /// Mean over all scored forecasts and horizon steps.
    pub average: f64,
    pub samples: usize,
    pub steps: Vec<StepStats>,
}

impl ErrorReport {
    /// Build from per-step error lists (each list must have the same length).
    pub fn from_errors(forecaster: impl Into<String>, per_step: Vec<Vec<f64>>, dt: f64, held_out: bool) -> Result<Self> {
        let samples = per_step.first().map_or(0, Vec::len);
        if per_step.iter().any(|e| e.len() != samples) {
            return Err(Error::shape("per-step error lists differ in length"));
        }
        let mut all = Vec::with_capacity(samples * per_step.len());
        let steps = per_step
            .into_iter()
            .enumerate()
            .map(|(i, mut e)| {
                // Sorting first makes every statistic independent of the
                // order in which forecasts were scored.
                e.sort_by(f64::total_cmp);
                all.extend_from_slice(&e);
                StepStats {
                    step: i + 1,
                    mean: mean(&e),
                    p25: quantile(&e, 0.25),
                    p50: quantile(&e, 0.5),
                    p75: quantile(&e, 0.75),
                    n: e.len(),
                }
            })
            .collect();
        all.sort_by(f64::total_cmp);
        Ok(Self {
            forecaster: forecaster.into(),
            held_out,
            dt,
            average: mean(&all),
            samples,
            steps,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mean,p25,p50,p75,n\n");
        for s in &self.steps {
            writeln!(out, "{},{},{},{},{},{}", s.step, s.mean, s.p25, s.p50, s.p75, s.n).expect("writing to a String");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn mean(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        0.0
    } else {
        sorted.iter().sum::<f64>() / sorted.len() as f64
    }
}

/// Linear interpolation between closest ranks.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Walk every trajectory of `dataset` step by step, keeping one session per
/// agent, and score each forecast that has a full ground-truth horizon.
pub fn evaluate<T: Scalar, F: Forecaster<T>>(forecaster: &F, dataset: &Dataset<T>, config: &EvalConfig) -> Result<ErrorReport> {
    if (dataset.dt.as_f64() - config.dt).abs() > 1e-9 {
        return Err(Error::DtMismatch {
            expected: config.dt,
            found: dataset.dt.as_f64(),
        });
    }
    let h = config.horizon;
    let index = dataset.time_index();
    let mut per_step = vec![Vec::new(); h];
    for traj in &dataset.trajectories {
        let mut session = forecaster.start_session(traj)?;
        for k in 0..traj.len() {
            let time = traj.start_index + k as i64;
            let world = dataset.world_state(&index, time);
            let scored = k + h < traj.len();
            let ctx = StepContext {
                dataset,
                world: &world,
                trajectory: traj,
                sample: k,
                horizon: h,
                scored,
            };
            let pred = forecaster.observe_and_predict(&mut session, &ctx)?;
            if scored {
                let gt: Vec<_> = traj.samples[k + 1..=k + h].iter().map(|s| s.position).collect();
                for (slot, e) in per_step.iter_mut().zip(prediction_error(&pred, &gt)?) {
                    slot.push(e.as_f64());
                }
            }
        }
    }
    ErrorReport::from_errors(forecaster.name(), per_step, config.dt, config.held_out)
}

/// Forecasts for every agent present at `time`, each agent's session
/// having observed its trajectory from the start up to `time`.
pub fn forecast_snapshot<T: Scalar, F: Forecaster<T>>(
    forecaster: &F,
    dataset: &Dataset<T>,
    time: i64,
    horizon: usize,
) -> Result<Vec<(u64, Vec<Vec2<T>>)>> {
    let index = dataset.time_index();
    let mut out = Vec::new();
    for traj in &dataset.trajectories {
        if traj.at_time(time).is_none() {
            continue;
        }
        let mut session = forecaster.start_session(traj)?;
        let last = (time - traj.start_index) as usize;
        let mut pred = Vec::new();
        for k in 0..=last {
            let world = dataset.world_state(&index, traj.start_index + k as i64);
            let ctx = StepContext {
                dataset,
                world: &world,
                trajectory: traj,
                sample: k,
                horizon,
                scored: k == last,
            };
            pred = forecaster.observe_and_predict(&mut session, &ctx)?;
        }
        out.push((traj.agent_id, pred));
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!("no agent is present at time index {time}")));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    pub n_agents: usize,
    /// Mean and standard deviation of the per-agent latency (ms).
    pub per_agent_mean_ms: f64,
    pub per_agent_std_ms: f64,
    /// Mean time to serve every agent of one frame (ms).
    pub frame_mean_ms: f64,
    pub queries: usize,
}

/// Wall-clock inference latency (input encoding plus network) for each
/// crowd size. Agents are scattered over `map`'s free space; every query
/// serves all agents of one frame.
pub fn timing_benchmark<T: Scalar>(
    predictor: &Predictor<T>,
    map: &WorldMap<T>,
    crowd_sizes: &[usize],
    queries: usize,
    seed: u64,
) -> Result<Vec<TimingResult>> {
    let queries = queries.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = map.extent();
    let mut out = Vec::with_capacity(crowd_sizes.len());
    for &n in crowd_sizes {
        if n == 0 {
            return Err(Error::Config("crowd size must be positive".into()));
        }
        let mut agents = Vec::with_capacity(n);
        let mut attempts = 0;
        while agents.len() < n {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::InsufficientData("map has too little free space".into()));
            }
            let p = map.origin
                + Vec2::new(
                    extent.x * T::c(rng.random::<f64>()),
                    extent.y * T::c(rng.random::<f64>()),
                );
            if map.is_occupied_at(p) {
                continue;
            }
            let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let v = Vec2::new(T::c(angle.cos()), T::c(angle.sin()));
            agents.push(AgentState::from_motion(agents.len() as u64, p, v, T::zero()));
        }
        let world = WorldState::new(0, agents)?;
        let mut sessions: Vec<_> = (0..n).map(|_| predictor.init_session()).collect();
        let frame = |sessions: &mut [PredictorHidden<T>]| -> Result<()> {
            for (id, hidden) in sessions.iter_mut().enumerate() {
                let f = predictor.observe(&world, map, id as u64)?;
                let (_, next) = predictor.predict_features(&f, hidden)?;
                *hidden = next;
            }
            Ok(())
        };
        let warmup = (queries / 10).max(3);
        for _ in 0..warmup {
            frame(&mut sessions)?;
        }
        let mut per_agent = Vec::with_capacity(queries);
        let mut frames = 0.0;
        for _ in 0..queries {
            let t0 = Instant::now();
            frame(&mut sessions)?;
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            frames += ms;
            per_agent.push(ms / n as f64);
        }
        let m = per_agent.iter().sum::<f64>() / queries as f64;
        let var = per_agent.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (queries.max(2) - 1) as f64;
        out.push(TimingResult {
            n_agents: n,
            per_agent_mean_ms: m,
            per_agent_std_ms: var.sqrt(),
            frame_mean_ms: frames / queries as f64,
            queries,
        });
    }
    Ok(out)
}

/// Least-squares line `y = a + b·x`; returns `(a, b, R²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientData("a line fit needs two or more points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("x values are all equal".into()));
    }
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((my - b * mx, b, r2))
}
