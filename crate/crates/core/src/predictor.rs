//! Three-channel LSTM motion predictor.
//!
//! Each timestep the query agent's local velocity, its angular pedestrian
//! grid and (optionally) its local occupancy grid pass through per-channel
//! embeddings and LSTMs. The channel outputs are concatenated and fed to a
//! joint LSTM whose output head emits the whole horizon of future
//! velocities at once, expressed in the agent frame at query time.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{conv_features, Autoencoder, ConvStack, FEATURE_DIM, LATENT_DIM};
use crate::encoders::{build_apg, extract_local_grid, ApgVector, LocalGrid, APG_CONES, APG_RANGE, GRID_EXTENT, GRID_RESOLUTION};
use crate::error::{Error, Result};
use crate::geometry::{AgentState, Dataset, Trajectory, Vec2, WorldMap, WorldState};
use crate::scalar::Scalar;
use crate::tensornn::{
    Activation, Adam, AdamConfig, Bound, Graph, Linear, LstmCell, LstmNodes, LstmState, NodeId, ParamGrads, ParamKind,
    ParamSet, Tensor,
};

const VEL_EMBED: usize = 32;
const VEL_HIDDEN: usize = 32;
const APG_EMBED: usize = 128;
const APG_HIDDEN: usize = 64;
const GRID_HIDDEN: usize = 64;
const JOINT_HIDDEN: usize = 128;
const HEAD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    /// Prediction steps `K_H`.
    pub horizon: usize,
    pub dt: f64,
    pub d_trunc: usize,
    pub grid_extent: f64,
    pub grid_resolution: f64,
    pub apg_cones: usize,
    pub apg_range: f64,
    /// `false` drops the occupancy-grid channel.
    pub use_grid: bool,
    /// Dropout rate on the embedding layers during training.
    pub dropout: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            dt: 0.3,
            d_trunc: 10,
            grid_extent: GRID_EXTENT,
            grid_resolution: GRID_RESOLUTION,
            apg_cones: APG_CONES,
            apg_range: APG_RANGE,
            use_grid: true,
            dropout: 0.2,
        }
    }
}

impl PredictorConfig {
    pub fn without_grid(self) -> Self {
        Self { use_grid: false, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.d_trunc == 0 {
            return Err(Error::Config("horizon and d_trunc must be at least 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if self.apg_cones == 0 || !(self.apg_range > 0.0) {
            return Err(Error::Config("APG needs cones and a positive range".into()));
        }
        let cells = self.grid_extent / self.grid_resolution;
        if self.use_grid && (cells.round() as usize != crate::autoencoder::GRID_SIZE || (cells - cells.round()).abs() > 1e-6) {
            return Err(Error::Config(format!(
                "the grid channel needs a {0}x{0} local grid",
                crate::autoencoder::GRID_SIZE
            )));
        }
        Ok(())
    }
}

/// Raw per-timestep model input.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionInput<T> {
    pub velocity_local: Vec2<T>,
    pub grid: LocalGrid<T>,
    pub apg: ApgVector<T>,
}

/// Encoded per-timestep input: the grid is reduced to the frozen
/// convolution features.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFeatures<T> {
    pub velocity: Tensor<T>,
    pub apg: Tensor<T>,
    pub grid: Option<Tensor<T>>,
}

/// Recurrent state of every LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorHidden<T> {
    pub velocity: LstmState<T>,
    pub apg: LstmState<T>,
    pub grid: Option<LstmState<T>>,
    pub joint: LstmState<T>,
}

impl<T: Scalar> PredictorHidden<T> {
    pub fn is_zero(&self) -> bool {
        self.velocity.is_zero()
            && self.apg.is_zero()
            && self.grid.as_ref().is_none_or(LstmState::is_zero)
            && self.joint.is_zero()
    }
}

/// Graph handles of a [`PredictorHidden`].
#[derive(Debug, Clone, Copy)]
pub struct HiddenNodes {
    pub velocity: LstmNodes,
    pub apg: LstmNodes,
    pub grid: Option<LstmNodes>,
    pub joint: LstmNodes,
}

impl HiddenNodes {
    pub fn constant<T: Scalar>(g: &mut Graph<'_, T>, h: &PredictorHidden<T>) -> Self {
        Self {
            velocity: LstmNodes::constant(g, &h.velocity),
            apg: LstmNodes::constant(g, &h.apg),
            grid: h.grid.as_ref().map(|s| LstmNodes::constant(g, s)),
            joint: LstmNodes::constant(g, &h.joint),
        }
    }

    pub fn value<T: Scalar>(&self, g: &Graph<'_, T>) -> PredictorHidden<T> {
        PredictorHidden {
            velocity: self.velocity.value(g),
            apg: self.apg.value(g),
            grid: self.grid.map(|s| s.value(g)),
            joint: self.joint.value(g),
        }
    }

    /// Same values with the gradient path cut.
    pub fn detach<T: Scalar>(&self, g: &mut Graph<'_, T>) -> Self {
        Self {
            velocity: self.velocity.detach(g),
            apg: self.apg.detach(g),
            grid: self.grid.map(|s| s.detach(g)),
            joint: self.joint.detach(g),
        }
    }
}

/// Input nodes of one recorded timestep.
#[derive(Debug, Clone, Copy)]
pub struct InputNodes {
    pub velocity: NodeId,
    pub apg: NodeId,
    pub grid: Option<NodeId>,
}

#[derive(Debug, Clone, Copy)]
struct GridChannel {
    convs: ConvStack,
    fc: Linear,
    lstm: LstmCell,
}

#[derive(Debug, Clone, Copy)]
struct Network {
    vel_fc: Linear,
    vel_lstm: LstmCell,
    apg_fc: Linear,
    apg_lstm: LstmCell,
    grid: Option<GridChannel>,
    joint: LstmCell,
    head: Linear,
    out: Linear,
}

#[derive(Debug, Clone)]
pub struct Predictor<T> {
    pub config: PredictorConfig,
    pub params: ParamSet<T>,
    net: Network,
}

impl<T: Scalar> Predictor<T> {
    /// Fresh network. With the grid channel enabled, `ae` supplies the
    /// frozen convolutions and the initial grid embedding.
    pub fn new(config: PredictorConfig, ae: Option<&Autoencoder<T>>, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let vel_fc = Linear::new(&mut params, "vel_fc", 2, VEL_EMBED, Activation::Relu, &mut rng);
        let vel_lstm = LstmCell::new(&mut params, "vel_lstm", VEL_EMBED, VEL_HIDDEN, &mut rng);
        let apg_fc = Linear::new(&mut params, "apg_fc", config.apg_cones, APG_EMBED, Activation::Relu, &mut rng);
        let apg_lstm = LstmCell::new(&mut params, "apg_lstm", APG_EMBED, APG_HIDDEN, &mut rng);
        let grid = if config.use_grid {
            let ae = ae.ok_or_else(|| Error::Config("the grid channel needs a pretrained autoencoder".into()))?;
            let convs = ConvStack::new(&mut params, "grid_", &mut rng);
            let fc = Linear::new(&mut params, "grid_fc", FEATURE_DIM, LATENT_DIM, Activation::Identity, &mut rng);
            let lstm = LstmCell::new(&mut params, "grid_lstm", LATENT_DIM, GRID_HIDDEN, &mut rng);
            let mut channel = GridChannel { convs, fc, lstm };
            copy_from_ae(&mut params, &mut channel, ae)?;
            Some(channel)
        } else {
            None
        };
        let joint_in = VEL_HIDDEN + APG_HIDDEN + if grid.is_some() { GRID_HIDDEN } else { 0 };
        let joint = LstmCell::new(&mut params, "joint_lstm", joint_in, JOINT_HIDDEN, &mut rng);
        let head = Linear::new(&mut params, "head_fc", JOINT_HIDDEN, HEAD, Activation::Relu, &mut rng);
        let out = Linear::new(&mut params, "out_fc", HEAD, 2 * config.horizon, Activation::Identity, &mut rng);
        Ok(Self {
            config,
            params,
            net: Network {
                vel_fc,
                vel_lstm,
                apg_fc,
                apg_lstm,
                grid,
                joint,
                head,
                out,
            },
        })
    }

    pub fn uses_grid(&self) -> bool {
        self.net.grid.is_some()
    }

    /// Names of the frozen convolution tensors (empty without a grid channel).
    pub fn frozen_names(&self) -> Vec<String> {
        self.params
            .entries()
            .iter()
            .filter(|e| !e.trainable)
            .map(|e| e.name.clone())
            .collect()
    }

    /// All-zero recurrent state for a new agent.
    pub fn init_session(&self) -> PredictorHidden<T> {
        PredictorHidden {
            velocity: LstmState::zeros(VEL_HIDDEN),
            apg: LstmState::zeros(APG_HIDDEN),
            grid: self.net.grid.map(|_| LstmState::zeros(GRID_HIDDEN)),
            joint: LstmState::zeros(JOINT_HIDDEN),
        }
    }

    /// Encode a raw input, running the frozen convolutions on the grid.
    pub fn encode_input(&self, input: &PredictionInput<T>) -> Result<StepFeatures<T>> {
        if input.apg.values.len() != self.config.apg_cones {
            return Err(Error::shape(format!(
                "APG has {} cones, model expects {}",
                input.apg.values.len(),
                self.config.apg_cones
            )));
        }
        let grid = match &self.net.grid {
            Some(ch) => Some(conv_features(&ch.convs, &self.params, &input.grid.to_tensor())?),
            None => None,
        };
        Ok(StepFeatures {
            velocity: Tensor::vector(vec![input.velocity_local.x, input.velocity_local.y]),
            apg: Tensor::vector(input.apg.normalized()),
            grid,
        })
    }

    /// Build the model input of `agent_id` from a world snapshot.
    pub fn observe(&self, world: &WorldState<T>, map: &WorldMap<T>, agent_id: u64) -> Result<StepFeatures<T>> {
        let agent = world.agent(agent_id).ok_or(Error::UnknownAgent(agent_id))?;
        let apg = build_apg(world, agent_id, self.config.apg_cones, T::c(self.config.apg_range))?;
        let grid = match &self.net.grid {
            Some(ch) => {
                let local = extract_local_grid(
                    map,
                    agent,
                    T::c(self.config.grid_extent),
                    T::c(self.config.grid_resolution),
                )?;
                Some(conv_features(&ch.convs, &self.params, &local.to_tensor())?)
            }
            None => None,
        };
        let v = agent.local_velocity();
        Ok(StepFeatures {
            velocity: Tensor::vector(vec![v.x, v.y]),
            apg: Tensor::vector(apg.normalized()),
            grid,
        })
    }

    fn input_nodes(&self, g: &mut Graph<'_, T>, f: &StepFeatures<T>, track: bool) -> Result<InputNodes> {
        let mut enter = |t: &Tensor<T>| if track { g.variable(t.clone()) } else { g.constant(t.clone()) };
        let velocity = enter(&f.velocity);
        let apg = enter(&f.apg);
        let grid = match (&self.net.grid, &f.grid) {
            (Some(_), Some(t)) => Some(enter(t)),
            (None, _) => None,
            (Some(_), None) => return Err(Error::shape("grid features missing for the grid channel")),
        };
        Ok(InputNodes { velocity, apg, grid })
    }

    fn embed(&self, g: &mut Graph<'_, T>, bound: &Bound, layer: &Linear, x: NodeId) -> Result<NodeId> {
        let y = layer.forward(g, bound, x)?;
        if g.is_training() && self.config.dropout > 0.0 {
            g.dropout(y, self.config.dropout)
        } else {
            Ok(y)
        }
    }

    /// One timestep: returns the flat `2·K_H` output node and the new state.
    pub fn step_graph(
        &self,
        g: &mut Graph<'_, T>,
        bound: &Bound,
        input: InputNodes,
        hidden: HiddenNodes,
    ) -> Result<(NodeId, HiddenNodes)> {
        let net = &self.net;
        let ev = self.embed(g, bound, &net.vel_fc, input.velocity)?;
        let hv = net.vel_lstm.forward(g, bound, ev, hidden.velocity)?;
        let ea = self.embed(g, bound, &net.apg_fc, input.apg)?;
        let ha = net.apg_lstm.forward(g, bound, ea, hidden.apg)?;
        let mut parts = vec![hv.h, ha.h];
        let hg = match (&net.grid, input.grid, hidden.grid) {
            (Some(ch), Some(x), Some(state)) => {
                let eg = self.embed(g, bound, &ch.fc, x)?;
                let hg = ch.lstm.forward(g, bound, eg, state)?;
                parts.push(hg.h);
                Some(hg)
            }
            (None, _, _) => None,
            _ => return Err(Error::shape("grid channel input or state missing")),
        };
        let joint_in = g.concat(&parts);
        let hj = net.joint.forward(g, bound, joint_in, hidden.joint)?;
        let head = self.embed(g, bound, &net.head, hj.h)?;
        let out = net.out.forward(g, bound, head)?;
        Ok((
            out,
            HiddenNodes {
                velocity: hv,
                apg: ha,
                grid: hg,
                joint: hj,
            },
        ))
    }

    /// Record a run of consecutive timesteps starting from `hidden`.
    /// With `track_inputs` the inputs are entered as gradient-carrying
    /// variables.
    pub fn unroll(
        &self,
        g: &mut Graph<'_, T>,
        bound: &Bound,
        steps: &[StepFeatures<T>],
        hidden: HiddenNodes,
        track_inputs: bool,
    ) -> Result<Unrolled> {
        let mut state = hidden;
        let mut outputs = Vec::with_capacity(steps.len());
        let mut inputs = Vec::with_capacity(steps.len());
        for f in steps {
            let x = self.input_nodes(g, f, track_inputs)?;
            let (out, next) = self.step_graph(g, bound, x, state)?;
            outputs.push(out);
            inputs.push(x);
            state = next;
        }
        Ok(Unrolled {
            outputs,
            inputs,
            hidden: state,
        })
    }

    /// Forecast `K_H` agent-frame velocities and advance the hidden state.
    pub fn predict_features(
        &self,
        features: &StepFeatures<T>,
        hidden: &PredictorHidden<T>,
    ) -> Result<(Vec<Vec2<T>>, PredictorHidden<T>)> {
        let mut g = Graph::new();
        let bound = g.bind(&self.params);
        let h = HiddenNodes::constant(&mut g, hidden);
        let x = self.input_nodes(&mut g, features, false)?;
        let (out, next) = self.step_graph(&mut g, &bound, x, h)?;
        Ok((pairs(g.value(out).data()), next.value(&g)))
    }

    pub fn predict(
        &self,
        input: &PredictionInput<T>,
        hidden: &PredictorHidden<T>,
    ) -> Result<(Vec<Vec2<T>>, PredictorHidden<T>)> {
        self.predict_features(&self.encode_input(input)?, hidden)
    }

    /// `λ · Σ W²` over trainable weight matrices, recorded on `g`.
    pub fn l2_graph(&self, g: &mut Graph<'_, T>, bound: &Bound, lambda: T) -> Result<Option<NodeId>> {
        let mut terms = Vec::new();
        for id in self.params.ids() {
            let e = self.params.entry(id);
            if e.trainable && e.kind == ParamKind::Weight {
                terms.push(g.sum_squares(bound.node(id)));
            }
        }
        if terms.is_empty() || lambda == T::zero() {
            return Ok(None);
        }
        let stacked = g.concat(&terms);
        let total = g.sum(stacked);
        Ok(Some(g.scale(total, lambda)))
    }

    /// Sum over `outputs` of the per-step training loss against `targets`
    /// (each `2·K_H` agent-frame velocities).
    pub fn sequence_loss(
        &self,
        g: &mut Graph<'_, T>,
        bound: &Bound,
        outputs: &[NodeId],
        targets: &[Tensor<T>],
        lambda: T,
    ) -> Result<NodeId> {
        if outputs.len() != targets.len() || outputs.is_empty() {
            return Err(Error::shape(format!(
                "{} outputs vs {} targets",
                outputs.len(),
                targets.len()
            )));
        }
        let mut terms = Vec::with_capacity(outputs.len() + 1);
        for (&out, target) in outputs.iter().zip(targets) {
            let t = g.constant(target.clone());
            let d = g.sub(out, t)?;
            terms.push(g.mean_pair_norm(d)?);
        }
        if let Some(reg) = self.l2_graph(g, bound, lambda)? {
            terms.push(g.scale(reg, T::from_usize_lossy(outputs.len())));
        }
        let stacked = g.concat(&terms);
        Ok(g.sum(stacked))
    }

    /// Agent-frame velocity targets and model inputs for every timestep of
    /// `traj` that has a full horizon of future samples.
    pub fn build_sequence(&self, dataset: &Dataset<T>, index: &crate::geometry::TimeIndex, traj: &Trajectory<T>) -> Result<TrainingSequence<T>> {
        let k_h = self.config.horizon;
        let usable = traj.len().saturating_sub(k_h);
        let mut steps = Vec::with_capacity(usable);
        let mut targets = Vec::with_capacity(usable);
        for k in 0..usable {
            let time = traj.start_index + k as i64;
            let world = dataset.world_state(index, time);
            steps.push(self.observe(&world, &dataset.map, traj.agent_id)?);
            targets.push(velocity_targets(traj, k, k_h)?);
        }
        Ok(TrainingSequence {
            agent_id: traj.agent_id,
            steps,
            targets,
        })
    }

    /// Training sequences of every trajectory of `dataset` long enough to
    /// provide at least one target window.
    pub fn build_sequences(&self, dataset: &Dataset<T>) -> Result<Vec<TrainingSequence<T>>> {
        if (dataset.dt.as_f64() - self.config.dt).abs() > 1e-9 {
            return Err(Error::DtMismatch {
                expected: self.config.dt,
                found: dataset.dt.as_f64(),
            });
        }
        let index = dataset.time_index();
        let mut out = Vec::new();
        for traj in &dataset.trajectories {
            if traj.len() > self.config.horizon {
                out.push(self.build_sequence(dataset, &index, traj)?);
            }
        }
        if out.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no trajectory is longer than the {}-step horizon",
                self.config.horizon
            )));
        }
        Ok(out)
    }

    /// Truncated-BPTT training with Adam. Sequences are processed in groups
    /// of `batch_size`; every group advances one sub-sequence at a time and
    /// takes one optimizer step per sub-sequence round.
    pub fn fit(&mut self, sequences: &[TrainingSequence<T>], hyper: &TrainConfig) -> Result<TrainReport> {
        hyper.validate()?;
        if sequences.iter().all(|s| s.steps.is_empty()) {
            return Err(Error::InsufficientData("no training steps".into()));
        }
        let frozen_before: Vec<Tensor<T>> = self.frozen_tensors();
        let mut adam = Adam::new(
            &self.params,
            AdamConfig {
                learning_rate: hyper.learning_rate,
                ..AdamConfig::default()
            },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let lambda = T::c(hyper.l2);
        let d = self.config.d_trunc;
        let mut report = TrainReport::default();
        let mut order: Vec<usize> = (0..sequences.len()).filter(|&i| !sequences[i].steps.is_empty()).collect();
        'epochs: for epoch in 0..hyper.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut epoch_steps = 0usize;
            for group in order.chunks(hyper.batch_size) {
                let mut hidden: Vec<PredictorHidden<T>> = group.iter().map(|_| self.init_session()).collect();
                let chunks = group.iter().map(|&i| sequences[i].steps.len().div_ceil(d)).max().unwrap_or(0);
                for chunk in 0..chunks {
                    let mut grads = ParamGrads::zeros_like(&self.params);
                    let mut members = 0usize;
                    for (slot, &si) in group.iter().enumerate() {
                        let seq = &sequences[si];
                        let start = chunk * d;
                        if start >= seq.steps.len() {
                            continue;
                        }
                        let end = (start + d).min(seq.steps.len());
                        let dropout_seed = hyper.seed ^ ((report.optimizer_steps as u64) << 20) ^ (slot as u64);
                        let mut g = Graph::training(dropout_seed);
                        let bound = g.bind(&self.params);
                        let h0 = HiddenNodes::constant(&mut g, &hidden[slot]);
                        let un = self.unroll(&mut g, &bound, &seq.steps[start..end], h0, false)?;
                        let loss = self.sequence_loss(&mut g, &bound, &un.outputs, &seq.targets[start..end], lambda)?;
                        let value = g.scalar(loss).as_f64();
                        if !value.is_finite() {
                            return Err(Error::Numeric(format!("non-finite training loss at epoch {epoch}")));
                        }
                        epoch_loss += value;
                        epoch_steps += end - start;
                        grads.accumulate(&g.backward(loss)?.params(&bound, &self.params));
                        hidden[slot] = un.hidden.value(&g);
                        members += 1;
                    }
                    if members == 0 {
                        continue;
                    }
                    grads.scale(T::one() / T::from_usize_lossy(members));
                    if let Some(clip) = hyper.clip_norm {
                        let norm = grads.global_norm().as_f64();
                        if norm > clip {
                            grads.scale(T::c(clip / norm));
                        }
                    }
                    adam.update(&mut self.params, &grads)?;
                    report.optimizer_steps += 1;
                    if hyper.max_steps.is_some_and(|m| report.optimizer_steps >= m) {
                        report.epoch_losses.push(epoch_loss / epoch_steps.max(1) as f64);
                        break 'epochs;
                    }
                }
            }
            report.epoch_losses.push(epoch_loss / epoch_steps.max(1) as f64);
        }
        if frozen_before != self.frozen_tensors() {
            return Err(Error::Numeric("frozen convolution weights changed during training".into()));
        }
        if !self.params.is_finite() {
            return Err(Error::Numeric("training produced non-finite parameters".into()));
        }
        Ok(report)
    }

    fn frozen_tensors(&self) -> Vec<Tensor<T>> {
        self.params
            .entries()
            .iter()
            .filter(|e| !e.trainable)
            .map(|e| e.tensor.clone())
            .collect()
    }
}

fn copy_from_ae<T: Scalar>(params: &mut ParamSet<T>, channel: &mut GridChannel, ae: &Autoencoder<T>) -> Result<()> {
    for (dst, src) in channel.convs.layers.iter().zip(&ae.convs.layers) {
        for (d, s) in [(dst.w, src.w), (dst.b, src.b)] {
            *params.get_mut(d) = ae.params.get(s).clone();
            params.set_trainable(d, false);
        }
    }
    *params.get_mut(channel.fc.w) = ae.params.get(ae.fc_enc.w).clone();
    *params.get_mut(channel.fc.b) = ae.params.get(ae.fc_enc.b).clone();
    Ok(())
}

fn pairs<T: Scalar>(flat: &[T]) -> Vec<Vec2<T>> {
    flat.chunks_exact(2).map(|p| Vec2::new(p[0], p[1])).collect()
}

/// Velocities of samples `k+1 ..= k+K_H` rotated into the frame of sample `k`.
pub fn velocity_targets<T: Scalar>(traj: &Trajectory<T>, k: usize, horizon: usize) -> Result<Tensor<T>> {
    if k + horizon >= traj.len() {
        return Err(Error::InsufficientData(format!(
            "sample {k} of agent {} has no {horizon}-step future",
            traj.agent_id
        )));
    }
    let heading = traj.samples[k].heading;
    let mut data = Vec::with_capacity(2 * horizon);
    for s in &traj.samples[k + 1..=k + horizon] {
        let v = s.velocity.rotated(-heading);
        data.push(v.x);
        data.push(v.y);
    }
    Ok(Tensor::vector(data))
}

/// Positions reached by Euler-integrating agent-frame `velocities` from the
/// agent's position, using its heading at query time.
pub fn integrate<T: Scalar>(velocities: &[Vec2<T>], agent: &AgentState<T>, dt: T) -> Vec<Vec2<T>> {
    let mut p = agent.position;
    velocities
        .iter()
        .map(|v| {
            p += v.rotated(agent.heading) * dt;
            p
        })
        .collect()
}

/// `(1/K_H) Σ ‖u_l − v_l‖ + λ · Σ W²` over the trainable weights of `params`.
pub fn training_loss<T: Scalar>(u: &[Vec2<T>], v_gt: &[Vec2<T>], params: &ParamSet<T>, lambda: T) -> Result<T> {
    if u.len() != v_gt.len() || u.is_empty() {
        return Err(Error::shape(format!("{} predictions vs {} targets", u.len(), v_gt.len())));
    }
    let data: T = u.iter().zip(v_gt).map(|(&a, &b)| (a - b).norm()).sum::<T>() / T::from_usize_lossy(u.len());
    Ok(data + lambda * params.l2_weights())
}

/// Output of [`Predictor::unroll`].
#[derive(Debug, Clone)]
pub struct Unrolled {
    pub outputs: Vec<NodeId>,
    pub inputs: Vec<InputNodes>,
    pub hidden: HiddenNodes,
}

/// Model inputs and velocity targets along one trajectory.
#[derive(Debug, Clone)]
pub struct TrainingSequence<T> {
    pub agent_id: u64,
    pub steps: Vec<StepFeatures<T>>,
    pub targets: Vec<Tensor<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Weight of the L2 penalty.
    pub l2: f64,
    /// Sequences advanced together per optimizer step.
    pub batch_size: usize,
    /// Optional cap on optimizer steps.
    pub max_steps: Option<usize>,
    /// Rescale gradients whose global norm exceeds this.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-3,
            l2: 1e-4,
            batch_size: 8,
            max_steps: None,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || self.l2 < 0.0 {
            return Err(Error::Config("learning_rate must be positive and l2 non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean per-step loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub optimizer_steps: usize,
}

/// Build a predictor and train it on `dataset`.
pub fn train<T: Scalar>(
    dataset: &Dataset<T>,
    ae: Option<&Autoencoder<T>>,
    config: PredictorConfig,
    hyper: &TrainConfig,
) -> Result<(Predictor<T>, TrainReport)> {
    let mut model = Predictor::new(config, ae, hyper.seed)?;
    let sequences = model.build_sequences(dataset)?;
    let report = model.fit(&sequences, hyper)?;
    Ok((model, report))
}
