//! Convolutional autoencoder for local occupancy grids.
//!
//! The encoder is three strided convolutions followed by a fully-connected
//! projection to a 64-d latent. The decoder maps the latent back to the
//! flattened feature map and runs the same three kernels as transposed
//! convolutions, so encoder and decoder share their convolution weights.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{extract_local_grid, LocalGrid, GRID_EXTENT, GRID_RESOLUTION};
use crate::error::{Error, Result};
use crate::geometry::Dataset;
use crate::scalar::Scalar;
use crate::tensornn::{
    Activation, Adam, AdamConfig, Bound, Conv2d, ConvSpec, Graph, Linear, NodeId, ParamGrads, ParamId, ParamKind,
    ParamSet, Tensor,
};

pub const LATENT_DIM: usize = 64;
pub const GRID_SIZE: usize = 60;
/// Shape of the last convolution's output.
pub const FEATURE_SHAPE: [usize; 3] = [32, 8, 8];
pub const FEATURE_DIM: usize = 32 * 8 * 8;

/// "Half" zero padding (k/2) lets every kernel reach the last row and column
/// of its input.
const PAD2: ConvSpec = ConvSpec { stride: 2, pad: 2 };
const PAD1: ConvSpec = ConvSpec { stride: 2, pad: 1 };

/// The three encoder convolutions (kernels and biases).
#[derive(Debug, Clone, Copy)]
pub struct ConvStack {
    pub layers: [Conv2d; 3],
}

impl ConvStack {
    pub fn new<T: Scalar, R: Rng + ?Sized>(params: &mut ParamSet<T>, prefix: &str, rng: &mut R) -> Self {
        Self {
            layers: [
                Conv2d::new(params, &format!("{prefix}conv1"), 1, 8, 5, PAD2, rng),
                Conv2d::new(params, &format!("{prefix}conv2"), 8, 16, 5, PAD2, rng),
                Conv2d::new(params, &format!("{prefix}conv3"), 16, 32, 3, PAD1, rng),
            ],
        }
    }

    /// `[1, 60, 60]` grid to the flattened ReLU feature map.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, bound: &Bound, grid: NodeId) -> Result<NodeId> {
        let mut x = grid;
        for layer in &self.layers {
            let y = layer.forward(g, bound, x)?;
            x = g.relu(y);
        }
        g.reshape(x, &[FEATURE_DIM])
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.w, l.b]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Autoencoder<T> {
    pub params: ParamSet<T>,
    pub convs: ConvStack,
    pub fc_enc: Linear,
    pub fc_dec: Linear,
    /// Output biases of the transposed convolutions, innermost first.
    pub dec_bias: [ParamId; 3],
}

/// Spatial sizes seen by each convolution, input first.
const SIZES: [usize; 4] = [60, 30, 15, 8];

impl<T: Scalar> Autoencoder<T> {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let convs = ConvStack::new(&mut params, "", &mut rng);
        let fc_enc = Linear::new(&mut params, "fc_enc", FEATURE_DIM, LATENT_DIM, Activation::Identity, &mut rng);
        let fc_dec = Linear::new(&mut params, "fc_dec", LATENT_DIM, FEATURE_DIM, Activation::Identity, &mut rng);
        let mut dec = |name: &str, n: usize| params.add(name, Tensor::zeros(&[n]), ParamKind::Bias);
        let dec_bias = [dec("deconv3.bias", 16), dec("deconv2.bias", 8), dec("deconv1.bias", 1)];
        Self {
            params,
            convs,
            fc_enc,
            fc_dec,
            dec_bias,
        }
    }

    pub fn encode_graph(&self, g: &mut Graph<'_, T>, bound: &Bound, grid: NodeId) -> Result<NodeId> {
        check_grid_shape(g.value(grid))?;
        let f = self.convs.forward(g, bound, grid)?;
        self.fc_enc.forward(g, bound, f)
    }

    pub fn decode_graph(&self, g: &mut Graph<'_, T>, bound: &Bound, latent: NodeId) -> Result<NodeId> {
        if g.value(latent).shape() != [LATENT_DIM] {
            return Err(Error::shape(format!(
                "latent must have shape [{LATENT_DIM}], got {:?}",
                g.value(latent).shape()
            )));
        }
        let flat = self.fc_dec.forward(g, bound, latent)?;
        let mut x = g.reshape(flat, &FEATURE_SHAPE)?;
        for (depth, layer) in self.convs.layers.iter().enumerate().rev() {
            let size = SIZES[depth];
            let b = bound.node(self.dec_bias[2 - depth]);
            x = g.conv_transpose2d(x, bound.node(layer.w), b, layer.spec, (size, size))?;
            if depth > 0 {
                x = g.relu(x);
            }
        }
        Ok(g.sigmoid(x))
    }

    /// Sum-of-squares reconstruction loss of one grid, recorded on `g`.
    pub fn loss_graph(&self, g: &mut Graph<'_, T>, bound: &Bound, grid: &Tensor<T>) -> Result<NodeId> {
        let x = g.constant(grid.clone());
        let z = self.encode_graph(g, bound, x)?;
        let y = self.decode_graph(g, bound, z)?;
        let diff = g.sub(y, x)?;
        Ok(g.sum_squares(diff))
    }

    pub fn encode(&self, grid: &LocalGrid<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let bound = g.bind(&self.params);
        let x = g.constant(grid.to_tensor());
        let z = self.encode_graph(&mut g, &bound, x)?;
        Ok(g.value(z).clone())
    }

    pub fn decode(&self, latent: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let bound = g.bind(&self.params);
        let z = g.constant(latent.clone());
        let y = self.decode_graph(&mut g, &bound, z)?;
        Ok(g.value(y).clone())
    }

    pub fn reconstruct(&self, grid: &LocalGrid<T>) -> Result<Tensor<T>> {
        self.decode(&self.encode(grid)?)
    }

    /// Flattened output of the convolution stack.
    pub fn conv_features(&self, grid: &LocalGrid<T>) -> Result<Tensor<T>> {
        conv_features(&self.convs, &self.params, &grid.to_tensor())
    }
}

fn check_grid_shape<T>(t: &Tensor<T>) -> Result<()>
where
    T: Scalar,
{
    if t.shape() != [1, GRID_SIZE, GRID_SIZE] {
        return Err(Error::shape(format!(
            "grid must have shape [1, {GRID_SIZE}, {GRID_SIZE}], got {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// Convolution features of a `[1, 60, 60]` grid tensor.
pub fn conv_features<T: Scalar>(convs: &ConvStack, params: &ParamSet<T>, grid: &Tensor<T>) -> Result<Tensor<T>> {
    check_grid_shape(grid)?;
    let mut g = Graph::new();
    let bound = g.bind(params);
    let x = g.constant(grid.clone());
    let f = convs.forward(&mut g, &bound, x)?;
    Ok(g.value(f).clone())
}

/// `Σ (g_in − g_out)²` over all cells.
pub fn ae_loss<T: Scalar>(g_in: &Tensor<T>, g_out: &Tensor<T>) -> Result<T> {
    if g_in.shape() != g_out.shape() {
        return Err(Error::shape(format!(
            "ae_loss: {:?} vs {:?}",
            g_in.shape(),
            g_out.shape()
        )));
    }
    Ok(g_in
        .data()
        .iter()
        .zip(g_out.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AePretrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AePretrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Per-step mean minibatch loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurve {
    pub losses: Vec<f64>,
}

impl LossCurve {
    pub fn first(&self) -> Option<f64> {
        self.losses.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

/// Minimise the reconstruction loss over `grids` with Adam on shuffled
/// minibatches.
pub fn pretrain<T: Scalar>(
    ae: &mut Autoencoder<T>,
    grids: &[LocalGrid<T>],
    config: &AePretrainConfig,
) -> Result<LossCurve> {
    if grids.is_empty() {
        return Err(Error::InsufficientData("autoencoder pretraining needs at least one grid".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let tensors: Vec<Tensor<T>> = grids.iter().map(LocalGrid::to_tensor).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(
        &ae.params,
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut order: Vec<usize> = (0..tensors.len()).collect();
    let mut cursor = order.len();
    let mut curve = LossCurve::default();
    let batch = config.batch_size.min(tensors.len());
    for _ in 0..config.steps {
        let mut grads = ParamGrads::zeros_like(&ae.params);
        let mut total = 0.0;
        for _ in 0..batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let sample = &tensors[order[cursor]];
            cursor += 1;
            let mut g = Graph::new();
            let bound = g.bind(&ae.params);
            let loss = ae.loss_graph(&mut g, &bound, sample)?;
            total += g.scalar(loss).as_f64();
            grads.accumulate(&g.backward(loss)?.params(&bound, &ae.params));
        }
        grads.scale(T::one() / T::from_usize_lossy(batch));
        adam.update(&mut ae.params, &grads)?;
        curve.losses.push(total / batch as f64);
    }
    Ok(curve)
}

/// Mean reconstruction loss over `grids`.
pub fn mean_loss<T: Scalar>(ae: &Autoencoder<T>, grids: &[LocalGrid<T>]) -> Result<f64> {
    if grids.is_empty() {
        return Err(Error::InsufficientData("no grids".into()));
    }
    let mut total = 0.0;
    for grid in grids {
        total += ae_loss(&grid.to_tensor(), &ae.reconstruct(grid)?)?.as_f64();
    }
    Ok(total / grids.len() as f64)
}

/// Local grids at `count` poses drawn uniformly from the samples of
/// `dataset`.
pub fn harvest_grids<T: Scalar>(dataset: &Dataset<T>, count: usize, seed: u64) -> Result<Vec<LocalGrid<T>>> {
    let poses: Vec<_> = dataset.trajectories.iter().flat_map(|t| t.samples.iter()).collect();
    if poses.is_empty() {
        return Err(Error::InsufficientData("dataset has no samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let pose = poses[rng.random_range(0..poses.len())];
            extract_local_grid(&dataset.map, pose, T::c(GRID_EXTENT), T::c(GRID_RESOLUTION))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let ae = Autoencoder::<f64>::new(0);
        let grid = LocalGrid::zeros(60, 0.1);
        let z = ae.encode(&grid).unwrap();
        assert_eq!(z.shape(), &[64]);
        let y = ae.decode(&z).unwrap();
        assert_eq!(y.shape(), &[1, 60, 60]);
        assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(ae.conv_features(&grid).unwrap().shape(), &[FEATURE_DIM]);
    }

    #[test]
    fn wrong_sizes_rejected() {
        let ae = Autoencoder::<f64>::new(0);
        assert!(ae.encode(&LocalGrid::zeros(50, 0.1)).is_err());
        assert!(ae.decode(&Tensor::zeros(&[32])).is_err());
    }

    #[test]
    fn loss_examples() {
        let ones = Tensor::<f64>::full(&[1, 60, 60], 1.0);
        let zeros = Tensor::<f64>::zeros(&[1, 60, 60]);
        assert_eq!(ae_loss(&ones, &ones).unwrap(), 0.0);
        assert_eq!(ae_loss(&ones, &zeros).unwrap(), 3600.0);
        assert!(ae_loss(&ones, &Tensor::zeros(&[3600])).is_err());
    }
}
