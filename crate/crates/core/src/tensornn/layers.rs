//! Fully-connected, convolutional and LSTM layers expressed on a [`Graph`].

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::graph::{Bound, ConvSpec, Graph, NodeId};
use super::params::{ParamId, ParamKind, ParamSet};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

fn init_bound<T: Scalar>(fan_in: usize) -> T {
    T::one() / T::from_usize_lossy(fan_in).sqrt()
}

/// `y = act(W x + b)`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let s = init_bound::<T>(inputs);
        let w = params.add(
            format!("{name}.weight"),
            Tensor::uniform(&[outputs, inputs], s, rng),
            ParamKind::Weight,
        );
        let b = params.add(
            format!("{name}.bias"),
            Tensor::uniform(&[outputs], s, rng),
            ParamKind::Bias,
        );
        Self {
            w,
            b,
            inputs,
            outputs,
            activation,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, bound: &Bound, x: NodeId) -> Result<NodeId> {
        let wx = g.matvec(bound.node(self.w), x)?;
        let y = g.add(wx, bound.node(self.b))?;
        Ok(match self.activation {
            Activation::Identity => y,
            Activation::Relu => g.relu(y),
        })
    }
}

/// Convolution over `[C, H, W]` inputs with kernel `[O, C, k, k]`.
#[derive(Debug, Clone, Copy)]
pub struct Conv2d {
    pub w: ParamId,
    pub b: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub spec: ConvSpec,
}

impl Conv2d {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        spec: ConvSpec,
        rng: &mut R,
    ) -> Self {
        let s = init_bound::<T>(in_channels * kernel * kernel);
        let w = params.add(
            format!("{name}.weight"),
            Tensor::uniform(&[out_channels, in_channels, kernel, kernel], s, rng),
            ParamKind::Weight,
        );
        let b = params.add(
            format!("{name}.bias"),
            Tensor::uniform(&[out_channels], s, rng),
            ParamKind::Bias,
        );
        Self {
            w,
            b,
            in_channels,
            out_channels,
            kernel,
            spec,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, bound: &Bound, x: NodeId) -> Result<NodeId> {
        g.conv2d(x, bound.node(self.w), bound.node(self.b), self.spec)
    }
}

/// Hidden and cell state of one LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: Tensor<T>,
    pub c: Tensor<T>,
}

impl<T: Scalar> LstmState<T> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: Tensor::zeros(&[hidden]),
            c: Tensor::zeros(&[hidden]),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.h.data().iter().chain(self.c.data()).all(|&v| v == T::zero())
    }
}

/// Graph handles of an [`LstmState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmNodes {
    pub h: NodeId,
    pub c: NodeId,
}

impl LstmNodes {
    /// Enter a value-level state as graph constants.
    pub fn constant<T: Scalar>(g: &mut Graph<'_, T>, state: &LstmState<T>) -> Self {
        Self {
            h: g.constant(state.h.clone()),
            c: g.constant(state.c.clone()),
        }
    }

    pub fn value<T: Scalar>(&self, g: &Graph<'_, T>) -> LstmState<T> {
        LstmState {
            h: g.value(self.h).clone(),
            c: g.value(self.c).clone(),
        }
    }

    pub fn detach<T: Scalar>(&self, g: &mut Graph<'_, T>) -> Self {
        Self {
            h: g.detach(self.h),
            c: g.detach(self.c),
        }
    }
}

/// LSTM cell with gate blocks stacked as `[input, forget, cell, output]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let s = init_bound::<T>(inputs + hidden);
        let w_ih = params.add(
            format!("{name}.w_ih"),
            Tensor::uniform(&[4 * hidden, inputs], s, rng),
            ParamKind::Weight,
        );
        let w_hh = params.add(
            format!("{name}.w_hh"),
            Tensor::uniform(&[4 * hidden, hidden], s, rng),
            ParamKind::Weight,
        );
        let mut bias = Tensor::uniform(&[4 * hidden], s, rng);
        bias.data_mut()[hidden..2 * hidden].fill(T::one());
        let b = params.add(format!("{name}.bias"), bias, ParamKind::Bias);
        Self {
            w_ih,
            w_hh,
            b,
            inputs,
            hidden,
        }
    }

    pub fn zero_state<T: Scalar>(&self) -> LstmState<T> {
        LstmState::zeros(self.hidden)
    }

    /// One step: returns the new `(h, c)`; `h` is also the layer output.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        bound: &Bound,
        x: NodeId,
        state: LstmNodes,
    ) -> Result<LstmNodes> {
        if g.value(state.h).len() != self.hidden || g.value(state.c).len() != self.hidden {
            return Err(Error::shape(format!(
                "lstm state must have {} units",
                self.hidden
            )));
        }
        let n = self.hidden;
        let a = g.matvec(bound.node(self.w_ih), x)?;
        let r = g.matvec(bound.node(self.w_hh), state.h)?;
        let ar = g.add(a, r)?;
        let z = g.add(ar, bound.node(self.b))?;
        let zi = g.slice(z, 0, n)?;
        let zf = g.slice(z, n, n)?;
        let zg = g.slice(z, 2 * n, n)?;
        let zo = g.slice(z, 3 * n, n)?;
        let i = g.sigmoid(zi);
        let f = g.sigmoid(zf);
        let cand = g.tanh(zg);
        let o = g.sigmoid(zo);
        let fc = g.mul(f, state.c)?;
        let ig = g.mul(i, cand)?;
        let c = g.add(fc, ig)?;
        let tc = g.tanh(c);
        let h = g.mul(o, tc)?;
        Ok(LstmNodes { h, c })
    }
}
