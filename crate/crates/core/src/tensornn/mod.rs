//! Minimal differentiable building blocks: tensors, a reverse-mode tape,
//! layers, Adam, and a finite-difference gradient checker.

pub mod adam;
mod conv;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod params;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use conv::conv_out_size;
pub use gradcheck::{gradient_check, relative_error, GradCheckConfig, GradCheckReport};
pub use graph::{Bound, ConvSpec, Gradients, Graph, NodeId};
pub use layers::{Activation, Conv2d, Linear, LstmCell, LstmNodes, LstmState};
pub use params::{ParamEntry, ParamGrads, ParamId, ParamKind, ParamSet};
pub use tensor::Tensor;
