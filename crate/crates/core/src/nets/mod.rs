//! From-scratch convolutional surrogate machinery: tensors, kernels,
//! reverse-mode differentiation, the two U-Net builders, losses,
//! optimizers and the training loop.
//!
//! Storage is f32 in production; gradient-check builds run the same code
//! in f64. Reductions always accumulate in f64.

pub mod layers;
pub mod loss;
pub mod ops;
pub mod optim;
pub mod surrogate;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod unet;

pub use layers::{shape_trace, Act, ConvGeom, LayerKind, LayerSpec, Network};
pub use loss::{loss_grad, loss_value, LossKind};
pub use optim::{plateau_step, Optimizer, OptimizerKind, PlateauState};
pub use surrogate::{InputNorm, MonitorSurrogate, SeismicSurrogate};
pub use tape::{backward, forward, init_params, Params, Tape};
pub use tensor::{Scalar, Tensor};
pub use train::{train, Dataset, TrainConfig, TrainReport};
pub use unet::{build_monitor_unet, build_seismic_unet, UnetScale};
