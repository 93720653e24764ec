//! Single-logit binary classifier trained from scratch.
//!
//! Under a uniform class prior the logit `z` estimates
//! `log p_in(x) / p_base(x)`; `σ(z)` is the posterior `p(y = 1 | x)`.

mod arch;
mod checkpoint;
mod gradcheck;
mod loss;
mod model;
mod train;

pub use arch::{ArchKind, ArchitectureSpec, LayerSpec};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use loss::{bce_with_logit, sigmoid};
pub use model::{Gradients, LayerParams, Model};
pub use train::{accuracy, train, EvalHook, TrainConfig};
