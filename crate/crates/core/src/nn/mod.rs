//! Minimal neural network engine: channels-last tensors, hand-derived
//! gradients, Adam, and the checkpoint container.

mod adam;
mod arch;
mod gradcheck;
mod layers;
mod loss;
mod model;
mod serm;
mod tensor;
mod train;

pub use adam::{adam_step, AdamConfig};
pub use arch::{ArchConfig, InputKind, LayerPlan, LayerSpec, ARCH_SCHEMA_VERSION};
pub use gradcheck::{gradient_check, relative_error, GradCheckConfig, GradCheckReport, KindResult};
pub use loss::{cross_entropy_loss, PROB_FLOOR};
pub use model::{
    argmax, backward, forward, init_parameters, AdamState, Checkpoint, ForwardPass, GradientEntry, Gradients,
    Mode, NamedTensor, Network, Prediction, RngState,
};
pub use serm::{decode_serm, encode_serm, model_kind, RawTensor, MODEL_MAGIC, MODEL_VERSION};
pub use tensor::Tensor;
pub use train::{accuracy, train, train_from, Dataset, EpochRecord, History, ModelFamily, TrainConfig};
