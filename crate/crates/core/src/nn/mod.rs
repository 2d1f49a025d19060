//! Minimal reverse-mode gradient engine and the layers used by the model.

mod checkpoint;
mod gradcheck;
mod graph;
mod layers;
mod loss;
mod params;
mod tensor;

pub use checkpoint::{checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{check_gradients, GradCheckOptions, GradCheckReport, GradModule};
pub use graph::{Backward, Graph, NodeId};
pub use layers::{attention_penalty, Affine, AttentionConfig, Dropout, Pooled, SelfAttentivePooling, TdnnBlock};
pub use loss::{cosine_logits, margin_loss_with_grads, psi, softmax_cross_entropy, LogitScale, MarginConfig};
pub use params::{Grads, ParamId, ParamStore};
pub use tensor::{matmul, matmul_nt, matmul_tn, Tensor};
