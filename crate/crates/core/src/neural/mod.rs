//! Feature planes, the decoder MLP and its optimizer.

mod adamw;
mod mlp;
mod model;
mod plane;

pub use adamw::{adamw_step, AdamWState, ParamGroup};
pub use mlp::{mlp_backward, mlp_forward, ColumnCache, Layer, MlpCache, MlpGrads, MlpParams, DEFAULT_LEAKY_SLOPE};
pub(crate) use mlp::dot;
pub use model::{ModelConfig, ModelGrads, PlaneDims, TriplePlaneModel};
pub use plane::{AddressMode, BilinearTaps, FeaturePlane, TexelGrad};
