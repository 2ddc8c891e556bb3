//! Dual-branch 3D-convolutional backbone with temporal/spatial compression,
//! recognition head, and training objectives.

mod backbone;
mod config;
mod loss;
mod params;

pub use backbone::{
    backbone_forward, clip_tensor, dfe_forward, global_branch, head_forward, local_branch, risk_probability,
    scl_forward, tcl_forward, BlockVars, ForwardTrace, Model, ParamVars,
};
pub use config::{BlockConfig, Extents, ModelConfig, ShapeTrace};
pub use loss::{ce_loss, ce_value, total_loss, triplet_loss_batch, triplet_reference, triplet_term};
pub use params::{parameter_layout, ModelParameters};
