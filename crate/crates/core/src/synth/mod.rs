//! Parametric stick-walker simulator producing labelled multi-view silhouette corpora.

mod generate;
mod render;
mod walker;

pub use generate::{
    generate_dataset, generate_in_memory, sequence_path, shot_grid, subject_id, subject_label, GeneratorConfig,
    SEQUENCES_PER_SUBJECT,
};
pub use render::{render_sequence, CameraView, Shot};
pub use walker::{sample_walker_params, ClassDistribution, Gaussian, LimbProportions, ParamDistribution, WalkerParams};
