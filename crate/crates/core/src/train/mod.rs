//! PK batch sampling, the optimization loop, loss logging and checkpoints.

mod checkpoint;
mod config;
mod sampler;
mod trainer;

pub use checkpoint::{
    decode_checkpoint, layout_entries, load_checkpoint, save_checkpoint, ArrayEntry, ArrayRole, Checkpoint,
    CheckpointManifest, RngState, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{lr_schedule, TrainConfig, CANONICAL_BATCH};
pub use sampler::{sample_pk_batch, Batch, SubjectPool};
pub use trainer::{
    read_loss_log, run_training, train, LossLog, StepLog, TrainOutcome, Trainer, FINAL_CHECKPOINT_FILE, LOSS_LOG_FILE,
};
