//! Silhouette sequences, subject records, labels, and dataset indexing.

mod index;
mod scores;
mod sequence;

pub use index::{Dataset, DatasetIndex, SequenceEntry, Split, SubjectRecord, INDEX_FILE_NAME, INDEX_FORMAT_VERSION};
pub use scores::{assign_group, grade_phq, grade_sds, Grade, Group, RiskLabel, PHQ9_RANGE, SDS_RANGE};
pub use sequence::{
    Attire, Direction, SequenceHeader, SequenceMeta, SilhouetteSequence, FRAME_HEIGHT, FRAME_WIDTH,
    SEQUENCE_HEADER_LEN, SEQUENCE_MAGIC, SEQUENCE_VERSION,
};
