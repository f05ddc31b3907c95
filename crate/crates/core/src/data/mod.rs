//! Dense label representation, on-disk formats, statistics and synthetic data.

mod dataset;
mod formats;
mod labels;
mod stats;
mod synth;

pub use dataset::{Dataset, VideoRecord};
pub use formats::{read_annotation, read_features, write_annotation, write_features, Annotation, FEATURE_MAGIC};
pub use labels::{merge_intervals, rasterize, DenseLabels, LabelInterval};
pub use stats::{dataset_stats, ClassStats, DatasetStats};
pub(crate) use stats::write_rows;
pub use synth::{audit_rules, synth_generate, ClassSpec, EventDistribution, Range, Rule, SynthDataset, SynthSpec};
