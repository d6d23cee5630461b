//! Labeled corpora, confusion metrics and the significance sweep.

pub mod metrics;
pub mod sweep;
pub mod synth;

pub use metrics::{score_metrics, Metrics};
pub use sweep::{render_aligned, render_csv, significance_sweep, SweepRow, DEFAULT_GRID, ENSEMBLE};
pub use synth::{
    hdfs_masks, read_corpus, read_labels, synth_hdfs, synth_iiot, write_corpus, LabeledCorpus, SynthSpec,
    HDFS_FORMAT, IIOT_FORMAT,
};

use thiserror::Error;

use crate::detector::DetectError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("verdicts and labels disagree: {0}")]
    LabelMismatch(String),
    #[error("label file line {line}: {reason}")]
    MalformedLabels { line: usize, reason: String },
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
