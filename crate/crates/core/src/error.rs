use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid range for {name}: min {min} > max {max}")]
    InvalidRange { name: &'static str, min: f64, max: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("patch must be at least 2x2, got {height}x{width}")]
    PatchTooSmall { height: usize, width: usize },

    #[error("printable color set is empty")]
    EmptyColorSet,

    #[error("empty batch")]
    EmptyBatch,

    #[error("detector expects {expected_width}x{expected_height} input, got {width}x{height}")]
    InputSize { expected_width: usize, expected_height: usize, width: usize, height: usize },

    #[error("dataset contains no annotated target objects")]
    NoTargets,

    #[error("ground truth is empty across the whole evaluation set")]
    EmptyGroundTruth,

    #[error("need at least 2 source images to split, got {0}")]
    TooFewSources(usize),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),
}
