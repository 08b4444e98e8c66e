use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("block of {len} samples is shorter than the {span}-sample filter span")]
    InsufficientLength { len: usize, span: usize },

    #[error("cannot normalize an all-zero waveform")]
    ZeroPower,

    #[error("non-finite input value")]
    NonFinite,

    #[error("class {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },

    #[error("graded quantizer needs at least 2 bits, got {0}")]
    GradedBits(u32),

    #[error("all-zero matrix has no l1/l2 ratio")]
    ZeroMatrix,

    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("NaN in neuron state")]
    NanState,

    #[error("non-finite gradient in batch {batch}")]
    NonFiniteGradient { batch: u64 },

    #[error("training diverged at step {step}: loss is {loss}")]
    Diverged { step: u64, loss: f64 },

    #[error("{field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}
