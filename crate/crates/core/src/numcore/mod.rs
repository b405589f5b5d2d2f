//! Dense tensors, recorded operations and reverse-mode gradients.

mod checkpoint;
mod gradcheck;
mod param;
mod tape;
mod tensor;

pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub use gradcheck::{grad_check, relative_error, Difference, GradCheckOptions, GradCheckReport, ParamCheck};
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NumError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: [usize; 2],
        right: [usize; 2],
    },
    #[error("shape {shape:?} does not hold {len} values")]
    BadLength { shape: [usize; 2], len: usize },
    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange { op: &'static str, index: usize, bound: usize },
    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },
    #[error("expected a scalar, got shape {shape:?}")]
    NotScalar { shape: [usize; 2] },
    #[error("{op}: no inputs")]
    Empty { op: &'static str },
    #[error("unsupported axis {axis}")]
    BadAxis { axis: usize },
    #[error("{rows} rows cannot be split into blocks of {block}")]
    BadBlock { rows: usize, block: usize },
    #[error("dropout rate {0} outside [0, 1)")]
    DropoutRate(f64),
    #[error("backward already ran on this tape")]
    BackwardTwice,
    #[error("loss closure is not deterministic ({first} vs {second})")]
    NonDeterministic { first: f64, second: f64 },
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
