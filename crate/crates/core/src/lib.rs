//! Self-attention acoustic models trained with the connectionist temporal
//! classification (CTC) loss, end to end: a dense-matrix numeric core with
//! reverse-mode differentiation, feature and label pipelines, the exact CTC
//! loss with decoders, the self-attention encoder, the training recipe, and
//! attention-head analysis.

pub mod analysis;
pub mod ctc;
pub mod error;
pub mod featio;
pub mod labels;
pub mod numkit;
pub mod san;
pub mod trainkit;

pub use error::{CtcError, FeatError, LabelError, NumError, SanError, TrainError};
pub use numkit::{Matrix, Rng, Tape};
