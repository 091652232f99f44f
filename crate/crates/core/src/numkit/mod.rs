//! Numeric core: dense matrices, elementary neural ops, reverse-mode
//! differentiation, and a seedable RNG.

mod matrix;
mod rng;
mod tape;

pub use matrix::{
    clip_global_norm, dropout, dropout_mask, global_norm, layer_norm, log_softmax_rows,
    multiply_count, reset_multiply_count, softmax_rows, xavier_init, Matrix,
};
pub use rng::Rng;
pub use tape::{NodeId, Tape};
