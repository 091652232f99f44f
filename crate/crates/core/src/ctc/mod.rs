//! Connectionist temporal classification: the collapse map, exact loss via
//! forward-backward dynamic programming, a brute-force enumeration
//! reference, greedy and prefix-beam decoding, and edit-distance scoring.

mod decode;
mod edit;
mod grid;
mod loss;

pub use decode::{greedy_decode, prefix_beam_decode, BeamHypothesis};
pub use edit::{edit_distance, error_rate, EditCounts};
pub use grid::{grid_file_text, load_grid_file, log_add, PosteriorGrid};
pub use loss::{
    adjacent_repeats, brute_force_prob, brute_force_total, collapse, ctc_loss, ctc_loss_full,
    grad_log_probs_to_logits, CtcLossResult,
};
