//! The optimization recipe: staged warmup/decay schedule, Nesterov
//! momentum, label smoothing, length-filtered batching, the training loop,
//! and a synthetic corpus generator for desk-scale experiments.

mod batching;
mod config;
mod optimizer;
mod schedule;
mod smoothing;
mod synth;
mod train;

pub use batching::{make_batches, prepare_corpus, CorpusItem, FilterStats};
pub use config::{
    load_experiment_config, parse_experiment_config, ExperimentConfig, ModelSpec, TokenizerChoice,
    TrainConfig,
};
pub use optimizer::{nesterov_step, zero_velocity};
pub use schedule::{stage_for_epoch, total_epochs, LrSchedule, StageDecay};
pub use smoothing::{smoothed_loss, SmoothedLossResult};
pub use synth::{
    prototype, synth_corpus, synth_corpus_with_noise, write_corpus, SynthUtterance,
    SYNTH_FEAT_DIM, SYNTH_NOISE_SIGMA,
};
pub use train::{dev_error_rate, epoch_log_text, train, EpochLog, TrainReport};
