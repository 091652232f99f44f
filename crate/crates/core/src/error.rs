//! Error types shared across the crate, one enum per subsystem.

use thiserror::Error;

/// Errors from the numeric core.
#[derive(Debug, Error)]
pub enum NumError {
    #[error("{op}: incompatible shapes {}x{} and {}x{}", left.0, left.1, right.0, right.1)]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: non-finite input")]
    NonFinite { op: &'static str },
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },
}

/// Errors from feature and manifest I/O.
#[derive(Debug, Error)]
pub enum FeatError {
    #[error("{path}:{line}: {what}")]
    Parse {
        path: String,
        line: usize,
        what: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Errors from alphabets, tokenizers, and BPE.
#[derive(Debug, Error)]
pub enum LabelError {
    #[error("invalid alphabet: {what}")]
    InvalidAlphabet { what: String },
    #[error("character {ch:?} at position {pos} is not in the alphabet")]
    UnknownChar { ch: String, pos: usize },
    #[error("word {word:?} is not in the lexicon")]
    UnknownWord { word: String },
    #[error("unknown label id {id}")]
    UnknownId { id: usize },
    #[error("{path}:{line}: {what}")]
    Parse {
        path: String,
        line: usize,
        what: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Errors from the CTC loss, decoders, and scoring.
#[derive(Debug, Error)]
pub enum CtcError {
    #[error("target of length {target_len} (plus {repeats} repeat separators) is unreachable in {frames} frames")]
    UnreachableTarget {
        frames: usize,
        target_len: usize,
        repeats: usize,
    },
    #[error("target contains the blank id at position {pos}")]
    BlankInTarget { pos: usize },
    #[error("label id {id} out of range for alphabet of size {size}")]
    LabelOutOfRange { id: usize, size: usize },
    #[error("enumeration guard exceeded: {what}")]
    CapacityExceeded { what: String },
    #[error("invalid posterior grid: {what}")]
    InvalidGrid { what: String },
    #[error("beam width must be >= 1")]
    ZeroBeamWidth,
    #[error("error rate undefined: empty reference corpus")]
    EmptyReference,
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Errors from model construction, forward passes, and checkpoints.
#[derive(Debug, Error)]
pub enum SanError {
    #[error("invalid model config: {what}")]
    InvalidConfig { what: String },
    #[error("input has {got} feature columns, model expects {want}")]
    FeatureDimMismatch { got: usize, want: usize },
    #[error("empty input sequence")]
    EmptyInput,
    #[error("checkpoint {path}: {what}")]
    Checkpoint { path: String, what: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Errors from the training loop and its configuration.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config {path}:{line}: {what}")]
    Config {
        path: String,
        line: usize,
        what: String,
    },
    #[error("corpus is empty after length/reachability filtering")]
    EmptyCorpus,
    #[error("non-finite loss at epoch {epoch}, batch {batch}, step {step} (utterance {utt_id})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        step: usize,
        utt_id: String,
    },
    #[error("learning-rate schedule: step numbers are 1-based, got 0")]
    ZeroStep,
    #[error("{what}")]
    Invalid { what: String },
    #[error(transparent)]
    Feat(#[from] FeatError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Ctc(#[from] CtcError),
    #[error(transparent)]
    San(#[from] SanError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
