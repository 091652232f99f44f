//! The self-attention CTC network: fixed downsampling, embedding with
//! position information, a stack of post-LN self-attention layers, and a
//! framewise projection to logits over the blank-augmented alphabet.

mod checkpoint;
mod downsample;
mod forward;
mod model;
mod position;

pub use checkpoint::{checkpoint_bytes, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use downsample::{downsample, downsampled_len, reshape_reconstruct, DownsampleMode};
pub use forward::{AttentionRecord, ForwardOptions, TapedForward};
pub use model::{param_count, LayerParams, SanCtcModel};
pub use position::{position_encoding, position_encoding_matrix};

use crate::error::SanError;

/// Width of the trigonometric block in concatenative position mode.
pub const CONCAT_POSITION_DIM: usize = 40;

/// Layer-norm epsilon used throughout the encoder.
pub const LN_EPS: f64 = 1e-5;

/// How absolute position enters the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionMode {
    /// No position information at all.
    ContentOnly,
    /// Trigonometric encoding of width d_h added to the embedding.
    Additive,
    /// Trigonometric encoding of width 40 concatenated to a d_h - 40
    /// learned embedding.
    Concatenative,
}

impl PositionMode {
    pub fn name(&self) -> &'static str {
        match self {
            PositionMode::ContentOnly => "content_only",
            PositionMode::Additive => "additive",
            PositionMode::Concatenative => "concatenative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "content_only" => Some(PositionMode::ContentOnly),
            "additive" => Some(PositionMode::Additive),
            "concatenative" => Some(PositionMode::Concatenative),
            _ => None,
        }
    }
}

/// Divisor inside the attention softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttentionScale {
    /// sqrt(d_h), the default.
    #[default]
    HiddenDim,
    /// sqrt(d_k), selectable by flag.
    KeyDim,
}

impl AttentionScale {
    pub fn name(&self) -> &'static str {
        match self {
            AttentionScale::HiddenDim => "d_h",
            AttentionScale::KeyDim => "d_k",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "d_h" => Some(AttentionScale::HiddenDim),
            "d_k" => Some(AttentionScale::KeyDim),
            _ => None,
        }
    }
}

/// Complete architectural description of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_h: usize,
    pub n_hds: usize,
    pub d_k: usize,
    pub d_ff: usize,
    pub downsample: DownsampleMode,
    pub k: usize,
    pub position: PositionMode,
    pub dropout: f64,
    pub attention_scale: AttentionScale,
    /// Raw feature dimension before downsampling.
    pub feat_dim: usize,
    /// |L'|, including the blank.
    pub alphabet_size: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), SanError> {
        let fail = |what: String| Err(SanError::InvalidConfig { what });
        if self.d_h == 0 || self.n_hds == 0 || self.d_k == 0 || self.d_ff == 0 {
            return fail("d_h, n_hds, d_k, d_ff must be positive".into());
        }
        if !self.d_h.is_multiple_of(self.n_hds) {
            return fail(format!(
                "d_h = {} must be divisible by n_hds = {}",
                self.d_h, self.n_hds
            ));
        }
        if self.k < 1 {
            return fail("downsampling factor k must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.feat_dim == 0 {
            return fail("feat_dim must be positive".into());
        }
        if self.alphabet_size < 2 {
            return fail("alphabet_size must include blank plus at least one label".into());
        }
        match self.position {
            PositionMode::Additive if !self.d_h.is_multiple_of(2) => {
                fail(format!("additive position needs even d_h, got {}", self.d_h))
            }
            PositionMode::Concatenative if self.d_h <= CONCAT_POSITION_DIM => fail(format!(
                "concatenative position needs d_h > {CONCAT_POSITION_DIM}, got {}",
                self.d_h
            )),
            _ => Ok(()),
        }
    }

    /// Feature width after downsampling (reshape widens by k).
    pub fn downsampled_dim(&self) -> usize {
        match self.downsample {
            DownsampleMode::Reshape => self.feat_dim * self.k,
            _ => self.feat_dim,
        }
    }

    /// Output width of the learned part of the embedding.
    pub fn embed_out_dim(&self) -> usize {
        match self.position {
            PositionMode::Concatenative => self.d_h - CONCAT_POSITION_DIM,
            _ => self.d_h,
        }
    }

    /// Per-head value width d_h / n_hds.
    pub fn head_dim(&self) -> usize {
        self.d_h / self.n_hds
    }

    /// The divisor applied to attention logits.
    pub fn scale_divisor(&self) -> f64 {
        match self.attention_scale {
            AttentionScale::HiddenDim => (self.d_h as f64).sqrt(),
            AttentionScale::KeyDim => (self.d_k as f64).sqrt(),
        }
    }
}
