//! Model parameters and their canonical ordering.

use super::ModelConfig;
use crate::error::SanError;
use crate::numkit::{xavier_init, Matrix, Rng};

/// Per-head projections. Queries and keys share the d_k width; values are
/// d_h / n_hds wide so concatenated heads restore d_h.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub heads: Vec<HeadParams>,
    pub ln1_gain: Matrix,
    pub ln1_bias: Matrix,
    pub ffn_w1: Matrix,
    pub ffn_b1: Matrix,
    pub ffn_w2: Matrix,
    pub ffn_b2: Matrix,
    pub ln2_gain: Matrix,
    pub ln2_bias: Matrix,
}

/// All learned tensors of the encoder, plus its architectural config.
#[derive(Debug, Clone, PartialEq)]
pub struct SanCtcModel {
    pub config: ModelConfig,
    pub embed_w: Matrix,
    pub embed_b: Matrix,
    pub layers: Vec<LayerParams>,
    pub proj_w: Matrix,
    pub proj_b: Matrix,
}

impl SanCtcModel {
    /// Fresh model: Xavier-uniform weights, zero biases, unit layer-norm
    /// gains.
    pub fn init(config: ModelConfig, rng: &mut Rng) -> Result<Self, SanError> {
        config.validate()?;
        let in_dim = config.downsampled_dim();
        let e_out = config.embed_out_dim();
        let d_h = config.d_h;
        let d_k = config.d_k;
        let d_v = config.head_dim();
        let d_ff = config.d_ff;

        let embed_w = xavier_init(in_dim, e_out, rng);
        let embed_b = Matrix::zeros(1, e_out);
        let mut layers = Vec::with_capacity(config.n_layers);
        for _ in 0..config.n_layers {
            let heads = (0..config.n_hds)
                .map(|_| HeadParams {
                    wq: xavier_init(d_h, d_k, rng),
                    wk: xavier_init(d_h, d_k, rng),
                    wv: xavier_init(d_h, d_v, rng),
                })
                .collect();
            layers.push(LayerParams {
                heads,
                ln1_gain: Matrix::filled(1, d_h, 1.0),
                ln1_bias: Matrix::zeros(1, d_h),
                ffn_w1: xavier_init(d_h, d_ff, rng),
                ffn_b1: Matrix::zeros(1, d_ff),
                ffn_w2: xavier_init(d_ff, d_h, rng),
                ffn_b2: Matrix::zeros(1, d_h),
                ln2_gain: Matrix::filled(1, d_h, 1.0),
                ln2_bias: Matrix::zeros(1, d_h),
            });
        }
        let proj_w = xavier_init(d_h, config.alphabet_size, rng);
        let proj_b = Matrix::zeros(1, config.alphabet_size);

        Ok(SanCtcModel {
            config,
            embed_w,
            embed_b,
            layers,
            proj_w,
            proj_b,
        })
    }

    /// Tensor names in canonical (checkpoint) order.
    pub fn parameter_names(config: &ModelConfig) -> Vec<String> {
        let mut names = vec!["embed.w".to_string(), "embed.b".to_string()];
        for i in 0..config.n_layers {
            for j in 0..config.n_hds {
                names.push(format!("layer{i}.head{j}.wq"));
                names.push(format!("layer{i}.head{j}.wk"));
                names.push(format!("layer{i}.head{j}.wv"));
            }
            names.push(format!("layer{i}.ln1.gain"));
            names.push(format!("layer{i}.ln1.bias"));
            names.push(format!("layer{i}.ffn.w1"));
            names.push(format!("layer{i}.ffn.b1"));
            names.push(format!("layer{i}.ffn.w2"));
            names.push(format!("layer{i}.ffn.b2"));
            names.push(format!("layer{i}.ln2.gain"));
            names.push(format!("layer{i}.ln2.bias"));
        }
        names.push("proj.w".to_string());
        names.push("proj.b".to_string());
        names
    }

    /// All tensors in canonical order.
    pub fn parameters(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = vec![&self.embed_w, &self.embed_b];
        for layer in &self.layers {
            for h in &layer.heads {
                v.push(&h.wq);
                v.push(&h.wk);
                v.push(&h.wv);
            }
            v.push(&layer.ln1_gain);
            v.push(&layer.ln1_bias);
            v.push(&layer.ffn_w1);
            v.push(&layer.ffn_b1);
            v.push(&layer.ffn_w2);
            v.push(&layer.ffn_b2);
            v.push(&layer.ln2_gain);
            v.push(&layer.ln2_bias);
        }
        v.push(&self.proj_w);
        v.push(&self.proj_b);
        v
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = vec![&mut self.embed_w, &mut self.embed_b];
        for layer in &mut self.layers {
            let LayerParams {
                heads,
                ln1_gain,
                ln1_bias,
                ffn_w1,
                ffn_b1,
                ffn_w2,
                ffn_b2,
                ln2_gain,
                ln2_bias,
            } = layer;
            for h in heads {
                let HeadParams { wq, wk, wv } = h;
                v.push(wq);
                v.push(wk);
                v.push(wv);
            }
            v.push(ln1_gain);
            v.push(ln1_bias);
            v.push(ffn_w1);
            v.push(ffn_b1);
            v.push(ffn_w2);
            v.push(ffn_b2);
            v.push(ln2_gain);
            v.push(ln2_bias);
        }
        v.push(&mut self.proj_w);
        v.push(&mut self.proj_b);
        v
    }

    /// Total learned scalar count, by summing tensor shapes.
    pub fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|m| m.rows() * m.cols()).sum()
    }
}

/// Closed-form parameter count for a config, without building the model.
pub fn param_count(config: &ModelConfig) -> usize {
    let in_dim = config.downsampled_dim();
    let e_out = config.embed_out_dim();
    let d_h = config.d_h;
    let embed = in_dim * e_out + e_out;
    let heads_per_layer = config.n_hds * (2 * d_h * config.d_k) + d_h * d_h;
    let ffn = d_h * config.d_ff + config.d_ff + config.d_ff * d_h + d_h;
    let norms = 4 * d_h;
    let proj = d_h * config.alphabet_size + config.alphabet_size;
    embed + config.n_layers * (heads_per_layer + ffn + norms) + proj
}

/// 2 layers, d_h 16, 2 heads, d_ff 32 over 6-dim features: the smallest
/// config exercising every code path in tests.
#[cfg(test)]
pub(crate) fn tiny_config() -> ModelConfig {
    use crate::san::{AttentionScale, DownsampleMode, PositionMode};
    ModelConfig {
        n_layers: 2,
        d_h: 16,
        n_hds: 2,
        d_k: 8,
        d_ff: 32,
        downsample: DownsampleMode::Reshape,
        k: 1,
        position: PositionMode::Additive,
        dropout: 0.0,
        attention_scale: AttentionScale::HiddenDim,
        feat_dim: 6,
        alphabet_size: 4,
    }
}
