//! The taped forward pass: downsample, embed (with position), n self-attention
//! layers, framewise projection to logits.
//!
//! Each layer is two post-LN sublayers:
//!   mid = LN(MultiHeadAttention(H) + H)
//!   out = LN(FFN(mid) + mid),    FFN(x) = ReLU(x W1 + b1) W2 + b2
//! with one attention head computing softmax(Q K^T / divisor) V. Heads are
//! concatenated along the value axis and fed straight into the residual sum;
//! there is no extra output projection after concatenation.
//!
//! Dropout (training mode only) is applied to the embedding output, to the
//! attention weights, and to each sublayer output before its residual
//! addition.

use super::downsample::downsample;
use super::model::SanCtcModel;
use super::position::position_encoding_matrix;
use super::{PositionMode, LN_EPS};
use crate::error::SanError;
use crate::numkit::{Matrix, NodeId, Rng, Tape};

/// Post-softmax attention weights captured during a forward pass,
/// indexed `[layer][head]`, each T' x T'.
#[derive(Debug, Clone)]
pub struct AttentionRecord {
    pub weights: Vec<Vec<Matrix>>,
}

impl AttentionRecord {
    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_heads(&self) -> usize {
        self.weights.first().map_or(0, |l| l.len())
    }

    pub fn get(&self, layer: usize, head: usize) -> &Matrix {
        &self.weights[layer][head]
    }
}

/// Forward-pass switches. `rng` drives dropout mask sampling and is only
/// consulted in training mode.
pub struct ForwardOptions {
    pub training: bool,
    pub capture_attention: bool,
    pub rng: Rng,
}

impl ForwardOptions {
    pub fn eval() -> Self {
        ForwardOptions {
            training: false,
            capture_attention: false,
            rng: Rng::new(0),
        }
    }

    pub fn train(rng: Rng) -> Self {
        ForwardOptions {
            training: true,
            capture_attention: false,
            rng,
        }
    }
}

/// Handles into the tape after a forward pass.
pub struct TapedForward {
    /// T' x |L'| unnormalized logits.
    pub logits: NodeId,
    /// Parameter leaves, aligned with [`SanCtcModel::parameters`].
    pub params: Vec<NodeId>,
    pub attention: Option<AttentionRecord>,
}

impl SanCtcModel {
    /// Records the full forward computation onto `tape`.
    pub fn forward_taped(
        &self,
        tape: &mut Tape,
        features: &Matrix,
        opts: &mut ForwardOptions,
    ) -> Result<TapedForward, SanError> {
        let cfg = &self.config;
        if features.cols() != cfg.feat_dim {
            return Err(SanError::FeatureDimMismatch {
                got: features.cols(),
                want: cfg.feat_dim,
            });
        }

        let x_down = downsample(features, cfg.downsample, cfg.k);
        let t_prime = x_down.rows();
        let rate = cfg.dropout;
        let training = opts.training;

        // register parameters in canonical order
        let params: Vec<NodeId> = self
            .parameters()
            .into_iter()
            .map(|m| tape.leaf(m.clone()))
            .collect();
        let mut next = params.iter().copied();
        let embed_w = next.next().expect("embed.w");
        let embed_b = next.next().expect("embed.b");

        // embedding with position information
        let x = tape.leaf(x_down);
        let affine = tape.matmul(x, embed_w)?;
        let embedded = tape.add_row_broadcast(affine, embed_b)?;
        let mut h = match cfg.position {
            PositionMode::ContentOnly => embedded,
            PositionMode::Additive => {
                let pe = tape.leaf(position_encoding_matrix(t_prime, cfg.d_h));
                tape.add(embedded, pe)?
            }
            PositionMode::Concatenative => {
                let pe = tape.leaf(position_encoding_matrix(
                    t_prime,
                    super::CONCAT_POSITION_DIM,
                ));
                tape.concat_cols(&[embedded, pe])?
            }
        };
        h = tape.dropout(h, rate, &mut opts.rng, training)?;

        let divisor = cfg.scale_divisor();
        let mut attention = opts
            .capture_attention
            .then(|| AttentionRecord { weights: Vec::new() });

        for _layer in 0..cfg.n_layers {
            let mut head_outputs = Vec::with_capacity(cfg.n_hds);
            let mut layer_weights = Vec::with_capacity(cfg.n_hds);
            for _head in 0..cfg.n_hds {
                let wq = next.next().expect("head wq");
                let wk = next.next().expect("head wk");
                let wv = next.next().expect("head wv");
                let q = tape.matmul(h, wq)?;
                let k = tape.matmul(h, wk)?;
                let scores = tape.matmul_transpose_b(q, k)?;
                let scaled = tape.scale(scores, 1.0 / divisor);
                let weights = tape.softmax_rows(scaled)?;
                if attention.is_some() {
                    layer_weights.push(tape.value(weights).clone());
                }
                let weights = tape.dropout(weights, rate, &mut opts.rng, training)?;
                let v = tape.matmul(h, wv)?;
                head_outputs.push(tape.matmul(weights, v)?);
            }
            if let Some(record) = attention.as_mut() {
                record.weights.push(layer_weights);
            }
            let concat = tape.concat_cols(&head_outputs)?;

            let ln1_gain = next.next().expect("ln1.gain");
            let ln1_bias = next.next().expect("ln1.bias");
            let dropped = tape.dropout(concat, rate, &mut opts.rng, training)?;
            let residual = tape.add(dropped, h)?;
            let mid = tape.layer_norm(residual, ln1_gain, ln1_bias, LN_EPS)?;

            let ffn_w1 = next.next().expect("ffn.w1");
            let ffn_b1 = next.next().expect("ffn.b1");
            let ffn_w2 = next.next().expect("ffn.w2");
            let ffn_b2 = next.next().expect("ffn.b2");
            let inner = tape.matmul(mid, ffn_w1)?;
            let inner = tape.add_row_broadcast(inner, ffn_b1)?;
            let inner = tape.relu(inner);
            let outer = tape.matmul(inner, ffn_w2)?;
            let ffn = tape.add_row_broadcast(outer, ffn_b2)?;

            let ln2_gain = next.next().expect("ln2.gain");
            let ln2_bias = next.next().expect("ln2.bias");
            let dropped = tape.dropout(ffn, rate, &mut opts.rng, training)?;
            let residual = tape.add(dropped, mid)?;
            h = tape.layer_norm(residual, ln2_gain, ln2_bias, LN_EPS)?;
        }

        let proj_w = next.next().expect("proj.w");
        let proj_b = next.next().expect("proj.b");
        let projected = tape.matmul(h, proj_w)?;
        let logits = tape.add_row_broadcast(projected, proj_b)?;
        debug_assert!(next.next().is_none(), "all parameters consumed");

        Ok(TapedForward {
            logits,
            params,
            attention,
        })
    }

    /// Eval-mode logits (no dropout, no gradients kept).
    pub fn forward(&self, features: &Matrix) -> Result<Matrix, SanError> {
        let mut tape = Tape::new();
        let mut opts = ForwardOptions::eval();
        let fwd = self.forward_taped(&mut tape, features, &mut opts)?;
        Ok(tape.value(fwd.logits).clone())
    }

    /// Eval-mode logits plus captured attention weights.
    pub fn forward_with_attention(
        &self,
        features: &Matrix,
    ) -> Result<(Matrix, AttentionRecord), SanError> {
        let mut tape = Tape::new();
        let mut opts = ForwardOptions::eval();
        opts.capture_attention = true;
        let fwd = self.forward_taped(&mut tape, features, &mut opts)?;
        let record = fwd.attention.expect("attention capture was requested");
        Ok((tape.value(fwd.logits).clone(), record))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::san::model::tiny_config;
    use crate::san::{AttentionScale, DownsampleMode, ModelConfig, PositionMode};

    fn random_features(t: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        let mut m = Matrix::zeros(t, d);
        for v in m.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        m
    }

    #[test]
    fn three_frames_k3_give_one_output_frame() {
        let mut cfg = tiny_config();
        cfg.k = 3;
        let model = SanCtcModel::init(cfg, &mut Rng::new(3)).unwrap();
        let x = random_features(3, 6, 1);
        let logits = model.forward(&x).unwrap();
        assert_eq!(logits.rows(), 1);
        assert_eq!(logits.cols(), 4);
    }

    #[test]
    fn forward_is_deterministic() {
        let model = SanCtcModel::init(tiny_config(), &mut Rng::new(5)).unwrap();
        let x = random_features(9, 6, 2);
        let a = model.forward(&x).unwrap();
        let b = model.forward(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn feature_dim_mismatch_is_an_error() {
        let model = SanCtcModel::init(tiny_config(), &mut Rng::new(5)).unwrap();
        let x = random_features(4, 5, 3);
        assert!(matches!(
            model.forward(&x),
            Err(SanError::FeatureDimMismatch { got: 5, want: 6 })
        ));
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let model = SanCtcModel::init(tiny_config(), &mut Rng::new(7)).unwrap();
        let x = random_features(10, 6, 4);
        let (_, record) = model.forward_with_attention(&x).unwrap();
        assert_eq!(record.n_layers(), 2);
        assert_eq!(record.n_heads(), 2);
        for layer in 0..2 {
            for head in 0..2 {
                let w = record.get(layer, head);
                assert_eq!(w.shape(), (10, 10));
                for r in 0..w.rows() {
                    let sum: f64 = w.row(r).iter().sum();
                    assert!((sum - 1.0).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn single_frame_attention_is_one() {
        let mut cfg = tiny_config();
        cfg.k = 4;
        let model = SanCtcModel::init(cfg, &mut Rng::new(8)).unwrap();
        let x = random_features(4, 6, 5);
        let (_, record) = model.forward_with_attention(&x).unwrap();
        for layer in &record.weights {
            for head in layer {
                assert_eq!(head.shape(), (1, 1));
                assert!((head.get(0, 0) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identical_input_rows_give_identical_attention_rows() {
        let mut cfg = tiny_config();
        cfg.position = PositionMode::ContentOnly;
        let model = SanCtcModel::init(cfg, &mut Rng::new(9)).unwrap();
        let row: Vec<f64> = (0..6).map(|i| 0.3 * i as f64 - 0.7).collect();
        let x = Matrix::from_rows(&[row.clone(), row.clone(), row]);
        let (_, record) = model.forward_with_attention(&x).unwrap();
        let w = record.get(0, 0);
        for r in 1..w.rows() {
            for c in 0..w.cols() {
                assert!((w.get(r, c) - w.get(0, c)).abs() < 1e-12);
            }
        }
        // uniform over identical keys
        for c in 0..w.cols() {
            assert!((w.get(0, c) - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zeroed_attention_and_ffn_reduce_to_double_layer_norm() {
        let mut cfg = tiny_config();
        cfg.n_layers = 1;
        cfg.position = PositionMode::ContentOnly;
        let mut model = SanCtcModel::init(cfg, &mut Rng::new(10)).unwrap();
        // zero value projections kill the attention output; zero FFN weights
        // kill the second sublayer's contribution
        for head in &mut model.layers[0].heads {
            head.wv = Matrix::zeros(16, 8);
        }
        model.layers[0].ffn_w1 = Matrix::zeros(16, 32);
        model.layers[0].ffn_w2 = Matrix::zeros(32, 16);
        // identity embedding: d_in == d_h with unit diagonal
        let mut cfg2 = model.config.clone();
        cfg2.feat_dim = 16;
        let mut model = SanCtcModel {
            config: cfg2,
            embed_w: Matrix::identity(16),
            ..model
        };
        let mut proj_w = Matrix::zeros(16, 4);
        for i in 0..4 {
            proj_w.set(i, i, 1.0);
        }
        model.proj_w = proj_w;

        let x = random_features(5, 16, 11);
        let logits = model.forward(&x).unwrap();

        let gain = Matrix::filled(1, 16, 1.0);
        let bias = Matrix::zeros(1, 16);
        let ln = crate::numkit::layer_norm(&x, &gain, &bias, LN_EPS).unwrap();
        let ln2 = crate::numkit::layer_norm(&ln, &gain, &bias, LN_EPS).unwrap();
        for r in 0..5 {
            for c in 0..4 {
                assert!(
                    (logits.get(r, c) - ln2.get(r, c)).abs() < 1e-12,
                    "({r},{c})"
                );
            }
        }
    }

    #[test]
    fn embedding_stage_observable_through_zero_layer_model() {
        // with no layers and an identity-like projection, the logits ARE the
        // embedding output
        let mut cfg = tiny_config();
        cfg.n_layers = 0;
        cfg.d_h = 4;
        cfg.n_hds = 1;
        cfg.d_k = 4;
        cfg.feat_dim = 3;
        cfg.alphabet_size = 4;
        cfg.position = PositionMode::ContentOnly;
        let mut model = SanCtcModel::init(cfg.clone(), &mut Rng::new(13)).unwrap();
        model.embed_w = Matrix::zeros(3, 4);
        model.embed_b = Matrix::zeros(1, 4);
        model.proj_w = Matrix::identity(4);
        model.proj_b = Matrix::zeros(1, 4);

        let x = random_features(5, 3, 12);
        // content-only with zero weights and bias: all-zero embedding
        let logits = model.forward(&x).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));

        // additive with a zero affine map: rows equal the position encoding
        let mut cfg2 = cfg;
        cfg2.position = PositionMode::Additive;
        let model = SanCtcModel {
            config: cfg2,
            ..model
        };
        let logits = model.forward(&x).unwrap();
        for t in 0..5 {
            let pe = crate::san::position_encoding(t, 4);
            for (c, &expected) in pe.iter().enumerate() {
                assert_eq!(logits.get(t, c), expected, "row {t} col {c}");
            }
        }
    }

    #[test]
    fn permutation_equivariance_content_only() {
        let cfg = ModelConfig {
            n_layers: 2,
            d_h: 16,
            n_hds: 2,
            d_k: 8,
            d_ff: 32,
            downsample: DownsampleMode::Subsample,
            k: 1,
            position: PositionMode::ContentOnly,
            dropout: 0.2, // eval mode ignores it
            attention_scale: AttentionScale::HiddenDim,
            feat_dim: 6,
            alphabet_size: 4,
        };
        let model = SanCtcModel::init(cfg, &mut Rng::new(12)).unwrap();
        let x = random_features(8, 6, 6);
        let base = model.forward(&x).unwrap();

        let mut rng = Rng::new(99);
        let mut perm: Vec<usize> = (0..8).collect();
        rng.shuffle(&mut perm);
        let permuted_rows: Vec<Vec<f64>> = perm.iter().map(|&p| x.row(p).to_vec()).collect();
        let permuted = Matrix::from_rows(&permuted_rows);
        let out = model.forward(&permuted).unwrap();

        for (i, &p) in perm.iter().enumerate() {
            for c in 0..base.cols() {
                assert!(
                    (out.get(i, c) - base.get(p, c)).abs() <= 1e-10,
                    "row {i} col {c}"
                );
            }
        }
    }

    #[test]
    fn training_dropout_changes_output_and_is_seed_stable() {
        let mut cfg = tiny_config();
        cfg.dropout = 0.3;
        let model = SanCtcModel::init(cfg, &mut Rng::new(14)).unwrap();
        let x = random_features(6, 6, 7);
        let run = |seed: u64| {
            let mut tape = Tape::new();
            let mut opts = ForwardOptions::train(Rng::new(seed));
            let fwd = model.forward_taped(&mut tape, &x, &mut opts).unwrap();
            tape.value(fwd.logits).clone()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
        assert_ne!(run(42), model.forward(&x).unwrap());
    }
}
