//! Shared fixtures for the benchmark targets.

use sanctc_core::numkit::{Matrix, Rng};
use sanctc_core::san::{
    AttentionScale, DownsampleMode, ModelConfig, PositionMode, SanCtcModel,
};

/// A small encoder whose cost is dominated by the attention sublayers.
pub fn bench_model(n_layers: usize, d_h: usize, n_hds: usize) -> SanCtcModel {
    let cfg = ModelConfig {
        n_layers,
        d_h,
        n_hds,
        d_k: d_h / n_hds,
        d_ff: 2 * d_h,
        downsample: DownsampleMode::Subsample,
        k: 1,
        position: PositionMode::Additive,
        dropout: 0.0,
        attention_scale: AttentionScale::HiddenDim,
        feat_dim: 13,
        alphabet_size: 6,
    };
    SanCtcModel::init(cfg, &mut Rng::new(7)).expect("valid config")
}

pub fn random_features(t: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    let mut m = Matrix::zeros(t, d);
    for v in m.data_mut() {
        *v = rng.uniform(-1.0, 1.0);
    }
    m
}

/// A normalized random log-prob grid for decoding benchmarks.
pub fn random_grid(t: usize, symbols: usize, seed: u64) -> sanctc_core::ctc::PosteriorGrid {
    let mut rng = Rng::new(seed);
    let mut m = Matrix::zeros(t, symbols);
    for v in m.data_mut() {
        *v = rng.uniform(-2.0, 2.0);
    }
    sanctc_core::ctc::PosteriorGrid::from_logits(&m).expect("finite logits")
}
