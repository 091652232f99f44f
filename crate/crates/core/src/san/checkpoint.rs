//! Checkpoint serialization.
//!
//! Layout: the magic line `SANCTC1\n`, a `key=value` config block terminated
//! by a blank line, then each tensor in canonical name order as a text
//! header `name rows cols\n` followed by rows*cols little-endian IEEE f64
//! values. The alphabet rides in the config block as space-separated L
//! symbols (blank excluded, implied at id 0).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::model::SanCtcModel;
use super::{AttentionScale, DownsampleMode, ModelConfig, PositionMode};
use crate::error::SanError;
use crate::featio::{DeltaMode, FeaturePipeline};
use crate::labels::{Alphabet, TokenizerKind};
use crate::numkit::Matrix;

pub const CHECKPOINT_MAGIC: &str = "SANCTC1\n";

/// A model together with everything needed to run it on new data: the
/// alphabet its output columns index, the labeling regime, and the feature
/// preprocessing it was trained with.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: SanCtcModel,
    pub alphabet: Alphabet,
    pub tokenizer_kind: TokenizerKind,
    pub pipeline: FeaturePipeline,
}

fn cerr(path: &Path, what: impl Into<String>) -> SanError {
    SanError::Checkpoint {
        path: path.display().to_string(),
        what: what.into(),
    }
}

/// Serializes to bytes; [`save_checkpoint`] writes them atomically.
pub fn checkpoint_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let cfg = &ckpt.model.config;
    let mut header = String::from(CHECKPOINT_MAGIC);
    let _ = writeln!(header, "n_layers={}", cfg.n_layers);
    let _ = writeln!(header, "d_h={}", cfg.d_h);
    let _ = writeln!(header, "n_hds={}", cfg.n_hds);
    let _ = writeln!(header, "d_k={}", cfg.d_k);
    let _ = writeln!(header, "d_ff={}", cfg.d_ff);
    let _ = writeln!(header, "downsample={}", cfg.downsample.name());
    let _ = writeln!(header, "k={}", cfg.k);
    let _ = writeln!(header, "position={}", cfg.position.name());
    let _ = writeln!(header, "dropout={}", cfg.dropout);
    let _ = writeln!(header, "attention_scale={}", cfg.attention_scale.name());
    let _ = writeln!(header, "feat_dim={}", cfg.feat_dim);
    let _ = writeln!(header, "tokenizer={}", ckpt.tokenizer_kind.name());
    let _ = writeln!(header, "cmvn={}", ckpt.pipeline.cmvn);
    let _ = writeln!(header, "deltas={}", ckpt.pipeline.deltas.name());
    let _ = writeln!(header, "alphabet={}", ckpt.alphabet.symbols().join(" "));
    header.push('\n');

    let mut bytes = header.into_bytes();
    let names = SanCtcModel::parameter_names(cfg);
    for (name, tensor) in names.iter().zip(ckpt.model.parameters()) {
        bytes.extend_from_slice(format!("{name} {} {}\n", tensor.rows(), tensor.cols()).as_bytes());
        for &v in tensor.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), SanError> {
    let bytes = checkpoint_bytes(ckpt);
    crate::featio::write_atomic(path, &bytes).map_err(|e| SanError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, SanError> {
    let bytes = std::fs::read(path).map_err(|e| SanError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_checkpoint(&bytes, path)
}

fn read_line<'a>(bytes: &'a [u8], pos: &mut usize, path: &Path) -> Result<&'a str, SanError> {
    let start = *pos;
    let end = bytes[start..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|i| start + i)
        .ok_or_else(|| cerr(path, "unexpected end of file in text section"))?;
    *pos = end + 1;
    std::str::from_utf8(&bytes[start..end]).map_err(|_| cerr(path, "non-UTF-8 text section"))
}

fn parse_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint, SanError> {
    if !bytes.starts_with(CHECKPOINT_MAGIC.as_bytes()) {
        return Err(cerr(path, "bad magic; not a checkpoint file"));
    }
    let mut pos = CHECKPOINT_MAGIC.len();

    let mut kv: HashMap<String, String> = HashMap::new();
    loop {
        let line = read_line(bytes, &mut pos, path)?;
        if line.is_empty() {
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| cerr(path, format!("malformed config line {line:?}")))?;
        kv.insert(key.to_string(), value.to_string());
    }

    let get = |key: &str| -> Result<&String, SanError> {
        kv.get(key)
            .ok_or_else(|| cerr(path, format!("missing config key {key:?}")))
    };
    let get_usize = |key: &str| -> Result<usize, SanError> {
        get(key)?
            .parse()
            .map_err(|_| cerr(path, format!("config key {key:?} is not an integer")))
    };

    let symbols: Vec<String> = get("alphabet")?
        .split_whitespace()
        .map(str::to_string)
        .collect();
    let alphabet = Alphabet::new(symbols)
        .map_err(|e| cerr(path, format!("bad alphabet: {e}")))?;
    let tokenizer_kind = TokenizerKind::parse(get("tokenizer")?)
        .ok_or_else(|| cerr(path, "unknown tokenizer kind"))?;
    let pipeline = FeaturePipeline {
        cmvn: match get("cmvn")?.as_str() {
            "true" => true,
            "false" => false,
            _ => return Err(cerr(path, "cmvn must be true or false")),
        },
        deltas: DeltaMode::parse(get("deltas")?)
            .ok_or_else(|| cerr(path, "unknown delta mode"))?,
    };

    let config = ModelConfig {
        n_layers: get_usize("n_layers")?,
        d_h: get_usize("d_h")?,
        n_hds: get_usize("n_hds")?,
        d_k: get_usize("d_k")?,
        d_ff: get_usize("d_ff")?,
        downsample: DownsampleMode::parse(get("downsample")?)
            .ok_or_else(|| cerr(path, "unknown downsample mode"))?,
        k: get_usize("k")?,
        position: PositionMode::parse(get("position")?)
            .ok_or_else(|| cerr(path, "unknown position mode"))?,
        dropout: get("dropout")?
            .parse()
            .map_err(|_| cerr(path, "dropout is not a number"))?,
        attention_scale: AttentionScale::parse(get("attention_scale")?)
            .ok_or_else(|| cerr(path, "unknown attention scale"))?,
        feat_dim: get_usize("feat_dim")?,
        alphabet_size: alphabet.augmented_size(),
    };
    config.validate()?;

    let names = SanCtcModel::parameter_names(&config);
    let mut tensors = Vec::with_capacity(names.len());
    for name in &names {
        let line = read_line(bytes, &mut pos, path)?;
        let mut parts = line.split(' ');
        let got_name = parts.next().unwrap_or_default();
        if got_name != name {
            return Err(cerr(
                path,
                format!("expected tensor {name:?}, found {got_name:?}"),
            ));
        }
        let rows: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| cerr(path, format!("bad shape for tensor {name:?}")))?;
        let cols: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| cerr(path, format!("bad shape for tensor {name:?}")))?;
        let count = rows * cols;
        let need = count * 8;
        if pos + need > bytes.len() {
            return Err(cerr(path, format!("truncated data for tensor {name:?}")));
        }
        let mut data = Vec::with_capacity(count);
        for chunk in bytes[pos..pos + need].chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().expect("chunk of 8")));
        }
        pos += need;
        tensors.push(Matrix::from_vec(rows, cols, data));
    }
    if pos != bytes.len() {
        return Err(cerr(path, "trailing bytes after final tensor"));
    }

    let model = model_from_tensors(config, tensors, path)?;
    Ok(Checkpoint {
        model,
        alphabet,
        tokenizer_kind,
        pipeline,
    })
}

fn model_from_tensors(
    config: ModelConfig,
    tensors: Vec<Matrix>,
    path: &Path,
) -> Result<SanCtcModel, SanError> {
    let mut it = tensors.into_iter();
    let mut take = |want: (usize, usize), name: &str| -> Result<Matrix, SanError> {
        let m = it.next().ok_or_else(|| cerr(path, "missing tensor"))?;
        if m.shape() != want {
            return Err(cerr(
                path,
                format!(
                    "tensor {name} has shape {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    want.0,
                    want.1
                ),
            ));
        }
        Ok(m)
    };

    let in_dim = config.downsampled_dim();
    let e_out = config.embed_out_dim();
    let d_h = config.d_h;
    let embed_w = take((in_dim, e_out), "embed.w")?;
    let embed_b = take((1, e_out), "embed.b")?;
    let mut layers = Vec::with_capacity(config.n_layers);
    for _ in 0..config.n_layers {
        let mut heads = Vec::with_capacity(config.n_hds);
        for _ in 0..config.n_hds {
            heads.push(super::model::HeadParams {
                wq: take((d_h, config.d_k), "wq")?,
                wk: take((d_h, config.d_k), "wk")?,
                wv: take((d_h, config.head_dim()), "wv")?,
            });
        }
        layers.push(super::model::LayerParams {
            heads,
            ln1_gain: take((1, d_h), "ln1.gain")?,
            ln1_bias: take((1, d_h), "ln1.bias")?,
            ffn_w1: take((d_h, config.d_ff), "ffn.w1")?,
            ffn_b1: take((1, config.d_ff), "ffn.b1")?,
            ffn_w2: take((config.d_ff, d_h), "ffn.w2")?,
            ffn_b2: take((1, d_h), "ffn.b2")?,
            ln2_gain: take((1, d_h), "ln2.gain")?,
            ln2_bias: take((1, d_h), "ln2.bias")?,
        });
    }
    let proj_w = take((d_h, config.alphabet_size), "proj.w")?;
    let proj_b = take((1, config.alphabet_size), "proj.b")?;

    Ok(SanCtcModel {
        config,
        embed_w,
        embed_b,
        layers,
        proj_w,
        proj_b,
    })
}
