//! Training configuration and the experiment config file.
//!
//! The file is `key = value` lines (`#` comments allowed); unknown keys are
//! errors so typos surface immediately. Architectural keys describe the
//! model; the remaining keys drive the optimizer, batching, and features.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::schedule::StageDecay;
use crate::error::TrainError;
use crate::featio::{DeltaMode, FeaturePipeline};
use crate::san::{AttentionScale, DownsampleMode, ModelConfig, PositionMode};

/// Optimization hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_frames: usize,
    pub lambda: f64,
    pub n_warmup: usize,
    pub momentum: f64,
    pub clip_norm: f64,
    pub label_smoothing: f64,
    pub stage_switch_epoch: usize,
    pub stage_length_epochs: usize,
    pub n_stages: usize,
    pub stage_decay: StageDecay,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 20,
            max_frames: 1800,
            lambda: 400.0,
            n_warmup: 8000,
            momentum: 0.9,
            clip_norm: 1.0,
            label_smoothing: 0.0,
            stage_switch_epoch: 40,
            stage_length_epochs: 20,
            n_stages: 2,
            stage_decay: StageDecay::Continue,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |what: &str| {
            Err(TrainError::Invalid {
                what: what.to_string(),
            })
        };
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1");
        }
        if self.n_warmup == 0 {
            return fail("n_warmup must be >= 1");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return fail("label_smoothing must be in [0, 1)");
        }
        if self.clip_norm <= 0.0 {
            return fail("clip_norm must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must be in [0, 1)");
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        super::schedule::total_epochs(
            self.stage_switch_epoch,
            self.stage_length_epochs,
            self.n_stages,
        )
    }
}

/// Which tokenizer the experiment uses; paths resolve relative to the
/// config file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TokenizerChoice {
    #[default]
    Char,
    Bpe { model_path: PathBuf },
    Phoneme { lexicon_path: PathBuf },
}

/// Architecture knobs as written in the config file (data-dependent fields
/// of [`ModelConfig`] are filled in later).
#[derive(Debug, Clone)]
pub struct ModelSpec {
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
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            n_layers: 10,
            d_h: 512,
            n_hds: 8,
            d_k: 64,
            d_ff: 2048,
            downsample: DownsampleMode::Reshape,
            k: 3,
            position: PositionMode::Additive,
            dropout: 0.2,
            attention_scale: AttentionScale::HiddenDim,
        }
    }
}

impl ModelSpec {
    pub fn into_model_config(self, feat_dim: usize, alphabet_size: usize) -> ModelConfig {
        ModelConfig {
            n_layers: self.n_layers,
            d_h: self.d_h,
            n_hds: self.n_hds,
            d_k: self.d_k,
            d_ff: self.d_ff,
            downsample: self.downsample,
            k: self.k,
            position: self.position,
            dropout: self.dropout,
            attention_scale: self.attention_scale,
            feat_dim,
            alphabet_size,
        }
    }
}

/// Everything an experiment config file can say.
#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub pipeline: FeaturePipeline,
    pub tokenizer: TokenizerChoice,
}

pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig, TrainError> {
    let text = std::fs::read_to_string(path).map_err(|e| TrainError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_experiment_config(&text, path)
}

pub fn parse_experiment_config(text: &str, path: &Path) -> Result<ExperimentConfig, TrainError> {
    let err = |line: usize, what: String| TrainError::Config {
        path: path.display().to_string(),
        line,
        what,
    };
    let base = path.parent().unwrap_or_else(|| Path::new(""));

    let mut kv: HashMap<String, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(lineno, format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if kv.insert(key.clone(), (lineno, value)).is_some() {
            return Err(err(lineno, format!("duplicate key {key:?}")));
        }
    }

    let mut cfg = ExperimentConfig::default();
    let mut d_k_given = false;
    for (key, (lineno, value)) in &kv {
        let lineno = *lineno;
        let parse_usize = || -> Result<usize, TrainError> {
            value
                .parse()
                .map_err(|_| err(lineno, format!("{key} expects an integer, got {value:?}")))
        };
        let parse_f64 = || -> Result<f64, TrainError> {
            value
                .parse()
                .map_err(|_| err(lineno, format!("{key} expects a number, got {value:?}")))
        };
        let parse_bool = || -> Result<bool, TrainError> {
            match value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(err(lineno, format!("{key} expects true or false"))),
            }
        };
        match key.as_str() {
            "n_layers" => cfg.model.n_layers = parse_usize()?,
            "d_h" => cfg.model.d_h = parse_usize()?,
            "n_hds" => cfg.model.n_hds = parse_usize()?,
            "d_k" => {
                cfg.model.d_k = parse_usize()?;
                d_k_given = true;
            }
            "d_ff" => cfg.model.d_ff = parse_usize()?,
            "downsample" => {
                cfg.model.downsample = DownsampleMode::parse(value)
                    .ok_or_else(|| err(lineno, format!("unknown downsample mode {value:?}")))?
            }
            "k" => cfg.model.k = parse_usize()?,
            "position" => {
                cfg.model.position = PositionMode::parse(value)
                    .ok_or_else(|| err(lineno, format!("unknown position mode {value:?}")))?
            }
            "dropout" => cfg.model.dropout = parse_f64()?,
            "attention_scale" => {
                cfg.model.attention_scale = AttentionScale::parse(value)
                    .ok_or_else(|| err(lineno, format!("unknown attention scale {value:?}")))?
            }
            "batch_size" => cfg.train.batch_size = parse_usize()?,
            "max_frames" => cfg.train.max_frames = parse_usize()?,
            "lambda" => cfg.train.lambda = parse_f64()?,
            "n_warmup" => cfg.train.n_warmup = parse_usize()?,
            "momentum" => cfg.train.momentum = parse_f64()?,
            "clip_norm" => cfg.train.clip_norm = parse_f64()?,
            "label_smoothing" => cfg.train.label_smoothing = parse_f64()?,
            "stage_switch_epoch" => cfg.train.stage_switch_epoch = parse_usize()?,
            "stage_length_epochs" => cfg.train.stage_length_epochs = parse_usize()?,
            "n_stages" => cfg.train.n_stages = parse_usize()?,
            "stage_decay" => {
                cfg.train.stage_decay = StageDecay::parse(value)
                    .ok_or_else(|| err(lineno, format!("unknown stage decay {value:?}")))?
            }
            "seed" => {
                cfg.train.seed = value
                    .parse()
                    .map_err(|_| err(lineno, format!("seed expects an integer, got {value:?}")))?
            }
            "cmvn" => cfg.pipeline.cmvn = parse_bool()?,
            "deltas" => {
                cfg.pipeline.deltas = DeltaMode::parse(value)
                    .ok_or_else(|| err(lineno, format!("unknown delta mode {value:?}")))?
            }
            "tokenizer" => {} // handled below, after bpe_model/lexicon are known
            "bpe_model" | "lexicon" => {}
            _ => return Err(err(lineno, format!("unknown key {key:?}"))),
        }
    }

    if !d_k_given {
        cfg.model.d_k = cfg.model.d_h / cfg.model.n_hds.max(1);
    }

    let tok = kv.get("tokenizer").map(|(_, v)| v.as_str()).unwrap_or("char");
    cfg.tokenizer = match tok {
        "char" => TokenizerChoice::Char,
        "bpe" => {
            let (lineno, p) = kv
                .get("bpe_model")
                .ok_or_else(|| err(0, "tokenizer = bpe requires bpe_model = <path>".into()))?;
            let _ = lineno;
            TokenizerChoice::Bpe {
                model_path: base.join(p),
            }
        }
        "phoneme" => {
            let (_, p) = kv
                .get("lexicon")
                .ok_or_else(|| err(0, "tokenizer = phoneme requires lexicon = <path>".into()))?;
            TokenizerChoice::Phoneme {
                lexicon_path: base.join(p),
            }
        }
        other => {
            let lineno = kv.get("tokenizer").map(|(l, _)| *l).unwrap_or(0);
            return Err(err(lineno, format!("unknown tokenizer {other:?}")));
        }
    };

    cfg.train.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_a_full_config() {
        let text = "\
# experiment
n_layers = 2
d_h = 64
n_hds = 4
d_ff = 128
downsample = reshape
k = 2
position = additive
dropout = 0.1
batch_size = 10
lambda = 5
n_warmup = 100
stage_switch_epoch = 30
stage_length_epochs = 10
n_stages = 2
seed = 7
cmvn = false
deltas = none
";
        let cfg = parse_experiment_config(text, Path::new("exp.cfg")).unwrap();
        assert_eq!(cfg.model.n_layers, 2);
        assert_eq!(cfg.model.d_k, 16, "d_k defaults to d_h / n_hds");
        assert_eq!(cfg.train.batch_size, 10);
        assert_eq!(cfg.train.seed, 7);
        assert!(!cfg.pipeline.cmvn);
        assert_eq!(cfg.tokenizer, TokenizerChoice::Char);
    }

    #[test]
    fn unknown_key_is_named() {
        let errtext = parse_experiment_config("warmup = 3\n", Path::new("exp.cfg"))
            .unwrap_err()
            .to_string();
        assert!(errtext.contains("unknown key"), "{errtext}");
        assert!(errtext.contains("warmup"), "{errtext}");
        assert!(errtext.contains("exp.cfg:1"), "{errtext}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse_experiment_config("label_smoothing = 1.5\n", Path::new("c")).is_err());
        assert!(parse_experiment_config("clip_norm = 0\n", Path::new("c")).is_err());
        assert!(parse_experiment_config("n_warmup = 0\n", Path::new("c")).is_err());
    }

    #[test]
    fn bpe_tokenizer_requires_model_path() {
        assert!(parse_experiment_config("tokenizer = bpe\n", Path::new("c")).is_err());
        let cfg =
            parse_experiment_config("tokenizer = bpe\nbpe_model = m.bpe\n", Path::new("d/c"))
                .unwrap();
        assert_eq!(
            cfg.tokenizer,
            TokenizerChoice::Bpe {
                model_path: PathBuf::from("d/m.bpe")
            }
        );
    }
}
