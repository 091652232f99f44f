//! Synthetic desk-scale corpora.
//!
//! Each utterance samples a label sequence (length 3..=12); every label
//! emits 2..=5 frames equal to a fixed per-label prototype vector plus
//! Gaussian noise. Prototypes are scaled basis vectors in 13 dimensions, so
//! they stay well separated at the default noise level.

use std::path::{Path, PathBuf};

use crate::error::TrainError;
use crate::featio::{save_feature_file, Manifest, ManifestEntry};
use crate::labels::Alphabet;
use crate::numkit::{Matrix, Rng};

pub const SYNTH_FEAT_DIM: usize = 13;
pub const SYNTH_NOISE_SIGMA: f64 = 0.1;
const PROTOTYPE_SCALE: f64 = 2.0;
const MIN_LABELS: usize = 3;
const MAX_LABELS: usize = 12;
const MIN_FRAMES_PER_LABEL: usize = 2;
const MAX_FRAMES_PER_LABEL: usize = 5;

/// An in-memory synthetic corpus, ready to train on or to write out.
#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub utt_id: String,
    pub frames: Matrix,
    pub transcript: String,
    pub labels: Vec<usize>,
}

/// The prototype frame for augmented label id (1-based).
pub fn prototype(label_id: usize) -> Vec<f64> {
    assert!(label_id >= 1, "blank has no prototype");
    let mut v = vec![0.0; SYNTH_FEAT_DIM];
    v[label_id - 1] = PROTOTYPE_SCALE;
    v
}

/// Draws `n_utts` utterances. Deterministic in (alphabet, n_utts, seed).
pub fn synth_corpus(
    alphabet: &Alphabet,
    n_utts: usize,
    seed: u64,
) -> Result<Vec<SynthUtterance>, TrainError> {
    synth_corpus_with_noise(alphabet, n_utts, seed, SYNTH_NOISE_SIGMA)
}

pub fn synth_corpus_with_noise(
    alphabet: &Alphabet,
    n_utts: usize,
    seed: u64,
    sigma: f64,
) -> Result<Vec<SynthUtterance>, TrainError> {
    let a = alphabet.size();
    if a < 2 {
        return Err(TrainError::Invalid {
            what: "synthetic corpus needs an alphabet of at least 2 symbols".into(),
        });
    }
    if a > SYNTH_FEAT_DIM {
        return Err(TrainError::Invalid {
            what: format!("synthetic prototypes support at most {SYNTH_FEAT_DIM} symbols"),
        });
    }
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(n_utts);
    for u in 0..n_utts {
        let n_labels = rng.uniform_usize(MIN_LABELS, MAX_LABELS);
        let mut labels: Vec<usize> = Vec::with_capacity(n_labels);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut transcript = String::new();
        for _ in 0..n_labels {
            // no adjacent repetition: a repeated label's run boundary is
            // invisible in the features, which would put a hard floor under
            // the error rate of any content-only model
            let label = match labels.last() {
                None => rng.uniform_usize(1, a),
                Some(&prev) => {
                    let step = rng.uniform_usize(1, a - 1);
                    (prev - 1 + step) % a + 1
                }
            };
            labels.push(label);
            transcript.push_str(alphabet.symbol(label).expect("label id in range"));
            let repeats = rng.uniform_usize(MIN_FRAMES_PER_LABEL, MAX_FRAMES_PER_LABEL);
            let proto = prototype(label);
            for _ in 0..repeats {
                let frame: Vec<f64> = proto.iter().map(|&p| p + sigma * rng.normal()).collect();
                rows.push(frame);
            }
        }
        out.push(SynthUtterance {
            utt_id: format!("synth{u:05}"),
            frames: Matrix::from_rows(&rows),
            transcript,
            labels,
        });
    }
    Ok(out)
}

/// Writes feature files under `dir/feats/` and a `manifest.tsv`; returns the
/// manifest path. Feature paths inside the manifest are relative.
pub fn write_corpus(dir: &Path, corpus: &[SynthUtterance]) -> Result<PathBuf, TrainError> {
    let feats = dir.join("feats");
    std::fs::create_dir_all(&feats).map_err(|e| TrainError::Io {
        path: feats.display().to_string(),
        source: e,
    })?;
    let mut manifest = Manifest::default();
    for utt in corpus {
        let rel = PathBuf::from("feats").join(format!("{}.feat", utt.utt_id));
        save_feature_file(&dir.join(&rel), &utt.frames)?;
        manifest.entries.push(ManifestEntry {
            utt_id: utt.utt_id.clone(),
            feature_path: rel,
            transcript: utt.transcript.clone(),
        });
    }
    let path = dir.join("manifest.tsv");
    crate::featio::save_manifest(&path, &manifest)?;
    Ok(path)
}
