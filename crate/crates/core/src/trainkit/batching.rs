//! Corpus preparation and length-sorted batching.

use crate::error::TrainError;
use crate::featio::{load_feature_file, FeaturePipeline, Manifest};
use crate::labels::Tokenizer;
use crate::numkit::Matrix;
use crate::san::downsampled_len;

use super::config::TrainConfig;

/// One training utterance, fully prepared: pipeline-processed features and
/// the tokenized target.
#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub utt_id: String,
    pub features: Matrix,
    pub target: Vec<usize>,
    /// Frame count before downsampling, used for length filtering/sorting.
    pub raw_frames: usize,
}

/// Loads every manifest entry, applies the feature pipeline, and tokenizes
/// transcripts. Order follows the manifest.
pub fn prepare_corpus(
    manifest: &Manifest,
    pipeline: &FeaturePipeline,
    tokenizer: &Tokenizer,
) -> Result<Vec<CorpusItem>, TrainError> {
    let mut items = Vec::with_capacity(manifest.len());
    for entry in &manifest.entries {
        let raw = load_feature_file(&entry.feature_path)?;
        let raw_frames = raw.num_frames();
        let processed = pipeline.apply(&raw);
        let target = tokenizer.tokenize(&entry.transcript)?;
        items.push(CorpusItem {
            utt_id: entry.utt_id.clone(),
            features: processed.frames,
            target,
            raw_frames,
        });
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterStats {
    pub too_long: usize,
    pub unreachable: usize,
}

/// Filters out over-long and CTC-unreachable utterances, sorts the rest by
/// raw length ascending (stable, so equal lengths keep manifest order), and
/// chunks them into batches of `batch_size` indices into `items`.
pub fn make_batches(
    items: &[CorpusItem],
    config: &TrainConfig,
    downsample_k: usize,
) -> Result<(Vec<Vec<usize>>, FilterStats), TrainError> {
    let mut stats = FilterStats::default();
    let mut kept: Vec<usize> = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        if item.raw_frames > config.max_frames {
            stats.too_long += 1;
            continue;
        }
        let t_prime = downsampled_len(item.raw_frames, downsample_k);
        let need = item.target.len() + crate::ctc::adjacent_repeats(&item.target);
        if need > t_prime {
            stats.unreachable += 1;
            continue;
        }
        kept.push(i);
    }
    if kept.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    kept.sort_by_key(|&i| items[i].raw_frames);
    let batches = kept
        .chunks(config.batch_size)
        .map(|c| c.to_vec())
        .collect();
    Ok((batches, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(utt_id: &str, frames: usize, target: Vec<usize>) -> CorpusItem {
        CorpusItem {
            utt_id: utt_id.into(),
            features: Matrix::zeros(frames, 2),
            target,
            raw_frames: frames,
        }
    }

    fn config(batch_size: usize) -> TrainConfig {
        TrainConfig {
            batch_size,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn sorts_by_length_then_chunks() {
        let items = vec![
            item("a", 5, vec![1]),
            item("b", 3, vec![1]),
            item("c", 9, vec![1]),
        ];
        let (batches, stats) = make_batches(&items, &config(2), 1).unwrap();
        assert_eq!(stats, FilterStats::default());
        assert_eq!(batches, vec![vec![1, 0], vec![2]]);
    }

    #[test]
    fn excludes_overlong_utterances() {
        let items = vec![item("a", 1801, vec![1]), item("b", 10, vec![1])];
        let (batches, stats) = make_batches(&items, &config(4), 1).unwrap();
        assert_eq!(stats.too_long, 1);
        assert_eq!(batches, vec![vec![1]]);
    }

    #[test]
    fn excludes_unreachable_targets() {
        // "aa" needs T' >= 3; with 4 raw frames and k = 2, T' = 2
        let items = vec![item("a", 4, vec![1, 1]), item("b", 6, vec![1, 1])];
        let (batches, stats) = make_batches(&items, &config(4), 2).unwrap();
        assert_eq!(stats.unreachable, 1);
        assert_eq!(batches, vec![vec![1]]);
    }

    #[test]
    fn empty_after_filtering_is_an_error() {
        let items = vec![item("a", 2000, vec![1])];
        assert!(matches!(
            make_batches(&items, &config(2), 1),
            Err(TrainError::EmptyCorpus)
        ));
    }

    #[test]
    fn stable_for_equal_lengths() {
        let items = vec![
            item("first", 4, vec![1]),
            item("second", 4, vec![1]),
            item("third", 4, vec![1]),
        ];
        let (batches, _) = make_batches(&items, &config(3), 1).unwrap();
        assert_eq!(batches, vec![vec![0, 1, 2]]);
    }
}
