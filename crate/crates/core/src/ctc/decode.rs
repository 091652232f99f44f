//! Best-path (greedy) decoding and prefix beam search.

use std::collections::BTreeMap;

use super::grid::{log_add, PosteriorGrid};
use crate::error::CtcError;
use crate::labels::BLANK_ID;

use super::loss::collapse;

/// Collapse of the per-frame argmax path. Frame ties break toward the
/// lowest id.
pub fn greedy_decode(grid: &PosteriorGrid) -> Vec<usize> {
    let mut path = Vec::with_capacity(grid.frames());
    for t in 0..grid.frames() {
        let mut best = 0usize;
        let mut best_lp = grid.log_prob(t, 0);
        for k in 1..grid.num_symbols() {
            let lp = grid.log_prob(t, k);
            if lp > best_lp {
                best = k;
                best_lp = lp;
            }
        }
        path.push(best);
    }
    collapse(&path)
}

/// A decoded labeling and its accumulated log probability.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub labels: Vec<usize>,
    pub log_prob: f64,
}

/// Per-prefix probability split by how the paths end.
#[derive(Debug, Clone, Copy)]
struct PrefixScore {
    /// log mass of paths ending in blank
    blank: f64,
    /// log mass of paths ending in the prefix's last label
    label: f64,
}

impl PrefixScore {
    const EMPTY: PrefixScore = PrefixScore {
        blank: f64::NEG_INFINITY,
        label: f64::NEG_INFINITY,
    };

    fn total(&self) -> f64 {
        log_add(self.blank, self.label)
    }
}

/// Standard CTC prefix beam search.
///
/// Prefixes carry separate (blank-ending, label-ending) masses so that
/// repeats and extensions combine exactly. With a beam wide enough to hold
/// every reachable prefix, the returned scores are the exact log P(y|X) and
/// the top hypothesis is the exact most probable labeling.
pub fn prefix_beam_decode(
    grid: &PosteriorGrid,
    beam_width: usize,
) -> Result<Vec<BeamHypothesis>, CtcError> {
    if beam_width == 0 {
        return Err(CtcError::ZeroBeamWidth);
    }

    // BTreeMap keys give deterministic iteration; ties in pruning break
    // toward the lexicographically smaller prefix.
    let mut beam: BTreeMap<Vec<usize>, PrefixScore> = BTreeMap::new();
    beam.insert(
        Vec::new(),
        PrefixScore {
            blank: 0.0, // empty path has probability 1 before any frame
            label: f64::NEG_INFINITY,
        },
    );

    for t in 0..grid.frames() {
        let mut next: BTreeMap<Vec<usize>, PrefixScore> = BTreeMap::new();
        for (prefix, score) in &beam {
            // stay on the same prefix via a blank
            let blank_lp = grid.log_prob(t, BLANK_ID);
            {
                let e = next.entry(prefix.clone()).or_insert(PrefixScore::EMPTY);
                e.blank = log_add(e.blank, score.total() + blank_lp);
            }
            for k in 1..grid.num_symbols() {
                let lp = grid.log_prob(t, k);
                if Some(&k) == prefix.last() {
                    // repeating the last label extends only paths that end
                    // in it; paths ending in blank start a new copy
                    let e = next.entry(prefix.clone()).or_insert(PrefixScore::EMPTY);
                    e.label = log_add(e.label, score.label + lp);

                    let mut extended = prefix.clone();
                    extended.push(k);
                    let e = next.entry(extended).or_insert(PrefixScore::EMPTY);
                    e.label = log_add(e.label, score.blank + lp);
                } else {
                    let mut extended = prefix.clone();
                    extended.push(k);
                    let e = next.entry(extended).or_insert(PrefixScore::EMPTY);
                    e.label = log_add(e.label, score.total() + lp);
                }
            }
        }

        // prune to the beam width by total mass
        let mut entries: Vec<(Vec<usize>, PrefixScore)> = next.into_iter().collect();
        entries.sort_by(|(pa, sa), (pb, sb)| {
            sb.total()
                .partial_cmp(&sa.total())
                .expect("scores are never NaN")
                .then_with(|| pa.cmp(pb))
        });
        entries.truncate(beam_width);
        beam = entries.into_iter().collect();
    }

    let mut out: Vec<BeamHypothesis> = beam
        .into_iter()
        .map(|(labels, score)| BeamHypothesis {
            log_prob: score.total(),
            labels,
        })
        .collect();
    out.sort_by(|a, b| {
        b.log_prob
            .partial_cmp(&a.log_prob)
            .expect("scores are never NaN")
            .then_with(|| a.labels.cmp(&b.labels))
    });
    Ok(out)
}
