//! Byte-pair encoding over word-internal character sequences.
//!
//! Words are split into characters plus a trailing end-of-word marker; the
//! most frequent adjacent symbol pair is merged repeatedly. Ties break
//! toward the lexicographically smallest pair so learning is deterministic.
//! Merges never cross word boundaries.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Alphabet;
use crate::error::LabelError;

/// End-of-word marker appended to every word before merging.
pub const WORD_END: &str = "</w>";

/// A learned BPE model: the ordered merge list and the subword alphabet it
/// induces (base characters, the end-of-word marker, then one symbol per
/// merge in learned order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    pub merges: Vec<(String, String)>,
    pub vocab: Alphabet,
}

fn split_word(word: &str) -> Vec<String> {
    let mut syms: Vec<String> = word.chars().map(|c| c.to_string()).collect();
    syms.push(WORD_END.to_string());
    syms
}

/// Counts each distinct word once per occurrence across the corpus.
fn word_counts(corpus: &[String]) -> Vec<(Vec<String>, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for transcript in corpus {
        for word in transcript.split_whitespace() {
            let e = counts.entry(word.to_string()).or_insert(0);
            if *e == 0 {
                order.push(word.to_string());
            }
            *e += 1;
        }
    }
    order
        .into_iter()
        .map(|w| {
            let c = counts[&w];
            (split_word(&w), c)
        })
        .collect()
}

fn count_pairs(words: &[(Vec<String>, usize)]) -> HashMap<(String, String), usize> {
    let mut pairs = HashMap::new();
    for (syms, count) in words {
        for pair in syms.windows(2) {
            *pairs
                .entry((pair[0].clone(), pair[1].clone()))
                .or_insert(0) += count;
        }
    }
    pairs
}

/// Highest count wins; equal counts fall back to the lexicographically
/// smallest pair.
fn best_pair(pairs: &HashMap<(String, String), usize>) -> Option<(String, String)> {
    pairs
        .iter()
        .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
        .map(|(p, _)| p.clone())
}

/// Replaces adjacent (left, right) occurrences with their concatenation,
/// scanning left to right without overlap.
fn apply_merge(syms: &[String], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == left && syms[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(syms[i].clone());
            i += 1;
        }
    }
    out
}

/// Learns `n_merges` merges from the corpus (stops early if no pair remains).
pub fn bpe_learn(corpus: &[String], n_merges: usize) -> Result<BpeModel, LabelError> {
    if corpus.is_empty() {
        return Err(LabelError::InvalidAlphabet {
            what: "BPE corpus is empty".into(),
        });
    }
    let mut words = word_counts(corpus);

    let mut base: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for (syms, _) in &words {
        for s in syms {
            base.insert(s.clone());
        }
    }

    let mut merges = Vec::with_capacity(n_merges);
    for _ in 0..n_merges {
        let pairs = count_pairs(&words);
        let Some((left, right)) = best_pair(&pairs) else {
            break;
        };
        for (syms, _) in words.iter_mut() {
            *syms = apply_merge(syms, &left, &right);
        }
        merges.push((left, right));
    }

    let vocab = vocab_from(&base, &merges)?;
    Ok(BpeModel { merges, vocab })
}

fn vocab_from(
    base: &std::collections::BTreeSet<String>,
    merges: &[(String, String)],
) -> Result<Alphabet, LabelError> {
    let mut symbols: Vec<String> = base.iter().cloned().collect();
    for (l, r) in merges {
        let s = format!("{l}{r}");
        if !symbols.contains(&s) {
            symbols.push(s);
        }
    }
    Alphabet::new(symbols)
}

/// Greedy application of the learned merges, in order, per word.
pub fn bpe_encode(transcript: &str, model: &BpeModel) -> Result<Vec<usize>, LabelError> {
    let mut ids = Vec::new();
    for word in transcript.split_whitespace() {
        let mut syms = split_word(word);
        for (l, r) in &model.merges {
            syms = apply_merge(&syms, l, r);
        }
        for (pos, s) in syms.iter().enumerate() {
            match model.vocab.id(s) {
                Some(id) => ids.push(id),
                None => {
                    return Err(LabelError::UnknownChar {
                        ch: s.clone(),
                        pos,
                    })
                }
            }
        }
    }
    Ok(ids)
}

/// Inverse of [`bpe_encode`] on whitespace-normalized transcripts.
pub fn bpe_decode(ids: &[usize], model: &BpeModel) -> Result<String, LabelError> {
    super::TokenizerKind::Bpe.detokenize(ids, &model.vocab)
}

/// Model file: line 1 is the merge count, then one `left right` pair per
/// line, then a `#vocab` section listing subwords in id order.
pub fn save_bpe_model(path: &Path, model: &BpeModel) -> Result<(), LabelError> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", model.merges.len());
    for (l, r) in &model.merges {
        let _ = writeln!(out, "{l} {r}");
    }
    let _ = writeln!(out, "#vocab");
    for s in model.vocab.symbols() {
        let _ = writeln!(out, "{s}");
    }
    crate::featio::write_atomic(path, out.as_bytes()).map_err(|e| LabelError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_bpe_model(path: &Path) -> Result<BpeModel, LabelError> {
    let text = fs::read_to_string(path).map_err(|e| LabelError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let perr = |line: usize, what: String| LabelError::Parse {
        path: path.display().to_string(),
        line,
        what,
    };
    let mut lines = text.lines();
    let n: usize = lines
        .next()
        .ok_or_else(|| perr(1, "empty file".into()))?
        .trim()
        .parse()
        .map_err(|_| perr(1, "first line must be the merge count".into()))?;
    let mut merges = Vec::with_capacity(n);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| perr(i + 2, "missing merge line".into()))?;
        let (l, r) = line
            .split_once(' ')
            .ok_or_else(|| perr(i + 2, format!("expected `left right`, got {line:?}")))?;
        merges.push((l.to_string(), r.to_string()));
    }
    match lines.next() {
        Some("#vocab") => {}
        other => return Err(perr(n + 2, format!("expected `#vocab`, got {other:?}"))),
    }
    let symbols: Vec<String> = lines
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let vocab = Alphabet::new(symbols)?;
    Ok(BpeModel { merges, vocab })
}
