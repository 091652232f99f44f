//! Levenshtein edit distance with operation counts, and corpus error rates.

use crate::error::CtcError;

/// Minimal unit-cost edit distance plus one minimal decomposition into
/// substitutions, insertions, and deletions. Ties prefer substitution, then
/// deletion, then insertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditCounts {
    pub distance: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let n = reference.len();
    let m = hypothesis.len();
    // cell = (distance, subs, ins, dels)
    let mut dp = vec![(0usize, 0usize, 0usize, 0usize); (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in 1..=n {
        dp[idx(i, 0)] = (i, 0, 0, i);
    }
    for j in 1..=m {
        dp[idx(0, j)] = (j, 0, j, 0);
    }
    for i in 1..=n {
        for j in 1..=m {
            if reference[i - 1] == hypothesis[j - 1] {
                dp[idx(i, j)] = dp[idx(i - 1, j - 1)];
                continue;
            }
            let sub = dp[idx(i - 1, j - 1)];
            let del = dp[idx(i - 1, j)];
            let ins = dp[idx(i, j - 1)];
            let best = (sub.0).min(del.0).min(ins.0) + 1;
            dp[idx(i, j)] = if sub.0 + 1 == best {
                (best, sub.1 + 1, sub.2, sub.3)
            } else if del.0 + 1 == best {
                (best, del.1, del.2, del.3 + 1)
            } else {
                (best, ins.1, ins.2 + 1, ins.3)
            };
        }
    }
    let (distance, substitutions, insertions, deletions) = dp[idx(n, m)];
    EditCounts {
        distance,
        substitutions,
        insertions,
        deletions,
    }
}

/// Corpus error rate: total edit distance over total reference length.
pub fn error_rate<T: PartialEq>(pairs: &[(Vec<T>, Vec<T>)]) -> Result<f64, CtcError> {
    let ref_total: usize = pairs.iter().map(|(r, _)| r.len()).sum();
    if pairs.is_empty() || ref_total == 0 {
        return Err(CtcError::EmptyReference);
    }
    let dist_total: usize = pairs
        .iter()
        .map(|(r, h)| edit_distance(r, h).distance)
        .sum();
    Ok(dist_total as f64 / ref_total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn single_substitution() {
        let c = edit_distance(&chars("abc"), &chars("axc"));
        assert_eq!(c.distance, 1);
        assert_eq!(c.substitutions, 1);
        assert_eq!(c.insertions, 0);
        assert_eq!(c.deletions, 0);
    }

    #[test]
    fn identical_sequences() {
        let c = edit_distance(&chars("abc"), &chars("abc"));
        assert_eq!(c.distance, 0);
    }

    #[test]
    fn empty_hypothesis_is_all_deletions() {
        let c = edit_distance(&chars("ab"), &chars(""));
        assert_eq!(c.distance, 2);
        assert_eq!(c.deletions, 2);
    }

    #[test]
    fn empty_reference_is_all_insertions() {
        let c = edit_distance(&chars(""), &chars("xy"));
        assert_eq!(c.distance, 2);
        assert_eq!(c.insertions, 2);
    }

    #[test]
    fn counts_sum_to_distance() {
        let c = edit_distance(&chars("kitten"), &chars("sitting"));
        assert_eq!(c.distance, 3);
        assert_eq!(c.substitutions + c.insertions + c.deletions, c.distance);
    }

    #[test]
    fn corpus_rate_is_length_weighted() {
        let pairs = vec![
            (chars("abc"), chars("axc")), // 1 edit / 3
            (chars("ab"), chars("ab")),   // 0 / 2
        ];
        let rate = error_rate(&pairs).unwrap();
        assert!((rate - 0.2).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let pairs: Vec<(Vec<char>, Vec<char>)> = vec![];
        assert!(matches!(error_rate(&pairs), Err(CtcError::EmptyReference)));
    }
}
