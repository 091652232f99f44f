//! Attention-head statistics: per-head positional spread and
//! attention-mass-by-relative-offset profiles, aggregated over a corpus of
//! captured attention records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::san::AttentionRecord;

/// Positional spread of one head, in frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadStat {
    pub layer: usize,
    pub head: usize,
    pub value: f64,
}

/// Mean attention mass one head puts at a key-minus-query offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileStat {
    pub layer: usize,
    pub head: usize,
    pub offset: i64,
    pub mass: f64,
}

/// Treats each attention row as a distribution over key positions and takes
/// the standard deviation of the key-position variable, averaged over query
/// rows, then over utterances.
pub fn positional_spread(records: &[AttentionRecord]) -> Vec<SpreadStat> {
    assert!(!records.is_empty(), "need at least one attention record");
    let layers = records[0].n_layers();
    let heads = records[0].n_heads();
    let mut out = Vec::with_capacity(layers * heads);
    for layer in 0..layers {
        for head in 0..heads {
            let mut acc = 0.0;
            for record in records {
                let w = record.get(layer, head);
                let t = w.rows();
                let mut per_query = 0.0;
                for r in 0..t {
                    let row = w.row(r);
                    let mean: f64 = row.iter().enumerate().map(|(j, &p)| p * j as f64).sum();
                    let var: f64 = row
                        .iter()
                        .enumerate()
                        .map(|(j, &p)| p * (j as f64 - mean) * (j as f64 - mean))
                        .sum();
                    per_query += var.max(0.0).sqrt();
                }
                acc += per_query / t as f64;
            }
            out.push(SpreadStat {
                layer,
                head,
                value: acc / records.len() as f64,
            });
        }
    }
    out
}

/// Full relative profile of one head for one record: mass at each offset
/// (key - query), normalized by the query count. Summing over all offsets
/// gives exactly 1 because every attention row sums to 1.
pub fn head_profile(record: &AttentionRecord, layer: usize, head: usize) -> BTreeMap<i64, f64> {
    let w = record.get(layer, head);
    let t = w.rows() as i64;
    let mut bins = BTreeMap::new();
    for r in 0..w.rows() {
        for c in 0..w.cols() {
            let offset = c as i64 - r as i64;
            *bins.entry(offset).or_insert(0.0) += w.get(r, c);
        }
    }
    for v in bins.values_mut() {
        *v /= t as f64;
    }
    bins
}

/// Profiles averaged over utterances and clipped to offsets in [-W, W].
/// Offsets never realized stay at mass 0 so the report covers the window
/// exactly.
pub fn relative_profile(records: &[AttentionRecord], window: usize) -> Vec<ProfileStat> {
    assert!(window >= 1, "window must be >= 1");
    assert!(!records.is_empty(), "need at least one attention record");
    let layers = records[0].n_layers();
    let heads = records[0].n_heads();
    let w = window as i64;
    let mut out = Vec::new();
    for layer in 0..layers {
        for head in 0..heads {
            let mut bins: BTreeMap<i64, f64> = (-w..=w).map(|o| (o, 0.0)).collect();
            for record in records {
                for (offset, mass) in head_profile(record, layer, head) {
                    if offset.abs() <= w {
                        *bins.get_mut(&offset).expect("bin in window") += mass;
                    }
                }
            }
            for (&offset, &mass) in &bins {
                out.push(ProfileStat {
                    layer,
                    head,
                    offset,
                    mass: mass / records.len() as f64,
                });
            }
        }
    }
    out
}

/// TSV report: `layer \t head \t value`.
pub fn spread_table(stats: &[SpreadStat]) -> String {
    let mut out = String::from("layer\thead\tvalue\n");
    for s in stats {
        let _ = writeln!(out, "{}\t{}\t{}", s.layer, s.head, s.value);
    }
    out
}

/// TSV report: `layer \t head \t offset \t mass`.
pub fn profile_table(stats: &[ProfileStat]) -> String {
    let mut out = String::from("layer\thead\toffset\tmass\n");
    for s in stats {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", s.layer, s.head, s.offset, s.mass);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Matrix;

    fn record_from(weights: Matrix) -> AttentionRecord {
        AttentionRecord {
            weights: vec![vec![weights]],
        }
    }

    fn one_hot_at_self(t: usize) -> Matrix {
        Matrix::identity(t)
    }

    fn uniform(t: usize) -> Matrix {
        Matrix::filled(t, t, 1.0 / t as f64)
    }

    #[test]
    fn identity_attention_has_zero_spread() {
        let rec = record_from(one_hot_at_self(7));
        let stats = positional_spread(&[rec]);
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].value, 0.0);
    }

    #[test]
    fn uniform_attention_matches_discrete_uniform_std() {
        // std of uniform over {0..100} = sqrt((101^2 - 1) / 12)
        let rec = record_from(uniform(101));
        let stats = positional_spread(&[rec]);
        let expected = ((101.0_f64 * 101.0 - 1.0) / 12.0).sqrt();
        assert!((stats[0].value - expected).abs() <= 1e-9);
        assert!((expected - 29.15).abs() < 0.01);
    }

    #[test]
    fn identity_attention_profile_is_all_at_zero() {
        let rec = record_from(one_hot_at_self(5));
        let full = head_profile(&rec, 0, 0);
        assert_eq!(full.get(&0), Some(&1.0));
        for (&o, &m) in &full {
            if o != 0 {
                assert_eq!(m, 0.0, "offset {o}");
            }
        }
    }

    #[test]
    fn shift_by_one_attention_masses_at_plus_one() {
        // rows 0..t-2 one-hot at t+1; the final row has no next key and
        // attends to itself
        let t = 6;
        let mut w = Matrix::zeros(t, t);
        for r in 0..t - 1 {
            w.set(r, r + 1, 1.0);
        }
        w.set(t - 1, t - 1, 1.0);
        let full = head_profile(&record_from(w), 0, 0);
        assert!((full[&1] - (t as f64 - 1.0) / t as f64).abs() < 1e-15);
        assert!((full[&0] - 1.0 / t as f64).abs() < 1e-15);
    }

    #[test]
    fn unclipped_profile_sums_to_one() {
        let rec = record_from(uniform(9));
        let total: f64 = head_profile(&rec, 0, 0).values().sum();
        assert!((total - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn uniform_profile_is_flat_inside() {
        let t = 8;
        let rec = record_from(uniform(t));
        let full = head_profile(&rec, 0, 0);
        // interior mass decays only through edge truncation: N_o / t^2
        for (&o, &m) in &full {
            let n_o = (t as i64 - o.abs()) as f64;
            assert!((m - n_o / (t * t) as f64).abs() < 1e-12, "offset {o}");
        }
        assert!((full[&0] - 1.0 / t as f64).abs() < 1e-15);
    }

    #[test]
    fn clipped_report_covers_window_exactly() {
        let rec = record_from(uniform(4));
        let stats = relative_profile(&[rec], 6);
        let offsets: Vec<i64> = stats.iter().map(|s| s.offset).collect();
        assert_eq!(offsets, (-6..=6).collect::<Vec<i64>>());
    }

    #[test]
    fn time_reversal_mirrors_profile() {
        // reversing the sequence flips W by both axes; the profile mirrors
        let mut rng = crate::numkit::Rng::new(8);
        let t = 7;
        let mut logits = Matrix::zeros(t, t);
        for v in logits.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let w = crate::numkit::softmax_rows(&logits).unwrap();
        let mut flipped = Matrix::zeros(t, t);
        for r in 0..t {
            for c in 0..t {
                flipped.set(r, c, w.get(t - 1 - r, t - 1 - c));
            }
        }
        let base = head_profile(&record_from(w), 0, 0);
        let mirrored = head_profile(&record_from(flipped), 0, 0);
        for (&o, &m) in &base {
            let counterpart = mirrored.get(&(-o)).copied().unwrap_or(0.0);
            assert!((m - counterpart).abs() <= 1e-9, "offset {o}");
        }
    }

    #[test]
    fn tables_have_expected_shape() {
        let rec = record_from(uniform(3));
        let spread = spread_table(&positional_spread(std::slice::from_ref(&rec)));
        assert_eq!(spread.lines().count(), 2); // header + 1 head
        let profile = profile_table(&relative_profile(&[rec], 2));
        assert_eq!(profile.lines().count(), 1 + 5);
    }
}
