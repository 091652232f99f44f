//! Trigonometric absolute position encodings:
//! PE(t, 2i) = sin(t / 10000^(2i/d_emb)), PE(t, 2i+1) = cos(same argument).

use crate::numkit::Matrix;

/// The encoding vector for one position. `d_emb` must be even.
pub fn position_encoding(t: usize, d_emb: usize) -> Vec<f64> {
    assert!(d_emb >= 2 && d_emb.is_multiple_of(2), "d_emb must be even and >= 2");
    let mut out = vec![0.0; d_emb];
    for i in 0..d_emb / 2 {
        let rate = 10000f64.powf(2.0 * i as f64 / d_emb as f64);
        let arg = t as f64 / rate;
        out[2 * i] = arg.sin();
        out[2 * i + 1] = arg.cos();
    }
    out
}

/// Rows 0..t_len of the encoding, as a t_len x d_emb matrix.
pub fn position_encoding_matrix(t_len: usize, d_emb: usize) -> Matrix {
    let mut m = Matrix::zeros(t_len, d_emb);
    for t in 0..t_len {
        m.row_mut(t).copy_from_slice(&position_encoding(t, d_emb));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn position_zero_alternates_zero_one() {
        let pe = position_encoding(0, 8);
        for i in 0..4 {
            assert_eq!(pe[2 * i], 0.0);
            assert_eq!(pe[2 * i + 1], 1.0);
        }
    }

    #[test]
    fn position_one_first_pair() {
        let pe = position_encoding(1, 6);
        assert!((pe[0] - 1.0_f64.sin()).abs() < 1e-15); // ~0.841471
        assert!((pe[1] - 1.0_f64.cos()).abs() < 1e-15); // ~0.540302
        assert!((pe[0] - 0.841471).abs() < 1e-6);
        assert!((pe[1] - 0.540302).abs() < 1e-6);
    }

    #[test]
    fn all_entries_bounded() {
        let m = position_encoding_matrix(50, 16);
        for &v in m.data() {
            assert!((-1.0..=1.0).contains(&v));
        }
    }
}
