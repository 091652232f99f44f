//! Dense row-major matrices of `f64` and the elementary neural-network
//! operations built on them.
//!
//! Every operation here is pure: inputs are taken by reference and a fresh
//! matrix is returned. Multiplication counts are tracked per thread so cost
//! scaling can be measured directly (see [`multiply_count`]).

use std::cell::Cell;
use std::fmt;

use super::rng::Rng;
use crate::error::NumError;

thread_local! {
    static MUL_COUNT: Cell<u64> = const { Cell::new(0) };
}

/// Resets this thread's floating-point multiply counter to zero.
pub fn reset_multiply_count() {
    MUL_COUNT.with(|c| c.set(0));
}

/// Number of floating-point multiplies performed by matrix ops on this
/// thread since the last reset.
pub fn multiply_count() -> u64 {
    MUL_COUNT.with(|c| c.get())
}

fn count_muls(n: u64) {
    MUL_COUNT.with(|c| c.set(c.get() + n));
}

/// A dense `rows x cols` matrix of `f64`, stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{})", self.rows, self.cols)
    }
}

impl Matrix {
    /// A matrix of zeros. Dimensions must be at least 1x1.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dims must be >= 1");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dims must be >= 1");
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length does not
    /// match `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dims must be >= 1");
        assert_eq!(data.len(), rows * cols, "data length must be rows*cols");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "need at least one row");
        let cols = rows[0].len();
        assert!(cols >= 1, "need at least one column");
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Standard matrix product `self * other`.
    ///
    /// The k-loop is innermost per output entry, so the accumulation order
    /// matches a naive triple loop exactly.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, NumError> {
        if self.cols != other.rows {
            return Err(NumError::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out.data[i * n..(i + 1) * n];
            for (j, out_val) in o_row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (p, &a) in a_row.iter().enumerate() {
                    acc += a * other.data[p * n + j];
                }
                *out_val = acc;
            }
        }
        count_muls((m * k * n) as u64);
        Ok(out)
    }

    /// `self * other^T` without materializing the transpose.
    pub fn matmul_transpose_b(&self, other: &Matrix) -> Result<Matrix, NumError> {
        if self.cols != other.cols {
            return Err(NumError::ShapeMismatch {
                op: "matmul_transpose_b",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (m, k, n) = (self.rows, self.cols, other.rows);
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b_row = &other.data[j * k..(j + 1) * k];
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a_row[p] * b_row[p];
                }
                out.data[i * n + j] = acc;
            }
        }
        count_muls((m * k * n) as u64);
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, NumError> {
        if self.shape() != other.shape() {
            return Err(NumError::ShapeMismatch {
                op: "add",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, NumError> {
        if self.shape() != other.shape() {
            return Err(NumError::ShapeMismatch {
                op: "sub",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Adds a 1 x cols row vector to every row.
    pub fn add_row_broadcast(&self, row: &Matrix) -> Result<Matrix, NumError> {
        if row.rows != 1 || row.cols != self.cols {
            return Err(NumError::ShapeMismatch {
                op: "add_row_broadcast",
                left: self.shape(),
                right: row.shape(),
            });
        }
        let mut out = self.clone();
        for r in 0..out.rows {
            for c in 0..out.cols {
                out.data[r * out.cols + c] += row.data[c];
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        count_muls(self.data.len() as u64);
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn relu(&self) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.max(0.0)).collect(),
        }
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix, NumError> {
        if self.shape() != other.shape() {
            return Err(NumError::ShapeMismatch {
                op: "hadamard",
                left: self.shape(),
                right: other.shape(),
            });
        }
        count_muls(self.data.len() as u64);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Concatenates matrices left-to-right. All parts must share a row count.
    pub fn concat_cols(parts: &[&Matrix]) -> Result<Matrix, NumError> {
        assert!(!parts.is_empty(), "concat_cols needs at least one part");
        let rows = parts[0].rows;
        for p in parts {
            if p.rows != rows {
                return Err(NumError::ShapeMismatch {
                    op: "concat_cols",
                    left: parts[0].shape(),
                    right: p.shape(),
                });
            }
        }
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for p in parts {
                out.data[r * cols + offset..r * cols + offset + p.cols]
                    .copy_from_slice(p.row(r));
                offset += p.cols;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Row-wise softmax with per-row max subtraction.
///
/// Each output row is a probability distribution; rows sum to 1 up to
/// rounding. Rejects NaN input.
pub fn softmax_rows(m: &Matrix) -> Result<Matrix, NumError> {
    if m.data.iter().any(|v| v.is_nan()) {
        return Err(NumError::NonFinite { op: "softmax_rows" });
    }
    let mut out = m.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = 1.0 / sum;
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    count_muls(out.data.len() as u64);
    Ok(out)
}

/// Row-wise log-softmax (max subtraction, then subtract log-sum-exp).
pub fn log_softmax_rows(m: &Matrix) -> Result<Matrix, NumError> {
    if m.data.iter().any(|v| v.is_nan()) {
        return Err(NumError::NonFinite {
            op: "log_softmax_rows",
        });
    }
    let mut out = m.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        for v in row.iter_mut() {
            *v -= log_sum;
        }
    }
    Ok(out)
}

/// Per-row layer normalization with learned gain and bias (both 1 x cols).
///
/// Rows are shifted to zero mean and scaled to unit population variance
/// (variance + eps under the square root), then scaled by `gain` and
/// shifted by `bias`.
pub fn layer_norm(m: &Matrix, gain: &Matrix, bias: &Matrix, eps: f64) -> Result<Matrix, NumError> {
    if gain.rows != 1 || gain.cols != m.cols {
        return Err(NumError::ShapeMismatch {
            op: "layer_norm gain",
            left: m.shape(),
            right: gain.shape(),
        });
    }
    if bias.rows != 1 || bias.cols != m.cols {
        return Err(NumError::ShapeMismatch {
            op: "layer_norm bias",
            left: m.shape(),
            right: bias.shape(),
        });
    }
    let mut out = m.clone();
    let n = m.cols as f64;
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv_std = 1.0 / (var + eps).sqrt();
        for (c, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) * inv_std * gain.data[c] + bias.data[c];
        }
    }
    count_muls(2 * out.data.len() as u64);
    Ok(out)
}

/// Inverted dropout: in training mode each entry is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`; in eval mode the input
/// is returned unchanged.
pub fn dropout(m: &Matrix, rate: f64, rng: &mut Rng, training: bool) -> Result<Matrix, NumError> {
    let mask = dropout_mask(m.shape(), rate, rng, training)?;
    match mask {
        Some(mask) => m.hadamard(&mask),
        None => Ok(m.clone()),
    }
}

/// Samples the multiplicative dropout mask (entries 0 or `1/(1-rate)`).
/// Returns `None` when dropout is a no-op (eval mode or rate 0).
pub fn dropout_mask(
    shape: (usize, usize),
    rate: f64,
    rng: &mut Rng,
    training: bool,
) -> Result<Option<Matrix>, NumError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NumError::InvalidParameter {
            what: format!("dropout rate must be in [0, 1), got {rate}"),
        });
    }
    if !training || rate == 0.0 {
        return Ok(None);
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mut mask = Matrix::zeros(shape.0, shape.1);
    for v in mask.data.iter_mut() {
        if rng.next_f64() >= rate {
            *v = keep_scale;
        }
    }
    Ok(Some(mask))
}

/// Xavier (Glorot) uniform initialization: entries drawn uniformly from
/// `+- sqrt(6 / (rows + cols))`.
pub fn xavier_init(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    assert!(rows >= 1 && cols >= 1, "matrix dims must be >= 1");
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data.iter_mut() {
        *v = rng.uniform(-bound, bound);
    }
    m
}

/// Joint L2 norm over all entries of all matrices.
pub fn global_norm(mats: &[&Matrix]) -> f64 {
    mats.iter()
        .map(|m| m.data.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Scales all gradients by `threshold / norm` when the joint norm exceeds
/// `threshold`; otherwise leaves them unchanged. Returns the applied scale.
pub fn clip_global_norm(grads: &mut [Matrix], threshold: f64) -> f64 {
    assert!(threshold > 0.0, "clip threshold must be positive");
    let refs: Vec<&Matrix> = grads.iter().collect();
    let norm = global_norm(&refs);
    if norm <= threshold || norm == 0.0 {
        return 1.0;
    }
    let scale = threshold / norm;
    for g in grads.iter_mut() {
        for v in g.data.iter_mut() {
            *v *= scale;
        }
    }
    scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetric_row() {
        let m = softmax_rows(&Matrix::from_rows(&[vec![0.0, 0.0, 0.0]])).unwrap();
        for &v in m.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_survives_large_logits() {
        let m = softmax_rows(&Matrix::from_rows(&[vec![1000.0, 0.0]])).unwrap();
        assert!((m.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(m.get(0, 1) >= 0.0 && m.get(0, 1) < 1e-12);
        assert!(m.is_finite());
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        let m = softmax_rows(&Matrix::from_rows(&[vec![1.0, 2.0, 3.0]])).unwrap();
        let z: f64 = [1.0, 2.0, 3.0].iter().map(|v: &f64| v.exp()).sum();
        for (c, base) in [1.0_f64, 2.0, 3.0].into_iter().enumerate() {
            assert!((m.get(0, c) - base.exp() / z).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = Rng::new(2);
        let mut m = Matrix::zeros(20, 7);
        for v in m.data_mut() {
            *v = rng.uniform(-30.0, 30.0);
        }
        let s = softmax_rows(&m).unwrap();
        for r in 0..s.rows() {
            let sum: f64 = s.row(r).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "row {r}: {sum}");
        }
    }

    #[test]
    fn softmax_rejects_nan() {
        let m = Matrix::from_rows(&[vec![f64::NAN, 0.0]]);
        assert!(softmax_rows(&m).is_err());
    }

    #[test]
    fn layer_norm_constant_row_is_zero() {
        let gain = Matrix::filled(1, 3, 1.0);
        let bias = Matrix::zeros(1, 3);
        let out = layer_norm(&Matrix::filled(2, 3, 7.0), &gain, &bias, 1e-5).unwrap();
        for &v in out.data() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn layer_norm_preserves_standardized_row() {
        let gain = Matrix::filled(1, 2, 1.0);
        let bias = Matrix::zeros(1, 2);
        let out = layer_norm(&Matrix::from_rows(&[vec![-1.0, 1.0]]), &gain, &bias, 1e-12).unwrap();
        assert!((out.get(0, 0) + 1.0).abs() < 1e-6);
        assert!((out.get(0, 1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn layer_norm_statistics() {
        let mut rng = Rng::new(4);
        let mut m = Matrix::zeros(1, 64);
        for v in m.data_mut() {
            *v = rng.uniform(-8.0, 8.0);
        }
        let gain = Matrix::filled(1, 64, 1.0);
        let bias = Matrix::zeros(1, 64);
        let out = layer_norm(&m, &gain, &bias, 1e-5).unwrap();
        let mean = out.data().iter().sum::<f64>() / 64.0;
        let var = out.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 64.0;
        assert!(mean.abs() <= 1e-12, "mean {mean}");
        assert!((var - 1.0).abs() <= 1e-6, "var {var}");
    }

    #[test]
    fn dropout_rate_zero_is_identity() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let mut rng = Rng::new(1);
        let out = dropout(&m, 0.0, &mut rng, true).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn dropout_eval_is_identity() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0]]);
        let mut rng = Rng::new(1);
        let out = dropout(&m, 0.9, &mut rng, false).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn dropout_rejects_rate_one() {
        let m = Matrix::zeros(1, 1);
        let mut rng = Rng::new(1);
        assert!(dropout(&m, 1.0, &mut rng, true).is_err());
    }

    #[test]
    fn dropout_empirical_zero_fraction() {
        let m = Matrix::filled(250, 400, 1.0);
        let mut rng = Rng::new(8);
        let out = dropout(&m, 0.5, &mut rng, true).unwrap();
        let zeros = out.data().iter().filter(|&&v| v == 0.0).count();
        let frac = zeros as f64 / 100_000.0;
        assert!((frac - 0.5).abs() <= 0.01, "zero fraction {frac}");
        // survivors carry the inverse keep probability
        for &v in out.data() {
            assert!(v == 0.0 || (v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn xavier_values_within_bound() {
        let mut rng = Rng::new(10);
        let m = xavier_init(30, 50, &mut rng);
        let bound = (6.0 / 80.0_f64).sqrt();
        for &v in m.data() {
            assert!(v.abs() <= bound);
        }
    }

    #[test]
    fn xavier_empirical_variance() {
        let mut rng = Rng::new(12);
        let m = xavier_init(250, 400, &mut rng);
        let mean = m.data().iter().sum::<f64>() / 100_000.0;
        let var = m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 100_000.0;
        let expected = 2.0 / 650.0;
        assert!(
            (var - expected).abs() / expected <= 0.05,
            "var {var}, expected {expected}"
        );
    }

    #[test]
    fn xavier_same_seed_identical() {
        let a = xavier_init(5, 5, &mut Rng::new(77));
        let b = xavier_init(5, 5, &mut Rng::new(77));
        assert_eq!(a, b);
    }

    #[test]
    fn clip_scales_above_threshold() {
        let mut grads = vec![Matrix::from_rows(&[vec![3.0, 4.0]])];
        let scale = clip_global_norm(&mut grads, 1.0);
        assert!((scale - 0.2).abs() < 1e-15);
        assert!((grads[0].get(0, 0) - 0.6).abs() < 1e-15);
        assert!((grads[0].get(0, 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn clip_identity_below_threshold() {
        let mut grads = vec![Matrix::from_rows(&[vec![0.3, 0.4]])];
        let scale = clip_global_norm(&mut grads, 1.0);
        assert_eq!(scale, 1.0);
        assert_eq!(grads[0].data(), &[0.3, 0.4]);
    }

    #[test]
    fn clip_joint_norm_is_pythagorean() {
        let mut grads = vec![
            Matrix::from_rows(&[vec![3.0]]),
            Matrix::from_rows(&[vec![4.0]]),
        ];
        let refs: Vec<&Matrix> = grads.iter().collect();
        assert!((global_norm(&refs) - 5.0).abs() < 1e-15);
        let scale = clip_global_norm(&mut grads, 1.0);
        assert!((scale - 0.2).abs() < 1e-15);
    }

    #[test]
    fn clip_never_increases_norm() {
        let mut rng = Rng::new(14);
        for _ in 0..20 {
            let mut grads = vec![xavier_init(3, 3, &mut rng).scale(rng.uniform(0.1, 30.0))];
            let before = global_norm(&grads.iter().collect::<Vec<_>>());
            clip_global_norm(&mut grads, 1.0);
            let after = global_norm(&grads.iter().collect::<Vec<_>>());
            assert!(after <= before + 1e-12);
            assert!(after <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn matmul_agrees_with_naive_triple_loop() {
        let mut rng = Rng::new(16);
        let a = xavier_init(16, 16, &mut rng);
        let b = xavier_init(16, 16, &mut rng);
        let fast = a.matmul(&b).unwrap();
        let mut naive = Matrix::zeros(16, 16);
        for i in 0..16 {
            for j in 0..16 {
                let mut acc = 0.0;
                for k in 0..16 {
                    acc += a.get(i, k) * b.get(k, j);
                }
                naive.set(i, j, acc);
            }
        }
        for (f, n) in fast.data().iter().zip(naive.data()) {
            let rel = (f - n).abs() / n.abs().max(1e-300);
            assert!(rel <= 1e-12);
        }
    }

    #[test]
    fn multiply_counter_tracks_matmul() {
        reset_multiply_count();
        let a = Matrix::zeros(3, 4);
        let b = Matrix::zeros(4, 5);
        let _ = a.matmul(&b).unwrap();
        assert_eq!(multiply_count(), 60);
    }
}
