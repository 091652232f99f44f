//! Fixed input-length reduction by a factor k, applied before the encoder.
//!
//! All modes produce exactly ceil(T/k) output frames. Subsampling keeps
//! frames 0, k, 2k, ...; pooling aggregates each window with a statistic
//! (truncated final window); reshaping concatenates each window along the
//! feature axis (zero-padded final window), which loses no information.

use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownsampleMode {
    Subsample,
    PoolAvg,
    PoolMax,
    Reshape,
}

impl DownsampleMode {
    pub fn name(&self) -> &'static str {
        match self {
            DownsampleMode::Subsample => "subsample",
            DownsampleMode::PoolAvg => "pool_avg",
            DownsampleMode::PoolMax => "pool_max",
            DownsampleMode::Reshape => "reshape",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "subsample" => Some(DownsampleMode::Subsample),
            "pool_avg" => Some(DownsampleMode::PoolAvg),
            "pool_max" => Some(DownsampleMode::PoolMax),
            "reshape" => Some(DownsampleMode::Reshape),
            _ => None,
        }
    }
}

/// ceil(T / k).
pub fn downsampled_len(t: usize, k: usize) -> usize {
    t.div_ceil(k)
}

pub fn downsample(x: &Matrix, mode: DownsampleMode, k: usize) -> Matrix {
    assert!(k >= 1, "downsampling factor must be >= 1");
    if k == 1 && mode != DownsampleMode::Reshape {
        return x.clone();
    }
    let t = x.rows();
    let d = x.cols();
    let t_out = downsampled_len(t, k);
    match mode {
        DownsampleMode::Subsample => {
            let mut out = Matrix::zeros(t_out, d);
            for i in 0..t_out {
                out.row_mut(i).copy_from_slice(x.row(i * k));
            }
            out
        }
        DownsampleMode::PoolAvg => {
            let mut out = Matrix::zeros(t_out, d);
            for i in 0..t_out {
                let start = i * k;
                let end = (start + k).min(t);
                let window = (end - start) as f64;
                for c in 0..d {
                    let mut acc = 0.0;
                    for r in start..end {
                        acc += x.get(r, c);
                    }
                    out.set(i, c, acc / window);
                }
            }
            out
        }
        DownsampleMode::PoolMax => {
            let mut out = Matrix::zeros(t_out, d);
            for i in 0..t_out {
                let start = i * k;
                let end = (start + k).min(t);
                for c in 0..d {
                    let mut best = f64::NEG_INFINITY;
                    for r in start..end {
                        best = best.max(x.get(r, c));
                    }
                    out.set(i, c, best);
                }
            }
            out
        }
        DownsampleMode::Reshape => {
            let mut out = Matrix::zeros(t_out, d * k);
            for i in 0..t_out {
                for j in 0..k {
                    let r = i * k + j;
                    if r >= t {
                        break; // zero padding already in place
                    }
                    out.row_mut(i)[j * d..(j + 1) * d].copy_from_slice(x.row(r));
                }
            }
            out
        }
    }
}

/// Inverts reshape downsampling, returning the zero-padded T_out * k frame
/// sequence. The first T rows equal the original input exactly.
pub fn reshape_reconstruct(y: &Matrix, k: usize, d: usize) -> Matrix {
    assert_eq!(y.cols(), d * k, "reshaped width must be d*k");
    let mut out = Matrix::zeros(y.rows() * k, d);
    for i in 0..y.rows() {
        for j in 0..k {
            out.row_mut(i * k + j).copy_from_slice(&y.row(i)[j * d..(j + 1) * d]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    fn ramp(t: usize, d: usize) -> Matrix {
        let mut m = Matrix::zeros(t, d);
        for r in 0..t {
            for c in 0..d {
                m.set(r, c, (r * d + c) as f64);
            }
        }
        m
    }

    #[test]
    fn all_modes_give_ceil_length() {
        let x = ramp(7, 2);
        for mode in [
            DownsampleMode::Subsample,
            DownsampleMode::PoolAvg,
            DownsampleMode::PoolMax,
            DownsampleMode::Reshape,
        ] {
            let y = downsample(&x, mode, 3);
            assert_eq!(y.rows(), 3, "{mode:?}");
        }
    }

    #[test]
    fn reshape_pads_final_window_with_zeros() {
        let x = ramp(7, 2);
        let y = downsample(&x, DownsampleMode::Reshape, 3);
        assert_eq!(y.shape(), (3, 6));
        // last row holds frame 6 then four zeros
        assert_eq!(y.row(2), &[12.0, 13.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn k1_is_identity() {
        let x = ramp(4, 3);
        for mode in [
            DownsampleMode::Subsample,
            DownsampleMode::PoolAvg,
            DownsampleMode::PoolMax,
            DownsampleMode::Reshape,
        ] {
            let y = downsample(&x, mode, 1);
            assert_eq!(y, x, "{mode:?}");
        }
    }

    #[test]
    fn pool_avg_of_constant_is_constant() {
        let x = Matrix::filled(8, 3, 4.5);
        let y = downsample(&x, DownsampleMode::PoolAvg, 3);
        assert_eq!(y.rows(), 3);
        for &v in y.data() {
            assert_eq!(v, 4.5);
        }
    }

    #[test]
    fn subsample_keeps_stride_frames() {
        let x = ramp(7, 1);
        let y = downsample(&x, DownsampleMode::Subsample, 3);
        assert_eq!(y.data(), &[0.0, 3.0, 6.0]);
    }

    #[test]
    fn pool_max_short_tail() {
        let x = ramp(5, 1);
        let y = downsample(&x, DownsampleMode::PoolMax, 2);
        assert_eq!(y.data(), &[1.0, 3.0, 4.0]);
    }

    #[test]
    fn reshape_is_lossless_up_to_padding() {
        let mut rng = Rng::new(5);
        let mut x = Matrix::zeros(11, 4);
        for v in x.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let y = downsample(&x, DownsampleMode::Reshape, 3);
        let back = reshape_reconstruct(&y, 3, 4);
        assert_eq!(back.rows(), 12);
        for r in 0..11 {
            assert_eq!(back.row(r), x.row(r), "row {r}");
        }
        for &v in back.row(11) {
            assert_eq!(v, 0.0);
        }
    }
}
