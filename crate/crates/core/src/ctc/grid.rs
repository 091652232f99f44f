//! Per-frame posterior grids over the blank-augmented alphabet L'.

use std::path::Path;

use crate::error::CtcError;
use crate::labels::Alphabet;
use crate::numkit::{log_softmax_rows, Matrix};

/// Absorbing log-sum-exp: both operands at -inf stay at -inf.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// A T x |L'| matrix of per-frame log-probabilities; every row is a
/// normalized distribution (column 0 is the blank).
#[derive(Debug, Clone)]
pub struct PosteriorGrid {
    log_probs: Matrix,
}

impl PosteriorGrid {
    /// Wraps log-probabilities, checking each row log-sum-exps to 0 within
    /// 1e-9.
    pub fn from_log_probs(log_probs: Matrix) -> Result<Self, CtcError> {
        if log_probs.cols() < 2 {
            return Err(CtcError::InvalidGrid {
                what: "need at least the blank plus one label column".into(),
            });
        }
        for r in 0..log_probs.rows() {
            let lse = log_probs
                .row(r)
                .iter()
                .fold(f64::NEG_INFINITY, |acc, &v| log_add(acc, v));
            if lse.is_nan() || lse.abs() > 1e-9 {
                return Err(CtcError::InvalidGrid {
                    what: format!("row {r} log-sum-exps to {lse}, expected 0"),
                });
            }
        }
        Ok(PosteriorGrid { log_probs })
    }

    /// Normalizes raw logits with a row-wise log-softmax.
    pub fn from_logits(logits: &Matrix) -> Result<Self, CtcError> {
        let log_probs = log_softmax_rows(logits)?;
        Ok(PosteriorGrid { log_probs })
    }

    /// Builds from plain probabilities (rows must already sum to 1).
    pub fn from_probs(probs: &Matrix) -> Result<Self, CtcError> {
        let mut m = probs.clone();
        for v in m.data_mut() {
            *v = v.ln();
        }
        Self::from_log_probs(m)
    }

    pub fn frames(&self) -> usize {
        self.log_probs.rows()
    }

    /// |L'|, including the blank.
    pub fn num_symbols(&self) -> usize {
        self.log_probs.cols()
    }

    #[inline]
    pub fn log_prob(&self, t: usize, k: usize) -> f64 {
        self.log_probs.get(t, k)
    }

    pub fn prob(&self, t: usize, k: usize) -> f64 {
        self.log_probs.get(t, k).exp()
    }

    pub fn log_probs(&self) -> &Matrix {
        &self.log_probs
    }
}

/// Reads a grid file: an optional `# alphabet: ...` comment naming the L
/// symbols, then the standard `T d` text matrix of unnormalized logits with
/// columns in L' id order (blank first).
pub fn load_grid_file(path: &Path) -> Result<(PosteriorGrid, Option<Alphabet>), CtcError> {
    let text = std::fs::read_to_string(path).map_err(|e| CtcError::InvalidGrid {
        what: format!("{}: {e}", path.display()),
    })?;
    let mut alphabet = None;
    let mut body = text.as_str();
    if let Some(rest) = text.strip_prefix("# alphabet:") {
        let (line, remainder) = rest.split_once('\n').unwrap_or((rest, ""));
        let symbols: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        alphabet = Some(
            Alphabet::new(symbols).map_err(|e| CtcError::InvalidGrid { what: e.to_string() })?,
        );
        body = remainder;
    }
    let logits = crate::featio::parse_matrix_text(body, path)
        .map_err(|e| CtcError::InvalidGrid { what: e.to_string() })?;
    if let Some(a) = &alphabet {
        if logits.cols() != a.augmented_size() {
            return Err(CtcError::InvalidGrid {
                what: format!(
                    "grid has {} columns but alphabet implies {}",
                    logits.cols(),
                    a.augmented_size()
                ),
            });
        }
    }
    Ok((PosteriorGrid::from_logits(&logits)?, alphabet))
}

/// Serializes logits with the alphabet comment header.
pub fn grid_file_text(logits: &Matrix, alphabet: &Alphabet) -> String {
    let mut out = format!("# alphabet: {}\n", alphabet.symbols().join(" "));
    out.push_str(&crate::featio::matrix_to_text(logits));
    out
}
