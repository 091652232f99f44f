//! The CTC probability model: the collapse map B, exact marginal likelihood
//! by forward-backward dynamic programming over the blank-augmented target,
//! its analytic gradient, and a brute-force enumeration reference.
//!
//! All dynamic programming runs in log space with an absorbing log-sum-exp.
//! The augmented target for y = (y_1..y_U) is (-, y_1, -, y_2, ..., y_U, -)
//! of length 2U+1; state s maps to blank when s is even and to y_{(s+1)/2}
//! when odd.

use super::grid::{log_add, PosteriorGrid};
use crate::error::CtcError;
use crate::labels::BLANK_ID;
use crate::numkit::Matrix;

/// Collapses a path: merge adjacent duplicates, then remove blanks.
pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for &p in path {
        if Some(p) != prev {
            if p != BLANK_ID {
                out.push(p);
            }
            prev = Some(p);
        }
    }
    out
}

/// Number of adjacent equal label pairs in a target.
pub fn adjacent_repeats(y: &[usize]) -> usize {
    y.windows(2).filter(|w| w[0] == w[1]).count()
}

fn check_target(grid: &PosteriorGrid, y: &[usize]) -> Result<(), CtcError> {
    for (pos, &label) in y.iter().enumerate() {
        if label == BLANK_ID {
            return Err(CtcError::BlankInTarget { pos });
        }
        if label >= grid.num_symbols() {
            return Err(CtcError::LabelOutOfRange {
                id: label,
                size: grid.num_symbols(),
            });
        }
    }
    let repeats = adjacent_repeats(y);
    if y.len() + repeats > grid.frames() {
        return Err(CtcError::UnreachableTarget {
            frames: grid.frames(),
            target_len: y.len(),
            repeats,
        });
    }
    Ok(())
}

/// Exact loss and gradient of `-log P(y|X)`.
#[derive(Debug, Clone)]
pub struct CtcLossResult {
    /// `-log P(y|X)`; finite and nonnegative up to rounding whenever y is
    /// reachable.
    pub loss: f64,
    /// d loss / d log-prob, a T x |L'| matrix.
    pub grad_log_probs: Matrix,
    /// State-occupancy posteriors gamma, (2U+1) x T, when requested.
    pub occupancy: Option<Matrix>,
}

impl CtcLossResult {
    /// Re-expresses the gradient with respect to pre-softmax logits:
    /// `d/d logit_k = d/d logp_k - softmax_k * sum_j d/d logp_j`.
    /// Rows of the result sum to zero.
    pub fn grad_logits(&self, grid: &PosteriorGrid) -> Matrix {
        grad_log_probs_to_logits(&self.grad_log_probs, grid)
    }
}

/// Chain rule through a row-wise log-softmax.
pub fn grad_log_probs_to_logits(grad_log_probs: &Matrix, grid: &PosteriorGrid) -> Matrix {
    let (t, k) = grad_log_probs.shape();
    let mut out = Matrix::zeros(t, k);
    for r in 0..t {
        let row_sum: f64 = grad_log_probs.row(r).iter().sum();
        for c in 0..k {
            let v = grad_log_probs.get(r, c) - grid.prob(r, c) * row_sum;
            out.set(r, c, v);
        }
    }
    out
}

#[inline]
fn aug_label(y: &[usize], s: usize) -> usize {
    if s.is_multiple_of(2) {
        BLANK_ID
    } else {
        y[s / 2]
    }
}

/// Whether state s can be entered from s-2 (skipping a blank): only when s
/// is a label state whose label differs from the label two states back.
#[inline]
fn allows_skip(y: &[usize], s: usize) -> bool {
    s % 2 == 1 && s >= 2 && y[s / 2] != y[s / 2 - 1]
}

/// CTC loss via forward-backward. See [`ctc_loss_full`] to also obtain the
/// state-occupancy posteriors.
pub fn ctc_loss(grid: &PosteriorGrid, y: &[usize]) -> Result<CtcLossResult, CtcError> {
    ctc_loss_full(grid, y, false)
}

pub fn ctc_loss_full(
    grid: &PosteriorGrid,
    y: &[usize],
    want_occupancy: bool,
) -> Result<CtcLossResult, CtcError> {
    check_target(grid, y)?;
    let t_len = grid.frames();
    let s_len = 2 * y.len() + 1;
    let ninf = f64::NEG_INFINITY;

    // Forward: alpha[t][s] includes the emission at frame t.
    let mut alpha = vec![vec![ninf; s_len]; t_len];
    alpha[0][0] = grid.log_prob(0, BLANK_ID);
    if s_len > 1 {
        alpha[0][1] = grid.log_prob(0, aug_label(y, 1));
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut acc = alpha[t - 1][s];
            if s >= 1 {
                acc = log_add(acc, alpha[t - 1][s - 1]);
            }
            if allows_skip(y, s) {
                acc = log_add(acc, alpha[t - 1][s - 2]);
            }
            if acc != ninf {
                alpha[t][s] = acc + grid.log_prob(t, aug_label(y, s));
            }
        }
    }

    let mut log_p = alpha[t_len - 1][s_len - 1];
    if s_len > 1 {
        log_p = log_add(log_p, alpha[t_len - 1][s_len - 2]);
    }
    if log_p == ninf {
        // reachability was checked above, so this would be a numeric failure
        return Err(CtcError::InvalidGrid {
            what: "zero total path probability for a reachable target".into(),
        });
    }

    // Backward: beta[t][s] includes the emission at frame t.
    let mut beta = vec![vec![ninf; s_len]; t_len];
    beta[t_len - 1][s_len - 1] = grid.log_prob(t_len - 1, BLANK_ID);
    if s_len > 1 {
        beta[t_len - 1][s_len - 2] = grid.log_prob(t_len - 1, aug_label(y, s_len - 2));
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut acc = beta[t + 1][s];
            if s + 1 < s_len {
                acc = log_add(acc, beta[t + 1][s + 1]);
            }
            if s + 2 < s_len && allows_skip(y, s + 2) {
                acc = log_add(acc, beta[t + 1][s + 2]);
            }
            if acc != ninf {
                beta[t][s] = acc + grid.log_prob(t, aug_label(y, s));
            }
        }
    }

    // gamma[t][s] = P(state s at frame t | y, X)
    //            = alpha*beta / (p_t(label(s)) * P(y|X)).
    // d loss / d logp_t(k) = -sum over states with label k of gamma.
    let mut grad = Matrix::zeros(t_len, grid.num_symbols());
    let mut occupancy = want_occupancy.then(|| Matrix::zeros(s_len, t_len));
    for t in 0..t_len {
        for s in 0..s_len {
            if alpha[t][s] == ninf || beta[t][s] == ninf {
                continue;
            }
            let label = aug_label(y, s);
            let log_gamma = alpha[t][s] + beta[t][s] - grid.log_prob(t, label) - log_p;
            let gamma = log_gamma.exp();
            let cur = grad.get(t, label);
            grad.set(t, label, cur - gamma);
            if let Some(occ) = occupancy.as_mut() {
                occ.set(s, t, gamma);
            }
        }
    }

    Ok(CtcLossResult {
        loss: -log_p,
        grad_log_probs: grad,
        occupancy,
    })
}

/// Total probability of all length-T paths over L'. Equal to 1 for a
/// normalized grid, used as a sanity anchor in tests.
pub fn brute_force_total(grid: &PosteriorGrid) -> f64 {
    let mut total = 0.0;
    let mut path = vec![0usize; grid.frames()];
    loop {
        let mut p = 1.0;
        for (t, &k) in path.iter().enumerate() {
            p *= grid.prob(t, k);
        }
        total += p;
        if !advance(&mut path, grid.num_symbols()) {
            break;
        }
    }
    total
}

fn advance(path: &mut [usize], base: usize) -> bool {
    for digit in path.iter_mut().rev() {
        *digit += 1;
        if *digit < base {
            return true;
        }
        *digit = 0;
    }
    false
}

/// Marginal probability of y by full path enumeration, in plain probability
/// space. Guarded to T <= 12 and |L'| <= 4; exponential in T.
pub fn brute_force_prob(grid: &PosteriorGrid, y: &[usize]) -> Result<f64, CtcError> {
    if grid.frames() > 12 || grid.num_symbols() > 4 {
        return Err(CtcError::CapacityExceeded {
            what: format!(
                "brute force enumeration limited to T <= 12, |L'| <= 4; got T = {}, |L'| = {}",
                grid.frames(),
                grid.num_symbols()
            ),
        });
    }
    for (pos, &label) in y.iter().enumerate() {
        if label == BLANK_ID {
            return Err(CtcError::BlankInTarget { pos });
        }
        if label >= grid.num_symbols() {
            return Err(CtcError::LabelOutOfRange {
                id: label,
                size: grid.num_symbols(),
            });
        }
    }

    let mut total = 0.0;
    let mut path = vec![0usize; grid.frames()];
    loop {
        if collapse(&path) == y {
            let mut p = 1.0;
            for (t, &k) in path.iter().enumerate() {
                p *= grid.prob(t, k);
            }
            total += p;
        }
        if !advance(&mut path, grid.num_symbols()) {
            break;
        }
    }
    Ok(total)
}

/// Every target over label ids 1..=labels with length 0..=max_len.
#[cfg(test)]
pub(crate) fn all_targets(labels: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for t in &frontier {
            for l in 1..=labels {
                let mut e = t.clone();
                e.push(l);
                next.push(e);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
