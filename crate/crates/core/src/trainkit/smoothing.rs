//! Label-smoothed CTC objective: a convex combination of the CTC loss with
//! the mean per-frame cross-entropy of the posterior against the uniform
//! distribution over L'.
//!
//!   L = (1 - lambda) * L_ctc + lambda * (1/T) * sum_t CE(uniform || P(.,t))

use crate::ctc::{ctc_loss, PosteriorGrid};
use crate::error::CtcError;
use crate::numkit::Matrix;

#[derive(Debug, Clone)]
pub struct SmoothedLossResult {
    pub loss: f64,
    /// d loss / d log-prob, T x |L'|.
    pub grad_log_probs: Matrix,
}

pub fn smoothed_loss(
    grid: &PosteriorGrid,
    y: &[usize],
    lambda_ls: f64,
) -> Result<SmoothedLossResult, CtcError> {
    if !(0.0..=1.0).contains(&lambda_ls) {
        return Err(CtcError::InvalidGrid {
            what: format!("label smoothing weight must be in [0, 1], got {lambda_ls}"),
        });
    }
    let t = grid.frames();
    let k = grid.num_symbols();

    // CE(uniform || p_t) = -(1/K) * sum_k logp_t(k), averaged over frames
    let mut uniform_ce = 0.0;
    for r in 0..t {
        for c in 0..k {
            uniform_ce -= grid.log_prob(r, c);
        }
    }
    uniform_ce /= (t * k) as f64;

    if lambda_ls == 1.0 {
        let grad = Matrix::filled(t, k, -1.0 / (t * k) as f64);
        return Ok(SmoothedLossResult {
            loss: uniform_ce,
            grad_log_probs: grad,
        });
    }

    let ctc = ctc_loss(grid, y)?;
    let loss = (1.0 - lambda_ls) * ctc.loss + lambda_ls * uniform_ce;
    let mut grad = ctc.grad_log_probs;
    let smooth_term = -lambda_ls / (t * k) as f64;
    for v in grad.data_mut() {
        *v = (1.0 - lambda_ls) * *v + smooth_term;
    }
    Ok(SmoothedLossResult {
        loss,
        grad_log_probs: grad,
    })
}
