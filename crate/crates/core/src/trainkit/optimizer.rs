//! Nesterov-accelerated gradient descent, in the standard reformulation
//! that evaluates gradients at the stored (lookahead) parameters:
//!   v <- mu * v - lr * g
//!   theta <- theta + mu * v - lr * g

use crate::numkit::Matrix;

pub fn nesterov_step(
    params: &mut [&mut Matrix],
    grads: &[Matrix],
    velocity: &mut [Matrix],
    lr: f64,
    momentum: f64,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), velocity.len());
    for ((theta, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        debug_assert_eq!(theta.shape(), g.shape());
        debug_assert_eq!(theta.shape(), v.shape());
        for ((tv, &gv), vv) in theta
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(v.data_mut().iter_mut())
        {
            *vv = momentum * *vv - lr * gv;
            *tv += momentum * *vv - lr * gv;
        }
    }
}

/// Zero velocity buffers shaped like the given parameters.
pub fn zero_velocity(params: &[&Matrix]) -> Vec<Matrix> {
    params
        .iter()
        .map(|p| Matrix::zeros(p.rows(), p.cols()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_momentum_is_plain_gradient_descent() {
        let mut theta = Matrix::from_rows(&[vec![1.0, -2.0]]);
        let grad = Matrix::from_rows(&[vec![0.5, 0.25]]);
        let mut vel = vec![Matrix::zeros(1, 2)];
        nesterov_step(&mut [&mut theta], &[grad], &mut vel, 0.1, 0.0);
        assert!((theta.get(0, 0) - 0.95).abs() < 1e-15);
        assert!((theta.get(0, 1) + 2.025).abs() < 1e-15);
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // f(theta) = theta^2 / 2, gradient theta
        let mut theta = Matrix::from_rows(&[vec![1.0]]);
        let mut vel = vec![Matrix::zeros(1, 1)];
        let mut steps = 0;
        for _ in 0..200 {
            steps += 1;
            let g = Matrix::from_rows(&[vec![theta.get(0, 0)]]);
            nesterov_step(&mut [&mut theta], &[g], &mut vel, 0.1, 0.9);
            if theta.get(0, 0).abs() < 1e-6 {
                break;
            }
        }
        assert!(
            theta.get(0, 0).abs() < 1e-6,
            "still at {} after {steps} steps",
            theta.get(0, 0)
        );
    }

    #[test]
    fn update_is_deterministic() {
        let run = || {
            let mut theta = Matrix::from_rows(&[vec![0.3, 0.7]]);
            let mut vel = vec![Matrix::zeros(1, 2)];
            for i in 0..10 {
                let g = theta.scale(0.5 + i as f64 * 0.01);
                nesterov_step(&mut [&mut theta], &[g], &mut vel, 0.05, 0.9);
            }
            (theta.get(0, 0).to_bits(), theta.get(0, 1).to_bits())
        };
        assert_eq!(run(), run());
    }
}
