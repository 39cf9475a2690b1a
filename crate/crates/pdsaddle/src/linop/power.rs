//! Power iteration for squared operator norms.

use crate::check::random_stacked;
use crate::linop::LinOp;

/// Estimates ||op||^2 as the largest eigenvalue of op* op by normalized
/// power iteration from a seeded random start. The Rayleigh estimate is
/// monotone nondecreasing in the iteration count, so more iterations never
/// hurt. A zero operator yields 0.
pub fn power_iteration(op: &dyn LinOp, iters: usize, seed: u64) -> f64 {
    assert!(iters >= 1, "power_iteration needs at least one iteration");
    let mut v = random_stacked(&op.domain(), seed);
    let n = v.norm();
    if n == 0.0 {
        return 0.0;
    }
    v.scale(1.0 / n);
    for _ in 0..iters {
        let w = op.adjoint(&op.apply(&v));
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w.scaled(1.0 / wn);
    }
    op.apply(&v).norm_sq()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FieldKind, FieldShape, GridField};
    use crate::linop::{FourierDiagOp, GradOp, IdentityOp, Tgv2Op};
    use rustfft::num_complex::Complex64;

    #[test]
    fn identity_norm_is_one() {
        let op = IdentityOp::new(vec![FieldShape::new(6, 5, FieldKind::Scalar)]);
        let est = power_iteration(&op, 10, 0);
        assert!((est - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn fourier_diag_norm_is_max_magnitude_squared() {
        // Multiplier values {0.5, 2.0} at conjugate-symmetric positions.
        let n = 4;
        let mut data = vec![Complex64::new(0.5, 0.0); n * n];
        data[0] = Complex64::new(2.0, 0.0);
        data[2 * n + 2] = Complex64::new(2.0, 0.0); // self-conjugate index
        let spec = GridField::from_complex(n, n, data).unwrap();
        let op = FourierDiagOp::new(spec).unwrap();
        let est = power_iteration(&op, 200, 1);
        assert!((est - 4.0).abs() <= 1e-6, "estimate {est}");
        assert!(est <= op.norm_sq_bound() * 1.001);
    }

    #[test]
    fn gradient_norm_on_128_grid() {
        let op = GradOp::new(128, 128);
        let est = power_iteration(&op, 400, 2);
        assert!((7.0..=8.0).contains(&est), "estimate {est}");
        assert!(est <= op.norm_sq_bound() * 1.001);
    }

    #[test]
    fn tgv2_norm_within_bound() {
        let op = Tgv2Op::new(64, 64);
        let est = power_iteration(&op, 300, 3);
        assert!(est <= 11.4 * 1.001, "estimate {est}");
        assert!(est > 1.0);
    }

    #[test]
    fn estimate_is_monotone_in_iterations() {
        let op = GradOp::new(32, 32);
        let mut last = 0.0;
        for iters in [1, 2, 4, 8, 16, 32, 64] {
            let est = power_iteration(&op, iters, 4);
            assert!(est >= last - 1e-12, "estimate dropped: {est} < {last}");
            last = est;
        }
    }
}
