//! Randomized contract checks for operators, projectors and proximal maps.
//!
//! These run inside the test suites but are ordinary library code so the
//! CLI can validate a freshly built problem on demand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{FieldShape, GridField, StackedVar};
use crate::linop::{LinOp, Projector};

/// A stacked variable with i.i.d. uniform(-1, 1) entries.
pub fn random_stacked(shapes: &[FieldShape], seed: u64) -> StackedVar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts = shapes
        .iter()
        .map(|s| {
            let n = s.rows * s.cols * s.kind.channels();
            let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            GridField::from_real(s.rows, s.cols, s.kind, data).expect("shape is consistent")
        })
        .collect();
    StackedVar::new(parts)
}

/// Largest relative violation of <K x, y> = <x, K* y> over random pairs.
pub fn adjoint_defect(op: &dyn LinOp, pairs: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..pairs {
        let x = random_stacked(&op.domain(), seed.wrapping_add(2 * k as u64));
        let y = random_stacked(&op.codomain(), seed.wrapping_add(2 * k as u64 + 1));
        let lhs = op.apply(&x).inner(&y);
        let rhs = x.inner(&op.adjoint(&y));
        let scale = x.norm() * y.norm();
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    worst
}

/// Violations of the three projector laws over random fields.
#[derive(Clone, Copy, Debug)]
pub struct ProjectorDefects {
    /// max ||P(Px) - Px|| / ||x||
    pub idempotency: f64,
    /// max |<Px, y> - <x, Py>| / (||x|| ||y||)
    pub self_adjointness: f64,
    /// max of ||Px + Pperp(x) - x|| / ||x|| and ||P(Pperp x)|| / ||x||
    pub complement: f64,
}

pub fn projector_defects(
    p: &Projector,
    shapes: &[FieldShape],
    trials: usize,
    seed: u64,
) -> ProjectorDefects {
    let mut d = ProjectorDefects { idempotency: 0.0, self_adjointness: 0.0, complement: 0.0 };
    for k in 0..trials {
        let x = random_stacked(shapes, seed.wrapping_add(2 * k as u64));
        let y = random_stacked(shapes, seed.wrapping_add(2 * k as u64 + 1));
        let nx = x.norm().max(1e-300);
        let px = p.apply(&x);

        let mut pp = p.apply(&px);
        pp.add_scaled(-1.0, &px);
        d.idempotency = d.idempotency.max(pp.norm() / nx);

        let lhs = px.inner(&y);
        let rhs = x.inner(&p.apply(&y));
        d.self_adjointness = d.self_adjointness.max((lhs - rhs).abs() / (nx * y.norm()));

        let perp = p.complement(&x);
        let mut sum = px.clone();
        sum.add_scaled(1.0, &perp);
        sum.add_scaled(-1.0, &x);
        d.complement = d.complement.max(sum.norm() / nx);
        d.complement = d.complement.max(p.apply(&perp).norm() / nx);
    }
    d
}

/// Largest violation of ||prox(a) - prox(b)|| <= ||a - b|| over random pairs.
pub fn nonexpansiveness_defect(
    prox: impl Fn(&StackedVar) -> StackedVar,
    shapes: &[FieldShape],
    pairs: usize,
    seed: u64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..pairs {
        let a = random_stacked(shapes, seed.wrapping_add(2 * k as u64));
        let b = random_stacked(shapes, seed.wrapping_add(2 * k as u64 + 1));
        let mut pa = prox(&a);
        pa.add_scaled(-1.0, &prox(&b));
        let mut ab = a.clone();
        ab.add_scaled(-1.0, &b);
        worst = worst.max(pa.norm() - ab.norm());
    }
    worst
}
