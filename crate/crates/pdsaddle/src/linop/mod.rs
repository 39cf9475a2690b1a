//! Linear operators with adjoints and spectral-norm bounds.
//!
//! Gradients use forward differences with replication at the last row and
//! column (the difference is zero past the boundary), which keeps the usual
//! `||grad||^2 <= 8` bound valid on the unit cell. Adjoints are the exact
//! discrete transposes of those stencils under the field inner products.

mod power;
mod projector;

pub use power::power_iteration;
pub use projector::{fourier_mask_projector, Projector};

use crate::error::{PdError, PdResult};
use crate::grid::fft::Fft2;
use crate::grid::{FieldKind, FieldShape, GridField, StackedVar};

/// A bounded linear map between stacked grid variables.
pub trait LinOp: Send + Sync {
    fn apply(&self, x: &StackedVar) -> StackedVar;
    fn adjoint(&self, y: &StackedVar) -> StackedVar;
    /// An upper bound on the squared operator norm.
    fn norm_sq_bound(&self) -> f64;
    fn domain(&self) -> Vec<FieldShape>;
    fn codomain(&self) -> Vec<FieldShape>;
}

// Forward row difference, zero past the last row.
fn d_row(u: &GridField, ch: usize, out: &mut GridField, out_ch: usize, add: bool) {
    let (rows, cols) = (u.rows(), u.cols());
    for r in 0..rows {
        for c in 0..cols {
            let v = if r + 1 < rows { u.at(r + 1, c, ch) - u.at(r, c, ch) } else { 0.0 };
            let cur = if add { out.at(r, c, out_ch) } else { 0.0 };
            out.set(r, c, out_ch, cur + v);
        }
    }
}

fn d_col(u: &GridField, ch: usize, out: &mut GridField, out_ch: usize, add: bool) {
    let (rows, cols) = (u.rows(), u.cols());
    for r in 0..rows {
        for c in 0..cols {
            let v = if c + 1 < cols { u.at(r, c + 1, ch) - u.at(r, c, ch) } else { 0.0 };
            let cur = if add { out.at(r, c, out_ch) } else { 0.0 };
            out.set(r, c, out_ch, cur + v);
        }
    }
}

// Transpose of d_row.
fn d_row_t(p: &GridField, ch: usize, out: &mut GridField, out_ch: usize, add: bool) {
    let (rows, cols) = (p.rows(), p.cols());
    for r in 0..rows {
        for c in 0..cols {
            let mut v = 0.0;
            if r >= 1 {
                v += p.at(r - 1, c, ch);
            }
            if r + 1 < rows {
                v -= p.at(r, c, ch);
            }
            let cur = if add { out.at(r, c, out_ch) } else { 0.0 };
            out.set(r, c, out_ch, cur + v);
        }
    }
}

fn d_col_t(p: &GridField, ch: usize, out: &mut GridField, out_ch: usize, add: bool) {
    let (rows, cols) = (p.rows(), p.cols());
    for r in 0..rows {
        for c in 0..cols {
            let mut v = 0.0;
            if c >= 1 {
                v += p.at(r, c - 1, ch);
            }
            if c + 1 < cols {
                v -= p.at(r, c, ch);
            }
            let cur = if add { out.at(r, c, out_ch) } else { 0.0 };
            out.set(r, c, out_ch, cur + v);
        }
    }
}

/// Discrete gradient of a scalar field as a 2-vector field.
pub fn grad(u: &GridField) -> GridField {
    assert_eq!(u.kind(), FieldKind::Scalar, "grad expects a scalar field");
    let mut out = GridField::zeros(u.rows(), u.cols(), FieldKind::Vector2);
    d_row(u, 0, &mut out, 0, false);
    d_col(u, 0, &mut out, 1, false);
    out
}

/// Adjoint of [`grad`] (the negative discrete divergence).
pub fn grad_adjoint(y: &GridField) -> GridField {
    assert_eq!(y.kind(), FieldKind::Vector2, "grad_adjoint expects a 2-vector field");
    let mut out = GridField::zeros(y.rows(), y.cols(), FieldKind::Scalar);
    d_row_t(y, 0, &mut out, 0, false);
    d_col_t(y, 1, &mut out, 0, true);
    out
}

/// Symmetrised gradient of a 2-vector field: (d1 w1, d2 w2, (d2 w1 + d1 w2)/2).
pub fn symgrad(w: &GridField) -> GridField {
    assert_eq!(w.kind(), FieldKind::Vector2, "symgrad expects a 2-vector field");
    let mut out = GridField::zeros(w.rows(), w.cols(), FieldKind::SymTensor2);
    d_row(w, 0, &mut out, 0, false);
    d_col(w, 1, &mut out, 1, false);
    let mut off = GridField::zeros(w.rows(), w.cols(), FieldKind::Scalar);
    d_col(w, 0, &mut off, 0, false);
    d_row(w, 1, &mut off, 0, true);
    for r in 0..w.rows() {
        for c in 0..w.cols() {
            out.set(r, c, 2, 0.5 * off.at(r, c, 0));
        }
    }
    out
}

/// Adjoint of [`symgrad`] under the tensor inner product that weights the
/// off-diagonal channel twice.
pub fn symgrad_adjoint(q: &GridField) -> GridField {
    assert_eq!(q.kind(), FieldKind::SymTensor2, "symgrad_adjoint expects a tensor field");
    let mut out = GridField::zeros(q.rows(), q.cols(), FieldKind::Vector2);
    d_row_t(q, 0, &mut out, 0, false);
    d_col_t(q, 2, &mut out, 0, true);
    d_col_t(q, 1, &mut out, 1, false);
    d_row_t(q, 2, &mut out, 1, true);
    out
}

/// K = grad on scalar images, as an operator on one-part variables.
#[derive(Clone, Debug)]
pub struct GradOp {
    rows: usize,
    cols: usize,
}

impl GradOp {
    pub fn new(rows: usize, cols: usize) -> Self {
        GradOp { rows, cols }
    }
}

impl LinOp for GradOp {
    fn apply(&self, x: &StackedVar) -> StackedVar {
        StackedVar::single(grad(x.part(0)))
    }

    fn adjoint(&self, y: &StackedVar) -> StackedVar {
        StackedVar::single(grad_adjoint(y.part(0)))
    }

    fn norm_sq_bound(&self) -> f64 {
        8.0
    }

    fn domain(&self) -> Vec<FieldShape> {
        vec![FieldShape::new(self.rows, self.cols, FieldKind::Scalar)]
    }

    fn codomain(&self) -> Vec<FieldShape> {
        vec![FieldShape::new(self.rows, self.cols, FieldKind::Vector2)]
    }
}

/// The TGV² cascade operator K(u, w) = (grad u - w, symgrad w) with adjoint
/// K*(y1, y2) = (grad* y1, -y1 + symgrad* y2).
#[derive(Clone, Debug)]
pub struct Tgv2Op {
    rows: usize,
    cols: usize,
}

impl Tgv2Op {
    pub fn new(rows: usize, cols: usize) -> Self {
        Tgv2Op { rows, cols }
    }

    /// Norm bound for the forward-difference discretisation on unit cells.
    pub const NORM_SQ_BOUND: f64 = 11.4;
}

impl LinOp for Tgv2Op {
    fn apply(&self, x: &StackedVar) -> StackedVar {
        let (u, w) = (x.part(0), x.part(1));
        assert_eq!(w.kind(), FieldKind::Vector2, "Tgv2Op expects (scalar, 2-vector)");
        let mut y1 = grad(u);
        y1.add_scaled(-1.0, w);
        StackedVar::new(vec![y1, symgrad(w)])
    }

    fn adjoint(&self, y: &StackedVar) -> StackedVar {
        let (y1, y2) = (y.part(0), y.part(1));
        let mut w = symgrad_adjoint(y2);
        w.add_scaled(-1.0, y1);
        StackedVar::new(vec![grad_adjoint(y1), w])
    }

    fn norm_sq_bound(&self) -> f64 {
        Self::NORM_SQ_BOUND
    }

    fn domain(&self) -> Vec<FieldShape> {
        vec![
            FieldShape::new(self.rows, self.cols, FieldKind::Scalar),
            FieldShape::new(self.rows, self.cols, FieldKind::Vector2),
        ]
    }

    fn codomain(&self) -> Vec<FieldShape> {
        vec![
            FieldShape::new(self.rows, self.cols, FieldKind::Vector2),
            FieldShape::new(self.rows, self.cols, FieldKind::SymTensor2),
        ]
    }
}

/// Fourier-diagonal multiplier: x -> ifft2(a_hat .* fft2(x)). The adjoint
/// multiplies by the conjugate spectrum.
pub struct FourierDiagOp {
    a_hat: GridField,
    fft: Fft2,
    bound: f64,
}

impl FourierDiagOp {
    pub fn new(a_hat: GridField) -> PdResult<Self> {
        if a_hat.kind() != FieldKind::Spectral {
            return Err(PdError::Invalid("FourierDiagOp needs a spectral multiplier".into()));
        }
        if !a_hat.is_conj_symmetric(1e-10) {
            return Err(PdError::Invalid(
                "multiplier spectrum is not conjugate-symmetric; the operator would not map real fields to real fields".into(),
            ));
        }
        let bound = a_hat.max_abs().powi(2);
        let fft = Fft2::new(a_hat.rows(), a_hat.cols());
        Ok(FourierDiagOp { a_hat, fft, bound })
    }

    pub fn spectrum(&self) -> &GridField {
        &self.a_hat
    }

    fn multiply(&self, x: &StackedVar, conjugate: bool) -> StackedVar {
        let mut xhat = self.fft.forward(x.part(0)).expect("scalar input expected");
        for (v, a) in xhat.complex_mut().iter_mut().zip(self.a_hat.complex()) {
            *v *= if conjugate { a.conj() } else { *a };
        }
        StackedVar::single(self.fft.inverse(&xhat).expect("spectral shape matches"))
    }
}

impl LinOp for FourierDiagOp {
    fn apply(&self, x: &StackedVar) -> StackedVar {
        self.multiply(x, false)
    }

    fn adjoint(&self, y: &StackedVar) -> StackedVar {
        self.multiply(y, true)
    }

    fn norm_sq_bound(&self) -> f64 {
        self.bound
    }

    fn domain(&self) -> Vec<FieldShape> {
        vec![FieldShape::new(self.a_hat.rows(), self.a_hat.cols(), FieldKind::Scalar)]
    }

    fn codomain(&self) -> Vec<FieldShape> {
        self.domain()
    }
}

/// Restriction to observed pixels (represented on the full grid, with zeros
/// on the unobserved set). S*S is the pixel-mask projector.
#[derive(Clone, Debug)]
pub struct SubsampleOp {
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
}

impl SubsampleOp {
    pub fn new(rows: usize, cols: usize, mask: Vec<bool>) -> PdResult<Self> {
        if mask.len() != rows * cols {
            return Err(PdError::Shape("mask length does not match grid".into()));
        }
        if !mask.iter().any(|&m| m) {
            return Err(PdError::Invalid("subsampling mask observes no pixels".into()));
        }
        Ok(SubsampleOp { rows, cols, mask })
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    fn restrict(&self, x: &StackedVar) -> StackedVar {
        let mut out = x.part(0).clone();
        for (v, &keep) in out.real_mut().iter_mut().zip(&self.mask) {
            if !keep {
                *v = 0.0;
            }
        }
        StackedVar::single(out)
    }
}

impl LinOp for SubsampleOp {
    fn apply(&self, x: &StackedVar) -> StackedVar {
        self.restrict(x)
    }

    fn adjoint(&self, y: &StackedVar) -> StackedVar {
        self.restrict(y)
    }

    fn norm_sq_bound(&self) -> f64 {
        1.0
    }

    fn domain(&self) -> Vec<FieldShape> {
        vec![FieldShape::new(self.rows, self.cols, FieldKind::Scalar)]
    }

    fn codomain(&self) -> Vec<FieldShape> {
        self.domain()
    }
}

/// The identity, for problems where K = I (e.g. Lasso in saddle form).
#[derive(Clone, Debug)]
pub struct IdentityOp {
    shapes: Vec<FieldShape>,
}

impl IdentityOp {
    pub fn new(shapes: Vec<FieldShape>) -> Self {
        IdentityOp { shapes }
    }
}

impl LinOp for IdentityOp {
    fn apply(&self, x: &StackedVar) -> StackedVar {
        x.clone()
    }

    fn adjoint(&self, y: &StackedVar) -> StackedVar {
        y.clone()
    }

    fn norm_sq_bound(&self) -> f64 {
        1.0
    }

    fn domain(&self) -> Vec<FieldShape> {
        self.shapes.clone()
    }

    fn codomain(&self) -> Vec<FieldShape> {
        self.shapes.clone()
    }
}

/// K restricted to a projected subspace: x -> K(Px). Used to estimate
/// ||K P||^2 by power iteration when no closed form exists.
pub struct ProjectedOp<K: LinOp> {
    op: K,
    proj: Projector,
    bound: f64,
}

impl<K: LinOp> ProjectedOp<K> {
    pub fn new(op: K, proj: Projector) -> Self {
        let bound = op.norm_sq_bound();
        ProjectedOp { op, proj, bound }
    }
}

impl<K: LinOp> LinOp for ProjectedOp<K> {
    fn apply(&self, x: &StackedVar) -> StackedVar {
        self.op.apply(&self.proj.apply(x))
    }

    fn adjoint(&self, y: &StackedVar) -> StackedVar {
        self.proj.apply(&self.op.adjoint(y))
    }

    fn norm_sq_bound(&self) -> f64 {
        self.bound
    }

    fn domain(&self) -> Vec<FieldShape> {
        self.op.domain()
    }

    fn codomain(&self) -> Vec<FieldShape> {
        self.op.codomain()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::{adjoint_defect, random_stacked};
    use crate::grid::synth::gaussian_blur_spectrum;
    use rustfft::num_complex::Complex64;

    #[test]
    fn grad_of_constant_is_zero() {
        let u = GridField::constant(9, 7, 4.2);
        let g = grad(&u);
        assert!(g.max_abs() == 0.0);
    }

    #[test]
    fn symgrad_of_constant_is_zero() {
        let mut w = GridField::zeros(6, 6, FieldKind::Vector2);
        for v in w.real_mut() {
            *v = 1.5;
        }
        assert!(symgrad(&w).max_abs() == 0.0);
    }

    #[test]
    fn grad_adjoint_identity_random_pairs() {
        let op = GradOp::new(16, 16);
        let defect = adjoint_defect(&op, 100, 21);
        assert!(defect <= 1e-10, "adjoint defect {defect}");
    }

    #[test]
    fn tgv2_adjoint_identity_random_pairs() {
        let op = Tgv2Op::new(12, 9);
        let defect = adjoint_defect(&op, 100, 22);
        assert!(defect <= 1e-10, "adjoint defect {defect}");
    }

    #[test]
    fn subsample_adjoint_and_projection_laws() {
        let mask: Vec<bool> = (0..48).map(|i| i % 3 != 0).collect();
        let op = SubsampleOp::new(6, 8, mask).unwrap();
        assert!(adjoint_defect(&op, 50, 23) <= 1e-12);
        // S*S idempotent and self-adjoint on random fields.
        let x = random_stacked(&op.domain(), 5);
        let ssx = op.adjoint(&op.apply(&x));
        let ssx2 = op.adjoint(&op.apply(&ssx));
        let mut diff = ssx.clone();
        diff.add_scaled(-1.0, &ssx2);
        assert!(diff.norm() <= 1e-14);
    }

    #[test]
    fn subsample_rejects_empty_mask() {
        assert!(SubsampleOp::new(2, 2, vec![false; 4]).is_err());
    }

    #[test]
    fn tgv2_on_exact_gradient_pair_kills_first_block() {
        let u = GridField::scalar_from_fn(8, 8, |r, c| (r as f64).powi(2) + 3.0 * c as f64);
        let w = grad(&u);
        let op = Tgv2Op::new(8, 8);
        let y = op.apply(&StackedVar::new(vec![u, w]));
        assert!(y.part(0).max_abs() <= 1e-12);
    }

    #[test]
    fn fourier_diag_identity_and_zero() {
        let n = 8;
        let ones = GridField::from_complex(n, n, vec![Complex64::new(1.0, 0.0); n * n]).unwrap();
        let op = FourierDiagOp::new(ones).unwrap();
        let x = random_stacked(&op.domain(), 1);
        let y = op.apply(&x);
        let mut diff = y.clone();
        diff.add_scaled(-1.0, &x);
        assert!(diff.norm() <= 1e-12 * x.norm());

        let zeros = GridField::zeros(n, n, FieldKind::Spectral);
        let zop = FourierDiagOp::new(zeros).unwrap();
        assert!(zop.apply(&x).norm() <= 1e-14);
    }

    #[test]
    fn fourier_diag_rejects_asymmetric_spectrum() {
        let n = 4;
        let mut data = vec![Complex64::new(1.0, 0.0); n * n];
        data[1] = Complex64::new(0.0, 1.0); // partner at n-1 stays 1.0
        let spec = GridField::from_complex(n, n, data).unwrap();
        assert!(FourierDiagOp::new(spec).is_err());
    }

    #[test]
    fn fourier_diag_matches_dense_dft_materialization() {
        // Oracle: build F* diag(a) F explicitly from the DFT definition and
        // compare matrix-vector products on a 4x4 grid.
        let n = 4usize;
        let spec = gaussian_blur_spectrum(n, n, 1.3).unwrap();
        let op = FourierDiagOp::new(spec.clone()).unwrap();

        let npix = n * n;
        let mut dense = vec![Complex64::new(0.0, 0.0); npix * npix];
        let omega = |j: usize, k: usize, m: usize| -> Complex64 {
            let ang = -2.0 * std::f64::consts::PI * (j * k % m) as f64 / m as f64;
            Complex64::new(ang.cos(), ang.sin())
        };
        // dense[p,q] = sum_xi conj(F[xi,p]) a(xi) F[xi,q], F unitary DFT.
        for pr in 0..n {
            for pc in 0..n {
                for qr in 0..n {
                    for qc in 0..n {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for xr in 0..n {
                            for xc in 0..n {
                                let f_p = omega(xr, pr, n) * omega(xc, pc, n);
                                let f_q = omega(xr, qr, n) * omega(xc, qc, n);
                                acc += f_p.conj()
                                    * spec.complex()[xr * n + xc]
                                    * f_q
                                    / npix as f64;
                            }
                        }
                        dense[(pr * n + pc) * npix + (qr * n + qc)] = acc;
                    }
                }
            }
        }

        let x = random_stacked(&op.domain(), 9);
        let y = op.apply(&x);
        for p in 0..npix {
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..npix {
                acc += dense[p * npix + q] * x.part(0).real()[q];
            }
            assert!(acc.im.abs() <= 1e-10);
            assert!((acc.re - y.part(0).real()[p]).abs() <= 1e-10);
        }
    }

    #[test]
    fn fourier_diag_output_is_real() {
        let spec = gaussian_blur_spectrum(16, 16, 2.0).unwrap();
        let op = FourierDiagOp::new(spec).unwrap();
        let x = random_stacked(&op.domain(), 2);
        let y = op.apply(&x);
        assert!(y.part(0).is_real());
        assert!(adjoint_defect(&op, 50, 3) <= 1e-10);
    }
}
