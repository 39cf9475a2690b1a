//! Resolvent (proximal) maps for the bundled fidelity and regularisation
//! functionals, including the subspace-weighted quadratic resolvents that
//! consume both step lengths tau and tau_perp.

use nalgebra::{DMatrix, DVector};

use crate::error::{PdError, PdResult};
use crate::grid::fft::Fft2;
use crate::grid::{FieldKind, GridField, StackedVar};

/// Scalar step data a proximal map may consume.
#[derive(Clone, Copy, Debug)]
pub struct StepView {
    pub tau: f64,
    pub tau_perp: f64,
    pub sigma: f64,
}

/// A resolvent map evaluated at a point with the current step scalars.
pub trait ProxMap: Send + Sync {
    fn evaluate(&self, point: &StackedVar, step: &StepView) -> PdResult<StackedVar>;
}

/// Resolvent of t * d(1/2 ||f - .||^2): (x + t f) / (1 + t).
pub fn prox_quad_identity(x: &GridField, t: f64, f: &GridField) -> PdResult<GridField> {
    if t <= 0.0 {
        return Err(PdError::Invalid("prox step must be positive".into()));
    }
    if !x.same_layout(f) {
        return Err(PdError::Shape("point and data fields disagree".into()));
    }
    Ok(GridField::lincomb(1.0 / (1.0 + t), x, t / (1.0 + t), f))
}

/// Solves (I + T A*A) x' = x + T A*f per frequency for A = F* a_hat F and
/// T = tau P + tau_perp P_perp with P the 0/1 Fourier `mask`:
/// x'(xi) = (x(xi) + t(xi) conj(a) fhat) / (1 + t(xi) |a|^2).
pub fn prox_quad_fourier(
    x: &GridField,
    tau: f64,
    tau_perp: f64,
    mask: &[bool],
    a_hat: &GridField,
    f_hat: &GridField,
    fft: &Fft2,
) -> PdResult<GridField> {
    if tau <= 0.0 || tau_perp <= 0.0 {
        return Err(PdError::Invalid("prox steps must be positive".into()));
    }
    if !a_hat.is_conj_symmetric(1e-10) || !f_hat.is_conj_symmetric(1e-10) {
        return Err(PdError::Invalid("spectra must be conjugate-symmetric".into()));
    }
    let rows = a_hat.rows();
    let cols = a_hat.cols();
    for r in 0..rows {
        for c in 0..cols {
            let partner = ((rows - r) % rows) * cols + (cols - c) % cols;
            if mask[r * cols + c] != mask[partner] {
                return Err(PdError::Invalid("step mask must be conjugate-symmetric".into()));
            }
        }
    }
    Ok(prox_quad_fourier_unchecked(x, tau, tau_perp, mask, a_hat, f_hat, fft))
}

fn prox_quad_fourier_unchecked(
    x: &GridField,
    tau: f64,
    tau_perp: f64,
    mask: &[bool],
    a_hat: &GridField,
    f_hat: &GridField,
    fft: &Fft2,
) -> GridField {
    let mut xhat = fft.forward(x).expect("scalar input expected");
    for ((v, &inside), (a, fh)) in xhat
        .complex_mut()
        .iter_mut()
        .zip(mask)
        .zip(a_hat.complex().iter().zip(f_hat.complex()))
    {
        let t = if inside { tau } else { tau_perp };
        *v = (*v + t * a.conj() * fh) / (1.0 + t * a.norm_sqr());
    }
    fft.inverse(&xhat).expect("shape matches")
}

/// Pointwise Euclidean projection onto the channel-magnitude ball of radius
/// `alpha`; the resolvent of sigma * dF* for the L-infinity ball indicator,
/// for every sigma.
pub fn project_linf_ball(y: &GridField, alpha: f64) -> PdResult<GridField> {
    if alpha <= 0.0 {
        return Err(PdError::Invalid("ball radius must be positive".into()));
    }
    let mut out = y.clone();
    let ch = y.kind().channels();
    for r in 0..y.rows() {
        for c in 0..y.cols() {
            let mag = y.magnitude_at(r, c);
            if mag > alpha {
                let shrink = alpha / mag;
                for k in 0..ch {
                    out.set(r, c, k, y.at(r, c, k) * shrink);
                }
            }
        }
    }
    Ok(out)
}

/// Global rescale onto the L2 ball of radius `m`.
pub fn project_l2_ball(w: &GridField, m: f64) -> PdResult<GridField> {
    if m <= 0.0 {
        return Err(PdError::Invalid("ball radius must be positive".into()));
    }
    let n = w.norm();
    if n <= m {
        Ok(w.clone())
    } else {
        Ok(w.scaled(m / n))
    }
}

/// Componentwise clamp to [-alpha, alpha]; the scalar dual prox of the
/// 1-norm.
pub fn clamp_interval(y: &GridField, alpha: f64) -> GridField {
    let mut out = y.clone();
    for v in out.real_mut() {
        *v = v.clamp(-alpha, alpha);
    }
    out
}

/// G-prox for G = 1/2 ||f - x||^2 on a one-part variable (A = I problems,
/// where tau_perp is never exercised because P = I).
pub struct QuadIdentityProx {
    pub f: GridField,
}

impl ProxMap for QuadIdentityProx {
    fn evaluate(&self, point: &StackedVar, step: &StepView) -> PdResult<StackedVar> {
        Ok(StackedVar::single(prox_quad_identity(point.part(0), step.tau, &self.f)?))
    }
}

/// G-prox for deblurring: the per-frequency solve with T = tau P + tau_perp
/// P_perp. Spectra are validated once here rather than on every iteration.
pub struct QuadFourierProx {
    mask: Vec<bool>,
    a_hat: GridField,
    f_hat: GridField,
    fft: Fft2,
}

impl QuadFourierProx {
    pub fn new(mask: Vec<bool>, a_hat: GridField, f_hat: GridField) -> PdResult<Self> {
        if !a_hat.is_conj_symmetric(1e-10) || !f_hat.is_conj_symmetric(1e-10) {
            return Err(PdError::Invalid("spectra must be conjugate-symmetric".into()));
        }
        let fft = Fft2::new(a_hat.rows(), a_hat.cols());
        Ok(QuadFourierProx { mask, a_hat, f_hat, fft })
    }
}

impl ProxMap for QuadFourierProx {
    fn evaluate(&self, point: &StackedVar, step: &StepView) -> PdResult<StackedVar> {
        Ok(StackedVar::single(prox_quad_fourier_unchecked(
            point.part(0),
            step.tau,
            step.tau_perp,
            &self.mask,
            &self.a_hat,
            &self.f_hat,
            &self.fft,
        )))
    }
}

/// G-prox for inpainting: data coupling only on observed pixels, which are
/// exactly the accelerated subspace, so the observed pixels use tau and the
/// rest pass through.
pub struct MaskedQuadProx {
    pub f: GridField,
    pub mask: Vec<bool>,
}

impl ProxMap for MaskedQuadProx {
    fn evaluate(&self, point: &StackedVar, step: &StepView) -> PdResult<StackedVar> {
        let x = point.part(0);
        let mut out = x.clone();
        let t = step.tau;
        for (i, v) in out.real_mut().iter_mut().enumerate() {
            if self.mask[i] {
                *v = (*v + t * self.f.real()[i]) / (1.0 + t);
            }
        }
        Ok(StackedVar::single(out))
    }
}

/// G-prox for TGV²: the quadratic fidelity acts on u alone, so the update
/// splits into an identity-fidelity resolvent on u (step tau) and a
/// pass-through on w. The optional radius enforces the auxiliary-variable
/// bound that is otherwise only tracked for gap evaluation.
pub struct Tgv2GProx {
    pub f: GridField,
    pub enforce_w_bound: Option<f64>,
}

impl ProxMap for Tgv2GProx {
    fn evaluate(&self, point: &StackedVar, step: &StepView) -> PdResult<StackedVar> {
        let u = prox_quad_identity(point.part(0), step.tau, &self.f)?;
        let w = match self.enforce_w_bound {
            Some(m) => project_l2_ball(point.part(1), m)?,
            None => point.part(1).clone(),
        };
        Ok(StackedVar::new(vec![u, w]))
    }
}

/// G-prox for Lasso, G = 1/2 ||f - A x||^2 with dense A: solved through the
/// SVD of A along singular directions; the null-space component passes
/// through for any step.
pub struct LassoGProx {
    v: DMatrix<f64>,
    s: DVector<f64>,
    utf: DVector<f64>,
}

impl LassoGProx {
    pub fn new(v: DMatrix<f64>, s: DVector<f64>, utf: DVector<f64>) -> Self {
        LassoGProx { v, s, utf }
    }
}

impl ProxMap for LassoGProx {
    fn evaluate(&self, point: &StackedVar, step: &StepView) -> PdResult<StackedVar> {
        let x = DVector::from_column_slice(point.part(0).real());
        let c = self.v.transpose() * &x;
        let mut c_new = c.clone();
        for k in 0..c.len() {
            let sk = self.s[k];
            c_new[k] = (c[k] + step.tau * sk * self.utf[k]) / (1.0 + step.tau * sk * sk);
        }
        let delta = &self.v * (c_new - c);
        let mut out = point.part(0).clone();
        for (dst, d) in out.real_mut().iter_mut().zip(delta.iter()) {
            *dst += d;
        }
        Ok(StackedVar::single(out))
    }
}

/// F*-prox for TV-type duals: one L-infinity ball.
pub struct LinfBallProx {
    pub alpha: f64,
}

impl ProxMap for LinfBallProx {
    fn evaluate(&self, point: &StackedVar, _step: &StepView) -> PdResult<StackedVar> {
        Ok(StackedVar::single(project_linf_ball(point.part(0), self.alpha)?))
    }
}

/// F*-prox for TGV² duals: two L-infinity balls with radii alpha and beta.
pub struct Tgv2DualProx {
    pub alpha: f64,
    pub beta: f64,
}

impl ProxMap for Tgv2DualProx {
    fn evaluate(&self, point: &StackedVar, _step: &StepView) -> PdResult<StackedVar> {
        Ok(StackedVar::new(vec![
            project_linf_ball(point.part(0), self.alpha)?,
            project_linf_ball(point.part(1), self.beta)?,
        ]))
    }
}

/// F*-prox for the Lasso dual: componentwise clamp.
pub struct ClampProx {
    pub alpha: f64,
}

impl ProxMap for ClampProx {
    fn evaluate(&self, point: &StackedVar, _step: &StepView) -> PdResult<StackedVar> {
        Ok(StackedVar::single(clamp_interval(point.part(0), self.alpha)))
    }
}
