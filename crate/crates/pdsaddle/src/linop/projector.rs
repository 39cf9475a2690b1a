//! Orthogonal projectors splitting the primal space into the accelerated
//! subspace and its complement.

use nalgebra::DMatrix;

use crate::error::{PdError, PdResult};
use crate::grid::fft::Fft2;
use crate::grid::{FieldKind, GridField, StackedVar};

/// Idempotent, self-adjoint projector P with complement P_perp = I - P.
///
/// Each variant records the representation directly: a 0/1 Fourier mask, a
/// pixel mask, a block selector over stacked parts, or a dense orthonormal
/// row-space basis.
#[derive(Clone, Debug)]
pub enum Projector {
    Identity,
    FourierMask { mask: Vec<bool>, fft: Fft2 },
    PixelMask { mask: Vec<bool> },
    Block { keep: Vec<bool> },
    RowSpace { basis: DMatrix<f64> },
}

impl Projector {
    /// Applies P.
    pub fn apply(&self, x: &StackedVar) -> StackedVar {
        self.split_apply(x, 1.0, 0.0)
    }

    /// Applies the complement P_perp.
    pub fn complement(&self, x: &StackedVar) -> StackedVar {
        self.split_apply(x, 0.0, 1.0)
    }

    /// Applies the subspace-weighted step operator tau P + tau_perp P_perp.
    pub fn weighted(&self, x: &StackedVar, tau: f64, tau_perp: f64) -> StackedVar {
        if tau == tau_perp {
            return x.scaled(tau);
        }
        self.split_apply(x, tau, tau_perp)
    }

    fn split_apply(&self, x: &StackedVar, on: f64, off: f64) -> StackedVar {
        match self {
            Projector::Identity => x.scaled(on),
            Projector::FourierMask { mask, fft } => {
                let mut xhat = fft.forward(x.part(0)).expect("scalar part expected");
                for (v, &inside) in xhat.complex_mut().iter_mut().zip(mask) {
                    *v *= if inside { on } else { off };
                }
                StackedVar::single(fft.inverse(&xhat).expect("shape matches"))
            }
            Projector::PixelMask { mask } => {
                let mut out = x.part(0).clone();
                for (v, &inside) in out.real_mut().iter_mut().zip(mask) {
                    *v *= if inside { on } else { off };
                }
                StackedVar::single(out)
            }
            Projector::Block { keep } => {
                assert_eq!(keep.len(), x.parts().len(), "block projector arity mismatch");
                StackedVar::new(
                    x.parts()
                        .iter()
                        .zip(keep)
                        .map(|(p, &k)| p.scaled(if k { on } else { off }))
                        .collect(),
                )
            }
            Projector::RowSpace { basis } => {
                let v = DMatrix::from_column_slice(x.part(0).real().len(), 1, x.part(0).real());
                let coeff = basis.transpose() * &v;
                let proj = basis * coeff;
                let mut out = x.part(0).clone();
                for (dst, (orig, p)) in
                    out.real_mut().iter_mut().zip(x.part(0).real().iter().zip(proj.iter()))
                {
                    *dst = on * p + off * (orig - p);
                }
                StackedVar::single(out)
            }
        }
    }

    /// ||P_perp x||, computed in whichever representation is cheapest.
    pub fn perp_norm(&self, x: &StackedVar) -> f64 {
        match self {
            Projector::Identity => 0.0,
            Projector::FourierMask { mask, fft } => {
                let xhat = fft.forward(x.part(0)).expect("scalar part expected");
                let mut acc = 0.0;
                for (v, &inside) in xhat.complex().iter().zip(mask) {
                    if !inside {
                        acc += v.norm_sqr();
                    }
                }
                acc.sqrt()
            }
            Projector::PixelMask { mask } => {
                let mut acc = 0.0;
                for (v, &inside) in x.part(0).real().iter().zip(mask) {
                    if !inside {
                        acc += v * v;
                    }
                }
                acc.sqrt()
            }
            Projector::Block { keep } => {
                let mut acc = 0.0;
                for (p, &k) in x.parts().iter().zip(keep) {
                    if !k {
                        acc += p.norm_sq();
                    }
                }
                acc.sqrt()
            }
            Projector::RowSpace { .. } => self.complement(x).norm(),
        }
    }
}

/// Builds the Fourier-mask projector keeping frequencies where the
/// multiplier magnitude reaches `rel_threshold` times its maximum.
pub fn fourier_mask_projector(a_hat: &GridField, rel_threshold: f64) -> PdResult<Projector> {
    if a_hat.kind() != FieldKind::Spectral {
        return Err(PdError::Invalid("fourier_mask_projector needs a spectrum".into()));
    }
    if !(rel_threshold > 0.0 && rel_threshold <= 1.0) {
        return Err(PdError::Invalid("rel_threshold must lie in (0, 1]".into()));
    }
    let peak = a_hat.max_abs();
    if peak == 0.0 {
        return Err(PdError::Invalid("cannot threshold an identically-zero spectrum".into()));
    }
    let cut = rel_threshold * peak;
    let mask: Vec<bool> = a_hat.complex().iter().map(|v| v.norm() >= cut).collect();
    Ok(Projector::FourierMask { mask, fft: Fft2::new(a_hat.rows(), a_hat.cols()) })
}
