//! Grid-field containers for primal and dual variables.
//!
//! A [`GridField`] is a dense field on a 2D pixel grid: scalar images,
//! 2-vector fields (gradients, dual variables of TV), symmetric 2x2 tensor
//! fields with the off-diagonal stored once, or complex spectra of real
//! scalar fields. A [`StackedVar`] is an ordered tuple of fields and is the
//! variable type the solver works with, so that product-space problems such
//! as TGV² use the same code path as plain TV.
//!
//! Inner products are the physically meaningful ones: tensor fields weight
//! the off-diagonal channel twice, matching the symmetrised-gradient
//! inner product, so adjoints computed against these products are the
//! discretisations one expects.

mod field;
pub mod fft;
pub mod pgm;
pub mod synth;

pub use field::{FieldKind, FieldShape, GridField, StackedVar};
