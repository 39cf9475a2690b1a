//! Unitary 2D discrete Fourier transforms.
//!
//! The unitary convention (a 1/sqrt(rows*cols) factor on both directions)
//! makes Parseval hold without scale factors, so spectral and spatial inner
//! products are interchangeable.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{PdError, PdResult};
use crate::grid::{FieldKind, GridField};

/// Cached transform plans for one grid size.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.rows, self.cols)
    }
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let (row_plan, col_plan) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        for row in buf.chunks_mut(self.cols) {
            row_plan.process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                column[r] = buf[r * self.cols + c];
            }
            col_plan.process(&mut column);
            for r in 0..self.rows {
                buf[r * self.cols + c] = column[r];
            }
        }
        let scale = 1.0 / ((self.rows * self.cols) as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    /// In-place unitary transform of a complex buffer (row-major).
    pub fn forward_buf(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
    }

    pub fn inverse_buf(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    /// Spectrum of a real scalar field.
    pub fn forward(&self, field: &GridField) -> PdResult<GridField> {
        if field.kind() != FieldKind::Scalar {
            return Err(PdError::Invalid("fft2 expects a real scalar field".into()));
        }
        if field.rows() != self.rows || field.cols() != self.cols {
            return Err(PdError::Shape("field does not match the planned grid size".into()));
        }
        let mut buf: Vec<Complex64> =
            field.real().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward_buf(&mut buf);
        GridField::from_complex(self.rows, self.cols, buf)
    }

    /// Real scalar field from a (conjugate-symmetric) spectrum. The imaginary
    /// residue of the round trip is discarded.
    pub fn inverse(&self, spectrum: &GridField) -> PdResult<GridField> {
        if spectrum.kind() != FieldKind::Spectral {
            return Err(PdError::Invalid("ifft2 expects a spectral field".into()));
        }
        if spectrum.rows() != self.rows || spectrum.cols() != self.cols {
            return Err(PdError::Shape("spectrum does not match the planned grid size".into()));
        }
        let mut buf = spectrum.complex().to_vec();
        self.inverse_buf(&mut buf);
        GridField::from_real(self.rows, self.cols, buf.iter().map(|v| v.re).collect())
    }
}

/// One-shot unitary 2D FFT of a real scalar field.
pub fn fft2(field: &GridField) -> PdResult<GridField> {
    Fft2::new(field.rows(), field.cols()).forward(field)
}

/// One-shot unitary inverse of [`fft2`].
pub fn ifft2(spectrum: &GridField) -> PdResult<GridField> {
    Fft2::new(spectrum.rows(), spectrum.cols()).inverse(spectrum)
}
