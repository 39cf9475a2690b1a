//! Synthetic data: seeded Gaussian noise, periodic blur kernels and their
//! spectra, and the default test image.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{PdError, PdResult};
use crate::grid::fft::Fft2;
use crate::grid::{FieldKind, GridField};

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma` to
/// every channel of a real field. Deterministic for a fixed seed.
pub fn gaussian_noise(field: &GridField, sigma: f64, seed: u64) -> PdResult<GridField> {
    if sigma < 0.0 {
        return Err(PdError::Invalid("noise sigma must be nonnegative".into()));
    }
    let mut out = field.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| PdError::Invalid(e.to_string()))?;
    for v in out.real_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

/// Periodically wrapped, unit-sum Gaussian kernel with standard deviation
/// `width` pixels, centred at pixel (0, 0).
pub fn gaussian_kernel(rows: usize, cols: usize, width: f64) -> PdResult<GridField> {
    if width <= 0.0 {
        return Err(PdError::Invalid("kernel width must be positive".into()));
    }
    let mut data = vec![0.0; rows * cols];
    let inv2w2 = 1.0 / (2.0 * width * width);
    let mut sum = 0.0;
    for r in 0..rows {
        let dr = r.min(rows - r) as f64;
        for c in 0..cols {
            let dc = c.min(cols - c) as f64;
            let v = (-(dr * dr + dc * dc) * inv2w2).exp();
            data[r * cols + c] = v;
            sum += v;
        }
    }
    data.iter_mut().for_each(|v| *v /= sum);
    GridField::from_real(rows, cols, FieldKind::Scalar, data)
}

/// Spectrum of the wrapped unit-sum Gaussian kernel, normalised so that
/// `F* diag(spectrum) F` is exactly "periodic convolution with the kernel".
/// The zero-frequency coefficient is the kernel mass, i.e. 1.
pub fn gaussian_blur_spectrum(rows: usize, cols: usize, width: f64) -> PdResult<GridField> {
    let kernel = gaussian_kernel(rows, cols, width)?;
    let fft = Fft2::new(rows, cols);
    let mut spec = fft.forward(&kernel)?;
    // Unitary forward carries a 1/sqrt(n) factor; the convolution multiplier
    // is the plain DFT of the kernel.
    spec.scale(((rows * cols) as f64).sqrt());
    Ok(spec)
}

/// Direct spatial periodic convolution; quadratic cost, used as an oracle
/// against the spectral path.
pub fn periodic_convolve(kernel: &GridField, x: &GridField) -> GridField {
    let (rows, cols) = (x.rows(), x.cols());
    let mut out = GridField::zeros(rows, cols, FieldKind::Scalar);
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for kr in 0..rows {
                for kc in 0..cols {
                    let sr = (r + rows - kr) % rows;
                    let sc = (c + cols - kc) % cols;
                    acc += kernel.at(kr, kc, 0) * x.at(sr, sc, 0);
                }
            }
            out.set(r, c, 0, acc);
        }
    }
    out
}

/// Piecewise-affine test image in [0, 255]: a flat background, a linear ramp
/// over the top half, and a sharp bright disc. The ramp separates TGV²-like
/// regularisers from plain TV at a glance.
pub fn phantom(rows: usize, cols: usize) -> GridField {
    let disc_r = 0.62 * rows as f64;
    let disc_c = 0.58 * cols as f64;
    let radius = 0.22 * rows.min(cols) as f64;
    GridField::scalar_from_fn(rows, cols, |r, c| {
        let mut v = 96.0;
        if (r as f64) < rows as f64 / 2.0 {
            v = 32.0 + 192.0 * c as f64 / (cols.max(2) - 1) as f64;
        }
        let dr = r as f64 - disc_r;
        let dc = c as f64 - disc_c;
        if (dr * dr + dc * dc).sqrt() <= radius {
            v = 224.0;
        }
        v
    })
}
