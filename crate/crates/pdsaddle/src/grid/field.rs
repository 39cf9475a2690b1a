use rustfft::num_complex::Complex64;

use crate::error::{PdError, PdResult};

/// Component structure of a [`GridField`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// One real sample per pixel.
    Scalar,
    /// Two real samples per pixel (e.g. a discrete gradient).
    Vector2,
    /// Symmetric 2x2 tensor per pixel: (t11, t22, t12), off-diagonal once.
    SymTensor2,
    /// One complex sample per pixel; the spectrum of a real scalar field.
    Spectral,
}

impl FieldKind {
    pub fn channels(self) -> usize {
        match self {
            FieldKind::Scalar | FieldKind::Spectral => 1,
            FieldKind::Vector2 => 2,
            FieldKind::SymTensor2 => 3,
        }
    }

    /// Weight of channel `k` in the pointwise inner product. The tensor
    /// off-diagonal counts twice because it is stored once.
    pub fn channel_weight(self, k: usize) -> f64 {
        if self == FieldKind::SymTensor2 && k == 2 {
            2.0
        } else {
            1.0
        }
    }
}

/// Shape descriptor used by operators to declare domains and codomains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldShape {
    pub rows: usize,
    pub cols: usize,
    pub kind: FieldKind,
}

impl FieldShape {
    pub fn new(rows: usize, cols: usize, kind: FieldKind) -> Self {
        FieldShape { rows, cols, kind }
    }
}

#[derive(Clone, Debug)]
enum FieldData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// A dense field on a 2D grid, stored row-major with interleaved channels.
#[derive(Clone, Debug)]
pub struct GridField {
    rows: usize,
    cols: usize,
    kind: FieldKind,
    data: FieldData,
}

impl GridField {
    pub fn zeros(rows: usize, cols: usize, kind: FieldKind) -> Self {
        let data = match kind {
            FieldKind::Spectral => FieldData::Complex(vec![Complex64::new(0.0, 0.0); rows * cols]),
            _ => FieldData::Real(vec![0.0; rows * cols * kind.channels()]),
        };
        GridField { rows, cols, kind, data }
    }

    pub fn from_real(rows: usize, cols: usize, kind: FieldKind, data: Vec<f64>) -> PdResult<Self> {
        if kind == FieldKind::Spectral {
            return Err(PdError::Invalid("spectral fields take complex data".into()));
        }
        if data.len() != rows * cols * kind.channels() {
            return Err(PdError::Shape(format!(
                "data length {} does not match {}x{} with {} channels",
                data.len(),
                rows,
                cols,
                kind.channels()
            )));
        }
        Ok(GridField { rows, cols, kind, data: FieldData::Real(data) })
    }

    pub fn from_complex(rows: usize, cols: usize, data: Vec<Complex64>) -> PdResult<Self> {
        if data.len() != rows * cols {
            return Err(PdError::Shape(format!(
                "complex data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(GridField { rows, cols, kind: FieldKind::Spectral, data: FieldData::Complex(data) })
    }

    pub fn scalar_from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        GridField { rows, cols, kind: FieldKind::Scalar, data: FieldData::Real(data) }
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Self {
        GridField {
            rows,
            cols,
            kind: FieldKind::Scalar,
            data: FieldData::Real(vec![value; rows * cols]),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn shape(&self) -> FieldShape {
        FieldShape::new(self.rows, self.cols, self.kind)
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_real(&self) -> bool {
        matches!(self.data, FieldData::Real(_))
    }

    /// Real samples, interleaved channels. Panics on spectral fields.
    pub fn real(&self) -> &[f64] {
        match &self.data {
            FieldData::Real(v) => v,
            FieldData::Complex(_) => panic!("real() called on a spectral field"),
        }
    }

    pub fn real_mut(&mut self) -> &mut [f64] {
        match &mut self.data {
            FieldData::Real(v) => v,
            FieldData::Complex(_) => panic!("real_mut() called on a spectral field"),
        }
    }

    /// Complex samples. Panics on real fields.
    pub fn complex(&self) -> &[Complex64] {
        match &self.data {
            FieldData::Complex(v) => v,
            FieldData::Real(_) => panic!("complex() called on a real field"),
        }
    }

    pub fn complex_mut(&mut self) -> &mut [Complex64] {
        match &mut self.data {
            FieldData::Complex(v) => v,
            FieldData::Real(_) => panic!("complex_mut() called on a real field"),
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize, ch: usize) -> f64 {
        self.real()[(r * self.cols + c) * self.kind.channels() + ch]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, ch: usize, v: f64) {
        let idx = (r * self.cols + c) * self.kind.channels() + ch;
        self.real_mut()[idx] = v;
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.kind == other.kind
    }

    fn assert_same_layout(&self, other: &Self, what: &str) {
        assert!(
            self.same_layout(other),
            "{what}: field layout mismatch ({:?} vs {:?})",
            self.shape(),
            other.shape()
        );
    }

    /// Channel-weighted inner product; real part of the Hermitian product
    /// for spectral fields.
    pub fn inner(&self, other: &Self) -> f64 {
        self.assert_same_layout(other, "inner");
        match (&self.data, &other.data) {
            (FieldData::Real(a), FieldData::Real(b)) => {
                let ch = self.kind.channels();
                if ch == 1 || self.kind != FieldKind::SymTensor2 {
                    a.iter().zip(b).map(|(x, y)| x * y).sum()
                } else {
                    let mut acc = 0.0;
                    for (i, (x, y)) in a.iter().zip(b).enumerate() {
                        acc += self.kind.channel_weight(i % ch) * x * y;
                    }
                    acc
                }
            }
            (FieldData::Complex(a), FieldData::Complex(b)) => {
                a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum()
            }
            _ => panic!("inner: mixed real/complex fields"),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        match &self.data {
            FieldData::Real(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            FieldData::Complex(v) => v.iter().fold(0.0, |m, x| m.max(x.norm())),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.data {
            FieldData::Real(v) => v.iter().all(|x| x.is_finite()),
            FieldData::Complex(v) => v.iter().all(|x| x.re.is_finite() && x.im.is_finite()),
        }
    }

    pub fn scale(&mut self, s: f64) {
        match &mut self.data {
            FieldData::Real(v) => v.iter_mut().for_each(|x| *x *= s),
            FieldData::Complex(v) => v.iter_mut().for_each(|x| *x *= s),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Self) {
        self.assert_same_layout(other, "add_scaled");
        match (&mut self.data, &other.data) {
            (FieldData::Real(a), FieldData::Real(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += s * y;
                }
            }
            (FieldData::Complex(a), FieldData::Complex(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += s * y;
                }
            }
            _ => panic!("add_scaled: mixed real/complex fields"),
        }
    }

    /// `a * x + b * y` as a new field.
    pub fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        let mut out = x.scaled(a);
        out.add_scaled(b, y);
        out
    }

    /// Pointwise Euclidean channel magnitude at a pixel (tensor off-diagonal
    /// weighted twice).
    pub fn magnitude_at(&self, r: usize, c: usize) -> f64 {
        let ch = self.kind.channels();
        let mut acc = 0.0;
        for k in 0..ch {
            let v = self.at(r, c, k);
            acc += self.kind.channel_weight(k) * v * v;
        }
        acc.sqrt()
    }

    /// Sum over pixels of the channel magnitude: the 1-norm used by TV-type
    /// regularisers.
    pub fn magnitude_l1(&self) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                acc += self.magnitude_at(r, c);
            }
        }
        acc
    }

    /// Largest pointwise channel magnitude.
    pub fn magnitude_linf(&self) -> f64 {
        let mut acc: f64 = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                acc = acc.max(self.magnitude_at(r, c));
            }
        }
        acc
    }

    /// Largest violation of F(-xi) = conj(F(xi)) under periodic wrap-around.
    pub fn conj_symmetry_defect(&self) -> f64 {
        let v = self.complex();
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let rr = (self.rows - r) % self.rows;
                let cc = (self.cols - c) % self.cols;
                let diff = v[r * self.cols + c] - v[rr * self.cols + cc].conj();
                worst = worst.max(diff.norm());
            }
        }
        worst
    }

    pub fn is_conj_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        self.conj_symmetry_defect() <= tol * scale
    }
}

/// Ordered tuple of grid fields: the product-space variable of a saddle
/// problem. Inner products and norms are sums over the parts.
#[derive(Clone, Debug)]
pub struct StackedVar {
    parts: Vec<GridField>,
}

impl StackedVar {
    pub fn new(parts: Vec<GridField>) -> Self {
        assert!(!parts.is_empty(), "StackedVar needs at least one part");
        StackedVar { parts }
    }

    pub fn single(field: GridField) -> Self {
        StackedVar { parts: vec![field] }
    }

    pub fn zeros(shapes: &[FieldShape]) -> Self {
        StackedVar::new(
            shapes.iter().map(|s| GridField::zeros(s.rows, s.cols, s.kind)).collect(),
        )
    }

    pub fn zeros_like(&self) -> Self {
        StackedVar::new(
            self.parts.iter().map(|p| GridField::zeros(p.rows(), p.cols(), p.kind())).collect(),
        )
    }

    pub fn parts(&self) -> &[GridField] {
        &self.parts
    }

    pub fn part(&self, i: usize) -> &GridField {
        &self.parts[i]
    }

    pub fn part_mut(&mut self, i: usize) -> &mut GridField {
        &mut self.parts[i]
    }

    pub fn into_parts(self) -> Vec<GridField> {
        self.parts
    }

    pub fn shapes(&self) -> Vec<FieldShape> {
        self.parts.iter().map(|p| p.shape()).collect()
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.parts.len() == other.parts.len()
            && self.parts.iter().zip(&other.parts).all(|(a, b)| a.same_layout(b))
    }

    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.parts.len(), other.parts.len(), "inner: part count mismatch");
        self.parts.iter().zip(&other.parts).map(|(a, b)| a.inner(b)).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.parts.iter().map(|p| p.norm_sq()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.parts.iter().all(|p| p.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        self.parts.iter_mut().for_each(|p| p.scale(s));
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn add_scaled(&mut self, s: f64, other: &Self) {
        assert_eq!(self.parts.len(), other.parts.len(), "add_scaled: part count mismatch");
        for (a, b) in self.parts.iter_mut().zip(&other.parts) {
            a.add_scaled(s, b);
        }
    }

    pub fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        let mut out = x.scaled(a);
        out.add_scaled(b, y);
        out
    }
}
