//! Periodic grids on the torus `[0, 2π)²`, their spectra, and the discrete
//! differential operators and norms everything else is built on.
//!
//! Sample `(i, k)` (row `i`, column `k`) of a [`Field`] holds
//! `f(x = 2πk/width, y = 2πi/height)`. Norms carry the cell-area factor
//! `h² = (2π/width)²` so that they approximate the continuous torus integrals
//! and model parameters keep their meaning across grid sizes.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Inverse transforms discard an imaginary part; a spectrum whose Hermitian
/// defect exceeds this (relative to its largest coefficient) is rejected.
pub const HERMITIAN_TOLERANCE: f64 = 1e-6;

/// Real-valued samples of a function on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 2 || !width.is_power_of_two() || !height.is_power_of_two() {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

impl Field {
    /// Wraps row-major samples, validating the grid and finiteness.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::SampleCount {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(idx));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::constant(width, height, 0.0)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Samples `f(x, y)` at the torus grid points.
    pub fn from_torus_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for i in 0..height {
            let y = 2.0 * PI * i as f64 / height as f64;
            for k in 0..width {
                let x = 2.0 * PI * k as f64 / width as f64;
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    // Skips validation; callers guarantee shape and finiteness.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self::from_raw(self.width, self.height, vec![0.0; self.data.len()])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Sample at row `i`, column `k`.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.width + k]
    }

    /// Grid spacing `h = 2π / width`.
    pub fn cell_size(&self) -> f64 {
        2.0 * PI / self.width as f64
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dynamic range `max − min`.
    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn check_same_dims(&self, other: &Field) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Field {
        Field::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Copy with the mean removed.
    pub fn zero_mean(&self) -> Field {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Circular shift by `(dy, dx)` samples.
    pub fn roll(&self, dy: usize, dx: usize) -> Field {
        let (w, h) = self.dims();
        let mut out = vec![0.0; self.data.len()];
        for i in 0..h {
            for k in 0..w {
                out[((i + dy) % h) * w + (k + dx) % w] = self.data[i * w + k];
            }
        }
        Field::from_raw(w, h, out)
    }
}

impl<'a> Add<&'a Field> for &'a Field {
    type Output = Field;
    fn add(self, rhs: &'a Field) -> Field {
        assert_eq!(self.dims(), rhs.dims(), "field dimensions differ");
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a + b)
            .collect();
        Field::from_raw(self.width, self.height, data)
    }
}

impl<'a> Sub<&'a Field> for &'a Field {
    type Output = Field;
    fn sub(self, rhs: &'a Field) -> Field {
        assert_eq!(self.dims(), rhs.dims(), "field dimensions differ");
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Field::from_raw(self.width, self.height, data)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.map(|v| v * rhs)
    }
}

/// A pair of fields `(p1, p2)`: a discrete vector field on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub p1: Field,
    pub p2: Field,
}

impl VectorField {
    pub fn new(p1: Field, p2: Field) -> Result<Self> {
        p1.check_same_dims(&p2)?;
        Ok(Self { p1, p2 })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Ok(Self {
            p1: Field::zeros(width, height)?,
            p2: Field::zeros(width, height)?,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.p1.dims()
    }

    /// Pointwise maximum of `sqrt(p1² + p2²)`.
    pub fn max_magnitude(&self) -> f64 {
        self.p1
            .as_slice()
            .iter()
            .zip(self.p2.as_slice())
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Unweighted Euclidean inner product over both components.
    pub fn dot(&self, other: &VectorField) -> f64 {
        dot(self.p1.as_slice(), other.p1.as_slice()) + dot(self.p2.as_slice(), other.p2.as_slice())
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        VectorField {
            p1: &self.p1 * s,
            p2: &self.p2 * s,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Forward differences with periodic wrap, in gray levels per pixel step.
pub fn gradient(u: &Field) -> VectorField {
    let (w, h) = u.dims();
    let d = u.as_slice();
    let mut gx = vec![0.0; d.len()];
    let mut gy = vec![0.0; d.len()];
    for i in 0..h {
        let row = i * w;
        let below = ((i + 1) % h) * w;
        for k in 0..w {
            let right = if k + 1 == w { 0 } else { k + 1 };
            gx[row + k] = d[row + right] - d[row + k];
            gy[row + k] = d[below + k] - d[row + k];
        }
    }
    VectorField {
        p1: Field::from_raw(w, h, gx),
        p2: Field::from_raw(w, h, gy),
    }
}

/// Backward differences with periodic wrap: the negative adjoint of [`gradient`].
pub fn divergence(p: &VectorField) -> Field {
    let (w, h) = p.dims();
    let mut out = vec![0.0; w * h];
    divergence_into(w, h, p.p1.as_slice(), p.p2.as_slice(), &mut out);
    Field::from_raw(w, h, out)
}

pub(crate) fn divergence_into(w: usize, h: usize, p1: &[f64], p2: &[f64], out: &mut [f64]) {
    for i in 0..h {
        let row = i * w;
        let above = if i == 0 { (h - 1) * w } else { row - w };
        out[row] = p1[row] - p1[row + w - 1] + p2[row] - p2[above];
        for k in 1..w {
            out[row + k] = p1[row + k] - p1[row + k - 1] + p2[row + k] - p2[above + k];
        }
    }
}

/// `h²·Σ|f|`.
pub fn norm_l1(f: &Field) -> f64 {
    let h = f.cell_size();
    h * h * f.as_slice().iter().map(|v| v.abs()).sum::<f64>()
}

/// `h²·Σf²`.
pub fn norm_l2sq(f: &Field) -> f64 {
    let h = f.cell_size();
    h * h * f.as_slice().iter().map(|v| v * v).sum::<f64>()
}

/// Isotropic total variation `h·Σ|∇f|` (one `h` from the difference
/// quotient, two from the area element).
pub fn norm_tv(f: &Field) -> f64 {
    let (w, hgt) = f.dims();
    let d = f.as_slice();
    let mut total = 0.0;
    for i in 0..hgt {
        let row = i * w;
        let below = ((i + 1) % hgt) * w;
        for k in 0..w {
            let right = if k + 1 == w { 0 } else { k + 1 };
            let gx = d[row + right] - d[row + k];
            let gy = d[below + k] - d[row + k];
            total += gx.hypot(gy);
        }
    }
    f.cell_size() * total
}

/// Area-weighted inner product `h²·Σ a·b`.
pub fn inner_product(a: &Field, b: &Field) -> f64 {
    let h = a.cell_size();
    h * h * dot(a.as_slice(), b.as_slice())
}

/// Unitary 2-D DFT coefficients of a field.
///
/// Coefficient `(m, n)` (row `m`, column `n`) belongs to the integer frequency
/// `ξ_x = n`, `ξ_y = m`, folded into `[−N/2, N/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    width: usize,
    height: usize,
    coeffs: Vec<Complex64>,
}

fn signed_frequency(index: usize, n: usize) -> i64 {
    if index < n / 2 {
        index as i64
    } else {
        index as i64 - n as i64
    }
}

impl Spectrum {
    pub fn new(width: usize, height: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        check_dims(width, height)?;
        if coeffs.len() != width * height {
            return Err(Error::SampleCount {
                expected: width * height,
                actual: coeffs.len(),
            });
        }
        Ok(Self {
            width,
            height,
            coeffs,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.coeffs[m * self.width + n]
    }

    /// `(ξ_x, ξ_y)` of bin `(m, n)`.
    pub fn frequency(&self, m: usize, n: usize) -> (i64, i64) {
        (
            signed_frequency(n, self.width),
            signed_frequency(m, self.height),
        )
    }

    pub fn radial_frequency(&self, m: usize, n: usize) -> f64 {
        let (fx, fy) = self.frequency(m, n);
        ((fx * fx + fy * fy) as f64).sqrt()
    }

    /// Bin holding frequency `(ξ_x, ξ_y)`, with wrap-around.
    pub fn index_of(&self, fx: i64, fy: i64) -> (usize, usize) {
        (
            fy.rem_euclid(self.height as i64) as usize,
            fx.rem_euclid(self.width as i64) as usize,
        )
    }

    /// Bin holding the negated frequency of `(m, n)`.
    pub fn mirror_index(&self, m: usize, n: usize) -> (usize, usize) {
        (
            (self.height - m) % self.height,
            (self.width - n) % self.width,
        )
    }

    /// `max |c(ξ) − conj c(−ξ)|` relative to the largest coefficient magnitude.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut defect = 0.0f64;
        for m in 0..self.height {
            for n in 0..self.width {
                let (mm, nn) = self.mirror_index(m, n);
                let d = (self.get(m, n) - self.get(mm, nn).conj()).norm();
                defect = defect.max(d);
            }
        }
        defect / scale
    }

    /// Spectral energy `h²·Σ|c|²`, equal to `norm_l2sq` of the field under
    /// the unitary convention.
    pub fn energy(&self) -> f64 {
        let h = 2.0 * PI / self.width as f64;
        h * h * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

fn fft2(width: usize, height: usize, buf: &mut Vec<Complex64>, direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft(width, direction).process(buf);
    let mut t = transpose(buf, height, width);
    planner.plan_fft(height, direction).process(&mut t);
    *buf = transpose(&t, width, height);
    let norm = 1.0 / ((width * height) as f64).sqrt();
    for c in buf.iter_mut() {
        *c *= norm;
    }
}

/// Unitary forward DFT.
pub fn forward_transform(f: &Field) -> Spectrum {
    let mut buf: Vec<Complex64> = f
        .as_slice()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft2(f.width(), f.height(), &mut buf, FftDirection::Forward);
    Spectrum {
        width: f.width(),
        height: f.height(),
        coeffs: buf,
    }
}

/// Unitary inverse DFT of a Hermitian spectrum. Returns the real field and
/// the largest discarded imaginary magnitude.
pub fn inverse_transform_with_residue(s: &Spectrum) -> Result<(Field, f64)> {
    let defect = s.hermitian_defect();
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::NonHermitianSpectrum { defect });
    }
    Ok(inverse_unchecked(s))
}

/// Inverse without the symmetry check, for spectra that are Hermitian by
/// construction (real input times a centrally symmetric real mask).
pub(crate) fn inverse_unchecked(s: &Spectrum) -> (Field, f64) {
    let mut buf = s.coeffs.clone();
    fft2(s.width, s.height, &mut buf, FftDirection::Inverse);
    let residue = buf.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    let data = buf.into_iter().map(|c| c.re).collect();
    (Field::from_raw(s.width, s.height, data), residue)
}

/// Unitary inverse DFT; the (round-off) imaginary part is discarded.
pub fn inverse_transform(s: &Spectrum) -> Result<Field> {
    inverse_transform_with_residue(s).map(|(f, _)| f)
}
