//! Littlewood-Paley band-pass masks, isotropic and directional.
//!
//! A radial mask of scale `j` is 0 for `|ξ| ≤ 2^{j−2}`, rises along a Meyer
//! ramp in `log₂|ξ|` to 1 at `2^{j−1}`, stays 1 up to `2^j`, falls back to 0
//! at `2^{j+1}`. Directional masks multiply it by angular windows over
//! `[0, π)` that sum to one.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    forward_transform, inverse_transform_with_residue, inverse_unchecked, Field, Spectrum,
};
use crate::io;

/// Meyer auxiliary polynomial, clamped to `[0, 1]`.
///
/// `ν(t) + ν(1 − t) = 1`.
pub fn meyer_nu(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t.powi(4) * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t.powi(3))
    }
}

/// Radial gain at squared integer radius `r2`. Support boundaries are
/// compared on `r²` against powers of four, so they are exact.
pub fn radial_gain(r2: f64, j: i32) -> f64 {
    let p = |e: i32| 4f64.powi(e);
    if r2 <= p(j - 2) || r2 >= p(j + 1) {
        0.0
    } else if r2 >= p(j - 1) && r2 <= p(j) {
        1.0
    } else {
        // log₂|ξ| = ½·log₂ r²
        let s = 0.5 * r2.log2() - (j - 2) as f64;
        if s < 1.0 {
            meyer_nu(s)
        } else {
            1.0 - meyer_nu(s - 2.0)
        }
    }
}

/// Angular window of sector `l` of `count` at orientation `theta` (any real;
/// reduced mod π).
pub fn angular_gain(theta: f64, l: usize, count: usize) -> f64 {
    let span = count as f64;
    let phi = theta.rem_euclid(PI) * span / PI;
    let mut d = (phi - l as f64).rem_euclid(span);
    if d >= span / 2.0 {
        d -= span;
    }
    let d = d.abs();
    if d <= 0.25 {
        1.0
    } else if d >= 0.75 {
        0.0
    } else {
        1.0 - meyer_nu(2.0 * (d - 0.25))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterMask {
    width: usize,
    height: usize,
    gains: Vec<f64>,
    scale: i32,
    /// `(l, L)` for directional masks.
    direction: Option<(usize, usize)>,
}

/// Largest usable scale on a grid: the plateau must lie under Nyquist.
fn check_scale(j: i32, width: usize, height: usize) -> Result<()> {
    let nyquist = (width.min(height) / 2) as f64;
    if j < 0 || 2f64.powi(j) > nyquist {
        return Err(Error::ScaleOutOfRange {
            scale: j,
            width,
            height,
        });
    }
    Ok(())
}

fn build_mask(
    width: usize,
    height: usize,
    j: i32,
    direction: Option<(usize, usize)>,
) -> Result<FilterMask> {
    // borrow the bin bookkeeping from an empty spectrum
    let grid = Spectrum::new(
        width,
        height,
        vec![Complex64::new(0.0, 0.0); width * height],
    )?;
    let mut gains = vec![0.0; width * height];
    for m in 0..height {
        for n in 0..width {
            let (mm, nn) = grid.mirror_index(m, n);
            if (mm, nn) < (m, n) {
                gains[m * width + n] = gains[mm * width + nn];
                continue;
            }
            let (fx, fy) = grid.frequency(m, n);
            let r2 = (fx * fx + fy * fy) as f64;
            let mut g = radial_gain(r2, j);
            if let (Some((l, count)), true) = (direction, g > 0.0) {
                g *= angular_gain((fy as f64).atan2(fx as f64), l, count);
            }
            gains[m * width + n] = g;
        }
    }
    Ok(FilterMask {
        width,
        height,
        gains,
        scale: j,
        direction,
    })
}

pub fn make_radial_mask(j: i32, width: usize, height: usize) -> Result<FilterMask> {
    check_scale(j, width, height)?;
    build_mask(width, height, j, None)
}

pub fn make_directional_mask(
    j: i32,
    l: usize,
    count: usize,
    width: usize,
    height: usize,
) -> Result<FilterMask> {
    check_scale(j, width, height)?;
    if count < 2 {
        return Err(Error::InvalidParameter(format!(
            "directional masks need at least 2 sectors, got {count}"
        )));
    }
    if l >= count {
        return Err(Error::BadDirectionIndex { index: l, count });
    }
    build_mask(width, height, j, Some((l, count)))
}

impl FilterMask {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn scale(&self) -> i32 {
        self.scale
    }

    pub fn direction(&self) -> Option<(usize, usize)> {
        self.direction
    }

    /// Gains in spectrum layout (DC at index 0).
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn gain(&self, m: usize, n: usize) -> f64 {
        self.gains[m * self.width + n]
    }

    /// Gains rearranged with DC at the center, for display.
    pub fn gain_image(&self) -> Field {
        let f = Field::from_raw(self.width, self.height, self.gains.clone());
        f.roll(self.height / 2, self.width / 2)
    }

    /// Writes the centered gains as a 16-bit PGM, 0 → 0 and 1 → 65535.
    pub fn export_pgm(&self, path: &Path) -> Result<()> {
        io::write_pgm16(path, &self.gain_image(), 0.0, 1.0)
    }

    /// `Σ|k|` over the circular convolution kernel of the mask; bounds the
    /// L¹ gain of filtering.
    pub fn impulse_response_l1(&self) -> Result<f64> {
        let coeffs = self.gains.iter().map(|&g| Complex64::new(g, 0.0)).collect();
        let spectrum = Spectrum::new(self.width, self.height, coeffs)?;
        let (kernel, _) = inverse_transform_with_residue(&spectrum)?;
        let unitary = ((self.width * self.height) as f64).sqrt();
        Ok(kernel.as_slice().iter().map(|k| k.abs()).sum::<f64>() / unitary)
    }
}

/// Multiplies a precomputed spectrum by the mask and returns the real field
/// plus the discarded imaginary magnitude.
pub fn apply_mask_to_spectrum(s: &Spectrum, m: &FilterMask) -> Result<(Field, f64)> {
    if s.dims() != m.dims() {
        return Err(Error::DimensionMismatch {
            left: s.dims(),
            right: m.dims(),
        });
    }
    let mut out = s.clone();
    for (c, g) in out.coeffs_mut().iter_mut().zip(&m.gains) {
        *c *= *g;
    }
    Ok(inverse_unchecked(&out))
}

pub fn apply_mask(f: &Field, m: &FilterMask) -> Result<Field> {
    if f.dims() != m.dims() {
        return Err(Error::DimensionMismatch {
            left: f.dims(),
            right: m.dims(),
        });
    }
    apply_mask_to_spectrum(&forward_transform(f), m).map(|(g, _)| g)
}

/// `⌈log₂ ω⌉`, the scale whose plateau `[2^{j−1}, 2^j]` holds `ω`.
pub fn select_scale(omega: f64) -> Result<i32> {
    if !(omega >= 1.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "frequency must be at least 1, got {omega}"
        )));
    }
    Ok(omega.log2().ceil() as i32)
}

/// As [`select_scale`], rejecting scales whose plateau passes Nyquist.
pub fn select_scale_for_grid(omega: f64, width: usize, height: usize) -> Result<i32> {
    let j = select_scale(omega)?;
    check_scale(j, width, height).map_err(|_| Error::FrequencyOutOfRange {
        frequency: omega,
        scale: j,
    })?;
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Ramp {
    #[default]
    Meyer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSpec {
    /// Strictly decreasing.
    pub scales: Vec<i32>,
    /// One entry per scale; 1 means isotropic.
    pub directions_per_scale: Vec<usize>,
    #[serde(default)]
    pub ramp: Ramp,
}

impl BankSpec {
    pub fn isotropic(scales: Vec<i32>) -> Self {
        let directions_per_scale = vec![1; scales.len()];
        Self {
            scales,
            directions_per_scale,
            ramp: Ramp::Meyer,
        }
    }

    /// The full support of the top scale, up to `2^{j+1}`, must fit under
    /// Nyquist.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidParameter("filter bank has no scales".into()));
        }
        if self.directions_per_scale.len() != self.scales.len() {
            return Err(Error::InvalidParameter(format!(
                "{} scales but {} direction counts",
                self.scales.len(),
                self.directions_per_scale.len()
            )));
        }
        if self.scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(
                "scales must be strictly decreasing".into(),
            ));
        }
        if self.directions_per_scale.contains(&0) {
            return Err(Error::InvalidParameter(
                "each scale needs at least one direction".into(),
            ));
        }
        let top = self.scales[0];
        let nyquist = (width.min(height) / 2) as f64;
        if 2f64.powi(top + 1) > nyquist {
            return Err(Error::ScaleOutOfRange {
                scale: top,
                width,
                height,
            });
        }
        for &j in &self.scales {
            check_scale(j, width, height)?;
        }
        Ok(())
    }

    /// Masks per scale: one radial mask, or `L` directional ones.
    pub fn masks(&self, width: usize, height: usize) -> Result<Vec<Vec<FilterMask>>> {
        self.validate(width, height)?;
        self.scales
            .iter()
            .zip(&self.directions_per_scale)
            .map(|(&j, &count)| {
                if count == 1 {
                    Ok(vec![make_radial_mask(j, width, height)?])
                } else {
                    (0..count)
                        .map(|l| make_directional_mask(j, l, count, width, height))
                        .collect()
                }
            })
            .collect()
    }
}
