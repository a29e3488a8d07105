//! Synthetic scenes with ground truth: hard-edged cartoon shapes, modulated
//! cosine textures under smooth envelopes, and band-limited white noise.
//!
//! Geometry is in torus units, `[0, 2π)` on both axes.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{inverse_transform, Field, Spectrum};
use crate::lpbank::meyer_nu;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Disk with periodic distance, so it may wrap across the seams.
    Disk {
        cx: f64,
        cy: f64,
        radius: f64,
    },
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
    /// Simple polygon, vertices in order.
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    Full,
}

fn wrap(d: f64) -> f64 {
    (d + PI).rem_euclid(2.0 * PI) - PI
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn inside_polygon(p: [f64; 2], v: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1])
            && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0]
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

impl Shape {
    /// Signed distance to the boundary, positive inside.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        match self {
            Shape::Disk { cx, cy, radius } => radius - wrap(x - cx).hypot(wrap(y - cy)),
            Shape::Rect { x0, y0, x1, y1 } => {
                let v = [[*x0, *y0], [*x1, *y0], [*x1, *y1], [*x0, *y1]];
                Shape::polygon_distance(&v, x, y)
            }
            Shape::Polygon { vertices } => Shape::polygon_distance(vertices, x, y),
            Shape::Full => f64::INFINITY,
        }
    }

    fn polygon_distance(v: &[[f64; 2]], x: f64, y: f64) -> f64 {
        let p = [x, y];
        let d = (0..v.len())
            .map(|i| segment_distance(p, v[i], v[(i + 1) % v.len()]))
            .fold(f64::INFINITY, f64::min);
        if inside_polygon(p, v) {
            d
        } else {
            -d
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.signed_distance(x, y) >= 0.0
    }

    fn validate(&self) -> Result<()> {
        let in_torus = |v: f64| (0.0..=2.0 * PI).contains(&v);
        let ok = match self {
            Shape::Disk { cx, cy, radius } => {
                *radius > 0.0 && *radius < PI && in_torus(*cx) && in_torus(*cy)
            }
            Shape::Rect { x0, y0, x1, y1 } => {
                x0 < x1 && y0 < y1 && [x0, y0, x1, y1].iter().all(|v| in_torus(**v))
            }
            Shape::Polygon { vertices } => {
                vertices.len() >= 3 && vertices.iter().all(|v| in_torus(v[0]) && in_torus(v[1]))
            }
            Shape::Full => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::SpecOutOfRange(format!(
                "shape outside the torus: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartoonSpec {
    pub shape: Shape,
    pub level: f64,
}

/// `amplitude · envelope(x) · cos(ω (x cos θ + y sin θ) + φ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    pub envelope: Shape,
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub phase: f64,
}

impl TextureSpec {
    /// Texture whose wave vector is the integer frequency `(kx, ky)`, so it
    /// is exactly periodic on the grid.
    pub fn tone(envelope: Shape, amplitude: f64, kx: i64, ky: i64) -> Self {
        Self {
            envelope,
            amplitude,
            omega: ((kx * kx + ky * ky) as f64).sqrt(),
            theta: (ky as f64).atan2(kx as f64),
            phase: 0.0,
        }
    }

    pub fn wave_vector(&self) -> (f64, f64) {
        (self.omega * self.theta.cos(), self.omega * self.theta.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub cutoff: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub size: usize,
    #[serde(default)]
    pub cartoon: Vec<CartoonSpec>,
    #[serde(default)]
    pub textures: Vec<TextureSpec>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    /// Width of the envelope transition in pixels.
    #[serde(default = "default_ramp")]
    pub envelope_ramp_px: f64,
}

fn default_ramp() -> f64 {
    2.0
}

/// Noise coefficients `g_{k,l}` for `|k|, |l| ≤ cutoff`, `k` along x.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCoefficients {
    pub cutoff: usize,
    values: Vec<Complex64>,
}

impl NoiseCoefficients {
    fn zeros(cutoff: usize) -> Self {
        let side = 2 * cutoff + 1;
        Self {
            cutoff,
            values: vec![Complex64::new(0.0, 0.0); side * side],
        }
    }

    fn slot(&self, k: i64, l: i64) -> usize {
        let c = self.cutoff as i64;
        ((l + c) * (2 * c + 1) + (k + c)) as usize
    }

    /// `None` outside the cutoff square.
    pub fn get(&self, k: i64, l: i64) -> Option<Complex64> {
        let c = self.cutoff as i64;
        (k.abs() <= c && l.abs() <= c).then(|| self.values[self.slot(k, l)])
    }

    fn set(&mut self, k: i64, l: i64, g: Complex64) {
        let s = self.slot(k, l);
        self.values[s] = g;
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub cartoon: Field,
    pub textures: Vec<Field>,
    pub noise: Field,
    pub noise_coefficients: Option<NoiseCoefficients>,
}

impl GroundTruth {
    /// Cartoon, then each texture, then noise; the scene is built in the
    /// same order so the sum is bitwise equal to it.
    pub fn compose(&self) -> Field {
        let mut f = self.cartoon.clone();
        for t in &self.textures {
            f = &f + t;
        }
        &f + &self.noise
    }
}

/// `σ·Σ g_{k,l} e^{i(kx+ly)}` over `|k|, |l| ≤ cutoff` with `g` standard
/// complex normal (`E|g|² = 1`), Hermitian-paired so the field is real; `g₀₀`
/// is real `N(0, 1)`.
pub fn make_filtered_noise(
    size: usize,
    sigma: f64,
    cutoff: usize,
    seed: u64,
) -> Result<(Field, NoiseCoefficients)> {
    if 2 * cutoff >= size {
        return Err(Error::CutoffOutOfRange { cutoff, size });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::SpecOutOfRange(format!(
            "noise σ must be non-negative, got {sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut g = NoiseCoefficients::zeros(cutoff);
    let c = cutoff as i64;
    g.set(0, 0, Complex64::new(normal(), 0.0));
    for l in 0..=c {
        for k in -c..=c {
            if l == 0 && k <= 0 {
                continue;
            }
            let z = Complex64::new(normal(), normal()) * std::f64::consts::FRAC_1_SQRT_2;
            g.set(k, l, z);
            g.set(-k, -l, z.conj());
        }
    }

    let zero = Field::zeros(size, size)?;
    if sigma == 0.0 {
        return Ok((zero, g));
    }
    let scale = sigma * size as f64;
    let mut spectrum = Spectrum::new(size, size, vec![Complex64::new(0.0, 0.0); size * size])?;
    for l in -c..=c {
        for k in -c..=c {
            let (m, n) = spectrum.index_of(k, l);
            spectrum.coeffs_mut()[m * size + n] = g.get(k, l).unwrap() * scale;
        }
    }
    Ok((inverse_transform(&spectrum)?, g))
}

impl SceneSpec {
    pub fn empty(size: usize) -> Self {
        Self {
            size,
            cartoon: Vec::new(),
            textures: Vec::new(),
            noise: None,
            envelope_ramp_px: default_ramp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        Field::zeros(self.size, self.size).map_err(|e| Error::SpecOutOfRange(e.to_string()))?;
        let nyquist = (self.size / 2) as f64;
        for c in &self.cartoon {
            c.shape.validate()?;
            if !c.level.is_finite() {
                return Err(Error::SpecOutOfRange("cartoon level must be finite".into()));
            }
        }
        for t in &self.textures {
            t.envelope.validate()?;
            let (kx, ky) = t.wave_vector();
            if !(t.omega > 0.0) || kx.abs() > nyquist || ky.abs() > nyquist {
                return Err(Error::SpecOutOfRange(format!(
                    "texture frequency {} at θ={} exceeds Nyquist {nyquist}",
                    t.omega, t.theta
                )));
            }
            if !t.amplitude.is_finite() {
                return Err(Error::SpecOutOfRange(
                    "texture amplitude must be finite".into(),
                ));
            }
        }
        if let Some(n) = &self.noise {
            if 2 * n.cutoff >= self.size {
                return Err(Error::CutoffOutOfRange {
                    cutoff: n.cutoff,
                    size: self.size,
                });
            }
        }
        if !(self.envelope_ramp_px >= 0.0) {
            return Err(Error::SpecOutOfRange(
                "envelope ramp must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Texture frequencies rescaled, for sweeps.
    pub fn with_texture_omega(&self, index: usize, omega: f64) -> Self {
        let mut s = self.clone();
        s.textures[index].omega = omega;
        s
    }
}

/// Smoothed indicator: ν-ramp across `[−ramp/2, ramp/2]` of signed distance.
fn envelope(shape: &Shape, x: f64, y: f64, ramp: f64) -> f64 {
    let d = shape.signed_distance(x, y);
    if ramp == 0.0 {
        return if d >= 0.0 { 1.0 } else { 0.0 };
    }
    meyer_nu(0.5 + d / ramp)
}

pub fn make_scene(spec: &SceneSpec) -> Result<(Field, GroundTruth)> {
    spec.validate()?;
    let n = spec.size;
    let ramp = spec.envelope_ramp_px * 2.0 * PI / n as f64;
    let cartoon = Field::from_torus_fn(n, n, |x, y| {
        spec.cartoon
            .iter()
            .filter(|c| c.shape.contains(x, y))
            .map(|c| c.level)
            .sum()
    })?;
    let textures = spec
        .textures
        .iter()
        .map(|t| {
            let (kx, ky) = t.wave_vector();
            Field::from_torus_fn(n, n, |x, y| {
                let e = envelope(&t.envelope, x, y, ramp);
                if e == 0.0 {
                    0.0
                } else {
                    t.amplitude * e * (kx * x + ky * y + t.phase).cos()
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (noise, noise_coefficients) = match &spec.noise {
        Some(ns) => {
            let (f, g) = make_filtered_noise(n, ns.sigma, ns.cutoff, ns.seed)?;
            (f, Some(g))
        }
        None => (Field::zeros(n, n)?, None),
    };
    let truth = GroundTruth {
        cartoon,
        textures,
        noise,
        noise_coefficients,
    };
    Ok((truth.compose(), truth))
}

/// Cartoon of the standard test image: one axis-aligned rectangle on a
/// flat background, in gray levels.
///
/// Axis-aligned edges are exact on the pixel grid; curved or slanted edges
/// pick up staircase content that ends up in the texture part.
pub fn standard_cartoon() -> Vec<CartoonSpec> {
    vec![CartoonSpec {
        shape: Shape::Rect {
            x0: 0.9,
            y0: 0.9,
            x1: 3.1,
            y1: 5.4,
        },
        level: 100.0,
    }]
}

pub const HIGH_TEXTURE_AMPLITUDE: f64 = 10.0;
pub const LOW_TEXTURE_AMPLITUDE: f64 = 0.5;

/// Standard test image: the standard cartoon, a low texture `b·cos(ω₁x)`
/// under a rectangle and a high texture `c·cos(ω₂x)` under a disk.
/// At 512² with `ω₁ = 25.6`, `ω₂ = 256` this is the reference scene.
pub fn standard_scene(size: usize, omega1: f64, omega2: f64) -> SceneSpec {
    SceneSpec {
        size,
        cartoon: standard_cartoon(),
        textures: vec![
            TextureSpec {
                envelope: Shape::Rect {
                    x0: 3.4,
                    y0: 3.4,
                    x1: 5.8,
                    y1: 5.8,
                },
                amplitude: LOW_TEXTURE_AMPLITUDE,
                omega: omega1,
                theta: 0.0,
                phase: 0.0,
            },
            TextureSpec {
                envelope: Shape::Disk {
                    cx: 4.6,
                    cy: 1.6,
                    radius: 1.2,
                },
                amplitude: HIGH_TEXTURE_AMPLITUDE,
                omega: omega2,
                theta: 0.0,
                phase: 0.0,
            },
        ],
        noise: None,
        envelope_ramp_px: default_ramp(),
    }
}

pub fn reference_scene() -> SceneSpec {
    standard_scene(512, 25.6, 256.0)
}

/// Two full-field tones in consecutive dyadic shells over a small cartoon:
/// `(kx, ky)` chosen with `|k|` about 0.84·2^{j} and 1.12·2^{j−2}, where
/// `j = log₂(size) − 2`.
pub fn two_shell_scene(size: usize) -> SceneSpec {
    let top = size as i64 / 4;
    let hi = (top * 3 / 4, top * 3 / 8);
    let lo = (top / 4, top / 8);
    SceneSpec {
        size,
        cartoon: vec![CartoonSpec {
            shape: Shape::Disk {
                cx: PI,
                cy: PI,
                radius: 1.0,
            },
            level: 1.0,
        }],
        textures: vec![
            TextureSpec::tone(Shape::Full, 0.5, hi.0, hi.1),
            TextureSpec::tone(Shape::Full, 0.5, lo.0, lo.1),
        ],
        noise: None,
        envelope_ramp_px: default_ramp(),
    }
}

/// One texture per quadrant: two in the shell `[2^{j−1}, 2^j]` and two in
/// the shell below, each at the center of an angular sector of an 8+4
/// direction tiling.
pub fn four_texture_scene(size: usize) -> SceneSpec {
    let top = (size / 4) as f64;
    let quad = |i: usize| {
        let (x0, y0) = ((i % 2) as f64 * PI, (i / 2) as f64 * PI);
        Shape::Rect {
            x0: x0 + 0.15,
            y0: y0 + 0.15,
            x1: x0 + PI - 0.15,
            y1: y0 + PI - 0.15,
        }
    };
    let tex = |i: usize, omega: f64, theta: f64| TextureSpec {
        envelope: quad(i),
        amplitude: 0.5,
        omega,
        theta,
        phase: 0.0,
    };
    SceneSpec {
        size,
        cartoon: vec![CartoonSpec {
            shape: Shape::Disk {
                cx: PI,
                cy: PI,
                radius: 0.7,
            },
            level: 1.0,
        }],
        textures: vec![
            tex(0, 0.75 * top, PI / 8.0),
            tex(1, 0.75 * top, 5.0 * PI / 8.0),
            tex(2, 0.25 * top, PI / 4.0),
            tex(3, 0.25 * top, 3.0 * PI / 4.0),
        ],
        noise: None,
        envelope_ramp_px: default_ramp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{forward_transform, norm_l2sq};

    #[test]
    fn empty_spec_is_zero() {
        let (f, truth) = make_scene(&SceneSpec::empty(32)).unwrap();
        assert_eq!(f.max_abs(), 0.0);
        assert!(truth.textures.is_empty());
    }

    #[test]
    fn full_tone_energy() {
        let mut spec = SceneSpec::empty(128);
        spec.textures.push(TextureSpec {
            envelope: Shape::Full,
            amplitude: 1.0,
            omega: 32.0,
            theta: 0.0,
            phase: 0.0,
        });
        let (f, _) = make_scene(&spec).unwrap();
        assert!((norm_l2sq(&f) / (2.0 * PI * PI) - 1.0).abs() < 0.01);
    }

    #[test]
    fn parts_sum_bitwise() {
        let mut spec = standard_scene(128, 12.8, 50.0);
        spec.noise = Some(NoiseSpec {
            sigma: 0.01,
            cutoff: 20,
            seed: 3,
        });
        let (f, truth) = make_scene(&spec).unwrap();
        assert_eq!(f, truth.compose());
        assert!(truth.noise.max_abs() > 0.0);
    }

    #[test]
    fn rejects_out_of_range_specs() {
        let spec = standard_scene(128, 12.8, 80.0);
        assert!(matches!(make_scene(&spec), Err(Error::SpecOutOfRange(_))));
        let mut spec = SceneSpec::empty(64);
        spec.noise = Some(NoiseSpec {
            sigma: 1.0,
            cutoff: 32,
            seed: 0,
        });
        assert!(matches!(
            make_scene(&spec),
            Err(Error::CutoffOutOfRange { .. })
        ));
        let mut spec = SceneSpec::empty(64);
        spec.cartoon.push(CartoonSpec {
            shape: Shape::Rect {
                x0: 1.0,
                y0: 1.0,
                x1: 7.0,
                y1: 2.0,
            },
            level: 1.0,
        });
        assert!(make_scene(&spec).is_err());
    }

    #[test]
    fn noise_is_real_reproducible_and_hermitian() {
        let (a, ga) = make_filtered_noise(64, 0.3, 10, 42).unwrap();
        let (b, gb) = make_filtered_noise(64, 0.3, 10, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        assert_ne!(a, make_filtered_noise(64, 0.3, 10, 43).unwrap().0);
        for k in -10..=10 {
            for l in -10..=10 {
                let z = ga.get(k, l).unwrap();
                assert_eq!(z, ga.get(-k, -l).unwrap().conj());
            }
        }
        assert!(ga.get(11, 0).is_none());
        let (zero, _) = make_filtered_noise(64, 0.0, 10, 42).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn noise_variance_matches_coefficient_count() {
        let (n, cutoff) = (256, 64);
        let mut total = 0.0;
        for seed in 0..20 {
            let (f, _) = make_filtered_noise(n, 1.0, cutoff, seed).unwrap();
            total += f.as_slice().iter().map(|v| v * v).sum::<f64>() / f.len() as f64;
        }
        let expected = ((2 * cutoff + 1) as f64).powi(2);
        assert!((total / 20.0 / expected - 1.0).abs() < 0.05);
    }

    #[test]
    fn texture_energy_sits_on_its_ring() {
        let mut spec = SceneSpec::empty(256);
        spec.textures.push(TextureSpec {
            envelope: Shape::Disk {
                cx: PI,
                cy: PI,
                radius: 1.5,
            },
            amplitude: 1.0,
            omega: 40.0,
            theta: 0.6,
            phase: 0.3,
        });
        let (f, _) = make_scene(&spec).unwrap();
        let s = forward_transform(&f);
        let total: f64 = s.coeffs().iter().map(|c| c.norm_sqr()).sum();
        let captured = |delta: f64| {
            let mut ring = 0.0;
            for m in 0..256 {
                for k in 0..256 {
                    if (s.radial_frequency(m, k) - 40.0).abs() <= delta * 40.0 {
                        ring += s.get(m, k).norm_sqr();
                    }
                }
            }
            ring / total
        };
        let delta = (1..=100)
            .map(|i| i as f64 / 100.0)
            .find(|&d| captured(d) >= 0.99)
            .unwrap();
        eprintln!("99% of the texture energy within ±{delta}·ω");
        assert!(delta <= 0.5);
    }

    #[test]
    fn shapes() {
        let d = Shape::Disk {
            cx: 0.1,
            cy: 0.1,
            radius: 0.5,
        };
        assert!(d.contains(2.0 * PI - 0.1, 0.1));
        let t = Shape::Polygon {
            vertices: vec![[1.0, 1.0], [3.0, 1.0], [1.0, 3.0]],
        };
        assert!(t.contains(1.5, 1.5));
        assert!(!t.contains(2.5, 2.5));
        assert!((t.signed_distance(2.0, 0.5) + 0.5).abs() < 1e-12);
        let r = Shape::Rect {
            x0: 1.0,
            y0: 1.0,
            x1: 2.0,
            y1: 2.0,
        };
        assert!((r.signed_distance(1.5, 1.2) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn reference_scene_builds() {
        let spec = reference_scene();
        assert_eq!(spec.size, 512);
        assert_eq!(spec.textures[0].omega, 25.6);
        assert_eq!(spec.textures[1].omega, 256.0);
        assert!(spec.validate().is_ok());
    }
}
