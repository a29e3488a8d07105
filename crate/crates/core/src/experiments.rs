//! Drivers for the quantitative checks: texture-retrieval error curves,
//! log-amplitude spectra, and the noise-coefficient diagnostic.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decomp::{decompose, Decomposition, ModelParams};
use crate::error::{Error, Result};
use crate::field::{forward_transform, norm_l1, Field, Spectrum};
use crate::lpbank::{apply_mask_to_spectrum, make_radial_mask, FilterMask};
use crate::projector::ProjectionConfig;
use crate::synth::{make_scene, NoiseCoefficients, SceneSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub omega2: f64,
    /// `‖Δ_j[w] − texture‖_{L¹}`.
    pub err_w: f64,
    /// `‖Δ_j[f] − texture‖_{L¹}`.
    pub err_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub scale: i32,
    pub rows: Vec<ErrorRow>,
    /// Least-squares fit of `ln err_w` against `ln ω₂`.
    pub slope: f64,
    pub intercept: f64,
}

impl ErrorCurve {
    pub fn spearman(&self) -> f64 {
        let x: Vec<f64> = self.rows.iter().map(|r| r.omega2).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.err_w).collect();
        spearman(&x, &y)
    }

    pub fn w_beats_f_everywhere(&self) -> bool {
        self.rows.iter().all(|r| r.err_w <= r.err_f)
    }

    /// Header `omega2,err_w,err_f`, one row per point, then `# slope=<v>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega2,err_w,err_f\n");
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.omega2, r.err_w, r.err_f).unwrap();
        }
        writeln!(out, "# slope={}", self.slope).unwrap();
        out
    }
}

/// `count` log-spaced points in `[2^{j−1}·1.05, 2^j·0.95]`.
pub fn default_sweep(j: i32, count: usize) -> Vec<f64> {
    let lo = 2f64.powi(j - 1) * 1.05;
    let hi = 2f64.powi(j) * 0.95;
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // ties share the average rank
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of the ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// One sweep point: the errors plus the decomposition behind them.
pub struct SweepPoint {
    pub row: ErrorRow,
    pub decomposition: Decomposition,
}

/// Measures both retrieval errors for one scene.
pub fn error_point(
    spec: &SceneSpec,
    texture: usize,
    params: &ModelParams,
    pcfg: &ProjectionConfig,
    mask: &FilterMask,
) -> Result<SweepPoint> {
    let (f, truth) = make_scene(spec)?;
    let planted = truth
        .textures
        .get(texture)
        .ok_or_else(|| Error::InvalidParameter(format!("scene has no texture {texture}")))?;
    let d = decompose(&f, params, pcfg)?;
    let (dw, _) = apply_mask_to_spectrum(&forward_transform(&d.w), mask)?;
    let (df, _) = apply_mask_to_spectrum(&forward_transform(&f), mask)?;
    Ok(SweepPoint {
        row: ErrorRow {
            omega2: spec.textures[texture].omega,
            err_w: norm_l1(&(&dw - planted)),
            err_f: norm_l1(&(&df - planted)),
        },
        decomposition: d,
    })
}

/// Sweeps the frequency of texture `texture` of `base` over `omegas`, with
/// the decomposition parameters and the mask scale `j` fixed.
pub fn error_curve(
    base: &SceneSpec,
    texture: usize,
    omegas: &[f64],
    params: &ModelParams,
    pcfg: &ProjectionConfig,
    j: i32,
) -> Result<ErrorCurve> {
    if omegas.len() < 2 {
        return Err(Error::InvalidParameter(
            "a sweep needs at least two frequencies".into(),
        ));
    }
    if omegas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "sweep frequencies must increase".into(),
        ));
    }
    let (lo, hi) = (2f64.powi(j - 2), 2f64.powi(j + 1));
    if omegas[0] <= lo || omegas[omegas.len() - 1] >= hi {
        return Err(Error::InvalidParameter(format!(
            "sweep must stay inside the mask support ({lo}, {hi})"
        )));
    }
    if texture >= base.textures.len() {
        return Err(Error::InvalidParameter(format!(
            "scene has no texture {texture}"
        )));
    }
    let mask = make_radial_mask(j, base.size, base.size)?;
    let rows = omegas
        .iter()
        .map(|&om| {
            error_point(
                &base.with_texture_omega(texture, om),
                texture,
                params,
                pcfg,
                &mask,
            )
            .map(|p| p.row)
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.omega2.ln()).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| r.err_w.max(f64::MIN_POSITIVE).ln())
        .collect();
    let (slope, intercept) = linear_fit(&x, &y);
    Ok(ErrorCurve {
        scale: j,
        rows,
        slope,
        intercept,
    })
}

/// `log(1 + |c|)` with DC moved to the center, scaled to `[0, 1]`.
pub fn spectrum_image(f: &Field) -> Field {
    let s = forward_transform(f);
    let (w, h) = f.dims();
    let mags: Vec<f64> = s.coeffs().iter().map(|c| c.norm().ln_1p()).collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    let scaled = if peak > 0.0 {
        mags.iter().map(|m| m / peak).collect()
    } else {
        mags
    };
    Field::new(w, h, scaled)
        .expect("spectrum dims are valid")
        .roll(h / 2, w / 2)
}

fn axis_energy(s: &Spectrum, halfwidth: i64) -> f64 {
    let (w, h) = s.dims();
    let mut e = 0.0;
    for m in 0..h {
        for n in 0..w {
            let (fx, fy) = s.frequency(m, n);
            if (fx, fy) != (0, 0) && (fx.abs() <= halfwidth || fy.abs() <= halfwidth) {
                e += s.get(m, n).norm_sqr();
            }
        }
    }
    e
}

/// Spectral energy within `halfwidth` bins of either frequency axis (DC
/// excluded), of `a` relative to `b`.
pub fn axis_leakage_ratio(a: &Field, b: &Field, halfwidth: i64) -> Result<f64> {
    a.check_same_dims(b)?;
    let (ea, eb) = (
        axis_energy(&forward_transform(a), halfwidth),
        axis_energy(&forward_transform(b), halfwidth),
    );
    Ok(if eb > 0.0 { ea / eb } else { f64::INFINITY })
}

/// Fraction of the spectral energy of `f` with `lo ≤ |ξ| ≤ hi`.
pub fn ring_energy_fraction(f: &Field, lo: f64, hi: f64) -> f64 {
    let s = forward_transform(f);
    let (w, h) = s.dims();
    let (mut ring, mut total) = (0.0, 0.0);
    for m in 0..h {
        for n in 0..w {
            let e = s.get(m, n).norm_sqr();
            total += e;
            let r = s.radial_frequency(m, n);
            if r >= lo && r <= hi {
                ring += e;
            }
        }
    }
    if total > 0.0 {
        ring / total
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseDeviation {
    pub k: i64,
    pub l: i64,
    pub deviation: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseDiagnostic {
    pub epsilon: f64,
    pub cutoff: usize,
    pub deviations: Vec<NoiseDeviation>,
    pub pass_ratio: f64,
}

/// Compares the Fourier coefficients of `w`, normalized to the noise
/// amplitude `σ`, with the planted `g_{k,l}` at every nonzero frequency of the
/// cutoff square, against the bound `ε·N_c/|k|`.
pub fn noise_diagnostic(
    w: &Field,
    truth: &NoiseCoefficients,
    sigma: f64,
    epsilon: f64,
) -> Result<NoiseDiagnostic> {
    let (width, height) = w.dims();
    if width != height || 2 * truth.cutoff >= width {
        return Err(Error::DimensionMismatch {
            left: w.dims(),
            right: (2 * truth.cutoff + 1, 2 * truth.cutoff + 1),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise σ must be positive, got {sigma}"
        )));
    }
    let s = forward_transform(w);
    let norm = sigma * width as f64;
    let c = truth.cutoff as i64;
    let mut deviations = Vec::new();
    for l in -c..=c {
        for k in -c..=c {
            if (k, l) == (0, 0) {
                continue;
            }
            let (m, n) = s.index_of(k, l);
            let estimate = s.get(m, n) / norm;
            let g = truth.get(k, l).expect("inside the cutoff square");
            let radius = ((k * k + l * l) as f64).sqrt();
            deviations.push(NoiseDeviation {
                k,
                l,
                deviation: (estimate - g).norm(),
                bound: epsilon * c as f64 / radius,
            });
        }
    }
    let passed = deviations.iter().filter(|d| d.deviation <= d.bound).count();
    Ok(NoiseDiagnostic {
        epsilon,
        cutoff: truth.cutoff,
        pass_ratio: passed as f64 / deviations.len() as f64,
        deviations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_filtered_noise, Shape, TextureSpec};

    #[test]
    fn sweep_and_fit_helpers() {
        let s = default_sweep(8, 12);
        assert_eq!(s.len(), 12);
        assert!((s[0] - 134.4).abs() < 1e-9);
        assert!((s[11] - 243.2).abs() < 1e-9);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        let x = [1.0, 2.0, 3.0];
        let (m, b) = linear_fit(&x, &[3.0, 5.0, 7.0]);
        assert!((m - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        assert_eq!(spearman(&x, &[9.0, 4.0, 1.0]), -1.0);
        assert!(
            (spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 2.0]) - 0.8f64.sqrt()).abs() < 1e-12
        );
    }

    #[test]
    fn spectrum_image_basics() {
        let zero = spectrum_image(&Field::zeros(16, 16).unwrap());
        assert_eq!(zero.max_abs(), 0.0);
        let tone = Field::from_torus_fn(16, 16, |x, _| (3.0 * x).cos()).unwrap();
        let img = spectrum_image(&tone);
        let bright: Vec<usize> = (0..256).filter(|&i| img.as_slice()[i] == 1.0).collect();
        assert_eq!(bright, vec![8 * 16 + 5, 8 * 16 + 11]);
        let shifted = spectrum_image(&tone.roll(3, 5));
        assert!(shifted.max_abs_diff(&img) < 1e-10);
    }

    #[test]
    fn csv_format_is_stable() {
        let curve = ErrorCurve {
            scale: 3,
            rows: vec![
                ErrorRow {
                    omega2: 5.0,
                    err_w: 0.5,
                    err_f: 1.0,
                },
                ErrorRow {
                    omega2: 6.0,
                    err_w: 0.25,
                    err_f: 1.0,
                },
            ],
            slope: -1.5,
            intercept: 0.0,
        };
        assert_eq!(
            curve.to_csv(),
            "omega2,err_w,err_f\n5,0.5,1\n6,0.25,1\n# slope=-1.5\n"
        );
        assert!(curve.w_beats_f_everywhere());
        assert_eq!(curve.spearman(), -1.0);
    }

    #[test]
    fn sweep_validation() {
        let base = SceneSpec::empty(64);
        let p = ModelParams::default();
        let c = ProjectionConfig::default();
        assert!(error_curve(&base, 0, &[], &p, &c, 4).is_err());
        assert!(error_curve(&base, 0, &[10.0, 9.0], &p, &c, 4).is_err());
        assert!(error_curve(&base, 0, &[2.0, 10.0], &p, &c, 4).is_err());
        assert!(error_curve(&base, 0, &[10.0, 12.0], &p, &c, 4).is_err());
    }

    #[test]
    fn zero_amplitude_texture_gives_flat_errors() {
        let mut base = SceneSpec::empty(32);
        base.textures.push(TextureSpec {
            envelope: Shape::Full,
            amplitude: 0.0,
            omega: 6.0,
            theta: 0.0,
            phase: 0.0,
        });
        let curve = error_curve(
            &base,
            0,
            &[5.0, 6.0, 7.0],
            &ModelParams::default(),
            &ProjectionConfig::default(),
            3,
        )
        .unwrap();
        for r in &curve.rows {
            assert_eq!(r.err_w, 0.0);
            assert_eq!(r.err_f, 0.0);
        }
    }

    #[test]
    fn noise_diagnostic_on_exact_noise() {
        let (noise, g) = make_filtered_noise(64, 0.2, 12, 5).unwrap();
        let d = noise_diagnostic(&noise, &g, 0.2, 1e-6).unwrap();
        assert_eq!(d.pass_ratio, 1.0);
        assert!(d.deviations.iter().all(|x| x.deviation < 1e-12));
        assert_eq!(d.deviations.len(), 25 * 25 - 1);
    }

    #[test]
    fn ring_fraction_of_tone() {
        let tone = Field::from_torus_fn(32, 32, |x, y| (3.0 * x + 4.0 * y).cos()).unwrap();
        assert!((ring_energy_fraction(&tone, 4.5, 5.5) - 1.0).abs() < 1e-12);
        assert!(ring_energy_fraction(&tone, 6.0, 9.0) < 1e-20);
    }
}
