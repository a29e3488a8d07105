//! Multiscale texture separation.
//!
//! Starting from `f₀ = f` at the top scale, each step decomposes the current
//! image, band-passes its texture part with the scale's Littlewood-Paley
//! mask to get the layer `w_j`, and hands `f_{j+1} = f_j − w_j` to the next
//! (lower) scale, with `μ` halved. The layers telescope:
//! `f = f_J + Σ w_j`.

use serde::{Deserialize, Serialize};

use crate::decomp::{decompose, Decomposition, ModelParams, StopReason};
use crate::error::{Error, Result};
use crate::field::{forward_transform, norm_l2sq, Field};
use crate::lpbank::{apply_mask_to_spectrum, make_radial_mask, BankSpec, FilterMask};
use crate::projector::ProjectionConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtsConfig {
    /// Number of scales `J`.
    pub scales: usize,
    /// Scale `j₁` of the first layer; later layers use `j₁ − 1, j₁ − 2, …`.
    pub top_scale: i32,
    pub lambda: f64,
    /// `μ` at the top scale, halved at every step down.
    pub mu_top: f64,
    /// Sectors per scale for the directional pipeline; empty means isotropic.
    #[serde(default)]
    pub directions: Vec<usize>,
    #[serde(default = "default_outer_iterations")]
    pub outer_iterations: usize,
    #[serde(default = "default_outer_tolerance")]
    pub outer_tolerance: f64,
    #[serde(default)]
    pub projection: ProjectionConfig,
    /// Keep every intermediate `f_j`.
    #[serde(default)]
    pub keep_intermediates: bool,
}

fn default_outer_iterations() -> usize {
    ModelParams::default().outer_iterations
}

fn default_outer_tolerance() -> f64 {
    ModelParams::default().outer_tolerance
}

impl MtsConfig {
    /// Top scale `log₂ N − 2` (the highest whose whole mask fits under
    /// Nyquist), `λ = 1`, and `μ₁ = 100·2^{j₁}/256`.
    pub fn for_grid(size: usize, scales: usize) -> Self {
        let top = size.max(4).ilog2() as i32 - 2;
        Self {
            scales,
            top_scale: top,
            lambda: 1.0,
            mu_top: 100.0 * 2f64.powi(top) / 256.0,
            directions: Vec::new(),
            outer_iterations: default_outer_iterations(),
            outer_tolerance: default_outer_tolerance(),
            projection: ProjectionConfig::default(),
            keep_intermediates: false,
        }
    }

    pub fn scale_at(&self, index: usize) -> i32 {
        self.top_scale - index as i32
    }

    pub fn mu_at(&self, index: usize) -> f64 {
        self.mu_top / 2f64.powi(index as i32)
    }

    pub fn params_at(&self, index: usize) -> ModelParams {
        ModelParams {
            lambda: self.lambda,
            mu: self.mu_at(index),
            outer_iterations: self.outer_iterations,
            outer_tolerance: self.outer_tolerance,
        }
    }

    pub fn bank(&self) -> BankSpec {
        let scales = (0..self.scales).map(|i| self.scale_at(i)).collect();
        if self.directions.is_empty() {
            BankSpec::isotropic(scales)
        } else {
            BankSpec {
                scales,
                directions_per_scale: self.directions.clone(),
                ramp: Default::default(),
            }
        }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.scales < 1 {
            return Err(Error::InvalidParameter(
                "at least one scale is required".into(),
            ));
        }
        if self.scale_at(self.scales - 1) < 0 {
            return Err(Error::ScaleOutOfRange {
                scale: self.scale_at(self.scales - 1),
                width,
                height,
            });
        }
        self.params_at(0).validate()?;
        self.projection.validate()?;
        self.bank().validate(width, height)
    }
}

/// How a layer's decomposition ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum LayerStatus {
    Converged,
    NotConverged,
    Failed(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerStats {
    pub index: usize,
    pub scale: i32,
    pub mu: f64,
    pub status: LayerStatus,
    /// `‖w_j‖²`.
    pub energy: f64,
    pub outer_iterations: usize,
    pub stop_reason: Option<StopReason>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub stats: LayerStats,
    pub w: Field,
}

#[derive(Debug, Clone)]
pub struct MtsResult {
    pub layers: Vec<Layer>,
    pub residual: Field,
    /// `f₀, f₁, …` when requested.
    pub intermediates: Vec<Field>,
    /// False if some layer failed; layers after it were not computed.
    pub complete: bool,
    pub failure: Option<LayerStats>,
}

fn sum_fields(base: &Field, parts: impl IntoIterator<Item = Field>) -> Field {
    parts.into_iter().fold(base.clone(), |acc, p| &acc + &p)
}

impl MtsResult {
    /// `max|f − (f_J + Σ w_j)|`.
    pub fn reconstruction_error(&self, f: &Field) -> f64 {
        let sum = sum_fields(&self.residual, self.layers.iter().map(|l| l.w.clone()));
        sum.max_abs_diff(f)
    }
}

pub struct ScaleStep {
    pub w: Field,
    pub next: Field,
    pub decomposition: Decomposition,
}

/// One isotropic separation step: decompose, band-pass the texture part,
/// subtract it.
pub fn separate_scale(
    f: &Field,
    j: i32,
    params: &ModelParams,
    pcfg: &ProjectionConfig,
) -> Result<ScaleStep> {
    let mask = make_radial_mask(j, f.width(), f.height())?;
    let decomposition = decompose(f, params, pcfg)?;
    let (w, _) = apply_mask_to_spectrum(&forward_transform(&decomposition.w), &mask)?;
    let next = f - &w;
    Ok(ScaleStep {
        w,
        next,
        decomposition,
    })
}

fn stats_for(index: usize, cfg: &MtsConfig, d: &Decomposition, layer_energy: f64) -> LayerStats {
    LayerStats {
        index,
        scale: cfg.scale_at(index),
        mu: cfg.mu_at(index),
        status: if d.converged() {
            LayerStatus::Converged
        } else {
            LayerStatus::NotConverged
        },
        energy: layer_energy,
        outer_iterations: d.iterations,
        stop_reason: Some(d.stop_reason),
        objective: d.energy,
    }
}

fn failed(index: usize, cfg: &MtsConfig, e: &Error) -> LayerStats {
    LayerStats {
        index,
        scale: cfg.scale_at(index),
        mu: cfg.mu_at(index),
        status: LayerStatus::Failed(e.to_string()),
        energy: 0.0,
        outer_iterations: 0,
        stop_reason: None,
        objective: f64::NAN,
    }
}

pub fn run_mts(f: &Field, cfg: &MtsConfig) -> Result<MtsResult> {
    let mut cfg = cfg.clone();
    cfg.directions.clear();
    cfg.validate(f.width(), f.height())?;
    let mut current = f.clone();
    let mut result = MtsResult {
        layers: Vec::new(),
        residual: f.clone(),
        intermediates: Vec::new(),
        complete: true,
        failure: None,
    };
    for index in 0..cfg.scales {
        if cfg.keep_intermediates {
            result.intermediates.push(current.clone());
        }
        match separate_scale(
            &current,
            cfg.scale_at(index),
            &cfg.params_at(index),
            &cfg.projection,
        ) {
            Ok(step) => {
                let stats = stats_for(index, &cfg, &step.decomposition, norm_l2sq(&step.w));
                result.layers.push(Layer { stats, w: step.w });
                current = step.next;
            }
            Err(e) => {
                result.complete = false;
                result.failure = Some(failed(index, &cfg, &e));
                break;
            }
        }
    }
    if cfg.keep_intermediates {
        result.intermediates.push(current.clone());
    }
    result.residual = current;
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct DirectionalLayer {
    pub stats: LayerStats,
    /// One channel per sector, in sector order.
    pub channels: Vec<Field>,
    /// The radial-mask layer of the same texture part.
    pub isotropic: Field,
}

#[derive(Debug, Clone)]
pub struct DirectionalMtsResult {
    pub layers: Vec<DirectionalLayer>,
    pub residual: Field,
    pub complete: bool,
    pub failure: Option<LayerStats>,
}

impl DirectionalMtsResult {
    pub fn reconstruction_error(&self, f: &Field) -> f64 {
        let sum = sum_fields(
            &self.residual,
            self.layers.iter().flat_map(|l| l.channels.iter().cloned()),
        );
        sum.max_abs_diff(f)
    }

    /// Largest `max|Σ_l w_j^l − w_j|` over the layers.
    pub fn directional_sum_error(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                let zero = l.isotropic.map(|_| 0.0);
                sum_fields(&zero, l.channels.iter().cloned()).max_abs_diff(&l.isotropic)
            })
            .fold(0.0, f64::max)
    }
}

/// Directional pipeline: each scale's texture part goes through the sector
/// masks of that scale, and the sum of all channels is subtracted.
pub fn run_dmts(f: &Field, cfg: &MtsConfig) -> Result<DirectionalMtsResult> {
    let mut cfg = cfg.clone();
    if cfg.directions.is_empty() {
        cfg.directions = vec![1; cfg.scales];
    }
    cfg.validate(f.width(), f.height())?;
    let masks: Vec<Vec<FilterMask>> = cfg.bank().masks(f.width(), f.height())?;
    let mut current = f.clone();
    let mut result = DirectionalMtsResult {
        layers: Vec::new(),
        residual: f.clone(),
        complete: true,
        failure: None,
    };
    for (index, sector_masks) in masks.iter().enumerate() {
        let step = decompose(&current, &cfg.params_at(index), &cfg.projection).and_then(|d| {
            let spectrum = forward_transform(&d.w);
            let radial = make_radial_mask(cfg.scale_at(index), f.width(), f.height())?;
            let (isotropic, _) = apply_mask_to_spectrum(&spectrum, &radial)?;
            let channels = sector_masks
                .iter()
                .map(|m| apply_mask_to_spectrum(&spectrum, m).map(|(c, _)| c))
                .collect::<Result<Vec<_>>>()?;
            Ok((d, isotropic, channels))
        });
        match step {
            Ok((d, isotropic, channels)) => {
                for c in &channels {
                    current = &current - c;
                }
                let energy = channels.iter().map(norm_l2sq).sum();
                result.layers.push(DirectionalLayer {
                    stats: stats_for(index, &cfg, &d, energy),
                    channels,
                    isotropic,
                });
            }
            Err(e) => {
                result.complete = false;
                result.failure = Some(failed(index, &cfg, &e));
                break;
            }
        }
    }
    result.residual = current;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{inner_product, norm_tv};
    use crate::synth::{make_scene, two_shell_scene, CartoonSpec, SceneSpec, Shape};
    use std::f64::consts::PI;

    #[test]
    fn default_config() {
        let cfg = MtsConfig::for_grid(512, 3);
        assert_eq!(cfg.top_scale, 7);
        assert_eq!(cfg.mu_top, 50.0);
        assert_eq!(cfg.mu_at(2), 12.5);
        assert_eq!(cfg.scale_at(2), 5);
        assert!(cfg.validate(512, 512).is_ok());
        let mut bad = cfg.clone();
        bad.top_scale = 8;
        assert!(bad.validate(512, 512).is_err());
        bad.top_scale = 1;
        assert!(bad.validate(512, 512).is_err());
        bad = cfg.clone();
        bad.scales = 0;
        assert!(bad.validate(512, 512).is_err());
    }

    #[test]
    fn low_frequency_input_is_untouched() {
        // the decomposition spreads a little content to every band, so only
        // the stopband itself is exactly empty
        let f =
            Field::from_torus_fn(64, 64, |x, y| (2.0 * x).cos() + 0.5 * (3.0 * y).sin()).unwrap();
        let step = separate_scale(&f, 4, &ModelParams::new(1.0, 6.0), &Default::default()).unwrap();
        let spec = forward_transform(&step.w);
        for m in 0..64usize {
            for n in 0..64usize {
                let (a, b) = (m.min(64 - m) as f64, n.min(64 - n) as f64);
                if a * a + b * b <= 16.0 {
                    assert!(spec.get(m, n).norm() < 1e-12);
                }
            }
        }
        assert!(norm_l2sq(&step.w).sqrt() <= 0.05 * norm_l2sq(&f).sqrt());
        assert!((&(&step.w + &step.next) - &f).max_abs() <= 1e-12);
    }

    #[test]
    fn two_shells_are_separated() {
        let spec = two_shell_scene(128);
        let (f, truth) = make_scene(&spec).unwrap();
        let cfg = MtsConfig::for_grid(128, 2);
        let res = run_mts(&f, &cfg).unwrap();
        assert!(res.complete);
        assert!(res.reconstruction_error(&f) <= 1e-10 * f.range());
        for (i, tone) in truth.textures.iter().enumerate() {
            let own = inner_product(&res.layers[i].w, tone) / norm_l2sq(tone);
            assert!(own >= 0.9, "tone {i} containment {own}");
        }
    }

    #[test]
    fn cartoon_leaves_layers_nearly_empty() {
        let mut spec = SceneSpec::empty(128);
        spec.cartoon.push(CartoonSpec {
            shape: Shape::Disk {
                cx: PI,
                cy: PI,
                radius: 1.2,
            },
            level: 0.05,
        });
        let (f, _) = make_scene(&spec).unwrap();
        let cfg = MtsConfig::for_grid(128, 3);
        // TV(f) stays under μ_j/(4λ) at every scale
        assert!(norm_tv(&f) <= cfg.mu_at(2) / 4.0);
        let res = run_mts(&f, &cfg).unwrap();
        let total: f64 = res.layers.iter().map(|l| l.stats.energy.sqrt()).sum();
        assert!(total <= 0.05 * norm_l2sq(&f).sqrt());
    }

    #[test]
    fn directional_channels_sum_to_isotropic_layer() {
        let spec = two_shell_scene(64);
        let (f, _) = make_scene(&spec).unwrap();
        let mut cfg = MtsConfig::for_grid(64, 2);
        cfg.directions = vec![8, 4];
        let res = run_dmts(&f, &cfg).unwrap();
        assert!(res.directional_sum_error() <= 1e-10 * f.range());
        assert!(res.reconstruction_error(&f) <= 1e-10 * f.range());
        assert_eq!(res.layers[0].channels.len(), 8);
        assert_eq!(res.layers[1].channels.len(), 4);
        let iso = run_mts(&f, &MtsConfig::for_grid(64, 2)).unwrap();
        assert!(iso.layers[0].w.max_abs_diff(&res.layers[0].isotropic) <= 1e-10 * f.range());
    }

    #[test]
    fn schedule_is_recorded() {
        let f = Field::zeros(64, 64).unwrap();
        let res = run_mts(&f, &MtsConfig::for_grid(64, 3)).unwrap();
        let mus: Vec<f64> = res.layers.iter().map(|l| l.stats.mu).collect();
        for w in mus.windows(2) {
            assert_eq!(w[1], w[0] / 2.0);
        }
        let scales: Vec<i32> = res.layers.iter().map(|l| l.stats.scale).collect();
        assert_eq!(scales, vec![4, 3, 2]);
    }
}
