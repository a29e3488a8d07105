//! `texsep`: synthesize test scenes, decompose images, run the multiscale
//! texture separation pipelines and the error-curve experiments.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input or parameters,
//! 3 finished with warnings (some solver did not converge).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use texsep_core::decomp::{classify_regime, decompose, ModelParams};
use texsep_core::experiments::{axis_leakage_ratio, default_sweep, error_curve, spectrum_image};
use texsep_core::field::{forward_transform, norm_l2sq, Field};
use texsep_core::io::{read_field, write_pgm16, write_png16, write_raw};
use texsep_core::lpbank::{apply_mask_to_spectrum, make_radial_mask, select_scale_for_grid};
use texsep_core::mts::{run_dmts, run_mts, LayerStatus, MtsConfig};
use texsep_core::projector::ProjectionConfig;
use texsep_core::synth::{make_scene, reference_scene, NoiseSpec, SceneSpec};

#[derive(Parser)]
#[command(
    name = "texsep",
    version,
    about = "Cartoon + texture decomposition and multiscale texture separation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scene and its ground-truth components.
    Synth(Flags),
    /// Split an image into cartoon u, residual v and texture w.
    Decompose(Flags),
    /// Multiscale texture separation.
    Mts(Flags),
    /// Directional multiscale texture separation.
    Dmts(Flags),
    /// Texture-retrieval error against the texture frequency.
    Curves(Flags),
    /// Log-amplitude spectra of the band-passed image and texture part.
    Spectrum(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// JSON settings file; a manifest written by an earlier run also works.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Input image (PGM, PNG) or raw field; without it the configured scene is used.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    scales: Option<usize>,
    /// Sectors per scale, comma separated (e.g. `8,4`).
    #[arg(long, value_delimiter = ',')]
    directions: Option<Vec<usize>>,
    /// Noise seed; only used when the scene has a noise component.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    noise_cutoff: Option<usize>,
    /// Band-pass scale for `curves` and `spectrum`.
    #[arg(long)]
    scale: Option<i32>,
    /// Number of sweep points for `curves`.
    #[arg(long)]
    points: Option<usize>,
    /// Explicit sweep frequencies, comma separated.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
    #[arg(long)]
    outer_iterations: Option<usize>,
}

/// Every tunable of every command. Written back into the manifest in full,
/// so a manifest replays its own run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Settings {
    out_dir: PathBuf,
    input: Option<PathBuf>,
    scene: SceneSpec,
    lambda: f64,
    /// Decomposition `μ`; for the pipelines, `μ` of the top scale.
    mu: Option<f64>,
    scales: usize,
    directions: Vec<usize>,
    seed: u64,
    scale: Option<i32>,
    points: usize,
    sweep: Option<Vec<f64>>,
    /// Index of the swept texture in the scene.
    texture: usize,
    outer_iterations: usize,
    outer_tolerance: f64,
    projection: ProjectionConfig,
}

impl Default for Settings {
    fn default() -> Self {
        let model = ModelParams::default();
        Self {
            out_dir: PathBuf::from("out"),
            input: None,
            scene: reference_scene(),
            lambda: model.lambda,
            mu: None,
            scales: 3,
            directions: Vec::new(),
            seed: 0,
            scale: None,
            points: 12,
            sweep: None,
            texture: 1,
            outer_iterations: 15,
            outer_tolerance: 1e-3,
            projection: ProjectionConfig {
                tolerance: 1e-5,
                ..Default::default()
            },
        }
    }
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Invalid(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<texsep_core::Error> for Failure {
    fn from(e: texsep_core::Error) -> Self {
        use texsep_core::Error as E;
        match e {
            E::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => {
                Failure::Invalid(e.into())
            }
            E::Io(_) => Failure::Internal(e.into()),
            E::BisectionStall { .. } | E::NonHermitianSpectrum { .. } => {
                Failure::Internal(e.into())
            }
            other => Failure::Invalid(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

type Outcome = Result<Vec<String>, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(anyhow::anyhow!(msg.into()))
}

fn load_settings(flags: &Flags) -> Result<Settings, Failure> {
    let mut s = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Invalid)?;
            let mut value: Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(Failure::Invalid)?;
            if let Some(inner) = value.get_mut("settings") {
                value = inner.take();
            }
            serde_json::from_value(value)
                .with_context(|| format!("settings in {}", path.display()))
                .map_err(Failure::Invalid)?
        }
        None => Settings::default(),
    };
    if let Some(v) = &flags.out_dir {
        s.out_dir = v.clone();
    }
    if let Some(v) = &flags.input {
        s.input = Some(v.clone());
    }
    if let Some(v) = flags.lambda {
        s.lambda = v;
    }
    if let Some(v) = flags.mu {
        s.mu = Some(v);
    }
    if let Some(v) = flags.scales {
        s.scales = v;
    }
    if let Some(v) = &flags.directions {
        s.directions = v.clone();
    }
    if let Some(v) = flags.seed {
        s.seed = v;
    }
    if let Some(v) = flags.scale {
        s.scale = Some(v);
    }
    if let Some(v) = flags.points {
        s.points = v;
    }
    if let Some(v) = &flags.sweep {
        s.sweep = Some(v.clone());
    }
    if let Some(v) = flags.outer_iterations {
        s.outer_iterations = v;
    }
    if flags.noise_sigma.is_some() || flags.noise_cutoff.is_some() {
        let prev = s.scene.noise.unwrap_or(NoiseSpec {
            sigma: 1.0,
            cutoff: s.scene.size / 4,
            seed: s.seed,
        });
        s.scene.noise = Some(NoiseSpec {
            sigma: flags.noise_sigma.unwrap_or(prev.sigma),
            cutoff: flags.noise_cutoff.unwrap_or(prev.cutoff),
            seed: prev.seed,
        });
    }
    if let Some(noise) = s.scene.noise.as_mut() {
        noise.seed = s.seed;
    }
    Ok(s)
}

fn model_params(s: &Settings, default_mu: f64) -> Result<ModelParams, Failure> {
    let p = ModelParams {
        lambda: s.lambda,
        mu: s.mu.unwrap_or(default_mu),
        outer_iterations: s.outer_iterations,
        outer_tolerance: s.outer_tolerance,
    };
    p.validate()?;
    Ok(p)
}

/// The input field, or the configured scene when there is no input.
fn load_input(s: &Settings) -> Result<Field, Failure> {
    match &s.input {
        Some(path) => Ok(read_field(path)?),
        None => {
            s.scene.validate()?;
            Ok(make_scene(&s.scene)?.0)
        }
    }
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<String>,
    display: Vec<Value>,
}

impl<'a> Output<'a> {
    fn new(dir: &'a Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            files: Vec::new(),
            display: Vec::new(),
        })
    }

    /// Lossless raw field plus a 16-bit PNG over the field's own range.
    fn field(&mut self, stem: &str, f: &Field) -> Result<(), Failure> {
        let raw = format!("{stem}.raw");
        write_raw(&self.dir.join(&raw), f)?;
        let png = format!("{stem}.png");
        let (lo, hi) = (f.min(), f.max());
        write_png16(&self.dir.join(&png), f, lo, hi)?;
        self.display
            .push(json!({ "file": png, "min": lo, "max": hi }));
        self.files.push(raw);
        self.files.push(png);
        Ok(())
    }

    fn pgm(&mut self, stem: &str, f: &Field) -> Result<(), Failure> {
        let name = format!("{stem}.pgm");
        write_pgm16(&self.dir.join(&name), f, 0.0, 1.0)?;
        self.display
            .push(json!({ "file": name, "min": 0.0, "max": 1.0 }));
        self.files.push(name);
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        fs::write(self.dir.join(name), body).with_context(|| format!("writing {name}"))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(
        mut self,
        command: &str,
        s: &Settings,
        results: Value,
        warnings: &[String],
    ) -> Result<(), Failure> {
        self.files.push("manifest.json".into());
        let manifest = json!({
            "tool": "texsep",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "settings": s,
            "outputs": self.files,
            "display_ranges": self.display,
            "results": results,
            "warnings": warnings,
        });
        let body = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
        fs::write(self.dir.join("manifest.json"), body + "\n").context("writing manifest")?;
        Ok(())
    }
}

fn cmd_synth(s: &Settings) -> Outcome {
    s.scene.validate()?;
    let (f, truth) = make_scene(&s.scene)?;
    let mut out = Output::new(&s.out_dir)?;
    out.field("f", &f)?;
    out.field("cartoon", &truth.cartoon)?;
    for (i, t) in truth.textures.iter().enumerate() {
        out.field(&format!("texture_{i}"), t)?;
    }
    if s.scene.noise.is_some() {
        out.field("noise", &truth.noise)?;
    }
    let results = json!({ "range": f.range(), "norm_l2": norm_l2sq(&f).sqrt() });
    out.finish("synth", s, results, &[])?;
    Ok(Vec::new())
}

fn cmd_decompose(s: &Settings) -> Outcome {
    let f = load_input(s)?;
    let params = model_params(s, 100.0)?;
    s.projection.validate()?;
    let regime = classify_regime(&f, &params)?;
    let d = decompose(&f, &params, &s.projection)?;
    let mut warnings = Vec::new();
    if !d.converged() {
        warnings.push(format!(
            "decomposition stopped after {} sweeps ({:?}), inner solvers converged: {}",
            d.iterations, d.stop_reason, d.inner_converged
        ));
    }
    let mut out = Output::new(&s.out_dir)?;
    out.field("u", &d.u)?;
    out.field("v", &d.v)?;
    out.field("w", &d.w)?;
    let results = json!({
        "energy": d.energy,
        "energy_trace": d.energy_trace,
        "iterations": d.iterations,
        "stop_reason": d.stop_reason,
        "inner_converged": d.inner_converged,
        "v_radius": d.v_radius,
        "w_radius": d.w_radius,
        "w_norm_l2": norm_l2sq(&d.w).sqrt(),
        "range": f.range(),
        "regime": regime,
    });
    out.finish("decompose", s, results, &warnings)?;
    Ok(warnings)
}

fn mts_config(s: &Settings, f: &Field) -> Result<MtsConfig, Failure> {
    if f.width() != f.height() {
        return Err(invalid("the pipelines need a square grid"));
    }
    let mut cfg = MtsConfig::for_grid(f.width(), s.scales);
    cfg.lambda = s.lambda;
    if let Some(mu) = s.mu {
        cfg.mu_top = mu;
    }
    if let Some(j) = s.scale {
        cfg.top_scale = j;
    }
    cfg.directions = s.directions.clone();
    cfg.outer_iterations = s.outer_iterations;
    cfg.outer_tolerance = s.outer_tolerance;
    cfg.projection = s.projection;
    cfg.validate(f.width(), f.height())?;
    Ok(cfg)
}

fn layer_warnings(stats: &[&texsep_core::mts::LayerStats]) -> Vec<String> {
    stats
        .iter()
        .filter(|l| l.status != LayerStatus::Converged)
        .map(|l| format!("layer {} (scale {}): {:?}", l.index, l.scale, l.status))
        .collect()
}

fn cmd_mts(s: &Settings) -> Outcome {
    let f = load_input(s)?;
    let mut cfg = mts_config(s, &f)?;
    cfg.directions.clear();
    let res = run_mts(&f, &cfg)?;
    let mut out = Output::new(&s.out_dir)?;
    for l in &res.layers {
        out.field(&format!("w_{}", l.stats.index + 1), &l.w)?;
    }
    out.field("residual", &res.residual)?;
    let stats: Vec<_> = res.layers.iter().map(|l| &l.stats).collect();
    let mut warnings = layer_warnings(&stats);
    if let Some(fail) = &res.failure {
        warnings.push(format!(
            "pipeline stopped at layer {}: {:?}",
            fail.index, fail.status
        ));
    }
    let results = json!({
        "mu_schedule": (0..cfg.scales).map(|i| cfg.mu_at(i)).collect::<Vec<_>>(),
        "scales": (0..cfg.scales).map(|i| cfg.scale_at(i)).collect::<Vec<_>>(),
        "layers": stats,
        "complete": res.complete,
        "failure": res.failure,
        "reconstruction_error": res.reconstruction_error(&f),
        "range": f.range(),
    });
    out.finish("mts", s, results, &warnings)?;
    Ok(warnings)
}

fn cmd_dmts(s: &Settings) -> Outcome {
    let f = load_input(s)?;
    let mut cfg = mts_config(s, &f)?;
    if cfg.directions.is_empty() {
        cfg.directions = (0..cfg.scales)
            .map(|i| if i == 0 { 8 } else { 4 })
            .collect();
    }
    cfg.validate(f.width(), f.height())?;
    let res = run_dmts(&f, &cfg)?;
    let mut out = Output::new(&s.out_dir)?;
    for l in &res.layers {
        for (k, c) in l.channels.iter().enumerate() {
            out.field(&format!("w_{}_{}", l.stats.index + 1, k), c)?;
        }
    }
    out.field("residual", &res.residual)?;
    let stats: Vec<_> = res.layers.iter().map(|l| &l.stats).collect();
    let mut warnings = layer_warnings(&stats);
    if let Some(fail) = &res.failure {
        warnings.push(format!(
            "pipeline stopped at layer {}: {:?}",
            fail.index, fail.status
        ));
    }
    let channel_energy: Vec<Vec<f64>> = res
        .layers
        .iter()
        .map(|l| l.channels.iter().map(norm_l2sq).collect())
        .collect();
    let results = json!({
        "mu_schedule": (0..cfg.scales).map(|i| cfg.mu_at(i)).collect::<Vec<_>>(),
        "scales": (0..cfg.scales).map(|i| cfg.scale_at(i)).collect::<Vec<_>>(),
        "directions": cfg.directions,
        "layers": stats,
        "channel_energy": channel_energy,
        "complete": res.complete,
        "failure": res.failure,
        "reconstruction_error": res.reconstruction_error(&f),
        "directional_sum_error": res.directional_sum_error(),
        "range": f.range(),
    });
    out.finish("dmts", s, results, &warnings)?;
    Ok(warnings)
}

fn swept_scale(s: &Settings) -> Result<i32, Failure> {
    match s.scale {
        Some(j) => Ok(j),
        None => {
            let t = s
                .scene
                .textures
                .get(s.texture)
                .ok_or_else(|| invalid(format!("scene has no texture {}", s.texture)))?;
            Ok(select_scale_for_grid(t.omega, s.scene.size, s.scene.size)?)
        }
    }
}

fn cmd_curves(s: &Settings) -> Outcome {
    s.scene.validate()?;
    let params = model_params(s, 100.0)?;
    let j = swept_scale(s)?;
    let sweep = match &s.sweep {
        Some(v) if v.is_empty() => return Err(invalid("the sweep list is empty")),
        Some(v) => v.clone(),
        None if s.points < 2 => return Err(invalid("a sweep needs at least two points")),
        None => default_sweep(j, s.points),
    };
    let curve = error_curve(&s.scene, s.texture, &sweep, &params, &s.projection, j)?;
    let mut out = Output::new(&s.out_dir)?;
    out.text("curves.csv", &curve.to_csv())?;
    let results = json!({
        "scale": j,
        "slope": curve.slope,
        "intercept": curve.intercept,
        "spearman": curve.spearman(),
        "w_beats_f_everywhere": curve.w_beats_f_everywhere(),
    });
    out.finish("curves", s, results, &[])?;
    println!("slope {:.4}  spearman {:.4}", curve.slope, curve.spearman());
    Ok(Vec::new())
}

fn cmd_spectrum(s: &Settings) -> Outcome {
    let f = load_input(s)?;
    let params = model_params(s, 100.0)?;
    let j = match (s.scale, &s.input) {
        (Some(j), _) => j,
        (None, None) => swept_scale(s)?,
        (None, Some(_)) => return Err(invalid("--scale is required with --input")),
    };
    let mask = make_radial_mask(j, f.width(), f.height())?;
    let d = decompose(&f, &params, &s.projection)?;
    let (df, _) = apply_mask_to_spectrum(&forward_transform(&f), &mask)?;
    let (dw, _) = apply_mask_to_spectrum(&forward_transform(&d.w), &mask)?;
    let ratio = axis_leakage_ratio(&dw, &df, 1)?;
    let mut out = Output::new(&s.out_dir)?;
    out.pgm("spectrum_f", &spectrum_image(&df))?;
    out.pgm("spectrum_w", &spectrum_image(&dw))?;
    let mut warnings = Vec::new();
    if !d.converged() {
        warnings.push(format!("decomposition stopped: {:?}", d.stop_reason));
    }
    let results = json!({ "scale": j, "axis_leakage_ratio": ratio });
    out.finish("spectrum", s, results, &warnings)?;
    println!("axis leakage ratio {ratio:.4}");
    Ok(warnings)
}

fn run(cli: Cli) -> Outcome {
    let (name, flags, cmd): (&str, &Flags, fn(&Settings) -> Outcome) = match &cli.command {
        Command::Synth(f) => ("synth", f, cmd_synth),
        Command::Decompose(f) => ("decompose", f, cmd_decompose),
        Command::Mts(f) => ("mts", f, cmd_mts),
        Command::Dmts(f) => ("dmts", f, cmd_dmts),
        Command::Curves(f) => ("curves", f, cmd_curves),
        Command::Spectrum(f) => ("spectrum", f, cmd_spectrum),
    };
    let settings = load_settings(flags)?;
    cmd(&settings).map_err(|e| match e {
        Failure::Invalid(err) => Failure::Invalid(err.context(name.to_string())),
        Failure::Internal(err) => Failure::Internal(err.context(name.to_string())),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(warnings) if warnings.is_empty() => ExitCode::SUCCESS,
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(3)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(1)
        }
    }
}
