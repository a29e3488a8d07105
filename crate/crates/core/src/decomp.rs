//! Three-part decomposition `f = u + v + w` minimizing
//! `TV(u) + λ‖v‖² + μ‖w‖_G`, and the parameter-regime tests that predict its
//! degenerate solutions.
//!
//! The minimizer alternates two exact block solves. With `w` fixed, `u` is the
//! ROF split of `f − w`. With `u` fixed, the best `w` for `σ = f − u` is
//! `σ − P_TV(σ, μ/(2λ))`, the complement of the TV-ball projection, which is
//! itself a G-ball projection and therefore comes with a certificate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{norm_l2sq, norm_tv, Field, VectorField};
use crate::projector::{
    g_norm_upper_bound, project_g_ball, project_tv_ball_detailed, rof_from, ProjectionConfig,
    TvBallHint,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Weight of the squared L² norm of the residual `v`.
    pub lambda: f64,
    /// Weight of the G-norm of the texture `w`.
    pub mu: f64,
    pub outer_iterations: usize,
    /// Outer stopping threshold on the max pixel change of `u` and `w`,
    /// relative to the dynamic range of the input.
    pub outer_tolerance: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 100.0,
            outer_iterations: 30,
            outer_tolerance: 1e-4,
        }
    }
}

impl ModelParams {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self {
            lambda,
            mu,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "λ must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "μ must be positive, got {}",
                self.mu
            )));
        }
        if self.outer_iterations < 1 {
            return Err(Error::InvalidParameter(
                "at least one outer iteration is required".into(),
            ));
        }
        if !(self.outer_tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "outer tolerance must be positive, got {}",
                self.outer_tolerance
            )));
        }
        Ok(())
    }

    /// `0 < μ ≤ 4π`: the texture weight is so small that the model degenerates.
    pub fn in_degenerate_band(&self) -> bool {
        self.mu <= 4.0 * PI
    }

    /// Radius of the G-ball holding `v`.
    pub fn residual_radius(&self) -> f64 {
        0.5 / self.lambda
    }

    /// Radius of the TV-ball used by the texture step.
    pub fn texture_tv_budget(&self) -> f64 {
        self.mu / (2.0 * self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// Max pixel change fell below the outer tolerance.
    Converged,
    /// The objective stopped decreasing at solver precision; the last
    /// improving iterate was kept.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Cartoon part; carries the mean of the input.
    pub u: Field,
    /// Residual, `(1/(2λ))·div_h(dual_u)`.
    pub v: Field,
    /// Texture, `w_radius·div_h(dual_w)`.
    pub w: Field,
    pub dual_u: VectorField,
    pub dual_w: VectorField,
    /// `1/(2λ)`.
    pub v_radius: f64,
    /// Certified bound on the G-norm of `w`.
    pub w_radius: f64,
    /// `TV(u) + λ‖v‖² + μ·w_radius` of the returned iterate.
    pub energy: f64,
    /// Objective after every accepted outer iteration.
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Whether every inner projection met its own tolerance.
    pub inner_converged: bool,
    /// Chambolle iterations spent in the u-steps and the w-steps.
    pub rof_iterations: usize,
    pub texture_iterations: usize,
}

impl Decomposition {
    pub fn converged(&self) -> bool {
        self.stop_reason != StopReason::MaxIterations && self.inner_converged
    }

    pub fn energy_monotone(&self) -> bool {
        self.energy_trace
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + STALL_SLACK))
    }
}

/// Objective with `TV` standing in for the BV norm and a certified ball
/// radius standing in for the G-norm of `w`.
pub fn objective(u: &Field, v: &Field, w_radius: f64, params: &ModelParams) -> f64 {
    norm_tv(u) + params.lambda * norm_l2sq(v) + params.mu * w_radius
}

/// Relative energy rise tolerated between sweeps before declaring a stall.
/// Inexact inner solves make the outer energy noisy at about this level.
pub const STALL_SLACK: f64 = 1e-4;

struct Iterate {
    u: Field,
    v: Field,
    w: Field,
    dual_u: VectorField,
    dual_w: VectorField,
    w_radius: f64,
    energy: f64,
}

/// Block-coordinate minimization, starting from `w = 0` (so the first sweep
/// is plain ROF).
pub fn decompose(
    f: &Field,
    params: &ModelParams,
    pcfg: &ProjectionConfig,
) -> Result<Decomposition> {
    params.validate()?;
    pcfg.validate()?;
    let (width, height) = f.dims();
    let tol = params.outer_tolerance * f.range();
    let budget = params.texture_tv_budget();

    let mut w = f.zeros_like();
    let mut w_radius = 0.0;
    let mut dual_w = VectorField::zeros(width, height)?;
    let mut dual_u: Option<VectorField> = None;
    let mut hint: Option<TvBallHint> = None;
    let mut accepted: Option<Iterate> = None;
    let mut trace = Vec::new();
    let mut inner_converged = true;
    let mut stop_reason = StopReason::MaxIterations;
    let mut iterations = 0;
    let (mut rof_iterations, mut texture_iterations) = (0, 0);

    for _ in 0..params.outer_iterations {
        // u-step: ROF of f − w
        let g = f - &w;
        let split = rof_from(&g, params.lambda, pcfg, dual_u.as_ref())?;
        rof_iterations += split.result.iterations;
        let u = split.u;
        let v = &(f - &u) - &w;
        let energy = objective(&u, &v, w_radius, params);
        let candidate = Iterate {
            u,
            v,
            w: w.clone(),
            dual_u: split.result.dual,
            dual_w: dual_w.clone(),
            w_radius,
            energy,
        };
        let change = match &accepted {
            Some(prev) if energy > prev.energy * (1.0 + STALL_SLACK) => {
                stop_reason = StopReason::Stalled;
                break;
            }
            Some(prev) => candidate
                .u
                .max_abs_diff(&prev.u)
                .max(candidate.w.max_abs_diff(&prev.w)),
            None => f64::INFINITY,
        };
        inner_converged &= split.result.converged;
        iterations += 1;
        trace.push(energy);
        dual_u = Some(candidate.dual_u.clone());
        let sigma = (f - &candidate.u).zero_mean();
        accepted = Some(candidate);
        if change <= tol {
            stop_reason = StopReason::Converged;
            break;
        }

        // w-step: complement of the TV-ball projection of σ = f − u
        let tvp = project_tv_ball_detailed(&sigma, budget, pcfg, hint.as_ref())?;
        inner_converged &= tvp.inner_converged;
        texture_iterations += tvp.inner_iterations;
        w = tvp.complement;
        w_radius = tvp.alpha;
        dual_w = tvp.dual;
        hint = (tvp.alpha > 0.0).then(|| TvBallHint {
            alpha: tvp.alpha,
            dual: dual_w.clone(),
        });
    }

    let it = accepted.expect("at least one outer iteration runs");
    Ok(Decomposition {
        u: it.u,
        v: it.v,
        w: it.w,
        dual_u: it.dual_u,
        dual_w: it.dual_w,
        v_radius: params.residual_radius(),
        w_radius: it.w_radius,
        energy: it.energy,
        energy_trace: trace,
        iterations,
        stop_reason,
        inner_converged,
        rof_iterations,
        texture_iterations,
    })
}

/// Three-valued outcome of a certificate-based test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certainty {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeReport {
    pub tv_f: f64,
    /// `μ/(4λ)`: at or below it the texture part must vanish.
    pub threshold_mu_over_4_lambda: f64,
    /// `μ/(2λ)`.
    pub threshold_mu_over_2_lambda: f64,
    /// `1/(2λ)`.
    pub threshold_half_lambda: f64,
    pub predicted_w_zero: bool,
    /// Whether `‖f − mean‖_G ≤ 1/(2λ)`.
    pub g_within_half_lambda: Certainty,
    /// Both conditions for the all-residual solution `u = mean, v = f − mean, w = 0`.
    pub predicted_all_v: bool,
    pub g_upper_bound: f64,
    pub g_lower_bound: f64,
}

/// Predicts the degenerate regimes from `TV(f)` and G-norm certificates.
pub fn classify_regime(f: &Field, params: &ModelParams) -> Result<RegimeReport> {
    params.validate()?;
    let tv_f = norm_tv(f);
    let half_lambda = params.residual_radius();
    let g = f.zero_mean();
    let energy = norm_l2sq(&g);

    let (upper, lower, certainty) = if energy == 0.0 {
        (0.0, 0.0, Certainty::Yes)
    } else {
        let (upper, _) = g_norm_upper_bound(&g)?;
        // ‖g‖_G ≥ ⟨g, g⟩ / TV(g) by duality
        let lower = energy / tv_f;
        let certainty = if upper <= half_lambda {
            Certainty::Yes
        } else if lower > half_lambda {
            Certainty::No
        } else {
            let cfg = ProjectionConfig {
                max_iterations: 20_000,
                tolerance: 1e-9,
                ..ProjectionConfig::default()
            };
            let proj = project_g_ball(&g, half_lambda, &cfg)?.projection;
            if norm_l2sq(&(&g - &proj)).sqrt() <= 1e-6 * energy.sqrt() {
                Certainty::Yes
            } else {
                Certainty::Unknown
            }
        };
        (upper, lower, certainty)
    };

    Ok(RegimeReport {
        tv_f,
        threshold_mu_over_4_lambda: params.mu / (4.0 * params.lambda),
        threshold_mu_over_2_lambda: params.mu / (2.0 * params.lambda),
        threshold_half_lambda: half_lambda,
        predicted_w_zero: tv_f <= params.mu / (4.0 * params.lambda),
        g_within_half_lambda: certainty,
        predicted_all_v: tv_f <= params.mu / (2.0 * params.lambda) && certainty == Certainty::Yes,
        g_upper_bound: upper,
        g_lower_bound: lower,
    })
}
