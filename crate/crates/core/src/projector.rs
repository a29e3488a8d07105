//! Projections onto G-balls and TV-balls.
//!
//! A G-ball of radius `r` is `{div_h F : |F| ≤ r}` where `div_h` is the
//! torus-scaled divergence `divergence(·)/h`. Its support function under the
//! area-weighted inner product is exactly [`norm_tv`], so the projections here
//! are mutually dual: ROF residuals live in G-balls, and the TV-ball projection
//! is recovered from ROF by tuning the regularization weight.

use crate::error::{Error, Result};
use crate::field::{
    divergence, divergence_into, forward_transform, gradient, inverse_transform, norm_l2sq,
    norm_tv, Field, VectorField,
};

/// Maximum number of G-ball projections in one TV-ball weight search.
pub const MAX_BISECTION_STEPS: usize = 60;

/// Relative accuracy of the TV-ball radius.
pub const TV_BALL_RELATIVE_TOLERANCE: f64 = 0.01;

/// Settings for the dual fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProjectionConfig {
    /// Step size; the iteration is stable for `0 < step ≤ 1/8`.
    pub step: f64,
    pub max_iterations: usize,
    /// Stop once the projection moves by less than `tolerance × range(f)`
    /// (max over pixels) between consecutive iterates.
    pub tolerance: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            step: 0.125,
            max_iterations: 5000,
            tolerance: 1e-6,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 0.125) {
            return Err(Error::InvalidParameter(format!(
                "projection step must lie in (0, 1/8], got {}",
                self.step
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter(
                "projection needs at least one iteration".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "projection tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Output of [`project_g_ball`].
///
/// `projection == (radius / h) · divergence(dual)` with `|dual| ≤ 1`
/// pointwise, so `radius · dual` is an explicit field `F` with
/// `projection = div_h F` and `‖F‖_∞ ≤ radius`.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub projection: Field,
    pub dual: VectorField,
    pub radius: f64,
    pub iterations: usize,
    /// Last max-pixel change of the projection; `0` when no iteration ran.
    pub final_residual: f64,
    pub converged: bool,
    /// Area-weighted `‖f − projection_n‖₂` for every iterate `n`.
    pub distance_trace: Vec<f64>,
}

impl ProjectionResult {
    /// Whether the recorded distances never increase (up to round-off).
    pub fn distance_monotone(&self) -> bool {
        self.distance_trace
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
    }

    fn trivial(f: &Field, radius: f64, projection: Field) -> Self {
        let (w, h) = f.dims();
        Self {
            projection,
            dual: VectorField {
                p1: Field::from_raw(w, h, vec![0.0; w * h]),
                p2: Field::from_raw(w, h, vec![0.0; w * h]),
            },
            radius,
            iterations: 0,
            final_residual: 0.0,
            converged: true,
            distance_trace: Vec::new(),
        }
    }
}

fn check_zero_mean(f: &Field) -> Result<()> {
    let mean = f.mean();
    let range = f.range();
    if mean.abs() > 1e-9 * range || (range == 0.0 && mean != 0.0) {
        return Err(Error::NotZeroMean { mean, range });
    }
    Ok(())
}

/// Nearest point to the zero-mean field `f` in the G-ball of radius `r`.
pub fn project_g_ball(f: &Field, r: f64, cfg: &ProjectionConfig) -> Result<ProjectionResult> {
    project_g_ball_from(f, r, cfg, None)
}

/// [`project_g_ball`] started from a previous dual (warm start).
pub fn project_g_ball_from(
    f: &Field,
    r: f64,
    cfg: &ProjectionConfig,
    init: Option<&VectorField>,
) -> Result<ProjectionResult> {
    cfg.validate()?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "G-ball radius must be finite and non-negative, got {r}"
        )));
    }
    check_zero_mean(f)?;
    if let Some(p) = init {
        if p.dims() != f.dims() {
            return Err(Error::DimensionMismatch {
                left: f.dims(),
                right: p.dims(),
            });
        }
    }
    let range = f.range();
    if r == 0.0 || range == 0.0 {
        return Ok(ProjectionResult::trivial(f, r, f.zeros_like()));
    }

    let (w, h) = f.dims();
    let n = w * h;
    let cell = f.cell_size();
    let rho = r / cell;
    let tau = cfg.step;
    let target: Vec<f64> = f.as_slice().iter().map(|v| v / rho).collect();
    let (mut p1, mut p2) = match init {
        Some(p) => (p.p1.as_slice().to_vec(), p.p2.as_slice().to_vec()),
        None => (vec![0.0; n], vec![0.0; n]),
    };
    let mut d = vec![0.0; n];
    let mut d_prev = vec![0.0; n];
    let abs_tol = cfg.tolerance * range;

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut final_residual = f64::INFINITY;
    loop {
        // d = div p − f/ρ, so f − ρ·div p = −ρ·d
        divergence_into(w, h, &p1, &p2, &mut d);
        let mut sq = 0.0;
        for (di, ti) in d.iter_mut().zip(&target) {
            *di -= ti;
            sq += *di * *di;
        }
        trace.push(rho * cell * sq.sqrt());
        if iterations > 0 {
            let change = d
                .iter()
                .zip(&d_prev)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            final_residual = rho * change;
            if final_residual <= abs_tol {
                converged = true;
                break;
            }
        }
        if iterations == cfg.max_iterations {
            break;
        }
        chambolle_update(w, h, tau, &d, &mut p1, &mut p2);
        std::mem::swap(&mut d, &mut d_prev);
        iterations += 1;
    }

    let dual = VectorField {
        p1: Field::from_raw(w, h, p1),
        p2: Field::from_raw(w, h, p2),
    };
    let projection = &divergence(&dual) * rho;
    Ok(ProjectionResult {
        projection,
        dual,
        radius: r,
        iterations,
        final_residual: if iterations == 0 { 0.0 } else { final_residual },
        converged,
        distance_trace: trace,
    })
}

// p ← (p + τ∇d) / (1 + τ|∇d|)
fn chambolle_update(w: usize, h: usize, tau: f64, d: &[f64], p1: &mut [f64], p2: &mut [f64]) {
    for i in 0..h {
        let row = i * w;
        let below = if i + 1 == h { 0 } else { row + w };
        for k in 0..w {
            let idx = row + k;
            let right = if k + 1 == w { row } else { idx + 1 };
            let gx = d[right] - d[idx];
            let gy = d[below + k] - d[idx];
            let denom = 1.0 + tau * gx.hypot(gy);
            p1[idx] = (p1[idx] + tau * gx) / denom;
            p2[idx] = (p2[idx] + tau * gy) / denom;
        }
    }
}

/// Output of [`rof`]: `f = u + v` with `v` in the G-ball of radius `1/(2λ)`.
#[derive(Debug, Clone)]
pub struct RofOutput {
    pub u: Field,
    pub v: Field,
    pub result: ProjectionResult,
}

/// Total-variation regularized split minimizing `TV(u) + λ‖f − u‖²`.
///
/// The mean of `f` stays in `u`.
pub fn rof(f: &Field, lambda: f64, cfg: &ProjectionConfig) -> Result<RofOutput> {
    rof_from(f, lambda, cfg, None)
}

pub fn rof_from(
    f: &Field,
    lambda: f64,
    cfg: &ProjectionConfig,
    init: Option<&VectorField>,
) -> Result<RofOutput> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "λ must be positive, got {lambda}"
        )));
    }
    let centered = f.zero_mean();
    let result = project_g_ball_from(&centered, 0.5 / lambda, cfg, init)?;
    let u = f - &result.projection;
    let v = result.projection.clone();
    Ok(RofOutput { u, v, result })
}

/// Upper bound on the G-norm of a zero-mean field from an explicit
/// representation `f = div_h F`, with `F` the gradient of the periodic
/// Poisson solution. Returns `(‖F‖_∞, F)`.
pub fn g_norm_upper_bound(f: &Field) -> Result<(f64, VectorField)> {
    check_zero_mean(f)?;
    let (w, h) = f.dims();
    let cell = f.cell_size();
    let mut spec = forward_transform(f);
    for m in 0..h {
        for n in 0..w {
            let sx = (std::f64::consts::PI * n as f64 / w as f64).sin();
            let sy = (std::f64::consts::PI * m as f64 / h as f64).sin();
            let symbol = -4.0 * (sx * sx + sy * sy);
            let c = &mut spec.coeffs_mut()[m * w + n];
            if m == 0 && n == 0 {
                *c = 0.0.into();
            } else {
                *c *= cell * cell / symbol;
            }
        }
    }
    let phi = inverse_transform(&spec)?;
    let g = gradient(&phi);
    let field = VectorField {
        p1: &g.p1 * (1.0 / cell),
        p2: &g.p2 * (1.0 / cell),
    };
    Ok((field.max_magnitude(), field))
}

/// Output of [`project_tv_ball_detailed`].
#[derive(Debug, Clone)]
pub struct TvBallProjection {
    /// Nearest point found.
    pub projection: Field,
    /// `σ − projection`: zero-mean and equal to `(alpha/h)·divergence(dual)`.
    pub complement: Field,
    /// Weight at which the ROF split reached the radius. Certified G-norm
    /// bound of `complement`.
    pub alpha: f64,
    pub dual: VectorField,
    pub steps: usize,
    /// Chambolle iterations summed over all steps.
    pub inner_iterations: usize,
    /// Whether every inner projection met its tolerance.
    pub inner_converged: bool,
}

/// Nearest point to `σ` with total variation at most `r`.
pub fn project_tv_ball(sigma: &Field, r: f64, cfg: &ProjectionConfig) -> Result<Field> {
    project_tv_ball_detailed(sigma, r, cfg, None).map(|p| p.projection)
}

/// Warm-start hint for [`project_tv_ball_detailed`]: a previous weight and dual.
#[derive(Debug, Clone)]
pub struct TvBallHint {
    pub alpha: f64,
    pub dual: VectorField,
}

/// TV-ball projection through the G-ball weight `κ`: with
/// `v(κ) = σ − P_G(κ)(σ)`, the function `ψ(κ) = ½‖v(κ)‖² + r·κ` is convex and
/// its minimizer `κ*` has `TV(v(κ*)) = r`, so `v(κ*)` is the projection.
/// The search brackets `κ*` by the sign of `r − TV(v)` and then minimizes `ψ`,
/// stopping once `TV` is within [`TV_BALL_RELATIVE_TOLERANCE`] of `r` or `ln κ`
/// is pinned to [`TV_BALL_LOG_WEIGHT_TOLERANCE`].
pub fn project_tv_ball_detailed(
    sigma: &Field,
    r: f64,
    cfg: &ProjectionConfig,
    hint: Option<&TvBallHint>,
) -> Result<TvBallProjection> {
    cfg.validate()?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "TV-ball radius must be finite and non-negative, got {r}"
        )));
    }
    let (w, h) = sigma.dims();
    let tv_sigma = norm_tv(sigma);
    if tv_sigma <= r {
        return Ok(TvBallProjection {
            projection: sigma.clone(),
            complement: sigma.zeros_like(),
            alpha: 0.0,
            dual: VectorField {
                p1: sigma.zeros_like(),
                p2: sigma.zeros_like(),
            },
            steps: 0,
            inner_iterations: 0,
            inner_converged: true,
        });
    }
    let mean = sigma.mean();
    let centered = sigma.zero_mean();
    let (bound, bound_field) = g_norm_upper_bound(&centered)?;
    if r == 0.0 {
        // Only constants have zero TV; the whole oscillation is the complement.
        let dual = bound_field.scaled(1.0 / bound);
        return Ok(TvBallProjection {
            projection: Field::constant(w, h, mean)?,
            complement: centered,
            alpha: bound,
            dual,
            steps: 0,
            inner_iterations: 0,
            inner_converged: true,
        });
    }

    let mut search = WeightSearch {
        centered: &centered,
        r,
        cfg,
        evaluations: 0,
        inner_iterations: 0,
        inner_converged: true,
        warm: Some(bound_field.scaled(1.0 / bound)),
    };
    // At κ = bound the ball already contains σ: TV = 0, ψ = r·bound.
    let top = Probe {
        kappa: bound,
        psi: r * bound,
        tv: 0.0,
        result: ProjectionResult {
            projection: centered.clone(),
            dual: bound_field.scaled(1.0 / bound),
            radius: bound,
            iterations: 0,
            final_residual: 0.0,
            converged: true,
            distance_trace: Vec::new(),
        },
    };

    // Bracket [lo, hi] with TV(lo) > r ≥ TV(hi), i.e. ψ' < 0 at lo and ≥ 0 at hi.
    let (start, factor) = match hint {
        Some(hint) if hint.alpha > 0.0 && hint.alpha < bound && hint.dual.dims() == (w, h) => {
            search.warm = Some(hint.dual.clone());
            (hint.alpha, 2.0)
        }
        _ => (bound / 4.0, 4.0),
    };
    let first = search.probe(start)?;
    let (lo, hi) = if first.tv > r {
        let mut lo = first;
        let mut hi = None;
        while hi.is_none() {
            let kappa = lo.kappa * factor;
            if kappa >= bound {
                hi = Some(top.clone());
                break;
            }
            let p = search.probe(kappa)?;
            if p.tv > r {
                lo = p;
            } else {
                hi = Some(p);
            }
        }
        (lo, hi.unwrap())
    } else {
        let mut hi = first;
        loop {
            let p = search.probe(hi.kappa / factor)?;
            if p.tv > r {
                break (p, hi);
            }
            hi = p;
        }
    };
    let accept = |p: &Probe| (p.tv - r).abs() <= TV_BALL_RELATIVE_TOLERANCE * r && p.tv <= tv_sigma;
    let mut best = if lo.psi <= hi.psi {
        lo.clone()
    } else {
        hi.clone()
    };

    if !accept(&lo) && !accept(&hi) {
        // Brent's minimization of ψ over x = ln κ, started from the
        // log-linear interpolation of TV between the bracket ends.
        let golden = 0.5 * (3.0 - 5f64.sqrt());
        let (mut a, mut b) = (lo.kappa.ln(), hi.kappa.ln());
        let t = ((lo.tv - r) / (lo.tv - hi.tv)).clamp(0.1, 0.9);
        let mut x = a + t * (b - a);
        let mut fx = search.probe(x.exp())?;
        let (mut v, mut wx) = (x, x);
        let (mut fv, mut fw) = (fx.psi, fx.psi);
        let (mut d, mut e) = (0.0f64, 0.0f64);
        loop {
            if fx.psi < best.psi {
                best = fx.clone();
            }
            if accept(&fx) {
                best = fx;
                break;
            }
            let xm = 0.5 * (a + b);
            let tol1 = TV_BALL_LOG_WEIGHT_TOLERANCE;
            let tol2 = 2.0 * tol1;
            if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
                break;
            }
            let mut use_golden = true;
            if e.abs() > tol1 {
                let rr = (x - wx) * (fx.psi - fv);
                let mut q = (x - v) * (fx.psi - fw);
                let mut p = (x - v) * q - (x - wx) * rr;
                q = 2.0 * (q - rr);
                if q > 0.0 {
                    p = -p;
                }
                q = q.abs();
                let e_prev = e;
                e = d;
                if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                    d = p / q;
                    let u = x + d;
                    if u - a < tol2 || b - u < tol2 {
                        d = tol1.copysign(xm - x);
                    }
                    use_golden = false;
                }
            }
            if use_golden {
                e = if x >= xm { a - x } else { b - x };
                d = golden * e;
            }
            let u = if d.abs() >= tol1 {
                x + d
            } else {
                x + tol1.copysign(d)
            };
            let fu = search.probe(u.exp())?;
            if fu.psi <= fx.psi {
                if u >= x {
                    a = x;
                } else {
                    b = x;
                }
                v = wx;
                fv = fw;
                wx = x;
                fw = fx.psi;
                x = u;
                fx = fu;
            } else {
                if u < x {
                    a = u;
                } else {
                    b = u;
                }
                if fu.psi <= fw || wx == x {
                    v = wx;
                    fv = fw;
                    wx = u;
                    fw = fu.psi;
                } else if fu.psi <= fv || v == x || v == wx {
                    v = u;
                    fv = fu.psi;
                }
                if fu.psi < best.psi {
                    best = fu;
                }
            }
        }
    } else if accept(&hi) {
        best = hi;
    } else {
        best = lo;
    }

    let complement = best.result.projection;
    let centered_proj = &centered - &complement;
    let projection = centered_proj.map(|v| v + mean);
    Ok(TvBallProjection {
        projection,
        complement,
        alpha: best.kappa,
        dual: best.result.dual,
        steps: search.evaluations,
        inner_iterations: search.inner_iterations,
        inner_converged: search.inner_converged,
    })
}

/// Search tolerance on `ln κ` once the TV target is bracketed.
pub const TV_BALL_LOG_WEIGHT_TOLERANCE: f64 = 1e-3;

#[derive(Clone)]
struct Probe {
    kappa: f64,
    /// `½‖σ − P_κσ‖² + r·κ`.
    psi: f64,
    /// `TV(σ − P_κσ)`.
    tv: f64,
    result: ProjectionResult,
}

struct WeightSearch<'a> {
    centered: &'a Field,
    r: f64,
    cfg: &'a ProjectionConfig,
    evaluations: usize,
    inner_iterations: usize,
    inner_converged: bool,
    warm: Option<VectorField>,
}

impl WeightSearch<'_> {
    fn probe(&mut self, kappa: f64) -> Result<Probe> {
        if self.evaluations == MAX_BISECTION_STEPS {
            return Err(Error::BisectionStall {
                radius: self.r,
                steps: MAX_BISECTION_STEPS,
            });
        }
        self.evaluations += 1;
        let result = project_g_ball_from(self.centered, kappa, self.cfg, self.warm.as_ref())?;
        self.inner_iterations += result.iterations;
        self.inner_converged &= result.converged;
        self.warm = Some(result.dual.clone());
        let v = self.centered - &result.projection;
        Ok(Probe {
            kappa,
            psi: 0.5 * norm_l2sq(&v) + self.r * kappa,
            tv: norm_tv(&v),
            result,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{norm_l2sq, norm_tv};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_zero_mean(n: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::new(
            n,
            n,
            (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap()
        .zero_mean()
    }

    fn disk(n: usize, radius: f64, level: f64) -> Field {
        use std::f64::consts::PI;
        Field::from_torus_fn(n, n, |x, y| {
            if (x - PI).hypot(y - PI) <= radius {
                level
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn zero_input_and_zero_radius() {
        let cfg = ProjectionConfig::default();
        let z = Field::zeros(8, 8).unwrap();
        let res = project_g_ball(&z, 3.0, &cfg).unwrap();
        assert_eq!(res.projection.max_abs(), 0.0);
        assert_eq!(res.dual.max_magnitude(), 0.0);

        let f = random_zero_mean(8, 2);
        let res = project_g_ball(&f, 0.0, &cfg).unwrap();
        assert_eq!(res.projection.max_abs(), 0.0);
    }

    #[test]
    fn rejects_nonzero_mean_and_bad_config() {
        let f = Field::constant(4, 4, 1.0).unwrap();
        assert!(matches!(
            project_g_ball(&f, 1.0, &ProjectionConfig::default()),
            Err(Error::NotZeroMean { .. })
        ));
        let bad = ProjectionConfig {
            step: 0.2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let g = random_zero_mean(4, 1);
        assert!(project_g_ball(&g, 1.0, &bad).is_err());
    }

    #[test]
    fn poisson_bound_reproduces_field() {
        let f = random_zero_mean(16, 4);
        let (bound, field) = g_norm_upper_bound(&f).unwrap();
        let cell = f.cell_size();
        let rebuilt = &divergence(&field) * (1.0 / cell);
        assert!(rebuilt.max_abs_diff(&f) < 1e-12);
        assert!((field.max_magnitude() - bound).abs() < 1e-15);
    }

    #[test]
    fn large_radius_is_identity() {
        let f = random_zero_mean(16, 5);
        let (bound, _) = g_norm_upper_bound(&f).unwrap();
        let cfg = ProjectionConfig {
            max_iterations: 200_000,
            tolerance: 1e-12,
            ..Default::default()
        };
        let res = project_g_ball(&f, 1.5 * bound, &cfg).unwrap();
        let resid = (&f - &res.projection)
            .as_slice()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let norm = f.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(resid <= 1e-6 * norm, "residual {resid} vs {norm}");
        assert!(res.dual.max_magnitude() <= 1.0 + 1e-9);
    }

    #[test]
    fn dual_is_feasible_and_distance_monotone() {
        let f = random_zero_mean(32, 6);
        for r in [0.01, 0.1, 1.0] {
            let res = project_g_ball(&f, r, &ProjectionConfig::default()).unwrap();
            assert!(res.dual.max_magnitude() <= 1.0 + 1e-9);
            assert!(res.distance_monotone());
            let rebuilt = &divergence(&res.dual) * (r / f.cell_size());
            assert!(rebuilt.max_abs_diff(&res.projection) < 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let f = random_zero_mean(8, 8);
        let cfg = ProjectionConfig {
            max_iterations: 200_000,
            tolerance: 1e-12,
            ..Default::default()
        };
        let first = project_g_ball(&f, 0.05, &cfg).unwrap();
        let once = first.projection.zero_mean();
        // The certificate of a ball point is a fixed point of the iteration.
        let warm = project_g_ball_from(&once, 0.05, &cfg, Some(&first.dual)).unwrap();
        assert!(warm.projection.max_abs_diff(&once) <= 1e-6 * once.max_abs());
        // From a cold start the boundary is approached sublinearly.
        let cold = project_g_ball(&once, 0.05, &cfg).unwrap();
        assert!(cold.projection.max_abs_diff(&once) <= 1e-4 * once.max_abs());
    }

    #[test]
    fn rof_constant_and_additivity() {
        let cfg = ProjectionConfig::default();
        let c = Field::constant(8, 8, 4.0).unwrap();
        let out = rof(&c, 1.0, &cfg).unwrap();
        assert_eq!(out.u, c);
        assert_eq!(out.v.max_abs(), 0.0);

        let f = random_zero_mean(16, 9).map(|v| v + 3.0);
        let out = rof(&f, 2.0, &cfg).unwrap();
        let sum = &out.u + &out.v;
        assert!(sum.max_abs_diff(&f) <= 1e-12 * f.range());
        assert!(out.v.mean().abs() <= 1e-12);
        assert!((out.u.mean() - f.mean()).abs() <= 1e-12);
        let again = rof(&f, 2.0, &cfg).unwrap();
        assert_eq!(again.u, out.u);
    }

    #[test]
    fn rof_small_lambda_keeps_only_mean() {
        let f = random_zero_mean(8, 10).map(|v| v + 1.0);
        let (bound, _) = g_norm_upper_bound(&f.zero_mean()).unwrap();
        let lambda = 0.5 / (2.0 * bound);
        let cfg = ProjectionConfig {
            max_iterations: 1_000_000,
            tolerance: 1e-13,
            ..Default::default()
        };
        let out = rof(&f, lambda, &cfg).unwrap();
        let dev = out.u.map(|v| v - f.mean()).max_abs();
        assert!(dev <= 1e-6 * f.range(), "u deviates by {dev}");
    }

    #[test]
    fn tv_ball_inside_and_zero_radius() {
        let cfg = ProjectionConfig::default();
        let s = disk(32, 1.0, 1.0);
        let tv = norm_tv(&s);
        assert_eq!(project_tv_ball(&s, tv * 1.01, &cfg).unwrap(), s);
        let flat = project_tv_ball(&s, 0.0, &cfg).unwrap();
        assert!(flat.as_slice().iter().all(|v| (v - s.mean()).abs() < 1e-12));
    }

    #[test]
    fn tv_ball_projection_of_disk() {
        let cfg = ProjectionConfig::default();
        let s = disk(32, 1.5, 1.0);
        let tv = norm_tv(&s);
        let r = 0.5 * tv;
        let out = project_tv_ball(&s, r, &cfg).unwrap();
        let out_tv = norm_tv(&out);
        assert!((out_tv - r).abs() <= 0.01 * r, "tv {out_tv} vs {r}");
        assert!(out_tv <= tv + 1e-9);
        assert!((out.mean() - s.mean()).abs() < 1e-12);

        // random feasible competitors never get closer
        let dist = norm_l2sq(&(&s - &out));
        let mean = out.mean();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let scale = rng.random_range(0.001..0.1);
            let cand = out.map(|v| v + scale * rng.random_range(-1.0..1.0));
            let ctv = norm_tv(&cand);
            let shrink = if ctv > r { r / ctv } else { 1.0 };
            let cand = cand.map(|v| mean + (v - mean) * shrink);
            assert!(norm_tv(&cand) <= r * (1.0 + 1e-12));
            assert!(dist <= norm_l2sq(&(&s - &cand)));
        }
    }

    #[test]
    fn tv_ball_certificate() {
        let cfg = ProjectionConfig::default();
        let s = random_zero_mean(16, 12).map(|v| v + 0.3);
        let r = 0.3 * norm_tv(&s);
        let out = project_tv_ball_detailed(&s, r, &cfg, None).unwrap();
        let rebuilt = &divergence(&out.dual) * (out.alpha / s.cell_size());
        assert!(rebuilt.max_abs_diff(&out.complement) < 1e-12);
        assert!(out.dual.max_magnitude() <= 1.0 + 1e-9);
        let sum = &out.projection + &out.complement;
        assert!(sum.max_abs_diff(&s) < 1e-12);
    }
}
