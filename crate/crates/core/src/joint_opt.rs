//! Exact joint power allocation and relay placement, and a numerical check
//! that the pointwise scale SNR is pseudoconcave.
//!
//! The solver works on the log objective `F = Σ ln(1 + γ̄_q)` with budget
//! multiplier `λ`; the multiplier of the product objective is `λ·e^F` and is
//! reported through its logarithm. Stationarity is written as
//! `(∂F/∂P)/λ − 1 = 0` per power, a normalized placement derivative, and the
//! relative budget gap. Newton runs in `(ln P_S, ln P_R, logit d, ln λ)`.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acoustics::{absorption_linear, noise_psd, AcousticEnv};
use crate::approx_opt;
use crate::error::{domain, Result};
use crate::fading::FadingModel;
use crate::numeric::{golden_section_max, log_add_exp};
use crate::outage::{per_band_snr_scale, surrogate_objective, Design, SubbandGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktState {
    pub design: Design,
    /// Budget multiplier of the log objective.
    pub lambda: f64,
    pub ln_lambda_product: f64,
    /// `2n + 2` relative residuals, see [`kkt_residuals`].
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `max |residual|` after each Newton iteration.
    pub residual_trace: Vec<f64>,
    /// The multiplier-bisection path was needed.
    pub used_fallback: bool,
}

impl KktState {
    pub fn max_residual(&self) -> f64 {
        max_abs(&self.residuals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60 }
    }
}

/// Closed-form auxiliaries `(Q_q, T_q, V_q)` of the published KKT system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktAuxiliaries {
    pub q: f64,
    pub t: f64,
    pub v: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Published auxiliaries for band `q`, evaluated literally:
/// `Q = β/(λNΔf)·[(c_SR/(a^d d^α))^c + (c_RD a^-(L−d) (L−d)^-α)^c]^(1/c)`,
/// `T = (β c_SR/(λNΔf a^d d^α))^c − 1`,
/// `V = (c_SR P_S a^(L−d) (L−d)^α)^B + (c_RD P_R a^d d^α)^B`,
/// with `c = B/(B+1)` and `L = D − δ`.
pub fn kkt_auxiliaries(
    grid: &SubbandGrid,
    fading: &FadingModel,
    design: &Design,
    lambda: f64,
    q: usize,
) -> Result<KktAuxiliaries> {
    if !(lambda > 0.0) {
        return Err(domain(format!("multiplier must be > 0, got {lambda}")));
    }
    design.validate_shape(grid)?;
    if q >= grid.n() {
        return Err(domain(format!("band {q} out of range")));
    }
    let b = fading.b();
    let c = b / (b + 1.0);
    let d = design.d_sr;
    let (ln_sr, ln_rd) = (grid.ln_sr_loss(q, d), grid.ln_rd_loss(q, d));
    let (c_sr, c_rd) = (grid.gain_sr(q).ln(), grid.gain_rd(q).ln());
    let scale = fading.beta().ln() - lambda.ln() - grid.noise_power(q).ln();
    let q_aux = (scale + log_add_exp(c * (c_sr - ln_sr), c * (c_rd - ln_rd)) / c).exp();
    let t = (c * (scale + c_sr - ln_sr)).exp() - 1.0;
    let v = (b * (c_sr + design.p_s[q].ln() + ln_rd)).exp() + (b * (c_rd + design.p_r[q].ln() + ln_sr)).exp();
    Ok(KktAuxiliaries { q: q_aux, t, v })
}

/// Published power and placement equations rearranged to relative residuals:
/// `n` source-power entries (`rhs/P_Sq − 1`), `n` relay-power entries, the
/// placement sum normalized by the sum of its absolute terms, and the
/// relative budget gap. Entries whose formula has no real value under the
/// given multiplier are NaN. Diagnostic only; see [`kkt_residuals`].
pub fn published_kkt_residuals(
    grid: &SubbandGrid,
    fading: &FadingModel,
    design: &Design,
    lambda: f64,
    budget: f64,
) -> Result<Vec<f64>> {
    let n = grid.n();
    let b = fading.b();
    let c = b / (b + 1.0);
    let d = design.d_sr;
    let span = grid.env().span_km();
    let alpha = grid.env().spreading;
    let mut src = Vec::with_capacity(n);
    let mut rel = Vec::with_capacity(n);
    let (mut sum, mut abs_sum) = (0.0, 0.0);
    for q in 0..n {
        let aux = kkt_auxiliaries(grid, fading, design, lambda, q)?;
        let a = grid.absorption(q);
        let (c_sr, c_rd) = (grid.gain_sr(q), grid.gain_rd(q));
        let (ps, pr) = (design.p_s[q], design.p_r[q]);
        let nl = grid.noise_power(q) * lambda;
        let geometry = a.powf(span - 2.0 * d) * (span / d - 1.0).powf(alpha);
        let sr_loss = a.powf(d) * d.powf(alpha);
        let rd_loss = a.powf(span - d) * (span - d).powf(alpha);
        let inner_s = (aux.q * fading.beta() * c_sr / (nl * sr_loss)).powf(c) - 1.0;
        let inner_r = (aux.q * fading.beta() * c_rd / (nl * rd_loss)).powf(c) - 1.0;
        let rhs_s = pr * c_rd / (c_sr * geometry) * inner_s.powf(1.0 / b);
        let rhs_r = ps * c_sr * geometry / c_rd * inner_r.powf(1.0 / b);
        src.push(rhs_s / ps - 1.0);
        rel.push(rhs_r / pr - 1.0);
        let term = fading.beta() * c_sr * c_rd * ps * pr / grid.noise_power(q)
            * aux.v.powf(-c)
            * (c_rd * pr * sr_loss).powf(b)
            * (aux.t * (a.ln() + alpha / (span - d)) - (a.ln() + alpha / d));
        sum += term;
        abs_sum += term.abs();
    }
    let mut out = src;
    out.extend(rel);
    out.push(if abs_sum > 0.0 { sum / abs_sum } else { sum });
    out.push(design.total_power() / budget - 1.0);
    Ok(out)
}

/// Per-band pieces of the log-objective gradient.
struct BandSlope {
    /// `γ̄/(1+γ̄)`
    weight: f64,
    /// Shares of `(a^d d^α / c_SR P_S)^B` and of the relay-hop term in their sum.
    share_sr: f64,
    share_rd: f64,
    /// `∂ln γ̄ / ∂d` split into its source-hop and relay-hop parts.
    pull_sr: f64,
    pull_rd: f64,
}

fn band_slope(grid: &SubbandGrid, fading: &FadingModel, design: &Design, q: usize) -> BandSlope {
    let b = fading.b();
    let d = design.d_sr;
    let ln_u = grid.ln_sr_loss(q, d) - (grid.gain_sr(q) * design.p_s[q]).ln();
    let ln_v = grid.ln_rd_loss(q, d) - (grid.gain_rd(q) * design.p_r[q]).ln();
    let share_sr = 1.0 / (1.0 + (b * (ln_v - ln_u)).exp());
    let share_rd = 1.0 / (1.0 + (b * (ln_u - ln_v)).exp());
    let g = per_band_snr_scale(grid, design, fading, q);
    let ln_a = grid.absorption(q).ln();
    let alpha = grid.env().spreading;
    BandSlope {
        weight: g / (1.0 + g),
        share_sr,
        share_rd,
        pull_sr: share_sr * (ln_a + alpha / d),
        pull_rd: share_rd * (ln_a + alpha / (grid.env().span_km() - d)),
    }
}

/// Scale-SNR gain per unit of band power when the band is split optimally.
fn band_gain(grid: &SubbandGrid, fading: &FadingModel, d: f64, q: usize) -> f64 {
    let c = fading.b() / (fading.b() + 1.0);
    let ln_x = grid.ln_sr_loss(q, d) - grid.gain_sr(q).ln();
    let ln_y = grid.ln_rd_loss(q, d) - grid.gain_rd(q).ln();
    fading.beta() / grid.noise_power(q) * (-log_add_exp(c * ln_x, c * ln_y) / c).exp()
}

/// Stationarity residuals of the joint problem under multiplier `lambda`
/// (log objective): `n` entries `(∂F/∂P_Sq)/λ − 1`, `n` for `P_Rq`, the
/// placement derivative divided by the sum of its two pulls, and the relative
/// budget gap. Bands with no power report `max(0, G_q/λ − 1)`, `G_q` being the
/// band's gain per unit power at the best split.
pub fn kkt_residuals(
    grid: &SubbandGrid,
    fading: &FadingModel,
    design: &Design,
    lambda: f64,
    budget: f64,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(domain(format!("multiplier must be > 0, got {lambda}")));
    }
    design.validate_shape(grid)?;
    let (_, hi) = grid.env().relay_bounds();
    if design.d_sr >= hi {
        return Err(domain("relay must sit strictly before the destination-side limit"));
    }
    Ok(residuals_unchecked(grid, fading, design, lambda, budget))
}

fn residuals_unchecked(
    grid: &SubbandGrid,
    fading: &FadingModel,
    design: &Design,
    lambda: f64,
    budget: f64,
) -> Vec<f64> {
    let n = grid.n();
    let mut out = vec![0.0; 2 * n + 2];
    let (mut sum, mut scale) = (0.0, 0.0);
    for q in 0..n {
        if design.p_s[q] <= 0.0 || design.p_r[q] <= 0.0 {
            let r = (band_gain(grid, fading, design.d_sr, q) / lambda - 1.0).max(0.0);
            out[q] = if design.p_s[q] > 0.0 { -1.0 } else { r };
            out[n + q] = if design.p_r[q] > 0.0 { -1.0 } else { r };
            continue;
        }
        let s = band_slope(grid, fading, design, q);
        out[q] = s.weight * s.share_sr / (design.p_s[q] * lambda) - 1.0;
        out[n + q] = s.weight * s.share_rd / (design.p_r[q] * lambda) - 1.0;
        sum += s.weight * (s.pull_rd - s.pull_sr);
        scale += s.weight * (s.pull_rd + s.pull_sr);
    }
    out[2 * n] = if scale > 0.0 { sum / scale } else { 0.0 };
    out[2 * n + 1] = design.total_power() / budget - 1.0;
    out
}

/// Budget multiplier implied by a design: `Σ P·∂F/∂P / Σ P`.
fn implied_multiplier(grid: &SubbandGrid, fading: &FadingModel, design: &Design) -> f64 {
    let mut acc = 0.0;
    for q in 0..grid.n() {
        if design.p_s[q] > 0.0 && design.p_r[q] > 0.0 {
            acc += band_slope(grid, fading, design, q).weight;
        }
    }
    acc / design.total_power()
}

struct Layout {
    active: Vec<usize>,
    lo: f64,
    width: f64,
}

impl Layout {
    fn dim(&self) -> usize {
        2 * self.active.len() + 2
    }

    fn pack(&self, design: &Design, lambda: f64) -> DVector<f64> {
        let m = self.active.len();
        let mut x = DVector::zeros(self.dim());
        for (i, &q) in self.active.iter().enumerate() {
            x[i] = design.p_s[q].ln();
            x[m + i] = design.p_r[q].ln();
        }
        let t = ((design.d_sr - self.lo) / self.width).clamp(1e-15, 1.0 - 1e-15);
        x[2 * m] = (t / (1.0 - t)).ln();
        x[2 * m + 1] = lambda.ln();
        x
    }

    fn unpack(&self, x: &DVector<f64>, n: usize) -> (Design, f64) {
        let m = self.active.len();
        let mut design = Design { d_sr: 0.0, p_s: vec![0.0; n], p_r: vec![0.0; n] };
        for (i, &q) in self.active.iter().enumerate() {
            design.p_s[q] = x[i].exp();
            design.p_r[q] = x[m + i].exp();
        }
        design.d_sr = self.lo + self.width / (1.0 + (-x[2 * m]).exp());
        (design, x[2 * m + 1].exp())
    }
}

struct Newton<'a> {
    grid: &'a SubbandGrid,
    fading: &'a FadingModel,
    budget: f64,
    layout: Layout,
}

impl Newton<'_> {
    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.grid.n();
        let (design, lambda) = self.layout.unpack(x, n);
        let full = residuals_unchecked(self.grid, self.fading, &design, lambda, self.budget);
        let m = self.layout.active.len();
        let mut r = DVector::zeros(self.layout.dim());
        for (i, &q) in self.layout.active.iter().enumerate() {
            r[i] = full[q];
            r[m + i] = full[n + q];
        }
        r[2 * m] = full[2 * n];
        r[2 * m + 1] = full[2 * n + 1];
        r
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let dim = x.len();
        let h = 1e-6;
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut up = x.clone();
            let mut down = x.clone();
            up[j] += h;
            down[j] -= h;
            let col = (self.residual(&up) - self.residual(&down)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        jac
    }

    /// Damped Newton with backtracking on `‖r‖₂`. Returns the final point,
    /// iterations used, the trace of `max |r|` and whether `tol` was met.
    fn run(&self, mut x: DVector<f64>, opts: &SolverOptions) -> (DVector<f64>, usize, Vec<f64>, bool) {
        let mut r = self.residual(&x);
        let mut trace = Vec::new();
        for it in 0..opts.max_iter {
            if r.amax() < opts.tol {
                return (x, it, trace, true);
            }
            let Some(step) = self.jacobian(&x).lu().solve(&(-&r)) else {
                return (x, it, trace, false);
            };
            let norm = r.norm();
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = &x + t * &step;
                let rt = self.residual(&trial);
                if rt.iter().all(|v| v.is_finite()) && rt.norm() <= (1.0 - 1e-4 * t) * norm {
                    x = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            trace.push(r.amax());
            if !accepted {
                return (x, it + 1, trace, false);
            }
        }
        let ok = r.amax() < opts.tol;
        (x, opts.max_iter, trace, ok)
    }
}

/// Globally optimal design by bisection on the multiplier at each relay
/// position (band totals water-filled on the per-band gain) and golden
/// section on the position.
pub fn solve_by_multiplier_bisection(grid: &SubbandGrid, fading: &FadingModel, budget: f64) -> Result<(Design, f64)> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(domain(format!("power budget must be finite and > 0, got {budget}")));
    }
    let (lo, hi_closed) = grid.env().relay_bounds();
    let hi = hi_closed - 1e-9 * grid.env().distance_km;
    let value = |d: f64| fill_at(grid, fading, budget, d).1;
    let (a, b) = golden_section_max(value, lo, hi, 1e-10 * (hi - lo));
    let mut d = 0.5 * (a + b);
    if value(lo) > value(d) {
        d = lo;
    }
    let (totals, _, lambda) = fill_at(grid, fading, budget, d);
    let c = fading.b() / (fading.b() + 1.0);
    let mut design = Design { d_sr: d, p_s: vec![0.0; grid.n()], p_r: vec![0.0; grid.n()] };
    for (q, &t) in totals.iter().enumerate() {
        let ln_x = grid.ln_sr_loss(q, d) - grid.gain_sr(q).ln();
        let ln_y = grid.ln_rd_loss(q, d) - grid.gain_rd(q).ln();
        let share = 1.0 / (1.0 + (c * (ln_y - ln_x)).exp());
        design.p_s[q] = t * share;
        design.p_r[q] = t * (1.0 - share);
    }
    Ok((design, lambda))
}

/// Band totals, objective and multiplier of the optimal fill at position `d`.
fn fill_at(grid: &SubbandGrid, fading: &FadingModel, budget: f64, d: f64) -> (Vec<f64>, f64, f64) {
    let gains: Vec<f64> = (0..grid.n()).map(|q| band_gain(grid, fading, d, q)).collect();
    let total = |lambda: f64| gains.iter().map(|g| (1.0 / lambda - 1.0 / g).max(0.0)).sum::<f64>();
    let mut hi = gains.iter().fold(0.0f64, |m, g| m.max(*g)).ln();
    let mut lo = (grid.n() as f64 / (budget + gains.iter().map(|g| 1.0 / g).sum::<f64>())).ln();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid.exp()) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let lambda = (0.5 * (lo + hi)).exp();
    let mut totals: Vec<f64> = gains.iter().map(|g| (1.0 / lambda - 1.0 / g).max(0.0)).collect();
    let sum: f64 = totals.iter().sum();
    totals.iter_mut().for_each(|t| *t *= budget / sum);
    let value = totals.iter().zip(&gains).map(|(t, g)| (t * g).ln_1p()).sum();
    (totals, value, lambda)
}

/// Solve the joint problem from `init` (or the three-stage design when
/// absent). Falls back to multiplier bisection followed by a Newton polish if
/// the first Newton run stalls; returns the best state with `converged =
/// false` if that also fails.
pub fn solve_joint(
    grid: &SubbandGrid,
    fading: &FadingModel,
    budget: f64,
    init: Option<&Design>,
    opts: &SolverOptions,
) -> Result<KktState> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(domain(format!("power budget must be finite and > 0, got {budget}")));
    }
    let start = match init {
        Some(d) => {
            d.validate(grid, budget * (1.0 + 1e6))?;
            d.clone()
        }
        None => approx_opt::optimize(grid, fading, budget, approx_opt::default_tolerance(grid))?.design,
    };
    let (lo, hi) = grid.env().relay_bounds();
    if start.d_sr >= hi {
        return Err(domain("initial relay position must sit strictly before the destination-side limit"));
    }

    let attempt = |design: &Design| {
        let lambda = implied_multiplier(grid, fading, design);
        let layout = Layout {
            active: (0..grid.n()).filter(|&q| design.p_s[q] > 0.0 && design.p_r[q] > 0.0).collect(),
            lo,
            width: hi - lo,
        };
        let newton = Newton { grid, fading, budget, layout };
        let (x, iters, trace, ok) = newton.run(newton.layout.pack(design, lambda), opts);
        let (design, lambda) = newton.layout.unpack(&x, grid.n());
        (design, lambda, iters, trace, ok)
    };

    let (mut design, mut lambda, mut iterations, mut trace, mut converged) = attempt(&start);
    let mut used_fallback = false;
    if !converged {
        used_fallback = true;
        let (seed, _) = solve_by_multiplier_bisection(grid, fading, budget)?;
        let (d2, l2, i2, t2, ok2) = attempt(&seed);
        iterations += i2;
        trace.extend(t2);
        let better = ok2
            || max_abs(&residuals_unchecked(grid, fading, &d2, l2, budget))
                < max_abs(&residuals_unchecked(grid, fading, &design, lambda, budget));
        if better {
            (design, lambda, converged) = (d2, l2, ok2);
        }
    }
    let residuals = residuals_unchecked(grid, fading, &design, lambda, budget);
    let f = surrogate_objective(grid, &design, fading);
    Ok(KktState {
        design,
        lambda,
        ln_lambda_product: lambda.ln() + f,
        residuals,
        iterations,
        converged,
        residual_trace: trace,
        used_fallback,
    })
}

// ---------------------------------------------------------------------------
// Pseudoconcavity certificate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// Spreading factor or shape exponent at or below one.
    NotApplicable,
    /// Finite differences at two step sizes disagree.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianCertificate {
    pub f_khz: f64,
    pub s_s: f64,
    pub s_r: f64,
    pub d_sr: f64,
    pub det2: f64,
    pub det3: f64,
    pub det4: f64,
    pub closed_form_det3: f64,
    /// Largest relative change in `det3`/`det4` between steps 1e-5 and 1e-4.
    pub step_disagreement: f64,
    pub verdict: Verdict,
}

/// Pointwise scale SNR at frequency `f`: `β/N(f)·(Y₁^B + Y₂^B)^(−1/B)` with
/// `Y₁ = a^d d^α/(c_SR S_S)`, `Y₂ = a^(L−d) (L−d)^α/(c_RD S_R)`.
struct PointSnr {
    ln_scale: f64,
    ln_a: f64,
    alpha: f64,
    span: f64,
    b: f64,
    ln_c_sr: f64,
    ln_c_rd: f64,
}

impl PointSnr {
    fn new(env: &AcousticEnv, fading: &FadingModel, f: f64) -> Result<Self> {
        Ok(Self {
            ln_scale: fading.beta().ln() - noise_psd(f, &env.noise)?.ln(),
            ln_a: absorption_linear(f)?.ln(),
            alpha: env.spreading,
            span: env.span_km(),
            b: fading.b(),
            ln_c_sr: env.gain_sr.at(f).ln(),
            ln_c_rd: env.gain_rd.at(f).ln(),
        })
    }

    fn ln_y(&self, x: &[f64; 3]) -> (f64, f64) {
        let [s_s, s_r, d] = *x;
        let rest = self.span - d;
        (
            d * self.ln_a + self.alpha * d.ln() - self.ln_c_sr - s_s.ln(),
            rest * self.ln_a + self.alpha * rest.ln() - self.ln_c_rd - s_r.ln(),
        )
    }

    fn value(&self, x: &[f64; 3]) -> f64 {
        let (y1, y2) = self.ln_y(x);
        (self.ln_scale - log_add_exp(self.b * y1, self.b * y2) / self.b).exp()
    }

    fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        let [s_s, s_r, d] = *x;
        let (y1, y2) = self.ln_y(x);
        let w1 = 1.0 / (1.0 + (self.b * (y2 - y1)).exp());
        let w2 = 1.0 / (1.0 + (self.b * (y1 - y2)).exp());
        let g = self.value(x);
        [
            g * w1 / s_s,
            g * w2 / s_r,
            g * (w2 * (self.ln_a + self.alpha / (self.span - d)) - w1 * (self.ln_a + self.alpha / d)),
        ]
    }

    /// Bordered determinants `(det2, det3, det4)` with a central-difference
    /// Hessian at relative step `h`.
    fn bordered(&self, x: &[f64; 3], h: f64) -> (f64, f64, f64) {
        let g = self.gradient(x);
        // work in x_i-scaled coordinates so all entries are comparable
        let mut hess = Matrix3::zeros();
        for j in 0..3 {
            let (mut up, mut down) = (*x, *x);
            up[j] *= 1.0 + h;
            down[j] *= 1.0 - h;
            let (gu, gd) = (self.gradient(&up), self.gradient(&down));
            for i in 0..3 {
                hess[(i, j)] = (gu[i] - gd[i]) / (2.0 * h) * x[i];
            }
        }
        // A central difference carries rounding error proportional to the
        // differenced value, so each cross term comes from the smaller of the
        // two scaled gradient components rather than from their average.
        let scaled = [g[0] * x[0], g[1] * x[1], g[2] * x[2]];
        for i in 0..3 {
            for j in 0..i {
                let v = if scaled[i].abs() <= scaled[j].abs() { hess[(i, j)] } else { hess[(j, i)] };
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        let mut m = Matrix4::zeros();
        for i in 0..3 {
            m[(0, i + 1)] = g[i] * x[i];
            m[(i + 1, 0)] = g[i] * x[i];
            for j in 0..3 {
                m[(i + 1, j + 1)] = hess[(i, j)];
            }
        }
        let s2 = (x[0] * x[1]).powi(2);
        let det2 = -(g[0] * g[0]);
        let det3 = m.fixed_view::<3, 3>(0, 0).determinant() / s2;
        let det4 = m.determinant() / (s2 * x[2] * x[2]);
        (det2, det3, det4)
    }
}

/// `C³(1+B)·Y₁^B·Y₂^B·(Y₁^B+Y₂^B)^(−2−3/B)·(S_S S_R)^−2` with `C = β/N(f)`:
/// the leading 3×3 bordered minor of the pointwise scale SNR in closed form.
pub fn closed_form_det3(
    env: &AcousticEnv,
    fading: &FadingModel,
    f_khz: f64,
    s_s: f64,
    s_r: f64,
    d: f64,
) -> Result<f64> {
    check_point(env, f_khz, s_s, s_r, d)?;
    let p = PointSnr::new(env, fading, f_khz)?;
    let b = p.b;
    let (y1, y2) = p.ln_y(&[s_s, s_r, d]);
    let ln = 3.0 * p.ln_scale + b.ln_1p() + b * y1 + b * y2
        - (2.0 + 3.0 / b) * log_add_exp(b * y1, b * y2)
        - 2.0 * (s_s * s_r).ln();
    Ok(ln.exp())
}

fn check_point(env: &AcousticEnv, f: f64, s_s: f64, s_r: f64, d: f64) -> Result<()> {
    env.validate()?;
    let (lo, hi) = env.relay_bounds();
    if !(d > lo && d < hi) {
        return Err(domain(format!("relay distance {d} must lie strictly inside ({lo}, {hi}) km")));
    }
    if !(s_s > 0.0 && s_r > 0.0) || !s_s.is_finite() || !s_r.is_finite() {
        return Err(domain("transmit PSDs must be finite and > 0"));
    }
    if !(f > 0.0) {
        return Err(domain("frequency must be > 0 kHz"));
    }
    Ok(())
}

/// Analytic gradient `(∂/∂S_S, ∂/∂S_R, ∂/∂d)` of the pointwise scale SNR.
pub fn point_snr_gradient(
    env: &AcousticEnv,
    fading: &FadingModel,
    f_khz: f64,
    s_s: f64,
    s_r: f64,
    d: f64,
) -> Result<[f64; 3]> {
    check_point(env, f_khz, s_s, s_r, d)?;
    Ok(PointSnr::new(env, fading, f_khz)?.gradient(&[s_s, s_r, d]))
}

/// Pointwise scale SNR; see [`closed_form_det3`] for the symbols.
pub fn point_snr(env: &AcousticEnv, fading: &FadingModel, f_khz: f64, s_s: f64, s_r: f64, d: f64) -> Result<f64> {
    check_point(env, f_khz, s_s, s_r, d)?;
    Ok(PointSnr::new(env, fading, f_khz)?.value(&[s_s, s_r, d]))
}

const FD_STEP: f64 = 1e-5;
const CHECK_STEP: f64 = 1e-4;

/// Bordered-Hessian test of pseudoconcavity at one point. PASS needs
/// `det2 < 0`, `det3 > 0`, `det4 < 0` and `det3` within 1e-3 of its closed
/// form.
pub fn hessian_certificate(
    env: &AcousticEnv,
    fading: &FadingModel,
    f_khz: f64,
    s_s: f64,
    s_r: f64,
    d_sr: f64,
) -> Result<HessianCertificate> {
    check_point(env, f_khz, s_s, s_r, d_sr)?;
    let p = PointSnr::new(env, fading, f_khz)?;
    let x = [s_s, s_r, d_sr];
    let (det2, det3, det4) = p.bordered(&x, FD_STEP);
    let (_, det3_c, det4_c) = p.bordered(&x, CHECK_STEP);
    let step_disagreement = ((det3 - det3_c) / det3).abs().max(((det4 - det4_c) / det4).abs());
    let closed_form_det3 = closed_form_det3(env, fading, f_khz, s_s, s_r, d_sr)?;
    let verdict = if env.spreading <= 1.0 || !fading.supports_certificate() {
        Verdict::NotApplicable
    } else if !(step_disagreement <= 1e-2) {
        Verdict::Inconclusive
    } else if det2 < 0.0 && det3 > 0.0 && det4 < 0.0 && ((det3 - closed_form_det3) / det3).abs() < 1e-3 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(HessianCertificate { f_khz, s_s, s_r, d_sr, det2, det3, det4, closed_form_det3, step_disagreement, verdict })
}

/// Certificates at `points` random interior points: relay position uniform
/// on the open range, frequency uniform over the band, both PSDs log-uniform
/// over four decades centred on `centre_psd`.
pub fn certificate_sweep(
    env: &AcousticEnv,
    fading: &FadingModel,
    centre_psd: f64,
    points: usize,
    seed: u64,
) -> Result<Vec<HessianCertificate>> {
    env.validate()?;
    if !(centre_psd > 0.0) {
        return Err(domain("centre PSD must be > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = env.relay_bounds();
    let (f_lo, f_hi) = env.band_khz;
    let centre = centre_psd.log10();
    let mut out = Vec::with_capacity(points);
    for _ in 0..points {
        let d = lo + (hi - lo) * rng.sample::<f64, _>(rand::distr::Open01);
        let f = rng.random_range(f_lo..f_hi);
        let s_s = 10f64.powf(centre + rng.random_range(-2.0..2.0));
        let s_r = 10f64.powf(centre + rng.random_range(-2.0..2.0));
        out.push(hessian_certificate(env, fading, f, s_s, s_r, d)?);
    }
    Ok(out)
}
