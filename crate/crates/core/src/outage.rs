//! Sub-band discretization, Monte Carlo outage estimation and the
//! deterministic surrogate objective.
//!
//! Powers are per sub-band in linear μPa²; the noise power of band `q` is
//! `N(f_q)·Δf`. Every hop SNR is drawn through [`FadingModel`] with an
//! independent draw per band and hop.
//!
//! Monte Carlo trials use one ChaCha8 stream per trial (`seed`, stream =
//! trial index), so estimates do not depend on how trials are scheduled
//! across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustics::{absorption_linear, noise_psd, AcousticEnv};
use crate::error::{domain, invalid, Result};
use crate::fading::FadingModel;
use crate::numeric::log_add_exp;

/// The operating band split into `n` equal sub-bands with cached physics.
#[derive(Debug, Clone)]
pub struct SubbandGrid {
    env: AcousticEnv,
    delta_f_hz: f64,
    centers_khz: Vec<f64>,
    absorption: Vec<f64>,
    noise_psd: Vec<f64>,
    gain_sr: Vec<f64>,
    gain_rd: Vec<f64>,
}

impl SubbandGrid {
    pub fn new(env: &AcousticEnv, n: usize) -> Result<Self> {
        env.validate()?;
        if n == 0 {
            return Err(invalid("need at least one sub-band"));
        }
        let (lo, hi) = env.band_khz;
        let width_khz = (hi - lo) / n as f64;
        let centers_khz: Vec<f64> = (0..n).map(|q| lo + (q as f64 + 0.5) * width_khz).collect();
        let absorption = centers_khz.iter().map(|&f| absorption_linear(f)).collect::<Result<_>>()?;
        let noise = centers_khz.iter().map(|&f| noise_psd(f, &env.noise)).collect::<Result<_>>()?;
        Ok(Self {
            delta_f_hz: env.bandwidth_hz() / n as f64,
            gain_sr: centers_khz.iter().map(|&f| env.gain_sr.at(f)).collect(),
            gain_rd: centers_khz.iter().map(|&f| env.gain_rd.at(f)).collect(),
            env: env.clone(),
            centers_khz,
            absorption,
            noise_psd: noise,
        })
    }

    pub fn env(&self) -> &AcousticEnv {
        &self.env
    }
    pub fn n(&self) -> usize {
        self.centers_khz.len()
    }
    pub fn delta_f_hz(&self) -> f64 {
        self.delta_f_hz
    }
    pub fn centers_khz(&self) -> &[f64] {
        &self.centers_khz
    }
    pub fn absorption(&self, q: usize) -> f64 {
        self.absorption[q]
    }
    pub fn noise_psd(&self, q: usize) -> f64 {
        self.noise_psd[q]
    }
    /// `N_q·Δf`, μPa².
    pub fn noise_power(&self, q: usize) -> f64 {
        self.noise_psd[q] * self.delta_f_hz
    }
    pub fn gain_sr(&self, q: usize) -> f64 {
        self.gain_sr[q]
    }
    pub fn gain_rd(&self, q: usize) -> f64 {
        self.gain_rd[q]
    }

    /// `ln(a_q^d · d^α)` for the source-relay hop.
    pub(crate) fn ln_sr_loss(&self, q: usize, d: f64) -> f64 {
        d * self.absorption[q].ln() + self.env.spreading * d.ln()
    }

    /// `ln(a_q^(D−δ−d) · (D−δ−d)^α)` for the relay-destination hop.
    pub(crate) fn ln_rd_loss(&self, q: usize, d: f64) -> f64 {
        let rest = self.env.span_km() - d;
        rest * self.absorption[q].ln() + self.env.spreading * rest.ln()
    }
}

/// Decision variables: relay distance and per-band powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub d_sr: f64,
    pub p_s: Vec<f64>,
    pub p_r: Vec<f64>,
}

impl Design {
    /// `P_Sq = P_Rq = P_B / (2n)`.
    pub fn uniform(grid: &SubbandGrid, budget: f64, d_sr: f64) -> Self {
        let p = budget / (2 * grid.n()) as f64;
        Self { d_sr, p_s: vec![p; grid.n()], p_r: vec![p; grid.n()] }
    }

    pub fn total_power(&self) -> f64 {
        self.p_s.iter().chain(&self.p_r).sum()
    }

    /// Checks placement bounds, non-negative powers and the sum-power budget.
    pub fn validate(&self, grid: &SubbandGrid, budget: f64) -> Result<()> {
        self.validate_shape(grid)?;
        if self.total_power() > budget * (1.0 + 1e-9) {
            return Err(invalid(format!("total power {:.6e} exceeds budget {:.6e}", self.total_power(), budget)));
        }
        Ok(())
    }

    pub(crate) fn validate_shape(&self, grid: &SubbandGrid) -> Result<()> {
        let (lo, hi) = grid.env().relay_bounds();
        if !(self.d_sr >= lo && self.d_sr <= hi) {
            return Err(invalid(format!("relay distance {} outside [{lo}, {hi}] km", self.d_sr)));
        }
        if self.p_s.len() != grid.n() || self.p_r.len() != grid.n() {
            return Err(invalid(format!(
                "design has {}/{} bands, grid has {}",
                self.p_s.len(),
                self.p_r.len(),
                grid.n()
            )));
        }
        if self.p_s.iter().chain(&self.p_r).any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(invalid("powers must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Monte Carlo outage estimate with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub trials: u64,
    pub ci95_halfwidth: f64,
    pub seed: u64,
}

impl OutageEstimate {
    pub fn from_rates(rates: &[f64], r: f64, seed: u64) -> Self {
        let trials = rates.len() as u64;
        let hits = rates.iter().filter(|&&x| x <= r).count();
        let p_hat = hits as f64 / trials as f64;
        let ci95_halfwidth = 1.96 * (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
        Self { p_hat, trials, ci95_halfwidth, seed }
    }
}

/// Scale SNR of `min(γ_SR,q, γ_RD,q)`:
/// `β/(N_qΔf) · [(a^d d^α / c_SR P_S)^B + (a^(D−δ−d) (D−δ−d)^α / c_RD P_R)^B]^(−1/B)`.
/// Zero when either hop of the band is unpowered.
pub fn per_band_snr_scale(grid: &SubbandGrid, design: &Design, fading: &FadingModel, q: usize) -> f64 {
    let (ps, pr) = (design.p_s[q], design.p_r[q]);
    if ps <= 0.0 || pr <= 0.0 {
        return 0.0;
    }
    let b = fading.b();
    let ln_u = grid.ln_sr_loss(q, design.d_sr) - (grid.gain_sr(q) * ps).ln();
    let ln_v = grid.ln_rd_loss(q, design.d_sr) - (grid.gain_rd(q) * pr).ln();
    fading.beta() / grid.noise_power(q) * (-log_add_exp(b * ln_u, b * ln_v) / b).exp()
}

/// `Σ_q ln(1 + γ̄_q)`: the log of the product objective.
pub fn surrogate_objective(grid: &SubbandGrid, design: &Design, fading: &FadingModel) -> f64 {
    (0..grid.n()).map(|q| per_band_snr_scale(grid, design, fading, q).ln_1p()).sum()
}

/// Per-trial random stream: ChaCha8 keyed by `seed`, stream number `trial`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws half-duplex DF rates for a fixed design. Hop scales are computed
/// once; each call consumes two uniforms per band (SR then RD) in band order.
#[derive(Debug, Clone)]
pub struct RateSampler {
    fading: FadingModel,
    /// `(coarse band, Δf/2, SR scale, RD scale)` per evaluated sub-band.
    bands: Vec<(usize, f64, f64, f64)>,
    draws: usize,
}

impl RateSampler {
    pub fn new(grid: &SubbandGrid, design: &Design, fading: &FadingModel) -> Result<Self> {
        design.validate_shape(grid)?;
        let bands = (0..grid.n())
            .map(|q| {
                let (sr, rd) = hop_scales(grid, design, fading, q, 1.0);
                (q, 0.5 * grid.delta_f_hz(), sr, rd)
            })
            .collect();
        Ok(Self { fading: *fading, bands, draws: grid.n() })
    }

    /// Rate sampler on a grid refined `factor` times, with each coarse band's
    /// PSD held on its sub-bands and one fading draw per coarse band shared
    /// by its sub-bands.
    pub fn refined(grid: &SubbandGrid, design: &Design, fading: &FadingModel, factor: usize) -> Result<Self> {
        design.validate_shape(grid)?;
        if factor == 0 {
            return Err(domain("refinement factor must be >= 1"));
        }
        let fine = SubbandGrid::new(grid.env(), grid.n() * factor)?;
        let split = Design {
            d_sr: design.d_sr,
            p_s: design.p_s.iter().flat_map(|&p| std::iter::repeat_n(p / factor as f64, factor)).collect(),
            p_r: design.p_r.iter().flat_map(|&p| std::iter::repeat_n(p / factor as f64, factor)).collect(),
        };
        let bands = (0..fine.n())
            .map(|j| {
                let (sr, rd) = hop_scales(&fine, &split, fading, j, 1.0);
                (j / factor, 0.5 * fine.delta_f_hz(), sr, rd)
            })
            .collect();
        Ok(Self { fading: *fading, bands, draws: grid.n() })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut draws = Vec::with_capacity(self.draws);
        for _ in 0..self.draws {
            let u_sr: f64 = rng.sample(rand::distr::Open01);
            let u_rd: f64 = rng.sample(rand::distr::Open01);
            draws.push((self.fading.unit_quantile(u_sr), self.fading.unit_quantile(u_rd)));
        }
        self.bands
            .iter()
            .map(|&(q, half_df, sr, rd)| {
                let (x_sr, x_rd) = draws[q];
                half_df * (sr * x_sr).min(rd * x_rd).ln_1p() / std::f64::consts::LN_2
            })
            .sum()
    }

    /// `trials` independent rates, in trial order, computed in parallel.
    pub fn rates(&self, trials: u64, seed: u64) -> Vec<f64> {
        (0..trials).into_par_iter().map(|t| self.sample(&mut trial_rng(seed, t))).collect()
    }
}

/// Scale SNRs of the two hops of band `q` (zero for an unpowered hop).
pub(crate) fn hop_scales(
    grid: &SubbandGrid,
    design: &Design,
    fading: &FadingModel,
    q: usize,
    scale: f64,
) -> (f64, f64) {
    let base = scale * fading.beta() / grid.noise_power(q);
    let d = design.d_sr;
    let sr = base * grid.gain_sr(q) * design.p_s[q] * (-grid.ln_sr_loss(q, d)).exp();
    let rd =
        if design.p_r[q] > 0.0 { base * grid.gain_rd(q) * design.p_r[q] * (-grid.ln_rd_loss(q, d)).exp() } else { 0.0 };
    (sr, rd)
}

/// One draw of `Σ_q (Δf/2)·log₂(1 + min(γ_SR,q, γ_RD,q))`, bits/s.
pub fn rate_sample<R: Rng + ?Sized>(
    grid: &SubbandGrid,
    design: &Design,
    fading: &FadingModel,
    rng: &mut R,
) -> Result<f64> {
    Ok(RateSampler::new(grid, design, fading)?.sample(rng))
}

/// Fraction of `trials` rate draws at or below `r` bits/s.
pub fn estimate_outage(
    grid: &SubbandGrid,
    design: &Design,
    fading: &FadingModel,
    r: f64,
    trials: u64,
    seed: u64,
) -> Result<OutageEstimate> {
    if trials == 0 {
        return Err(domain("need at least one Monte Carlo trial"));
    }
    let rates = RateSampler::new(grid, design, fading)?.rates(trials, seed);
    Ok(OutageEstimate::from_rates(&rates, r, seed))
}

/// Outage on a grid of `n_ref` sub-bands (a multiple of `grid.n()`), holding
/// the design's PSD shape and the per-band fading draws fixed. Stands in for
/// the continuous-frequency outage.
pub fn continuous_reference_outage(
    grid: &SubbandGrid,
    design: &Design,
    fading: &FadingModel,
    r: f64,
    trials: u64,
    seed: u64,
    n_ref: usize,
) -> Result<OutageEstimate> {
    if trials == 0 {
        return Err(domain("need at least one Monte Carlo trial"));
    }
    let rates = reference_sampler(grid, design, fading, n_ref)?.rates(trials, seed);
    Ok(OutageEstimate::from_rates(&rates, r, seed))
}

pub fn reference_sampler(
    grid: &SubbandGrid,
    design: &Design,
    fading: &FadingModel,
    n_ref: usize,
) -> Result<RateSampler> {
    if n_ref < grid.n() || !n_ref.is_multiple_of(grid.n()) {
        return Err(domain(format!("reference grid size {n_ref} must be a positive multiple of {}", grid.n())));
    }
    RateSampler::refined(grid, design, fading, n_ref / grid.n())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
