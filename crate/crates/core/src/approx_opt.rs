//! Low-complexity three-stage design: split each band's power between source
//! and relay, water-fill across bands, then search the relay position.
//!
//! Because the per-band scale SNR is homogeneous of degree one in the two
//! hop powers, the split ratio is exact, so for a fixed relay position the
//! allocation here is the true maximizer of the surrogate objective.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fading::FadingModel;
use crate::numeric::{bisect_decreasing, golden_section_max};
use crate::outage::{Design, SubbandGrid};

/// Which end of the relay range the placement search ended on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    NearSource,
    NearDestination,
}

/// Power allocation across bands at a fixed relay position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandAllocation {
    pub d_sr: f64,
    pub p_s: Vec<f64>,
    pub z: Vec<f64>,
    pub k: Vec<f64>,
    /// Multiplier of the budget in the log objective `Σ ln(1 + P_Sq/K_q)`.
    pub lambda: f64,
    /// `ln` of the multiplier of the product objective `Π(1 + P_Sq/K_q)`.
    pub ln_lambda_product: f64,
    pub active: Vec<bool>,
}

impl BandAllocation {
    pub fn design(&self) -> Design {
        Design {
            d_sr: self.d_sr,
            p_r: self.p_s.iter().zip(&self.z).map(|(p, z)| p * z).collect(),
            p_s: self.p_s.clone(),
        }
    }

    /// `Σ ln(1 + P_Sq/K_q)`, equal to the surrogate objective of [`Self::design`].
    pub fn objective(&self) -> f64 {
        self.p_s.iter().zip(&self.k).map(|(p, k)| (p / k).ln_1p()).sum()
    }

    pub fn all_active(&self) -> bool {
        self.active.iter().all(|&a| a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSolution {
    pub design: Design,
    pub lambda: f64,
    pub ln_lambda_product: f64,
    pub z: Vec<f64>,
    pub k: Vec<f64>,
    /// `|g'(d*)|` of the reduced placement objective, per km.
    pub l3_residual: f64,
    /// `|g'/g''|` at `d*`: estimated distance to the stationary point, km.
    pub l3_step_km: f64,
    /// Some band received no power and the active-set solution was used.
    pub active_set_fallback: bool,
    pub boundary: Option<Boundary>,
}

fn check_position(grid: &SubbandGrid, d: f64) -> Result<()> {
    let (lo, hi) = grid.env().relay_bounds();
    if !(d >= lo && d < hi) {
        return Err(domain(format!("relay distance {d} outside [{lo}, {hi}) km")));
    }
    Ok(())
}

fn ln_split_ratio(grid: &SubbandGrid, fading: &FadingModel, d: f64, q: usize) -> f64 {
    let b = fading.b();
    let ln_ratio = grid.gain_sr(q).ln() + grid.ln_rd_loss(q, d) - grid.gain_rd(q).ln() - grid.ln_sr_loss(q, d);
    b / (b + 1.0) * ln_ratio
}

/// Relay-to-source power ratio `Z_q` that maximizes band `q`'s scale SNR for a
/// fixed band total. The relay must sit strictly before `D − δ`.
pub fn split_ratio(grid: &SubbandGrid, fading: &FadingModel, d: f64, q: usize) -> Result<f64> {
    check_position(grid, d)?;
    if q >= grid.n() {
        return Err(domain(format!("band {q} out of range")));
    }
    Ok(ln_split_ratio(grid, fading, d, q).exp())
}

/// `K_q = N_qΔf·a_q^d·d^α·(1 + Z_q)^(1/B) / (β·c_SR,q)`, so that the band's
/// scale SNR is `P_Sq / K_q` under the optimal split.
pub fn band_weights(grid: &SubbandGrid, fading: &FadingModel, d: f64) -> Result<Vec<f64>> {
    check_position(grid, d)?;
    Ok((0..grid.n()).map(|q| band_weight(grid, fading, d, q, split_ratio_unchecked(grid, fading, d, q))).collect())
}

fn split_ratio_unchecked(grid: &SubbandGrid, fading: &FadingModel, d: f64, q: usize) -> f64 {
    ln_split_ratio(grid, fading, d, q).exp()
}

fn band_weight(grid: &SubbandGrid, fading: &FadingModel, d: f64, q: usize, z: f64) -> f64 {
    let b = fading.b();
    (grid.noise_power(q).ln() + grid.ln_sr_loss(q, d) + z.ln_1p() / b - fading.beta().ln() - grid.gain_sr(q).ln()).exp()
}

/// Interior water-filling: `P_Sq = (P_B + Σ(1+Z_j)K_j) / (n(1+Z_q)) − K_q`.
/// Fails with [`Error::BudgetTooSmall`] when some band would get `P_Sq ≤ 0`.
pub fn allocate_bands(grid: &SubbandGrid, fading: &FadingModel, d: f64, budget: f64) -> Result<BandAllocation> {
    let (z, k) = split_and_weights(grid, fading, d, budget)?;
    let active = vec![true; grid.n()];
    let (p_s, lambda) = water_fill(&k, &z, budget, &active);
    if let Some((band, &power)) = p_s.iter().enumerate().find(|(_, p)| **p <= 0.0) {
        return Err(Error::BudgetTooSmall { band, power });
    }
    Ok(finish(d, p_s, z, k, lambda, active))
}

/// Water-filling that switches off bands whose allocation would be
/// non-positive and re-solves on the rest until all active bands are positive.
pub fn allocate_bands_active_set(
    grid: &SubbandGrid,
    fading: &FadingModel,
    d: f64,
    budget: f64,
) -> Result<BandAllocation> {
    let (z, k) = split_and_weights(grid, fading, d, budget)?;
    let mut active = vec![true; grid.n()];
    loop {
        let (p_s, lambda) = water_fill(&k, &z, budget, &active);
        let mut changed = false;
        for (q, &p) in p_s.iter().enumerate() {
            if active[q] && p <= 0.0 {
                active[q] = false;
                changed = true;
            }
        }
        if !changed {
            return Ok(finish(d, p_s, z, k, lambda, active));
        }
    }
}

fn split_and_weights(grid: &SubbandGrid, fading: &FadingModel, d: f64, budget: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_position(grid, d)?;
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(domain(format!("power budget must be finite and > 0, got {budget}")));
    }
    let z: Vec<f64> = (0..grid.n()).map(|q| split_ratio_unchecked(grid, fading, d, q)).collect();
    let k = (0..grid.n()).map(|q| band_weight(grid, fading, d, q, z[q])).collect();
    Ok((z, k))
}

/// Equal-marginal solution over the `active` bands. Returns powers (zero on
/// inactive bands) and the log-objective multiplier.
pub(crate) fn water_fill(k: &[f64], z: &[f64], budget: f64, active: &[bool]) -> (Vec<f64>, f64) {
    let count = active.iter().filter(|&&a| a).count();
    let spread: f64 = (0..k.len()).filter(|&q| active[q]).map(|q| (1.0 + z[q]) * k[q]).sum();
    let level = (budget + spread) / count as f64;
    let p = (0..k.len()).map(|q| if active[q] { level / (1.0 + z[q]) - k[q] } else { 0.0 }).collect();
    (p, 1.0 / level)
}

fn finish(d: f64, p_s: Vec<f64>, z: Vec<f64>, k: Vec<f64>, lambda: f64, active: Vec<bool>) -> BandAllocation {
    let f: f64 = p_s.iter().zip(&k).map(|(p, k)| (p / k).ln_1p()).sum();
    BandAllocation { d_sr: d, p_s, z, k, lambda, ln_lambda_product: lambda.ln() + f, active }
}

/// Relative residuals of the fixed-position conditions: per band, marginal
/// gain over `λ(1+Z_q)` minus one (for inactive bands only the positive part
/// counts), then the budget `Σ(1+Z_q)P_Sq / P_B − 1`.
pub fn allocation_residuals(alloc: &BandAllocation, budget: f64) -> Vec<f64> {
    let mut r: Vec<f64> = (0..alloc.k.len())
        .map(|q| {
            let ratio = 1.0 / ((alloc.k[q] + alloc.p_s[q]) * alloc.lambda * (1.0 + alloc.z[q]));
            if alloc.active[q] {
                ratio - 1.0
            } else {
                (ratio - 1.0).max(0.0)
            }
        })
        .collect();
    let used: f64 = alloc.p_s.iter().zip(&alloc.z).map(|(p, z)| (1.0 + z) * p).sum();
    r.push(used / budget - 1.0);
    r
}

/// Best surrogate objective reachable at relay position `d`.
pub fn reduced_objective(grid: &SubbandGrid, fading: &FadingModel, budget: f64, d: f64) -> Result<f64> {
    Ok(allocate_bands_active_set(grid, fading, d, budget)?.objective())
}

/// Full three-stage design. `tol_d` is the placement tolerance in km.
pub fn optimize(grid: &SubbandGrid, fading: &FadingModel, budget: f64, tol_d: f64) -> Result<ApproxSolution> {
    if !(tol_d > 0.0) {
        return Err(domain("placement tolerance must be > 0"));
    }
    let (lo, hi_closed) = grid.env().relay_bounds();
    let scale = grid.env().distance_km;
    let hi = hi_closed - 1e-9 * scale;
    let g = |d: f64| reduced_objective(grid, fading, budget, d).unwrap_or(f64::NEG_INFINITY);
    let h = 1e-6 * scale;
    let slope = |d: f64| {
        let (a, b) = ((d - h).max(lo), (d + h).min(hi));
        (g(b) - g(a)) / (b - a)
    };
    // validates budget and geometry once up front
    reduced_objective(grid, fading, budget, lo)?;

    let (a, b) = golden_section_max(g, lo, hi, 1e-3 * (hi - lo));
    let mut boundary = None;
    let d = if slope(a) > 0.0 && slope(b) < 0.0 {
        bisect_decreasing(slope, a, b, tol_d)
    } else if a - lo < 2e-3 * (hi - lo) && slope(lo) <= 0.0 {
        boundary = Some(Boundary::NearSource);
        lo
    } else if hi - b < 2e-3 * (hi - lo) && slope(hi) >= 0.0 {
        boundary = Some(Boundary::NearDestination);
        hi
    } else {
        let (a, b) = golden_section_max(g, a, b, tol_d);
        0.5 * (a + b)
    };

    let alloc = allocate_bands_active_set(grid, fading, d, budget)?;
    let gp = slope(d);
    let curv_h = 1e-4 * scale;
    let curvature = if d - curv_h >= lo && d + curv_h <= hi {
        (g(d + curv_h) - 2.0 * g(d) + g(d - curv_h)) / (curv_h * curv_h)
    } else {
        f64::NAN
    };
    let l3_step_km = if boundary.is_some() { 0.0 } else { (gp / curvature).abs() };
    Ok(ApproxSolution {
        design: alloc.design(),
        lambda: alloc.lambda,
        ln_lambda_product: alloc.ln_lambda_product,
        active_set_fallback: !alloc.all_active(),
        z: alloc.z,
        k: alloc.k,
        l3_residual: gp.abs(),
        l3_step_km,
        boundary,
    })
}

/// Placement tolerance used when none is configured: `10⁻⁴·D`.
pub fn default_tolerance(grid: &SubbandGrid) -> f64 {
    1e-4 * grid.env().distance_km
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::{AcousticEnv, GainProfile};
    use crate::outage::{per_band_snr_scale, surrogate_objective};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const BUDGET: f64 = 1e10;

    fn grid_with(n: usize, c_sr: f64, c_rd: f64) -> SubbandGrid {
        let env = AcousticEnv {
            gain_sr: GainProfile::Constant(c_sr),
            gain_rd: GainProfile::Constant(c_rd),
            ..AcousticEnv::default()
        };
        SubbandGrid::new(&env, n).unwrap()
    }

    fn fading() -> FadingModel {
        FadingModel::from_db(3.01).unwrap()
    }

    #[test]
    fn symmetric_midpoint_split_is_one() {
        let grid = grid_with(32, 1.0, 1.0);
        let mid = grid.env().span_km() / 2.0;
        for q in 0..32 {
            assert!((split_ratio(&grid, &fading(), mid, q).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(split_ratio(&grid, &fading(), 0.01, 0).is_err());
        assert!(split_ratio(&grid, &fading(), grid.env().span_km(), 0).is_err());
    }

    #[test]
    fn split_beats_scanned_alternatives() {
        let grid = grid_with(16, 2.0, 1.0);
        let m = fading();
        let d = 3.7;
        for q in 0..16 {
            let z = split_ratio(&grid, &m, d, q).unwrap();
            let total = 1e8;
            let at = |s: f64| {
                let mut design = Design::uniform(&grid, 1.0, d);
                design.p_s[q] = s * total;
                design.p_r[q] = (1.0 - s) * total;
                per_band_snr_scale(&grid, &design, &m, q)
            };
            let best = at(1.0 / (1.0 + z));
            for i in 1..1000 {
                assert!(at(i as f64 / 1000.0) <= best * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn weight_identity_matches_band_scale() {
        let grid = grid_with(64, 3.0, 1.0);
        let m = fading();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let d = rng.random_range(0.2..9.8);
            let q = rng.random_range(0..64);
            let ps = 10f64.powf(rng.random_range(4.0..10.0));
            let k = band_weights(&grid, &m, d).unwrap()[q];
            let z = split_ratio(&grid, &m, d, q).unwrap();
            let mut design = Design::uniform(&grid, 1.0, d);
            design.p_s[q] = ps;
            design.p_r[q] = z * ps;
            let direct = per_band_snr_scale(&grid, &design, &m, q);
            assert!(((ps / k) / direct - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_weights_share_common_factor() {
        let grid = grid_with(8, 1.0, 1.0);
        let m = fading();
        let mid = grid.env().span_km() / 2.0;
        let k = band_weights(&grid, &m, mid).unwrap();
        for (q, kq) in k.iter().enumerate() {
            let plain = grid.noise_power(q) * grid.absorption(q).powf(mid) * mid.powf(1.5) / m.beta();
            assert!((kq / plain / 2f64.powf(1.0 / m.b()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_grow_past_midpoint() {
        let grid = grid_with(8, 1.0, 1.0);
        let m = fading();
        let mid = grid.env().span_km() / 2.0;
        let mut prev = band_weights(&grid, &m, mid).unwrap();
        for i in 1..40 {
            let d = mid + i as f64 * 0.1;
            let k = band_weights(&grid, &m, d).unwrap();
            assert!(k.iter().zip(&prev).all(|(a, b)| a > b));
            prev = k;
        }
    }

    #[test]
    fn equal_weights_give_uniform_split() {
        let k = vec![3.0; 5];
        let z = vec![1.0; 5];
        let (p, _) = water_fill(&k, &z, 1000.0, &[true; 5]);
        for x in p {
            assert!((x - 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn allocation_satisfies_stationarity_and_budget() {
        let grid = grid_with(64, 4.0, 1.0);
        let m = fading();
        let alloc = allocate_bands(&grid, &m, 6.2, BUDGET).unwrap();
        assert!(alloc.lambda > 0.0);
        for r in allocation_residuals(&alloc, BUDGET) {
            assert!(r.abs() < 1e-8, "{r}");
        }
        let design = alloc.design();
        assert!((design.total_power() / BUDGET - 1.0).abs() < 1e-9);
        let s = surrogate_objective(&grid, &design, &m);
        assert!((s / alloc.objective() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn large_budget_tends_to_equal_totals() {
        let grid = grid_with(16, 1.0, 1.0);
        let m = fading();
        let mut prev = f64::INFINITY;
        for exp in [9.0, 11.0, 13.0, 15.0] {
            let budget = 10f64.powf(exp);
            let alloc = allocate_bands(&grid, &m, 3.0, budget).unwrap();
            let gap = (0..16)
                .map(|q| (alloc.p_s[q] - budget / (16.0 * (1.0 + alloc.z[q]))).abs() / alloc.p_s[q])
                .fold(0.0, f64::max);
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn two_band_allocation_matches_scan() {
        let grid = grid_with(2, 1.0, 1.0);
        let m = fading();
        let d = 4.0;
        let k = band_weights(&grid, &m, d).unwrap();
        let budget = 3.0 * (k[0] + k[1]);
        let alloc = allocate_bands(&grid, &m, d, budget).unwrap();
        let (k, z) = (&alloc.k, &alloc.z);
        assert!((k[0] / k[1] - 1.0).abs() > 0.01);
        let obj = |t: f64| {
            let p1 = t * budget / (1.0 + z[0]);
            let p2 = (1.0 - t) * budget / (1.0 + z[1]);
            (p1 / k[0]).ln_1p() + (p2 / k[1]).ln_1p()
        };
        let best = (0..=200_000).map(|i| i as f64 / 200_000.0).max_by(|a, b| obj(*a).total_cmp(&obj(*b))).unwrap();
        let p1 = best * budget / (1.0 + z[0]);
        assert!((p1 / alloc.p_s[0] - 1.0).abs() < 1e-3);
        assert!((obj(best) / alloc.objective() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn small_budget_falls_back_to_active_set() {
        let grid = grid_with(64, 1.0, 1.0);
        let m = fading();
        let k = band_weights(&grid, &m, 5.0).unwrap();
        let budget = k.iter().fold(0.0f64, |a, b| a.max(*b)) * 5.0;
        assert!(matches!(allocate_bands(&grid, &m, 5.0, budget), Err(Error::BudgetTooSmall { .. })));
        let alloc = allocate_bands_active_set(&grid, &m, 5.0, budget).unwrap();
        assert!(!alloc.all_active());
        assert!(alloc.p_s.iter().all(|&p| p >= 0.0));
        for r in allocation_residuals(&alloc, budget) {
            assert!(r.abs() < 1e-8, "{r}");
        }
    }

    #[test]
    fn symmetric_optimum_at_midpoint() {
        let grid = grid_with(64, 1.0, 1.0);
        let tol = default_tolerance(&grid);
        let sol = optimize(&grid, &fading(), BUDGET, tol).unwrap();
        assert!((sol.design.d_sr - grid.env().span_km() / 2.0).abs() <= tol);
        assert!(sol.boundary.is_none() && !sol.active_set_fallback);
        assert!(sol.l3_step_km <= tol);
        for (ps, pr) in sol.design.p_s.iter().zip(&sol.design.p_r) {
            assert!((pr / ps - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn stronger_source_link_moves_relay_toward_destination() {
        let grid = grid_with(32, 2.0, 1.0);
        let sol = optimize(&grid, &fading(), BUDGET, default_tolerance(&grid)).unwrap();
        assert!(sol.design.d_sr > grid.env().distance_km / 2.0);
        let mirrored = grid_with(32, 1.0, 2.0);
        let sol2 = optimize(&mirrored, &fading(), BUDGET, default_tolerance(&grid)).unwrap();
        let span = grid.env().span_km();
        assert!((sol.design.d_sr - (span - sol2.design.d_sr)).abs() < 2.0 * default_tolerance(&grid));
    }

    #[test]
    fn optimum_dominates_placement_scan() {
        let grid = grid_with(32, 3.0, 1.0);
        let m = fading();
        let sol = optimize(&grid, &m, BUDGET, default_tolerance(&grid)).unwrap();
        let best = surrogate_objective(&grid, &sol.design, &m);
        let (lo, hi) = grid.env().relay_bounds();
        for i in 0..=100 {
            let d = (lo + (hi - lo) * i as f64 / 100.0).min(hi - 1e-9);
            assert!(reduced_objective(&grid, &m, BUDGET, d).unwrap() <= best + 1e-9 * best.abs());
        }
    }

    #[test]
    fn asymmetric_split_crosses_one_once() {
        let grid = grid_with(64, 4.0, 1.0);
        let m = fading();
        let sol = optimize(&grid, &m, BUDGET, default_tolerance(&grid)).unwrap();
        let above: Vec<bool> = sol.z.iter().map(|&z| z > 1.0).collect();
        let flips = above.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(flips, 1, "z = {:?}", sol.z);
    }

    #[test]
    fn placement_at_boundary_is_flagged() {
        // a destination-side link so weak that the relay should hug it
        let grid = grid_with(8, 1.0, 1e-12);
        let sol = optimize(&grid, &fading(), BUDGET, default_tolerance(&grid)).unwrap();
        assert_eq!(sol.boundary, Some(Boundary::NearDestination), "{}", sol.design.d_sr);
    }
}
