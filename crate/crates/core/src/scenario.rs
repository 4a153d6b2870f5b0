//! Scenario configuration, scheme dispatch, sweeps and CSV output.
//!
//! Configurations are JSON documents. dB inputs are converted here; all
//! other modules work in linear units. Every table carries the SHA-256 of
//! the canonical configuration JSON and the seed in a leading comment line.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acoustics::{AcousticEnv, GainProfile};
use crate::approx_opt;
use crate::error::{domain, invalid, Error, Result};
use crate::fading::{db_to_linear, FadingModel};
use crate::joint_opt::{self, SolverOptions};
use crate::numeric::golden_section_max;
use crate::outage::{
    estimate_outage, mean, reference_sampler, surrogate_objective, Design, OutageEstimate, RateSampler, SubbandGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Uniform powers, relay at half the link distance.
    UpaFixed,
    /// Uniform powers, relay position optimized.
    OrpUpa,
    /// Optimal powers, relay at half the link distance.
    OpaMidpoint,
    /// Joint optimum from the KKT solver.
    Joint,
    /// Three-stage low-complexity design.
    Approx,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::UpaFixed, Scheme::OrpUpa, Scheme::OpaMidpoint, Scheme::Joint, Scheme::Approx];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::UpaFixed => "upa-fixed",
            Scheme::OrpUpa => "orp-upa",
            Scheme::OpaMidpoint => "opa-midpoint",
            Scheme::Joint => "joint",
            Scheme::Approx => "approx",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Replaces the fitted stretched-exponential shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeOverride {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub env: AcousticEnv,
    pub rice_k_db: f64,
    pub n: usize,
    /// Outage threshold, bits/s.
    pub rate_bps: f64,
    /// Sum-power budget, dB re μPa.
    pub budget_db: f64,
    /// Constant `c_SR : c_RD`; replaces the gain profiles of `env` when set.
    pub gain_ratio: Option<[f64; 2]>,
    pub scheme: Scheme,
    pub trials: u64,
    pub seed: u64,
    pub shape: Option<ShapeOverride>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            env: AcousticEnv::default(),
            rice_k_db: 3.01,
            n: 64,
            rate_bps: 1000.0,
            budget_db: 100.0,
            gain_ratio: None,
            scheme: Scheme::Joint,
            trials: 20_000,
            seed: 1,
            shape: None,
        }
    }
}

/// Sub-band count of the full-scale profile.
pub const FULL_SCALE_BANDS: usize = 260;

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some([s, r]) = self.gain_ratio {
            if !(s > 0.0 && r > 0.0) || !s.is_finite() || !r.is_finite() {
                return Err(invalid(format!("gain_ratio entries must be finite and > 0, got {s}:{r}")));
            }
        }
        self.resolved_env().validate()?;
        if self.n == 0 {
            return Err(invalid("n must be >= 1"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        if !(self.rate_bps >= 0.0) {
            return Err(invalid(format!("rate_bps must be >= 0, got {}", self.rate_bps)));
        }
        if !self.budget_db.is_finite() {
            return Err(invalid("budget_db must be finite"));
        }
        self.fading()?;
        Ok(())
    }

    pub fn resolved_env(&self) -> AcousticEnv {
        let mut env = self.env.clone();
        if let Some([s, r]) = self.gain_ratio {
            env.gain_sr = GainProfile::Constant(s);
            env.gain_rd = GainProfile::Constant(r);
        }
        env
    }

    pub fn fading(&self) -> Result<FadingModel> {
        match self.shape {
            Some(s) => FadingModel::from_shape(db_to_linear(self.rice_k_db), s.a, s.b),
            None => FadingModel::from_db(self.rice_k_db),
        }
    }

    pub fn budget(&self) -> f64 {
        db_to_linear(self.budget_db)
    }

    pub fn grid(&self) -> Result<SubbandGrid> {
        SubbandGrid::new(&self.resolved_env(), self.n)
    }

    /// Hex SHA-256 of the configuration serialized with sorted keys.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn fixed_position(&self) -> f64 {
        0.5 * self.env.distance_km
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub q: usize,
    pub f_khz: f64,
    pub p_s: f64,
    pub p_r: f64,
    /// `P_R / P_S`.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub scheme: Scheme,
    pub d_sr: f64,
    /// Budget multiplier of the log objective, when the scheme has one.
    pub lambda: Option<f64>,
    pub surrogate: f64,
    pub outage: OutageEstimate,
    pub mean_rate_bps: f64,
    pub bands: Vec<BandRow>,
    /// `max |residual|` of the stationarity system, when the scheme has one.
    pub max_residual: Option<f64>,
    pub converged: Option<bool>,
    pub active_set_fallback: bool,
    pub boundary: Option<approx_opt::Boundary>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl RunReport {
    pub fn design(&self) -> Design {
        Design {
            d_sr: self.d_sr,
            p_s: self.bands.iter().map(|b| b.p_s).collect(),
            p_r: self.bands.iter().map(|b| b.p_r).collect(),
        }
    }

    pub fn band_table(&self) -> Table {
        let mut t = Table::new(&["q", "f_khz", "p_s", "p_r", "z"], &self.config_hash, self.config.seed);
        for b in &self.bands {
            t.push(vec![b.q.to_string(), num(b.f_khz), num(b.p_s), num(b.p_r), num(b.z)]);
        }
        t
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// What a scheme produced before outage estimation.
struct Planned {
    design: Design,
    lambda: Option<f64>,
    max_residual: Option<f64>,
    converged: Option<bool>,
    active_set_fallback: bool,
    boundary: Option<approx_opt::Boundary>,
}

impl Planned {
    fn fixed(design: Design) -> Self {
        Self { design, lambda: None, max_residual: None, converged: None, active_set_fallback: false, boundary: None }
    }
}

/// Relay position maximizing the surrogate objective under uniform powers.
pub fn optimize_placement_uniform(grid: &SubbandGrid, fading: &FadingModel, budget: f64) -> f64 {
    let (lo, hi) = grid.env().relay_bounds();
    let hi = hi - 1e-9 * grid.env().distance_km;
    let tol = approx_opt::default_tolerance(grid);
    let (a, b) =
        golden_section_max(|d| surrogate_objective(grid, &Design::uniform(grid, budget, d), fading), lo, hi, tol);
    0.5 * (a + b)
}

fn plan(scheme: Scheme, grid: &SubbandGrid, fading: &FadingModel, budget: f64, fixed_d: f64) -> Result<Planned> {
    Ok(match scheme {
        Scheme::UpaFixed => Planned::fixed(Design::uniform(grid, budget, fixed_d)),
        Scheme::OrpUpa => {
            Planned::fixed(Design::uniform(grid, budget, optimize_placement_uniform(grid, fading, budget)))
        }
        Scheme::OpaMidpoint => {
            let alloc = approx_opt::allocate_bands_active_set(grid, fading, fixed_d, budget)?;
            let design = alloc.design();
            let res = joint_opt::kkt_residuals(grid, fading, &design, alloc.lambda, budget)?;
            Planned {
                max_residual: Some(power_residual(&res, grid.n())),
                lambda: Some(alloc.lambda),
                converged: None,
                active_set_fallback: !alloc.all_active(),
                boundary: None,
                design,
            }
        }
        Scheme::Approx => {
            let sol = approx_opt::optimize(grid, fading, budget, approx_opt::default_tolerance(grid))?;
            let res = joint_opt::kkt_residuals(grid, fading, &sol.design, sol.lambda, budget)?;
            Planned {
                max_residual: Some(res.iter().fold(0.0, |m, x| m.max(x.abs()))),
                lambda: Some(sol.lambda),
                converged: None,
                active_set_fallback: sol.active_set_fallback,
                boundary: sol.boundary,
                design: sol.design,
            }
        }
        Scheme::Joint => {
            let st = joint_opt::solve_joint(grid, fading, budget, None, &SolverOptions::default())?;
            Planned {
                max_residual: Some(st.max_residual()),
                lambda: Some(st.lambda),
                converged: Some(st.converged),
                active_set_fallback: st.design.p_s.contains(&0.0),
                boundary: None,
                design: st.design,
            }
        }
    })
}

/// Largest power residual, ignoring the placement entry (position is fixed).
fn power_residual(res: &[f64], n: usize) -> f64 {
    res[..2 * n].iter().chain(&res[2 * n + 1..]).fold(0.0, |m, x| m.max(x.abs()))
}

/// Design for `scheme` under `cfg` (without outage estimation).
pub fn design_for(cfg: &ScenarioConfig, scheme: Scheme) -> Result<Design> {
    cfg.validate()?;
    Ok(plan(scheme, &cfg.grid()?, &cfg.fading()?, cfg.budget(), cfg.fixed_position())?.design)
}

pub fn run_scheme(cfg: &ScenarioConfig) -> Result<RunReport> {
    let started = Instant::now();
    cfg.validate()?;
    let grid = cfg.grid()?;
    let fading = cfg.fading()?;
    let planned = plan(cfg.scheme, &grid, &fading, cfg.budget(), cfg.fixed_position())?;
    let design = &planned.design;
    let rates = RateSampler::new(&grid, design, &fading)?.rates(cfg.trials, cfg.seed);
    let outage = OutageEstimate::from_rates(&rates, cfg.rate_bps, cfg.seed);
    let bands = (0..grid.n())
        .map(|q| BandRow {
            q,
            f_khz: grid.centers_khz()[q],
            p_s: design.p_s[q],
            p_r: design.p_r[q],
            z: design.p_r[q] / design.p_s[q],
        })
        .collect();
    Ok(RunReport {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        scheme: cfg.scheme,
        d_sr: design.d_sr,
        lambda: planned.lambda,
        surrogate: surrogate_objective(&grid, design, &fading),
        outage,
        mean_rate_bps: mean(&rates),
        bands,
        max_residual: planned.max_residual,
        converged: planned.converged,
        active_set_fallback: planned.active_set_fallback,
        boundary: planned.boundary,
        elapsed: started.elapsed(),
    })
}

/// Outage at each relay position with the configured allocation style:
/// uniform powers for `upa-fixed`/`orp-upa`, optimal powers otherwise.
/// All positions share the seed. Columns `d_sr, p_hat, ci95`.
pub fn sweep_placement(cfg: &ScenarioConfig, d_grid: &[f64]) -> Result<Table> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let fading = cfg.fading()?;
    let budget = cfg.budget();
    let (lo, hi) = grid.env().relay_bounds();
    let mut table = Table::new(&["d_sr", "p_hat", "ci95"], &cfg.hash(), cfg.seed);
    for &d in d_grid {
        if !(d >= lo && d < hi) {
            return Err(domain(format!("sweep position {d} outside [{lo}, {hi}) km")));
        }
        let design = match cfg.scheme {
            Scheme::UpaFixed | Scheme::OrpUpa => Design::uniform(&grid, budget, d),
            _ => approx_opt::allocate_bands_active_set(&grid, &fading, d, budget)?.design(),
        };
        let est = estimate_outage(&grid, &design, &fading, cfg.rate_bps, cfg.trials, cfg.seed)?;
        table.push(vec![num(d), num(est.p_hat), num(est.ci95_halfwidth)]);
    }
    Ok(table)
}

/// `n` evenly spaced positions covering `[δ, D − δ)`.
pub fn placement_grid(env: &AcousticEnv, n: usize) -> Vec<f64> {
    let (lo, hi) = env.relay_bounds();
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let hi = hi - 1e-6 * env.distance_km;
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Outage threshold used by [`compare_schemes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateTarget {
    Absolute(f64),
    /// Median benchmark rate from a pilot run on a separate seed.
    BenchmarkMedian,
}

impl std::str::FromStr for RateTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "median" {
            return Ok(RateTarget::BenchmarkMedian);
        }
        s.parse::<f64>()
            .map(RateTarget::Absolute)
            .map_err(|_| invalid(format!("rate target must be a number or 'median', got {s:?}")))
    }
}

pub(crate) fn pilot_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// `100·(p_bench − p)/p_bench`, zero when the benchmark never fails.
pub fn improvement_pct(p_bench: f64, p: f64) -> f64 {
    if p_bench == 0.0 {
        0.0
    } else {
        100.0 * (p_bench - p) / p_bench
    }
}

pub const COMPARE_COLUMNS: [&str; 13] = [
    "c_sr",
    "c_rd",
    "rate_bps",
    "p_upa_fixed",
    "p_orp_upa",
    "p_opa_midpoint",
    "p_joint",
    "ci95_joint",
    "improvement_orp_upa",
    "improvement_opa_midpoint",
    "improvement_joint",
    "d_orp_upa",
    "d_joint",
];

/// Outage improvement of ORP+UPA, OPA-midpoint and JOINT over the fixed
/// uniform benchmark, for every gain ratio and rate target. All schemes use
/// the configured seed, so draws are common across schemes.
pub fn compare_schemes(base: &ScenarioConfig, ratios: &[[f64; 2]], rates: &[RateTarget]) -> Result<Table> {
    base.validate()?;
    let mut table = Table::new(&COMPARE_COLUMNS, &base.hash(), base.seed);
    let schemes = [Scheme::UpaFixed, Scheme::OrpUpa, Scheme::OpaMidpoint, Scheme::Joint];
    for &ratio in ratios {
        let cfg = ScenarioConfig { gain_ratio: Some(ratio), ..base.clone() };
        cfg.validate()?;
        let grid = cfg.grid()?;
        let fading = cfg.fading()?;
        let designs: Vec<Design> = schemes
            .iter()
            .map(|&s| plan(s, &grid, &fading, cfg.budget(), cfg.fixed_position()).map(|p| p.design))
            .collect::<Result<_>>()?;
        let samples: Vec<Vec<f64>> = designs
            .iter()
            .map(|d| Ok(RateSampler::new(&grid, d, &fading)?.rates(cfg.trials, cfg.seed)))
            .collect::<Result<_>>()?;
        for &target in rates {
            let r = match target {
                RateTarget::Absolute(r) => r,
                RateTarget::BenchmarkMedian => {
                    let mut pilot =
                        RateSampler::new(&grid, &designs[0], &fading)?.rates(cfg.trials, pilot_seed(cfg.seed));
                    median(&mut pilot)
                }
            };
            let est: Vec<OutageEstimate> = samples.iter().map(|s| OutageEstimate::from_rates(s, r, cfg.seed)).collect();
            let p: Vec<f64> = est.iter().map(|e| e.p_hat).collect();
            table.push(vec![
                num(ratio[0]),
                num(ratio[1]),
                num(r),
                num(p[0]),
                num(p[1]),
                num(p[2]),
                num(p[3]),
                num(est[3].ci95_halfwidth),
                num(improvement_pct(p[0], p[1])),
                num(improvement_pct(p[0], p[2])),
                num(improvement_pct(p[0], p[3])),
                num(designs[1].d_sr),
                num(designs[3].d_sr),
            ]);
        }
    }
    Ok(table)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub const SIMULATE_COLUMNS: [&str; 7] =
    ["budget_db", "mean_rate_bps", "p_hat", "ci95", "mean_rate_ref_bps", "p_hat_ref", "ci95_ref"];

/// Mean rate and outage of the configured scheme at each budget, on the
/// configured grid and on a reference grid of `n_ref` sub-bands (a multiple
/// of `n`).
pub fn simulate_budgets(cfg: &ScenarioConfig, budgets_db: &[f64], n_ref: usize) -> Result<Table> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let fading = cfg.fading()?;
    let mut table = Table::new(&SIMULATE_COLUMNS, &cfg.hash(), cfg.seed);
    for &b in budgets_db {
        let at = ScenarioConfig { budget_db: b, ..cfg.clone() };
        let design = plan(cfg.scheme, &grid, &fading, at.budget(), cfg.fixed_position())?.design;
        let coarse = RateSampler::new(&grid, &design, &fading)?.rates(cfg.trials, cfg.seed);
        let fine = reference_sampler(&grid, &design, &fading, n_ref)?.rates(cfg.trials, cfg.seed);
        let e = OutageEstimate::from_rates(&coarse, cfg.rate_bps, cfg.seed);
        let f = OutageEstimate::from_rates(&fine, cfg.rate_bps, cfg.seed);
        table.push(vec![
            num(b),
            num(mean(&coarse)),
            num(e.p_hat),
            num(e.ci95_halfwidth),
            num(mean(&fine)),
            num(f.p_hat),
            num(f.ci95_halfwidth),
        ]);
    }
    Ok(table)
}

pub const CERTIFICATE_COLUMNS: [&str; 10] =
    ["f_khz", "s_s", "s_r", "d_sr", "det2", "det3", "det4", "closed_form_det3", "step_disagreement", "verdict"];

/// Certificate sweep around the configured budget's uniform PSD.
pub fn certificate_table(cfg: &ScenarioConfig, points: usize) -> Result<(Table, Vec<joint_opt::HessianCertificate>)> {
    cfg.validate()?;
    let env = cfg.resolved_env();
    let centre = cfg.budget() / (2.0 * env.bandwidth_hz());
    let certs = joint_opt::certificate_sweep(&env, &cfg.fading()?, centre, points, cfg.seed)?;
    let mut table = Table::new(&CERTIFICATE_COLUMNS, &cfg.hash(), cfg.seed);
    for c in &certs {
        let verdict = serde_json::to_value(c.verdict)?.as_str().unwrap_or_default().to_string();
        table.push(vec![
            num(c.f_khz),
            num(c.s_s),
            num(c.s_r),
            num(c.d_sr),
            num(c.det2),
            num(c.det3),
            num(c.det4),
            num(c.closed_form_det3),
            num(c.step_disagreement),
            verdict,
        ]);
    }
    Ok((table, certs))
}

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// A CSV table whose cells are kept as text, so writing and re-reading is
/// lossless.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub config_hash: String,
    pub seed: u64,
}

impl Table {
    pub fn new(columns: &[&str], config_hash: &str, seed: u64) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            config_hash: config_hash.to_string(),
            seed,
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Numeric values of a column, if present and parseable.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# config_hash={}, seed={}", self.config_hash, self.seed)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let (config_hash, seed) = parse_comment(first.trim_end())?;
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let columns = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { columns, rows, config_hash, seed })
    }
}

fn parse_comment(line: &str) -> Result<(String, u64)> {
    let body = line.strip_prefix("# ").ok_or_else(|| invalid("missing table comment line"))?;
    let mut hash = None;
    let mut seed = None;
    for part in body.split(", ") {
        match part.split_once('=') {
            Some(("config_hash", v)) => hash = Some(v.to_string()),
            Some(("seed", v)) => seed = v.parse().ok(),
            _ => {}
        }
    }
    match (hash, seed) {
        (Some(h), Some(s)) => Ok((h, s)),
        _ => Err(invalid(format!("malformed table comment line {line:?}"))),
    }
}

pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    table.write_to(&mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn parse_csv(path: &Path) -> Result<Table> {
    Table::read_from(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ScenarioConfig {
        ScenarioConfig { n: 16, trials: 2000, ..ScenarioConfig::default() }
    }

    #[test]
    fn config_json_round_trip_and_hash() {
        let cfg = ScenarioConfig { gain_ratio: Some([4.0, 1.0]), scheme: Scheme::OrpUpa, ..quick() };
        let text = serde_json::to_string(&cfg).unwrap();
        let back = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
        assert_ne!(quick().hash(), cfg.hash());
        let partial = ScenarioConfig::from_json(r#"{"n": 8, "scheme": "upa-fixed"}"#).unwrap();
        assert_eq!(partial.n, 8);
        assert_eq!(partial.env, AcousticEnv::default());
    }

    #[test]
    fn config_errors_name_the_problem() {
        assert!(ScenarioConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"scheme": "best"}"#).is_err());
        let e = ScenarioConfig { gain_ratio: Some([0.0, 1.0]), ..quick() }.validate().unwrap_err();
        assert!(e.to_string().contains("gain_ratio"));
        let e = ScenarioConfig { n: 0, ..quick() }.validate().unwrap_err();
        assert!(e.to_string().contains("n must be"));
    }

    #[test]
    fn upa_fixed_report() {
        let cfg = ScenarioConfig { scheme: Scheme::UpaFixed, ..quick() };
        let rep = run_scheme(&cfg).unwrap();
        assert_eq!(rep.d_sr, 5.0);
        let p = cfg.budget() / 32.0;
        assert!(rep.bands.iter().all(|b| b.p_s == p && b.p_r == p));
        assert!(rep.lambda.is_none());
    }

    #[test]
    fn joint_and_approx_agree_at_symmetric_defaults() {
        let j = run_scheme(&ScenarioConfig { scheme: Scheme::Joint, ..quick() }).unwrap();
        let a = run_scheme(&ScenarioConfig { scheme: Scheme::Approx, ..quick() }).unwrap();
        assert!((j.d_sr - a.d_sr).abs() / j.d_sr < 1e-3);
        for (x, y) in j.bands.iter().zip(&a.bands) {
            assert!((x.p_s / y.p_s - 1.0).abs() < 1e-3);
        }
        assert!(j.converged.unwrap());
    }

    #[test]
    fn asymmetric_orp_moves_relay() {
        let rep =
            run_scheme(&ScenarioConfig { scheme: Scheme::OrpUpa, gain_ratio: Some([4.0, 1.0]), ..quick() }).unwrap();
        assert!(rep.d_sr > 5.5);
    }

    #[test]
    fn replaying_echoed_config_reproduces_report() {
        let rep = run_scheme(&ScenarioConfig { scheme: Scheme::Approx, ..quick() }).unwrap();
        let again = run_scheme(&rep.config).unwrap();
        assert_eq!(rep.to_json().unwrap(), again.to_json().unwrap());
    }

    #[test]
    fn csv_round_trip_and_empty_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"], "abc", 7);
        emit_csv(&t, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "# config_hash=abc, seed=7\na,b\n");
        assert_eq!(parse_csv(&path).unwrap(), t);
        t.push(vec![num(0.1 + 0.2), num(1e-300)]);
        t.push(vec![num(f64::MAX), "x,y".into()]);
        emit_csv(&t, &path).unwrap();
        let back = parse_csv(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("a").unwrap(), vec![0.1 + 0.2, f64::MAX]);
    }

    #[test]
    fn placement_sweep_shapes() {
        let cfg = ScenarioConfig { scheme: Scheme::UpaFixed, ..quick() };
        let one = sweep_placement(&cfg, &[5.0]).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert!(sweep_placement(&cfg, &[0.0]).is_err());
        let grid = placement_grid(&cfg.env, 11);
        assert_eq!(grid.len(), 11);
        assert_eq!(grid[0], 0.1);
        assert!(grid[10] < 9.9);
    }

    #[test]
    fn rate_target_parsing() {
        assert_eq!("median".parse::<RateTarget>().unwrap(), RateTarget::BenchmarkMedian);
        assert_eq!("1500".parse::<RateTarget>().unwrap(), RateTarget::Absolute(1500.0));
        assert!("fast".parse::<RateTarget>().is_err());
        assert_eq!(improvement_pct(0.0, 0.0), 0.0);
        assert_eq!(improvement_pct(0.5, 0.25), 50.0);
    }
}
