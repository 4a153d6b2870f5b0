//! Frequency-dependent underwater channel physics.
//!
//! Frequencies are in kHz, distances in km. Noise PSD is linear μPa²/Hz and
//! transmit PSDs share that unit, so [`mean_link_snr`] is dimensionless.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::fading::FadingModel;

/// Parameters of the four-source ambient noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Shipping activity factor in `[0, 1]`.
    pub shipping: f64,
    /// Wind speed in m/s.
    pub wind_mps: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { shipping: 0.5, wind_mps: 0.0 }
    }
}

impl NoiseParams {
    pub fn new(shipping: f64, wind_mps: f64) -> Result<Self> {
        let p = Self { shipping, wind_mps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.shipping) {
            return Err(invalid(format!("shipping factor {} outside [0, 1]", self.shipping)));
        }
        if !(self.wind_mps >= 0.0) || !self.wind_mps.is_finite() {
            return Err(invalid(format!("wind speed {} m/s must be >= 0", self.wind_mps)));
        }
        Ok(())
    }
}

/// Expected channel gain `c(f)` of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainProfile {
    Constant(f64),
    /// `(f_khz, gain)` knots sorted by frequency, linearly interpolated and
    /// held constant beyond the end knots.
    Table(Vec<(f64, f64)>),
}

impl Default for GainProfile {
    fn default() -> Self {
        GainProfile::Constant(1.0)
    }
}

impl GainProfile {
    pub fn at(&self, f_khz: f64) -> f64 {
        match self {
            GainProfile::Constant(c) => *c,
            GainProfile::Table(knots) => {
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if f_khz <= first.0 {
                    return first.1;
                }
                if f_khz >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|k| k.0 <= f_khz);
                let (f0, c0) = knots[i - 1];
                let (f1, c1) = knots[i];
                c0 + (c1 - c0) * (f_khz - f0) / (f1 - f0)
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match self {
            GainProfile::Constant(c) if *c > 0.0 && c.is_finite() => Ok(()),
            GainProfile::Constant(c) => Err(invalid(format!("{name}: gain {c} must be > 0"))),
            GainProfile::Table(knots) => {
                if knots.is_empty() {
                    return Err(invalid(format!("{name}: empty gain table")));
                }
                if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(invalid(format!("{name}: gain table frequencies must increase")));
                }
                // Interpolation between positive knots stays positive.
                if knots.iter().any(|k| !(k.1 > 0.0) || !k.1.is_finite()) {
                    return Err(invalid(format!("{name}: gain table values must be > 0")));
                }
                Ok(())
            }
        }
    }
}

/// Physical scenario of the source, relay and destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcousticEnv {
    /// Source-to-destination distance `D`, km.
    pub distance_km: f64,
    /// Minimum node separation `δ`, km.
    pub min_separation_km: f64,
    /// Spreading factor `α`.
    pub spreading: f64,
    /// Operating band `(f_lo, f_hi)`, kHz.
    pub band_khz: (f64, f64),
    pub noise: NoiseParams,
    pub gain_sr: GainProfile,
    pub gain_rd: GainProfile,
}

impl Default for AcousticEnv {
    fn default() -> Self {
        Self {
            distance_km: 10.0,
            min_separation_km: 0.1,
            spreading: 1.5,
            band_khz: (5.0, 15.0),
            noise: NoiseParams::default(),
            gain_sr: GainProfile::default(),
            gain_rd: GainProfile::default(),
        }
    }
}

impl AcousticEnv {
    pub fn validate(&self) -> Result<()> {
        let (d, delta) = (self.distance_km, self.min_separation_km);
        if !(delta > 0.0) || !(d > 2.0 * delta) || !d.is_finite() {
            return Err(invalid(format!("need D > 2*delta > 0 (D = {d} km, delta = {delta} km)")));
        }
        if !(self.spreading > 1.0) || !self.spreading.is_finite() {
            return Err(invalid(format!("spreading factor {} must be > 1", self.spreading)));
        }
        let (lo, hi) = self.band_khz;
        if !(lo > 0.0) || !(hi > lo) || !hi.is_finite() {
            return Err(invalid(format!("need f_hi > f_lo > 0 (band {lo}..{hi} kHz)")));
        }
        self.noise.validate()?;
        self.gain_sr.validate("gain_sr")?;
        self.gain_rd.validate("gain_rd")?;
        Ok(())
    }

    /// `D − δ`: the relay-to-destination hop length is `span − d_SR`.
    pub fn span_km(&self) -> f64 {
        self.distance_km - self.min_separation_km
    }

    /// Admissible relay positions `[δ, D − δ]`.
    pub fn relay_bounds(&self) -> (f64, f64) {
        (self.min_separation_km, self.distance_km - self.min_separation_km)
    }

    pub fn bandwidth_hz(&self) -> f64 {
        (self.band_khz.1 - self.band_khz.0) * 1e3
    }
}

fn check_freq(f_khz: f64) -> Result<()> {
    if f_khz > 0.0 && f_khz.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("frequency must be > 0 kHz, got {f_khz}")))
    }
}

/// Thorp absorption in dB/km for `f` in kHz.
pub fn absorption_db_per_km(f_khz: f64) -> Result<f64> {
    check_freq(f_khz)?;
    let f2 = f_khz * f_khz;
    Ok(0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003)
}

/// Per-km attenuation ratio `a(f) = 10^(a_dB/10)`; path absorption is `a^d`.
pub fn absorption_linear(f_khz: f64) -> Result<f64> {
    Ok(10f64.powf(absorption_db_per_km(f_khz)? / 10.0))
}

/// Ambient noise PSD in linear μPa²/Hz: turbulence, shipping, wind-driven
/// waves and thermal noise summed in the linear domain.
pub fn noise_psd(f_khz: f64, p: &NoiseParams) -> Result<f64> {
    check_freq(f_khz)?;
    let lf = f_khz.log10();
    let turbulence = 17.0 - 30.0 * lf;
    let shipping = 40.0 + 20.0 * (p.shipping - 0.5) + 26.0 * lf - 60.0 * (f_khz + 0.03).log10();
    let waves = 50.0 + 7.5 * p.wind_mps.sqrt() + 20.0 * lf - 40.0 * (f_khz + 0.4).log10();
    let thermal = -15.0 + 20.0 * lf;
    Ok([turbulence, shipping, waves, thermal].iter().map(|db| 10f64.powf(db / 10.0)).sum())
}

/// Scale-parameter SNR `β·c·S / (N(f)·a(f)^d·d^α)` of one hop.
pub fn mean_link_snr(
    env: &AcousticEnv,
    fading: &FadingModel,
    f_khz: f64,
    psd: f64,
    d_km: f64,
    gain: f64,
) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(domain(format!("link distance must be > 0 km, got {d_km}")));
    }
    if !(psd >= 0.0) {
        return Err(domain(format!("transmit PSD must be >= 0, got {psd}")));
    }
    let a = absorption_linear(f_khz)?;
    let n = noise_psd(f_khz, &env.noise)?;
    Ok(fading.beta() * gain * psd / (n * a.powf(d_km) * d_km.powf(env.spreading)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thorp_by_hand(f: f64) -> f64 {
        let f2 = f * f;
        let t1 = 0.11 * f2 / (1.0 + f2);
        let t2 = 44.0 * f2 / (4100.0 + f2);
        t1 + t2 + 0.000275 * f2 + 0.003
    }

    #[test]
    fn thorp_reference_values() {
        assert!((absorption_db_per_km(10.0).unwrap() - 1.187_03).abs() < 1e-5);
        let at_one = 0.11 / 2.0 + 44.0 / 4101.0 + 2.75e-4 + 0.003;
        assert!((absorption_db_per_km(1.0).unwrap() - at_one).abs() < 1e-14);
        assert!((at_one - 0.069_00).abs() < 5e-5);
        assert!(absorption_db_per_km(15.0).unwrap() > absorption_db_per_km(5.0).unwrap());
        for f in [0.5, 3.0, 7.7, 12.0] {
            assert!((absorption_db_per_km(f).unwrap() - thorp_by_hand(f)).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_absorption_is_consistent_with_db() {
        assert!((absorption_linear(10.0).unwrap() - 1.314_326).abs() < 1e-6);
        let mut f = 5.0;
        while f <= 15.0 {
            let db = absorption_db_per_km(f).unwrap();
            let lin = absorption_linear(f).unwrap();
            assert!((lin / 10f64.powf(db / 10.0) - 1.0).abs() < 1e-12);
            assert!(lin > 1.0);
            f += 0.25;
        }
    }

    #[test]
    fn rejects_non_positive_frequency() {
        assert!(absorption_db_per_km(0.0).is_err());
        assert!(absorption_linear(-1.0).is_err());
        assert!(noise_psd(0.0, &NoiseParams::default()).is_err());
    }

    #[test]
    fn noise_at_ten_khz_calm_sea() {
        let p = NoiseParams::default();
        // Hand evaluation of the four terms at f = 10 kHz, s = 0.5, w = 0.
        let turb = 17.0 - 30.0;
        let ship = 40.0 + 26.0 - 60.0 * 10.03f64.log10();
        let wave = 50.0 + 20.0 - 40.0 * 10.4f64.log10();
        let therm = -15.0 + 20.0;
        assert!((wave - 29.3187).abs() < 1e-4);
        let total: f64 = [turb, ship, wave, therm].iter().map(|x| 10f64.powf(x / 10.0)).sum();
        let n = noise_psd(10.0, &p).unwrap();
        assert!((n / total - 1.0).abs() < 1e-12);
        assert!((n.log10() - 2.93).abs() < 0.01);
    }

    #[test]
    fn noise_grows_with_wind() {
        let calm = noise_psd(10.0, &NoiseParams::new(0.5, 0.0).unwrap()).unwrap();
        let windy = noise_psd(10.0, &NoiseParams::new(0.5, 5.0).unwrap()).unwrap();
        assert!(windy > calm);
        assert!(NoiseParams::new(1.5, 0.0).is_err());
        assert!(NoiseParams::new(0.5, -1.0).is_err());
    }

    #[test]
    fn noise_positive_across_band() {
        let p = NoiseParams::new(0.8, 3.0).unwrap();
        for i in 0..=100 {
            let f = 5.0 + 0.1 * i as f64;
            assert!(noise_psd(f, &p).unwrap() > 0.0);
        }
    }

    #[test]
    fn gain_table_interpolates() {
        let g = GainProfile::Table(vec![(5.0, 1.0), (15.0, 3.0)]);
        assert_eq!(g.at(4.0), 1.0);
        assert!((g.at(10.0) - 2.0).abs() < 1e-15);
        assert_eq!(g.at(20.0), 3.0);
        assert!(GainProfile::Table(vec![(5.0, 1.0), (5.0, 2.0)]).validate("g").is_err());
        assert!(GainProfile::Constant(0.0).validate("g").is_err());
    }

    #[test]
    fn env_invariants() {
        assert!(AcousticEnv::default().validate().is_ok());
        let bad = AcousticEnv { min_separation_km: 5.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AcousticEnv { spreading: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AcousticEnv { band_khz: (15.0, 5.0), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mean_link_snr_basic_properties() {
        let env = AcousticEnv::default();
        let m = FadingModel::from_db(3.01).unwrap();
        assert_eq!(mean_link_snr(&env, &m, 10.0, 0.0, 5.0, 1.0).unwrap(), 0.0);
        let one = mean_link_snr(&env, &m, 10.0, 1e5, 5.0, 1.0).unwrap();
        let two = mean_link_snr(&env, &m, 10.0, 2e5, 5.0, 1.0).unwrap();
        assert!((two / one - 2.0).abs() < 1e-14);
        assert!(mean_link_snr(&env, &m, 10.0, 1e5, 0.0, 1.0).is_err());
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let s = mean_link_snr(&env, &m, 10.0, 1e5, 0.2 * i as f64, 1.0).unwrap();
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn mean_link_snr_spreadsheet_check() {
        // Independent evaluation: 10 kHz, d = 5 km, α = 1.5, c = 1.
        let env = AcousticEnv::default();
        let m = FadingModel::from_db(3.01).unwrap();
        let psd = 1e6;
        let a_db = 0.11 * 100.0 / 101.0 + 44.0 * 100.0 / 4200.0 + 0.0275 + 0.003;
        let loss = 10f64.powf(a_db * 5.0 / 10.0) * 5f64.powf(1.5);
        let lf: f64 = 1.0;
        let noise = 10f64.powf((17.0 - 30.0 * lf) / 10.0)
            + 10f64.powf((66.0 - 60.0 * 10.03f64.log10()) / 10.0)
            + 10f64.powf((70.0 - 40.0 * 10.4f64.log10()) / 10.0)
            + 10f64.powf(5.0 / 10.0);
        let expected = m.beta() * psd / (noise * loss);
        let got = mean_link_snr(&env, &m, 10.0, psd, 5.0, 1.0).unwrap();
        assert!((got / expected - 1.0).abs() < 1e-12);
    }
}
