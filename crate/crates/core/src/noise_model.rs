//! Single-mode detection model: cross-correlation with loss and noise, the
//! brightness form used to fit measured peak g², and the noise-photon ansatz.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Detection path of one photon (S or AS).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Overall detection efficiency including every loss.
    pub efficiency: f64,
    /// Pump-independent noise rate (1/s).
    pub base_rate: f64,
    /// Pump-induced noise slope (1/s/W).
    pub slope: f64,
    /// Atom-originated Raman noise slope (1/s/W). Zero by default.
    #[serde(default)]
    pub raman_slope: f64,
}

impl ChannelModel {
    pub fn stokes() -> Self {
        Self { efficiency: 0.08, base_rate: 2800.0, slope: 84.0e9, raman_slope: 0.0 }
    }

    pub fn anti_stokes() -> Self {
        Self { efficiency: 0.08, base_rate: 1200.0, slope: 7.6e9, raman_slope: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::NonPhysical(format!("efficiency {} outside [0, 1]", self.efficiency)));
        }
        if self.base_rate < 0.0 || self.slope < 0.0 || self.raman_slope < 0.0 {
            return Err(Error::NonPhysical("noise rates must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Noise counts per second at pump power `p` (W).
    pub fn noise_rate(&self, p: f64) -> f64 {
        self.base_rate + (self.slope + self.raman_slope) * p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channels {
    pub stokes: ChannelModel,
    pub anti_stokes: ChannelModel,
}

impl Default for Channels {
    fn default() -> Self {
        Self { stokes: ChannelModel::stokes(), anti_stokes: ChannelModel::anti_stokes() }
    }
}

/// Whether the single-noise cross terms `𝒩_j/(T_j n)` appear in the
/// numerator of the detected cross-correlation.
///
/// Expanding `⟨(a+ν_S)(b+ν_AS)⟩` for independent thermal noise gives
/// numerator `(1+1/M) + 1/n + a + b + ab` with `a = 𝒩_S/(T_S n)`,
/// `b = 𝒩_AS/(T_AS n)`. The reduced form keeps only `ab`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossTerms {
    #[default]
    Dropped,
    Kept,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModelParams {
    pub alpha: f64,
    /// Characteristic time scale (s).
    pub tau_c: f64,
    /// Brightness per pump power (pairs/s/MHz/W).
    pub gsbp: f64,
    #[serde(default = "one")]
    pub modes: u32,
    #[serde(default)]
    pub cross_terms: CrossTerms,
}

fn one() -> u32 {
    1
}

impl Default for NoiseModelParams {
    fn default() -> Self {
        Self { alpha: 103.0, tau_c: 24e-9, gsbp: 312.0e9, modes: 1, cross_terms: CrossTerms::Dropped }
    }
}

impl NoiseModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.tau_c > 0.0) {
            return Err(Error::NonPhysical("alpha and tau_c must be positive".into()));
        }
        if self.modes < 1 {
            return Err(Error::NonPhysical("mode count must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Mean pairs per mode for a given brightness (pairs/s/MHz).
    ///
    /// The mode duration is the coherence window `2τ_c` and `α` absorbs the
    /// MHz bandwidth normalisation: `n = α·GSB·2τ_c`.
    pub fn pairs_per_mode(&self, gsb: f64) -> f64 {
        self.alpha * gsb * 2.0 * self.tau_c
    }
}

/// Noise photons per characteristic time: `(r⁰ + slope·P)·τ_c`.
pub fn noise_photons(channel: &ChannelModel, p: f64, tau_c: f64) -> f64 {
    channel.noise_rate(p.max(0.0)) * tau_c
}

/// Detected cross-correlation peak for `n` pairs per mode.
pub fn g2_detected(
    n: f64,
    noise_s: f64,
    noise_as: f64,
    t_s: f64,
    t_as: f64,
    modes: u32,
    cross: CrossTerms,
) -> Result<f64> {
    if n < 0.0 || noise_s < 0.0 || noise_as < 0.0 {
        return Err(Error::NonPhysical("photon numbers must be ≥ 0".into()));
    }
    if !(t_s > 0.0 && t_s <= 1.0 && t_as > 0.0 && t_as <= 1.0) {
        return Err(Error::NonPhysical("efficiencies must lie in (0, 1]".into()));
    }
    if modes < 1 {
        return Err(Error::NonPhysical("mode count must be ≥ 1".into()));
    }
    if n == 0.0 {
        if noise_s == 0.0 && noise_as == 0.0 {
            return Err(Error::Undefined("no pairs and no noise".into()));
        }
        if noise_s == 0.0 || noise_as == 0.0 {
            return Err(Error::Undefined("no pairs and one channel dark".into()));
        }
        // Independent noise on both sides: the n → 0 limit.
        return Ok(1.0);
    }
    let a = noise_s / (t_s * n);
    let b = noise_as / (t_as * n);
    let mut num = 1.0 + 1.0 / modes as f64 + 1.0 / n + a * b;
    if cross == CrossTerms::Kept {
        num += a + b;
    }
    Ok(num / ((1.0 + a) * (1.0 + b)))
}

/// Peak g² at brightness `gsb` (pairs/s/MHz) and pump power `p` (W).
pub fn g2_vs_gsb(gsb: f64, params: &NoiseModelParams, channels: &Channels, p: f64) -> Result<f64> {
    if !(gsb > 0.0) {
        return Err(Error::NonPhysical("GSB must be positive".into()));
    }
    let n = params.pairs_per_mode(gsb);
    g2_detected(
        n,
        noise_photons(&channels.stokes, p, params.tau_c),
        noise_photons(&channels.anti_stokes, p, params.tau_c),
        channels.stokes.efficiency,
        channels.anti_stokes.efficiency,
        params.modes,
        params.cross_terms,
    )
}

/// Lower/upper g² envelope over a pump-power range.
pub fn g2_band(gsb: f64, params: &NoiseModelParams, channels: &Channels, p_min: f64, p_max: f64) -> Result<(f64, f64)> {
    let a = g2_vs_gsb(gsb, params, channels, p_min)?;
    let b = g2_vs_gsb(gsb, params, channels, p_max)?;
    Ok((a.min(b), a.max(b)))
}

/// Peak g² at pump power `p` with `GSB = GSBP·P`.
pub fn peak_g2_vs_power(p: f64, params: &NoiseModelParams, channels: &Channels) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::NonPhysical("pump power must be positive".into()));
    }
    g2_vs_gsb(params.gsbp * p, params, channels, p)
}

/// One measured peak: brightness (pairs/s/MHz), g², pump power (W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Point {
    pub gsb: f64,
    pub g2: f64,
    #[serde(default)]
    pub g2_err: f64,
    pub pump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    /// Residuals `ln(g²_data − 1) − ln(g²_model − 1)`.
    pub residuals: Vec<f64>,
    pub rms: f64,
    /// 1σ from the curvature of the loss.
    pub alpha_err: f64,
}

fn log_excess(g2: f64) -> f64 {
    (g2 - 1.0).max(1e-12).ln()
}

fn alpha_loss(alpha: f64, points: &[G2Point], base: &NoiseModelParams, ch: &Channels) -> Result<f64> {
    let p = NoiseModelParams { alpha, ..*base };
    let mut s = 0.0;
    for pt in points {
        let r = log_excess(pt.g2) - log_excess(g2_vs_gsb(pt.gsb, &p, ch, pt.pump)?);
        s += r * r;
    }
    Ok(s)
}

/// Least-squares fit of `α` on `ln(g² − 1)`.
///
/// Scans `ln α` over eight decades, then refines by golden-section search.
pub fn fit_alpha(points: &[G2Point], base: &NoiseModelParams, channels: &Channels) -> Result<AlphaFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need ≥ 3 points, got {}", points.len())));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), p| (l.min(p.gsb), h.max(p.gsb)));
    if !(lo > 0.0) || hi / lo < 10.0 {
        return Err(Error::Fit("GSB must span at least a decade".into()));
    }
    if points.iter().any(|p| !(p.g2 > 1.0) || !(p.pump >= 0.0)) {
        return Err(Error::Fit("every point needs g² > 1 and P ≥ 0".into()));
    }
    let loss = |la: f64| alpha_loss(la.exp(), points, base, channels);
    let grid: Vec<f64> = (0..=160).map(|i| -4.0 * std::f64::consts::LN_10 + i as f64 * 0.115_129_254_649_702_28).collect();
    let mut best = (grid[0], f64::INFINITY);
    for &la in &grid {
        let v = loss(la)?;
        if v < best.1 {
            best = (la, v);
        }
    }
    let h = grid[1] - grid[0];
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (loss(c)?, loss(d)?);
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = loss(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = loss(d)?;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    let la = 0.5 * (a + b);
    let alpha = la.exp();
    let fitted = NoiseModelParams { alpha, ..*base };
    let residuals = points
        .iter()
        .map(|p| Ok(log_excess(p.g2) - log_excess(g2_vs_gsb(p.gsb, &fitted, channels, p.pump)?)))
        .collect::<Result<Vec<_>>>()?;
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    let dof = (points.len() - 1).max(1) as f64;
    let rms = (ss / points.len() as f64).sqrt();
    // σ²(ln α) ≈ 2σ²_res / L''(ln α)
    let e = 1e-3;
    let curv = (loss(la + e)? - 2.0 * loss(la)? + loss(la - e)?) / (e * e);
    let alpha_err = if curv > 0.0 { alpha * (2.0 * ss / dof / curv).sqrt() } else { f64::NAN };
    Ok(AlphaFit { alpha, residuals, rms, alpha_err })
}

/// Cauchy–Schwarz ratio `R = g²_x² / (g²_S · g²_AS)` with first-order error.
pub fn cauchy_schwarz(cross: (f64, f64), auto_s: (f64, f64), auto_as: (f64, f64)) -> Result<(f64, f64)> {
    if !(auto_s.0 > 0.0 && auto_as.0 > 0.0) {
        return Err(Error::Undefined("autocorrelations must be positive".into()));
    }
    let r = cross.0 * cross.0 / (auto_s.0 * auto_as.0);
    let rel = ((2.0 * cross.1 / cross.0).powi(2) + (auto_s.1 / auto_s.0).powi(2) + (auto_as.1 / auto_as.0).powi(2))
        .sqrt();
    let rel = if cross.0 == 0.0 { 0.0 } else { rel };
    Ok((r, r * rel))
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: CrossTerms = CrossTerms::Dropped;

    #[test]
    fn noise_photon_arithmetic() {
        let s = noise_photons(&ChannelModel::stokes(), 100e-9, 24e-9);
        assert!((s - 11200.0 * 24e-9).abs() < 1e-15);
        let a = noise_photons(&ChannelModel::anti_stokes(), 0.0, 24e-9);
        assert!((a - 2.88e-5).abs() < 1e-15);
        let z = ChannelModel { efficiency: 0.1, base_rate: 0.0, slope: 0.0, raman_slope: 0.0 };
        assert_eq!(noise_photons(&z, 0.0, 24e-9), 0.0);
    }

    #[test]
    fn noiseless_limits() {
        assert_eq!(g2_detected(1.0, 0.0, 0.0, 0.08, 0.08, 1, D).unwrap(), 3.0);
        let big = g2_detected(1e9, 0.0, 0.0, 0.08, 0.08, 1, D).unwrap();
        assert!((big - 2.0).abs() < 1e-8);
        let m3 = g2_detected(1e9, 0.0, 0.0, 0.08, 0.08, 3, D).unwrap();
        assert!((m3 - 4.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn undefined_without_light() {
        assert!(matches!(g2_detected(0.0, 0.0, 0.0, 0.1, 0.1, 1, D), Err(Error::Undefined(_))));
    }

    #[test]
    fn noise_dominated_tends_to_one() {
        for cross in [CrossTerms::Dropped, CrossTerms::Kept] {
            let g = g2_detected(1e-3, 10.0, 10.0, 0.08, 0.08, 1, cross).unwrap();
            assert!((g - 1.0).abs() < 0.02, "{cross:?}: {g}");
        }
    }

    #[test]
    fn kept_cross_terms_agree_with_expansion() {
        // ⟨(a+ν)(b+μ)⟩ over ⟨a+ν⟩⟨b+μ⟩ for thermal pairs of mean n·T and independent noise.
        let (n, ns, na, t) = (0.3, 0.01, 0.02, 0.1);
        let pair = t * t * (n * n * 2.0 + n);
        let num = pair + t * n * na + ns * t * n + ns * na;
        let den = (t * n + ns) * (t * n + na);
        let g = g2_detected(n, ns, na, t, t, 1, CrossTerms::Kept).unwrap();
        assert!((g - num / den).abs() < 1e-12);
    }

    #[test]
    fn gsbp_arithmetic() {
        let p = NoiseModelParams::default();
        assert!((p.gsbp * 14e-9 - 4368.0).abs() < 1e-6);
    }

    #[test]
    fn cauchy_schwarz_values() {
        let (r, _) = cauchy_schwarz((2.0, 0.0), (2.0, 0.0), (2.0, 0.0)).unwrap();
        assert_eq!(r, 1.0);
        let (r, _) = cauchy_schwarz((19.7, 0.0), (2.0, 0.0), (2.0, 0.0)).unwrap();
        assert!((r - 97.0225).abs() < 1e-9);
        assert!(cauchy_schwarz((2.0, 0.0), (0.0, 0.0), (2.0, 0.0)).is_err());
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let p = NoiseModelParams::default();
        let ch = Channels::default();
        let one = [G2Point { gsb: 1e3, g2: 10.0, g2_err: 0.0, pump: 1e-8 }];
        assert!(matches!(fit_alpha(&one, &p, &ch), Err(Error::Fit(_))));
        let flat = vec![G2Point { gsb: 1e3, g2: 10.0, g2_err: 0.0, pump: 1e-8 }; 5];
        assert!(matches!(fit_alpha(&flat, &p, &ch), Err(Error::Fit(_))));
    }
}
