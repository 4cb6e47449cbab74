//! Analytic biphoton spectrum and waveform of a double-Λ SFWM source.
//!
//! The AS frequency is written `ω_AS + δ` and the S frequency `ω_S − δ`.
//! The biphoton amplitude in frequency space is `κ(δ)Φ(δ)`; its Fourier
//! transform gives the relative wavefunction
//!
//! ```text
//! ψ(τ) = (L/2π) ∫ κ(δ) Φ(δ) e^{-iδτ} dδ
//! ```
//!
//! whose squared modulus is the S–AS delay distribution (without the
//! uncorrelated floor). All inputs are SI; angular frequencies in rad/s.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::atomic::{DipoleTable, LevelScheme, Line, CONSTANTS};
use crate::error::{config, Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Stokes,
    AntiStokes,
}

/// How an optical depth maps onto resonant probe transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdConvention {
    /// Intensity transmission `e^{-OD}`.
    #[default]
    Intensity,
    /// Field transmission `e^{-OD}`, i.e. intensity `e^{-2·OD}`.
    FieldAmplitude,
}

/// Parameters of the homogeneous SFWM medium.
///
/// Exactly one of `od` / `atom_number` and exactly one of `pump_rabi` /
/// `pump_power` must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfwmParams {
    #[serde(default)]
    pub od: Option<f64>,
    #[serde(default)]
    pub atom_number: Option<f64>,
    #[serde(default)]
    pub od_convention: OdConvention,
    /// Medium length (m).
    pub length: f64,
    /// Medium diameter (m).
    pub diameter: f64,
    /// Pump Rabi frequency (rad/s).
    #[serde(default)]
    pub pump_rabi: Option<f64>,
    /// Pump power (W), converted with the Gaussian-mode peak intensity.
    #[serde(default)]
    pub pump_power: Option<f64>,
    /// 1/e² intensity diameter of the guided mode (m).
    #[serde(default = "default_mfd")]
    pub mode_field_diameter: f64,
    /// Control Rabi frequency (rad/s).
    pub control_rabi: f64,
    /// One-photon pump detuning Δ (rad/s).
    pub detuning: f64,
    /// Ground-state decoherence γ12 (rad/s).
    pub gamma12: f64,
    pub gamma_d1: f64,
    pub gamma_d2: f64,
    pub lambda_s: f64,
    pub lambda_as: f64,
    pub dipoles: DipoleTable,
}

fn default_mfd() -> f64 {
    5.5e-6
}

impl SfwmParams {
    /// Rates, wavelengths and dipoles from `scheme`; medium and drives from
    /// the fiber experiment (L = 6 cm, d = 3.4 µm, Ω_C = 2.8 Γ_D1,
    /// P = 14 nW, OD = 15).
    pub fn from_scheme(scheme: &LevelScheme) -> Result<Self> {
        let g1 = scheme.gamma_d1();
        Ok(Self {
            od: Some(15.0),
            atom_number: None,
            od_convention: OdConvention::Intensity,
            length: 0.06,
            diameter: 3.4e-6,
            pump_rabi: None,
            pump_power: Some(14e-9),
            mode_field_diameter: default_mfd(),
            control_rabi: 2.8 * g1,
            detuning: scheme.detunings.pump,
            gamma12: scheme.gamma12,
            gamma_d1: g1,
            gamma_d2: scheme.gamma_d2(),
            lambda_s: scheme.wavelength(Line::D2)?,
            lambda_as: scheme.wavelength(Line::D1)?,
            dipoles: scheme.dipole_table()?,
        })
    }

    /// The parameter set used for the exemplary waveform of the fiber source.
    pub fn fiber_reference() -> Self {
        Self::from_scheme(&LevelScheme::default()).expect("bundled scheme is complete")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !(self.diameter > 0.0) {
            return Err(Error::NonPhysical("medium length and diameter must be positive".into()));
        }
        match (self.od, self.atom_number) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(config("exactly one of `od` and `atom_number` must be given")),
        }
        match (self.pump_rabi, self.pump_power) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(config("exactly one of `pump_rabi` and `pump_power` must be given")),
        }
        if self.control_rabi < 0.0 {
            return Err(Error::NonPhysical("control Rabi frequency must be ≥ 0".into()));
        }
        if !(self.gamma_d1 > 0.0) || !(self.gamma_d2 > 0.0) || self.gamma12 < 0.0 {
            return Err(Error::NonPhysical("decay rates must be positive".into()));
        }
        if !(self.mode_field_diameter > 0.0) || !(self.lambda_s > 0.0) || !(self.lambda_as > 0.0) {
            return Err(Error::NonPhysical("wavelengths and mode diameter must be positive".into()));
        }
        Ok(())
    }

    pub fn omega_as(&self) -> f64 {
        2.0 * PI * CONSTANTS.c / self.lambda_as
    }

    pub fn omega_s(&self) -> f64 {
        2.0 * PI * CONSTANTS.c / self.lambda_s
    }

    /// Pump Rabi frequency (rad/s), from power if needed.
    pub fn pump_rabi_frequency(&self) -> f64 {
        match (self.pump_rabi, self.pump_power) {
            (Some(r), _) => r,
            (None, Some(p)) => rabi_from_power(p, self.mode_field_diameter, self.dipoles.mu41),
            (None, None) => 0.0,
        }
    }
}

/// `Ω = μE/ħ` with `E` the peak field of a Gaussian mode carrying `power`.
pub fn rabi_from_power(power: f64, mode_field_diameter: f64, dipole: f64) -> f64 {
    let w = 0.5 * mode_field_diameter;
    let intensity = 2.0 * power / (PI * w * w);
    let field = (2.0 * intensity / (CONSTANTS.c * CONSTANTS.epsilon0)).sqrt();
    dipole * field / CONSTANTS.hbar
}

/// Atomic density (1/m³) of the medium.
///
/// From `od`, the density is the one for which a resonant AS probe with the
/// control off is attenuated by `e^{-OD}` in intensity (or field, per
/// [`OdConvention`]). Closed form: with `χ_AS(0) = i·a`,
/// `Im √(1 + i·a) = s` inverts to `a = 2s√(1+s²)`.
pub fn density_from_od(params: &SfwmParams) -> Result<f64> {
    if let Some(n) = params.atom_number {
        if n < 0.0 {
            return Err(Error::NonPhysical("negative atom number".into()));
        }
        let area = PI * (0.5 * params.diameter).powi(2);
        return Ok(n / (params.length * area));
    }
    let od = params
        .od
        .ok_or_else(|| config("neither `od` nor `atom_number` given"))?;
    if !(od >= 0.0) {
        return Err(Error::NonPhysical(format!("optical depth {od} must be ≥ 0")));
    }
    let k = params.omega_as() / CONSTANTS.c;
    let s = match params.od_convention {
        OdConvention::Intensity => od / (2.0 * k * params.length),
        OdConvention::FieldAmplitude => od / (k * params.length),
    };
    let a = 2.0 * s * (1.0 + s * s).sqrt();
    let mu2 = params.dipoles.mu13.powi(2);
    Ok(a * CONSTANTS.epsilon0 * CONSTANTS.hbar * params.gamma_d1 / (2.0 * mu2))
}

/// `sin(x)/x` on the complex plane.
pub fn sinc(x: Complex64) -> Complex64 {
    if x.norm() < 1e-4 {
        let x2 = x * x;
        Complex64::new(1.0, 0.0) - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// A fully evaluated medium: density and drive Rabi frequencies fixed.
#[derive(Debug, Clone)]
pub struct SfwmModel {
    pub params: SfwmParams,
    /// Atomic density (1/m³).
    pub density: f64,
    pub pump_rabi: f64,
}

impl SfwmModel {
    pub fn new(params: &SfwmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            density: density_from_od(params)?,
            pump_rabi: params.pump_rabi_frequency(),
            params: params.clone(),
        })
    }

    /// `𝒩|μ|²/(ε₀ħ)` in rad/s.
    fn coupling(&self, mu: f64) -> f64 {
        self.density * mu * mu / (CONSTANTS.epsilon0 * CONSTANTS.hbar)
    }

    fn eit_denominator(&self, delta: f64, sign: f64) -> Complex64 {
        let p = &self.params;
        let a = Complex64::new(delta, sign * 0.5 * p.gamma_d1);
        let b = Complex64::new(delta, sign * p.gamma12);
        Complex64::new(p.control_rabi * p.control_rabi, 0.0) - 4.0 * a * b
    }

    /// Linear susceptibility of the anti-Stokes field.
    pub fn chi_as(&self, delta: f64) -> Complex64 {
        let p = &self.params;
        let num = 4.0 * self.coupling(p.dipoles.mu13) * Complex64::new(delta, p.gamma12);
        num / self.eit_denominator(delta, 1.0)
    }

    /// Linear susceptibility of the Stokes field, as a function of the AS
    /// detuning `δ`.
    pub fn chi_s(&self, delta: f64) -> Complex64 {
        let p = &self.params;
        let num = self.coupling(p.dipoles.mu24) * Complex64::new(delta, -0.5 * p.gamma_d1);
        let pump = self.pump_rabi * self.pump_rabi
            / (p.detuning * p.detuning + (0.5 * p.gamma_d2).powi(2));
        num / self.eit_denominator(delta, -1.0) * pump
    }

    pub fn linear_susceptibility(&self, channel: Channel, delta: f64) -> Complex64 {
        match channel {
            Channel::Stokes => self.chi_s(delta),
            Channel::AntiStokes => self.chi_as(delta),
        }
    }

    /// Third-order susceptibility of the AS field (SI, m²/V²).
    pub fn chi3(&self, delta: f64) -> Complex64 {
        let p = &self.params;
        let d = &p.dipoles;
        let hbar = CONSTANTS.hbar;
        let num = self.density * d.mu13 * d.mu32 * d.mu24 * d.mu41
            / (CONSTANTS.epsilon0 * hbar * hbar * hbar);
        let den = Complex64::new(p.detuning, 0.5 * p.gamma_d2) * self.eit_denominator(delta, 1.0);
        num / den
    }

    /// Nonlinear parametric coupling `κ(δ)` (1/m).
    pub fn kappa(&self, delta: f64) -> Complex64 {
        let p = &self.params;
        let e_p = CONSTANTS.hbar * self.pump_rabi / p.dipoles.mu41;
        let e_c = CONSTANTS.hbar * p.control_rabi / p.dipoles.mu32;
        let pre = (p.omega_as() * p.omega_s()).sqrt() / (2.0 * CONSTANTS.c);
        -I * pre * self.chi3(delta) * e_p * e_c
    }

    /// `k(ω) − ω/c` for a field of carrier `omega` in a medium of
    /// susceptibility `chi`, computed without cancellation.
    fn dispersive_k(omega: f64, chi: Complex64) -> Complex64 {
        omega / CONSTANTS.c * chi / ((Complex64::new(1.0, 0.0) + chi).sqrt() + 1.0)
    }

    /// Phase mismatch `Δk = k_AS + k_S − k_C − k_P` with vacuum pump and
    /// control wavenumbers; the vacuum parts cancel by energy conservation.
    pub fn delta_k(&self, delta: f64) -> Complex64 {
        let p = &self.params;
        Self::dispersive_k(p.omega_as() + delta, self.chi_as(delta))
            + Self::dispersive_k(p.omega_s() - delta, self.chi_s(delta))
    }

    /// Longitudinal detuning function `Φ(δ) = sinc(ΔkL/2)·e^{i(k_AS+k_S)L/2}`.
    pub fn phase_matching(&self, delta: f64) -> Complex64 {
        let p = &self.params;
        let dk = self.delta_k(delta);
        let vacuum = (p.omega_as() + p.omega_s()) / CONSTANTS.c;
        let half_l = 0.5 * p.length;
        // Reduce the large vacuum phase separately to keep precision.
        let vacuum_phase = (vacuum * half_l).rem_euclid(2.0 * PI);
        sinc(dk * half_l) * (I * (dk * half_l + vacuum_phase)).exp()
    }

    /// Biphoton amplitude `κ(δ)Φ(δ)` (1/m).
    pub fn amplitude(&self, delta: f64) -> Complex64 {
        self.kappa(delta) * self.phase_matching(delta)
    }
}

pub fn linear_susceptibility(channel: Channel, delta: f64, params: &SfwmParams) -> Result<Complex64> {
    Ok(SfwmModel::new(params)?.linear_susceptibility(channel, delta))
}

pub fn chi3(delta: f64, params: &SfwmParams) -> Result<Complex64> {
    Ok(SfwmModel::new(params)?.chi3(delta))
}

pub fn phase_matching(delta: f64, params: &SfwmParams) -> Result<Complex64> {
    Ok(SfwmModel::new(params)?.phase_matching(delta))
}

/// A uniform detuning grid `δ_j = -span + j·(2·span/points)`, `j < points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaGrid {
    /// Half-width (rad/s).
    pub span: f64,
    pub points: usize,
}

impl DeltaGrid {
    /// ±32 Γ_D1 with 2¹⁴ points.
    pub fn standard(gamma_d1: f64) -> Self {
        Self { span: 32.0 * gamma_d1, points: 1 << 14 }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.span / self.points as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let d = self.step();
        (0..self.points).map(|j| -self.span + j as f64 * d).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    /// Uniform, strictly increasing detuning grid (rad/s).
    pub delta: Vec<f64>,
    /// `κΦ` (1/m).
    pub amplitude: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn power(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn step(&self) -> f64 {
        self.delta[1] - self.delta[0]
    }
}

/// `|ψ(τ)|²` on the FFT-conjugate delay grid, in 1/s².
#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonWaveform {
    /// Uniform, increasing delay grid (s), centred on zero.
    pub tau: Vec<f64>,
    pub psi2: Vec<f64>,
}

impl BiphotonWaveform {
    pub fn step(&self) -> f64 {
        self.tau[1] - self.tau[0]
    }

    /// Samples with `lo ≤ τ ≤ hi`.
    pub fn window(&self, lo: f64, hi: f64) -> BiphotonWaveform {
        let (tau, psi2) = self
            .tau
            .iter()
            .zip(&self.psi2)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(t, p)| (*t, *p))
            .unzip();
        BiphotonWaveform { tau, psi2 }
    }

    /// `Σ|ψ|²·dτ`: total pair probability flux of the waveform.
    pub fn integral(&self) -> f64 {
        self.psi2.iter().sum::<f64>() * self.step()
    }

    /// Local maxima above `floor × max`, excluding the global maximum.
    pub fn secondary_maxima(&self, floor: f64) -> Vec<f64> {
        let peak = self.psi2.iter().cloned().fold(0.0, f64::max);
        let imax = argmax(&self.psi2);
        (1..self.psi2.len() - 1)
            .filter(|&i| i != imax)
            .filter(|&i| self.psi2[i] > self.psi2[i - 1] && self.psi2[i] >= self.psi2[i + 1])
            .filter(|&i| self.psi2[i] > floor * peak)
            .map(|i| self.tau[i])
            .collect()
    }
}

fn argmax(y: &[f64]) -> usize {
    y.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// Spectrum `κΦ` on `grid` and the waveform `|ψ(τ)|²` from its DFT.
///
/// The delay grid has `dτ = 2π/(N·dδ)`; the discrete Parseval identity
/// `Σ|ψ|²dτ = 2π(L/2π)²·Σ|κΦ|²dδ` then holds to rounding.
pub fn biphoton_waveform(
    params: &SfwmParams,
    grid: &DeltaGrid,
) -> Result<(ComplexSpectrum, BiphotonWaveform)> {
    let model = SfwmModel::new(params)?;
    if grid.span < 20.0 * params.gamma_d1 || grid.points < 1 << 12 {
        return Err(Error::Grid(format!(
            "grid ±{:.1} Γ with {} points is too coarse (need ±20 Γ, 4096 points)",
            grid.span / params.gamma_d1,
            grid.points
        )));
    }
    let delta = grid.values();
    let amplitude: Vec<Complex64> = delta.iter().map(|&d| model.amplitude(d)).collect();
    let spectrum = ComplexSpectrum { delta, amplitude };
    let waveform = waveform_from_spectrum(&spectrum, params.length)?;
    check_leakage(&spectrum, &waveform)?;
    Ok((spectrum, waveform))
}

/// DFT of a sampled spectrum with prefactor `L·dδ/2π`.
pub fn waveform_from_spectrum(spectrum: &ComplexSpectrum, length: f64) -> Result<BiphotonWaveform> {
    let n = spectrum.delta.len();
    if n < 2 {
        return Err(Error::Grid("spectrum needs at least two samples".into()));
    }
    let d_delta = spectrum.step();
    let d_tau = 2.0 * PI / (n as f64 * d_delta);
    let mut buf = spectrum.amplitude.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = length / (2.0 * PI) * d_delta;
    let half = n / 2;
    let mut tau = Vec::with_capacity(n);
    let mut psi2 = Vec::with_capacity(n);
    for k in 0..n {
        let idx = (k + n - half) % n;
        let signed = idx as isize - if idx >= n - half { n as isize } else { 0 };
        tau.push(signed as f64 * d_tau);
        psi2.push((buf[idx] * scale).norm_sqr());
    }
    Ok(BiphotonWaveform { tau, psi2 })
}

fn check_leakage(spectrum: &ComplexSpectrum, waveform: &BiphotonWaveform) -> Result<()> {
    let power = spectrum.power();
    let peak = power.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(());
    }
    let edge = power[0].max(*power.last().unwrap());
    if edge > 1e-4 * peak {
        return Err(Error::Grid(format!(
            "spectrum edge carries {:.1e} of the peak; widen the span",
            edge / peak
        )));
    }
    // The waveform must have decayed well before the DFT wraps around.
    let wpeak = waveform.psi2.iter().cloned().fold(0.0, f64::max);
    let n = waveform.psi2.len();
    let tail = waveform.psi2[..n / 16]
        .iter()
        .chain(&waveform.psi2[n - n / 16..])
        .cloned()
        .fold(0.0, f64::max);
    if tail > 1e-6 * wpeak {
        return Err(Error::Grid(format!(
            "waveform wraps around the delay window ({:.1e} of peak); refine the grid",
            tail / wpeak
        )));
    }
    Ok(())
}

/// Full width at half of the global maximum, walking outward from the peak
/// and interpolating linearly between the bracketing samples.
pub fn fwhm(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Shape("fwhm needs matching x/y with ≥ 3 samples".into()));
    }
    let imax = argmax(y);
    let half = 0.5 * y[imax];
    if !(half > 0.0) {
        return Err(Error::Shape("profile has no positive maximum".into()));
    }
    let cross = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let right = (imax..x.len() - 1)
        .find(|&i| y[i + 1] < half)
        .map(|i| cross(i, i + 1))
        .ok_or_else(|| Error::Shape("no half-maximum crossing right of the peak".into()))?;
    let left = (1..=imax)
        .rev()
        .find(|&i| y[i - 1] < half)
        .map(|i| cross(i - 1, i))
        .ok_or_else(|| Error::Shape("no half-maximum crossing left of the peak".into()))?;
    Ok(right - left)
}

/// Spectral FWHM and the characteristic timescale `1/Δω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    /// rad/s
    pub fwhm: f64,
    /// s
    pub timescale: f64,
}

impl Bandwidth {
    pub fn of(spectrum: &ComplexSpectrum) -> Result<Self> {
        let w = fwhm(&spectrum.delta, &spectrum.power())?;
        Ok(Self { fwhm: w, timescale: 1.0 / w })
    }

    pub fn fwhm_hz(&self) -> f64 {
        self.fwhm / (2.0 * PI)
    }
}
