//! Stochastic propagation of the eight polarisation modes through the
//! Zeeman-resolved medium.
//!
//! Time is in units of `1/Γ_D1`, position in units of the medium length, and
//! fields are Rabi frequencies in units of `Γ_D1`. The fields follow the
//! coherences adiabatically along `z`:
//!
//! ```text
//! ∂Ω_m/∂z = −i g_m tr[CG^m_ge ρ_eg],   g_m = (OD/2)·(k_m d_m²)/(k_AS d_AS²)
//! ```
//!
//! so a weak probe on a closed two-level transition leaves with amplitude
//! `e^{−OD/2}`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use super::bloch::{hermiticity_error, min_population, trace, BlochModel, DecayForm, Scratch};
use super::integrator::{max_abs, KuttaMerson, OdeSystem, Stats, StepControl};
use super::seed::vacuum_seed_step;
use super::simpson;
use crate::atomic::{clebsch_gordan, LevelScheme, ManifoldKind};
use crate::error::{config, Error, Result};
use crate::spectrum::SfwmParams;

type C = Complex64;
const I: C = C { re: 0.0, im: 1.0 };

/// Polarisation of a travelling field.
///
/// Spherical unit vectors are `e_± = ∓(x̂ ± iŷ)/√2`; a field is
/// `E_+ e_+ + E_− e_−`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    H,
    V,
    SigmaPlus,
    SigmaMinus,
    /// Explicit `(E_+, E_−)` as `[re, im]` pairs.
    Spherical { plus: [f64; 2], minus: [f64; 2] },
}

impl Polarization {
    /// `(E_+, E_−)` of a unit-amplitude field.
    pub fn spherical(self) -> [C; 2] {
        let s = FRAC_1_SQRT_2;
        match self {
            Polarization::H => [C::new(-s, 0.0), C::new(s, 0.0)],
            Polarization::V => [C::new(0.0, s), C::new(0.0, s)],
            Polarization::SigmaPlus => [C::new(1.0, 0.0), C::default()],
            Polarization::SigmaMinus => [C::default(), C::new(1.0, 0.0)],
            Polarization::Spherical { plus, minus } => {
                [C::new(plus[0], plus[1]), C::new(minus[0], minus[1])]
            }
        }
    }

    /// Unit Jones vector `(E_x, E_y)`.
    pub fn jones(self) -> [C; 2] {
        let j = to_linear(self.spherical());
        let n = (j[0].norm_sqr() + j[1].norm_sqr()).sqrt();
        if n == 0.0 {
            j
        } else {
            [j[0] / n, j[1] / n]
        }
    }
}

/// `(E_+, E_−) → (E_x, E_y)`.
pub fn to_linear(sph: [C; 2]) -> [C; 2] {
    let [p, m] = sph;
    [(m - p) * FRAC_1_SQRT_2, -I * (p + m) * FRAC_1_SQRT_2]
}

/// The eight field modes, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    PumpPlus,
    PumpMinus,
    ControlPlus,
    ControlMinus,
    StokesPlus,
    StokesMinus,
    AntiStokesPlus,
    AntiStokesMinus,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::PumpPlus,
        Mode::PumpMinus,
        Mode::ControlPlus,
        Mode::ControlMinus,
        Mode::StokesPlus,
        Mode::StokesMinus,
        Mode::AntiStokesPlus,
        Mode::AntiStokesMinus,
    ];

    pub fn name(self) -> &'static str {
        ["P+", "P-", "C+", "C-", "S+", "S-", "AS+", "AS-"][self as usize]
    }

    /// Spherical index `q` (`M_e − M_g`).
    pub fn q(self) -> i32 {
        if (self as usize) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn is_generated(self) -> bool {
        (self as usize) >= 4
    }
}

/// Ground/excited manifold labels of each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transitions {
    pub pump: (String, String),
    pub control: (String, String),
    pub stokes: (String, String),
    pub anti_stokes: (String, String),
}

impl Default for Transitions {
    fn default() -> Self {
        let p = |a: &str, b: &str| (a.to_string(), b.to_string());
        Self { pump: p("1", "4"), control: p("2", "3"), stokes: p("2", "4"), anti_stokes: p("1", "3") }
    }
}

impl Transitions {
    fn of(&self, m: Mode) -> &(String, String) {
        match m as usize / 2 {
            0 => &self.pump,
            1 => &self.control,
            2 => &self.stokes,
            _ => &self.anti_stokes,
        }
    }
}

/// Numerical settings of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "d_nodes")]
    pub z_nodes: usize,
    /// Upper bound on the time step (1/Γ).
    #[serde(default = "d_dt_max")]
    pub dt_max: f64,
    #[serde(default = "d_dt_min")]
    pub dt_min: f64,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Vacuum Rabi amplitude (Γ).
    #[serde(default = "d_evac")]
    pub e_vac: f64,
    /// Simulated time (1/Γ).
    #[serde(default = "d_duration")]
    pub duration: f64,
    #[serde(default = "d_traj")]
    pub trajectories: usize,
    /// Output sampling interval (1/Γ).
    #[serde(default = "d_record")]
    pub record_every: f64,
    #[serde(default)]
    pub deplete_drives: bool,
    #[serde(default)]
    pub decay: DecayForm,
}

fn d_nodes() -> usize {
    61
}
fn d_dt_max() -> f64 {
    0.05
}
fn d_dt_min() -> f64 {
    1e-8
}
fn d_tol() -> f64 {
    1e-6
}
fn d_evac() -> f64 {
    1e-5
}
fn d_duration() -> f64 {
    50.0
}
fn d_traj() -> usize {
    1
}
fn d_record() -> f64 {
    0.05
}

impl Default for SimConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        simpson::check_nodes(self.z_nodes)?;
        if !(self.tol > 0.0) || !(self.dt_max > 0.0) || !(self.dt_min > 0.0) || self.dt_min > self.dt_max {
            return Err(config("need tol > 0 and 0 < dt_min ≤ dt_max"));
        }
        if self.dt_max > 0.1 {
            return Err(config("dt_max must stay well below 1/Γ (≤ 0.1)"));
        }
        if !(self.duration > 0.0) || !(self.record_every > 0.0) || self.e_vac < 0.0 {
            return Err(config("duration and record interval must be positive"));
        }
        Ok(())
    }
}

/// A weak classical probe injected at `z = 0` on the anti-Stokes modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub amplitude: f64,
    pub polarization: Polarization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Equal populations in every sublevel of one ground manifold.
    Uniform { manifold: String },
    /// Explicit ground populations, in scheme order.
    Populations(Vec<f64>),
}

/// Physical inputs of a run; frequencies in units of Γ_D1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimInputs {
    pub od: f64,
    pub pump_rabi: f64,
    pub control_rabi: f64,
    pub pump_polarization: Polarization,
    pub control_polarization: Polarization,
    pub pump_detuning: f64,
    #[serde(default)]
    pub control_detuning: f64,
    /// Anti-Stokes carrier detuning `δ` from its transition.
    #[serde(default)]
    pub as_detuning: f64,
    #[serde(default)]
    pub probe: Option<Probe>,
    #[serde(default = "yes")]
    pub seed_stokes: bool,
    pub initial: InitialState,
    #[serde(default)]
    pub transitions: Transitions,
}

fn yes() -> bool {
    true
}

impl SimInputs {
    /// Fiber-source drives on `scheme`: H pump, V control.
    pub fn from_scheme(scheme: &LevelScheme) -> Result<Self> {
        let p = SfwmParams::from_scheme(scheme)?;
        let g = scheme.gamma_d1();
        Ok(Self {
            od: 15.0,
            pump_rabi: p.pump_rabi_frequency() / g,
            control_rabi: p.control_rabi / g,
            pump_polarization: Polarization::H,
            control_polarization: Polarization::V,
            pump_detuning: scheme.detunings.pump / g,
            control_detuning: scheme.detunings.control / g,
            as_detuning: 0.0,
            probe: None,
            seed_stokes: true,
            initial: InitialState::Uniform { manifold: "1".into() },
            transitions: Transitions::default(),
        })
    }

    /// Rotating-frame energies of the ground and excited sublevels.
    fn frame_energies(&self, scheme: &LevelScheme) -> (Vec<f64>, Vec<f64>) {
        let t = &self.transitions;
        let manifold_energy = |label: &str, kind: ManifoldKind| -> f64 {
            let mut e = 0.0;
            if kind == ManifoldKind::Excited {
                if label == t.pump.1 {
                    e = -self.pump_detuning;
                } else if label == t.anti_stokes.1 {
                    e = -self.as_detuning;
                }
            } else if label == t.control.0 && label != t.pump.0 {
                e = -self.as_detuning + self.control_detuning;
            }
            e
        };
        let energies = |kind: ManifoldKind| -> Vec<f64> {
            let states = if kind == ManifoldKind::Ground { scheme.ground_states() } else { scheme.excited_states() };
            states
                .iter()
                .map(|s| {
                    let m = &scheme.manifolds[s.manifold];
                    manifold_energy(&m.label, kind) + if kind == ManifoldKind::Ground { m.energy } else { 0.0 }
                })
                .collect()
        };
        (energies(ManifoldKind::Ground), energies(ManifoldKind::Excited))
    }

    fn initial_ground(&self, scheme: &LevelScheme) -> Result<Vec<f64>> {
        let ground = scheme.ground_states();
        let pops = match &self.initial {
            InitialState::Uniform { manifold } => {
                let idx = scheme.manifold_index(manifold)?;
                let n = ground.iter().filter(|s| s.manifold == idx).count();
                if n == 0 {
                    return Err(config(format!("manifold {manifold:?} has no ground sublevels")));
                }
                ground.iter().map(|s| if s.manifold == idx { 1.0 / n as f64 } else { 0.0 }).collect()
            }
            InitialState::Populations(p) => p.clone(),
        };
        if pops.len() != ground.len() || pops.iter().any(|p| *p < 0.0) {
            return Err(config("initial populations must be non-negative, one per ground sublevel"));
        }
        if (pops.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(config("initial populations must sum to 1"));
        }
        Ok(pops)
    }
}

/// Output of one trajectory, sampled every `record_every`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub t: Vec<f64>,
    /// Mode amplitudes at `z = L`.
    pub output: Vec<[C; 8]>,
    /// Mode amplitudes at `z = 0`.
    pub input: Vec<[C; 8]>,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_population: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl TrajectoryResult {
    /// Generated part `E(L) − E(0)` of a mode pair, `(E_+, E_−)` per sample.
    pub fn generated(&self, plus: Mode) -> Vec<[C; 2]> {
        let (a, b) = (plus as usize, plus as usize + 1);
        self.output
            .iter()
            .zip(&self.input)
            .map(|(o, i)| [o[a] - i[a], o[b] - i[b]])
            .collect()
    }

    /// Time-averaged `|E_m(L)|²` over the second half of the run.
    pub fn late_power(&self, m: Mode) -> f64 {
        let n = self.output.len();
        let tail = &self.output[n / 2..];
        tail.iter().map(|o| o[m as usize].norm_sqr()).sum::<f64>() / tail.len().max(1) as f64
    }
}

struct ModeCoupling {
    exists: bool,
    gain: f64,
    /// `(e, g, CG)`.
    entries: Vec<(usize, usize, f64)>,
}

/// The medium as an ODE system over the flat state of all z nodes.
struct Medium {
    model: BlochModel,
    modes: Vec<ModeCoupling>,
    /// Union of the Rabi-matrix patterns, with per-mode weights.
    pattern: Vec<(usize, usize, Vec<(usize, f64)>)>,
    nz: usize,
    block: usize,
    h: f64,
    weights: Vec<f64>,
    propagate: [bool; 8],
    e_vac: f64,
    boundary: [C; 8],
    fields: Vec<[C; 8]>,
    source: Vec<C>,
    cum: Vec<C>,
    omega: Vec<(usize, usize, C)>,
    scratch: Scratch,
}

impl Medium {
    fn source_at(&self, m: usize, rho: &[C]) -> C {
        let eg0 = self.model.ng * self.model.ng;
        let ng = self.model.ng;
        self.modes[m].entries.iter().map(|&(e, g, cg)| rho[eg0 + e * ng + g] * cg).sum()
    }

    fn update_fields(&mut self, y: &[C]) {
        for f in self.fields.iter_mut() {
            *f = self.boundary;
        }
        for m in 0..8 {
            if !self.propagate[m] || !self.modes[m].exists {
                continue;
            }
            for j in 0..self.nz {
                self.source[j] = self.source_at(m, &y[j * self.block..(j + 1) * self.block]);
            }
            simpson::cumulative(&self.source, self.h, &mut self.cum);
            let k = -I * self.modes[m].gain;
            for j in 0..self.nz {
                self.fields[j][m] += k * self.cum[j];
            }
        }
    }

    fn fill_omega(&mut self, j: usize) {
        let f = &self.fields[j];
        for (slot, (e, g, w)) in self.omega.iter_mut().zip(&self.pattern) {
            let v: C = w.iter().map(|&(m, cg)| f[m] * cg).sum();
            *slot = (*e, *g, v);
        }
    }
}

impl OdeSystem for Medium {
    fn dim(&self) -> usize {
        self.nz * self.block
    }

    fn rhs(&mut self, _t: f64, y: &[C], dy: &mut [C]) {
        self.update_fields(y);
        for j in 0..self.nz {
            self.fill_omega(j);
            let r = j * self.block..(j + 1) * self.block;
            self.model.rhs(&y[r.clone()], &self.omega, &mut dy[r], &mut self.scratch);
        }
    }

    fn error_norm(&mut self, err: &[C]) -> f64 {
        let mut norm = max_abs(err);
        if self.e_vac > 0.0 {
            for m in 0..8 {
                if !self.propagate[m] || !self.modes[m].exists {
                    continue;
                }
                let total: C = (0..self.nz)
                    .map(|j| self.source_at(m, &err[j * self.block..(j + 1) * self.block]) * self.weights[j])
                    .sum();
                norm = norm.max(self.modes[m].gain * total.norm() / self.e_vac);
            }
        }
        norm
    }
}

fn build_medium(cfg: &SimConfig, scheme: &LevelScheme, inputs: &SimInputs) -> Result<(Medium, Vec<C>)> {
    cfg.validate()?;
    if inputs.od < 0.0 {
        return Err(Error::NonPhysical("optical depth must be ≥ 0".into()));
    }
    let (eg, ee) = inputs.frame_energies(scheme);
    let model = BlochModel::with_decay(scheme, eg, ee, scheme.gamma_d1(), cfg.decay)?;
    let ground = scheme.ground_states();
    let excited = scheme.excited_states();

    let reference = scheme
        .transition(&inputs.transitions.anti_stokes.0, &inputs.transitions.anti_stokes.1)
        .ok_or_else(|| config("the anti-Stokes transition must exist in the scheme"))?;
    let k_of = |label: &str| -> Result<f64> {
        let m = &scheme.manifolds[scheme.manifold_index(label)?];
        let line = m.line.ok_or_else(|| config(format!("excited manifold {label:?} has no line")))?;
        Ok(1.0 / scheme.wavelength(line)?)
    };
    let ref_strength = k_of(&inputs.transitions.anti_stokes.1)? * reference.reduced_dipole.powi(2);

    let mut modes = Vec::new();
    for m in Mode::ALL {
        let (gl, el) = inputs.transitions.of(m);
        let t = scheme.transition(gl, el);
        let Some(t) = t else {
            modes.push(ModeCoupling { exists: false, gain: 0.0, entries: vec![] });
            continue;
        };
        let (gi, ei) = (scheme.manifold_index(gl)?, scheme.manifold_index(el)?);
        let mut entries = Vec::new();
        for (a, e) in excited.iter().enumerate().filter(|(_, e)| e.manifold == ei) {
            for (b, g) in ground.iter().enumerate().filter(|(_, g)| g.manifold == gi) {
                if e.m - g.m == m.q() {
                    let cg = clebsch_gordan(e.f as i32, e.m, g.f as i32, g.m);
                    if cg != 0.0 {
                        entries.push((a, b, cg));
                    }
                }
            }
        }
        let gain = 0.5 * inputs.od * k_of(el)? * t.reduced_dipole.powi(2) / ref_strength;
        modes.push(ModeCoupling { exists: true, gain, entries });
    }

    let mut pattern: Vec<(usize, usize, Vec<(usize, f64)>)> = Vec::new();
    for (mi, mc) in modes.iter().enumerate() {
        for &(e, g, cg) in &mc.entries {
            match pattern.iter_mut().find(|p| p.0 == e && p.1 == g) {
                Some(p) => p.2.push((mi, cg)),
                None => pattern.push((e, g, vec![(mi, cg)])),
            }
        }
    }

    let mut boundary = [C::default(); 8];
    let pump = inputs.pump_polarization.spherical();
    let control = inputs.control_polarization.spherical();
    boundary[0] = pump[0] * inputs.pump_rabi;
    boundary[1] = pump[1] * inputs.pump_rabi;
    boundary[2] = control[0] * inputs.control_rabi;
    boundary[3] = control[1] * inputs.control_rabi;
    if let Some(p) = inputs.probe {
        let s = p.polarization.spherical();
        boundary[6] = s[0] * p.amplitude;
        boundary[7] = s[1] * p.amplitude;
    }

    let nz = cfg.z_nodes;
    let block = model.block_len();
    let h = 1.0 / (nz - 1) as f64;
    let mut propagate = [true; 8];
    if !cfg.deplete_drives {
        propagate[..4].fill(false);
    }

    let pops = inputs.initial_ground(scheme)?;
    let mut y = vec![C::default(); nz * block];
    for j in 0..nz {
        for (i, p) in pops.iter().enumerate() {
            y[j * block + i * model.ng + i] = C::new(*p, 0.0);
        }
    }

    let scratch = model.scratch();
    let medium = Medium {
        omega: pattern.iter().map(|(e, g, _)| (*e, *g, C::default())).collect(),
        model,
        modes,
        pattern,
        nz,
        block,
        h,
        weights: simpson::weights(nz, h),
        propagate,
        e_vac: cfg.e_vac,
        boundary,
        fields: vec![[C::default(); 8]; nz],
        source: vec![C::default(); nz],
        cum: vec![C::default(); nz],
        scratch,
    };
    Ok((medium, y))
}

/// Runs trajectory number `index` of `cfg`.
pub fn run_trajectory(cfg: &SimConfig, scheme: &LevelScheme, inputs: &SimInputs, index: u64) -> Result<TrajectoryResult> {
    let (mut medium, mut y) = build_medium(cfg, scheme, inputs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let seed_gamma = scheme.gamma_d2() / scheme.gamma_d1();
    let control = StepControl { tol: cfg.tol, dt_min: cfg.dt_min, dt_max: cfg.dt_max, safety: 0.9 };
    let mut km = KuttaMerson::new(y.len(), control);
    let (ng, ne, block, nz) = (medium.model.ng, medium.model.ne, medium.block, medium.nz);

    let mut out = TrajectoryResult {
        t: vec![],
        output: vec![],
        input: vec![],
        max_trace_error: 0.0,
        max_hermiticity_error: 0.0,
        min_population: f64::INFINITY,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let record = |medium: &mut Medium, y: &[C], t: f64, out: &mut TrajectoryResult| {
        medium.update_fields(y);
        out.t.push(t);
        out.input.push(medium.fields[0]);
        out.output.push(medium.fields[nz - 1]);
    };
    record(&mut medium, &y, 0.0, &mut out);

    let mut t = 0.0;
    let mut h = (cfg.dt_max * 0.1).max(cfg.dt_min);
    let mut next_record = cfg.record_every;
    let mut stokes = [C::default(); 2];
    while t < cfg.duration - 1e-12 {
        let target = next_record.min(cfg.duration);
        let hs = h.min(target - t);
        let o = km.step(&mut medium, t, &mut y, hs)?;
        h = o.dt_next;
        if !o.accepted {
            continue;
        }
        t += hs;
        if inputs.seed_stokes {
            stokes = vacuum_seed_step(stokes, hs, seed_gamma, cfg.e_vac, &mut rng);
            medium.boundary[4] = stokes[0];
            medium.boundary[5] = stokes[1];
        }
        for j in 0..nz {
            let r = &y[j * block..(j + 1) * block];
            out.max_trace_error = out.max_trace_error.max((trace(ng, ne, r) - 1.0).norm());
            out.max_hermiticity_error = out.max_hermiticity_error.max(hermiticity_error(ng, ne, r));
            out.min_population = out.min_population.min(min_population(ng, ne, r));
        }
        if t >= target - 1e-12 {
            record(&mut medium, &y, t, &mut out);
            next_record += cfg.record_every;
        }
    }
    let Stats { accepted, rejected, .. } = km.stats;
    out.accepted_steps = accepted;
    out.rejected_steps = rejected;
    Ok(out)
}

/// `cfg.trajectories` independent runs in parallel.
pub fn run_ensemble(cfg: &SimConfig, scheme: &LevelScheme, inputs: &SimInputs) -> Result<Vec<TrajectoryResult>> {
    (0..cfg.trajectories as u64)
        .into_par_iter()
        .map(|i| run_trajectory(cfg, scheme, inputs, i))
        .collect()
}

/// Orthogonal-to-parallel power ratio (dB) of `samples` relative to
/// `reference`, capped at `cap_db`.
pub fn polarization_extinction(samples: &[[C; 2]], reference: Polarization, cap_db: f64) -> Result<f64> {
    let p = reference.jones();
    let (mut par, mut total) = (0.0, 0.0);
    for s in samples {
        let e = to_linear(*s);
        par += (p[0].conj() * e[0] + p[1].conj() * e[1]).norm_sqr();
        total += e[0].norm_sqr() + e[1].norm_sqr();
    }
    if total == 0.0 {
        return Err(Error::Undefined("field carries no power".into()));
    }
    let perp = (total - par).max(0.0);
    if par <= total * 10f64.powf(-cap_db / 10.0) {
        return Ok(cap_db);
    }
    Ok((10.0 * (perp / par).log10()).clamp(-cap_db, cap_db))
}

/// S-vs-pump and AS-vs-control extinction of one trajectory (dB).
pub fn trajectory_extinction(r: &TrajectoryResult, inputs: &SimInputs, cap_db: f64) -> Result<(f64, f64)> {
    let s = polarization_extinction(&r.generated(Mode::StokesPlus), inputs.pump_polarization, cap_db)?;
    let a = polarization_extinction(&r.generated(Mode::AntiStokesPlus), inputs.control_polarization, cap_db)?;
    Ok((s, a))
}
