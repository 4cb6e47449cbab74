//! Atomic level structure for the double-Λ scheme.
//!
//! A [`LevelScheme`] lists hyperfine manifolds, each expanded into its
//! `2F+1` Zeeman sublevels. Ground sublevels come first in manifold order,
//! then excited sublevels; within a manifold `M` runs from `-F` to `F`.
//! All rates stored on the scheme are SI angular frequencies (rad/s); the
//! simulator works in units of `Γ_D1` and converts through
//! [`LevelScheme::to_gamma_units`].

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{config, Error, Result};

/// CODATA 2018 values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// J·s
    pub hbar: f64,
    /// F/m
    pub epsilon0: f64,
    /// m/s
    pub c: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    epsilon0: 8.854_187_812_8e-12,
    c: 299_792_458.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Line {
    D1,
    D2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Ground,
    Excited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifold {
    pub label: String,
    pub kind: ManifoldKind,
    pub f: u32,
    /// Energy offset in units of `Γ_D1` (ground manifolds only).
    #[serde(default)]
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<Line>,
}

/// One dipole-allowed hyperfine transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub ground: String,
    pub excited: String,
    /// Effective reduced dipole element of the hyperfine pair (C·m).
    pub reduced_dipole: f64,
    /// Fraction of the excited manifold's spontaneous decay that ends in
    /// this ground manifold.
    pub branching: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detunings {
    /// One-photon pump detuning Δ (rad/s), positive for blue detuning.
    pub pump: f64,
    #[serde(default)]
    pub control: f64,
}

/// Hyperfine manifolds plus rates, as read from the level-scheme JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub manifolds: Vec<Manifold>,
    pub decay_rates: BTreeMap<Line, f64>,
    pub gamma12: f64,
    pub detunings: Detunings,
    #[serde(default)]
    pub wavelengths: BTreeMap<Line, f64>,
    pub transitions: Vec<Transition>,
}

/// A single magnetic sublevel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ZeemanState {
    /// Index into [`LevelScheme::manifolds`].
    pub manifold: usize,
    pub f: u32,
    pub m: i32,
}

/// Reduced dipole elements of the four double-Λ transitions,
/// `|1⟩–|3⟩`, `|3⟩–|2⟩`, `|2⟩–|4⟩`, `|4⟩–|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleTable {
    pub mu13: f64,
    pub mu32: f64,
    pub mu24: f64,
    pub mu41: f64,
}

const DEFAULT_SCHEME_JSON: &str = include_str!("../../../data/rb87_double_lambda.json");

impl Default for LevelScheme {
    /// The 16-state ⁸⁷Rb double-Λ: F=1, F=2 grounds, D1 F'=1 and D2 F'=2.
    fn default() -> Self {
        let scheme: LevelScheme =
            serde_json::from_str(DEFAULT_SCHEME_JSON).expect("bundled level scheme parses");
        scheme.validate().expect("bundled level scheme is valid");
        scheme
    }
}

impl LevelScheme {
    pub fn from_json(text: &str) -> Result<Self> {
        let scheme: LevelScheme = serde_json::from_str(text)?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for line in [Line::D1, Line::D2] {
            if let Some(&rate) = self.decay_rates.get(&line) {
                if !(rate > 0.0) {
                    return Err(config(format!("decay rate of {line:?} must be positive")));
                }
            }
        }
        if !self.decay_rates.contains_key(&Line::D1) {
            return Err(config("decay rate of D1 is required"));
        }
        if !(self.gamma12 >= 0.0) {
            return Err(config("gamma12 must be non-negative"));
        }
        let mut seen = std::collections::HashSet::new();
        for m in &self.manifolds {
            if !seen.insert(m.label.as_str()) {
                return Err(config(format!("duplicate manifold label {:?}", m.label)));
            }
            if m.kind == ManifoldKind::Excited {
                let line = m
                    .line
                    .ok_or_else(|| config(format!("excited manifold {:?} needs a line", m.label)))?;
                if !self.decay_rates.contains_key(&line) {
                    return Err(config(format!("no decay rate for line {line:?}")));
                }
            }
        }
        if self.ground_count() == 0 || self.excited_count() == 0 {
            return Err(config("scheme needs at least one ground and one excited manifold"));
        }
        for t in &self.transitions {
            let g = self.manifold_index(&t.ground)?;
            let e = self.manifold_index(&t.excited)?;
            if self.manifolds[g].kind != ManifoldKind::Ground
                || self.manifolds[e].kind != ManifoldKind::Excited
            {
                return Err(config(format!(
                    "transition {}–{} must join a ground and an excited manifold",
                    t.ground, t.excited
                )));
            }
            let (fg, fe) = (self.manifolds[g].f as i32, self.manifolds[e].f as i32);
            if (fg - fe).abs() > 1 || (fg == 0 && fe == 0) {
                return Err(config(format!(
                    "transition {}–{} violates |ΔF| ≤ 1",
                    t.ground, t.excited
                )));
            }
            if !(t.reduced_dipole > 0.0) || !(0.0..=1.0).contains(&t.branching) {
                return Err(config(format!(
                    "transition {}–{} needs a positive dipole and branching in [0, 1]",
                    t.ground, t.excited
                )));
            }
        }
        Ok(())
    }

    pub fn manifold_index(&self, label: &str) -> Result<usize> {
        self.manifolds
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| config(format!("unknown manifold {label:?}")))
    }

    fn states_of(&self, kind: ManifoldKind) -> Vec<ZeemanState> {
        self.manifolds
            .iter()
            .enumerate()
            .filter(|(_, m)| m.kind == kind)
            .flat_map(|(i, m)| {
                let f = m.f as i32;
                (-f..=f).map(move |mm| ZeemanState { manifold: i, f: m.f, m: mm })
            })
            .collect()
    }

    pub fn ground_states(&self) -> Vec<ZeemanState> {
        self.states_of(ManifoldKind::Ground)
    }

    pub fn excited_states(&self) -> Vec<ZeemanState> {
        self.states_of(ManifoldKind::Excited)
    }

    pub fn ground_count(&self) -> usize {
        self.ground_states().len()
    }

    pub fn excited_count(&self) -> usize {
        self.excited_states().len()
    }

    /// Σ(2F+1) over all manifolds.
    pub fn zeeman_count(&self) -> usize {
        self.manifolds.iter().map(|m| 2 * m.f as usize + 1).sum()
    }

    pub fn gamma_d1(&self) -> f64 {
        self.decay_rates[&Line::D1]
    }

    pub fn gamma_d2(&self) -> f64 {
        self.decay_rates.get(&Line::D2).copied().unwrap_or_else(|| self.gamma_d1())
    }

    /// Converts an angular frequency (rad/s) into units of `Γ_D1`.
    pub fn to_gamma_units(&self, omega: f64) -> f64 {
        omega / self.gamma_d1()
    }

    pub fn transition(&self, ground: &str, excited: &str) -> Option<&Transition> {
        self.transitions
            .iter()
            .find(|t| t.ground == ground && t.excited == excited)
    }

    fn transition_by_index(&self, g: usize, e: usize) -> Option<&Transition> {
        self.transition(&self.manifolds[g].label, &self.manifolds[e].label)
    }

    /// Reduced dipoles for the double-Λ labelled `1`…`4`.
    pub fn dipole_table(&self) -> Result<DipoleTable> {
        let mu = |g: &str, e: &str| {
            self.transition(g, e)
                .map(|t| t.reduced_dipole)
                .ok_or_else(|| config(format!("missing transition {g}–{e}")))
        };
        Ok(DipoleTable {
            mu13: mu("1", "3")?,
            mu32: mu("2", "3")?,
            mu24: mu("2", "4")?,
            mu41: mu("1", "4")?,
        })
    }

    pub fn wavelength(&self, line: Line) -> Result<f64> {
        self.wavelengths
            .get(&line)
            .copied()
            .ok_or_else(|| config(format!("no wavelength for {line:?}")))
    }
}

/// `⟨F_e, M_e | F_g, M_g; 1, q⟩` with `q = M_e − M_g`.
///
/// Evaluated from the closed-form table for coupling an angular momentum
/// with a spin-1 photon. Inputs outside the selection rules give 0.
pub fn clebsch_gordan(fe: i32, me: i32, fg: i32, mg: i32) -> f64 {
    let q = me - mg;
    if fe < 0 || fg < 0 || me.abs() > fe || mg.abs() > fg || q.abs() > 1 {
        return 0.0;
    }
    if (fe - fg).abs() > 1 || (fe == 0 && fg == 0) {
        return 0.0;
    }
    let j1 = fg as f64;
    let m = me as f64;
    let value = if fe == fg + 1 {
        let d = (2.0 * j1 + 1.0) * (2.0 * j1 + 2.0);
        match q {
            1 => ((j1 + m) * (j1 + m + 1.0) / d).sqrt(),
            0 => ((j1 - m + 1.0) * (j1 + m + 1.0) / ((2.0 * j1 + 1.0) * (j1 + 1.0))).sqrt(),
            _ => ((j1 - m) * (j1 - m + 1.0) / d).sqrt(),
        }
    } else if fe == fg {
        let d = 2.0 * j1 * (j1 + 1.0);
        match q {
            1 => -((j1 + m) * (j1 - m + 1.0) / d).sqrt(),
            0 => m / (j1 * (j1 + 1.0)).sqrt(),
            _ => ((j1 - m) * (j1 + m + 1.0) / d).sqrt(),
        }
    } else {
        let d = 2.0 * j1 * (2.0 * j1 + 1.0);
        match q {
            1 => ((j1 - m) * (j1 - m + 1.0) / d).sqrt(),
            0 => -((j1 - m) * (j1 + m) / (j1 * (2.0 * j1 + 1.0))).sqrt(),
            _ => ((j1 + m + 1.0) * (j1 + m) / d).sqrt(),
        }
    };
    // -0.0 and NaN from zero-weight corners collapse to 0.
    if value.is_finite() {
        value + 0.0
    } else {
        0.0
    }
}

/// Dense row-major real matrix, small enough that a `Vec` is fine.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }
}

/// The structural matrices of the block density-matrix equations.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrices {
    /// `C_ge`, ground × excited. `C_eg = C_geᵀ` (entries are real).
    pub c_ge: RealMatrix,
    /// Ground-state repopulation mask, 1 within the same hyperfine manifold.
    pub r_g: RealMatrix,
    /// Ground-state decoherence rates (in the scheme's rad/s).
    pub gamma: RealMatrix,
}

impl StructureMatrices {
    pub fn c_eg(&self) -> RealMatrix {
        self.c_ge.transpose()
    }
}

/// Builds `C_ge`, `R_g` and `γ` for `scheme`.
///
/// Each Clebsch–Gordan entry is weighted by the square root of the
/// hyperfine branching ratio of its transition, so that `(C_eg·C_ge)` has a
/// unit diagonal and every excited sublevel decays at the line rate.
pub fn build_structure_matrices(scheme: &LevelScheme) -> Result<StructureMatrices> {
    scheme.validate()?;
    let ground = scheme.ground_states();
    let excited = scheme.excited_states();
    let mut c_ge = RealMatrix::zeros(ground.len(), excited.len());
    for (gi, g) in ground.iter().enumerate() {
        for (ei, e) in excited.iter().enumerate() {
            if let Some(t) = scheme.transition_by_index(g.manifold, e.manifold) {
                let cg = clebsch_gordan(e.f as i32, e.m, g.f as i32, g.m);
                c_ge.set(gi, ei, t.branching.sqrt() * cg);
            }
        }
    }
    let mut r_g = RealMatrix::zeros(ground.len(), ground.len());
    let mut gamma = RealMatrix::zeros(ground.len(), ground.len());
    for (i, a) in ground.iter().enumerate() {
        for (j, b) in ground.iter().enumerate() {
            r_g.set(i, j, if a.manifold == b.manifold { 1.0 } else { 0.0 });
            let same = a.manifold == b.manifold && a.m == b.m;
            gamma.set(i, j, if same { 0.0 } else { scheme.gamma12 });
        }
    }
    if c_ge.rows != scheme.ground_count() || c_ge.cols != scheme.excited_count() {
        return Err(config("structure matrix dimensions disagree with the scheme"));
    }
    Ok(StructureMatrices { c_ge, r_g, gamma })
}
