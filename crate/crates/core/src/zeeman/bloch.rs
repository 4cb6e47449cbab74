//! Block density-matrix equations of the Zeeman-resolved double-Λ atom.
//!
//! With `ρ_ge = ρ_eg†` and `D = C_eg·C_ge`:
//!
//! ```text
//! ρ̇_gg = i[ρ_gg, Δ_g] + (i/2)(ρ_ge Ω_eg − Ω_ge ρ_eg) + Γ Σ_q R_g∘(C^q_ge ρ_ee C^q_eg) − γ∘ρ_gg
//! ρ̇_eg = i(ρ_eg Δ_g − Δ_e ρ_eg) + (i/2)(ρ_ee Ω_eg − Ω_eg ρ_gg) − (Γ/2) D ρ_eg
//! ρ̇_ee = i[ρ_ee, Δ_e] + (i/2)(ρ_eg Ω_ge − Ω_eg ρ_ge) − (Γ/2){D, ρ_ee}
//! ```
//!
//! `C^q` is the part of `C_ge` with `m_e − m_g = q` and `D = Σ_q C^q_eg C^q_ge`.
//! Terms pairing different excited manifolds are dropped.
//! Rates and frequencies are in units of Γ; `Ω` is the Rabi matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic::{build_structure_matrices, LevelScheme};
use crate::error::{Error, Result};

type C = Complex64;
const I: C = C { re: 0.0, im: 1.0 };

/// Blocks of one density matrix, all row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityBlocks {
    pub ng: usize,
    pub ne: usize,
    pub gg: Vec<C>,
    /// Rows excited, columns ground.
    pub eg: Vec<C>,
    pub ee: Vec<C>,
}

impl DensityBlocks {
    pub fn zeros(ng: usize, ne: usize) -> Self {
        Self { ng, ne, gg: vec![C::default(); ng * ng], eg: vec![C::default(); ne * ng], ee: vec![C::default(); ne * ne] }
    }

    pub fn len(ng: usize, ne: usize) -> usize {
        ng * ng + ne * ng + ne * ne
    }

    pub fn from_flat(ng: usize, ne: usize, v: &[C]) -> Result<Self> {
        if v.len() != Self::len(ng, ne) {
            return Err(Error::Config(format!("flat state has {} entries, expected {}", v.len(), Self::len(ng, ne))));
        }
        let (gg, rest) = v.split_at(ng * ng);
        let (eg, ee) = rest.split_at(ne * ng);
        Ok(Self { ng, ne, gg: gg.to_vec(), eg: eg.to_vec(), ee: ee.to_vec() })
    }

    pub fn to_flat(&self) -> Vec<C> {
        [self.gg.as_slice(), &self.eg, &self.ee].concat()
    }

    /// `ρ_ge = ρ_eg†`.
    pub fn ge(&self) -> Vec<C> {
        let mut out = vec![C::default(); self.ng * self.ne];
        for e in 0..self.ne {
            for g in 0..self.ng {
                out[g * self.ne + e] = self.eg[e * self.ng + g].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C {
        trace(self.ng, self.ne, &self.to_flat())
    }

    /// Largest deviation from Hermiticity of the diagonal blocks.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(self.ng, self.ne, &self.to_flat())
    }
}

pub fn trace(ng: usize, ne: usize, v: &[C]) -> C {
    let ee0 = ng * ng + ne * ng;
    (0..ng).map(|i| v[i * ng + i]).sum::<C>() + (0..ne).map(|i| v[ee0 + i * ne + i]).sum::<C>()
}

pub fn hermiticity_error(ng: usize, ne: usize, v: &[C]) -> f64 {
    let herm = |m: &[C], n: usize| {
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                e = e.max((m[i * n + j] - m[j * n + i].conj()).norm());
            }
        }
        e
    };
    herm(&v[..ng * ng], ng).max(herm(&v[ng * ng + ne * ng..], ne))
}

/// Smallest diagonal element of the blocks (populations).
pub fn min_population(ng: usize, ne: usize, v: &[C]) -> f64 {
    let ee0 = ng * ng + ne * ng;
    (0..ng)
        .map(|i| v[i * ng + i].re)
        .chain((0..ne).map(|i| v[ee0 + i * ne + i].re))
        .fold(f64::INFINITY, f64::min)
}

/// How the decay operator is assembled from the Clebsch–Gordan matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayForm {
    /// `D = Σ_q C^q_eg C^q_ge`, same excited manifold only.
    #[default]
    PerPolarization,
    /// `D = C_eg C_ge` and `R_g∘(C_ge ρ_ee C_eg)` with all polarizations summed first.
    /// Couples excited sublevels of different `m`.
    Summed,
}

/// Nonzero entries `(e, g, Ω_eg)` of the Rabi matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Coupling {
    pub entries: Vec<(usize, usize, C)>,
}

/// Precomputed structure of the equations for one level scheme.
#[derive(Debug, Clone)]
pub struct BlochModel {
    pub ng: usize,
    pub ne: usize,
    /// Rotating-frame energies `Δ_g`, `Δ_e` (diagonal).
    pub energy_g: Vec<f64>,
    pub energy_e: Vec<f64>,
    pub gamma: f64,
    /// `(g, e, g', e', R_g C^q_ge C^q_g'e')`.
    repop: Vec<(usize, usize, usize, usize, f64)>,
    /// `γ` row-major.
    dephase: Vec<f64>,
    /// `(e, e', D)`.
    d: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct Scratch {
    x: Vec<C>,
    z: Vec<C>,
}

impl BlochModel {
    /// `gamma` is Γ and `unit` the frequency unit (rad/s) dividing the
    /// scheme's dephasing rates.
    pub fn new(scheme: &LevelScheme, energy_g: Vec<f64>, energy_e: Vec<f64>, unit: f64) -> Result<Self> {
        Self::with_decay(scheme, energy_g, energy_e, unit, DecayForm::default())
    }

    pub fn with_decay(
        scheme: &LevelScheme,
        energy_g: Vec<f64>,
        energy_e: Vec<f64>,
        unit: f64,
        form: DecayForm,
    ) -> Result<Self> {
        let m = build_structure_matrices(scheme)?;
        let (ng, ne) = (m.c_ge.rows, m.c_ge.cols);
        if energy_g.len() != ng || energy_e.len() != ne {
            return Err(Error::Config("energy vectors do not match the scheme".into()));
        }
        let ground = scheme.ground_states();
        let excited = scheme.excited_states();
        // (g, e, C, q, excited manifold)
        let mut c = Vec::new();
        for g in 0..ng {
            for e in 0..ne {
                let v = m.c_ge.get(g, e);
                if v != 0.0 {
                    c.push((g, e, v, excited[e].m - ground[g].m, excited[e].manifold));
                }
            }
        }
        let mut dm = vec![0.0; ne * ne];
        let mut repop = Vec::new();
        for &(g, a, ca, qa, ma) in &c {
            for &(g2, b, cb, qb, mb) in &c {
                if form == DecayForm::PerPolarization && (qa != qb || ma != mb) {
                    continue;
                }
                if g == g2 {
                    dm[a * ne + b] += ca * cb;
                }
                let r = m.r_g.get(g, g2);
                if r != 0.0 {
                    repop.push((g, a, g2, b, r * ca * cb));
                }
            }
        }
        let d = (0..ne * ne)
            .filter(|&k| dm[k].abs() > 1e-15)
            .map(|k| (k / ne, k % ne, dm[k]))
            .collect();
        Ok(Self {
            ng,
            ne,
            energy_g,
            energy_e,
            gamma: 1.0,
            repop,
            dephase: m.gamma.data.iter().map(|g| g / unit).collect(),
            d,
        })
    }

    pub fn block_len(&self) -> usize {
        DensityBlocks::len(self.ng, self.ne)
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            x: vec![C::default(); self.ng * self.ng],
            z: vec![C::default(); self.ne * self.ne],
        }
    }

    /// `D` as a dense row-major matrix.
    pub fn decay_matrix(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ne * self.ne];
        for &(a, b, v) in &self.d {
            out[a * self.ne + b] = v;
        }
        out
    }

    /// Writes `dρ/dt` for one flat block `rho` into `out`.
    pub fn rhs(&self, rho: &[C], omega: &[(usize, usize, C)], out: &mut [C], s: &mut Scratch) {
        let (ng, ne) = (self.ng, self.ne);
        let (gg, rest) = rho.split_at(ng * ng);
        let (eg, ee) = rest.split_at(ne * ng);
        let (dgg, rest) = out.split_at_mut(ng * ng);
        let (deg, dee) = rest.split_at_mut(ne * ng);
        let gamma = self.gamma;

        // Free evolution and dephasing.
        for a in 0..ng {
            for b in 0..ng {
                let k = a * ng + b;
                dgg[k] = gg[k] * (I * (self.energy_g[b] - self.energy_g[a]) - self.dephase[k]);
            }
        }
        for e in 0..ne {
            for g in 0..ng {
                let k = e * ng + g;
                deg[k] = eg[k] * I * (self.energy_g[g] - self.energy_e[e]);
            }
        }
        for a in 0..ne {
            for b in 0..ne {
                let k = a * ne + b;
                dee[k] = ee[k] * I * (self.energy_e[b] - self.energy_e[a]);
            }
        }

        // X = Ω_ge ρ_eg, Z = Ω_eg ρ_ge, and the ρ_eg drive terms.
        s.x.iter_mut().for_each(|v| *v = C::default());
        s.z.iter_mut().for_each(|v| *v = C::default());
        let half_i = I * 0.5;
        for &(e, g, w) in omega {
            let wc = w.conj();
            let row = &eg[e * ng..(e + 1) * ng];
            let xrow = &mut s.x[g * ng..(g + 1) * ng];
            for (x, r) in xrow.iter_mut().zip(row) {
                *x += wc * r;
            }
            for e2 in 0..ne {
                s.z[e * ne + e2] += w * eg[e2 * ng + g].conj();
                // (i/2) ρ_ee Ω_eg
                deg[e2 * ng + g] += half_i * ee[e2 * ne + e] * w;
            }
            // −(i/2) Ω_eg ρ_gg
            let grow = &gg[g * ng..(g + 1) * ng];
            let drow = &mut deg[e * ng..(e + 1) * ng];
            for (d, r) in drow.iter_mut().zip(grow) {
                *d -= half_i * w * r;
            }
        }
        for a in 0..ng {
            for b in 0..ng {
                dgg[a * ng + b] += half_i * (s.x[b * ng + a].conj() - s.x[a * ng + b]);
            }
        }
        for a in 0..ne {
            for b in 0..ne {
                dee[a * ne + b] += half_i * (s.z[b * ne + a].conj() - s.z[a * ne + b]);
            }
        }

        // Repopulation.
        for &(g, e, g2, e2, w) in &self.repop {
            dgg[g * ng + g2] += ee[e * ne + e2] * (gamma * w);
        }

        // Decay −(Γ/2) D ρ_eg and −(Γ/2){D, ρ_ee}.
        let hg = 0.5 * gamma;
        for &(a, b, dv) in &self.d {
            let f = hg * dv;
            for g in 0..ng {
                deg[a * ng + g] -= eg[b * ng + g] * f;
            }
            for k in 0..ne {
                dee[a * ne + k] -= ee[b * ne + k] * f;
                dee[k * ne + b] -= ee[k * ne + a] * f;
            }
        }
    }
}

/// `dρ/dt` for `rho` under `coupling`.
pub fn density_rhs(rho: &DensityBlocks, coupling: &Coupling, model: &BlochModel) -> Result<DensityBlocks> {
    if rho.ng != model.ng || rho.ne != model.ne {
        return Err(Error::Config(format!(
            "density blocks are {}+{} levels, model has {}+{}",
            rho.ng, rho.ne, model.ng, model.ne
        )));
    }
    if coupling.entries.iter().any(|&(e, g, _)| e >= model.ne || g >= model.ng) {
        return Err(Error::Config("coupling entry outside the level space".into()));
    }
    let flat = rho.to_flat();
    let mut out = vec![C::default(); flat.len()];
    model.rhs(&flat, &coupling.entries, &mut out, &mut model.scratch());
    DensityBlocks::from_flat(model.ng, model.ne, &out)
}
