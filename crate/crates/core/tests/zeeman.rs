use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sfwm::atomic::LevelScheme;
use sfwm::spectrum::{SfwmModel, SfwmParams};
use sfwm::zeeman::integrator::{KuttaMerson, OdeSystem, StepControl};
use sfwm::zeeman::{
    density_rhs, polarization_extinction, run_ensemble, run_trajectory, simpson, vacuum_seed_step, BlochModel,
    Coupling, DecayForm, DensityBlocks, Mode, Polarization, Probe, SimConfig, SimInputs,
};
use sfwm::Error;

fn reduced() -> LevelScheme {
    LevelScheme::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/reduced_lambda.json")).unwrap()
}

fn probe_inputs(od: f64, control: f64, delta: f64) -> SimInputs {
    let mut inp = SimInputs::from_scheme(&LevelScheme::default()).unwrap();
    inp.od = od;
    inp.pump_rabi = 0.0;
    inp.pump_detuning = 0.0;
    inp.control_rabi = control;
    inp.control_detuning = 0.0;
    inp.control_polarization = Polarization::SigmaPlus;
    inp.as_detuning = delta;
    inp.probe = Some(Probe { amplitude: 1e-4, polarization: Polarization::SigmaPlus });
    inp.seed_stokes = false;
    inp
}

fn transmission(cfg: &SimConfig, scheme: &LevelScheme, inp: &SimInputs) -> C {
    let r = run_trajectory(cfg, scheme, inp, 0).unwrap();
    r.output.last().unwrap()[Mode::AntiStokesPlus as usize] / 1e-4
}

#[test]
fn beer_lambert_two_level_reduction() {
    let cfg = SimConfig { duration: 20.0, ..Default::default() };
    for od in [0.5, 1.0, 2.0, 4.0] {
        let t = transmission(&cfg, &reduced(), &probe_inputs(od, 0.0, 0.0));
        let expect = (-od / 2.0).exp();
        assert!((t.norm() / expect - 1.0).abs() < 0.02, "od {od}: {} vs {expect}", t.norm());
    }
}

#[test]
fn summed_decay_form_breaks_beer_lambert() {
    let cfg = SimConfig { duration: 20.0, decay: DecayForm::Summed, ..Default::default() };
    let t = transmission(&cfg, &reduced(), &probe_inputs(2.0, 0.0, 0.0));
    assert!((t.norm() / (-1f64).exp() - 1.0).abs() > 0.5);
}

#[test]
fn lambda_reduction_matches_linear_susceptibility() {
    let scheme = reduced();
    let g1 = scheme.gamma_d1();
    let (od, omega_c) = (3.0, 2.0);
    let mut p = SfwmParams::fiber_reference();
    p.od = Some(od);
    p.control_rabi = omega_c * g1;
    p.lambda_as = scheme.wavelength(sfwm::atomic::Line::D1).unwrap();
    let model = SfwmModel::new(&p).unwrap();
    let k_l = 2.0 * std::f64::consts::PI / p.lambda_as * p.length;
    let cfg = SimConfig { duration: 40.0, z_nodes: 41, ..Default::default() };
    for delta in [-1.5, -0.5, 0.0, 0.3, 1.0] {
        let chi = model.chi_as(delta * g1);
        let expect = (C::i() * k_l * ((C::new(1.0, 0.0) + chi).sqrt() - 1.0)).exp();
        let got = transmission(&cfg, &scheme, &probe_inputs(od, omega_c, delta));
        let rel = (got - expect).norm() / expect.norm();
        assert!(rel < 0.05, "δ={delta}: sim {got} vs χ {expect}");
    }
}

#[test]
fn zero_pump_gives_no_gain() {
    let scheme = LevelScheme::default();
    let mut inp = SimInputs::from_scheme(&scheme).unwrap();
    inp.pump_rabi = 0.0;
    let cfg = SimConfig { duration: 5.0, z_nodes: 11, tol: 1e-5, ..Default::default() };
    let r = run_trajectory(&cfg, &scheme, &inp, 0).unwrap();
    let vac = cfg.e_vac * cfg.e_vac;
    let s = r.late_power(Mode::StokesPlus) + r.late_power(Mode::StokesMinus);
    assert!(s < 10.0 * vac, "{s:e}");
    let gen: f64 = r.generated(Mode::AntiStokesPlus).iter().map(|g| g[0].norm_sqr() + g[1].norm_sqr()).sum();
    assert!(gen < 1e-6 * vac, "{gen:e}");
}

#[test]
fn conservation_in_the_full_scheme() {
    let scheme = LevelScheme::default();
    let inp = SimInputs::from_scheme(&scheme).unwrap();
    let cfg = SimConfig { duration: 5.0, z_nodes: 11, ..Default::default() };
    let r = run_trajectory(&cfg, &scheme, &inp, 3).unwrap();
    assert!(r.max_trace_error <= 10.0 * cfg.tol * 5.0);
    assert!(r.max_hermiticity_error <= cfg.tol);
    assert!(r.min_population >= -10.0 * cfg.tol);
}

#[test]
fn trajectories_differ_only_by_seed() {
    let scheme = LevelScheme::default();
    let inp = SimInputs::from_scheme(&scheme).unwrap();
    let cfg = SimConfig { duration: 1.0, z_nodes: 5, tol: 1e-5, trajectories: 2, ..Default::default() };
    let a = run_ensemble(&cfg, &scheme, &inp).unwrap();
    let b = run_ensemble(&cfg, &scheme, &inp).unwrap();
    assert_eq!(a[0].output, b[0].output);
    assert_eq!(a[1].output, b[1].output);
    assert_ne!(a[0].output, a[1].output);
}

#[test]
fn even_node_count_rejected() {
    let scheme = LevelScheme::default();
    let inp = SimInputs::from_scheme(&scheme).unwrap();
    let cfg = SimConfig { z_nodes: 10, ..Default::default() };
    assert!(matches!(run_trajectory(&cfg, &scheme, &inp, 0), Err(Error::Config(_))));
}

fn model(scheme: &LevelScheme) -> BlochModel {
    let (ng, ne) = (scheme.ground_count(), scheme.excited_count());
    BlochModel::new(scheme, vec![0.3; ng], vec![-1.1; ne], scheme.gamma_d1()).unwrap()
}

#[test]
fn undriven_diagonal_ground_state_is_steady() {
    let scheme = LevelScheme::default();
    let m = model(&scheme);
    let mut rho = DensityBlocks::zeros(m.ng, m.ne);
    for i in 0..m.ng {
        rho.gg[i * m.ng + i] = C::new(1.0 / m.ng as f64, 0.0);
    }
    let d = density_rhs(&rho, &Coupling::default(), &m).unwrap();
    assert!(d.to_flat().iter().all(|v| v.norm() == 0.0));
}

#[test]
fn single_excited_population_decays_at_line_rate() {
    let scheme = LevelScheme::default();
    let m = model(&scheme);
    for e in 0..m.ne {
        let mut rho = DensityBlocks::zeros(m.ng, m.ne);
        rho.ee[e * m.ne + e] = C::new(1.0, 0.0);
        let d = density_rhs(&rho, &Coupling::default(), &m).unwrap();
        assert!((d.ee[e * m.ne + e].re + 1.0).abs() < 1e-12);
        assert!(d.trace().norm() < 1e-12);
        let ground_gain: f64 = (0..m.ng).map(|g| d.gg[g * m.ng + g].re).sum();
        assert!((ground_gain - 1.0).abs() < 1e-12);
    }
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
    use rand::Rng;
    let mut m = vec![C::default(); n * n];
    for i in 0..n {
        m[i * n + i] = C::new(rng.random::<f64>(), 0.0);
        for j in i + 1..n {
            let v = C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            m[i * n + j] = v;
            m[j * n + i] = v.conj();
        }
    }
    m
}

#[test]
fn rhs_preserves_hermiticity_and_trace() {
    use rand::Rng;
    let scheme = LevelScheme::default();
    let m = model(&scheme);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let mut rho = DensityBlocks::zeros(m.ng, m.ne);
        rho.gg = random_hermitian(m.ng, &mut rng);
        rho.ee = random_hermitian(m.ne, &mut rng);
        rho.eg = (0..m.ne * m.ng).map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>())).collect();
        let coupling = Coupling {
            entries: (0..12)
                .map(|_| {
                    let e = rng.random_range(0..m.ne);
                    let g = rng.random_range(0..m.ng);
                    (e, g, C::new(rng.random::<f64>(), rng.random::<f64>() - 0.5))
                })
                .collect(),
        };
        let d = density_rhs(&rho, &coupling, &m).unwrap();
        assert!(d.hermiticity_error() < 1e-12);
        assert!(d.trace().norm() < 1e-12);
    }
}

#[test]
fn rhs_rejects_shape_mismatch() {
    let m = model(&LevelScheme::default());
    let rho = DensityBlocks::zeros(3, 3);
    assert!(matches!(density_rhs(&rho, &Coupling::default(), &m), Err(Error::Config(_))));
}

#[test]
fn vacuum_seed_statistics() {
    let (gamma, e_vac, dt) = (6.06 / 5.75, 1e-5, 0.05);
    let n_traj = 10_000;
    let lag = 20;
    let steps = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut var, mut cov) = (0.0, C::default());
    for _ in 0..n_traj {
        let mut e = [C::default(); 2];
        let mut early = C::default();
        for k in 0..steps + lag {
            e = vacuum_seed_step(e, dt, gamma, e_vac, &mut rng);
            if k + 1 == steps {
                early = e[0];
            }
        }
        var += e[0].norm_sqr() + e[1].norm_sqr();
        cov += e[0] * early.conj();
    }
    let var = var / (2 * n_traj) as f64;
    assert!((var / (e_vac * e_vac) - 1.0).abs() < 0.05, "{var:e}");
    // Field correlation decays as e^{−Γτ/2}.
    let rho = cov.re / n_traj as f64 / (e_vac * e_vac);
    let tau_c = -(lag as f64 * dt) / rho.ln();
    assert!((tau_c * gamma / 2.0 - 1.0).abs() < 0.1, "{tau_c}");
}

#[test]
fn seed_starts_at_zero_and_is_continuous() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let e = vacuum_seed_step([C::default(); 2], 1e-12, 1.0, 1e-5, &mut rng);
    assert!(e[0].norm() < 1e-10 && e[1].norm() < 1e-10);
}

struct Oscillator;

impl OdeSystem for Oscillator {
    fn dim(&self) -> usize {
        2
    }
    fn rhs(&mut self, _t: f64, y: &[C], dy: &mut [C]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }
}

#[test]
fn oscillator_amplitude_drift() {
    let tol = 1e-9;
    let mut km = KuttaMerson::new(2, StepControl { tol, ..Default::default() });
    let mut y = [C::new(1.0, 0.0), C::default()];
    let t_end = 100.0 * 2.0 * std::f64::consts::PI;
    km.integrate(&mut Oscillator, 0.0, t_end, &mut y, 0.01).unwrap();
    let amp = (y[0].norm_sqr() + y[1].norm_sqr()).sqrt();
    assert!((amp - 1.0).abs() <= 100.0 * tol, "{}", amp - 1.0);
}

#[test]
fn simpson_fourth_order() {
    let f = |x: f64| (2.0 * x).sin() + x * x;
    let exact = |x: f64| (1.0 - (2.0 * x).cos()) / 2.0 + x.powi(3) / 3.0;
    let err = |n: usize| {
        let h = 2.0 / (n - 1) as f64;
        let v: Vec<C> = (0..n).map(|j| C::new(f(j as f64 * h), 0.0)).collect();
        let mut out = vec![C::default(); n];
        simpson::cumulative(&v, h, &mut out);
        (0..n).map(|j| (out[j].re - exact(j as f64 * h)).abs()).fold(0.0, f64::max)
    };
    let slope = (err(21) / err(41)).log2();
    assert!((slope - 4.0).abs() < 0.3, "{slope}");
    assert!(simpson::check_nodes(4).is_err() && simpson::check_nodes(1).is_err());
}

#[test]
fn extinction_examples() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let circ = vec![[C::new(1.0, 0.0), C::default()]; 4];
    assert!(polarization_extinction(&circ, Polarization::H, 60.0).unwrap().abs() < 1e-12);
    let v = Polarization::V.spherical();
    assert_eq!(polarization_extinction(&[v], Polarization::H, 60.0).unwrap(), 60.0);
    let h = Polarization::H.spherical();
    assert_eq!(polarization_extinction(&[h], Polarization::H, 60.0).unwrap(), -60.0);
    assert!(matches!(polarization_extinction(&[[C::default(); 2]], Polarization::H, 60.0), Err(Error::Undefined(_))));
    assert!((Polarization::H.spherical()[0].norm() - s).abs() < 1e-15);
}
