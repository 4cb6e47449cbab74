//! Ornstein–Uhlenbeck imitation of vacuum fluctuations at the input face.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Unit-variance circular complex Gaussian.
pub fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `E ← E·e^{−Γδt/2} + ν·E_vac·√(1 − e^{−Γδt})` for both σ± amplitudes.
///
/// Stationary variance `E_vac²`; the intensity decorrelates at rate `Γ`.
pub fn vacuum_seed_step<R: Rng>(
    prev: [Complex64; 2],
    dt: f64,
    gamma: f64,
    e_vac: f64,
    rng: &mut R,
) -> [Complex64; 2] {
    let decay = (-0.5 * gamma * dt).exp();
    let kick = e_vac * (1.0 - (-gamma * dt).exp()).max(0.0).sqrt();
    [
        prev[0] * decay + complex_gaussian(rng) * kick,
        prev[1] * decay + complex_gaussian(rng) * kick,
    ]
}
