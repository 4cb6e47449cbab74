//! Adaptive Kutta–Merson integrator on complex state vectors.
//!
//! ```text
//! k1 = h f(t,       y)
//! k2 = h f(t + h/3, y + k1/3)
//! k3 = h f(t + h/3, y + k1/6 + k2/6)
//! k4 = h f(t + h/2, y + k1/8 + 3k3/8)
//! k5 = h f(t + h,   y + k1/2 − 3k3/2 + 2k4)
//! y' = y + k1/6 + 2k4/3 + k5/6
//! err = (2k1 − 9k3 + 8k4 − k5)/30
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[C], dy: &mut [C]);
    /// Scaled size of a local error estimate; a step is accepted iff ≤ tol.
    fn error_norm(&mut self, err: &[C]) -> f64 {
        max_abs(err)
    }
}

pub fn max_abs(v: &[C]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.re.abs()).max(z.im.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub safety: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { tol: 1e-6, dt_min: 1e-9, dt_max: f64::INFINITY, safety: 0.9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub error: f64,
    pub dt_next: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_calls: usize,
}

pub struct KuttaMerson {
    pub control: StepControl,
    k: [Vec<C>; 5],
    tmp: Vec<C>,
    err: Vec<C>,
    pub stats: Stats,
}

impl KuttaMerson {
    pub fn new(dim: usize, control: StepControl) -> Self {
        let z = || vec![C::default(); dim];
        Self { control, k: [z(), z(), z(), z(), z()], tmp: z(), err: z(), stats: Stats::default() }
    }

    fn stage<S: OdeSystem>(&mut self, sys: &mut S, t: f64, h: f64, idx: usize) {
        sys.rhs(t, &self.tmp, &mut self.k[idx]);
        for v in self.k[idx].iter_mut() {
            *v *= h;
        }
        self.stats.rhs_calls += 1;
    }

    /// Attempt one step of size `h`; on acceptance `y` is advanced.
    pub fn step<S: OdeSystem>(&mut self, sys: &mut S, t: f64, y: &mut [C], h: f64) -> Result<StepOutcome> {
        let n = y.len();
        self.tmp.copy_from_slice(y);
        self.stage(sys, t, h, 0);
        for i in 0..n {
            self.tmp[i] = y[i] + self.k[0][i] / 3.0;
        }
        self.stage(sys, t + h / 3.0, h, 1);
        for i in 0..n {
            self.tmp[i] = y[i] + (self.k[0][i] + self.k[1][i]) / 6.0;
        }
        self.stage(sys, t + h / 3.0, h, 2);
        for i in 0..n {
            self.tmp[i] = y[i] + self.k[0][i] * 0.125 + self.k[2][i] * 0.375;
        }
        self.stage(sys, t + 0.5 * h, h, 3);
        for i in 0..n {
            self.tmp[i] = y[i] + self.k[0][i] * 0.5 - self.k[2][i] * 1.5 + self.k[3][i] * 2.0;
        }
        self.stage(sys, t + h, h, 4);
        for i in 0..n {
            let [k1, _, k3, k4, k5] = [self.k[0][i], self.k[1][i], self.k[2][i], self.k[3][i], self.k[4][i]];
            self.err[i] = (k1 * 2.0 - k3 * 9.0 + k4 * 8.0 - k5) / 30.0;
        }
        let error = sys.error_norm(&self.err);
        let c = self.control;
        let factor = if error == 0.0 { 5.0 } else { (c.safety * (c.tol / error).powf(0.2)).clamp(0.2, 5.0) };
        let dt_next = (h * factor).min(c.dt_max);
        let accepted = error <= c.tol;
        if accepted {
            for i in 0..n {
                y[i] += self.k[0][i] / 6.0 + self.k[3][i] * (2.0 / 3.0) + self.k[4][i] / 6.0;
            }
            self.stats.accepted += 1;
        } else {
            self.stats.rejected += 1;
            if dt_next < c.dt_min {
                return Err(Error::Stiffness { t, dt: dt_next, min: c.dt_min });
            }
        }
        Ok(StepOutcome { accepted, error, dt_next })
    }

    /// Integrate from `t0` to `t1`, returning the last proposed step.
    pub fn integrate<S: OdeSystem>(&mut self, sys: &mut S, t0: f64, t1: f64, y: &mut [C], dt: f64) -> Result<f64> {
        let mut t = t0;
        let mut h = dt.min(self.control.dt_max);
        while t < t1 {
            let hs = h.min(t1 - t);
            let o = self.step(sys, t, y, hs)?;
            if o.accepted {
                t += hs;
            }
            h = o.dt_next;
        }
        Ok(h)
    }
}

/// One Kutta–Merson attempt on a closure; returns `(y_new, dt_next, error)`.
/// `y_new` equals the input when the step is rejected.
pub fn kutta_merson_step<F>(f: F, t: f64, y: &[C], dt: f64, tol: f64) -> Result<(Vec<C>, f64, f64)>
where
    F: FnMut(f64, &[C], &mut [C]),
{
    struct Wrap<F>(F, usize);
    impl<F: FnMut(f64, &[C], &mut [C])> OdeSystem for Wrap<F> {
        fn dim(&self) -> usize {
            self.1
        }
        fn rhs(&mut self, t: f64, y: &[C], dy: &mut [C]) {
            (self.0)(t, y, dy)
        }
    }
    let mut sys = Wrap(f, y.len());
    let mut km = KuttaMerson::new(y.len(), StepControl { tol, ..Default::default() });
    let mut out = y.to_vec();
    let o = km.step(&mut sys, t, &mut out, dt)?;
    Ok((out, o.dt_next, o.error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_solution_has_zero_error() {
        let y = [C::new(2.0, -1.0)];
        let (out, next, err) = kutta_merson_step(|_, _, dy| dy[0] = C::default(), 0.0, &y, 0.1, 1e-8).unwrap();
        assert_eq!(out, y);
        assert_eq!(err, 0.0);
        assert!(next > 0.1);
    }

    #[test]
    fn exponential_decay_to_one() {
        struct Decay;
        impl OdeSystem for Decay {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&mut self, _: f64, y: &[C], dy: &mut [C]) {
                dy[0] = -y[0];
            }
        }
        let tol = 1e-8;
        let mut km = KuttaMerson::new(1, StepControl { tol, ..Default::default() });
        let mut y = [C::new(1.0, 0.0)];
        km.integrate(&mut Decay, 0.0, 1.0, &mut y, 0.01).unwrap();
        // Local control bounds the global error by the step count.
        let d = (y[0].re - (-1f64).exp()).abs();
        assert!(d < tol * km.stats.accepted as f64, "{d:e} {:?}", km.stats);
    }

    #[test]
    fn stiffness_reported() {
        let mut km = KuttaMerson::new(1, StepControl { tol: 1e-12, dt_min: 0.5, dt_max: 1.0, safety: 0.9 });
        struct Fast;
        impl OdeSystem for Fast {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&mut self, _: f64, y: &[C], dy: &mut [C]) {
                dy[0] = y[0] * -1e3;
            }
        }
        let mut y = [C::new(1.0, 0.0)];
        assert!(matches!(km.integrate(&mut Fast, 0.0, 1.0, &mut y, 1.0), Err(Error::Stiffness { .. })));
    }
}
