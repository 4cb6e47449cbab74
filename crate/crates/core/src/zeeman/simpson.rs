//! Cumulative Simpson integration on a uniform grid with an odd node count.

use num_complex::Complex64;

use crate::error::{config, Result};

pub fn check_nodes(n: usize) -> Result<()> {
    if n < 3 || n % 2 == 0 {
        return Err(config(format!("Simpson needs an odd node count ≥ 3, got {n}")));
    }
    Ok(())
}

/// `out[j] = ∫_{x_0}^{x_j} f dx`.
///
/// Even nodes use composite Simpson; odd nodes add the half-panel
/// `h/12·(5f₀ + 8f₁ − f₂)` to the preceding even node.
pub fn cumulative(f: &[Complex64], h: f64, out: &mut [Complex64]) {
    let n = f.len();
    debug_assert!(n >= 3 && n % 2 == 1 && out.len() == n);
    out[0] = Complex64::new(0.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut j = 0;
    while j + 2 < n {
        let (f0, f1, f2) = (f[j], f[j + 1], f[j + 2]);
        out[j + 1] = acc + (f0 * 5.0 + f1 * 8.0 - f2) * (h / 12.0);
        acc += (f0 + f1 * 4.0 + f2) * (h / 3.0);
        out[j + 2] = acc;
        j += 2;
    }
}

/// Composite Simpson weights for the full integral.
pub fn weights(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let w = if j == 0 || j == n - 1 {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_exact_on_even_nodes() {
        let n = 11;
        let h = 0.1;
        let f: Vec<Complex64> = (0..n).map(|j| Complex64::new((j as f64 * h).powi(3), 0.0)).collect();
        let mut out = vec![Complex64::default(); n];
        cumulative(&f, h, &mut out);
        for j in (0..n).step_by(2) {
            let x = j as f64 * h;
            assert!((out[j].re - x.powi(4) / 4.0).abs() < 1e-14);
        }
        let w: f64 = weights(n, h).iter().zip(&f).map(|(w, f)| w * f.re).sum();
        assert!((w - 0.25).abs() < 1e-14);
    }

    #[test]
    fn quadratic_exact_on_odd_nodes() {
        let n = 7;
        let h = 0.5;
        let f: Vec<Complex64> = (0..n).map(|j| Complex64::new((j as f64 * h).powi(2), 1.0)).collect();
        let mut out = vec![Complex64::default(); n];
        cumulative(&f, h, &mut out);
        for (j, o) in out.iter().enumerate() {
            let x = j as f64 * h;
            assert!((o.re - x.powi(3) / 3.0).abs() < 1e-12);
            assert!((o.im - x).abs() < 1e-12);
        }
    }

    #[test]
    fn even_counts_rejected() {
        assert!(check_nodes(4).is_err());
        assert!(check_nodes(1).is_err());
        assert!(check_nodes(61).is_ok());
    }
}
