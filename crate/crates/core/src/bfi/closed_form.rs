//! Closed-form BFI for 2×2 links.
//!
//! Writing `H[n,m] = α_nm · exp(−i2π t_nm)`, the dominant eigenvector of
//! `H*H` gives
//!
//! ```text
//! φ = atan2(α11α12·sin 2π(t11−t12) + α21α22·sin 2π(t21−t22),
//!           α11α12·cos 2π(t11−t12) + α21α22·cos 2π(t21−t22))
//! ψ = ½·atan2(√(4(α11α12)² + 4(α21α22)² + 8α11α12α21α22·cos 2π(t11−t12−t21+t22)),
//!             α11² + α21² − α12² − α22²)
//! ```
//!
//! Only amplitude ratios and phase differences enter, so a common phase or
//! a common positive scale on `H` leaves both angles unchanged.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::givens::wrap_phi;
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// Relative size under which a product or a numerator/denominator pair is
/// treated as exactly zero.
const VANISHING: f64 = 1e-12;

pub fn closed_form_2x2(h: &ComplexMatrix) -> Result<(f64, f64)> {
    if h.shape() != (2, 2) {
        return Err(Error::invalid(format!("expected a 2x2 CSI, got {:?}", h.shape())));
    }
    if !h.is_finite() {
        return Err(Error::invalid("CSI contains non-finite entries"));
    }
    let amp = |n: usize, m: usize| h[(n, m)].norm();
    // t = −∠h / 2π, so 2π·(t_a − t_b) = ∠h_b − ∠h_a.
    let turn = |n: usize, m: usize| -h[(n, m)].arg() / (2.0 * PI);
    let (a11, a12, a21, a22) = (amp(0, 0), amp(0, 1), amp(1, 0), amp(1, 1));
    let (t11, t12, t21, t22) = (turn(0, 0), turn(0, 1), turn(1, 0), turn(1, 1));
    let p1 = a11 * a12;
    let p2 = a21 * a22;
    let scale = a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22;

    let d1 = 2.0 * PI * (t11 - t12);
    let d2 = 2.0 * PI * (t21 - t22);
    let num = p1 * d1.sin() + p2 * d2.sin();
    let den = p1 * d1.cos() + p2 * d2.cos();
    if num.hypot(den) <= VANISHING * scale {
        return Err(Error::degenerate(format!(
            "phi is 0/0: cross products a11*a12 = {p1:.3e}, a21*a22 = {p2:.3e} cancel or vanish"
        )));
    }
    let phi = wrap_phi(num.atan2(den));

    let inner = 4.0 * p1 * p1
        + 4.0 * p2 * p2
        + 8.0 * p1 * p2 * (2.0 * PI * (t11 - t12 - t21 + t22)).cos();
    let psi_num = inner.max(0.0).sqrt();
    let psi_den = a11 * a11 + a21 * a21 - a12 * a12 - a22 * a22;
    if psi_num.hypot(psi_den) <= VANISHING * scale {
        return Err(Error::degenerate(
            "psi is 0/0: repeated singular values (equal column powers, orthogonal columns)",
        ));
    }
    let psi = (psi_num.atan2(psi_den) / 2.0).clamp(0.0, PI / 2.0);
    Ok((phi, psi))
}

/// 2×2 CSI where transmit antenna 1 is at distance `d` from both receive
/// antennas and transmit antenna 2 at distance `d_prime` from both.
///
/// With `path_loss = false` all amplitudes are 1, which gives `ψ = π/4` and
/// `φ = 2π(d − d′)/λ mod 2π`. With `path_loss = true` amplitudes fall off as
/// `1/distance`, which gives `tan 2ψ = 2 / (d′/d − d/d′)`.
pub fn symmetric_link_csi(d: f64, d_prime: f64, lambda: f64, path_loss: bool) -> Result<ComplexMatrix> {
    if !(d > 0.0 && d_prime > 0.0 && lambda > 0.0) {
        return Err(Error::invalid("distances and wavelength must be positive"));
    }
    let entry = |dist: f64| {
        let a = if path_loss { 1.0 / dist } else { 1.0 };
        Complex64::from_polar(a, -2.0 * PI * dist / lambda)
    };
    Ok(ComplexMatrix::from_rows(&[
        [entry(d), entry(d_prime)],
        [entry(d), entry(d_prime)],
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfi::csi_to_bfi;
    use crate::numerics::random_complex_gaussian;

    fn periodic_close(a: f64, b: f64, period: f64, tol: f64) -> bool {
        let d = (a - b).rem_euclid(period);
        d.min(period - d) < tol
    }

    #[test]
    fn matches_pipeline_on_random_csi() {
        for seed in 0..1000 {
            let h = random_complex_gaussian(2, 2, seed);
            let (phi, psi) = closed_form_2x2(&h).unwrap();
            let b = csi_to_bfi(&h).unwrap().values();
            assert!(periodic_close(phi, b[0], 2.0 * PI, 1e-9), "seed {seed}");
            assert!(periodic_close(psi, b[1], PI, 1e-9), "seed {seed}");
        }
    }

    #[test]
    fn equal_gain_link() {
        let lambda = 0.0515;
        let (d, dp) = (5.0, 5.013);
        let h = symmetric_link_csi(d, dp, lambda, false).unwrap();
        let (phi, psi) = closed_form_2x2(&h).unwrap();
        assert!((psi - PI / 4.0).abs() < 1e-12);
        let expect = (2.0 * PI * (d - dp) / lambda).rem_euclid(2.0 * PI);
        assert!(periodic_close(phi, expect, 2.0 * PI, 1e-9));
    }

    #[test]
    fn path_loss_link() {
        let lambda = 0.0515;
        let (d, dp) = (5.0, 6.3);
        let h = symmetric_link_csi(d, dp, lambda, true).unwrap();
        let (_, psi) = closed_form_2x2(&h).unwrap();
        let expect = (2.0 / (dp / d - d / dp)).atan() / 2.0;
        assert!((psi - expect).abs() < 1e-12);
    }

    #[test]
    fn invariant_to_common_phase_and_scale() {
        let h = random_complex_gaussian(2, 2, 42);
        let base = closed_form_2x2(&h).unwrap();
        let rotated = closed_form_2x2(&h.scale(Complex64::from_polar(1.0, 1.234))).unwrap();
        let scaled = closed_form_2x2(&h.scale(Complex64::new(7.5, 0.0))).unwrap();
        for other in [rotated, scaled] {
            assert!(periodic_close(base.0, other.0, 2.0 * PI, 1e-12));
            assert!((base.1 - other.1).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_products_are_degenerate() {
        let h = ComplexMatrix::diag_real(&[2.0, 1.0]);
        let err = closed_form_2x2(&h).unwrap_err();
        assert!(err.is_degenerate());
        assert!(err.to_string().contains("a11*a12"));
        assert!(closed_form_2x2(&ComplexMatrix::identity(2, 3)).is_err());
    }
}
