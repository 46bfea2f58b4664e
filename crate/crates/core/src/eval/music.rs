//! MUSIC AoD estimation from BFI and its Monte-Carlo variance.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bfi::{csi_to_bfi, givens_reconstruct, Bfi};
use crate::channel::{add_noise, ArrayGeometry, Scenario};
use crate::crb::{position_crb, CrbConfig, ParamKind, PositionParams};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeded_rng, ComplexMatrix};

/// AoD grid in radians: `step_deg` spacing over `[−90°, 90°]`.
pub fn aod_grid(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0) || step_deg > 180.0 {
        return Err(Error::invalid("grid step must be in (0, 180] degrees"));
    }
    let n = (180.0 / step_deg).floor() as usize;
    Ok((0..=n).map(|i| (-90.0 + i as f64 * step_deg).to_radians()).collect())
}

/// Transmit ULA steering vector as seen by the right singular vectors:
/// `a[m] = exp(+i2π sin ρ · m Δ_tx / λ)`.
fn tx_steering(rho: f64, m_tx: usize, spacing: f64, lambda: f64) -> Vec<Complex64> {
    let step = 2.0 * PI * rho.sin() * spacing / lambda;
    (0..m_tx).map(|m| Complex64::from_polar(1.0, step * m as f64)).collect()
}

/// MUSIC pseudo-spectrum `1/‖(I − V_s V_s*) a(ρ)‖²` with the leading `rank`
/// columns of `Ṽ` as signal subspace.
pub fn music_spectrum(
    theta: &Bfi,
    grid: &[f64],
    geom: &ArrayGeometry,
    lambda: f64,
    rank: usize,
) -> Result<Vec<f64>> {
    let v = givens_reconstruct(theta)?;
    spectrum_from_steering(&v, grid, geom, lambda, rank)
}

fn spectrum_from_steering(
    v: &ComplexMatrix,
    grid: &[f64],
    geom: &ArrayGeometry,
    lambda: f64,
    rank: usize,
) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid("AoD grid is empty"));
    }
    if rank == 0 || rank > v.cols() {
        return Err(Error::invalid(format!("rank must be in 1..={}", v.cols())));
    }
    if v.rows() != geom.n_tx {
        return Err(Error::invalid("BFI does not match the transmit array"));
    }
    let vs = v.leading_columns(rank);
    Ok(grid
        .iter()
        .map(|&rho| {
            let a = tx_steering(rho, geom.n_tx, geom.tx_spacing, lambda);
            let mut residual = a.clone();
            for c in 0..rank {
                let proj: Complex64 = (0..vs.rows()).map(|m| vs[(m, c)].conj() * a[m]).sum();
                for m in 0..vs.rows() {
                    residual[m] -= vs[(m, c)] * proj;
                }
            }
            let r2: f64 = residual.iter().map(|z| z.norm_sqr()).sum();
            1.0 / r2.max(1e-300)
        })
        .collect())
}

/// Grid argmax of the single-path MUSIC spectrum (first index on ties).
pub fn music_estimate_aod(theta: &Bfi, grid: &[f64], geom: &ArrayGeometry, lambda: f64) -> Result<f64> {
    let p = music_spectrum(theta, grid, geom, lambda, 1)?;
    Ok(grid[argmax(&p)])
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Grid search followed by golden-section refinement within one grid step
/// of the grid maximum.
pub fn music_estimate_aod_refined(
    theta: &Bfi,
    grid: &[f64],
    geom: &ArrayGeometry,
    lambda: f64,
) -> Result<f64> {
    let v = givens_reconstruct(theta)?;
    let p = spectrum_from_steering(&v, grid, geom, lambda, 1)?;
    let i = argmax(&p);
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let f = |rho: f64| spectrum_from_steering(&v, &[rho], geom, lambda, 1).map(|s| s[0]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    Ok(if f(mid)? >= p[i] { mid } else { grid[i] })
}

/// Monte-Carlo settings for [`mc_estimator_variance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MusicMcConfig {
    pub trials: usize,
    pub grid_step_deg: f64,
    /// Refine the grid maximum; without it the estimate is quantized to the
    /// grid and the variance saturates at high SNR.
    pub refine: bool,
    pub subcarrier: usize,
    pub seed: u64,
}

impl Default for MusicMcConfig {
    fn default() -> Self {
        Self {
            trials: 500,
            grid_step_deg: 0.5,
            refine: true,
            subcarrier: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPoint {
    pub snr_db: f64,
    pub mean: f64,
    pub variance: f64,
    /// CRB of the AoD coordinate at this SNR.
    pub crb: f64,
}

/// MUSIC AoD variance over noisy BFI draws at each SNR, paired with the CRB.
/// `x` must contain an `aod` coordinate. Trial `t` at SNR index `s` uses
/// seed `derive_seed(seed, s·trials + t)`.
pub fn mc_estimator_variance(
    scenario: &Scenario,
    x: &PositionParams,
    snrs_db: &[f64],
    mc: &MusicMcConfig,
    crb_cfg: &CrbConfig,
) -> Result<Vec<McPoint>> {
    if mc.trials < 100 {
        return Err(Error::invalid("at least 100 trials are required"));
    }
    let aod_index = x
        .kinds()
        .iter()
        .position(|&k| k == ParamKind::Aod)
        .ok_or_else(|| Error::invalid("position parameters have no aod coordinate"))?;
    let grid = aod_grid(mc.grid_step_deg)?;
    let lambda = scenario.grid.wavelength(mc.subcarrier)?;
    let geom = scenario.geometry;
    let mean_csi = scenario.mean_csi(x, mc.subcarrier)?;

    snrs_db
        .iter()
        .enumerate()
        .map(|(si, &snr)| {
            let s = scenario.clone().with_snr(Some(snr));
            let var = s.noise_variance(&mean_csi)?;
            let estimates: Vec<f64> = (0..mc.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = seeded_rng(derive_seed(mc.seed, (si * mc.trials + t) as u64));
                    let h = add_noise(&mean_csi, var, &mut rng)?;
                    let theta = csi_to_bfi(&h)?;
                    if mc.refine {
                        music_estimate_aod_refined(&theta, &grid, &geom, lambda)
                    } else {
                        music_estimate_aod(&theta, &grid, &geom, lambda)
                    }
                })
                .collect::<Result<_>>()?;
            let n = estimates.len() as f64;
            let mean = estimates.iter().sum::<f64>() / n;
            let variance = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let crb_cfg = CrbConfig {
                seed: derive_seed(crb_cfg.seed, si as u64),
                ..*crb_cfg
            };
            let crb = position_crb(x, &s, mc.subcarrier, &crb_cfg)?.fisher.crb_diag[aod_index];
            Ok(McPoint {
                snr_db: snr,
                mean,
                variance,
                crb,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfi::{givens_decompose, rotate_real_last_row};

    fn single_path(aod: f64) -> (Scenario, Bfi) {
        let s = Scenario::los_only(1, 4).unwrap();
        let h = s.mean_csi(&PositionParams::polar(aod, 0.0, 5.0), 1).unwrap();
        (s, csi_to_bfi(&h).unwrap())
    }

    #[test]
    fn grid_shape() {
        let g = aod_grid(0.5).unwrap();
        assert_eq!(g.len(), 361);
        assert!((g[0] + PI / 2.0).abs() < 1e-15 && (g[360] - PI / 2.0).abs() < 1e-12);
        assert!(aod_grid(0.0).is_err());
    }

    #[test]
    fn noiseless_on_grid_recovery() {
        let grid = aod_grid(0.5).unwrap();
        for deg in [-60.0, -12.5, 0.0, 20.0, 47.5] {
            let (s, theta) = single_path(f64::to_radians(deg));
            let lambda = s.grid.wavelength(1).unwrap();
            let est = music_estimate_aod(&theta, &grid, &s.geometry, lambda).unwrap();
            assert!((est - f64::to_radians(deg)).abs() < 1e-9, "{deg}");
            let fine = music_estimate_aod_refined(&theta, &grid, &s.geometry, lambda).unwrap();
            assert!((fine - f64::to_radians(deg)).abs() < 1e-6, "{deg}");
        }
    }

    #[test]
    fn off_grid_returns_nearest_point() {
        let grid = aod_grid(0.5).unwrap();
        let (s, theta) = single_path(f64::to_radians(10.1));
        let lambda = s.grid.wavelength(1).unwrap();
        let est = music_estimate_aod(&theta, &grid, &s.geometry, lambda).unwrap();
        assert!((est - f64::to_radians(10.0)).abs() < 1e-12);
        let fine = music_estimate_aod_refined(&theta, &grid, &s.geometry, lambda).unwrap();
        assert!((fine - f64::to_radians(10.1)).abs() < 1e-6);
    }

    #[test]
    fn empty_grid_rejected() {
        let (s, theta) = single_path(0.2);
        assert!(music_estimate_aod(&theta, &[], &s.geometry, 0.05).is_err());
    }

    #[test]
    fn spectrum_invariant_to_column_phases() {
        let s = Scenario::default_multipath(2, 4).unwrap();
        let h = s.mean_csi(&PositionParams::cartesian(2.0, 6.0), 1).unwrap();
        let theta = csi_to_bfi(&h).unwrap();
        let v = givens_reconstruct(&theta).unwrap();
        // Arbitrary unit phases per column, then re-canonicalize.
        let mut w = v.clone();
        for j in 0..w.cols() {
            let p = Complex64::from_polar(1.0, 0.7 + 1.3 * j as f64);
            for i in 0..w.rows() {
                w[(i, j)] *= p;
            }
        }
        let theta2 = givens_decompose(&rotate_real_last_row(&w)).unwrap();
        let grid = aod_grid(0.5).unwrap();
        let lambda = s.grid.wavelength(1).unwrap();
        let a = music_spectrum(&theta, &grid, &s.geometry, lambda, 1).unwrap();
        let b = music_spectrum(&theta2, &grid, &s.geometry, lambda, 1).unwrap();
        let rough = spectrum_from_steering(&w, &grid, &s.geometry, lambda, 1).unwrap();
        for ((x, y), z) in a.iter().zip(&b).zip(&rough) {
            assert!((x - y).abs() <= 1e-8 * x.abs());
            assert!((x - z).abs() <= 1e-8 * x.abs());
        }
    }

    #[test]
    fn noiseless_variance_is_zero_and_runs_are_deterministic() {
        let s = Scenario::default_multipath(4, 4).unwrap();
        let x = PositionParams::single(ParamKind::Aod, 0.2);
        let mc = MusicMcConfig { trials: 100, ..Default::default() };
        let cfg = CrbConfig { n_mc: 50, ..Default::default() };
        let a = mc_estimator_variance(&s, &x, &[200.0, 20.0], &mc, &cfg).unwrap();
        assert!(a[0].variance < 1e-16);
        let b = mc_estimator_variance(&s, &x, &[200.0, 20.0], &mc, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
