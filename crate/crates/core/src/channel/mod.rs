//! Multipath CSI model for a ULA-to-ULA link.
//!
//! Entry `(n, m)` of the CSI on subcarrier `k` is
//!
//! ```text
//! H[n,m] = Σ_l α_l · exp(−i2π/λ_k · (sin φ_l·n·Δd_rx + sin ρ_l·m·Δd_tx)) · exp(−i2π d_l f_k / c)
//! ```
//!
//! (zero-based `n`, `m`), optionally plus i.i.d. `CN(0, δ²)` noise per entry.

mod scenario;

pub use scenario::{BasePose, Reflector, Scenario, Tap, UdPose};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{complex_normal, seeded_rng, ComplexMatrix};
use crate::SPEED_OF_LIGHT;

pub const DEFAULT_CENTER_FREQUENCY: f64 = 5.825e9;
pub const DEFAULT_SUBCARRIER_SPACING: f64 = 312.5e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    /// Receive antennas at the user device (N).
    pub n_rx: usize,
    /// Transmit antennas at the access point (M).
    pub n_tx: usize,
    /// Rx element spacing, meters.
    pub rx_spacing: f64,
    /// Tx element spacing, meters.
    pub tx_spacing: f64,
}

impl ArrayGeometry {
    pub fn new(n_rx: usize, n_tx: usize, rx_spacing: f64, tx_spacing: f64) -> Result<Self> {
        let g = Self {
            n_rx,
            n_tx,
            rx_spacing,
            tx_spacing,
        };
        g.validate()?;
        Ok(g)
    }

    /// Half-wavelength spacing at `center_frequency` on both sides.
    pub fn half_wavelength(n_rx: usize, n_tx: usize, center_frequency: f64) -> Result<Self> {
        let d = SPEED_OF_LIGHT / center_frequency / 2.0;
        Self::new(n_rx, n_tx, d, d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rx < 1 {
            return Err(Error::invalid("n_rx must be >= 1"));
        }
        if self.n_tx < 2 {
            return Err(Error::invalid("n_tx must be >= 2 for beamforming"));
        }
        if !(self.rx_spacing > 0.0 && self.tx_spacing > 0.0)
            || !self.rx_spacing.is_finite()
            || !self.tx_spacing.is_finite()
        {
            return Err(Error::invalid("antenna spacings must be positive"));
        }
        Ok(())
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Path {
    pub gain: Complex64,
    /// Path length, meters.
    pub distance: f64,
    /// Angle of arrival at the Rx array, radians.
    pub aoa: f64,
    /// Angle of departure from the Tx array, radians.
    pub aod: f64,
}

impl Path {
    pub fn new(gain: Complex64, distance: f64, aoa: f64, aod: f64) -> Result<Self> {
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::invalid(format!("path distance must be > 0, got {distance}")));
        }
        let visible = -PI / 2.0 - 1e-12..=PI / 2.0 + 1e-12;
        if !visible.contains(&aoa) || !visible.contains(&aod) {
            return Err(Error::invalid("path angles must lie in [-pi/2, pi/2]"));
        }
        if !gain.re.is_finite() || !gain.im.is_finite() {
            return Err(Error::invalid("path gain must be finite"));
        }
        Ok(Self {
            gain,
            distance,
            aoa,
            aod,
        })
    }
}

/// Single line-of-sight path.
pub fn los_path(aod: f64, aoa: f64, distance: f64, gain: Complex64) -> Result<Path> {
    Path::new(gain, distance, aoa, aod)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubcarrierGrid {
    /// Hz.
    pub center_frequency: f64,
    /// Hz.
    pub spacing: f64,
    pub n_subcarriers: usize,
}

impl Default for SubcarrierGrid {
    fn default() -> Self {
        Self {
            center_frequency: DEFAULT_CENTER_FREQUENCY,
            spacing: DEFAULT_SUBCARRIER_SPACING,
            n_subcarriers: 1,
        }
    }
}

impl SubcarrierGrid {
    pub fn new(center_frequency: f64, spacing: f64, n_subcarriers: usize) -> Result<Self> {
        let g = Self {
            center_frequency,
            spacing,
            n_subcarriers,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers < 1 {
            return Err(Error::invalid("n_subcarriers must be >= 1"));
        }
        if !(self.spacing >= 0.0) {
            return Err(Error::invalid("subcarrier spacing must be >= 0"));
        }
        let lowest = self.frequency_unchecked(1);
        if !(lowest > 0.0) || !self.center_frequency.is_finite() {
            return Err(Error::invalid("all subcarrier frequencies must be positive"));
        }
        Ok(())
    }

    fn frequency_unchecked(&self, k: usize) -> f64 {
        let offset = k as f64 - (self.n_subcarriers as f64 + 1.0) / 2.0;
        self.center_frequency + offset * self.spacing
    }

    /// Frequency of subcarrier `k ∈ 1..=n_subcarriers`, symmetric around the
    /// center frequency.
    pub fn frequency(&self, k: usize) -> Result<f64> {
        if k < 1 || k > self.n_subcarriers {
            return Err(Error::Index(format!(
                "subcarrier {k} outside 1..={}",
                self.n_subcarriers
            )));
        }
        Ok(self.frequency_unchecked(k))
    }

    pub fn wavelength(&self, k: usize) -> Result<f64> {
        Ok(SPEED_OF_LIGHT / self.frequency(k)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Per-entry noise power δ².
    pub variance: f64,
    pub seed: u64,
}

/// Noiseless CSI on subcarrier `k` (1-based).
pub fn csi_mean(
    paths: &[Path],
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    k: usize,
) -> Result<ComplexMatrix> {
    let f = grid.frequency(k)?;
    let lambda = SPEED_OF_LIGHT / f;
    let (n_rx, n_tx) = (geom.n_rx, geom.n_tx);
    let mut h = ComplexMatrix::zeros(n_rx, n_tx);
    for path in paths {
        let delay = Complex64::from_polar(1.0, -2.0 * PI * path.distance * f / SPEED_OF_LIGHT);
        let base = path.gain * delay;
        let rx_step = path.aoa.sin() * geom.rx_spacing;
        let tx_step = path.aod.sin() * geom.tx_spacing;
        for n in 0..n_rx {
            for m in 0..n_tx {
                let arg = -2.0 * PI / lambda * (rx_step * n as f64 + tx_step * m as f64);
                h[(n, m)] += base * Complex64::from_polar(1.0, arg);
            }
        }
    }
    Ok(h)
}

/// `mean + ε` with i.i.d. `CN(0, δ²)` per entry.
pub fn csi_sample(mean: &ComplexMatrix, noise: &NoiseSpec) -> Result<ComplexMatrix> {
    let mut rng = seeded_rng(noise.seed);
    add_noise(mean, noise.variance, &mut rng)
}

/// Same as [`csi_sample`] but drawing from a caller-owned RNG, for Monte
/// Carlo loops that take many draws from one stream.
pub fn add_noise<R: rand::Rng + ?Sized>(
    mean: &ComplexMatrix,
    variance: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::invalid(format!("noise variance must be >= 0, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(mean.clone());
    }
    let mut out = mean.clone();
    for z in out.as_mut_slice() {
        *z += complex_normal(rng, variance);
    }
    Ok(out)
}

/// Per-entry noise power giving `snr_db` relative to the mean entry power
/// `‖H‖²_F / (N·M)`.
pub fn noise_var_for_snr(mean: &ComplexMatrix, snr_db: f64) -> Result<f64> {
    if mean.is_zero() {
        return Err(Error::invalid("SNR is undefined for an all-zero channel"));
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid("snr_db must be finite"));
    }
    let power = mean.frobenius_norm().powi(2) / (mean.rows() * mean.cols()) as f64;
    Ok(power / 10f64.powf(snr_db / 10.0))
}

/// On-disk CSI dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsiRecord {
    pub geometry: ArrayGeometry,
    pub grid: SubcarrierGrid,
    pub k: usize,
    pub matrix: ComplexMatrix,
}

impl CsiRecord {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.grid.validate()?;
        self.grid.frequency(self.k)?;
        if self.matrix.shape() != (self.geometry.n_rx, self.geometry.n_tx) {
            return Err(Error::invalid(format!(
                "matrix is {:?} but geometry is {}x{}",
                self.matrix.shape(),
                self.geometry.n_rx,
                self.geometry.n_tx
            )));
        }
        Ok(())
    }
}
