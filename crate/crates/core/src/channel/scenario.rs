use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{csi_mean, noise_var_for_snr, ArrayGeometry, Path, SubcarrierGrid};
use crate::crb::{ParamKind, PositionParams};
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, ComplexMatrix};
use crate::SPEED_OF_LIGHT;

/// Point scatterer in the AP-centered plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reflector {
    pub x: f64,
    pub y: f64,
    /// Complex reflection coefficient applied on top of free-space loss.
    pub coefficient: Complex64,
}

/// Multipath component defined relative to the LoS path, in the style of
/// tapped-delay cluster models: a fixed excess path length, a fixed
/// departure direction at the AP and a fixed arrival direction in the room
/// frame. Unlike a [`Reflector`], its phase relative to the LoS path does
/// not change as the user device moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tap {
    /// Extra path length over the LoS path, meters.
    pub excess: f64,
    /// Departure angle at the AP, radians from broadside.
    pub aod: f64,
    /// Direction the wave travels on arrival, radians from +x.
    pub arrival_heading: f64,
    /// Complex coefficient applied on top of free-space loss.
    pub coefficient: Complex64,
}

/// Position and orientation of the user device.
///
/// The AP array lies on the x axis at the origin with broadside +y. The UD
/// array axis points along `axis_angle` (radians from +x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UdPose {
    pub position: [f64; 2],
    pub axis_angle: f64,
}

/// Reference pose in polar coordinates (default: AoD 0, AoA 0, 5 m in
/// front of the AP). `rear` places it behind the AP array (y < 0); polar
/// parameters are then interpreted in that half-plane too.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasePose {
    pub aod: f64,
    pub aoa: f64,
    pub distance: f64,
    #[serde(default)]
    pub rear: bool,
}

impl BasePose {
    /// Pose at `(x, y)` with the UD array parallel to the AP array.
    pub fn at_point(x: f64, y: f64) -> Result<Self> {
        let distance = x.hypot(y);
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::invalid(format!("invalid point ({x}, {y})")));
        }
        let aod = clamp_asin(x / distance);
        Ok(Self {
            aod,
            aoa: aod,
            distance,
            rear: y < 0.0,
        })
    }

    fn sign(&self) -> f64 {
        if self.rear {
            -1.0
        } else {
            1.0
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.distance * self.aod.sin(), self.sign() * self.distance * self.aod.cos()]
    }
}

impl Default for BasePose {
    fn default() -> Self {
        Self {
            aod: 0.0,
            aoa: 0.0,
            distance: 5.0,
            rear: false,
        }
    }
}

/// Geometric channel scenario: array geometry, subcarriers, an optional LoS
/// path and a fixed set of point reflectors. Maps user positions to path
/// lists and CSI.
///
/// Path gains follow free-space amplitude loss `λ_c / (4π d)`; reflected
/// paths additionally carry the reflector coefficient. Noise is set per
/// position from `snr_db`, i.e. the AP adapts its power to hold a fixed SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    #[serde(default)]
    pub grid: SubcarrierGrid,
    #[serde(default = "yes")]
    pub los: bool,
    #[serde(default)]
    pub reflectors: Vec<Reflector>,
    #[serde(default)]
    pub taps: Vec<Tap>,
    /// `None` means noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub base: BasePose,
}

struct ClusterDefaults {
    count: usize,
    r_min: f64,
    r_max: f64,
    magnitude: f64,
    seed: u64,
}

const DEFAULT_CLUSTER: ClusterDefaults = ClusterDefaults {
    count: 6,
    r_min: 3.0,
    r_max: 15.0,
    magnitude: 1.0,
    seed: 7,
};

fn yes() -> bool {
    true
}

impl Scenario {
    /// LoS-only scenario with half-wavelength arrays at the default carrier,
    /// one subcarrier and 20 dB SNR.
    pub fn los_only(n_rx: usize, n_tx: usize) -> Result<Self> {
        let grid = SubcarrierGrid::default();
        Ok(Self {
            geometry: ArrayGeometry::half_wavelength(n_rx, n_tx, grid.center_frequency)?,
            grid,
            los: true,
            reflectors: Vec::new(),
            taps: Vec::new(),
            snr_db: Some(20.0),
            base: BasePose::default(),
        })
    }

    /// LoS-dominant multipath scenario used as the default sensing
    /// environment: LoS plus a fixed, seeded cluster of weak reflectors.
    /// Without scatterers the channel is rank one and the BFI of every
    /// column beyond the first is pure noise.
    pub fn default_multipath(n_rx: usize, n_tx: usize) -> Result<Self> {
        Self::los_only(n_rx, n_tx)?.with_random_cluster(
            DEFAULT_CLUSTER.count,
            DEFAULT_CLUSTER.r_min,
            DEFAULT_CLUSTER.r_max,
            DEFAULT_CLUSTER.magnitude,
            DEFAULT_CLUSTER.seed,
        )
    }

    /// LoS plus a cluster of `count` reflectors placed uniformly over the
    /// annulus `r_min..r_max` around the AP, each with coefficient magnitude
    /// `magnitude` and a uniform random phase.
    pub fn with_random_cluster(
        mut self,
        count: usize,
        r_min: f64,
        r_max: f64,
        magnitude: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(r_min > 0.0 && r_max >= r_min) {
            return Err(Error::invalid("cluster radii must satisfy 0 < r_min <= r_max"));
        }
        let mut rng = seeded_rng(seed);
        for _ in 0..count {
            let u: f64 = rng.random();
            // Uniform in area.
            let r = (r_min * r_min + u * (r_max * r_max - r_min * r_min)).sqrt();
            let angle = rng.random_range(0.0..2.0 * PI);
            let phase = rng.random_range(0.0..2.0 * PI);
            self.reflectors.push(Reflector {
                x: r * angle.cos(),
                y: r * angle.sin(),
                coefficient: Complex64::from_polar(magnitude, phase),
            });
        }
        Ok(self)
    }

    /// LoS plus `count` taps with excess lengths uniform in
    /// `excess_min..excess_max`, uniform departure angles in `[-π/2, π/2]`,
    /// uniform arrival headings and coefficients of magnitude `magnitude`
    /// with uniform random phase.
    pub fn with_random_taps(
        mut self,
        count: usize,
        excess_min: f64,
        excess_max: f64,
        magnitude: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(excess_min > 0.0 && excess_max >= excess_min) {
            return Err(Error::invalid("tap excess lengths must satisfy 0 < min <= max"));
        }
        let mut rng = seeded_rng(seed);
        for _ in 0..count {
            let excess = rng.random_range(excess_min..=excess_max);
            let aod = rng.random_range(-PI / 2.0..=PI / 2.0);
            let arrival_heading = rng.random_range(0.0..2.0 * PI);
            let phase = rng.random_range(0.0..2.0 * PI);
            self.taps.push(Tap {
                excess,
                aod,
                arrival_heading,
                coefficient: Complex64::from_polar(magnitude, phase),
            });
        }
        Ok(self)
    }

    pub fn with_base(mut self, base: BasePose) -> Self {
        self.base = base;
        self
    }

    pub fn with_snr(mut self, snr_db: Option<f64>) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.grid.validate()?;
        if !self.los && self.reflectors.is_empty() && self.taps.is_empty() {
            return Err(Error::invalid("scenario has no paths"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid("snr_db must be finite"));
            }
        }
        Ok(())
    }

    /// Resolves a parameter vector into a pose.
    ///
    /// Cartesian parameters (`x`, `y`) move the UD while its array keeps the
    /// base orientation, which by default is parallel to the AP array so the
    /// LoS AoA equals the LoS AoD. Polar parameters (`aod`, `aoa`,
    /// `distance`) override the base pose; the UD array is rotated so that
    /// the LoS path arrives at exactly the requested AoA.
    pub fn pose(&self, params: &PositionParams) -> Result<UdPose> {
        let base = self.base;
        let base_pos = base.position();
        let base_axis = axis_for_aoa(base_pos, base.aoa);
        if params.is_cartesian() {
            let mut pos = base_pos;
            for &(kind, v) in params.entries() {
                match kind {
                    ParamKind::X => pos[0] = v,
                    ParamKind::Y => pos[1] = v,
                    _ => unreachable!("checked by is_cartesian"),
                }
            }
            if pos[0].hypot(pos[1]) <= 0.0 {
                return Err(Error::DegeneratePosition {
                    position: params.to_string(),
                    reason: "user device coincides with the AP".into(),
                });
            }
            return Ok(UdPose {
                position: pos,
                axis_angle: base_axis,
            });
        }
        let (mut aod, mut aoa, mut distance) = (base.aod, base.aoa, base.distance);
        for &(kind, v) in params.entries() {
            match kind {
                ParamKind::Aod => aod = v,
                ParamKind::Aoa => aoa = v,
                ParamKind::Distance => distance = v,
                _ => unreachable!("checked by is_cartesian"),
            }
        }
        if !(distance > 0.0) {
            return Err(Error::invalid(format!("distance must be > 0 in {params}")));
        }
        let half = PI / 2.0;
        if aod.abs() > half || aoa.abs() > half {
            return Err(Error::invalid(format!("angles outside [-pi/2, pi/2] in {params}")));
        }
        let pos = [distance * aod.sin(), base.sign() * distance * aod.cos()];
        Ok(UdPose {
            position: pos,
            axis_angle: axis_for_aoa(pos, aoa),
        })
    }

    /// LoS and reflected paths for a pose.
    pub fn paths(&self, pose: &UdPose) -> Result<Vec<Path>> {
        let lambda_c = SPEED_OF_LIGHT / self.grid.center_frequency;
        let [px, py] = pose.position;
        let axis = [pose.axis_angle.cos(), pose.axis_angle.sin()];
        let mut paths = Vec::with_capacity(self.reflectors.len() + 1);
        if self.los {
            let d = px.hypot(py);
            let aod = clamp_asin(px / d);
            // Arrival direction points from the UD back towards the AP.
            let aoa = clamp_asin((-px * axis[0] - py * axis[1]) / d);
            let gain = Complex64::new(lambda_c / (4.0 * PI * d), 0.0);
            paths.push(Path::new(gain, d, aoa, aod)?);
        }
        for r in &self.reflectors {
            let d_ap = r.x.hypot(r.y);
            let (dx, dy) = (r.x - px, r.y - py);
            let d_ud = dx.hypot(dy);
            if d_ap <= 1e-9 || d_ud <= 1e-9 {
                return Err(Error::DegeneratePosition {
                    position: format!("({px:.4}, {py:.4})"),
                    reason: "user device or AP coincides with a reflector".into(),
                });
            }
            let d = d_ap + d_ud;
            let aod = clamp_asin(r.x / d_ap);
            let aoa = clamp_asin((dx * axis[0] + dy * axis[1]) / d_ud);
            let gain = r.coefficient * (lambda_c / (4.0 * PI * d));
            paths.push(Path::new(gain, d, aoa, aod)?);
        }
        let d_los = px.hypot(py);
        for t in &self.taps {
            let d = d_los + t.excess;
            // Arrival angle is measured towards the source, against the heading.
            let aoa = clamp_asin(-(t.arrival_heading.cos() * axis[0] + t.arrival_heading.sin() * axis[1]));
            let gain = t.coefficient * (lambda_c / (4.0 * PI * d));
            paths.push(Path::new(gain, d, aoa, t.aod)?);
        }
        Ok(paths)
    }

    /// Noiseless CSI at `params` on subcarrier `k` (1-based).
    pub fn mean_csi(&self, params: &PositionParams, k: usize) -> Result<ComplexMatrix> {
        let pose = self.pose(params)?;
        let paths = self.paths(&pose)?;
        csi_mean(&paths, &self.geometry, &self.grid, k)
    }

    /// Per-entry noise variance for a given noiseless CSI.
    pub fn noise_variance(&self, mean: &ComplexMatrix) -> Result<f64> {
        match self.snr_db {
            None => Ok(0.0),
            Some(snr) => noise_var_for_snr(mean, snr),
        }
    }
}

/// Array axis angle such that the LoS path from the AP arrives at `aoa`.
fn axis_for_aoa(pos: [f64; 2], aoa: f64) -> f64 {
    let towards_ap = (-pos[1]).atan2(-pos[0]);
    towards_ap - PI / 2.0 + aoa
}

fn clamp_asin(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).asin()
}
