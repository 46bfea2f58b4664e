//! Gaussian-kernel CRB approximation for BFI observations.
//!
//! At a position `x` the BFI vector is modeled as `θ ~ N(θ̄(x), C)`, where
//! `θ̄` is the noiseless BFI and `C` the Monte-Carlo covariance of
//! periodicity-aware deviations around it. The Fisher information is then
//! `F = Jᵀ C⁻¹ J` with `J = ∂θ̄/∂x` from central differences, and the CRB is
//! `diag(F⁻¹)`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bfi::{csi_to_bfi, leading_columns_defined, Bfi, ElementKind};
use crate::channel::{add_noise, Scenario};
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, RealMatrix};

/// One coordinate of a position parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    /// Radians.
    Aod,
    /// Radians.
    Aoa,
    /// Meters.
    Distance,
    /// Meters.
    X,
    /// Meters.
    Y,
}

impl ParamKind {
    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Aod => "aod",
            ParamKind::Aoa => "aoa",
            ParamKind::Distance => "distance",
            ParamKind::X => "x",
            ParamKind::Y => "y",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            ParamKind::Aod | ParamKind::Aoa => "rad",
            _ => "m",
        }
    }

    pub fn is_angle(self) -> bool {
        matches!(self, ParamKind::Aod | ParamKind::Aoa)
    }

    pub fn is_cartesian(self) -> bool {
        matches!(self, ParamKind::X | ParamKind::Y)
    }
}

/// Position parameter vector `x`: labeled values, either polar
/// (`aod`/`aoa`/`distance`) or Cartesian (`x`/`y`), never mixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(ParamKind, f64)>", into = "Vec<(ParamKind, f64)>")]
pub struct PositionParams {
    entries: Vec<(ParamKind, f64)>,
}

impl PositionParams {
    pub fn new(entries: Vec<(ParamKind, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("position parameter vector is empty"));
        }
        for (i, (k, v)) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{} is not finite", k.name())));
            }
            if entries[..i].iter().any(|(other, _)| other == k) {
                return Err(Error::invalid(format!("duplicate parameter {}", k.name())));
            }
        }
        let cart = entries.iter().filter(|(k, _)| k.is_cartesian()).count();
        if cart != 0 && cart != entries.len() {
            return Err(Error::invalid("cannot mix cartesian and polar parameters"));
        }
        Ok(Self { entries })
    }

    pub fn polar(aod: f64, aoa: f64, distance: f64) -> Self {
        Self::new(vec![
            (ParamKind::Aod, aod),
            (ParamKind::Aoa, aoa),
            (ParamKind::Distance, distance),
        ])
        .expect("finite literal")
    }

    pub fn cartesian(x: f64, y: f64) -> Self {
        Self::new(vec![(ParamKind::X, x), (ParamKind::Y, y)]).expect("finite literal")
    }

    pub fn single(kind: ParamKind, value: f64) -> Self {
        Self::new(vec![(kind, value)]).expect("finite literal")
    }

    pub fn entries(&self) -> &[(ParamKind, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn kinds(&self) -> Vec<ParamKind> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn get(&self, kind: ParamKind) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == kind).map(|e| e.1)
    }

    pub fn is_cartesian(&self) -> bool {
        self.entries[0].0.is_cartesian()
    }

    /// Copy with coordinate `i` replaced.
    pub fn with_value(&self, i: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.entries[i].1 = value;
        out
    }
}

impl TryFrom<Vec<(ParamKind, f64)>> for PositionParams {
    type Error = Error;

    fn try_from(v: Vec<(ParamKind, f64)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PositionParams> for Vec<(ParamKind, f64)> {
    fn from(p: PositionParams) -> Self {
        p.entries
    }
}

impl fmt::Display for PositionParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (k, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}={v:.6} {}", k.name(), k.unit())?;
        }
        write!(f, ")")
    }
}

/// Numerical knobs for the CRB approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrbConfig {
    pub n_mc: usize,
    /// Central-difference step for angle coordinates, radians.
    pub fd_step_angle: f64,
    /// Central-difference step for length coordinates, meters. Reflected
    /// paths change phase by a full turn per wavelength (about 5 cm), so
    /// steps need to stay far below that.
    pub fd_step_distance: f64,
    /// Added to the covariance diagonal before inversion.
    pub ridge: f64,
    pub seed: u64,
    /// Restrict the model to the elements of the first `r` rotation columns.
    /// Needed when the mean channel has rank `r` below the number of
    /// columns, whose remaining BFI columns are then pure noise.
    pub signal_rank: Option<usize>,
}

impl Default for CrbConfig {
    fn default() -> Self {
        Self {
            n_mc: 1000,
            fd_step_angle: 1e-6,
            fd_step_distance: 1e-5,
            ridge: 1e-10,
            seed: 0,
            signal_rank: None,
        }
    }
}

impl CrbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_mc < 2 {
            return Err(Error::invalid("n_mc must be >= 2"));
        }
        let positive = [self.fd_step_angle, self.fd_step_distance, self.ridge];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("finite-difference steps and ridge must be positive"));
        }
        if self.signal_rank == Some(0) {
            return Err(Error::invalid("signal_rank must be >= 1"));
        }
        Ok(())
    }

    fn step(&self, kind: ParamKind) -> f64 {
        if kind.is_angle() {
            self.fd_step_angle
        } else {
            self.fd_step_distance
        }
    }
}

/// Gaussian surrogate of the BFI distribution at one position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    /// Noiseless BFI θ̄.
    pub mean: Bfi,
    /// Covariance of periodic deviations, ridge included.
    pub covariance: RealMatrix,
    pub n_samples: usize,
    /// Per-entry CSI noise power used for the draws.
    pub noise_variance: f64,
}

/// Shortest signed difference per element: φ wraps with period 2π into
/// `[−π, π)`, ψ with period π/2 into `[−π/4, π/4)`.
pub fn periodic_diff(theta: &Bfi, mean: &Bfi) -> Result<Vec<f64>> {
    if theta.labels() != mean.labels() {
        return Err(Error::invalid("BFI label sets differ"));
    }
    Ok(theta
        .elements
        .iter()
        .zip(&mean.elements)
        .map(|(a, b)| wrap_diff(a.kind, a.value - b.value))
        .collect())
}

pub(crate) fn wrap_diff(kind: ElementKind, d: f64) -> f64 {
    let period = match kind {
        ElementKind::Phi => 2.0 * PI,
        ElementKind::Psi => PI / 2.0,
    };
    let half = period / 2.0;
    let r = d - period * ((d + half) / period).floor();
    // Guard the open upper end against rounding.
    if r >= half {
        r - period
    } else {
        r
    }
}

fn degenerate_at(x: &PositionParams, reason: impl Into<String>) -> Error {
    Error::DegeneratePosition {
        position: x.to_string(),
        reason: reason.into(),
    }
}

/// Noiseless BFI θ̄ at `x` on subcarrier `k`.
pub fn mean_bfi(x: &PositionParams, scenario: &Scenario, k: usize) -> Result<Bfi> {
    let h = scenario.mean_csi(x, k)?;
    let bfi = csi_to_bfi(&h).map_err(|e| match e {
        Error::Degenerate(msg) => degenerate_at(x, msg),
        other => other,
    })?;
    if bfi.degenerate {
        return Err(degenerate_at(x, "repeated singular values in the mean CSI"));
    }
    Ok(bfi)
}

/// θ̄ restricted to the first `rank` rotation columns (all when `None`).
pub fn model_mean(x: &PositionParams, scenario: &Scenario, k: usize, rank: Option<usize>) -> Result<Bfi> {
    let Some(r) = rank else {
        return mean_bfi(x, scenario, k);
    };
    let h = scenario.mean_csi(x, k)?;
    if !leading_columns_defined(&h, r)? {
        return Err(degenerate_at(x, format!("leading {r} singular values are not separated")));
    }
    Ok(csi_to_bfi(&h)?.restrict_to_columns(r))
}

/// θ̄ from the noiseless channel, `C` from `n_mc` noisy draws.
pub fn estimate_moments(
    x: &PositionParams,
    scenario: &Scenario,
    k: usize,
    cfg: &CrbConfig,
) -> Result<GaussianModel> {
    cfg.validate()?;
    let h_mean = scenario.mean_csi(x, k)?;
    let mean = model_mean(x, scenario, k, cfg.signal_rank)?;
    let noise_variance = scenario.noise_variance(&h_mean)?;
    let n = mean.len();
    let mut cov = RealMatrix::zeros(n, n);
    if noise_variance > 0.0 {
        let mut rng = seeded_rng(cfg.seed);
        for _ in 0..cfg.n_mc {
            let h = add_noise(&h_mean, noise_variance, &mut rng)?;
            let mut theta = csi_to_bfi(&h)?;
            if let Some(r) = cfg.signal_rank {
                theta = theta.restrict_to_columns(r);
            }
            let dev = periodic_diff(&theta, &mean)?;
            for a in 0..n {
                for b in a..n {
                    cov[(a, b)] += dev[a] * dev[b];
                }
            }
        }
        let norm = 1.0 / (cfg.n_mc as f64 - 1.0);
        for a in 0..n {
            for b in a..n {
                let v = cov[(a, b)] * norm;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
    }
    for a in 0..n {
        cov[(a, a)] += cfg.ridge;
    }
    Ok(GaussianModel {
        mean,
        covariance: cov,
        n_samples: cfg.n_mc,
        noise_variance,
    })
}

/// `∂θ̄/∂x` (N_BFI × D) by central differences; each difference is wrapped
/// with [`periodic_diff`] so that a φ crossing 0/2π does not produce a jump.
pub fn bfi_jacobian(
    x: &PositionParams,
    scenario: &Scenario,
    k: usize,
    cfg: &CrbConfig,
) -> Result<RealMatrix> {
    jacobian_with_steps(x, scenario, k, cfg.signal_rank, |kind| cfg.step(kind))
}

pub(crate) fn jacobian_with_steps(
    x: &PositionParams,
    scenario: &Scenario,
    k: usize,
    rank: Option<usize>,
    step: impl Fn(ParamKind) -> f64,
) -> Result<RealMatrix> {
    let entries = x.entries();
    let mut jac: Option<RealMatrix> = None;
    for (i, &(kind, value)) in entries.iter().enumerate() {
        let h = step(kind);
        let eval = |v: f64| {
            model_mean(&x.with_value(i, v), scenario, k, rank).map_err(|e| match e {
                Error::DegeneratePosition { position, reason } => Error::DegeneratePosition {
                    position,
                    reason: format!("{reason} (while stepping {})", kind.name()),
                },
                Error::InvalidInput(msg) => degenerate_at(
                    x,
                    format!("finite-difference step on {} leaves the domain: {msg}", kind.name()),
                ),
                other => other,
            })
        };
        let plus = eval(value + h)?;
        let minus = eval(value - h)?;
        let diff = periodic_diff(&plus, &minus)?;
        let jac = jac.get_or_insert_with(|| RealMatrix::zeros(diff.len(), entries.len()));
        for (row, d) in diff.iter().enumerate() {
            jac[(row, i)] = d / (2.0 * h);
        }
    }
    Ok(jac.expect("parameter vectors are nonempty"))
}

/// Fisher information and CRB diagonal from a Jacobian and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherCrb {
    pub fim: RealMatrix,
    /// `diag(F⁻¹)`; `+∞` when `F` is singular.
    pub crb_diag: Vec<f64>,
}

pub fn fisher_crb(jacobian: &RealMatrix, covariance: &RealMatrix) -> Result<FisherCrb> {
    let n = covariance.rows();
    if covariance.cols() != n || jacobian.rows() != n {
        return Err(Error::invalid(format!(
            "shape mismatch: J is {}x{}, C is {}x{}",
            jacobian.rows(),
            jacobian.cols(),
            covariance.rows(),
            covariance.cols()
        )));
    }
    let scale = covariance.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if covariance.max_asymmetry() > 1e-12 * scale.max(1e-300) {
        return Err(Error::invalid("covariance is not symmetric"));
    }
    let c_inv = covariance
        .inverse()
        .ok_or_else(|| Error::invalid("covariance is singular even after the ridge"))?;
    let mut fim = jacobian.transpose().matmul(&c_inv).matmul(jacobian);
    let d = fim.rows();
    for a in 0..d {
        for b in (a + 1)..d {
            let v = 0.5 * (fim[(a, b)] + fim[(b, a)]);
            fim[(a, b)] = v;
            fim[(b, a)] = v;
        }
    }
    let crb_diag = match fim.inverse() {
        Some(inv) => inv.diagonal(),
        None => vec![f64::INFINITY; d],
    };
    Ok(FisherCrb { fim, crb_diag })
}

/// Everything computed for one position.
#[derive(Debug, Clone)]
pub struct PositionCrb {
    pub model: GaussianModel,
    pub jacobian: RealMatrix,
    pub fisher: FisherCrb,
    pub scores: Vec<f64>,
}

pub fn position_crb(
    x: &PositionParams,
    scenario: &Scenario,
    k: usize,
    cfg: &CrbConfig,
) -> Result<PositionCrb> {
    let model = estimate_moments(x, scenario, k, cfg)?;
    let jacobian = bfi_jacobian(x, scenario, k, cfg)?;
    let fisher = fisher_crb(&jacobian, &model.covariance)?;
    let scores = scores_from_parts(&jacobian, &model.covariance, cfg.ridge);
    Ok(PositionCrb {
        model,
        jacobian,
        fisher,
        scores,
    })
}

/// Per-element information `χ_j = Σ_i (∂θ̄_j/∂x_i)² / C_jj`; higher is more
/// informative.
pub fn element_scores(
    x: &PositionParams,
    scenario: &Scenario,
    k: usize,
    cfg: &CrbConfig,
) -> Result<Vec<f64>> {
    let model = estimate_moments(x, scenario, k, cfg)?;
    let jacobian = bfi_jacobian(x, scenario, k, cfg)?;
    Ok(scores_from_parts(&jacobian, &model.covariance, cfg.ridge))
}

/// `χ` from precomputed parts. Elements whose variance (ridge excluded)
/// does not exceed the ridge are noise-insensitive and score 0.
pub fn scores_from_parts(jacobian: &RealMatrix, covariance: &RealMatrix, ridge: f64) -> Vec<f64> {
    (0..jacobian.rows())
        .map(|j| {
            let var = covariance[(j, j)];
            if var - ridge <= ridge {
                return 0.0;
            }
            jacobian.row(j).iter().map(|d| d * d).sum::<f64>() / var
        })
        .collect()
}

/// Negative base-10 logarithm of a CRB; `+∞` maps to `−∞`.
pub fn nl_crb(crb: f64) -> Result<f64> {
    if crb == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if !(crb > 0.0) || !crb.is_finite() {
        return Err(Error::invalid(format!("CRB must be positive, got {crb}")));
    }
    Ok(-crb.log10())
}
