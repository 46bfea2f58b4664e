//! CSI → beamforming feedback (BFI) transform.
//!
//! The chain follows 802.11 explicit beamforming:
//!
//! 1. [`rsvd_steering`]: right-singular matrix `V` of the CSI `H` (N×M).
//! 2. [`resize`]: keep the first `N` columns of `V`, or zero-pad to `N`.
//! 3. [`rotate_real_last_row`]: rotate each column so the last row is real
//!    and nonnegative.
//! 4. [`givens_decompose`]: Givens-rotation angles `(φ, ψ)`.
//!
//! Quantization lives in [`quantize`]/[`dequantize`]. For 2×2 links the
//! angles also have a closed form, see [`closed_form_2x2`].

mod closed_form;
mod givens;
mod quantize;

pub use closed_form::{closed_form_2x2, symmetric_link_csi};
pub use givens::{givens_decompose, givens_reconstruct};
pub use quantize::{dequantize, quantize, QuantizedBfi, MAX_PSI_BITS, MIN_PSI_BITS};

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{svd, ComplexMatrix};

/// Relative gap below which adjacent singular values count as repeated.
const DEGENERATE_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Phi,
    Psi,
}

/// Identifies one angle: `φ_{row,col}` or `ψ_{row,col}` (1-based, as in the
/// rotation matrices `D_col` and `G_{row,col}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BfiElementLabel {
    pub kind: ElementKind,
    pub row: usize,
    pub col: usize,
}

impl fmt::Display for BfiElementLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            ElementKind::Phi => "phi",
            ElementKind::Psi => "psi",
        };
        write!(f, "{k}_{}{}", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BfiElement {
    pub kind: ElementKind,
    pub row: usize,
    pub col: usize,
    /// Radians.
    pub value: f64,
}

impl BfiElement {
    pub fn label(&self) -> BfiElementLabel {
        BfiElementLabel {
            kind: self.kind,
            row: self.row,
            col: self.col,
        }
    }
}

/// Angle vector `θ = (φ, ψ)` in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bfi {
    pub m_tx: usize,
    pub n_rx: usize,
    pub elements: Vec<BfiElement>,
    /// Set when the CSI had repeated singular values, so the steering
    /// matrix (and hence θ) is only defined up to the SVD convention.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

/// `S = min(N, M − 1)`.
pub fn rotation_columns(n_rx: usize, m_tx: usize) -> usize {
    n_rx.min(m_tx.saturating_sub(1))
}

/// Number of BFI angles, `2MS − S² − S` with `S = min(N, M − 1)`.
pub fn bfi_element_count(n_rx: usize, m_tx: usize) -> usize {
    let s = rotation_columns(n_rx, m_tx);
    2 * m_tx * s - s * s - s
}

/// Canonical element order: for `i = 1..=S`, `φ_{i,i} … φ_{M−1,i}` then
/// `ψ_{i+1,i} … ψ_{M,i}`.
pub fn canonical_labels(n_rx: usize, m_tx: usize) -> Vec<BfiElementLabel> {
    let s = rotation_columns(n_rx, m_tx);
    let mut out = Vec::with_capacity(bfi_element_count(n_rx, m_tx));
    for i in 1..=s {
        for row in i..m_tx {
            out.push(BfiElementLabel {
                kind: ElementKind::Phi,
                row,
                col: i,
            });
        }
        for row in (i + 1)..=m_tx {
            out.push(BfiElementLabel {
                kind: ElementKind::Psi,
                row,
                col: i,
            });
        }
    }
    out
}

impl Bfi {
    /// Builds a BFI from values in canonical order, checking ranges.
    pub fn from_values(n_rx: usize, m_tx: usize, values: &[f64]) -> Result<Self> {
        if m_tx < 2 || n_rx < 1 {
            return Err(Error::invalid(format!("invalid BFI dimensions {n_rx}x{m_tx}")));
        }
        let labels = canonical_labels(n_rx, m_tx);
        if labels.len() != values.len() {
            return Err(Error::invalid(format!(
                "{n_rx}x{m_tx} BFI has {} elements, got {}",
                labels.len(),
                values.len()
            )));
        }
        let bfi = Self {
            m_tx,
            n_rx,
            elements: labels
                .iter()
                .zip(values)
                .map(|(l, &value)| BfiElement {
                    kind: l.kind,
                    row: l.row,
                    col: l.col,
                    value,
                })
                .collect(),
            degenerate: false,
        };
        bfi.validate()?;
        Ok(bfi)
    }

    /// Checks labels against the canonical order and values against
    /// `φ ∈ [0, 2π)`, `ψ ∈ [0, π/2]`.
    pub fn validate(&self) -> Result<()> {
        if self.m_tx < 2 || self.n_rx < 1 {
            return Err(Error::invalid(format!(
                "invalid BFI dimensions {}x{}",
                self.n_rx, self.m_tx
            )));
        }
        let labels = canonical_labels(self.n_rx, self.m_tx);
        if labels.len() != self.elements.len() {
            return Err(Error::invalid(format!(
                "expected {} elements, got {}",
                labels.len(),
                self.elements.len()
            )));
        }
        for (expect, e) in labels.iter().zip(&self.elements) {
            if *expect != e.label() {
                return Err(Error::invalid(format!("element {} out of canonical order", e.label())));
            }
            let ok = match e.kind {
                ElementKind::Phi => (0.0..2.0 * PI).contains(&e.value),
                ElementKind::Psi => (0.0..=PI / 2.0).contains(&e.value),
            };
            if !ok {
                return Err(Error::invalid(format!("{} = {} out of range", e.label(), e.value)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.value).collect()
    }

    pub fn labels(&self) -> Vec<BfiElementLabel> {
        self.elements.iter().map(BfiElement::label).collect()
    }

    /// Elements of the first `cols` rotation columns only. The result is a
    /// partial angle vector: it keeps canonical order but no longer passes
    /// [`Bfi::validate`].
    pub fn restrict_to_columns(&self, cols: usize) -> Bfi {
        Bfi {
            m_tx: self.m_tx,
            n_rx: self.n_rx,
            elements: self.elements.iter().filter(|e| e.col <= cols).cloned().collect(),
            degenerate: self.degenerate,
        }
    }

    pub fn kinds(&self) -> Vec<ElementKind> {
        self.elements.iter().map(|e| e.kind).collect()
    }
}

/// Right-singular matrix `V` (M×M) of `H`, columns by descending singular
/// value, under the phase convention of [`crate::numerics::svd`].
pub fn rsvd_steering(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(steering_with_gap(h)?.0)
}

fn steering_with_gap(h: &ComplexMatrix) -> Result<(ComplexMatrix, bool)> {
    if h.is_zero() {
        return Err(Error::degenerate("steering matrix of an all-zero CSI"));
    }
    let d = svd(h)?;
    let (n, m) = h.shape();
    let mut sigma = d.singular_values.clone();
    sigma.resize(m, 0.0);
    let degenerate = !gaps_open(&sigma, n.min(m - 1));
    Ok((d.v, degenerate))
}

/// True when `σ_j > σ_{j+1}` (beyond the relative tolerance) for every
/// `j < count`.
fn gaps_open(sigma: &[f64], count: usize) -> bool {
    let top = sigma[0];
    (0..count).all(|j| sigma[j] - sigma[j + 1] > DEGENERATE_GAP * top)
}

/// Whether the first `rank` columns of the steering matrix of `h` are
/// uniquely defined, i.e. the leading `rank` singular values are distinct
/// and separated from the rest.
pub fn leading_columns_defined(h: &ComplexMatrix, rank: usize) -> Result<bool> {
    if h.is_zero() {
        return Ok(false);
    }
    let m = h.cols();
    if rank == 0 || rank > m {
        return Err(Error::invalid(format!("rank must be in 1..={m}")));
    }
    let mut sigma = svd(h)?.singular_values;
    sigma.resize(m, 0.0);
    Ok(gaps_open(&sigma, rank.min(m - 1)))
}

/// Truncates `V` to its first `n_rx` columns, or zero-pads to `n_rx`.
pub fn resize(v: &ComplexMatrix, n_rx: usize) -> Result<ComplexMatrix> {
    let m = v.rows();
    if v.cols() != m {
        return Err(Error::invalid(format!("steering matrix must be square, got {:?}", v.shape())));
    }
    if n_rx == 0 {
        return Err(Error::invalid("n_rx must be >= 1"));
    }
    if n_rx <= m {
        return Ok(v.leading_columns(n_rx));
    }
    let mut out = ComplexMatrix::zeros(m, n_rx);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = v[(i, j)];
        }
    }
    Ok(out)
}

/// Multiplies column `j` by `exp(−i·∠V[M, j])`, with `∠0 := 0`.
pub fn rotate_real_last_row(v: &ComplexMatrix) -> ComplexMatrix {
    let last = v.rows() - 1;
    let mut out = v.clone();
    for j in 0..v.cols() {
        let z = v[(last, j)];
        let mag = z.norm();
        if mag == 0.0 {
            continue;
        }
        let unphase = z.conj() / mag;
        for i in 0..v.rows() {
            out[(i, j)] = v[(i, j)] * unphase;
        }
        out[(last, j)] = Complex64::new(mag, 0.0);
    }
    out
}

/// Steps i–iii of the transform: `θ = g(R(resize(V(H))))`.
pub fn csi_to_bfi(h: &ComplexMatrix) -> Result<Bfi> {
    let (n_rx, m_tx) = h.shape();
    if m_tx < 2 {
        return Err(Error::invalid("CSI needs at least 2 transmit antennas"));
    }
    let (v, degenerate) = steering_with_gap(h)?;
    let v_tilde = rotate_real_last_row(&resize(&v, n_rx)?);
    let mut bfi = givens_decompose(&v_tilde)?;
    bfi.degenerate = degenerate;
    Ok(bfi)
}
