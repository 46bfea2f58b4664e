//! Givens-rotation compression of a steering matrix.
//!
//! The inverse map is
//!
//! ```text
//! Ṽ = Π_{i=1..S} ( D_i · Π_{ℓ=i+1..M} G_{ℓ,i}ᵀ ) · I_{M×N}
//! ```
//!
//! where `D_i = diag(I_{i−1}, e^{iφ_{i,i}}, …, e^{iφ_{M−1,i}}, 1)` and
//! `G_{ℓ,i}` rotates rows `i` and `ℓ` by `ψ_{ℓ,i}` (`cos` on the diagonal,
//! `+sin` at `(i, ℓ)`). With this sign the last row of a 2×2 `Ṽ` is
//! `[sin ψ, cos ψ]`, which is what lets a real nonnegative last row map to
//! `ψ ∈ [0, π/2]`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{canonical_labels, rotation_columns, Bfi, BfiElement, ElementKind};
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

const ORTHONORMAL_TOL: f64 = 1e-6;
/// Below this, the part of a column above the last row is treated as absent
/// and its phases are free.
const VANISHING: f64 = 1e-10;

/// Column-by-column elimination producing the angle vector.
pub fn givens_decompose(v_tilde: &ComplexMatrix) -> Result<Bfi> {
    let (m, n) = v_tilde.shape();
    if m < 2 {
        return Err(Error::invalid("steering matrix needs at least 2 rows"));
    }
    check_input(v_tilde)?;
    let s = rotation_columns(n, m);
    let mut w = v_tilde.clone();
    let mut values = Vec::with_capacity(canonical_labels(n, m).len());

    for i in 0..s {
        let mut phis: Vec<f64> = (i..m - 1).map(|l| angle_or_zero(w[(l, i)])).collect();

        // If the column sits entirely in the last row, every φ in this column
        // is free. φ_{i,i} is then pinned by the first later column that has
        // weight in row i, so that the last row stays real after elimination.
        let upper: f64 = (i..m - 1).map(|l| w[(l, i)].norm_sqr()).sum();
        if upper.sqrt() < VANISHING {
            if let Some(j) = ((i + 1)..n).find(|&j| w[(i, j)].norm() > VANISHING) {
                phis[0] = wrap_phi((-w[(i, j)]).arg());
            }
        }

        for (offset, &phi) in phis.iter().enumerate() {
            let row = i + offset;
            let unphase = Complex64::from_polar(1.0, -phi);
            for j in 0..n {
                w[(row, j)] *= unphase;
            }
        }

        let mut psis = Vec::with_capacity(m - i - 1);
        for l in (i + 1)..m {
            let a = w[(i, i)].re.max(0.0);
            let b = w[(l, i)].norm();
            let psi = b.atan2(a);
            let (sn, cs) = psi.sin_cos();
            // G_{l,i}: row_i <- c·row_i + s·row_l, row_l <- −s·row_i + c·row_l.
            for j in 0..n {
                let (ri, rl) = (w[(i, j)], w[(l, j)]);
                w[(i, j)] = ri * cs + rl * sn;
                w[(l, j)] = rl * cs - ri * sn;
            }
            psis.push(psi.clamp(0.0, PI / 2.0));
        }
        values.extend(phis.into_iter().map(wrap_phi));
        values.extend(psis);
    }

    let labels = canonical_labels(n, m);
    debug_assert_eq!(labels.len(), values.len());
    Ok(Bfi {
        m_tx: m,
        n_rx: n,
        elements: labels
            .into_iter()
            .zip(values)
            .map(|(l, value)| BfiElement {
                kind: l.kind,
                row: l.row,
                col: l.col,
                value,
            })
            .collect(),
        degenerate: false,
    })
}

/// Rebuilds `Ṽ` (M×N) from the angles.
pub fn givens_reconstruct(theta: &Bfi) -> Result<ComplexMatrix> {
    theta.validate()?;
    let (m, n) = (theta.m_tx, theta.n_rx);
    let s = rotation_columns(n, m);
    let mut w = ComplexMatrix::identity(m, n);

    // Per rotation column i: (M−1−i) φ's followed by (M−1−i) ψ's (0-based i).
    let mut starts = Vec::with_capacity(s);
    let mut offset = 0;
    for i in 0..s {
        starts.push(offset);
        offset += 2 * (m - 1 - i);
    }

    for i in (0..s).rev() {
        let block = &theta.elements[starts[i]..starts[i] + 2 * (m - 1 - i)];
        let (phis, psis) = block.split_at(m - 1 - i);
        for (k, psi) in psis.iter().enumerate().rev() {
            debug_assert_eq!(psi.kind, ElementKind::Psi);
            let l = i + 1 + k;
            let (sn, cs) = psi.value.sin_cos();
            // G_{l,i}ᵀ: row_i <- c·row_i − s·row_l, row_l <- s·row_i + c·row_l.
            for j in 0..n {
                let (ri, rl) = (w[(i, j)], w[(l, j)]);
                w[(i, j)] = ri * cs - rl * sn;
                w[(l, j)] = ri * sn + rl * cs;
            }
        }
        for (k, phi) in phis.iter().enumerate() {
            let rot = Complex64::from_polar(1.0, phi.value);
            for j in 0..n {
                w[(i + k, j)] *= rot;
            }
        }
    }
    Ok(w)
}

fn check_input(v: &ComplexMatrix) -> Result<()> {
    let (m, n) = v.shape();
    let last = m - 1;
    for j in 0..n {
        let z = v[(last, j)];
        if z.im.abs() > ORTHONORMAL_TOL || z.re < -ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "last row entry {j} is not real nonnegative: {z}"
            )));
        }
    }
    // Columns must be orthonormal, except all-zero padding columns.
    let gram = v.adjoint().matmul(v);
    let zero_col: Vec<bool> = (0..n).map(|j| gram[(j, j)].re.sqrt() < ORTHONORMAL_TOL).collect();
    for a in 0..n {
        for b in 0..n {
            if zero_col[a] || zero_col[b] {
                continue;
            }
            let target = if a == b { 1.0 } else { 0.0 };
            if (gram[(a, b)] - Complex64::new(target, 0.0)).norm() > ORTHONORMAL_TOL {
                return Err(Error::invalid(format!(
                    "columns are not orthonormal (gram[{a},{b}] = {})",
                    gram[(a, b)]
                )));
            }
        }
    }
    Ok(())
}

fn angle_or_zero(z: Complex64) -> f64 {
    if z.norm() == 0.0 {
        0.0
    } else {
        wrap_phi(z.arg())
    }
}

/// Maps to `[0, 2π)`; `2π` itself becomes 0.
pub(crate) fn wrap_phi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}
