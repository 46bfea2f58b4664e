//! One-sided (Hestenes) Jacobi SVD for small complex matrices.
//!
//! Orthogonalizing the columns of `A` is equivalent to diagonalizing the
//! Gram matrix `A* A` with two-sided Jacobi rotations, but never forms
//! `A* A` explicitly, so small singular values keep full relative accuracy.
//!
//! Phase convention: every column of `V` is rotated so that its
//! largest-magnitude entry (first one on exact ties) is real and positive.
//! The matching column of `U` absorbs the same phase, so the factorization
//! is unchanged and the output is deterministic.

use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Result of [`svd`]: `A = U[:, ..p] · diag(σ) · V[:, ..p]*` with `p = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Left singular vectors, `rows × rows`, unitary.
    pub u: ComplexMatrix,
    /// Singular values, descending, length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    /// Right singular vectors, `cols × cols`, unitary.
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (n, m) = (self.u.rows(), self.v.rows());
        let mut out = ComplexMatrix::zeros(n, m);
        for (k, &s) in self.singular_values.iter().enumerate() {
            for i in 0..n {
                let us = self.u[(i, k)] * s;
                for j in 0..m {
                    out[(i, j)] += us * self.v[(j, k)].conj();
                }
            }
        }
        out
    }
}

pub fn svd(a: &ComplexMatrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::invalid("svd input contains non-finite entries"));
    }
    let (n, m) = a.shape();
    // Columns of `w` converge to A·V; column norms are the singular values.
    let mut w = a.clone();
    let mut v = ComplexMatrix::identity(m, m);
    let scale = a.frobenius_norm();
    let negligible = (f64::EPSILON * scale).powi(2);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let (mut alpha, mut beta) = (0.0, 0.0);
                let mut gamma = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    alpha += wp.norm_sqr();
                    beta += wq.norm_sqr();
                    gamma += wp.conj() * wq;
                }
                let g = gamma.norm();
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                if g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotate column q by the phase of gamma so the pair becomes a
                // real symmetric 2x2 problem, then apply the real Jacobi step.
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s, phase);
                rotate_columns(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| w[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    // Stable: equal singular values keep their Jacobi order.
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let mut v_sorted = ComplexMatrix::zeros(m, m);
    let mut w_sorted = ComplexMatrix::zeros(n, m);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        let mut wcol = w.column(src);
        let fix = canonical_phase(&col);
        col.iter_mut().for_each(|z| *z *= fix);
        wcol.iter_mut().for_each(|z| *z *= fix);
        v_sorted.set_column(dst, &col);
        w_sorted.set_column(dst, &wcol);
    }

    let p = n.min(m);
    let singular_values: Vec<f64> = order.iter().take(p).map(|&j| norms[j]).collect();
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let rank_tol = sigma_max * 1e-13;

    let mut u_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for (k, &s) in singular_values.iter().enumerate() {
        if s > rank_tol && s > 0.0 {
            u_cols.push(w_sorted.column(k).into_iter().map(|z| z / s).collect());
        } else {
            break;
        }
    }
    complete_basis(&mut u_cols, n);
    let mut u = ComplexMatrix::zeros(n, n);
    for (j, col) in u_cols.iter().enumerate() {
        u.set_column(j, col);
    }

    Ok(Svd {
        u,
        singular_values,
        v: v_sorted,
    })
}

/// `[c_p, c_q] <- [c·c_p − s·ĉ_q, s·c_p + c·ĉ_q]` where `ĉ_q = c_q · conj(phase)`.
fn rotate_columns(mat: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let unphase = phase.conj();
    for i in 0..mat.rows() {
        let xp = mat[(i, p)];
        let xq = mat[(i, q)] * unphase;
        mat[(i, p)] = xp * c - xq * s;
        mat[(i, q)] = xp * s + xq * c;
    }
}

/// Unit scalar that makes the largest-magnitude entry real and positive.
fn canonical_phase(col: &[Complex64]) -> Complex64 {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in col.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag <= 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    col[best].conj() / best_mag
}

/// Extends an orthonormal set to a full basis of `C^dim` with Gram–Schmidt
/// against the standard basis vectors, in index order.
pub(crate) fn complete_basis(cols: &mut Vec<Vec<Complex64>>, dim: usize) {
    let mut candidate = 0;
    while cols.len() < dim && candidate < dim {
        let mut e = vec![Complex64::new(0.0, 0.0); dim];
        e[candidate] = Complex64::new(1.0, 0.0);
        candidate += 1;
        // Two passes keep the result orthogonal to machine precision.
        for _ in 0..2 {
            for c in cols.iter() {
                let proj: Complex64 = c.iter().zip(&e).map(|(a, b)| a.conj() * b).sum();
                for (x, a) in e.iter_mut().zip(c) {
                    *x -= proj * a;
                }
            }
        }
        let norm = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(e.into_iter().map(|z| z / norm).collect());
        }
    }
}
