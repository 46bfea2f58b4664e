//! Small complex/real linear-algebra kernel and seeded random generation.
//!
//! Everything here targets matrices up to about 8×8; nothing is blocked or
//! vectorized.

mod matrix;
mod real;
mod svd;

pub use matrix::ComplexMatrix;
pub use real::RealMatrix;
pub use svd::{svd, Svd};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// The RNG used everywhere a seed is accepted.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-task seed: `seed ⊕ (index · golden-ratio constant)`. The multiplier
/// spreads consecutive indices over all 64 bits so that nested derivations
/// do not collide the way plain `seed ^ index` would.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One draw of a circularly-symmetric complex Gaussian `CN(0, variance)`.
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * sd, im * sd)
}

/// Matrix of i.i.d. `CN(0, 1)` entries.
pub fn random_complex_gaussian(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    let mut rng = seeded_rng(seed);
    let data = (0..rows * cols).map(|_| complex_normal(&mut rng, 1.0)).collect();
    ComplexMatrix::from_row_major(rows, cols, data).expect("finite gaussian draws")
}

/// Haar-distributed unitary matrix: QR of a complex Gaussian matrix with the
/// diagonal of `R` made real-positive.
pub fn random_unitary(dim: usize, seed: u64) -> Result<ComplexMatrix> {
    if dim == 0 {
        return Err(Error::invalid("random_unitary: dim must be >= 1"));
    }
    let g = random_complex_gaussian(dim, dim, seed);
    let mut q = ComplexMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut v = g.column(j);
        // Modified Gram–Schmidt, repeated once for orthogonality at 1e-15.
        // Projections only subtract earlier q columns, so r_jj = ‖v‖ > 0 and
        // the QR phase fix is already built in.
        for _ in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let proj: Complex64 = qk.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, a) in v.iter_mut().zip(&qk) {
                    *x -= proj * a;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let col: Vec<Complex64> = v.into_iter().map(|z| z / norm).collect();
        q.set_column(j, &col);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_dim_one_has_unit_modulus() {
        for seed in 0..10 {
            let u = random_unitary(1, seed).unwrap();
            assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unitary_dim_four() {
        let u = random_unitary(4, 7).unwrap();
        assert!(u.is_unitary(1e-12));
    }

    #[test]
    fn unitary_is_deterministic() {
        assert_eq!(random_unitary(3, 7).unwrap(), random_unitary(3, 7).unwrap());
        assert_ne!(random_unitary(3, 7).unwrap(), random_unitary(3, 8).unwrap());
    }

    #[test]
    fn unitary_dim_zero_rejected() {
        assert!(matches!(random_unitary(0, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(0, 1), derive_seed(1, 0));
    }
}
