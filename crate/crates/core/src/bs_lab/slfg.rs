//! Block partitions and Schur complements `S = A₁₁ − A₁₂A₂₂⁻¹A₂₁`, whose
//! kernel has the dimension of `ker A` when `A₂₂` is invertible.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::dense::{self, CMatrix};

/// Relative singular-value threshold for kernel dimensions.
pub const KERNEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl BlockPartition {
    /// `first` plus its complement in `0..n`.
    pub fn new(n: usize, first: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &first {
            if i >= n {
                return Err(Error::Dimension { expected: n, found: i + 1 });
            }
            if seen[i] {
                return Err(Error::Domain(format!("index {i} repeated in the partition")));
            }
            seen[i] = true;
        }
        let second = (0..n).filter(|&i| !seen[i]).collect();
        Ok(Self { first, second })
    }

    /// Leading `k` indices against the rest.
    pub fn leading(n: usize, k: usize) -> Result<Self> {
        Self::new(n, (0..k.min(n)).collect())
    }

    pub fn dim(&self) -> usize {
        self.first.len() + self.second.len()
    }

    fn check(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.first.iter().chain(&self.second) {
            if i >= n || seen[i] {
                return Err(Error::Dimension { expected: n, found: self.dim() });
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Dimension { expected: n, found: self.dim() });
        }
        Ok(())
    }
}

pub fn schur_complement(a: &CMatrix, part: &BlockPartition) -> Result<CMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension { expected: a.nrows(), found: a.ncols() });
    }
    part.check(a.nrows())?;
    let s = dense::schur_complement(a, &part.first, &part.second)?;
    Ok((&s + s.adjoint()) * Complex64::new(0.5, 0.0))
}

/// `dim ker` of a square matrix: singular values `≤ tol·scale`. Pass the
/// norm of the parent matrix as `scale` when `m` is a Schur complement, whose
/// own norm may itself be at round-off level.
pub fn kernel_dim(m: &CMatrix, scale: f64, tol: f64) -> usize {
    if m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    sv.iter().filter(|&&s| s <= tol * scale).count()
}

/// Random Hermitian `n×n` matrix `Xᴴ J X` with `X` of rank `n − kernel` and
/// random signs in `J`; a leading block of size `≤ n − kernel` is then
/// invertible with probability one.
pub fn planted_kernel_matrix<R: Rng>(n: usize, kernel: usize, rng: &mut R) -> CMatrix {
    let r = n - kernel;
    let x = DMatrix::from_fn(r, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let j = DMatrix::from_fn(r, r, |i, k| {
        if i == k {
            Complex64::new(if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.5..2.0), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let a = x.adjoint() * j * x;
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// A planted-kernel matrix with a random partition whose `A₂₂` has
/// condition number below `1e6` (redrawn until it does).
pub fn planted_case<R: Rng>(n: usize, kernel: usize, rng: &mut R) -> (CMatrix, BlockPartition) {
    use rand::seq::SliceRandom;
    assert!(kernel < n);
    loop {
        let a = planted_kernel_matrix(n, kernel, rng);
        let k2 = rng.random_range(1..=(n - kernel).min(n - 1));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let part = BlockPartition::new(n, idx[k2..].to_vec()).expect("valid partition");
        let a22 = CMatrix::from_fn(k2, k2, |i, j| a[(part.second[i], part.second[j])]);
        if dense::spectral_condition(&a22) < 1e6 {
            return (a, part);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn block_diagonal_gives_a11() {
        let mut a = CMatrix::zeros(4, 4);
        for i in 0..4 {
            a[(i, i)] = Complex64::new(i as f64 + 1.0, 0.0);
        }
        a[(0, 1)] = Complex64::new(0.0, 0.5);
        a[(1, 0)] = Complex64::new(0.0, -0.5);
        let p = BlockPartition::leading(4, 2).unwrap();
        let s = schur_complement(&a, &p).unwrap();
        assert!((s - a.view((0, 0), (2, 2))).norm() < 1e-15);
    }

    #[test]
    fn partition_must_cover() {
        let bad = BlockPartition { first: vec![0, 1], second: vec![1, 2] };
        assert!(schur_complement(&CMatrix::identity(3, 3), &bad).is_err());
        assert!(BlockPartition::new(3, vec![3]).is_err());
    }

    #[test]
    fn singular_a22_is_reported() {
        let mut a = CMatrix::identity(3, 3);
        a[(2, 2)] = Complex64::new(0.0, 0.0);
        let p = BlockPartition::leading(3, 2).unwrap();
        assert!(matches!(schur_complement(&a, &p), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn planted_kernel_of_two() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = planted_kernel_matrix(6, 2, &mut rng);
        let scale = a.norm();
        assert_eq!(kernel_dim(&a, scale, KERNEL_TOL), 2);
        let s = schur_complement(&a, &BlockPartition::leading(6, 3).unwrap()).unwrap();
        assert_eq!(kernel_dim(&s, scale, KERNEL_TOL), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn kernel_dimension_is_preserved(seed in any::<u64>(), n in 4usize..=12, kernel in 0usize..=3) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (a, part) = planted_case(n, kernel, &mut rng);
            let s = schur_complement(&a, &part).unwrap();
            let scale = a.norm();
            prop_assert_eq!(kernel_dim(&a, scale, KERNEL_TOL), kernel);
            prop_assert_eq!(kernel_dim(&s, scale, KERNEL_TOL), kernel);
        }
    }
}
