//! Small dense Hermitian problems.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Condition-number ceiling for Gram and block matrices.
pub const COND_LIMIT: f64 = 1e12;

/// Spectral condition number of a Hermitian positive matrix; infinite when
/// the smallest eigenvalue is not positive.
pub fn hermitian_condition(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `max|λ| / min|λ|` for an arbitrary (possibly indefinite) Hermitian matrix.
pub fn spectral_condition(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigenvalues sorted descending with matching eigenvectors (columns).
pub fn hermitian_eigen_desc(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(m.nrows(), m.ncols());
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Solves `W c = μ G c` with `G` Hermitian positive definite. Eigenvalues are
/// returned descending; eigenvectors are `G`-orthonormal columns.
pub fn generalized_eigen(w: &CMatrix, g: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(Error::Dimension { expected: n, found: g.ncols() });
    }
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::Dimension { expected: n, found: w.nrows() });
    }
    let cond = hermitian_condition(g);
    if !(cond <= COND_LIMIT) {
        return Err(Error::IllConditionedBasis(cond));
    }
    let chol = g
        .clone()
        .cholesky()
        .ok_or(Error::IllConditionedBasis(cond))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditionedBasis(cond))?;
    let mut c = &linv * w * linv.adjoint();
    // symmetrize against round-off
    c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let (vals, y) = hermitian_eigen_desc(&c);
    let vecs = linv.adjoint() * y;
    Ok((vals, vecs))
}

/// `W[a,a] − W[a,b] W[b,b]⁻¹ W[b,a]` for index sets `a` (kept) and `b`
/// (eliminated).
pub fn schur_complement(w: &CMatrix, keep: &[usize], elim: &[usize]) -> Result<CMatrix> {
    let n = w.nrows();
    for &i in keep.iter().chain(elim) {
        if i >= n {
            return Err(Error::Dimension { expected: n, found: i + 1 });
        }
    }
    let sub = |rows: &[usize], cols: &[usize]| {
        CMatrix::from_fn(rows.len(), cols.len(), |i, j| w[(rows[i], cols[j])])
    };
    let waa = sub(keep, keep);
    if elim.is_empty() {
        return Ok(waa);
    }
    let wbb = sub(elim, elim);
    let cond = spectral_condition(&wbb);
    if !(cond <= COND_LIMIT) {
        return Err(Error::NotInvertible(cond));
    }
    let inv = wbb.try_inverse().ok_or(Error::NotInvertible(cond))?;
    let wab = sub(keep, elim);
    let wba = sub(elim, keep);
    Ok(waa - wab * inv * wba)
}

/// Numerical rank via singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}
