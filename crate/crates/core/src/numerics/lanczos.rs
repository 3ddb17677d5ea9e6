//! Lanczos iteration with full reorthogonalization for a few extremal
//! eigenvalues of a Hermitian operator given only through its action.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Relative residual bound `|β_j s_{j,i}| ≤ tol·|θ_i|` for convergence.
    pub tol: f64,
    pub seed: u64,
    /// Rerun on the operator deflated by the converged Ritz vectors so that
    /// multiple eigenvalues show up with their multiplicity (a single Krylov
    /// sequence sees one direction of each eigenspace). Unneeded for simple
    /// spectra.
    pub probe_multiplicity: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-10,
            seed: 0x5eed,
            probe_multiplicity: true,
        }
    }
}

/// The `k` algebraically largest eigenvalues of a Hermitian operator on
/// `C^n` (or `R^n`), sorted descending.
pub fn largest<T: Scalar>(
    n: usize,
    k: usize,
    mut apply: impl FnMut(&[T]) -> Vec<T>,
    opts: LanczosOptions,
) -> Result<Vec<f64>> {
    if n == 0 || k == 0 {
        return Ok(Vec::new());
    }
    let k = k.min(n);
    let (mut vals, vecs) = run(n, k, &mut apply, opts, &[])?;
    if opts.probe_multiplicity && k < n {
        let want = k.min(n - vecs.len());
        let second = run(n, want, &mut apply, LanczosOptions { seed: opts.seed ^ 0x9e37_79b9, ..opts }, &vecs)?;
        vals.extend(second.0);
        vals = top(vals, k);
    }
    Ok(vals)
}

fn project_out<T: Scalar>(v: &mut [T], against: &[Vec<T>]) {
    for u in against {
        let c = dot(u, v);
        for (vi, ui) in v.iter_mut().zip(u) {
            *vi = *vi - *ui * c;
        }
    }
}

/// One Lanczos sequence on `P A P` with `P` the projector off `deflate`;
/// returns the top `k` Ritz values and vectors.
fn run<T: Scalar>(
    n: usize,
    k: usize,
    apply: &mut impl FnMut(&[T]) -> Vec<T>,
    opts: LanczosOptions,
    deflate: &[Vec<T>],
) -> Result<(Vec<f64>, Vec<Vec<T>>)> {
    let room = n - deflate.len();
    if k == 0 || room == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let k = k.min(room);
    let max_iter = opts.max_iter.max(k + 2).min(room);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(max_iter);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_iter);
    let mut beta: Vec<f64> = Vec::with_capacity(max_iter);

    let mut q = random_unit::<T>(n, &mut rng, deflate, &basis);
    let mut norm_est = 0.0f64;
    for j in 0..max_iter {
        let mut w = apply(&q);
        project_out(&mut w, deflate);
        let a = dot(&q, &w).re();
        for (wi, qi) in w.iter_mut().zip(&q) {
            *wi = *wi - *qi * T::from_re(a);
        }
        if j > 0 {
            let b = beta[j - 1];
            let prev = &basis[j - 1];
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi = *wi - *pi * T::from_re(b);
            }
        }
        basis.push(q);
        alpha.push(a);
        // two passes of classical Gram–Schmidt against the whole basis
        for _ in 0..2 {
            project_out(&mut w, &basis);
            project_out(&mut w, deflate);
        }
        let b = norm(&w);
        norm_est = norm_est.max(a.abs() + b);

        let m = alpha.len();
        let (theta, vecs) = tridiagonal_eigen(&alpha, &beta);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| theta[y].total_cmp(&theta[x]));
        let done = m == room
            || (m >= k
                && order.iter().take(k).all(|&i| {
                    (b * vecs[(m - 1, i)]).abs() <= opts.tol * theta[i].abs().max(1e-300 + opts.tol * norm_est)
                }));
        if done {
            let take: Vec<usize> = order.into_iter().take(k).collect();
            let ritz = take
                .iter()
                .map(|&i| {
                    let mut y = vec![T::zero(); n];
                    for (l, ql) in basis.iter().enumerate() {
                        let c = T::from_re(vecs[(l, i)]);
                        for (yi, qi) in y.iter_mut().zip(ql) {
                            *yi = *yi + *qi * c;
                        }
                    }
                    y
                })
                .collect();
            return Ok((take.iter().map(|&i| theta[i]).collect(), ritz));
        }
        if b <= 1e-14 * norm_est.max(f64::MIN_POSITIVE) {
            // invariant subspace found: continue from a fresh orthogonal direction
            beta.push(0.0);
            q = random_unit::<T>(n, &mut rng, deflate, &basis);
        } else {
            beta.push(b);
            q = w.into_iter().map(|x| x * T::from_re(1.0 / b)).collect();
        }
    }
    Err(Error::Iteration {
        iterations: max_iter,
        hint: "increase max_iter or loosen tol; restart with a different seed".into(),
    })
}

fn top(mut theta: Vec<f64>, k: usize) -> Vec<f64> {
    theta.sort_by(|a, b| b.partial_cmp(a).unwrap());
    theta.truncate(k);
    theta
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + x.conj() * *y)
}

fn norm<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn random_unit<T: Scalar>(n: usize, rng: &mut ChaCha8Rng, deflate: &[Vec<T>], against: &[Vec<T>]) -> Vec<T> {
    loop {
        let mut v: Vec<T> = (0..n)
            .map(|_| T::from_parts(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        for _ in 0..2 {
            project_out(&mut v, deflate);
            project_out(&mut v, against);
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            return v.into_iter().map(|x| x * T::from_re(1.0 / nv)).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn finds_top_of_diagonal_operator() {
        let n = 200;
        let d: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let vals = largest::<f64>(n, 3, |x| x.iter().zip(&d).map(|(a, b)| a * b).collect(), LanczosOptions::default())
            .unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-10);
        assert!((vals[1] - 0.5).abs() < 1e-10);
        assert!((vals[2] - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn multiple_eigenvalues_keep_their_multiplicity() {
        let n = 300;
        let mut d: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        d[1] = d[2];
        let got = largest::<f64>(n, 3, |x| x.iter().zip(&d).map(|(a, b)| a * b).collect(), LanczosOptions::default())
            .unwrap();
        assert!((got[1] - d[2]).abs() < 1e-10 && (got[2] - d[2]).abs() < 1e-10, "{got:?}");
    }

    #[test]
    fn low_rank_operator_breakdown_is_handled() {
        // rank-2 Hermitian operator u u* + 0.5 w w*
        let n = 50;
        let u: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), 0.2)).collect();
        let w: Vec<Complex64> = (0..n).map(|i| Complex64::new(0.0, (i as f64 * 0.7).cos())).collect();
        let nu: f64 = u.iter().map(|x| x.norm_sqr()).sum();
        let nw: f64 = w.iter().map(|x| x.norm_sqr()).sum();
        let apply = |x: &[Complex64]| {
            let cu: Complex64 = u.iter().zip(x).map(|(a, b)| a.conj() * b).sum();
            let cw: Complex64 = w.iter().zip(x).map(|(a, b)| a.conj() * b).sum();
            u.iter().zip(&w).map(|(a, b)| a * cu + b * cw * 0.5).collect()
        };
        let vals = largest::<Complex64>(n, 3, apply, LanczosOptions::default()).unwrap();
        // exact top two from the 2×2 Gram problem
        let uw: Complex64 = u.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        let (a11, a22, a12) = (nu, 0.5 * nw, uw.norm() * 0.5f64.sqrt());
        let tr = a11 + a22;
        let det = a11 * a22 - a12 * a12;
        let disc = (tr * tr / 4.0 - det).sqrt();
        assert!((vals[0] - (tr / 2.0 + disc)).abs() < 1e-9 * vals[0]);
        assert!((vals[1] - (tr / 2.0 - disc)).abs() < 1e-9 * vals[0]);
        assert!(vals[2].abs() < 1e-9 * vals[0]);
    }
}
