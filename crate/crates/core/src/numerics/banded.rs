//! Hermitian band matrices and their LDLᴴ factorization.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermitian matrix stored by its lower band (`bw` sub-diagonals).
#[derive(Debug, Clone)]
pub struct BandedHermitian {
    n: usize,
    bw: usize,
    /// Row `i` holds entries `(i, i−bw) … (i, i)` at offsets `bw − (i − j)`.
    data: Vec<Complex64>,
}

impl BandedHermitian {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![Complex64::new(0.0, 0.0); n * (bw + 1)],
        }
    }

    pub fn bytes_estimate(n: usize, bw: usize) -> usize {
        // matrix plus one factor of the same shape
        2 * n * (bw + 1) * std::mem::size_of::<Complex64>()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw - (i - j)
    }

    /// Entry `(i, j)` for any `i, j` (zero outside the band).
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if j <= i {
            if i - j > self.bw {
                Complex64::new(0.0, 0.0)
            } else {
                self.data[self.idx(i, j)]
            }
        } else {
            self.get(j, i).conj()
        }
    }

    /// Sets `(i, j)` with `j ≤ i`; the upper triangle follows by symmetry.
    pub fn set_lower(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        let k = self.idx(i, i);
        self.data[k].re += v;
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                y[j] += a.conj() * x[i];
            }
            y[i] += self.data[self.idx(i, i)] * x[i];
        }
        y
    }

    /// LDLᴴ factorization of `A − shift·mass·I` without pivoting.
    pub fn factor_shifted(&self, shift: f64, mass: f64) -> Result<BandedLdl> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.data.clone();
        let mut d = vec![0.0; n];
        let scale = (0..n)
            .map(|i| self.data[self.idx(i, i)].re.abs())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                let mut s = l[i * (bw + 1) + bw - (i - j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    let lik = l[i * (bw + 1) + bw - (i - k)];
                    let ljk = l[j * (bw + 1) + bw - (j - k)];
                    s -= lik * ljk.conj() * d[k];
                }
                l[i * (bw + 1) + bw - (i - j)] = s / d[j];
            }
            let mut di = self.data[self.idx(i, i)].re - shift * mass;
            for k in j0..i {
                let lik = l[i * (bw + 1) + bw - (i - k)];
                di -= lik.norm_sqr() * d[k];
            }
            if !di.is_finite() || di.abs() <= 1e-13 * scale {
                return Err(Error::Factorization(format!(
                    "pivot {i} is {di:e} (scale {scale:e})"
                )));
            }
            d[i] = di;
            l[i * (bw + 1) + bw] = Complex64::new(1.0, 0.0);
        }
        Ok(BandedLdl { n, bw, l, d })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLdl {
    n: usize,
    bw: usize,
    l: Vec<Complex64>,
    d: Vec<f64>,
}

impl BandedLdl {
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&d| d < 0.0).count()
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let (n, bw) = (self.n, self.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = y[i];
            for j in j0..i {
                s -= self.l[i * (bw + 1) + bw - (i - j)] * y[j];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let s = y[i];
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                let lij = self.l[i * (bw + 1) + bw - (i - j)];
                y[j] -= lij.conj() * s;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample(n: usize, bw: usize) -> BandedHermitian {
        let mut a = BandedHermitian::zeros(n, bw);
        for i in 0..n {
            a.set_lower(i, i, c(4.0 + 0.1 * i as f64, 0.0));
            for j in i.saturating_sub(bw)..i {
                let t = (i * 7 + j * 3) as f64;
                a.set_lower(i, j, c(-0.5 * t.sin(), 0.4 * t.cos()) / bw as f64);
            }
        }
        a
    }

    #[test]
    fn solve_round_trips() {
        let a = sample(40, 5);
        let x: Vec<Complex64> = (0..40).map(|i| c((i as f64).cos(), (i as f64 * 0.3).sin())).collect();
        let b = a.matvec(&x);
        let f = a.factor_shifted(0.0, 1.0).unwrap();
        let y = f.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).norm() < 1e-12);
        }
        assert_eq!(f.negative_pivots(), 0);
    }

    #[test]
    fn inertia_counts_shifted_eigenvalues() {
        // diagonal matrix: the count is obvious
        let mut a = BandedHermitian::zeros(10, 2);
        for i in 0..10 {
            a.set_lower(i, i, c(i as f64, 0.0));
        }
        let f = a.factor_shifted(4.5, 1.0).unwrap();
        assert_eq!(f.negative_pivots(), 5);
    }

    #[test]
    fn hermitian_access() {
        let a = sample(8, 3);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(a.get(i, j), a.get(j, i).conj());
            }
        }
        assert_eq!(a.get(7, 0), c(0.0, 0.0));
    }
}
