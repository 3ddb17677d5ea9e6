//! Symmetric tridiagonal pencils `K − λ·M` with diagonal positive `M`.
//!
//! Inertia comes from the LDLᵀ pivot recursion (Sturm count); eigenvalues are
//! isolated by bisection on that count, which keeps full relative resolution
//! for eigenvalues many orders of magnitude below the matrix scale.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    /// Main diagonal.
    pub diag: Vec<f64>,
    /// `off[i] = K[i][i+1]`, length `n − 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(diag.is_empty() || off.len() + 1 == diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    fn pivmin(&self) -> f64 {
        let m = self.off.iter().fold(1.0f64, |acc, &b| acc.max(b * b));
        f64::MIN_POSITIVE * m
    }

    /// Number of eigenvalues of the pencil strictly below `lambda`.
    ///
    /// `mass` is ignored when `lambda == 0` so that callers may pass grids whose
    /// mass entries overflow.
    pub fn count_below(&self, lambda: f64, mass: &[f64]) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.len() {
            let shift = if lambda == 0.0 { 0.0 } else { lambda * mass[i] };
            let coupling = if i > 0 { self.off[i - 1] * self.off[i - 1] / d } else { 0.0 };
            d = self.diag[i] - shift - coupling;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Negative-pivot counts of every leading principal submatrix of `K`
    /// (`out[i]` refers to rows `0..=i`).
    pub fn prefix_negative_counts(&self) -> Vec<usize> {
        let pivmin = self.pivmin();
        let mut out = Vec::with_capacity(self.len());
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.len() {
            let coupling = if i > 0 { self.off[i - 1] * self.off[i - 1] / d } else { 0.0 };
            d = self.diag[i] - coupling;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
            out.push(count);
        }
        out
    }

    /// Solves `(K − λM) x = rhs` by LDLᵀ without pivoting.
    pub fn solve_shifted(&self, lambda: f64, mass: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let scale = self.diag.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        for i in 0..n {
            let mut di = self.diag[i] - lambda * mass[i];
            if i > 0 {
                di -= l[i - 1] * l[i - 1] * d[i - 1];
            }
            if !di.is_finite() || di.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Shift {
                    lambda,
                    suggested: lambda * (1.0 + 1e-6) - 1e-12,
                });
            }
            d[i] = di;
            if i + 1 < n {
                l[i] = self.off[i] / di;
            }
        }
        let mut y = rhs.to_vec();
        for i in 1..n {
            y[i] -= l[i - 1] * y[i - 1];
        }
        for i in 0..n {
            y[i] /= d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= l[i] * y[i + 1];
        }
        Ok(y)
    }

    /// Gershgorin enclosure of the pencil spectrum (rows of `M⁻¹K`).
    pub fn gershgorin(&self, mass: &[f64]) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min((self.diag[i] - r) / mass[i]);
            hi = hi.max((self.diag[i] + r) / mass[i]);
        }
        (lo, hi)
    }

    /// The `j`-th (0-based, ascending) eigenvalue of the pencil, given a valid
    /// lower bound of the spectrum. Returns `None` when `j ≥ n`.
    pub fn pencil_eigenvalue(&self, mass: &[f64], j: usize, lower: f64, rtol: f64) -> Option<f64> {
        if j >= self.len() {
            return None;
        }
        let (_, g_hi) = self.gershgorin(mass);
        let mut lo = lower;
        if self.count_below(lo, mass) > j {
            lo = self.gershgorin(mass).0;
        }
        let cap = g_hi.abs() * (1.0 + 1e-12) + 1e-300;
        let mut hi = if lo < 0.0 { 0.0 } else { lo };
        if self.count_below(hi, mass) <= j {
            // eigenvalue j is ≥ hi; grow geometrically from the smallest scale
            lo = lo.max(hi);
            let mut h = hi.max(1e-300);
            loop {
                if h >= cap {
                    h = cap;
                    break;
                }
                if self.count_below(h, mass) > j {
                    break;
                }
                lo = h;
                h *= 16.0;
            }
            hi = h;
        }
        for _ in 0..5000 {
            let width = hi - lo;
            if width <= rtol * lo.abs().max(hi.abs()) || width <= 1e-300 {
                break;
            }
            let mid = if lo < 0.0 && hi > 0.0 {
                0.0
            } else if lo < 0.0 && hi < 0.0 && lo / hi > 4.0 {
                -(lo * hi).sqrt()
            } else if lo > 0.0 && hi / lo > 4.0 {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid, mass) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// The `k` lowest pencil eigenvalues, ascending.
    pub fn lowest_pencil_eigenvalues(&self, mass: &[f64], k: usize, lower: f64, rtol: f64) -> Vec<f64> {
        (0..k.min(self.len()))
            .filter_map(|j| self.pencil_eigenvalue(mass, j, lower, rtol))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn sturm_count_matches_known_spectrum() {
        // eigenvalues 2 − 2cos(kπ/(n+1))
        let n = 50;
        let t = laplacian(n);
        let mass = vec![1.0; n];
        let exact: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        assert_eq!(t.count_below(exact[9] + 1e-9, &mass), 10);
        assert_eq!(t.count_below(exact[9] - 1e-9, &mass), 9);
        let low = t.lowest_pencil_eigenvalues(&mass, 3, 0.0, 1e-14);
        for (a, b) in low.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn tiny_negative_eigenvalue_resolved_relatively() {
        // shift so the lowest eigenvalue becomes −1e-40
        let n = 30;
        let mut t = laplacian(n);
        let mass = vec![1.0; n];
        let l0 = t.lowest_pencil_eigenvalues(&mass, 1, 0.0, 1e-15)[0];
        for d in &mut t.diag {
            *d -= l0;
        }
        let target = -1e-40;
        for d in &mut t.diag {
            *d += target;
        }
        let got = t.lowest_pencil_eigenvalues(&mass, 1, -1.0, 1e-10)[0];
        // absolute accuracy is limited by the O(1) diagonal; only the sign and
        // magnitude scale of such a value are meaningful
        assert!(got <= 0.0 && got > -1e-12, "{got}");
    }

    #[test]
    fn solve_shifted_inverts() {
        let n = 20;
        let t = laplacian(n);
        let mass: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let lambda = -0.3;
        let mut b = t.matvec(&x);
        for i in 0..n {
            b[i] -= lambda * mass[i] * x[i];
        }
        let y = t.solve_shifted(lambda, &mass, &b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn prefix_counts_are_monotone_and_end_at_total() {
        let n = 40;
        let mut t = laplacian(n);
        for d in &mut t.diag {
            *d -= 0.05;
        }
        let mass = vec![1.0; n];
        let p = t.prefix_negative_counts();
        assert!(p.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*p.last().unwrap(), t.count_below(0.0, &mass));
    }
}
