//! Numerical building blocks: quadrature, interpolation, tridiagonal pencils,
//! band factorizations, Lanczos and small dense Hermitian problems.

pub mod banded;
pub mod dense;
pub mod interp;
pub mod lanczos;
pub mod quadrature;
pub mod tridiag;

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

/// Real or complex scalar used by the iterative eigensolvers.
pub trait Scalar:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + 'static
{
    fn zero() -> Self;
    fn from_re(re: f64) -> Self;
    /// Real types drop the imaginary part.
    fn from_parts(re: f64, im: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn norm_sqr(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_re(re: f64) -> Self {
        re
    }
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_re(re: f64) -> Self {
        Complex64::new(re, 0.0)
    }
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
}
