//! Five-point magnetic Laplacian with Peierls link phases on `[−R, R]²`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ac_basis::Spin;
use crate::error::{Error, Result};
use crate::field_model::{ScalarField2D, VectorPotential};
use crate::numerics::banded::BandedHermitian;

/// `N×N` interior nodes of `[−R, R]²`, Dirichlet outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianSpec {
    pub n: usize,
    pub half_width: f64,
    /// Ceiling on the band storage in bytes.
    #[serde(default = "default_memory_limit")]
    pub memory_limit: usize,
}

fn default_memory_limit() -> usize {
    2 << 30
}

impl CartesianSpec {
    pub fn new(n: usize, half_width: f64) -> Self {
        Self { n, half_width, memory_limit: default_memory_limit() }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n + 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i + 1) as f64 * self.spacing()
    }
}

/// `K = d²·(P_± − εV)` in band storage; the pencil mass is `d²·I`.
#[derive(Debug, Clone)]
pub struct CartesianOperator {
    pub spec: CartesianSpec,
    pub spin: Spin,
    pub eps: f64,
    pub k: BandedHermitian,
    /// `V` at the nodes (row-major, rows along y).
    pub v: Vec<f64>,
}

impl CartesianOperator {
    pub fn mass(&self) -> f64 {
        let d = self.spec.spacing();
        d * d
    }

    pub fn dim(&self) -> usize {
        self.k.dim()
    }
}

/// Extra link phase `θ_{p→q} += χ(q) − χ(p)` (pure gauge) for covariance tests.
pub type GaugeShift<'a> = Option<&'a dyn Fn(f64, f64) -> f64>;

pub fn assemble_cartesian(
    a: &VectorPotential,
    b: &ScalarField2D,
    v: &ScalarField2D,
    eps: f64,
    spec: &CartesianSpec,
    spin: Spin,
) -> Result<CartesianOperator> {
    assemble_cartesian_gauged(a, b, v, eps, spec, spin, None)
}

pub fn assemble_cartesian_gauged(
    a: &VectorPotential,
    b: &ScalarField2D,
    v: &ScalarField2D,
    eps: f64,
    spec: &CartesianSpec,
    spin: Spin,
    gauge: GaugeShift,
) -> Result<CartesianOperator> {
    let n = spec.n;
    if n < 32 {
        return Err(Error::Grid(format!("Cartesian grid needs N >= 32, got {n}")));
    }
    let bytes = BandedHermitian::bytes_estimate(n * n, n);
    if bytes > spec.memory_limit {
        let mut suggested = n;
        while suggested > 32 && BandedHermitian::bytes_estimate(suggested * suggested, suggested) > spec.memory_limit {
            suggested -= 1;
        }
        return Err(Error::Size { bytes, suggested_n: suggested });
    }
    let d = spec.spacing();
    let d2 = d * d;
    let sign = match spin {
        Spin::Plus => 1.0,
        Spin::Minus => -1.0,
    };
    let mut k = BandedHermitian::zeros(n * n, n);
    let mut vs = Vec::with_capacity(n * n);
    let phase = |x0: f64, y0: f64, x1: f64, y1: f64| -> f64 {
        let (ax, ay) = a.eval(0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let mut th = ax * (x1 - x0) + ay * (y1 - y0);
        if let Some(chi) = gauge {
            th += chi(x1, y1) - chi(x0, y0);
        }
        th
    };
    for j in 0..n {
        let y = spec.coord(j);
        for i in 0..n {
            let x = spec.coord(i);
            let p = j * n + i;
            let vv = v.eval(x, y);
            vs.push(vv);
            k.add_diag(p, 4.0 + d2 * (sign * b.eval(x, y) - eps * vv));
            // entry (p, q) for q < p: −exp(−iθ_{p→q})
            if i > 0 {
                let th = phase(x, y, x - d, y);
                k.set_lower(p, p - 1, -Complex64::from_polar(1.0, -th));
            }
            if j > 0 {
                let th = phase(x, y, x, y - d);
                k.set_lower(p, p - n, -Complex64::from_polar(1.0, -th));
            }
        }
    }
    Ok(CartesianOperator { spec: *spec, spin, eps, k, v: vs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_model::{compute_h_radial, vector_potential, QuadratureSpec, ScalarPotential};

    #[test]
    fn size_guard_suggests_smaller_grid() {
        let a = VectorPotential::Grid {
            ax: crate::field_model::Grid2D::centered(4, 1.0, |_, _| 0.0).unwrap(),
            ay: crate::field_model::Grid2D::centered(4, 1.0, |_, _| 0.0).unwrap(),
            alpha: 0.0,
        };
        let z = ScalarField2D::zero();
        let spec = CartesianSpec { memory_limit: 4 << 20, ..CartesianSpec::new(64, 5.0) };
        match assemble_cartesian(&a, &z, &z, 0.0, &spec, Spin::Minus) {
            Err(Error::Size { suggested_n, .. }) => {
                assert!(suggested_n < 64);
                assert!(BandedHermitian::bytes_estimate(suggested_n * suggested_n, suggested_n) <= 4 << 20);
            }
            other => panic!("expected size error, got {other:?}"),
        }
    }

    #[test]
    fn band_solve_inverts_operator() {
        let q = QuadratureSpec::default();
        let b = ScalarField2D::rational(1.5);
        let a = vector_potential(&ScalarPotential::Radial(compute_h_radial(&b, &q).unwrap()));
        let op = assemble_cartesian(&a, &b, &ScalarField2D::zero(), 0.0, &CartesianSpec::new(40, 5.0), Spin::Plus)
            .unwrap();
        let x: Vec<Complex64> = (0..op.dim()).map(|i| Complex64::new((i as f64).sin(), (0.3 * i as f64).cos())).collect();
        let y = op.k.factor_shifted(0.0, op.mass()).unwrap().solve(&op.k.matvec(&x));
        let err = x.iter().zip(&y).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn hermitian_entries() {
        let q = QuadratureSpec::default();
        let b = ScalarField2D::rational(1.5);
        let a = vector_potential(&ScalarPotential::Radial(compute_h_radial(&b, &q).unwrap()));
        let op = assemble_cartesian(&a, &b, &ScalarField2D::power(1.0, 3.5), 0.1, &CartesianSpec::new(32, 6.0), Spin::Minus)
            .unwrap();
        for p in 1..op.dim() {
            let x = op.k.get(p, p - 1);
            let y = op.k.get(p - 1, p);
            assert!((x - y.conj()).norm() < 1e-15);
        }
    }
}
