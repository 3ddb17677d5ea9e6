//! Angular-momentum channels of a radial Pauli operator on a uniform grid in
//! `t = ln r`.
//!
//! In channel `m` the form of `P_∓` factorizes as `r² P_∓ = CᵀC` in
//! `L²(dt)` with `C = ∓∂_t + g`, `g = m − Φ(r)` and `Φ` the enclosed flux, so
//! the eigenproblem becomes the pencil `(CᵀC − εV r², r²)`. Links carry `C`
//! at midpoints, which keeps the discrete operator exactly nonnegative at
//! `ε = 0` and reproduces the zero modes `r^k e^h` up to the outer boundary.

use serde::{Deserialize, Serialize};

use crate::ac_basis::Spin;
use crate::error::{Error, Result};
use crate::field_model::{RadialPotential, ScalarField2D};
use crate::numerics::tridiag::SymTridiag;

/// Uniform grid in `ln r` on `[r_min, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: usize,
}

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, nodes: usize) -> Result<Self> {
        if !(r_min > 0.0) {
            return Err(Error::Grid(format!("r_min must be positive, got {r_min}")));
        }
        if !(r_max > r_min) || nodes < 8 {
            return Err(Error::Grid(format!(
                "need r_max > r_min and at least 8 nodes (got {r_min}, {r_max}, {nodes})"
            )));
        }
        Ok(Self { r_min, r_max, nodes })
    }

    /// Grid with a fixed step in `t` extending to `r_max`.
    pub fn with_step(r_min: f64, r_max: f64, dt: f64) -> Result<Self> {
        let nodes = ((r_max / r_min).ln() / dt).ceil() as usize + 1;
        Self::new(r_min, r_max, nodes.max(8))
    }

    pub fn dt(&self) -> f64 {
        (self.r_max / self.r_min).ln() / (self.nodes - 1) as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        self.r_min.ln() + j as f64 * self.dt()
    }

    pub fn r(&self, j: usize) -> f64 {
        self.t(j).exp()
    }
}

#[derive(Debug, Clone)]
pub struct RadialChannel {
    pub m: i64,
    pub spin: Spin,
    pub eps: f64,
    /// No boundary condition at `r_min` (otherwise Dirichlet).
    pub natural_inner: bool,
    pub op: SymTridiag,
    /// `w_j r_j²`; may overflow to `inf` on huge grids (only used for λ ≠ 0).
    pub mass: Vec<f64>,
    /// `V_j w_j r_j²`.
    pub v_mass: Vec<f64>,
    pub grid: RadialGrid,
}

impl RadialChannel {
    /// Lower bound of the pencil spectrum: `CᵀC ≥ 0` and `V ≤ max V`.
    pub fn lower_bound(&self) -> f64 {
        let vmax = self
            .v_mass
            .iter()
            .zip(&self.mass)
            .filter(|(_, m)| m.is_finite() && **m > 0.0)
            .fold(0.0f64, |a, (v, m)| a.max(v / m));
        -(self.eps * vmax) * 1.000001 - 1e-300
    }

    pub fn count_negative(&self) -> usize {
        self.op.count_below(0.0, &self.mass)
    }

    pub fn lowest(&self, k: usize, rtol: f64) -> Vec<f64> {
        self.op.lowest_pencil_eigenvalues(&self.mass, k, self.lower_bound(), rtol)
    }
}

/// The natural inner condition is used only where the regular solution and
/// the kernel of `C` agree (`m ≥ 0` for spin −, `m ≤ 0` for spin +); other
/// channels would otherwise pick up the singular branch `r^{−|m|}`.
pub fn natural_inner(m: i64, spin: Spin) -> bool {
    match spin {
        Spin::Minus => m >= 0,
        Spin::Plus => m <= 0,
    }
}

/// Link coefficients `(a, b)` with `(Cf)_{j+½} = a f_j + b f_{j+1}`.
fn link(spin: Spin, dt: f64, g: f64) -> (f64, f64) {
    match spin {
        Spin::Minus => (1.0 / dt + 0.5 * g, -1.0 / dt + 0.5 * g),
        Spin::Plus => (-1.0 / dt + 0.5 * g, 1.0 / dt + 0.5 * g),
    }
}

fn r2_times(v: f64, r: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * r * r
    }
}

pub fn assemble_radial_channel(
    m: i64,
    spin: Spin,
    h: &RadialPotential,
    v: &ScalarField2D,
    eps: f64,
    grid: &RadialGrid,
) -> Result<RadialChannel> {
    assemble_with_boundary(m, spin, h, v, eps, grid, natural_inner(m, spin))
}

pub(crate) fn assemble_with_boundary(
    m: i64,
    spin: Spin,
    h: &RadialPotential,
    v: &ScalarField2D,
    eps: f64,
    grid: &RadialGrid,
    natural: bool,
) -> Result<RadialChannel> {
    if !v.is_radial() {
        return Err(Error::WrongBacking { expected: "radial", found: v.backing_name() });
    }
    let n = grid.nodes;
    let dt = grid.dt();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    let g_at = |t: f64| m as f64 - h.enclosed_flux(t.exp());
    for j in 0..n - 1 {
        let (a, b) = link(spin, dt, g_at(grid.t(j) + 0.5 * dt));
        diag[j] += dt * a * a;
        diag[j + 1] += dt * b * b;
        off[j] += dt * a * b;
    }
    // Dirichlet ghost beyond r_max
    let (a, _) = link(spin, dt, g_at(grid.t(n - 1) + 0.5 * dt));
    diag[n - 1] += dt * a * a;
    if !natural {
        let (_, b) = link(spin, dt, g_at(grid.t(0) - 0.5 * dt));
        diag[0] += dt * b * b;
    }
    let mut mass = Vec::with_capacity(n);
    let mut v_mass = Vec::with_capacity(n);
    for j in 0..n {
        let w = if j == 0 && natural { 0.5 * dt } else { dt };
        let r = grid.r(j);
        mass.push(w * r * r);
        let vm = w * r2_times(v.eval_radial(r), r);
        v_mass.push(vm);
        diag[j] -= eps * vm;
    }
    Ok(RadialChannel {
        m,
        spin,
        eps,
        natural_inner: natural,
        op: SymTridiag::new(diag, off),
        mass,
        v_mass,
        grid: *grid,
    })
}

/// Orientation of the angular label: `+1` when `r^k e^{h}` (the spin-minus
/// zero-mode profile) is annihilated in channel `m = +k`, `−1` for `m = −k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Orientation {
    pub sign: i64,
    pub residual_plus: f64,
    pub residual_minus: f64,
}

/// Applies the channel form for `m = ±1` (spin −, natural boundary) to the
/// sampled profile `r e^{h}` and keeps the label with the smaller relative
/// residual `‖Cf‖/‖∂_t f‖` over `r ≤ 10`.
pub fn calibrate_orientation(h: &RadialPotential, grid: &RadialGrid) -> Orientation {
    let dt = grid.dt();
    let last = (0..grid.nodes).take_while(|&j| grid.r(j) <= 10.0).last().unwrap_or(1).max(1);
    let logf: Vec<f64> = (0..=last).map(|j| grid.t(j) + h.eval(grid.r(j))).collect();
    let top = logf.iter().cloned().fold(f64::MIN, f64::max);
    let f: Vec<f64> = logf.iter().map(|l| (l - top).exp()).collect();
    let residual = |m: i64| {
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..last {
            let g = m as f64 - h.enclosed_flux((grid.t(j) + 0.5 * dt).exp());
            let (a, b) = link(Spin::Minus, dt, g);
            num += (a * f[j] + b * f[j + 1]).powi(2);
            den += ((f[j + 1] - f[j]) / dt).powi(2);
        }
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    };
    let (rp, rm) = (residual(1), residual(-1));
    Orientation {
        sign: if rp <= rm { 1 } else { -1 },
        residual_plus: rp,
        residual_minus: rm,
    }
}
