use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{tails, Grid2D, QuadratureSpec, ScalarField2D};
use crate::error::{Error, Result};
use crate::numerics::quadrature::{GaussLegendre, LogPanels};

/// Exact mean of `ln|x|` over the unit square `[-½, ½]²`.
pub const SELF_CELL_LOG_MEAN: f64 = -1.061_175_426_882_524_3;

/// Flux together with the part of it attributed to the extrapolated tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxEstimate {
    pub alpha: f64,
    pub tail: f64,
    /// Spread between tails extrapolated with the declared and the locally
    /// measured decay exponents.
    pub tail_uncertainty: f64,
}

/// `α = (1/2π)∫B`.
pub fn compute_flux(b: &ScalarField2D, q: &QuadratureSpec) -> Result<f64> {
    flux_estimate(b, q).map(|f| f.alpha)
}

pub fn flux_estimate(b: &ScalarField2D, q: &QuadratureSpec) -> Result<FluxEstimate> {
    let p = b.decay_exponent();
    if p <= 1.0 {
        return Err(Error::NonIntegrableField(p));
    }
    q.validate()?;
    // (interior integral, matching radius, B there, local (exponent, B) pair)
    let (body, r_tail, b_tail, local) = match b.grid() {
        None => {
            let (gl, panels) = q.rule();
            let body = panels.integrate(&gl, |s| b.eval_radial(s) * s);
            let r = q.r_max;
            let br = b.eval_radial(r);
            let local = tails::local_exponent(0.5 * r, b.eval_radial(0.5 * r), r, br).map(|pl| (pl, br));
            (body, r, br, local)
        }
        Some(g) => {
            let d2 = g.spacing * g.spacing;
            let body = d2 * g.values.iter().sum::<f64>() / (2.0 * PI);
            let r_in = g.inscribed_radius();
            let r_eq = equal_area_radius(g);
            let outer = ring_mean(b, r_in);
            let inner = ring_mean(b, 0.5 * r_in);
            let local = tails::local_exponent(0.5 * r_in, inner, r_in, outer)
                .map(|pl| (pl, outer * super::power_ratio(r_in, r_eq, pl)));
            (body, r_eq, outer * super::power_ratio(r_in, r_eq, p), local)
        }
    };
    let tail_decl = tails::first_moment(r_tail, b_tail, p);
    let tail_loc = match local {
        Some((pl, bl)) => tails::first_moment(r_tail, bl, pl),
        None => tail_decl,
    };
    let alpha_est = body + tail_decl;
    let (tail, uncertainty) = if q.tail_correction {
        (tail_decl, (tail_decl - tail_loc).abs())
    } else {
        (0.0, tail_decl.abs().max(tail_loc.abs()))
    };
    if !(uncertainty <= q.tolerance(alpha_est)) {
        return Err(Error::Precision(format!(
            "flux tail beyond r = {r_tail:.3e} uncertain by {uncertainty:.3e} (tolerance {:.3e})",
            q.tolerance(alpha_est)
        )));
    }
    Ok(FluxEstimate {
        alpha: body + tail,
        tail,
        tail_uncertainty: uncertainty,
    })
}

fn equal_area_radius(g: &Grid2D) -> f64 {
    let area = (g.nx as f64 * g.spacing) * (g.ny as f64 * g.spacing);
    (area / PI).sqrt()
}

fn ring_mean(b: &ScalarField2D, r: f64) -> f64 {
    let n = 128;
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            b.eval(r * t.cos(), r * t.sin())
        })
        .sum::<f64>()
        / n as f64
}

/// `h` of a radial field through `h(r) = −ln r·Φ(r) − Ψ(r)` with
/// `Φ(r) = ∫_0^r B s ds` and `Ψ(r) = ∫_r^∞ B s ln s ds`.
#[derive(Debug, Clone)]
pub struct RadialPotential {
    field: ScalarField2D,
    gl: GaussLegendre,
    panels: LogPanels,
    phi_cum: Vec<f64>,
    logm_cum: Vec<f64>,
    alpha: f64,
    logm_total: f64,
    tail_correction: bool,
}

impl RadialPotential {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r_max(&self) -> f64 {
        self.panels.r_max()
    }

    pub fn field(&self) -> &ScalarField2D {
        &self.field
    }

    /// `(h(r), Φ(r))`.
    pub fn eval_with_flux(&self, r: f64) -> (f64, f64) {
        if r <= 0.0 {
            return (-self.logm_total, 0.0);
        }
        let r_max = self.r_max();
        if r >= r_max {
            let p = self.field.decay_exponent();
            let br = self.field.eval_radial(r);
            let (phi, psi) = if self.tail_correction {
                (self.alpha - tails::first_moment(r, br, p), tails::log_moment(r, br, p))
            } else {
                (self.alpha, 0.0)
            };
            return (-r.ln() * phi - psi, phi);
        }
        let i = self.panels.locate(r);
        let e = self.panels.edges()[i];
        let (mut dphi, mut dlog) = (0.0, 0.0);
        if e == 0.0 {
            for (s, w) in self.gl.mapped(0.0, r) {
                let bs = self.field.eval_radial(s) * s;
                dphi += w * bs;
                if s > 0.0 {
                    dlog += w * bs * s.ln();
                }
            }
        } else if r > e {
            for (t, w) in self.gl.mapped(e.ln(), r.ln()) {
                let s = t.exp();
                let bs = self.field.eval_radial(s) * s * s;
                dphi += w * bs;
                dlog += w * bs * t;
            }
        }
        let phi = self.phi_cum[i] + dphi;
        let psi = self.logm_total - (self.logm_cum[i] + dlog);
        (-r.ln() * phi - psi, phi)
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.eval_with_flux(r).0
    }

    /// Enclosed flux `Φ(r) = ∫_0^r B s ds`.
    pub fn enclosed_flux(&self, r: f64) -> f64 {
        self.eval_with_flux(r).1
    }

    /// Tangential vector potential `a(r) = −h′(r) = Φ(r)/r`, with `a(0) = 0`.
    pub fn a(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else {
            self.enclosed_flux(r) / r
        }
    }
}

pub fn compute_h_radial(b: &ScalarField2D, q: &QuadratureSpec) -> Result<RadialPotential> {
    if !b.is_radial() {
        return Err(Error::WrongBacking {
            expected: "radial",
            found: b.backing_name(),
        });
    }
    let flux = flux_estimate(b, q)?;
    let (gl, panels) = q.rule();
    let phi_cum = panels.cumulative(&gl, |s| b.eval_radial(s) * s);
    let logm_cum = panels.cumulative(&gl, |s| if s > 0.0 { b.eval_radial(s) * s * s.ln() } else { 0.0 });
    let r_max = q.r_max;
    let logm_tail = if q.tail_correction {
        tails::log_moment(r_max, b.eval_radial(r_max), b.decay_exponent())
    } else {
        0.0
    };
    let logm_total = logm_cum[logm_cum.len() - 1] + logm_tail;
    Ok(RadialPotential {
        field: b.clone(),
        gl,
        panels,
        phi_cum,
        logm_cum,
        alpha: flux.alpha,
        logm_total,
        tail_correction: q.tail_correction,
    })
}

/// `h` sampled on the lattice of a grid field.
#[derive(Debug, Clone)]
pub struct GridPotential {
    pub values: Grid2D,
    pub alpha: f64,
    pub warnings: Vec<String>,
}

impl GridPotential {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.values.bilinear(x, y) {
            Some(v) => v,
            None => {
                // continue with the far-field law −α ln r
                let (cx, cy) = self.values.clamp(x, y);
                let edge = self.values.bilinear(cx, cy).unwrap_or(0.0);
                let rc = cx.hypot(cy).max(f64::MIN_POSITIVE);
                let r = x.hypot(y);
                edge - self.alpha * (r.ln() - rc.ln())
            }
        }
    }
}

/// Direct discrete convolution `h_i = −(d²/2π) Σ_j B_j ln|x_i − x_j|` by FFT,
/// with the exact square-cell mean of `ln` on the diagonal and the exterior
/// tail added as for a radial profile outside the equal-area disk.
pub fn compute_h_grid(b: &ScalarField2D, q: &QuadratureSpec) -> Result<GridPotential> {
    let g = b.grid().ok_or(Error::WrongBacking {
        expected: "grid",
        found: b.backing_name(),
    })?;
    let flux = flux_estimate(b, q)?;
    let (nx, ny, d) = (g.nx, g.ny, g.spacing);
    let mut warnings = resolution_warnings(g);

    let (mx, my) = (2 * nx, 2 * ny);
    let mut kernel = vec![Complex64::new(0.0, 0.0); mx * my];
    for jj in 0..my {
        let dy = if jj < ny { jj as f64 } else if jj > my - ny { jj as f64 - my as f64 } else { continue };
        for ii in 0..mx {
            let dx = if ii < nx { ii as f64 } else if ii > mx - nx { ii as f64 - mx as f64 } else { continue };
            let v = if ii == 0 && jj == 0 {
                d.ln() + SELF_CELL_LOG_MEAN
            } else {
                (d * dx.hypot(dy)).ln()
            };
            kernel[jj * mx + ii] = Complex64::new(v, 0.0);
        }
    }
    let mut src = vec![Complex64::new(0.0, 0.0); mx * my];
    for j in 0..ny {
        for i in 0..nx {
            src[j * mx + i] = Complex64::new(g.at(i, j), 0.0);
        }
    }
    let mut planner = FftPlanner::new();
    fft2(&mut planner, &mut kernel, mx, my, false);
    fft2(&mut planner, &mut src, mx, my, false);
    for (s, k) in src.iter_mut().zip(&kernel) {
        *s *= k;
    }
    fft2(&mut planner, &mut src, mx, my, true);
    let scale = -d * d / (2.0 * PI) / (mx * my) as f64;

    let tail = if q.tail_correction {
        let p = b.decay_exponent();
        let r_in = g.inscribed_radius();
        let r_eq = equal_area_radius(g);
        let b_eq = ring_mean(b, r_in) * super::power_ratio(r_in, r_eq, p);
        -tails::log_moment(r_eq, b_eq, p)
    } else {
        0.0
    };
    let mut values = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            values.push(src[j * mx + i].re * scale + tail);
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        warnings.push("non-finite values in grid potential".into());
    }
    Ok(GridPotential {
        values: g.with_values(values),
        alpha: flux.alpha,
        warnings,
    })
}

fn fft2(planner: &mut FftPlanner<f64>, data: &mut [Complex64], mx: usize, my: usize, inverse: bool) {
    let row = if inverse { planner.plan_fft_inverse(mx) } else { planner.plan_fft_forward(mx) };
    for chunk in data.chunks_mut(mx) {
        row.process(chunk);
    }
    let col = if inverse { planner.plan_fft_inverse(my) } else { planner.plan_fft_forward(my) };
    let mut buf = vec![Complex64::new(0.0, 0.0); my];
    for i in 0..mx {
        for j in 0..my {
            buf[j] = data[j * mx + i];
        }
        col.process(&mut buf);
        for j in 0..my {
            data[j * mx + i] = buf[j];
        }
    }
}

/// Flags lattices where `B` changes by more than half between neighbours
/// (ignoring cells below 10⁻³ of the peak).
fn resolution_warnings(g: &Grid2D) -> Vec<String> {
    let peak = g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Vec::new();
    }
    let floor = 1e-3 * peak;
    let mut coarse = 0usize;
    let mut check = |a: f64, b: f64| {
        let m = a.abs().max(b.abs());
        if m >= floor && (a - b).abs() > 0.5 * m {
            coarse += 1;
        }
    };
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i + 1 < g.nx {
                check(g.at(i, j), g.at(i + 1, j));
            }
            if j + 1 < g.ny {
                check(g.at(i, j), g.at(i, j + 1));
            }
        }
    }
    if coarse > 0 {
        vec![format!(
            "grid too coarse: {coarse} neighbour pairs change by more than 50% (spacing {:.3e})",
            g.spacing
        )]
    } else {
        Vec::new()
    }
}

/// The scalar gauge potential `h` with `−Δh = B`.
#[derive(Debug, Clone)]
pub enum ScalarPotential {
    Radial(RadialPotential),
    Grid(GridPotential),
}

impl ScalarPotential {
    pub fn alpha(&self) -> f64 {
        match self {
            ScalarPotential::Radial(p) => p.alpha(),
            ScalarPotential::Grid(p) => p.alpha,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            ScalarPotential::Radial(p) => p.eval(x.hypot(y)),
            ScalarPotential::Grid(p) => p.eval(x, y),
        }
    }

    pub fn warnings(&self) -> &[String] {
        match self {
            ScalarPotential::Radial(_) => &[],
            ScalarPotential::Grid(p) => &p.warnings,
        }
    }
}

/// `A = (∂₂h, −∂₁h)`.
#[derive(Debug, Clone)]
pub enum VectorPotential {
    /// `A = a(r)·e_θ` with `a = Φ(r)/r`.
    Radial(RadialPotential),
    /// Centred differences of `h` on its lattice.
    Grid { ax: Grid2D, ay: Grid2D, alpha: f64 },
}

impl VectorPotential {
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            VectorPotential::Radial(p) => {
                let r = x.hypot(y);
                if r == 0.0 {
                    return (0.0, 0.0);
                }
                let a = p.a(r) / r;
                (-a * y, a * x)
            }
            VectorPotential::Grid { ax, ay, alpha } => match (ax.bilinear(x, y), ay.bilinear(x, y)) {
                (Some(u), Some(v)) => (u, v),
                _ => {
                    let r2 = (x * x + y * y).max(f64::MIN_POSITIVE);
                    (-alpha * y / r2, alpha * x / r2)
                }
            },
        }
    }
}

pub fn vector_potential(h: &ScalarPotential) -> VectorPotential {
    match h {
        ScalarPotential::Radial(p) => VectorPotential::Radial(p.clone()),
        ScalarPotential::Grid(p) => {
            let g = &p.values;
            let d = g.spacing;
            let diff = |i: usize, j: usize, di: bool| -> f64 {
                let (n, k) = if di { (g.nx, i) } else { (g.ny, j) };
                let at = |m: usize| if di { g.at(m, j) } else { g.at(i, m) };
                if k == 0 {
                    (at(1) - at(0)) / d
                } else if k == n - 1 {
                    (at(n - 1) - at(n - 2)) / d
                } else {
                    (at(k + 1) - at(k - 1)) / (2.0 * d)
                }
            };
            let mut ax = Vec::with_capacity(g.values.len());
            let mut ay = Vec::with_capacity(g.values.len());
            for j in 0..g.ny {
                for i in 0..g.nx {
                    ax.push(diff(i, j, false));
                    ay.push(-diff(i, j, true));
                }
            }
            VectorPotential::Grid {
                ax: g.with_values(ax),
                ay: g.with_values(ay),
                alpha: p.alpha,
            }
        }
    }
}

/// Centred-difference curl `∂₁A₂ − ∂₂A₁` at the lattice points of `lattice`
/// not on its boundary (boundary entries are zero).
pub fn discrete_curl(a: &VectorPotential, lattice: &Grid2D) -> Grid2D {
    let d = lattice.spacing;
    let mut out = vec![0.0; lattice.nx * lattice.ny];
    for j in 1..lattice.ny - 1 {
        for i in 1..lattice.nx - 1 {
            let (x, y) = (lattice.x(i), lattice.y(j));
            let ay_e = a.eval(x + d, y).1;
            let ay_w = a.eval(x - d, y).1;
            let ax_n = a.eval(x, y + d).0;
            let ax_s = a.eval(x, y - d).0;
            out[j * lattice.nx + i] = (ay_e - ay_w - ax_n + ax_s) / (2.0 * d);
        }
    }
    lattice.with_values(out)
}
