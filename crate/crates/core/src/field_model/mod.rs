//! Magnetic fields and potentials on the plane, and the gauge data derived
//! from a field: flux, scalar potential `h`, vector potential `A`.

mod assumptions;
mod gauge;
pub mod io;

pub use assumptions::{check_assumptions, AssumptionItem, AssumptionReport, CheckStatus};
pub use gauge::{
    compute_flux, compute_h_grid, compute_h_radial, discrete_curl, flux_estimate, vector_potential, FluxEstimate,
    GridPotential, RadialPotential, ScalarPotential, VectorPotential,
};

use serde::{Deserialize, Serialize};

use crate::ac_basis::{classify_flux, FluxClass, DELTA_INT};
use crate::error::{Error, Result};
use crate::numerics::interp::MonotoneCubic;

/// Closed-form radial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Preset {
    Zero,
    /// `2β/(1+r²)²`, total flux `β`.
    Rational { beta: f64 },
    /// `v0 (1+r²)^{-σ}`.
    Power { v0: f64, sigma: f64 },
    /// `amplitude · exp(-r²/width²)`.
    Gaussian { amplitude: f64, width: f64 },
}

impl Preset {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Preset::Zero => 0.0,
            Preset::Rational { beta } => 2.0 * beta / (1.0 + r * r).powi(2),
            Preset::Power { v0, sigma } => v0 * (1.0 + r * r).powf(-sigma),
            Preset::Gaussian { amplitude, width } => amplitude * (-(r * r) / (width * width)).exp(),
        }
    }

    /// Natural decay exponent `p` with `|f| ≲ (1+r²)^{-p}`.
    pub fn decay_exponent(&self) -> f64 {
        match *self {
            Preset::Zero | Preset::Gaussian { .. } => f64::INFINITY,
            Preset::Rational { .. } => 2.0,
            Preset::Power { sigma, .. } => sigma,
        }
    }

    fn scaled(&self, c: f64) -> Preset {
        match *self {
            Preset::Zero => Preset::Zero,
            Preset::Rational { beta } => Preset::Rational { beta: c * beta },
            Preset::Power { v0, sigma } => Preset::Power { v0: c * v0, sigma },
            Preset::Gaussian { amplitude, width } => Preset::Gaussian {
                amplitude: c * amplitude,
                width,
            },
        }
    }
}

/// Radial samples `(r_i, f_i)` with monotone cubic interpolation.
#[derive(Debug, Clone)]
pub struct RadialTable {
    interp: MonotoneCubic,
}

impl RadialTable {
    pub fn new(r: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if r.len() != f.len() {
            return Err(Error::Dimension { expected: r.len(), found: f.len() });
        }
        if r.len() < 2 {
            return Err(Error::InvalidField("radial table needs at least two rows".into()));
        }
        if r[0] < 0.0 {
            return Err(Error::InvalidField("radial table has negative r".into()));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidField("radial table r must be strictly increasing".into()));
        }
        if r.iter().chain(&f).any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("radial table contains non-finite values".into()));
        }
        Ok(Self { interp: MonotoneCubic::new(r, f) })
    }

    pub fn r(&self) -> &[f64] {
        self.interp.x()
    }

    pub fn values(&self) -> &[f64] {
        self.interp.y()
    }

    fn eval(&self, r: f64, p: f64) -> f64 {
        let xs = self.interp.x();
        let last = xs[xs.len() - 1];
        if r <= last {
            self.interp.eval(r)
        } else {
            let f_last = self.interp.y()[xs.len() - 1];
            f_last * power_ratio(last, r, p)
        }
    }
}

/// Uniform square lattice; value `(i, j)` sits at `(x0 + i·d, y0 + j·d)` and
/// is stored at `j·nx + i` (rows along y).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Grid(format!("grid must be at least 2x2, got {nx}x{ny}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::Grid(format!("spacing must be positive, got {spacing}")));
        }
        if values.len() != nx * ny {
            return Err(Error::Dimension { expected: nx * ny, found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("grid contains non-finite values".into()));
        }
        Ok(Self { nx, ny, x0, y0, spacing, values })
    }

    /// Samples `f` on an `n×n` lattice centred at the origin with half-width
    /// `half` (nodes at cell centres of `[-half, half]²`).
    pub fn centered(n: usize, half: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let d = 2.0 * half / n as f64;
        let x0 = -half + 0.5 * d;
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                values.push(f(x0 + i as f64 * d, x0 + j as f64 * d));
            }
        }
        Self::new(n, n, x0, x0, d, values)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.spacing
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.spacing
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self { values, ..self.clone() }
    }

    /// Bilinear interpolation; `None` outside the lattice rectangle.
    pub fn bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let fx = (x - self.x0) / self.spacing;
        let fy = (y - self.y0) / self.spacing;
        let (mx, my) = ((self.nx - 1) as f64, (self.ny - 1) as f64);
        if !(fx >= 0.0 && fy >= 0.0 && fx <= mx && fy <= my) {
            return None;
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let v = (1.0 - tx) * (1.0 - ty) * self.at(i, j)
            + tx * (1.0 - ty) * self.at(i + 1, j)
            + (1.0 - tx) * ty * self.at(i, j + 1)
            + tx * ty * self.at(i + 1, j + 1);
        Some(v)
    }

    /// Nearest point of the lattice rectangle.
    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        let x1 = self.x(self.nx - 1);
        let y1 = self.y(self.ny - 1);
        (x.clamp(self.x0, x1), y.clamp(self.y0, y1))
    }

    /// Radius of the largest origin-centred disk inside the lattice rectangle.
    pub fn inscribed_radius(&self) -> f64 {
        let x1 = self.x(self.nx - 1);
        let y1 = self.y(self.ny - 1);
        (-self.x0).min(x1).min(-self.y0).min(y1).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub enum Backing {
    Preset(Preset),
    RadialTable(RadialTable),
    Grid(Grid2D),
}

/// A real field on the plane (magnetic field `B` or potential `V`).
#[derive(Debug, Clone)]
pub struct ScalarField2D {
    backing: Backing,
    decay_exponent: f64,
    nonneg: bool,
}

impl ScalarField2D {
    pub fn preset(p: Preset, nonneg: bool) -> Result<Self> {
        Self::new(Backing::Preset(p), p.decay_exponent(), nonneg)
    }

    pub fn zero() -> Self {
        Self {
            backing: Backing::Preset(Preset::Zero),
            decay_exponent: f64::INFINITY,
            nonneg: true,
        }
    }

    pub fn rational(beta: f64) -> Self {
        Self {
            backing: Backing::Preset(Preset::Rational { beta }),
            decay_exponent: 2.0,
            nonneg: false,
        }
    }

    pub fn power(v0: f64, sigma: f64) -> Self {
        Self {
            backing: Backing::Preset(Preset::Power { v0, sigma }),
            decay_exponent: sigma,
            nonneg: v0 >= 0.0,
        }
    }

    pub fn new(backing: Backing, decay_exponent: f64, nonneg: bool) -> Result<Self> {
        if decay_exponent.is_nan() {
            return Err(Error::InvalidField("decay exponent is NaN".into()));
        }
        let field = Self { backing, decay_exponent, nonneg };
        if nonneg {
            field.verify_nonneg()?;
        }
        Ok(field)
    }

    fn verify_nonneg(&self) -> Result<()> {
        let bad = match &self.backing {
            Backing::Preset(p) => sample_radii().any(|r| p.eval(r) < 0.0),
            Backing::RadialTable(t) => t.values().iter().any(|&v| v < 0.0),
            Backing::Grid(g) => g.values.iter().any(|&v| v < 0.0),
        };
        if bad {
            Err(Error::InvalidField("field flagged nonnegative has negative values".into()))
        } else {
            Ok(())
        }
    }

    pub fn backing(&self) -> &Backing {
        &self.backing
    }

    pub fn backing_name(&self) -> &'static str {
        match self.backing {
            Backing::Preset(_) => "radial preset",
            Backing::RadialTable(_) => "radial table",
            Backing::Grid(_) => "grid",
        }
    }

    pub fn decay_exponent(&self) -> f64 {
        self.decay_exponent
    }

    pub fn nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.backing, Backing::Grid(_))
    }

    pub fn is_zero_preset(&self) -> bool {
        matches!(self.backing, Backing::Preset(Preset::Zero))
    }

    pub fn grid(&self) -> Option<&Grid2D> {
        match &self.backing {
            Backing::Grid(g) => Some(g),
            _ => None,
        }
    }

    /// Radial profile value; for grid backings, the value on the positive x-axis.
    pub fn eval_radial(&self, r: f64) -> f64 {
        match &self.backing {
            Backing::Preset(p) => p.eval(r),
            Backing::RadialTable(t) => t.eval(r, self.decay_exponent),
            Backing::Grid(_) => self.eval(r, 0.0),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match &self.backing {
            Backing::Grid(g) => match g.bilinear(x, y) {
                Some(v) => v,
                None => {
                    let (cx, cy) = g.clamp(x, y);
                    let edge = g.bilinear(cx, cy).unwrap_or(0.0);
                    edge * power_ratio(cx.hypot(cy), x.hypot(y), self.decay_exponent)
                }
            },
            _ => self.eval_radial(x.hypot(y)),
        }
    }

    /// `c·f`; nonnegativity is kept only for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let backing = match &self.backing {
            Backing::Preset(p) => Backing::Preset(p.scaled(c)),
            Backing::RadialTable(t) => Backing::RadialTable(
                RadialTable::new(t.r().to_vec(), t.values().iter().map(|v| c * v).collect())
                    .expect("scaling preserves table validity"),
            ),
            Backing::Grid(g) => Backing::Grid(g.with_values(g.values.iter().map(|v| c * v).collect())),
        };
        Self {
            backing,
            decay_exponent: self.decay_exponent,
            nonneg: self.nonneg && c >= 0.0,
        }
    }
}

/// `((1+a²)/(1+b²))^p`, capped at 1 so extrapolation never grows.
fn power_ratio(a: f64, b: f64, p: f64) -> f64 {
    let q = ((1.0 + a * a) / (1.0 + b * b)).min(1.0);
    if q == 1.0 {
        1.0
    } else {
        q.powf(p)
    }
}

fn sample_radii() -> impl Iterator<Item = f64> {
    (0..=80).map(|i| if i == 0 { 0.0 } else { 10f64.powf(-3.0 + 0.1 * i as f64) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuadratureScheme {
    /// Composite Gauss–Legendre on geometric panels `[r_inner·q^i, r_inner·q^{i+1}]`
    /// integrated in `t = ln r`, plus one linear panel on `[0, r_inner]`.
    LogComposite { gl_order: usize, r_inner: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    pub r_max: f64,
    pub nodes: usize,
    pub scheme: QuadratureScheme,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Add the power-law tail beyond `r_max` (otherwise the tail must be
    /// below tolerance).
    pub tail_correction: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            r_max: 1e6,
            nodes: 4800,
            scheme: QuadratureScheme::LogComposite { gl_order: 12, r_inner: 1e-6 },
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            tail_correction: true,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0) {
            return Err(Error::Config(format!("quadrature r_max must be positive, got {}", self.r_max)));
        }
        if self.nodes < 16 {
            return Err(Error::Config(format!("quadrature needs at least 16 nodes, got {}", self.nodes)));
        }
        let QuadratureScheme::LogComposite { gl_order, r_inner } = self.scheme;
        if gl_order == 0 || !(r_inner > 0.0) || r_inner >= self.r_max {
            return Err(Error::Config("invalid log-composite scheme parameters".into()));
        }
        Ok(())
    }

    pub fn tolerance(&self, scale: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * scale.abs())
    }

    pub(crate) fn rule(&self) -> (crate::numerics::quadrature::GaussLegendre, crate::numerics::quadrature::LogPanels) {
        let QuadratureScheme::LogComposite { gl_order, r_inner } = self.scheme;
        let panels = (self.nodes / gl_order).max(1);
        (
            crate::numerics::quadrature::GaussLegendre::new(gl_order),
            crate::numerics::quadrature::LogPanels::new(r_inner, self.r_max, panels),
        )
    }
}

/// Tail integrals of a profile `c(1+s²)^{-p}` matched to `b_r = f(R)`.
pub mod tails {
    /// `∫_R^∞ f(s) s ds`.
    pub fn first_moment(r: f64, b_r: f64, p: f64) -> f64 {
        if b_r == 0.0 || p.is_infinite() {
            return 0.0;
        }
        if p <= 1.0 {
            return f64::INFINITY * b_r.signum();
        }
        b_r * (1.0 + r * r) / (2.0 * (p - 1.0))
    }

    /// `∫_R^∞ f(s) s log s ds` (series in `1/(1+R²)`; needs `R ≳ 1`).
    pub fn log_moment(r: f64, b_r: f64, p: f64) -> f64 {
        if b_r == 0.0 || p.is_infinite() {
            return 0.0;
        }
        if p <= 1.0 {
            return f64::INFINITY * b_r.signum();
        }
        let u = 1.0 + r * r;
        let c = b_r * u.powf(p);
        let q = p - 1.0;
        let mut acc = u.powf(-q) * (u.ln() / q + 1.0 / (q * q));
        let mut um = u.powf(-q);
        for m in 1..200 {
            um /= u;
            let term = um / (m as f64 * (q + m as f64));
            acc -= term;
            if term < 1e-18 * acc.abs() {
                break;
            }
        }
        0.25 * c * acc
    }

    /// Local exponent from two samples of a `(1+s²)^{-p}` profile.
    pub fn local_exponent(r1: f64, f1: f64, r2: f64, f2: f64) -> Option<f64> {
        if f1 == 0.0 || f2 == 0.0 || f1.signum() != f2.signum() {
            return None;
        }
        let p = (f1 / f2).ln() / ((1.0 + r2 * r2) / (1.0 + r1 * r1)).ln();
        p.is_finite().then_some(p)
    }
}

/// `B` together with its flux, gauge potentials and flux class.
#[derive(Debug, Clone)]
pub struct MagneticSetup {
    pub field: ScalarField2D,
    pub alpha: f64,
    pub h: ScalarPotential,
    pub a: VectorPotential,
    pub class: FluxClass,
}

impl MagneticSetup {
    pub fn new(field: ScalarField2D, q: &QuadratureSpec) -> Result<Self> {
        Self::with_tolerance(field, q, DELTA_INT)
    }

    pub fn with_tolerance(field: ScalarField2D, q: &QuadratureSpec, delta_int: f64) -> Result<Self> {
        let h = if field.is_radial() {
            ScalarPotential::Radial(compute_h_radial(&field, q)?)
        } else {
            ScalarPotential::Grid(compute_h_grid(&field, q)?)
        };
        let alpha = h.alpha();
        let a = vector_potential(&h);
        let class = classify_flux(alpha, delta_int);
        Ok(Self { field, alpha, h, a, class })
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.h, ScalarPotential::Radial(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tails_match_rational_closed_forms() {
        // f = 2(1+s²)^{-2}: ∫_R^∞ f s ds = 1/(1+R²)
        let r = 7.0;
        let b = Preset::Rational { beta: 1.0 }.eval(r);
        assert!((tails::first_moment(r, b, 2.0) - 1.0 / (1.0 + r * r)).abs() < 1e-15);
        // ∫_R^∞ 2 s log s (1+s²)^{-2} ds = ½[log s²/(1+s²)]... closed form:
        // = ln R/(1+R²) + ½ ln(1 + 1/R²)
        let exact = r.ln() / (1.0 + r * r) + 0.5 * (1.0 + 1.0 / (r * r)).ln();
        assert!((tails::log_moment(r, b, 2.0) - exact).abs() < 1e-14);
    }

    #[test]
    fn grid_bilinear_and_extrapolation() {
        let g = Grid2D::centered(20, 5.0, |x, y| 1.0 + x + 2.0 * y).unwrap();
        assert!((g.bilinear(0.3, -0.7).unwrap() - (1.0 + 0.3 - 1.4)).abs() < 1e-12);
        let f = ScalarField2D::new(Backing::Grid(g), 3.0, false).unwrap();
        assert!(f.eval(100.0, 0.0).is_finite());
        assert!(f.eval(100.0, 0.0).abs() < 1e-3);
    }

    #[test]
    fn nonneg_flag_is_enforced() {
        let t = RadialTable::new(vec![0.0, 1.0], vec![1.0, -1.0]).unwrap();
        assert!(ScalarField2D::new(Backing::RadialTable(t), 3.0, true).is_err());
        assert!(ScalarField2D::preset(Preset::Power { v0: -1.0, sigma: 3.5 }, true).is_err());
    }

    #[test]
    fn table_rejects_unsorted_radii() {
        assert!(RadialTable::new(vec![0.0, 1.0, 1.0], vec![1.0, 0.5, 0.2]).is_err());
    }

    #[test]
    fn quadrature_spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        let bad = QuadratureSpec { nodes: 8, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
