//! Flux classification, Aharonov–Casher states and their Gram matrices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_model::{tails, Grid2D, MagneticSetup, QuadratureSpec, ScalarField2D, ScalarPotential};
use crate::numerics::dense::CMatrix;

/// Default integer-flux detection tolerance on the computed `α`.
pub const DELTA_INT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Spin {
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }

    /// Sign `s` in `|ψ|² ∝ e^{2 s h}`: zero modes of `P_−` carry `e^{+h}`.
    pub fn h_sign(self) -> f64 {
        match self {
            Spin::Plus => -1.0,
            Spin::Minus => 1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Spin::Plus => "+",
            Spin::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FluxKind {
    Zero,
    NonInteger { n: usize, alpha_prime: f64 },
    Integer { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxClass {
    #[serde(flatten)]
    pub kind: FluxKind,
    /// The input flux was negative, so `P_+` plays the role of `P_−`.
    pub spin_flipped: bool,
}

impl FluxClass {
    /// Number of square-integrable zero modes.
    pub fn n(&self) -> usize {
        match self.kind {
            FluxKind::Zero => 0,
            FluxKind::NonInteger { n, .. } | FluxKind::Integer { n } => n,
        }
    }

    /// Number of weakly coupled negative eigenvalues.
    pub fn branch_count(&self) -> usize {
        match self.kind {
            FluxKind::Zero => 2,
            FluxKind::NonInteger { n, .. } => n + 1,
            FluxKind::Integer { n } => n + 2,
        }
    }

    /// Spin component carrying the zero modes (both spins for zero flux).
    pub fn active_spin(&self) -> Spin {
        if self.spin_flipped {
            Spin::Plus
        } else {
            Spin::Minus
        }
    }

    /// Powers `k` of the bounded, non-square-integrable states.
    pub fn virtual_powers(&self) -> Vec<usize> {
        match self.kind {
            FluxKind::Zero => vec![0],
            FluxKind::NonInteger { n, .. } => vec![n],
            FluxKind::Integer { n } => vec![n, n + 1],
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            FluxKind::Zero => "Zero".into(),
            FluxKind::NonInteger { n, alpha_prime } => format!("NonInteger{{n={n}, alpha'={alpha_prime}}}"),
            FluxKind::Integer { n } => format!("Integer{{n={n}}}"),
        }
    }
}

pub fn classify_flux(alpha: f64, tol: f64) -> FluxClass {
    let spin_flipped = alpha < 0.0 && alpha.abs() > tol;
    let a = alpha.abs();
    let kind = if a <= tol {
        FluxKind::Zero
    } else if (a - a.round()).abs() <= tol && a.round() != 0.0 {
        FluxKind::Integer { n: a.round() as usize - 1 }
    } else {
        let n = a.floor() as usize;
        FluxKind::NonInteger { n, alpha_prime: a - n as f64 }
    };
    FluxClass { kind, spin_flipped }
}

/// `ψ_k = (x₁ ∓ i x₂)^k e^{±h}` for spin `∓` (gauge phase set to zero).
#[derive(Debug, Clone, Copy)]
pub struct ACState<'a> {
    pub k: usize,
    pub spin: Spin,
    pub h: &'a ScalarPotential,
}

impl<'a> ACState<'a> {
    pub fn new(k: usize, spin: Spin, h: &'a ScalarPotential) -> Self {
        Self { k, spin, h }
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        let z = match self.spin {
            Spin::Minus => Complex64::new(x, -y),
            Spin::Plus => Complex64::new(x, y),
        };
        z.powu(self.k as u32) * (self.spin.h_sign() * self.h.eval(x, y)).exp()
    }

    /// `|ψ_k|²` as a function of `r` (radial potentials only).
    pub fn density_radial(&self, r: f64) -> f64 {
        let ScalarPotential::Radial(h) = self.h else {
            unreachable!("radial density requested for a grid potential")
        };
        let e = 2.0 * self.spin.h_sign() * h.eval(r);
        if r == 0.0 {
            return if self.k == 0 { e.exp() } else { 0.0 };
        }
        (2.0 * self.k as f64 * r.ln() + e).exp()
    }

    /// Decay exponent `p` of `|ψ_k|² ≈ (1+r²)^{-p}` at infinity.
    pub fn decay_exponent(&self) -> f64 {
        self.spin.h_sign() * self.h.alpha() - self.k as f64
    }

    /// `‖ψ_k‖² < ∞` iff `p > 1`.
    pub fn square_integrable(&self) -> bool {
        self.decay_exponent() > 1.0 + DELTA_INT
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm2 {
    Finite(f64),
    Divergent,
}

impl Norm2 {
    pub fn finite(self) -> Option<f64> {
        match self {
            Norm2::Finite(v) => Some(v),
            Norm2::Divergent => None,
        }
    }
}

/// `‖ψ_k‖²` or `Divergent`.
pub fn ac_norm2(state: &ACState, q: &QuadratureSpec) -> Result<Norm2> {
    if !state.square_integrable() {
        return Ok(Norm2::Divergent);
    }
    match state.h {
        ScalarPotential::Radial(_) => radial_moment(state, None, q).map(Norm2::Finite),
        ScalarPotential::Grid(g) => {
            let lattice = &g.values;
            let d2 = lattice.spacing * lattice.spacing;
            let mut sum = 0.0;
            for j in 0..lattice.ny {
                for i in 0..lattice.nx {
                    sum += state.eval(lattice.x(i), lattice.y(j)).norm_sqr();
                }
            }
            Ok(Norm2::Finite(d2 * sum))
        }
    }
}

/// `2π∫ r |ψ_k|² [V] dr` with a matched power-law tail.
fn radial_moment(state: &ACState, v: Option<&ScalarField2D>, q: &QuadratureSpec) -> Result<f64> {
    let (gl, panels) = q.rule();
    let f = |r: f64| state.density_radial(r) * v.map_or(1.0, |v| v.eval_radial(r));
    let body = panels.integrate(&gl, |r| f(r) * r);
    let p = state.decay_exponent() + v.map_or(0.0, |v| v.decay_exponent());
    let r = q.r_max;
    let fr = f(r);
    let tail_decl = tails::first_moment(r, fr, p);
    let tail_loc = tails::local_exponent(0.5 * r, f(0.5 * r), r, fr)
        .map_or(tail_decl, |pl| tails::first_moment(r, fr, pl));
    let (tail, unc) = if q.tail_correction {
        (tail_decl, (tail_decl - tail_loc).abs())
    } else {
        (0.0, tail_decl.abs())
    };
    let value = 2.0 * PI * (body + tail);
    if !(2.0 * PI * unc <= q.tolerance(value)) || !value.is_finite() {
        return Err(Error::Precision(format!(
            "state k={} moment tail beyond r = {r:.3e} uncertain by {:.3e}",
            state.k,
            2.0 * PI * unc
        )));
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StateInfo {
    pub k: usize,
    pub spin: Spin,
    /// Bounded but not square-integrable.
    #[serde(rename = "virtual")]
    pub virtual_state: bool,
}

/// Plain Gram matrix over the eigenstates and `V`-weighted Gram matrix over
/// eigenstates followed by the virtual states. For zero flux the two spin
/// zero modes `ψ₀^+`, `ψ₀^−` form a 2×2 diagonal `W` (different spin sectors).
#[derive(Debug, Clone)]
pub struct ACBasis {
    pub class: FluxClass,
    pub states: Vec<StateInfo>,
    pub g: CMatrix,
    pub w: CMatrix,
    pub radial: bool,
    pub provenance: String,
}

impl ACBasis {
    pub fn eigen_count(&self) -> usize {
        self.g.nrows()
    }

    /// `W` restricted to the eigenstates.
    pub fn w_eigen(&self) -> CMatrix {
        let n = self.eigen_count();
        self.w.view((0, 0), (n, n)).into_owned()
    }

    /// `W[k,k]` for the state with power `k` and the given spin.
    pub fn w_diag(&self, k: usize, spin: Spin) -> Option<f64> {
        self.states
            .iter()
            .position(|s| s.k == k && s.spin == spin)
            .map(|i| self.w[(i, i)].re)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ACBasisDoc::from(self))?)
    }
}

#[derive(Serialize)]
struct ACBasisDoc<'a> {
    class: &'a FluxClass,
    states: &'a [StateInfo],
    g: Vec<Vec<[f64; 2]>>,
    w: Vec<Vec<[f64; 2]>>,
    radial: bool,
    provenance: &'a str,
}

fn nested(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

impl<'a> From<&'a ACBasis> for ACBasisDoc<'a> {
    fn from(b: &'a ACBasis) -> Self {
        Self {
            class: &b.class,
            states: &b.states,
            g: nested(&b.g),
            w: nested(&b.w),
            radial: b.radial,
            provenance: &b.provenance,
        }
    }
}

fn state_list(class: &FluxClass) -> Vec<StateInfo> {
    if matches!(class.kind, FluxKind::Zero) {
        return vec![
            StateInfo { k: 0, spin: Spin::Plus, virtual_state: true },
            StateInfo { k: 0, spin: Spin::Minus, virtual_state: true },
        ];
    }
    let spin = class.active_spin();
    let mut states: Vec<StateInfo> = (0..class.n())
        .map(|k| StateInfo { k, spin, virtual_state: false })
        .collect();
    states.extend(class.virtual_powers().into_iter().map(|k| StateInfo { k, spin, virtual_state: true }));
    states
}

pub fn gram_matrices(setup: &MagneticSetup, v: &ScalarField2D, q: &QuadratureSpec) -> Result<ACBasis> {
    let states = state_list(&setup.class);
    let n = states.iter().filter(|s| !s.virtual_state).count();
    if setup.is_radial() && v.is_radial() {
        let mut g = CMatrix::zeros(n, n);
        let mut w = CMatrix::zeros(states.len(), states.len());
        for (i, s) in states.iter().enumerate() {
            let st = ACState::new(s.k, s.spin, &setup.h);
            if !s.virtual_state {
                g[(i, i)] = Complex64::new(radial_moment(&st, None, q)?, 0.0);
            }
            w[(i, i)] = Complex64::new(radial_moment(&st, Some(v), q)?, 0.0);
        }
        let QuadratureSpecView { order, panels } = QuadratureSpecView::of(q);
        return Ok(ACBasis {
            class: setup.class,
            states,
            g,
            w,
            radial: true,
            provenance: format!(
                "radial: Gauss-Legendre order {order} on {panels} log panels to r_max = {:e}, power-law tail {}; off-diagonals vanish by angular symmetry",
                q.r_max,
                if q.tail_correction { "added" } else { "neglected" }
            ),
        });
    }
    let lattice = match (v.grid(), &setup.h) {
        (Some(g), _) => g.clone(),
        (None, ScalarPotential::Grid(h)) => h.values.clone(),
        (None, ScalarPotential::Radial(_)) => unreachable!("radial pair handled above"),
    };
    let samples = sample_states(&setup.h, &states, &lattice);
    let vw: Vec<f64> = (0..lattice.ny)
        .flat_map(|j| (0..lattice.nx).map(move |i| (i, j)))
        .map(|(i, j)| v.eval(lattice.x(i), lattice.y(j)))
        .collect();
    let d2 = lattice.spacing * lattice.spacing;
    let gram = |a: &[Complex64], b: &[Complex64], weight: Option<&[f64]>| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, (x, y)) in a.iter().zip(b).enumerate() {
            acc += x.conj() * y * weight.map_or(1.0, |w| w[idx]);
        }
        acc * d2
    };
    let g = CMatrix::from_fn(n, n, |i, j| gram(&samples[i], &samples[j], None));
    let w = CMatrix::from_fn(states.len(), states.len(), |i, j| gram(&samples[i], &samples[j], Some(&vw)));
    Ok(ACBasis {
        class: setup.class,
        states,
        g: hermitize(g),
        w: hermitize(w),
        radial: false,
        provenance: format!(
            "lattice Riemann sum: {}x{} nodes, spacing {:e}, no exterior tail",
            lattice.nx, lattice.ny, lattice.spacing
        ),
    })
}

struct QuadratureSpecView {
    order: usize,
    panels: usize,
}

impl QuadratureSpecView {
    fn of(q: &QuadratureSpec) -> Self {
        let crate::field_model::QuadratureScheme::LogComposite { gl_order, .. } = q.scheme;
        Self { order: gl_order, panels: (q.nodes / gl_order).max(1) }
    }
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// State values on the lattice nodes (row-major, rows along y).
pub fn sample_states(h: &ScalarPotential, states: &[StateInfo], lattice: &Grid2D) -> Vec<Vec<Complex64>> {
    states
        .iter()
        .map(|s| {
            let st = ACState::new(s.k, s.spin, h);
            let mut out = Vec::with_capacity(lattice.nx * lattice.ny);
            for j in 0..lattice.ny {
                for i in 0..lattice.nx {
                    out.push(st.eval(lattice.x(i), lattice.y(j)));
                }
            }
            out
        })
        .collect()
}

/// Recombines the eigenstate basis by `T` (`ψ' = ψ T`): `G → T*GT` and the
/// eigenstate block of `W` likewise.
pub fn recombine(basis: &ACBasis, t: &CMatrix) -> Result<ACBasis> {
    let n = basis.eigen_count();
    if t.nrows() != n || t.ncols() != n {
        return Err(Error::Dimension { expected: n, found: t.nrows() });
    }
    let m = basis.w.nrows();
    let mut full = DMatrix::<Complex64>::identity(m, m);
    full.view_mut((0, 0), (n, n)).copy_from(t);
    let mut out = basis.clone();
    out.g = t.adjoint() * &basis.g * t;
    out.w = full.adjoint() * &basis.w * &full;
    out.provenance = format!("{} (recombined)", basis.provenance);
    Ok(out)
}
