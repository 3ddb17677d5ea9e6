//! Direct discretizations of `P_± − εV` and reconciliation with predictions.

pub mod cartesian;
pub mod radial;
mod report;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ac_basis::{FluxClass, Spin};
use crate::error::{Error, Result};
use crate::field_model::{MagneticSetup, ScalarField2D, ScalarPotential};
use crate::numerics::lanczos::{self, LanczosOptions};

pub use cartesian::{assemble_cartesian, assemble_cartesian_gauged, CartesianOperator, CartesianSpec};
pub use radial::{assemble_radial_channel, calibrate_orientation, Orientation, RadialChannel, RadialGrid};
pub use report::{
    validate, BackingChoice, BranchFit, ConvergenceRow, ReportRow, ValidationConfig, ValidationReport, SlopeWindow, ValidatorSpec,
};

/// Radial grid and channel range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadialSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: usize,
    /// `M` in `m ∈ [−M, M]`; `None` picks `max(8, n + 4)`.
    pub channels: Option<usize>,
}

impl Default for RadialSpec {
    fn default() -> Self {
        Self { r_min: 1e-4, r_max: 1e6, nodes: 2000, channels: None }
    }
}

impl RadialSpec {
    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.r_min, self.r_max, self.nodes)
    }

    pub fn channel_range(&self, class: &FluxClass) -> usize {
        self.channels.unwrap_or_else(|| default_channel_range(class))
    }
}

pub fn default_channel_range(class: &FluxClass) -> usize {
    8.max(class.n() + 4)
}

#[derive(Debug, Clone)]
pub enum DiscreteBacking {
    RadialChannels(Vec<RadialChannel>),
    Cartesian(CartesianOperator),
}

#[derive(Debug, Clone)]
pub struct DiscretePauli {
    pub backing: DiscreteBacking,
    pub spin: Spin,
    pub eps: f64,
}

fn radial_potential(setup: &MagneticSetup) -> Result<&crate::field_model::RadialPotential> {
    match &setup.h {
        ScalarPotential::Radial(p) => Ok(p),
        ScalarPotential::Grid(_) => Err(Error::WrongBacking { expected: "radial", found: "grid" }),
    }
}

impl DiscretePauli {
    pub fn radial(setup: &MagneticSetup, v: &ScalarField2D, eps: f64, spin: Spin, spec: &RadialSpec) -> Result<Self> {
        let h = radial_potential(setup)?;
        let grid = spec.grid()?;
        let m_max = spec.channel_range(&setup.class) as i64;
        let channels = (-m_max..=m_max)
            .map(|m| assemble_radial_channel(m, spin, h, v, eps, &grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { backing: DiscreteBacking::RadialChannels(channels), spin, eps })
    }

    pub fn cartesian(
        setup: &MagneticSetup,
        v: &ScalarField2D,
        eps: f64,
        spin: Spin,
        spec: &CartesianSpec,
    ) -> Result<Self> {
        let op = assemble_cartesian(&setup.a, &setup.field, v, eps, spec, spin)?;
        Ok(Self { backing: DiscreteBacking::Cartesian(op), spin, eps })
    }

    /// The same discretization at another coupling.
    pub fn with_coupling(&self, eps: f64) -> Self {
        let de = eps - self.eps;
        let backing = match &self.backing {
            DiscreteBacking::RadialChannels(chs) => DiscreteBacking::RadialChannels(
                chs.iter()
                    .map(|c| {
                        let mut c = c.clone();
                        for (d, vm) in c.op.diag.iter_mut().zip(&c.v_mass) {
                            *d -= de * vm;
                        }
                        c.eps = eps;
                        c
                    })
                    .collect(),
            ),
            DiscreteBacking::Cartesian(op) => {
                let mut op = op.clone();
                let d2 = op.mass();
                for (p, v) in op.v.iter().enumerate() {
                    op.k.add_diag(p, -de * d2 * v);
                }
                op.eps = eps;
                DiscreteBacking::Cartesian(op)
            }
        };
        Self { backing, spin: self.spin, eps }
    }

    pub fn dim(&self) -> usize {
        match &self.backing {
            DiscreteBacking::RadialChannels(chs) => chs.iter().map(|c| c.op.len()).sum(),
            DiscreteBacking::Cartesian(op) => op.dim(),
        }
    }
}

/// Where an eigenvalue came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum EigenSource {
    Channel { m: i64 },
    Grid,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TruncationDiagnostics {
    /// Relative change of the lowest eigenvalue when the box doubles.
    pub box_sensitivity: Option<f64>,
    /// Relative change of the lowest eigenvalue under grid refinement.
    pub grid_sensitivity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSlice {
    pub eigenvalues: Vec<f64>,
    pub sources: Vec<EigenSource>,
    pub negative_count: usize,
    pub diagnostics: TruncationDiagnostics,
}

impl SpectrumSlice {
    pub fn lowest(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }
}

const CHANNEL_RTOL: f64 = 1e-10;

/// The `k` lowest eigenvalues (merged over channels for the radial backing).
pub fn lowest_eigenvalues(pd: &DiscretePauli, k: usize) -> Result<SpectrumSlice> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let negative_count = count_negative(pd)?;
    let mut pairs: Vec<(f64, EigenSource)> = match &pd.backing {
        DiscreteBacking::RadialChannels(chs) => chs
            .iter()
            .flat_map(|c| c.lowest(k, CHANNEL_RTOL).into_iter().map(move |l| (l, EigenSource::Channel { m: c.m })))
            .collect(),
        DiscreteBacking::Cartesian(op) => cartesian_lowest(op, k, negative_count)?
            .into_iter()
            .map(|l| (l, EigenSource::Grid))
            .collect(),
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(k);
    // the inertia count is authoritative for the sign pattern
    let listed_negative = pairs.iter().filter(|p| p.0 < 0.0).count();
    if listed_negative != negative_count.min(pairs.len()) {
        log::warn!("listed negatives {listed_negative} disagree with inertia count {negative_count}");
    }
    Ok(SpectrumSlice {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        sources: pairs.iter().map(|p| p.1).collect(),
        negative_count,
        diagnostics: TruncationDiagnostics::default(),
    })
}

/// Shift-invert Lanczos around `σ ≈ 0`: the negative eigenvalues are the
/// most negative Ritz values of `(K − σM)⁻¹M`, the lowest positive ones the
/// largest.
fn cartesian_lowest(op: &CartesianOperator, k: usize, negatives: usize) -> Result<Vec<f64>> {
    let mass = op.mass();
    let (sigma, ldl) = factor_with_jitter(op, 0.0)?;
    let n = op.dim();
    let opts = LanczosOptions { max_iter: 400.min(n), ..Default::default() };
    let apply = |sign: f64| {
        let ldl = &ldl;
        move |x: &[Complex64]| -> Vec<Complex64> {
            ldl.solve(x).into_iter().map(|v| v * (sign * mass)).collect()
        }
    };
    let below = ldl.negative_pivots();
    let mut out = Vec::new();
    if below > 0 {
        let thetas = lanczos::largest(n, below.min(k), apply(-1.0), opts).map_err(|e| hint(e, "negative side"))?;
        out.extend(thetas.iter().map(|t| sigma - 1.0 / t));
    }
    let rest = k.saturating_sub(below);
    if rest > 0 {
        let thetas = lanczos::largest(n, rest, apply(1.0), opts).map_err(|e| hint(e, "positive side"))?;
        out.extend(thetas.iter().filter(|t| **t > 0.0).map(|t| sigma + 1.0 / t));
    }
    debug_assert!(below == negatives || sigma != 0.0);
    Ok(out)
}

fn hint(e: Error, side: &str) -> Error {
    match e {
        Error::Iteration { iterations, .. } => Error::Iteration {
            iterations,
            hint: format!("{side}: increase the Lanczos budget or request fewer eigenvalues"),
        },
        other => other,
    }
}

fn factor_with_jitter(op: &CartesianOperator, sigma: f64) -> Result<(f64, crate::numerics::banded::BandedLdl)> {
    let mass = op.mass();
    let scale = 1e-9;
    let mut last = None;
    for (i, s) in [sigma, sigma - scale, sigma + scale, sigma - 10.0 * scale].into_iter().enumerate() {
        match op.k.factor_shifted(s, mass) {
            Ok(f) => {
                if i > 0 {
                    log::info!("factorization needed a jitter shift to {s:e}");
                }
                return Ok((s, f));
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

/// Exact number of negative eigenvalues of the discrete operator (inertia).
pub fn count_negative(pd: &DiscretePauli) -> Result<usize> {
    match &pd.backing {
        DiscreteBacking::RadialChannels(chs) => Ok(chs.iter().map(|c| c.count_negative()).sum()),
        DiscreteBacking::Cartesian(op) => Ok(factor_with_jitter(op, 0.0)?.1.negative_pivots()),
    }
}

/// Negative counts at increasing Dirichlet radii from one long grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountLadder {
    pub spin: Spin,
    pub eps: f64,
    pub rows: Vec<(f64, usize)>,
}

impl CountLadder {
    /// True when the last `k + 1` rows agree.
    pub fn stable_over_last(&self, k: usize) -> bool {
        if self.rows.len() < k + 1 {
            return false;
        }
        let tail = &self.rows[self.rows.len() - k - 1..];
        tail.iter().all(|r| r.1 == tail[0].1)
    }

    pub fn last_count(&self) -> Option<usize> {
        self.rows.last().map(|r| r.1)
    }
}

/// Box ladder `R = r0·2^j ≤ r_max`. Weakly bound states reach out to radii
/// like `e^{1/(2με)}`, so the grid runs to `r_max` in `ln r` with the mass
/// never formed (only the inertia at `λ = 0` is needed).
pub fn count_ladder(
    setup: &MagneticSetup,
    v: &ScalarField2D,
    eps: f64,
    spin: Spin,
    r_min: f64,
    dt: f64,
    r0: f64,
    ln_r_max: f64,
    channels: Option<usize>,
) -> Result<CountLadder> {
    let h = radial_potential(setup)?;
    let n = ((ln_r_max - r_min.ln()) / dt).ceil() as usize + 1;
    let grid = RadialGrid { r_min, r_max: (r_min.ln() + dt * (n - 1) as f64).exp(), nodes: n };
    let m_max = channels.unwrap_or_else(|| default_channel_range(&setup.class)) as i64;
    let mut radii = Vec::new();
    let mut r = r0;
    while r.ln() <= ln_r_max {
        radii.push(r);
        r *= 2.0;
    }
    let mut totals = vec![0usize; radii.len()];
    for m in -m_max..=m_max {
        let ch = assemble_radial_channel(m, spin, h, v, eps, &grid)?;
        let prefix = ch.op.prefix_negative_counts();
        for (i, r) in radii.iter().enumerate() {
            // rows 0..=j carry Dirichlet at node j + 1
            let j = (((r.ln() - r_min.ln()) / dt).round() as usize).clamp(1, n - 1) - 1;
            totals[i] += prefix[j];
        }
    }
    Ok(CountLadder { spin, eps, rows: radii.into_iter().zip(totals).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_model::QuadratureSpec;

    fn setup(beta: f64) -> MagneticSetup {
        MagneticSetup::new(ScalarField2D::rational(beta), &QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn free_box_ground_state() {
        let s = setup(0.0);
        let spec = CartesianSpec::new(40, 5.0);
        let pd = DiscretePauli::cartesian(&s, &ScalarField2D::zero(), 0.0, Spin::Minus, &spec).unwrap();
        let slice = lowest_eigenvalues(&pd, 3).unwrap();
        let d = spec.spacing();
        // discrete Dirichlet Laplacian: (4/d²)·sin²(π d/(4R)) per direction
        let one = 4.0 / (d * d) * (std::f64::consts::PI * d / (4.0 * 5.0)).sin().powi(2);
        let exact = 2.0 * one;
        assert!((slice.eigenvalues[0] - exact).abs() < 1e-9 * exact, "{exact} {slice:?}");
        assert!((exact - 2.0 * (std::f64::consts::PI / 10.0).powi(2)).abs() < 0.01 * exact);
        assert_eq!(slice.negative_count, 0);
        // the second level is doubly degenerate
        assert!((slice.eigenvalues[1] - slice.eigenvalues[2]).abs() < 1e-9 * slice.eigenvalues[1], "{slice:?}");
    }

    #[test]
    fn linear_branch_in_channels() {
        let s = setup(1.5);
        let v = ScalarField2D::power(1.0, 3.5);
        let pd = DiscretePauli::radial(&s, &v, 0.01, Spin::Minus, &RadialSpec::default()).unwrap();
        let slice = lowest_eigenvalues(&pd, 3).unwrap();
        let l0 = slice.eigenvalues[0];
        assert!((l0 + 1.25e-3).abs() < 0.1 * 1.25e-3, "{l0}");
        assert_eq!(slice.sources[0], EigenSource::Channel { m: 0 });
        assert_eq!(slice.negative_count, 2);
    }

    #[test]
    fn coupling_shift_matches_fresh_assembly() {
        let s = setup(1.5);
        let v = ScalarField2D::power(1.0, 3.5);
        let spec = RadialSpec { nodes: 600, channels: Some(2), ..Default::default() };
        let a = DiscretePauli::radial(&s, &v, 0.0, Spin::Minus, &spec).unwrap().with_coupling(0.05);
        let b = DiscretePauli::radial(&s, &v, 0.05, Spin::Minus, &spec).unwrap();
        let la = lowest_eigenvalues(&a, 2).unwrap();
        let lb = lowest_eigenvalues(&b, 2).unwrap();
        for (x, y) in la.eigenvalues.iter().zip(&lb.eigenvalues) {
            assert!((x - y).abs() < 1e-12 * y.abs().max(1e-12));
        }
    }

    #[test]
    fn spin_plus_has_no_bound_states() {
        let v = ScalarField2D::power(1.0, 3.5);
        for beta in [1.5, 2.0] {
            let pd = DiscretePauli::radial(&setup(beta), &v, 0.4, Spin::Plus, &RadialSpec::default()).unwrap();
            assert_eq!(count_negative(&pd).unwrap(), 0);
        }
    }
}
