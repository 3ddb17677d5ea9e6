//! Birman–Schwinger matrices `M(λ) = v(P − λ)⁻¹v` of a discretized operator,
//! singular-curve fits and the crossing equation `ε·μ_k(M(λ)) = 1`.

mod fit;
pub mod slfg;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::banded::BandedLdl;
use crate::numerics::dense::{hermitian_eigen_desc, CMatrix};
use crate::numerics::lanczos::{self, LanczosOptions};
use crate::numerics::tridiag::SymTridiag;
use crate::validator::{DiscreteBacking, DiscretePauli};

pub use fit::{fit_singular_model, fit_with_threshold, write_fit_csv, FitKind, FitModel, FIT_THRESHOLD};
pub use slfg::{kernel_dim, planted_case, planted_kernel_matrix, schur_complement, BlockPartition, KERNEL_TOL};

pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-12;

/// Blocks up to this size are diagonalized densely.
const DENSE_LIMIT: usize = 160;

enum Block {
    Channel {
        k0: SymTridiag,
        mass: Vec<f64>,
        support: Vec<usize>,
        dv: Vec<f64>,
    },
    Grid {
        ldl: BandedLdl,
        n: usize,
        support: Vec<usize>,
        dv: Vec<f64>,
    },
}

impl Block {
    fn dim(&self) -> usize {
        match self {
            Block::Channel { support, .. } | Block::Grid { support, .. } => support.len(),
        }
    }
}

/// `M(λ)` on the nodes where `V ≥ threshold·max V`, kept as a product of
/// factorizations (direct sum over channels for the radial backing).
pub struct BSMatrix {
    pub lambda: f64,
    blocks: Vec<Block>,
}

impl std::fmt::Debug for BSMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BSMatrix")
            .field("lambda", &self.lambda)
            .field("blocks", &self.blocks.len())
            .field("dim", &self.dim())
            .finish()
    }
}

fn support_of(values: &[f64], threshold: f64) -> Vec<usize> {
    let vmax = values.iter().cloned().fold(0.0f64, f64::max);
    if vmax <= 0.0 {
        return Vec::new();
    }
    (0..values.len()).filter(|&i| values[i] > 0.0 && values[i] >= threshold * vmax).collect()
}

pub fn assemble_bs(pd: &DiscretePauli, lambda: f64, support_threshold: f64) -> Result<BSMatrix> {
    if !(lambda < 0.0) {
        return Err(Error::Domain(format!("lambda = {lambda} must be negative")));
    }
    let blocks = match &pd.backing {
        DiscreteBacking::RadialChannels(chs) => chs
            .iter()
            .filter_map(|c| {
                let v: Vec<f64> = c
                    .v_mass
                    .iter()
                    .zip(&c.mass)
                    .map(|(vm, m)| if m.is_finite() && *m > 0.0 { vm / m } else { 0.0 })
                    .collect();
                let support = support_of(&v, support_threshold);
                if support.is_empty() {
                    return None;
                }
                let mut k0 = c.op.clone();
                for (d, vm) in k0.diag.iter_mut().zip(&c.v_mass) {
                    *d += c.eps * vm;
                }
                let dv = support.iter().map(|&i| c.v_mass[i].sqrt()).collect();
                Some(Block::Channel { k0, mass: c.mass.clone(), support, dv })
            })
            .collect(),
        DiscreteBacking::Cartesian(op) => {
            let support = support_of(&op.v, support_threshold);
            if support.is_empty() {
                Vec::new()
            } else {
                let mut k0 = op.k.clone();
                let d2 = op.mass();
                for (p, v) in op.v.iter().enumerate() {
                    k0.add_diag(p, op.eps * d2 * v);
                }
                let ldl = k0.factor_shifted(lambda, d2).map_err(|_| Error::Shift {
                    lambda,
                    suggested: lambda * (1.0 + 1e-3),
                })?;
                let dv = support.iter().map(|&i| (d2 * op.v[i]).sqrt()).collect();
                vec![Block::Grid { ldl, n: op.dim(), support, dv }]
            }
        }
    };
    let m = BSMatrix { lambda, blocks };
    // probe the channel factorizations once so shift failures surface here
    for b in &m.blocks {
        if let Block::Channel { .. } = b {
            let x = vec![1.0; b.dim()];
            m.apply_channel(b, &x)?;
        }
    }
    Ok(m)
}

impl BSMatrix {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::dim).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    fn apply_channel(&self, b: &Block, x: &[f64]) -> Result<Vec<f64>> {
        let Block::Channel { k0, mass, support, dv } = b else { unreachable!() };
        let mut rhs = vec![0.0; k0.len()];
        for ((&i, &d), &xi) in support.iter().zip(dv).zip(x) {
            rhs[i] = d * xi;
        }
        let y = k0.solve_shifted(self.lambda, mass, &rhs)?;
        Ok(support.iter().zip(dv).map(|(&i, &d)| d * y[i]).collect())
    }

    fn apply_grid(b: &Block, x: &[Complex64]) -> Vec<Complex64> {
        let Block::Grid { ldl, n, support, dv } = b else { unreachable!() };
        let mut rhs = vec![Complex64::new(0.0, 0.0); *n];
        for ((&i, &d), &xi) in support.iter().zip(dv).zip(x) {
            rhs[i] = xi * d;
        }
        let y = ldl.solve(&rhs);
        support.iter().zip(dv).map(|(&i, &d)| y[i] * d).collect()
    }

    fn block_dense(&self, b: &Block) -> Result<CMatrix> {
        let n = b.dim();
        let mut m = CMatrix::zeros(n, n);
        for j in 0..n {
            let col: Vec<Complex64> = match b {
                Block::Channel { .. } => {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    self.apply_channel(b, &e)?.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
                }
                Block::Grid { .. } => {
                    let mut e = vec![Complex64::new(0.0, 0.0); n];
                    e[j] = Complex64::new(1.0, 0.0);
                    Self::apply_grid(b, &e)
                }
            };
            for (i, v) in col.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok((&m + m.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// Dense Hermitized matrix (block diagonal over channels).
    pub fn to_dense(&self) -> Result<CMatrix> {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let d = self.block_dense(b)?;
            out.view_mut((off, off), (d.nrows(), d.ncols())).copy_from(&d);
            off += d.nrows();
        }
        Ok(out)
    }

    /// The `p` largest eigenvalues, descending.
    pub fn top(&self, p: usize) -> Result<Vec<f64>> {
        let mut all = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let n = b.dim();
            let want = p.min(n);
            if want == 0 {
                continue;
            }
            if n <= DENSE_LIMIT {
                let (vals, _) = hermitian_eigen_desc(&self.block_dense(b)?);
                all.extend(vals.into_iter().take(want));
                continue;
            }
            let opts = LanczosOptions {
                max_iter: n.min(400),
                tol: 1e-9,
                seed: 0x5eed + i as u64,
                // channel spectra are simple; a 2D grid may have multiplicities
                probe_multiplicity: matches!(b, Block::Grid { .. }),
            };
            let vals = match b {
                Block::Channel { .. } => {
                    let mut failure = None;
                    let vals = lanczos::largest::<f64>(
                        n,
                        want,
                        |x| match self.apply_channel(b, x) {
                            Ok(y) => y,
                            Err(e) => {
                                failure.get_or_insert(e);
                                vec![0.0; x.len()]
                            }
                        },
                        opts,
                    )?;
                    if let Some(e) = failure {
                        return Err(e);
                    }
                    vals
                }
                Block::Grid { .. } => lanczos::largest::<Complex64>(n, want, |x| Self::apply_grid(b, x), opts)?,
            };
            all.extend(vals);
        }
        all.sort_by(|a, b| b.total_cmp(a));
        all.truncate(p);
        Ok(all)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub lambda: f64,
    /// Largest eigenvalues of `M(λ)`, descending.
    pub values: Vec<f64>,
}

/// Top-`p` eigenvalues of `M(λ)` along a sorted grid of negative `λ`.
pub fn bs_eigencurve(pd: &DiscretePauli, lambdas: &[f64], top_p: usize) -> Result<Vec<CurvePoint>> {
    bs_eigencurve_with(pd, lambdas, top_p, DEFAULT_SUPPORT_THRESHOLD)
}

pub fn bs_eigencurve_with(
    pd: &DiscretePauli,
    lambdas: &[f64],
    top_p: usize,
    support_threshold: f64,
) -> Result<Vec<CurvePoint>> {
    if lambdas.iter().any(|l| !(*l < 0.0)) {
        return Err(Error::Domain("all lambda values must be negative".into()));
    }
    if lambdas.windows(2).any(|w| !(w[0] < w[1]) && !(w[0] > w[1])) {
        return Err(Error::Domain("lambda values must be sorted and distinct".into()));
    }
    lambdas
        .par_iter()
        .map(|&lambda| {
            let m = assemble_bs(pd, lambda, support_threshold)?;
            Ok(CurvePoint { lambda, values: m.top(top_p)? })
        })
        .collect()
}

/// Geometric grid of `points` values from `lambda_min` to `lambda_max`
/// (both negative), sorted ascending.
pub fn lambda_grid(lambda_min: f64, lambda_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(lambda_min < lambda_max && lambda_max < 0.0) {
        return Err(Error::Domain(format!(
            "need lambda_min < lambda_max < 0, got {lambda_min}, {lambda_max}"
        )));
    }
    if points == 0 {
        return Ok(Vec::new());
    }
    if points == 1 {
        return Ok(vec![lambda_min]);
    }
    let (a, b) = ((-lambda_min).ln(), (-lambda_max).ln());
    Ok((0..points)
        .map(|i| -(a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

/// Values of curve `index` as `(λ, μ)` pairs.
pub fn curve(points: &[CurvePoint], index: usize) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter_map(|p| p.values.get(index).map(|v| (p.lambda, *v)))
        .collect()
}

/// Rows `lambda,curve_index,eigenvalue`.
pub fn write_scan_csv<W: std::io::Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "curve_index", "eigenvalue"])?;
    for p in points {
        for (i, v) in p.values.iter().enumerate() {
            w.write_record([format!("{:e}", p.lambda), i.to_string(), format!("{v:e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Root of `ε·μ_k(M(λ)) = 1` inside `bracket`, to relative `1e-4` in `λ`.
pub fn solve_branch(pd: &DiscretePauli, eps: f64, k: usize, bracket: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = if bracket.0 < bracket.1 { bracket } else { (bracket.1, bracket.0) };
    if !(hi < 0.0) {
        return Err(Error::Domain("bracket must lie in lambda < 0".into()));
    }
    let g = |l: f64| -> Result<f64> {
        let m = assemble_bs(pd, l, DEFAULT_SUPPORT_THRESHOLD)?;
        Ok(eps * m.top(k + 1)?.get(k).copied().unwrap_or(0.0) - 1.0)
    };
    let (mut g_lo, mut g_hi) = (g(lo)?, g(hi)?);
    if g_lo > 0.0 && g_hi < 0.0 {
        return Err(Error::NonMonotone(format!(
            "g({lo:e}) = {g_lo:e} > 0 > g({hi:e}) = {g_hi:e}"
        )));
    }
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::Bracket { lo, hi, g_lo, g_hi });
    }
    // bisection in log|λ| down to 1e-3, then safeguarded secant
    while (hi - lo) > 1e-3 * hi.abs() {
        let mid = if lo / hi > 4.0 { -(lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let gm = g(mid)?;
        if gm < 0.0 {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            g_hi = gm;
        }
    }
    for _ in 0..60 {
        if (hi - lo) <= 1e-4 * hi.abs() {
            break;
        }
        let mut x = hi - g_hi * (hi - lo) / (g_hi - g_lo);
        let margin = 0.05 * (hi - lo);
        if !(x > lo + margin && x < hi - margin) {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x)?;
        if gx < 0.0 {
            lo = x;
            g_lo = gx;
        } else {
            hi = x;
            g_hi = gx;
        }
    }
    if g_lo > g_hi {
        return Err(Error::NonMonotone("curve decreased inside the bracket".into()));
    }
    Ok(0.5 * (lo + hi))
}
