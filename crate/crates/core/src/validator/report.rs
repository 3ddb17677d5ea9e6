//! Per-ε reconciliation of predicted branches with direct eigenvalues.

use serde::{Deserialize, Serialize};

use super::{
    calibrate_orientation, lowest_eigenvalues, radial_potential, CartesianSpec, DiscreteBacking, DiscretePauli,
    RadialSpec,
};
use crate::ac_basis::{gram_matrices, FluxKind, Spin};
use crate::asymptotics::{branch_set, predict, Branch, BranchKind, BranchSet, VirtualStates};
use crate::bs_lab::{self, FitKind};
use crate::error::Result;
use crate::field_model::{MagneticSetup, QuadratureSpec, ScalarField2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackingChoice {
    /// Radial channels when both fields are radial, Cartesian otherwise.
    #[default]
    Auto,
    Radial,
    Cartesian,
}

/// λ window for the Birman–Schwinger slope check of exponential branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeWindow {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
}

impl Default for SlopeWindow {
    fn default() -> Self {
        Self { lambda_min: -1e-2, lambda_max: -1e-5, points: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidatorSpec {
    pub eps: Vec<f64>,
    pub backing: BackingChoice,
    pub radial: RadialSpec,
    pub cartesian: CartesianSpec,
    /// Recompute the smallest-ε case on a refined grid and a doubled box.
    pub convergence: bool,
    pub bs_slope: Option<SlopeWindow>,
}

impl Default for ValidatorSpec {
    fn default() -> Self {
        Self {
            eps: Vec::new(),
            backing: BackingChoice::Auto,
            radial: RadialSpec::default(),
            cartesian: CartesianSpec::new(96, 12.0),
            convergence: true,
            bs_slope: Some(SlopeWindow::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub field: ScalarField2D,
    pub potential: ScalarField2D,
    pub quadrature: QuadratureSpec,
    pub solver: ValidatorSpec,
    pub virtual_states: VirtualStates,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub eps: f64,
    pub k: usize,
    pub spin: Spin,
    pub kind: BranchKind,
    pub predicted: Option<f64>,
    pub numeric: Option<f64>,
    pub rel_err: Option<f64>,
    pub method: String,
    pub flags: Vec<String>,
}

impl ReportRow {
    pub fn branch_label(&self) -> String {
        format!("{}{}", self.k, self.spin.symbol())
    }
}

/// Scaling fit of one branch across the ε list (or its Birman–Schwinger
/// substitute).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchFit {
    pub k: usize,
    pub spin: Spin,
    pub kind: BranchKind,
    pub model: String,
    pub exponent: Option<f64>,
    pub expected_exponent: Option<f64>,
    pub coefficient: Option<f64>,
    pub expected_coefficient: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub param: String,
    pub value: f64,
    pub lowest_eig: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub branches: Option<BranchSet>,
    pub rows: Vec<ReportRow>,
    pub fits: Vec<BranchFit>,
    pub convergence: Vec<ConvergenceRow>,
}

impl ValidationReport {
    pub fn row(&self, eps: f64, k: usize, spin: Spin) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.eps == eps && r.k == k && r.spin == spin)
    }

    pub fn fit(&self, k: usize, spin: Spin) -> Option<&BranchFit> {
        self.fits.iter().find(|f| f.k == k && f.spin == spin)
    }

    /// Rows `eps,branch,kind,predicted,numeric,rel_err,method,flags`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eps", "branch", "kind", "predicted", "numeric", "rel_err", "method", "flags"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                format!("{}", r.eps),
                r.branch_label(),
                r.kind.name().to_string(),
                opt(r.predicted),
                opt(r.numeric),
                opt(r.rel_err),
                r.method.clone(),
                r.flags.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows `param,value,lowest_eig`.
    pub fn write_convergence_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["param", "value", "lowest_eig"])?;
        for r in &self.convergence {
            w.write_record([r.param.clone(), format!("{}", r.value), format!("{:e}", r.lowest_eig)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn use_radial(setup: &MagneticSetup, v: &ScalarField2D, choice: BackingChoice) -> bool {
    match choice {
        BackingChoice::Auto => setup.is_radial() && v.is_radial(),
        BackingChoice::Radial => true,
        BackingChoice::Cartesian => false,
    }
}

fn assemble(
    setup: &MagneticSetup,
    v: &ScalarField2D,
    spin: Spin,
    radial: bool,
    rspec: &RadialSpec,
    cspec: &CartesianSpec,
) -> Result<DiscretePauli> {
    if radial {
        DiscretePauli::radial(setup, v, 0.0, spin, rspec)
    } else {
        DiscretePauli::cartesian(setup, v, 0.0, spin, cspec)
    }
}

struct SpinData {
    spin: Spin,
    pd0: Result<DiscretePauli>,
    /// Lowest `ε = 0` level above the zero modes (box/grid offset).
    offset: Option<f64>,
    branches: Vec<Branch>,
}

pub fn validate(config: &ValidationConfig) -> Result<ValidationReport> {
    let spec = &config.solver;
    if spec.eps.is_empty() {
        return Ok(ValidationReport { branches: None, rows: Vec::new(), fits: Vec::new(), convergence: Vec::new() });
    }
    let v = &config.potential;
    let setup = MagneticSetup::new(config.field.clone(), &config.quadrature)?;
    let basis = gram_matrices(&setup, v, &config.quadrature)?;
    let set = branch_set(&basis, &config.virtual_states)?;
    let radial = use_radial(&setup, v, spec.backing);
    let method = if radial { "radial-channels" } else { "cartesian" };

    let mut spins: Vec<Spin> = set.branches.iter().map(|b| b.spin).collect();
    spins.dedup();
    let spin_data: Vec<SpinData> = spins
        .into_iter()
        .map(|spin| {
            let pd0 = assemble(&setup, v, spin, radial, &spec.radial, &spec.cartesian);
            let zeros = if spin == set.class.active_spin() { set.class.n() } else { 0 };
            let offset = pd0
                .as_ref()
                .ok()
                .and_then(|pd| lowest_eigenvalues(pd, zeros + 1).ok())
                .and_then(|s| s.eigenvalues.get(zeros).copied());
            let branches = set.branches.iter().filter(|b| b.spin == spin).cloned().collect();
            SpinData { spin, pd0, offset, branches }
        })
        .collect();

    let mut eps_list = spec.eps.clone();
    eps_list.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    for &eps in &eps_list {
        let preds = match predict(&set, eps) {
            Ok(p) => p,
            Err(e) => {
                for b in &set.branches {
                    rows.push(error_row(eps, b, method, &e.to_string()));
                }
                continue;
            }
        };
        for sd in &spin_data {
            let mut mine: Vec<_> = preds.iter().filter(|p| p.spin == sd.spin).collect();
            mine.sort_by(|a, b| match (a.lambda, b.lambda) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => a.k.cmp(&b.k),
            });
            let slice = match &sd.pd0 {
                Ok(pd) => lowest_eigenvalues(&pd.with_coupling(eps), mine.len()),
                Err(e) => Err(crate::Error::Config(e.to_string())),
            };
            let slice = match slice {
                Ok(s) => s,
                Err(e) => {
                    for b in &sd.branches {
                        rows.push(error_row(eps, b, method, &e.to_string()));
                    }
                    continue;
                }
            };
            let mut next = 0;
            for p in mine {
                let mut flags = Vec::new();
                let mut row_method = method.to_string();
                let below = p.kind == BranchKind::Exponential
                    && match (p.lambda, sd.offset) {
                        (Some(l), Some(off)) => l.abs() < 10.0 * off.abs(),
                        _ => true,
                    };
                let mut numeric = None;
                if below {
                    flags.push("below-resolution".to_string());
                    row_method = "validated via BS slope".to_string();
                } else if let Some(&val) = slice.eigenvalues.get(next) {
                    next += 1;
                    if val < 0.0 {
                        numeric = Some(val);
                    } else {
                        flags.push("unbound".to_string());
                    }
                } else {
                    flags.push("missing".to_string());
                }
                if p.lambda.is_none() {
                    flags.push("mu-unavailable".to_string());
                }
                let rel_err = match (p.lambda, numeric) {
                    (Some(a), Some(b)) => Some(((b - a) / a).abs()),
                    _ => None,
                };
                rows.push(ReportRow {
                    eps,
                    k: p.k,
                    spin: p.spin,
                    kind: p.kind,
                    predicted: p.lambda,
                    numeric,
                    rel_err,
                    method: row_method,
                    flags,
                });
            }
        }
    }
    rows.sort_by(|a, b| a.eps.total_cmp(&b.eps).then(a.k.cmp(&b.k)).then(a.spin.symbol().cmp(b.spin.symbol())));

    let mut fits = Vec::new();
    for b in &set.branches {
        let sd = spin_data.iter().find(|s| s.spin == b.spin).expect("spin data");
        fits.push(branch_fit(b, &rows, sd, &setup, spec));
    }

    let convergence = if spec.convergence {
        convergence_table(&setup, v, &set, radial, spec, *eps_list.last().unwrap())
    } else {
        Vec::new()
    };
    Ok(ValidationReport { branches: Some(set), rows, fits, convergence })
}

fn error_row(eps: f64, b: &Branch, method: &str, msg: &str) -> ReportRow {
    ReportRow {
        eps,
        k: b.k,
        spin: b.spin,
        kind: b.kind,
        predicted: None,
        numeric: None,
        rel_err: None,
        method: method.to_string(),
        flags: vec![format!("error: {msg}")],
    }
}

fn log_log(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, (my - slope * mx).exp())
}

fn branch_fit(b: &Branch, rows: &[ReportRow], sd: &SpinData, setup: &MagneticSetup, spec: &ValidatorSpec) -> BranchFit {
    let data: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.k == b.k && r.spin == b.spin)
        .filter_map(|r| r.numeric.map(|v| (r.eps, v.abs())))
        .collect();
    let mut fit = BranchFit {
        k: b.k,
        spin: b.spin,
        kind: b.kind,
        model: String::new(),
        exponent: None,
        expected_exponent: None,
        coefficient: None,
        expected_coefficient: b.mu,
        note: String::new(),
    };
    match b.kind {
        BranchKind::Linear | BranchKind::Power { .. } => {
            fit.model = "log-log".into();
            fit.expected_exponent = Some(match b.kind {
                BranchKind::Power { exponent } => exponent,
                _ => 1.0,
            });
            if data.len() >= 2 {
                let (p, c) = log_log(&data);
                fit.exponent = Some(p);
                fit.coefficient = Some(c);
            } else {
                fit.note = "fewer than two resolved values".into();
            }
        }
        BranchKind::LogLinear => {
            fit.model = "eps/|log eps|".into();
            fit.expected_exponent = Some(1.0);
            let scaled: Vec<(f64, f64)> = data.iter().map(|&(e, l)| (e / e.ln().abs(), l)).collect();
            if scaled.len() >= 2 {
                let (p, c) = log_log(&scaled);
                fit.exponent = Some(p);
                fit.coefficient = Some(c);
            } else {
                fit.note = "fewer than two resolved values".into();
            }
        }
        BranchKind::Exponential => {
            fit.expected_exponent = b.mu.map(|mu| -1.0 / mu);
            if data.len() >= 2 {
                fit.model = "log|lambda| vs 1/eps".into();
                let n = data.len() as f64;
                let xs: Vec<f64> = data.iter().map(|d| 1.0 / d.0).collect();
                let ys: Vec<f64> = data.iter().map(|d| d.1.ln()).collect();
                let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
                let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
                let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
                fit.exponent = Some(sxy / sxx);
            } else {
                fit.model = "bs-slope".into();
                match bs_slope(b, sd, setup, spec) {
                    Ok(Some(a)) => {
                        fit.coefficient = Some(a);
                        fit.note = "validated via BS slope".into();
                    }
                    Ok(None) => fit.note = "below resolution; BS slope not configured".into(),
                    Err(e) => fit.note = format!("BS slope failed: {e}"),
                }
            }
        }
    }
    fit
}

/// Slope of the logarithmic Birman–Schwinger curve that carries branch `b`,
/// read in the single channel of its virtual state when the backing is radial.
fn bs_slope(b: &Branch, sd: &SpinData, setup: &MagneticSetup, spec: &ValidatorSpec) -> Result<Option<f64>> {
    let Some(window) = spec.bs_slope else { return Ok(None) };
    let pd = match &sd.pd0 {
        Ok(pd) => pd,
        Err(e) => return Err(crate::Error::Config(e.to_string())),
    };
    let lambdas = bs_lab::lambda_grid(window.lambda_min, window.lambda_max, window.points)?;
    let (restricted, index) = match &pd.backing {
        DiscreteBacking::RadialChannels(chs) => {
            let h = radial_potential(setup)?;
            let orientation = calibrate_orientation(h, &spec.radial.grid()?).sign;
            let flip = if setup.class.spin_flipped { -1 } else { 1 };
            let m = orientation * flip * b.k as i64;
            let only: Vec<_> = chs.iter().filter(|c| c.m == m).cloned().collect();
            (DiscretePauli { backing: DiscreteBacking::RadialChannels(only), spin: pd.spin, eps: pd.eps }, 0)
        }
        DiscreteBacking::Cartesian(_) => {
            if !matches!(setup.class.kind, FluxKind::Zero) {
                return Ok(None);
            }
            (pd.clone(), 0)
        }
    };
    let points = bs_lab::bs_eigencurve(&restricted, &lambdas, index + 1)?;
    let fit = bs_lab::fit_singular_model(&bs_lab::curve(&points, index), FitKind::LogSlope)?;
    Ok(fit.param("a"))
}

fn convergence_table(
    setup: &MagneticSetup,
    v: &ScalarField2D,
    set: &BranchSet,
    radial: bool,
    spec: &ValidatorSpec,
    eps: f64,
) -> Vec<ConvergenceRow> {
    let spin = set.class.active_spin();
    let lowest = |r: &RadialSpec, c: &CartesianSpec| -> Option<f64> {
        let pd = assemble(setup, v, spin, radial, r, c).ok()?;
        lowest_eigenvalues(&pd.with_coupling(eps), 1).ok()?.lowest()
    };
    let (r, c) = (spec.radial, spec.cartesian);
    let mut out = Vec::new();
    let mut push = |param: &str, value: f64, l: Option<f64>| {
        if let Some(l) = l {
            out.push(ConvergenceRow { param: param.into(), value, lowest_eig: l });
        }
    };
    if radial {
        push("nodes", r.nodes as f64, lowest(&r, &c));
        push("nodes", (2 * r.nodes) as f64, lowest(&RadialSpec { nodes: 2 * r.nodes, ..r }, &c));
        push("r_max", 2.0 * r.r_max, lowest(&RadialSpec { r_max: 2.0 * r.r_max, ..r }, &c));
    } else {
        push("n", c.n as f64, lowest(&r, &c));
        let finer = CartesianSpec { n: c.n * 3 / 2, ..c };
        push("n", finer.n as f64, lowest(&r, &finer));
        let bigger = CartesianSpec { n: c.n * 2, half_width: 2.0 * c.half_width, ..c };
        push("half_width", bigger.half_width, lowest(&r, &bigger));
    }
    out
}
