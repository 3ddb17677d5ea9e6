//! Command-line front end: `analyze`, `predict`, `validate`, `bs-scan`.

pub mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::ac_basis::{ac_norm2, gram_matrices, ACState, FluxClass, FluxKind, Norm2, Spin};
use crate::asymptotics::{branch_set, predict, BranchKind, BranchSet};
use crate::bs_lab::{self, FitKind, FitModel, FIT_THRESHOLD};
use crate::error::{Error, Result};
use crate::field_model::{check_assumptions, AssumptionReport, MagneticSetup};
use crate::validator::{self, DiscretePauli, ValidationConfig, ValidationReport};

pub use config::{check_eps, Checks, FieldSpec, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "pauli-weak", version, about = "Weak-coupling eigenvalue asymptotics of the 2D Pauli operator")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Relative quadrature tolerance (overrides `quadrature.rel_tol`).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Also write long-format CSVs for plotting.
    #[arg(long, global = true)]
    pub plot_data: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Flux, flux class, assumption checks and zero-mode norms.
    Analyze,
    /// First-order branch values at the given couplings.
    Predict {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        eps: Vec<f64>,
    },
    /// Direct-spectrum reconciliation over `validator.eps`.
    Validate,
    /// Birman–Schwinger eigenvalue curves and singular fits.
    BsScan {
        #[arg(long, default_value_t = -1e-2, allow_negative_numbers = true)]
        lambda_min: f64,
        #[arg(long, default_value_t = -1e-5, allow_negative_numbers = true)]
        lambda_max: f64,
        #[arg(long, default_value_t = 12)]
        points: usize,
        #[arg(long, default_value_t = 3)]
        top: usize,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_)
        | Error::InvalidField(_)
        | Error::Assumption(_)
        | Error::NonIntegrableField(_)
        | Error::WrongBacking { .. }
        | Error::Domain(_)
        | Error::Grid(_)
        | Error::Size { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let path = cli.common.config.as_ref().ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(t) = cli.common.tol {
        if !(t > 0.0) {
            return Err(Error::Config(format!("--tol must be positive, got {t}")));
        }
        cfg.quadrature.rel_tol = t;
    }
    if let Some(out) = &cli.common.out {
        cfg.output_dir = out.clone();
    }
    let plot = cli.common.plot_data;
    match &cli.command {
        Command::Analyze => {
            let doc = cmd_analyze(&cfg)?;
            let json = serde_json::to_string_pretty(&doc)?;
            println!("{json}");
            write_text(&cfg.output_dir, "analysis.json", &json)?;
            Ok(EXIT_OK)
        }
        Command::Predict { eps } => {
            let rows = cmd_predict(&cfg, eps)?;
            let dir = ensure_dir(&cfg.output_dir)?;
            write_predictions_csv(&rows, create(&dir, "predictions.csv")?)?;
            if plot {
                write_predictions_plot(&rows, create(&dir, "plot_predictions.csv")?)?;
            }
            println!("wrote {} prediction rows to {}", rows.len(), dir.join("predictions.csv").display());
            Ok(EXIT_OK)
        }
        Command::Validate => {
            let outcome = cmd_validate(&cfg, plot)?;
            for f in &outcome.failures {
                println!("FAIL {f}");
            }
            if outcome.passed() {
                println!("all checks passed");
                Ok(EXIT_OK)
            } else {
                Ok(EXIT_ACCEPTANCE)
            }
        }
        Command::BsScan { lambda_min, lambda_max, points, top } => {
            let scan = cmd_bs_scan(&cfg, *lambda_min, *lambda_max, *points, *top, plot)?;
            println!("scanned {} lambda values, {} fits", scan.points.len(), scan.fits.len());
            Ok(EXIT_OK)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let mut f = create(&ensure_dir(dir)?, name)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn setup(cfg: &RunConfig) -> Result<(MagneticSetup, crate::field_model::ScalarField2D)> {
    let b = cfg.build_field()?;
    let v = cfg.build_potential()?;
    let setup = MagneticSetup::new(b, &cfg.quadrature)?;
    Ok((setup, v))
}

#[derive(Debug, Clone, Serialize)]
pub struct NormEntry {
    pub k: usize,
    pub spin: Spin,
    /// `‖ψ_k‖²`, absent when divergent.
    pub norm2: Option<f64>,
    pub square_integrable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub alpha: f64,
    pub class: FluxClass,
    pub class_label: String,
    pub n: usize,
    /// Number of weakly coupled negative eigenvalues.
    pub n_prime: usize,
    pub active_spin: Spin,
    pub outside_hypotheses: bool,
    pub assumptions: AssumptionReport,
    pub ac_norms: Vec<NormEntry>,
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<Analysis> {
    let b = cfg.build_field()?;
    let v = cfg.build_potential()?;
    let assumptions = check_assumptions(&b, &v)?;
    let setup = MagneticSetup::new(b, &cfg.quadrature)?;
    let class = setup.class;
    let states: Vec<(usize, Spin)> = match class.kind {
        FluxKind::Zero => vec![(0, Spin::Plus), (0, Spin::Minus)],
        _ => (0..=*class.virtual_powers().last().unwrap()).map(|k| (k, class.active_spin())).collect(),
    };
    let mut ac_norms = Vec::new();
    for (k, spin) in states {
        let st = ACState::new(k, spin, &setup.h);
        let norm = ac_norm2(&st, &cfg.quadrature)?;
        ac_norms.push(NormEntry { k, spin, norm2: norm.finite(), square_integrable: matches!(norm, Norm2::Finite(_)) });
    }
    Ok(Analysis {
        alpha: setup.alpha,
        class,
        class_label: class.label(),
        n: class.n(),
        n_prime: class.branch_count(),
        active_spin: class.active_spin(),
        outside_hypotheses: assumptions.outside_hypotheses(),
        assumptions,
        ac_norms,
    })
}

fn branches(cfg: &RunConfig) -> Result<BranchSet> {
    let (setup, v) = setup(cfg)?;
    let basis = gram_matrices(&setup, &v, &cfg.quadrature)?;
    branch_set(&basis, &cfg.virtual_states)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub eps: f64,
    pub k: usize,
    pub spin: Spin,
    pub kind: BranchKind,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub error_order: String,
}

impl PredictionRow {
    pub fn branch_label(&self) -> String {
        format!("{}{}", self.k, self.spin.symbol())
    }
}

pub fn cmd_predict(cfg: &RunConfig, eps: &[f64]) -> Result<Vec<PredictionRow>> {
    check_eps(eps)?;
    let set = branches(cfg)?;
    let mut rows = Vec::new();
    for &e in eps {
        for (p, b) in predict(&set, e)?.into_iter().zip(&set.branches) {
            rows.push(PredictionRow {
                eps: e,
                k: p.k,
                spin: p.spin,
                kind: p.kind,
                mu: b.mu,
                lambda: p.lambda,
                error_order: b.error_order.clone(),
            });
        }
    }
    Ok(rows)
}

/// Rows `eps,branch,kind,mu,lambda_predicted,error_order`; unavailable
/// coefficients are written as `unavailable` with an empty prediction.
pub fn write_predictions_csv<W: Write>(rows: &[PredictionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eps", "branch", "kind", "mu", "lambda_predicted", "error_order"])?;
    for r in rows {
        w.write_record([
            format!("{}", r.eps),
            r.branch_label(),
            r.kind.name().to_string(),
            r.mu.map_or("unavailable".to_string(), |m| format!("{m:e}")),
            r.lambda.map(|l| format!("{l:e}")).unwrap_or_default(),
            r.error_order.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_predictions_plot<W: Write>(rows: &[PredictionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "series", "y"])?;
    for r in rows {
        if let Some(l) = r.lambda {
            w.write_record([format!("{}", r.eps), format!("predicted {}", r.branch_label()), format!("{l:e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Checks that failed, one human-readable line each.
#[derive(Debug, Clone, Default)]
pub struct ValidationOutcome {
    pub report: Option<ValidationReport>,
    pub failures: Vec<String>,
}

impl ValidationOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn cmd_validate(cfg: &RunConfig, plot: bool) -> Result<ValidationOutcome> {
    let vc = ValidationConfig {
        field: cfg.build_field()?,
        potential: cfg.build_potential()?,
        quadrature: cfg.quadrature,
        solver: cfg.validator.clone(),
        virtual_states: cfg.virtual_states.clone(),
    };
    let report = validator::validate(&vc)?;
    let dir = ensure_dir(&cfg.output_dir)?;
    report.write_csv(create(&dir, "report.csv")?)?;
    report.write_convergence_csv(create(&dir, "convergence.csv")?)?;
    write_branch_fits_csv(&report, create(&dir, "fits.csv")?)?;
    if plot {
        write_report_plot(&report, create(&dir, "plot_report.csv")?)?;
    }
    let failures = evaluate_checks(&report, &cfg.checks);
    Ok(ValidationOutcome { report: Some(report), failures })
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Applies the configured tolerances to a validation report.
pub fn evaluate_checks(report: &ValidationReport, checks: &Checks) -> Vec<String> {
    let mut fails = Vec::new();
    for r in &report.rows {
        if let Some(f) = r.flags.iter().find(|f| f.starts_with("error") || *f == "missing" || *f == "unbound") {
            fails.push(format!("eps={} branch {}: {f}", r.eps, r.branch_label()));
        }
    }
    let Some(set) = &report.branches else { return fails };
    for b in set.branches.iter().filter(|b| b.kind == BranchKind::Linear) {
        let errs: Vec<(f64, f64)> = report
            .rows
            .iter()
            .filter(|r| r.k == b.k && r.spin == b.spin)
            .filter_map(|r| r.rel_err.map(|e| (r.eps, e)))
            .collect();
        if let Some(&(eps, e)) = errs.first() {
            if !(e <= checks.linear_rel_tol) {
                fails.push(format!("branch {}{}: relative error {e:.3e} at eps={eps} exceeds {}", b.k, b.spin.symbol(), checks.linear_rel_tol));
            }
        }
        if errs.windows(2).any(|w| w[0].1 > w[1].1) {
            fails.push(format!("branch {}{}: error does not decrease with eps", b.k, b.spin.symbol()));
        }
    }
    for f in &report.fits {
        let label = format!("{}{}", f.k, f.spin.symbol());
        match f.kind {
            BranchKind::Exponential => {
                if let (Some(a), Some(mu)) = (f.coefficient, f.expected_coefficient) {
                    if !(rel(a, mu) <= checks.slope_tol) {
                        fails.push(format!("branch {label}: BS slope {a:.4e} vs {mu:.4e}"));
                    }
                } else if f.note.starts_with("BS slope failed") {
                    fails.push(format!("branch {label}: {}", f.note));
                }
            }
            _ => {
                if let (Some(p), Some(q)) = (f.exponent, f.expected_exponent) {
                    if !((p - q).abs() <= checks.exponent_tol) {
                        fails.push(format!("branch {label}: fitted exponent {p:.4} vs {q:.4}"));
                    }
                }
                if f.kind != BranchKind::Linear {
                    if let (Some(c), Some(mu)) = (f.coefficient, f.expected_coefficient) {
                        if !(rel(c, mu) <= checks.coefficient_tol) {
                            fails.push(format!("branch {label}: fitted coefficient {c:.4e} vs {mu:.4e}"));
                        }
                    }
                }
            }
        }
    }
    fails
}

/// Rows `branch,kind,model,exponent,expected_exponent,coefficient,expected_coefficient,note`.
pub fn write_branch_fits_csv<W: Write>(report: &ValidationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "branch",
        "kind",
        "model",
        "exponent",
        "expected_exponent",
        "coefficient",
        "expected_coefficient",
        "note",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for f in &report.fits {
        w.write_record([
            format!("{}{}", f.k, f.spin.symbol()),
            f.kind.name().to_string(),
            f.model.clone(),
            opt(f.exponent),
            opt(f.expected_exponent),
            opt(f.coefficient),
            opt(f.expected_coefficient),
            f.note.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_report_plot<W: Write>(report: &ValidationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "series", "y"])?;
    for r in &report.rows {
        for (name, v) in [("predicted", r.predicted), ("numeric", r.numeric)] {
            if let Some(v) = v {
                w.write_record([format!("{}", r.eps), format!("{name} {}", r.branch_label()), format!("{v:e}")])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Model expected for Birman–Schwinger curve `index` (descending order).
pub fn scan_model(class: &FluxClass, index: usize) -> Option<FitKind> {
    match class.kind {
        FluxKind::Zero => (index == 0).then_some(FitKind::LogSlope),
        FluxKind::NonInteger { n, .. } => match index {
            i if i < n => Some(FitKind::InverseLinear),
            i if i == n => Some(FitKind::PowerLaw),
            _ => None,
        },
        FluxKind::Integer { n } => match index {
            i if i < n => Some(FitKind::InverseLinear),
            i if i == n => Some(FitKind::LogInverse),
            i if i == n + 1 => Some(FitKind::LogSlope),
            _ => None,
        },
    }
}

#[derive(Debug, Clone)]
pub struct ScanFit {
    pub curve: usize,
    pub model: FitModel,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct Scan {
    pub points: Vec<bs_lab::CurvePoint>,
    pub fits: Vec<ScanFit>,
}

/// Scans the active spin component; the flux class picks a model per curve.
pub fn cmd_bs_scan(
    cfg: &RunConfig,
    lambda_min: f64,
    lambda_max: f64,
    points: usize,
    top: usize,
    plot: bool,
) -> Result<Scan> {
    let lambdas = bs_lab::lambda_grid(lambda_min, lambda_max, points)?;
    let (setup, v) = setup(cfg)?;
    let spin = setup.class.active_spin();
    let spec = &cfg.validator;
    let radial = match spec.backing {
        validator::BackingChoice::Auto => setup.is_radial() && v.is_radial(),
        validator::BackingChoice::Radial => true,
        validator::BackingChoice::Cartesian => false,
    };
    let pd = if radial {
        DiscretePauli::radial(&setup, &v, 0.0, spin, &spec.radial)?
    } else {
        DiscretePauli::cartesian(&setup, &v, 0.0, spin, &spec.cartesian)?
    };
    let curve_points = if lambdas.is_empty() { Vec::new() } else { bs_lab::bs_eigencurve(&pd, &lambdas, top)? };
    let mut fits = Vec::new();
    for i in 0..top {
        let Some(kind) = scan_model(&setup.class, i) else { continue };
        let data = bs_lab::curve(&curve_points, i);
        if data.len() < 3 {
            continue;
        }
        match bs_lab::fit_with_threshold(&data, kind, f64::INFINITY) {
            Ok(model) => {
                let accepted = model.residual <= FIT_THRESHOLD;
                if !accepted {
                    log::warn!("curve {i}: {} residual {:.3e} above {FIT_THRESHOLD}", kind.name(), model.residual);
                }
                fits.push(ScanFit { curve: i, model, accepted });
            }
            Err(e) => log::warn!("curve {i}: {e}"),
        }
    }
    let dir = ensure_dir(&cfg.output_dir)?;
    bs_lab::write_scan_csv(&curve_points, create(&dir, "bs_scan.csv")?)?;
    write_scan_fits_csv(&fits, create(&dir, "bs_fits.csv")?)?;
    if plot {
        write_scan_plot(&curve_points, &fits, create(&dir, "plot_bs_scan.csv")?)?;
    }
    Ok(Scan { points: curve_points, fits })
}

/// Rows `curve_index,model,param,value,residual,accepted`.
pub fn write_scan_fits_csv<W: Write>(fits: &[ScanFit], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["curve_index", "model", "param", "value", "residual", "accepted"])?;
    for f in fits {
        for (name, v) in &f.model.params {
            w.write_record([
                f.curve.to_string(),
                f.model.kind.name().to_string(),
                name.clone(),
                format!("{v:e}"),
                format!("{:e}", f.model.residual),
                f.accepted.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_scan_plot<W: Write>(points: &[bs_lab::CurvePoint], fits: &[ScanFit], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "series", "y"])?;
    for p in points {
        for (i, v) in p.values.iter().enumerate() {
            w.write_record([format!("{:e}", p.lambda), format!("curve {i}"), format!("{v:e}")])?;
        }
        for f in fits {
            w.write_record([
                format!("{:e}", p.lambda),
                format!("fit {} {}", f.curve, f.model.kind.name()),
                format!("{:e}", f.model.eval(p.lambda)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(beta: f64) -> RunConfig {
        RunConfig::parse(&format!(
            r#"{{"field": {{"kind": "radial-rational", "beta": {beta}}},
                "potential": {{"kind": "radial-power", "v0": 1.0, "sigma": 3.5}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn analyze_reports_class_and_branch_count() {
        let a = cmd_analyze(&cfg(2.5)).unwrap();
        assert!((a.alpha - 2.5).abs() < 1e-9);
        assert!(matches!(a.class.kind, FluxKind::NonInteger { n: 2, alpha_prime } if (alpha_prime - 0.5).abs() < 1e-9));
        assert_eq!(a.n_prime, 3);
        assert_eq!(a.ac_norms.iter().filter(|s| s.square_integrable).count(), 2);
        let z = cmd_analyze(&cfg(0.0)).unwrap();
        assert_eq!(z.n_prime, 2);
    }

    #[test]
    fn predict_rows_and_markers() {
        let rows = cmd_predict(&cfg(1.5), &[0.01]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rel(rows[0].lambda.unwrap(), -1.25e-3) < 1e-6);
        assert!(rel(rows[1].lambda.unwrap(), -1.736e-7) < 1e-3);
        let z = cmd_predict(&cfg(0.0), &[0.1, 0.2]).unwrap();
        assert_eq!(z.len(), 4);
        assert!(cmd_predict(&cfg(1.5), &[1.5]).is_err());
    }

    #[test]
    fn scan_models_follow_class() {
        let c = crate::ac_basis::classify_flux(2.0, 1e-9);
        assert_eq!(scan_model(&c, 0), Some(FitKind::InverseLinear));
        assert_eq!(scan_model(&c, 1), Some(FitKind::LogInverse));
        assert_eq!(scan_model(&c, 2), Some(FitKind::LogSlope));
        assert_eq!(scan_model(&c, 3), None);
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Iteration { iterations: 1, hint: String::new() }), EXIT_NUMERIC);
    }
}
