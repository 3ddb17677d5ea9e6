//! Least-squares fits of singular Birman–Schwinger curves near `λ = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative residual above which a fit is rejected.
pub const FIT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitKind {
    /// `a·ln(1/|λ|) + b`
    LogSlope,
    /// `a·|λ|^{−p}`
    PowerLaw,
    /// `a/|λ|`
    InverseLinear,
    /// `a/(|λ|(|ln|λ|| + m̂))`
    LogInverse,
}

impl FitKind {
    pub fn name(self) -> &'static str {
        match self {
            FitKind::LogSlope => "LogSlope",
            FitKind::PowerLaw => "PowerLaw",
            FitKind::InverseLinear => "InverseLinear",
            FitKind::LogInverse => "LogInverse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitModel {
    pub kind: FitKind,
    pub params: Vec<(String, f64)>,
    /// RMS of `(fit − y)/y`.
    pub residual: f64,
}

impl FitModel {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.0 == name).map(|p| p.1)
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let x = lambda.abs();
        let p = |n| self.param(n).unwrap_or(f64::NAN);
        match self.kind {
            FitKind::LogSlope => p("a") * (1.0 / x).ln() + p("b"),
            FitKind::PowerLaw => p("a") * x.powf(-p("p")),
            FitKind::InverseLinear => p("a") / x,
            FitKind::LogInverse => p("a") / (x * (x.ln().abs() + p("m"))),
        }
    }
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn relative_residual(model: &FitModel, data: &[(f64, f64)]) -> f64 {
    let s: f64 = data.iter().map(|&(l, y)| ((model.eval(l) - y) / y).powi(2)).sum();
    (s / data.len() as f64).sqrt()
}

/// Fits `data = [(λ, μ)]` (λ < 0, μ > 0) to `kind`; rejects residuals above
/// [`FIT_THRESHOLD`].
pub fn fit_singular_model(data: &[(f64, f64)], kind: FitKind) -> Result<FitModel> {
    fit_with_threshold(data, kind, FIT_THRESHOLD)
}

pub fn fit_with_threshold(data: &[(f64, f64)], kind: FitKind, threshold: f64) -> Result<FitModel> {
    if data.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 curve points, got {}", data.len())));
    }
    if data.iter().any(|&(l, y)| !(l < 0.0) || !(y > 0.0)) {
        return Err(Error::Domain("curve points need lambda < 0 and positive eigenvalues".into()));
    }
    let lx: Vec<f64> = data.iter().map(|p| p.0.abs().ln()).collect();
    let ly: Vec<f64> = data.iter().map(|p| p.1.ln()).collect();
    let model = match kind {
        FitKind::LogSlope => {
            let x: Vec<f64> = lx.iter().map(|v| -v).collect();
            let y: Vec<f64> = data.iter().map(|p| p.1).collect();
            let (a, b) = linear_fit(&x, &y);
            FitModel { kind, params: vec![("a".into(), a), ("b".into(), b)], residual: 0.0 }
        }
        FitKind::PowerLaw => {
            let (slope, icpt) = linear_fit(&lx, &ly);
            FitModel { kind, params: vec![("a".into(), icpt.exp()), ("p".into(), -slope)], residual: 0.0 }
        }
        FitKind::InverseLinear => {
            let la = lx.iter().zip(&ly).map(|(x, y)| x + y).sum::<f64>() / data.len() as f64;
            FitModel { kind, params: vec![("a".into(), la.exp())], residual: 0.0 }
        }
        FitKind::LogInverse => fit_log_inverse(data, &lx, &ly),
    };
    let residual = relative_residual(&model, data);
    let model = FitModel { residual, ..model };
    if !(residual <= threshold) {
        return Err(Error::FitRejected { model: kind.name(), residual, threshold });
    }
    Ok(model)
}

/// Amplitude in log space for fixed `m̂`, then golden-section search on the
/// log-space misfit.
fn fit_log_inverse(data: &[(f64, f64)], lx: &[f64], ly: &[f64]) -> FitModel {
    let n = data.len() as f64;
    let lmin = lx.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let amp_and_cost = |m: f64| {
        let r: Vec<f64> = lx
            .iter()
            .zip(ly)
            .map(|(x, y)| y + x + (x.abs() + m).ln())
            .collect();
        let la = r.iter().sum::<f64>() / n;
        let cost = r.iter().map(|v| (v - la).powi(2)).sum::<f64>();
        (la.exp(), cost)
    };
    // m̂ + |ln|λ|| must stay positive on the data
    let (mut a, mut b) = (-lmin + 1e-6 * lmin.max(1.0), 50.0 * lmin.max(1.0));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (amp_and_cost(c).1, amp_and_cost(d).1);
    for _ in 0..200 {
        if (b - a).abs() < 1e-10 * (1.0 + c.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = amp_and_cost(c).1;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = amp_and_cost(d).1;
        }
    }
    let m = 0.5 * (a + b);
    let (amp, _) = amp_and_cost(m);
    FitModel {
        kind: FitKind::LogInverse,
        params: vec![("a".into(), amp), ("m".into(), m)],
        residual: 0.0,
    }
}

/// Rows `model,param,value,residual`.
pub fn write_fit_csv<W: std::io::Write>(fits: &[FitModel], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "param", "value", "residual"])?;
    for f in fits {
        for (name, v) in &f.params {
            w.write_record([f.kind.name().to_string(), name.clone(), format!("{v:e}"), format!("{:e}", f.residual)])?;
        }
    }
    w.flush()?;
    Ok(())
}
