use serde::Serialize;

use super::{Backing, ScalarField2D};
use crate::error::{Error, Result};

/// Decay needed of `B`: `|B| ≲ (1+|x|²)^{-ρ}` with `ρ > 7/2`.
pub const B_DECAY_THRESHOLD: f64 = 3.5;
/// Decay needed of `V`: `σ > 3`.
pub const V_DECAY_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionItem {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AssumptionReport {
    pub items: Vec<AssumptionItem>,
}

impl AssumptionReport {
    /// True when some condition is only warned about; predictions are then
    /// outside the stated hypotheses.
    pub fn outside_hypotheses(&self) -> bool {
        self.items.iter().any(|i| i.status == CheckStatus::Warn)
    }

    fn push(&mut self, name: &str, status: CheckStatus, detail: String) {
        self.items.push(AssumptionItem { name: name.into(), status, detail });
    }
}

pub fn check_assumptions(b: &ScalarField2D, v: &ScalarField2D) -> Result<AssumptionReport> {
    let mut report = AssumptionReport::default();

    if let Some(x) = first_negative(v) {
        return Err(Error::Assumption(format!("potential is negative ({x:.3e}) somewhere; V >= 0 is required")));
    }
    if !positive_somewhere(v) {
        return Err(Error::Assumption("potential vanishes identically; V > 0 on a set of positive measure is required".into()));
    }
    report.push("V >= 0", CheckStatus::Pass, "no negative samples".into());
    report.push("V > 0 somewhere", CheckStatus::Pass, "positive samples found".into());

    for (name, field, threshold) in [("B decay", b, B_DECAY_THRESHOLD), ("V decay", v, V_DECAY_THRESHOLD)] {
        let p = field.decay_exponent();
        if p > threshold {
            report.push(name, CheckStatus::Pass, format!("declared exponent {p} > {threshold}"));
        } else {
            report.push(
                name,
                CheckStatus::Warn,
                format!("declared exponent {p} <= {threshold}: outside stated hypotheses"),
            );
        }
        let (status, detail) = sampled_decay(field);
        report.push(&format!("{name} (sampled)"), status, detail);
    }
    Ok(report)
}

fn first_negative(v: &ScalarField2D) -> Option<f64> {
    match v.backing() {
        Backing::RadialTable(t) => t.values().iter().copied().find(|&x| x < 0.0),
        Backing::Grid(g) => g.values.iter().copied().find(|&x| x < 0.0),
        Backing::Preset(_) => probe_points(1e4).map(|(x, y)| v.eval(x, y)).find(|&x| x < 0.0),
    }
}

fn positive_somewhere(v: &ScalarField2D) -> bool {
    match v.backing() {
        Backing::RadialTable(t) => t.values().iter().any(|&x| x > 0.0),
        Backing::Grid(g) => g.values.iter().any(|&x| x > 0.0),
        Backing::Preset(_) => probe_points(1e4).any(|(x, y)| v.eval(x, y) > 0.0),
    }
}

fn probe_points(r_max: f64) -> impl Iterator<Item = (f64, f64)> {
    let radii = (0..=70).map(move |i| if i == 0 { 0.0 } else { r_max * 10f64.powf(-7.0 + 0.1 * i as f64) });
    radii.flat_map(|r| {
        (0..8).map(move |k| {
            let t = std::f64::consts::PI * k as f64 / 4.0;
            (r * t.cos(), r * t.sin())
        })
    })
}

/// Samples `max_θ |f|·(1+r²)^p` on growing radii; a growth by more than 10×
/// means the declared exponent overstates the decay.
fn sampled_decay(f: &ScalarField2D) -> (CheckStatus, String) {
    let p = f.decay_exponent();
    if p.is_infinite() {
        return (CheckStatus::Pass, "faster than any power".into());
    }
    let radii: Vec<f64> = match f.grid() {
        Some(g) => {
            let r = g.inscribed_radius();
            vec![r / 8.0, r / 4.0, r / 2.0, r]
        }
        None => vec![10.0, 1e2, 1e3, 1e4],
    };
    let weighted: Vec<f64> = radii
        .iter()
        .map(|&r| {
            (0..16)
                .map(|k| {
                    let t = std::f64::consts::PI * k as f64 / 8.0;
                    f.eval(r * t.cos(), r * t.sin()).abs()
                })
                .fold(0.0, f64::max)
                * (1.0 + r * r).powf(p)
        })
        .collect();
    let first = weighted[0].max(f64::MIN_POSITIVE);
    let growth = weighted.iter().fold(0.0f64, |m, &w| m.max(w / first));
    if growth > 10.0 {
        (CheckStatus::Warn, format!("|f|(1+r^2)^p grows by {growth:.2e} over r in {radii:?}"))
    } else {
        (CheckStatus::Pass, format!("|f|(1+r^2)^p bounded (max growth {growth:.2e})"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_field_with_power_potential() {
        let r = check_assumptions(&ScalarField2D::rational(1.5), &ScalarField2D::power(1.0, 3.5)).unwrap();
        let get = |n: &str| r.items.iter().find(|i| i.name == n).unwrap().status;
        assert_eq!(get("B decay"), CheckStatus::Warn);
        assert_eq!(get("V decay"), CheckStatus::Pass);
        assert_eq!(get("V decay (sampled)"), CheckStatus::Pass);
        assert!(r.outside_hypotheses());
    }

    #[test]
    fn vanishing_potential_is_rejected() {
        let err = check_assumptions(&ScalarField2D::rational(1.5), &ScalarField2D::zero());
        assert!(matches!(err, Err(Error::Assumption(_))));
    }

    #[test]
    fn negative_potential_is_rejected() {
        let err = check_assumptions(&ScalarField2D::zero(), &ScalarField2D::power(-1.0, 3.5));
        assert!(matches!(err, Err(Error::Assumption(_))));
    }

    #[test]
    fn overstated_decay_is_flagged() {
        let t = super::super::RadialTable::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.25]).unwrap();
        // the extrapolation follows the declared law, so only the declared check fires
        let v = ScalarField2D::new(Backing::RadialTable(t), 2.0, true).unwrap();
        let r = check_assumptions(&ScalarField2D::zero(), &v).unwrap();
        assert!(r.outside_hypotheses());
    }
}
