//! Gauss–Legendre rules and composite log-spaced panels for radial integrals.

use std::f64::consts::PI;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..(order + 1) / 2 {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// ∫_a^b f(s) ds computed in the variable t = ln s (a > 0).
    pub fn integrate_log(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        debug_assert!(a > 0.0 && b > 0.0);
        self.integrate(a.ln(), b.ln(), |t| {
            let s = t.exp();
            f(s) * s
        })
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Panel edges `0, r0, r0·q, r0·q², …, r_max` with geometric ratio `q`.
#[derive(Debug, Clone)]
pub struct LogPanels {
    edges: Vec<f64>,
}

impl LogPanels {
    pub fn new(r0: f64, r_max: f64, panels: usize) -> Self {
        assert!(r0 > 0.0 && r_max > r0 && panels >= 1);
        let (t0, t1) = (r0.ln(), r_max.ln());
        let dt = (t1 - t0) / panels as f64;
        let mut edges = Vec::with_capacity(panels + 2);
        edges.push(0.0);
        for i in 0..=panels {
            edges.push((t0 + dt * i as f64).exp());
        }
        *edges.last_mut().unwrap() = r_max;
        Self { edges }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn r_max(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Integral over a single panel `i` (between `edges[i]` and `edges[i+1]`).
    pub fn panel(&self, gl: &GaussLegendre, i: usize, f: impl FnMut(f64) -> f64) -> f64 {
        let (a, b) = (self.edges[i], self.edges[i + 1]);
        if a == 0.0 {
            gl.integrate(a, b, f)
        } else {
            gl.integrate_log(a, b, f)
        }
    }

    /// ∫_0^{r_max} f.
    pub fn integrate(&self, gl: &GaussLegendre, mut f: impl FnMut(f64) -> f64) -> f64 {
        (0..self.edges.len() - 1)
            .map(|i| self.panel(gl, i, &mut f))
            .sum()
    }

    /// Cumulative integrals `C[i] = ∫_0^{edges[i]} f`.
    pub fn cumulative(&self, gl: &GaussLegendre, mut f: impl FnMut(f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.edges.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 0..self.edges.len() - 1 {
            acc += self.panel(gl, i, &mut f);
            out.push(acc);
        }
        out
    }

    /// Index of the panel containing `r` (clamped to the last panel).
    pub fn locate(&self, r: f64) -> usize {
        match self
            .edges
            .binary_search_by(|e| e.partial_cmp(&r).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(self.edges.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.edges.len() - 2),
        }
    }
}

/// ∫_a^b f(s) ds picking the linear or logarithmic variable by interval shape.
pub fn integrate_segment(gl: &GaussLegendre, a: f64, b: f64, f: impl FnMut(f64) -> f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > 0.0 && b > 0.0 && (b / a > 2.0 || a / b > 2.0) {
        gl.integrate_log(a, b, f)
    } else {
        gl.integrate(a, b, f)
    }
}
