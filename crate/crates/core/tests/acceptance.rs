//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

use pauli_weak::ac_basis::{gram_matrices, recombine, sample_states, Spin};
use pauli_weak::asymptotics::{branch_set, mu_linear, random_invertible, BranchKind, BranchSet, VirtualStates};
use pauli_weak::bs_lab::{
    bs_eigencurve, curve, fit_singular_model, kernel_dim, lambda_grid, planted_case, schur_complement, FitKind,
    KERNEL_TOL,
};
use pauli_weak::field_model::{Backing, Grid2D, MagneticSetup, QuadratureSpec, ScalarField2D};
use pauli_weak::numerics::lanczos::{self, LanczosOptions};
use pauli_weak::validator::{
    count_ladder, validate, DiscretePauli, RadialSpec, ValidationConfig, ValidatorSpec,
};

fn verdict(id: u32, name: &str, ok: bool, elapsed: Duration, budget: Duration, detail: &str) -> bool {
    let ok = ok && elapsed <= budget;
    println!(
        "{} criterion {id} {name}: {detail} [{:.2}s / {}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    ok
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn potential() -> ScalarField2D {
    ScalarField2D::power(1.0, 3.5)
}

fn precise() -> QuadratureSpec {
    QuadratureSpec { nodes: 9600, rel_tol: 1e-12, abs_tol: 1e-13, ..Default::default() }
}

fn branches(beta: f64, q: &QuadratureSpec) -> BranchSet {
    let s = MagneticSetup::new(ScalarField2D::rational(beta), q).unwrap();
    let b = gram_matrices(&s, &potential(), q).unwrap();
    branch_set(&b, &VirtualStates::default()).unwrap()
}

fn gauge_oracle() -> bool {
    let t = Instant::now();
    let q = precise();
    let mut worst_h = 0.0f64;
    let mut worst_alpha = 0.0f64;
    for beta in [0.5, 1.5, 2.0, 2.5] {
        let s = MagneticSetup::new(ScalarField2D::rational(beta), &q).unwrap();
        worst_alpha = worst_alpha.max((s.alpha - beta).abs());
        for i in 0..=90 {
            let r = if i == 0 { 0.0 } else { 10f64.powf(-4.0 + 0.1 * i as f64) };
            let exact = -0.5 * beta * (1.0 + r * r).ln();
            worst_h = worst_h.max((s.h.eval(r, 0.0) - exact).abs());
        }
    }
    let ok = worst_h <= 1e-8 && worst_alpha <= 1e-9;
    verdict(
        1,
        "gauge oracle",
        ok,
        t.elapsed(),
        Duration::from_secs(5),
        &format!("max |h + (beta/2)log(1+r^2)| = {worst_h:.2e}, max |alpha - beta| = {worst_alpha:.2e}"),
    )
}

fn coefficient_oracles() -> bool {
    let t = Instant::now();
    let q = QuadratureSpec::default();
    let mu = |set: &BranchSet, k: usize, spin: Spin| {
        set.branches.iter().find(|b| b.k == k && b.spin == spin).and_then(|b| b.mu).unwrap()
    };
    let z = branches(0.0, &q);
    let b05 = branches(0.5, &q);
    let b15 = branches(1.5, &q);
    let b2 = branches(2.0, &q);
    let m = Spin::Minus;
    let cases = [
        ("beta=0 mu+", mu(&z, 0, Spin::Plus), 0.1),
        ("beta=0 mu-", mu(&z, 0, m), 0.1),
        ("beta=1.5 mu0", mu(&b15, 0, m), 1.0 / 8.0),
        ("beta=1.5 mu1", mu(&b15, 1, m), 1.0 / 576.0),
        ("beta=2 mu0", mu(&b2, 0, m), 2.0 / 9.0),
        ("beta=2 mu1", mu(&b2, 1, m), 1.0 / 15.75),
        ("beta=2 mu2", mu(&b2, 2, m), 4.0 / 315.0),
        ("beta=0.5 mu0", mu(&b05, 0, m), 1.0 / 36.0),
    ];
    let worst = cases.iter().map(|c| rel(c.1, c.2)).fold(0.0, f64::max);
    for (name, got, want) in &cases {
        println!("  {name}: {got:.12e} (oracle {want:.12e})");
    }
    verdict(2, "coefficient oracles", worst <= 1e-6, t.elapsed(), Duration::from_secs(10), &format!("max relative error {worst:.2e}"))
}

fn two_bumps(x: f64, y: f64) -> f64 {
    2.6 * (-((x - 0.8).powi(2) + (y - 0.3).powi(2))).exp() + 2.2 * (-((x + 0.7).powi(2) + (y + 0.4).powi(2)) / 1.2).exp()
}

fn brute_force_projection() -> bool {
    let t = Instant::now();
    let (n, half) = (200, 10.0);
    let q = QuadratureSpec::default();
    let b = ScalarField2D::new(Backing::Grid(Grid2D::centered(n, half, two_bumps).unwrap()), 10.0, false).unwrap();
    let vgrid = Grid2D::centered(n, half, |x, y| (1.0 + 0.5 * x * y.sin()).abs() * (-(x * x + 0.5 * y * y) / 6.0).exp()).unwrap();
    let v = ScalarField2D::new(Backing::Grid(vgrid.clone()), 10.0, true).unwrap();
    let setup = MagneticSetup::new(b, &q).unwrap();
    let basis = gram_matrices(&setup, &v, &q).unwrap();
    let mu = mu_linear(&basis).unwrap();
    let k = basis.eigen_count();

    // vP₀v on the lattice as an N²×N² operator, applied matrix-free
    let eig: Vec<_> = basis.states.iter().filter(|s| !s.virtual_state).copied().collect();
    let psi = sample_states(&setup.h, &eig, &vgrid);
    let d2 = vgrid.spacing * vgrid.spacing;
    let g = DMatrix::from_fn(k, k, |i, j| psi[i].iter().zip(&psi[j]).map(|(a, b)| a.conj() * b).sum::<Complex64>() * d2);
    let g_inv = g.try_inverse().unwrap();
    let sqrt_v: Vec<f64> = (0..vgrid.ny)
        .flat_map(|j| (0..vgrid.nx).map(move |i| (i, j)))
        .map(|(i, j)| vgrid.at(i, j).sqrt())
        .collect();
    let dim = sqrt_v.len();
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        let c: Vec<Complex64> =
            psi.iter().map(|p| p.iter().zip(x).zip(&sqrt_v).map(|((a, b), s)| a.conj() * b * *s).sum::<Complex64>() * d2).collect();
        let c = &g_inv * nalgebra::DVector::from_vec(c);
        (0..dim)
            .map(|idx| sqrt_v[idx] * (0..k).map(|i| psi[i][idx] * c[i]).sum::<Complex64>())
            .collect()
    };
    let brute = lanczos::largest(dim, k, apply, LanczosOptions::default()).unwrap();
    let worst = mu.iter().zip(&brute).map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max);
    let ok = k >= 2 && brute.len() == k && worst <= 1e-6;
    verdict(
        3,
        "brute-force vP0v",
        ok,
        t.elapsed(),
        Duration::from_secs(60),
        &format!("alpha = {:.4}, mu_linear = {mu:.6?}, lattice = {brute:.6?}, max rel {worst:.2e}", setup.alpha),
    )
}

fn schur_kernel_dimension() -> bool {
    let t = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x51f6);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(4..=12usize);
        let kernel = rng.random_range(0..=3usize);
        let (a, part) = planted_case(n, kernel, &mut rng);
        let s = schur_complement(&a, &part).unwrap();
        let scale = a.norm();
        if kernel_dim(&a, scale, KERNEL_TOL) != kernel || kernel_dim(&s, scale, KERNEL_TOL) != kernel {
            mismatches += 1;
        }
    }
    verdict(4, "Schur kernel dimension", mismatches == 0, t.elapsed(), Duration::from_secs(5), &format!("{mismatches} of 200 trials disagree"))
}

fn scan(beta: f64, top: usize) -> Vec<pauli_weak::bs_lab::CurvePoint> {
    let q = QuadratureSpec::default();
    let s = MagneticSetup::new(ScalarField2D::rational(beta), &q).unwrap();
    let pd = DiscretePauli::radial(&s, &potential(), 0.0, Spin::Minus, &RadialSpec::default()).unwrap();
    bs_eigencurve(&pd, &lambda_grid(-1e-2, -1e-5, 12).unwrap(), top).unwrap()
}

fn birman_schwinger_fits() -> bool {
    // each part has its own 3 min budget
    let budget = Duration::from_secs(180);
    let start = Instant::now();
    let t = Instant::now();
    let zero = fit_singular_model(&curve(&scan(0.0, 1), 0), FitKind::LogSlope).unwrap();
    let slope = zero.param("a").unwrap();
    let ok_a = rel(slope, 0.1) <= 0.05 && t.elapsed() <= budget;

    let t = Instant::now();
    let pts = scan(1.5, 2);
    let power = fit_singular_model(&curve(&pts, 1), FitKind::PowerLaw).unwrap();
    let inv = fit_singular_model(&curve(&pts, 0), FitKind::InverseLinear).unwrap();
    let (p, a) = (power.param("p").unwrap(), inv.param("a").unwrap());
    let ok_b = (p - 0.5).abs() <= 0.05 && rel(a, 0.125) <= 0.1 && t.elapsed() <= budget;

    let t = Instant::now();
    let pts = scan(2.0, 2);
    let res = fit_singular_model(&curve(&pts, 1), FitKind::LogInverse).map(|f| f.residual);
    let ok_c = matches!(res, Ok(r) if r <= 0.05) && t.elapsed() <= budget;
    let res = res.map_or_else(|e| e.to_string(), |r| format!("{r:.2e}"));

    verdict(
        5,
        "Birman-Schwinger fits",
        ok_a && ok_b && ok_c,
        start.elapsed(),
        3 * budget,
        &format!("(a) zero-flux slope {slope:.5}; (b) power exponent {p:.4}, inverse-linear coefficient {a:.4}; (c) log-inverse residual {res}"),
    )
}

fn direct_spectrum_reconciliation() -> bool {
    let t = Instant::now();
    let cfg = ValidationConfig {
        field: ScalarField2D::rational(1.5),
        potential: potential(),
        quadrature: QuadratureSpec::default(),
        solver: ValidatorSpec { eps: vec![0.02, 0.01, 0.005], convergence: false, bs_slope: None, ..Default::default() },
        virtual_states: VirtualStates::default(),
    };
    let report = validate(&cfg).unwrap();
    let errs: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.k == 0 && r.kind == BranchKind::Linear)
        .map(|r| r.rel_err.unwrap_or(f64::INFINITY))
        .collect();
    let decreasing = errs.windows(2).all(|w| w[0] < w[1]);
    let fit = report.fit(1, Spin::Minus).unwrap();
    let (p, c) = (fit.exponent.unwrap_or(f64::NAN), fit.coefficient.unwrap_or(f64::NAN));
    let ok = errs.len() == 3 && errs[0] <= 0.1 && decreasing && (p - 2.0).abs() <= 0.15 && rel(c, 1.0 / 576.0) <= 0.2;
    verdict(
        6,
        "direct-spectrum reconciliation",
        ok,
        t.elapsed(),
        Duration::from_secs(120),
        &format!("linear rel errors (eps ascending) {errs:.4?}, power exponent {p:.4}, coefficient {c:.4e}"),
    )
}

fn ladder(beta: f64, spin: Spin) -> pauli_weak::validator::CountLadder {
    let q = QuadratureSpec::default();
    let s = MagneticSetup::new(ScalarField2D::rational(beta), &q).unwrap();
    count_ladder(&s, &potential(), 0.4, spin, 1e-4, 0.01, 60.0, 600.0, None).unwrap()
}

fn negative_eigenvalue_counts() -> bool {
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for (beta, want) in [(0.0, 2usize), (1.5, 2), (2.0, 3)] {
        let minus = ladder(beta, Spin::Minus);
        let plus = ladder(beta, Spin::Plus);
        let total: Vec<(f64, usize)> = minus.rows.iter().zip(&plus.rows).map(|(a, b)| (a.0, a.1 + b.1)).collect();
        let tail = &total[total.len() - 3..];
        let stable = tail.iter().all(|r| r.1 == tail[0].1);
        ok &= stable && tail[2].1 == want;
        let reached = total.iter().find(|r| r.1 == want).map_or("never".to_string(), |r| format!("{:.3e}", r.0));
        println!("  beta={beta}: count first reaches {want} at R = {reached}; last doublings {tail:?}");
        detail.push(format!("beta={beta}: {} (want {want})", tail[2].1));
    }
    verdict(7, "negative-eigenvalue counts", ok, t.elapsed(), Duration::from_secs(300), &detail.join(", "))
}

fn spin_plus_null_results() -> bool {
    let t = Instant::now();
    let mut counts = Vec::new();
    for beta in [1.5, 2.0] {
        let q = QuadratureSpec::default();
        let s = MagneticSetup::new(ScalarField2D::rational(beta), &q).unwrap();
        for eps in [0.4, 0.1] {
            let l = count_ladder(&s, &potential(), eps, Spin::Plus, 1e-4, 0.01, 60.0, 600.0, None).unwrap();
            counts.push((beta, eps, l.rows.iter().map(|r| r.1).max().unwrap()));
        }
    }
    let ok = counts.iter().all(|c| c.2 == 0);
    verdict(8, "spin + null results", ok, t.elapsed(), Duration::from_secs(60), &format!("(beta, eps, max count) {counts:?}"))
}

fn invariance_suite() -> bool {
    let t = Instant::now();
    let q = QuadratureSpec::default();

    let s = MagneticSetup::new(ScalarField2D::rational(3.5), &q).unwrap();
    let basis = gram_matrices(&s, &potential(), &q).unwrap();
    let base = mu_linear(&basis).unwrap();
    let mut recomb = 0.0f64;
    for seed in 0..5 {
        let tmat = random_invertible(basis.eigen_count(), seed);
        let mu = mu_linear(&recombine(&basis, &tmat).unwrap()).unwrap();
        recomb = recomb.max(base.iter().zip(&mu).map(|(a, b)| rel(*b, *a)).fold(0.0, f64::max));
    }

    let c = 3.7;
    let mut scaling = 0.0f64;
    for beta in [0.0, 1.5, 2.0, 2.5] {
        let s = MagneticSetup::new(ScalarField2D::rational(beta), &q).unwrap();
        let one = branch_set(&gram_matrices(&s, &potential(), &q).unwrap(), &VirtualStates::default()).unwrap();
        let scaled = branch_set(&gram_matrices(&s, &potential().scaled(c), &q).unwrap(), &VirtualStates::default()).unwrap();
        for (a, b) in one.branches.iter().zip(&scaled.branches) {
            let factor = match a.kind {
                BranchKind::Power { exponent } => c.powf(exponent),
                _ => c,
            };
            scaling = scaling.max(rel(b.mu.unwrap(), factor * a.mu.unwrap()));
        }
    }

    let mut flip = 0.0f64;
    let mut flip_ok = true;
    for beta in [0.0, 0.5, 1.5, 2.0, 2.5] {
        let a = branches(beta, &q);
        let b = branches(-beta, &q);
        flip_ok &= a.branches.len() == b.branches.len();
        flip_ok &= beta == 0.0 || (b.class.spin_flipped && a.class.kind == b.class.kind);
        for x in &a.branches {
            let best = b
                .branches
                .iter()
                .filter(|y| y.k == x.k && y.kind == x.kind && y.spin == x.spin.flipped())
                .map(|y| rel(y.mu.unwrap(), x.mu.unwrap()))
                .fold(f64::INFINITY, f64::min);
            flip = flip.max(best);
        }
    }
    let ok = recomb <= 1e-10 && scaling <= 1e-12 && flip_ok && flip <= 1e-10;
    verdict(
        9,
        "invariance suite",
        ok,
        t.elapsed(),
        Duration::from_secs(10),
        &format!("recombination {recomb:.2e}, V-scaling {scaling:.2e}, spin flip {flip:.2e}"),
    )
}

fn main() {
    let criteria: [fn() -> bool; 9] = [
        gauge_oracle,
        coefficient_oracles,
        brute_force_projection,
        schur_kernel_dimension,
        birman_schwinger_fits,
        direct_spectrum_reconciliation,
        negative_eigenvalue_counts,
        spin_plus_null_results,
        invariance_suite,
    ];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(c) {
            Ok(true) => {}
            Ok(false) => failed += 1,
            Err(_) => {
                println!("FAIL criterion {} aborted", i + 1);
                failed += 1;
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
