use proptest::prelude::*;

use pauli_weak::ac_basis::{gram_matrices, recombine};
use pauli_weak::asymptotics::{branch_set, mu_linear, predict, random_invertible, BranchKind, VirtualStates};
use pauli_weak::field_model::{MagneticSetup, QuadratureSpec, ScalarField2D};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn set(beta: f64, v: &ScalarField2D) -> pauli_weak::asymptotics::BranchSet {
    let q = QuadratureSpec::default();
    let s = MagneticSetup::new(ScalarField2D::rational(beta), &q).unwrap();
    branch_set(&gram_matrices(&s, v, &q).unwrap(), &VirtualStates::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mu_linear_ignores_basis_choice(beta in 1.1f64..4.9, seed in any::<u64>()) {
        let q = QuadratureSpec::default();
        let s = MagneticSetup::new(ScalarField2D::rational(beta), &q).unwrap();
        let basis = gram_matrices(&s, &ScalarField2D::power(1.0, 3.5), &q).unwrap();
        let t = random_invertible(basis.eigen_count(), seed);
        let a = mu_linear(&basis).unwrap();
        let b = mu_linear(&recombine(&basis, &t).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(rel(*y, *x) < 1e-10);
        }
    }

    #[test]
    fn coefficients_scale_with_potential(beta in prop::sample::select(vec![0.0, 0.5, 1.5, 2.0, 2.5, 3.0]), c in 0.1f64..10.0) {
        let v = ScalarField2D::power(1.0, 3.5);
        let one = set(beta, &v);
        let scaled = set(beta, &v.scaled(c));
        for (a, b) in one.branches.iter().zip(&scaled.branches) {
            let factor = match a.kind {
                BranchKind::Power { exponent } => c.powf(exponent),
                _ => c,
            };
            prop_assert!(rel(b.mu.unwrap(), factor * a.mu.unwrap()) < 1e-12);
        }
    }

    #[test]
    fn flux_reversal_swaps_spins(beta in 0.2f64..3.8) {
        let v = ScalarField2D::power(1.0, 3.5);
        let a = set(beta, &v);
        let b = set(-beta, &v);
        prop_assert_eq!(a.branches.len(), b.branches.len());
        for (x, y) in a.branches.iter().zip(&b.branches) {
            prop_assert_eq!(x.k, y.k);
            prop_assert_eq!(x.kind, y.kind);
            prop_assert_eq!(x.spin.flipped(), y.spin);
            prop_assert!(rel(y.mu.unwrap(), x.mu.unwrap()) < 1e-10);
        }
    }

    #[test]
    fn predictions_are_negative_and_monotone_in_eps(beta in 0.2f64..3.8, e1 in 0.001f64..0.3, ratio in 0.1f64..0.9) {
        let s = set(beta, &ScalarField2D::power(1.0, 3.5));
        let big = predict(&s, e1).unwrap();
        let small = predict(&s, e1 * ratio).unwrap();
        for (p, q) in big.iter().zip(&small) {
            let (l1, l2) = (p.lambda.unwrap(), q.lambda.unwrap());
            prop_assert!(l1 < 0.0 && l2 < 0.0);
            prop_assert!(l2.abs() < l1.abs());
        }
    }
}
