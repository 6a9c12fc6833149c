use convexpop::polyalg::{
    averaged_hessian_remainder, basis_size, grlex_index, monomial_basis, taylor_reconstruction, theta_perturbation,
    Polynomial, Term,
};
use proptest::prelude::*;

/// Random polynomial in `n` variables of degree at most `deg`.
fn poly_strategy(n: usize, deg: usize) -> impl Strategy<Value = Polynomial> {
    let basis = monomial_basis(n, deg);
    let len = basis.len();
    prop::collection::vec((0..len, -2.0..2.0f64), 1..8).prop_map(move |picks| {
        let mut p = Polynomial::zero(n);
        for (i, c) in picks {
            p.add_term(basis[i].clone(), c);
        }
        p
    })
}

fn nvars_and_poly(deg: usize) -> impl Strategy<Value = Polynomial> {
    (1usize..=3).prop_flat_map(move |n| poly_strategy(n, deg))
}

fn pair_with_points(deg: usize) -> impl Strategy<Value = (Polynomial, Polynomial, Vec<Vec<f64>>)> {
    (1usize..=3).prop_flat_map(move |n| {
        (
            poly_strategy(n, deg),
            poly_strategy(n, deg),
            prop::collection::vec(prop::collection::vec(-1.5..1.5f64, n), 100),
        )
    })
}

// Brute-force count of exponent vectors with total degree <= d.
fn count_monomials(n: usize, d: usize) -> usize {
    fn go(n: usize, left: usize) -> usize {
        if n == 0 {
            return 1;
        }
        (0..=left).map(|k| go(n - 1, left - k)).sum()
    }
    go(n, d)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eval_is_a_ring_homomorphism((p, q, xs) in pair_with_points(4)) {
        let sum = &p + &q;
        let prod = &p * &q;
        for x in &xs {
            let (a, b) = (p.eval(x).unwrap(), q.eval(x).unwrap());
            prop_assert!(close(sum.eval(x).unwrap(), a + b, 1e-10));
            prop_assert!(close(prod.eval(x).unwrap(), a * b, 1e-10));
        }
    }

    #[test]
    fn gradient_matches_central_differences(p in nvars_and_poly(5), seed in 0u64..1000) {
        let n = p.nvars();
        let x: Vec<f64> = (0..n).map(|i| ((seed as f64 + 1.0) * (i as f64 + 0.37)).sin()).collect();
        let h = 1e-5;
        for (i, d) in p.gradient().iter().enumerate() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.eval(&xp).unwrap() - p.eval(&xm).unwrap()) / (2.0 * h);
            prop_assert!((d.eval(&x).unwrap() - fd).abs() <= 1e-6 * (1.0 + fd.abs()));
        }
        let hess = p.hessian();
        prop_assert!(hess.is_symmetric());
    }

    #[test]
    fn averaged_hessian_reconstructs(f in nvars_and_poly(6), seed in 0u64..1000) {
        let n = f.nvars();
        let u: Vec<f64> = (0..n).map(|i| ((seed as f64) * 0.731 + i as f64).cos()).collect();
        let rem = averaged_hessian_remainder(&f, &u).unwrap();
        let back = taylor_reconstruction(&f, &u, &rem).unwrap();
        prop_assert!((&f - &back).l1_norm() <= 1e-9 * f.l1_norm().max(1.0));
    }

    #[test]
    fn theta_dominates(f in nvars_and_poly(4), eps in 1e-3..1.0f64, extra in 0u32..3, x in prop::collection::vec(-3.0..3.0f64, 3)) {
        let n = f.nvars();
        let r0 = (f.degree() / 2 + 1) as u32;
        let g = theta_perturbation(&f, eps, r0 + extra).unwrap();
        let x = &x[..n];
        prop_assert!(g.eval(x).unwrap() >= f.eval(x).unwrap() + eps - 1e-9);
        if r0 > 1 {
            prop_assert!(theta_perturbation(&f, eps, r0 - 1).is_err());
        }
    }

    #[test]
    fn term_list_round_trip(p in nvars_and_poly(4)) {
        let terms: Vec<Term> = p.to_term_list();
        let json = serde_json::to_string(&terms).unwrap();
        let back: Vec<Term> = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(Polynomial::from_term_list(p.nvars(), &back).unwrap(), p);
    }
}

#[test]
fn basis_sizes_match_enumeration() {
    for n in 1..=6 {
        for d in 0..=6 {
            let basis = monomial_basis(n, d);
            assert_eq!(basis.len(), count_monomials(n, d));
            assert_eq!(basis_size(n, d), basis.len());
            for (i, m) in basis.iter().enumerate() {
                assert_eq!(grlex_index(m), i);
            }
        }
    }
}

#[test]
fn example_constraints_evaluate() {
    let g1 = Polynomial::from_terms(2, [(vec![1, 1], 1.0), (vec![0, 0], -0.25)]).unwrap();
    assert_eq!(g1.eval(&[1.0, 1.0]).unwrap(), 0.75);
    let g2 = Polynomial::from_terms(2, [(vec![2, 0], -1.0), (vec![1, 0], 1.0), (vec![0, 2], -1.0), (vec![0, 1], 1.0)])
        .unwrap();
    assert_eq!(g2.eval(&[0.5, 0.5]).unwrap(), 0.5);
    assert!(g1.eval(&[1.0]).is_err());
}
