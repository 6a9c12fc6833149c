mod common;

use common::{inner, random_feasible_sdp as instance};
use convexpop::sdp::{min_eigenvalue, solve, BlockMatrix, SdpConstraint, SdpOptions, SdpProblem, SdpStatus};
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn strictly_feasible_instances_solve(seed in any::<u64>()) {
        let inst = instance(seed);
        let p = &inst.problem;
        let s = solve(p, &SdpOptions::default()).unwrap();
        prop_assert_eq!(s.status, SdpStatus::Optimal);
        prop_assert!(s.kkt_error() <= 1e-7, "kkt {}", s.kkt_error());

        // Independent feasibility checks on the returned point.
        let bnorm: f64 = p.constraints().iter().map(|c| c.rhs * c.rhs).sum::<f64>().sqrt();
        for c in p.constraints() {
            prop_assert!((inner(&c.blocks, &s.primal) - c.rhs).abs() <= 1e-6 * (1.0 + bnorm));
        }
        for (x, z) in s.primal.iter().zip(&s.slack) {
            prop_assert!(min_eigenvalue(x).unwrap() >= -1e-8 * (1.0 + x.amax()));
            prop_assert!(min_eigenvalue(z).unwrap() >= -1e-8 * (1.0 + z.amax()));
        }
        let pval = inner(p.objective(), &s.primal);
        let dval: f64 = p.constraints().iter().zip(s.dual.iter()).map(|(c, y)| c.rhs * y).sum();
        let scale = 1.0 + pval.abs();
        // Weak duality, and both optimal values bracket the known feasible points.
        prop_assert!(dval <= pval + 1e-6 * scale);
        prop_assert!(pval <= inner(p.objective(), &inst.x0) + 1e-6 * scale);
        let d0: f64 = p.constraints().iter().zip(&inst.y0).map(|(c, y)| c.rhs * y).sum();
        prop_assert!(dval >= d0 - 1e-6 * scale);
    }
}

#[test]
fn solves_are_deterministic() {
    for seed in 0..20 {
        let p = instance(seed).problem;
        let a = solve(&p, &SdpOptions::default()).unwrap();
        let b = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn infeasible_primal_is_detected() {
    // trace(X) = -1 with X >= 0 has no solution.
    let p = SdpProblem::new(
        vec![2],
        vec![DMatrix::identity(2, 2)],
        vec![SdpConstraint { blocks: vec![DMatrix::identity(2, 2)], rhs: -1.0 }],
    )
    .unwrap();
    let s = solve(&p, &SdpOptions::default()).unwrap();
    assert_eq!(s.status, SdpStatus::Infeasible);
    assert!(s.certificate.is_some());
}

/// Rebuild `(dims, C, A, b)` from the SDPA text, undoing its sign convention.
fn parse_sdpa(text: &str) -> SdpProblem {
    let mut lines = text.lines().filter(|l| !l.starts_with('"') && !l.starts_with('*'));
    let m: usize = lines.next().unwrap().trim().parse().unwrap();
    let nblocks: usize = lines.next().unwrap().trim().parse().unwrap();
    let dims: Vec<usize> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(dims.len(), nblocks);
    let rhs: Vec<f64> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    let mut mats: Vec<BlockMatrix> = (0..=m).map(|_| dims.iter().map(|&d| DMatrix::zeros(d, d)).collect()).collect();
    for l in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        let (k, b, i, j): (usize, usize, usize, usize) =
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!(i <= j);
        let v: f64 = f[4].parse().unwrap();
        let v = if k == 0 { -v } else { v };
        mats[k][b - 1][(i - 1, j - 1)] = v;
        mats[k][b - 1][(j - 1, i - 1)] = v;
    }
    let c = mats.remove(0);
    let cons = mats.into_iter().zip(rhs).map(|(blocks, rhs)| SdpConstraint { blocks, rhs }).collect();
    SdpProblem::new(dims, c, cons).unwrap()
}

#[test]
fn sdpa_dump_round_trips() {
    for seed in 0..10 {
        let p = instance(seed).problem;
        assert_eq!(parse_sdpa(&p.to_sdpa()), p);
    }
}
