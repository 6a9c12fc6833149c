#![allow(dead_code)]

use convexpop::polyalg::{Polynomial, SemialgebraicSet};

pub fn poly(n: usize, terms: &[(&[u32], f64)]) -> Polynomial {
    Polynomial::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap()
}

/// `{x1 x2 - 1/4 >= 0, 1/2 - (x1 - 1/2)^2 - (x2 - 1/2)^2 >= 0}`.
pub fn hyperbola_disk() -> SemialgebraicSet {
    let g1 = poly(2, &[(&[1, 1], 1.0), (&[0, 0], -0.25)]);
    // 0.5 - (x1^2 - x1 + 0.25) - (x2^2 - x2 + 0.25)
    let g2 = poly(2, &[(&[2, 0], -1.0), (&[1, 0], 1.0), (&[0, 2], -1.0), (&[0, 1], 1.0)]);
    SemialgebraicSet::new(2, vec![g1, g2], None).unwrap()
}

/// `{(1 - x1^2 + x2^2)^3 >= 0, 10 - x1^2 - x2^2 >= 0}`.
pub fn cubed_hyperbola() -> SemialgebraicSet {
    let inner = poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], 1.0)]);
    let g2 = poly(2, &[(&[0, 0], 10.0), (&[2, 0], -1.0), (&[0, 2], -1.0)]);
    SemialgebraicSet::new(2, vec![inner.pow(3), g2], None).unwrap()
}

pub fn unit_disk() -> SemialgebraicSet {
    SemialgebraicSet::new(2, vec![poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], -1.0)])], None).unwrap()
}

/// Minimum of `f` over a two-dimensional `set` by a grid of spacing `h`
/// over `bx`, refined by successively smaller local grids around the incumbent.
pub fn grid_minimum_2d(f: &Polynomial, set: &SemialgebraicSet, bx: [(f64, f64); 2], h: f64) -> (f64, [f64; 2]) {
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    let scan = |lo: [f64; 2], hi: [f64; 2], step: f64, best: &mut (f64, [f64; 2])| {
        let nx = ((hi[0] - lo[0]) / step).ceil() as usize;
        let ny = ((hi[1] - lo[1]) / step).ceil() as usize;
        for i in 0..=nx {
            let x = lo[0] + i as f64 * step;
            for j in 0..=ny {
                let y = lo[1] + j as f64 * step;
                let p = [x, y];
                if set.contains(&p, 0.0) {
                    let v = f.eval(&p).unwrap();
                    if v < best.0 {
                        *best = (v, p);
                    }
                }
            }
        }
    };
    scan([bx[0].0, bx[1].0], [bx[0].1, bx[1].1], h, &mut best);
    // The grid incumbent can sit up to ~sqrt(h) away from the true minimizer
    // along a curved boundary, so the local windows start wide.
    let mut r = 50.0 * h;
    for _ in 0..10 {
        let c = best.1;
        scan([c[0] - r, c[1] - r], [c[0] + r, c[1] + r], r / 100.0, &mut best);
        r /= 4.0;
    }
    best
}

use convexpop::moment::MomentVector;
use convexpop::polyalg::monomial_basis;
use convexpop::sdp::{min_eigenvalue, BlockMatrix, SdpConstraint, SdpProblem};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn affine<R: Rng>(rng: &mut R, n: usize) -> Polynomial {
    let mut p = Polynomial::constant(n, rng.random_range(-1.0..1.0));
    for i in 0..n {
        p = &p + &Polynomial::var(n, i).scale(rng.random_range(-1.0..1.0));
    }
    p
}

/// Random SOS-convex polynomial of degree <= 4: nonnegative combinations of
/// even powers of affine forms, a PSD quadratic form `q` and its square `q^2`,
/// plus an affine part. Each summand has an SOS Hessian factorization.
pub fn random_sos_convex<R: Rng>(rng: &mut R, n: usize) -> Polynomial {
    let mut f = affine(rng, n);
    for _ in 0..rng.random_range(0..=3) {
        f = &f + &affine(rng, n).pow(4).scale(rng.random_range(0.0..1.0));
    }
    for _ in 0..rng.random_range(0..=2) {
        f = &f + &affine(rng, n).pow(2).scale(rng.random_range(0.0..1.0));
    }
    // q = |M x|^2
    let mut q = Polynomial::zero(n);
    for _ in 0..rng.random_range(0..=n) {
        let mut row = Polynomial::zero(n);
        for i in 0..n {
            row = &row + &Polynomial::var(n, i).scale(rng.random_range(-1.0..1.0));
        }
        q = &q + &row.pow(2);
    }
    f = &f + &q.scale(rng.random_range(0.0..1.0));
    &f + &q.pow(2).scale(rng.random_range(0.0..0.5))
}

/// Convex combination of Dirac moment vectors, perturbed entrywise and
/// resampled until `M_d(y)` is PSD. The perturbation generally leaves the
/// moment cone, so `y` need not come from a measure.
pub fn admissible_pseudo_moments<R: Rng>(rng: &mut R, n: usize, d: usize) -> MomentVector {
    let k = monomial_basis(n, d).len() + rng.random_range(0..3);
    let pts: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    let base = MomentVector::from_atoms(&w, &pts, d).unwrap();
    let mut eps = 0.05;
    loop {
        let mut v = base.values().to_vec();
        v[0] = 1.0;
        for x in v.iter_mut().skip(1) {
            *x += eps * rng.random_range(-1.0..1.0) * (1.0 + x.abs());
        }
        let y = MomentVector::new(n, d, v).unwrap();
        if min_eigenvalue(&y.moment_matrix(d).unwrap()).unwrap() >= 0.0 {
            return y;
        }
        eps *= 0.8;
    }
}

/// Convex univariate polynomial of degree <= 4.
pub fn random_convex_univariate<R: Rng>(rng: &mut R) -> Polynomial {
    let t = Polynomial::var(1, 0);
    let shift = &t - &Polynomial::constant(1, rng.random_range(-1.0..1.0));
    let mut f = affine(rng, 1);
    f = &f + &shift.pow(4).scale(rng.random_range(0.0..1.0));
    &f + &t.pow(2).scale(rng.random_range(0.0..1.0))
}

/// Random polynomial of degree <= `deg` with all basis monomials present.
pub fn random_poly<R: Rng>(rng: &mut R, n: usize, deg: usize) -> Polynomial {
    let mut p = Polynomial::zero(n);
    for m in monomial_basis(n, deg) {
        p.add_term(m, rng.random_range(-1.0..1.0));
    }
    p
}

/// `L_y(p)` summed term by term, independent of the library's Riesz map.
pub fn riesz_by_terms(y: &MomentVector, p: &Polynomial) -> f64 {
    p.terms().map(|(m, c)| c * y.get(m).unwrap()).sum()
}

pub struct SdpInstance {
    pub problem: SdpProblem,
    pub x0: BlockMatrix,
    pub y0: Vec<f64>,
}

fn sym<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

fn pd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &m * m.transpose() + DMatrix::identity(n, n) * rng.random_range(0.1..1.0)
}

pub fn inner(a: &BlockMatrix, b: &BlockMatrix) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Random SDP with a known strictly feasible primal point `X0` and a known
/// strictly feasible dual point `(y0, Z0)`; `b` and `C` are derived from them.
pub fn random_feasible_sdp(seed: u64) -> SdpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=4)).collect();
    let free: usize = dims.iter().map(|d| d * (d + 1) / 2).sum();
    let m = rng.random_range(1..=free);
    let a: Vec<BlockMatrix> = (0..m).map(|_| dims.iter().map(|&d| sym(&mut rng, d)).collect()).collect();
    let x0: BlockMatrix = dims.iter().map(|&d| pd(&mut rng, d)).collect();
    let y0: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut c: BlockMatrix = dims.iter().map(|&d| pd(&mut rng, d)).collect();
    for (ak, yk) in a.iter().zip(&y0) {
        for (cb, ab) in c.iter_mut().zip(ak) {
            *cb += ab * *yk;
        }
    }
    let constraints = a.into_iter().map(|blocks| SdpConstraint { rhs: inner(&blocks, &x0), blocks }).collect();
    SdpInstance { problem: SdpProblem::new(dims, c, constraints).unwrap(), x0, y0 }
}
