//! Gram-matrix SOS decompositions, SOS-convexity and Jensen-type checks.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::moment::MomentVector;
use crate::polyalg::{monomial_basis, Monomial, Polynomial};
use crate::sdp::{self, SdpConstraint, SdpOptions, SdpProblem, SdpStatus};
use crate::{Error, Result};

/// Largest eigenvalue deficit tolerated in an accepted Gram matrix.
pub const GRAM_PSD_TOL: f64 = 1e-7;
/// Relative reconstruction tolerance for accepted witnesses.
pub const GRAM_RESIDUAL_TOL: f64 = 1e-7;
/// Slack allowed in the Jensen inequalities.
pub const JENSEN_TOL: f64 = 1e-7;

/// `p ~ z^T G z` over the monomial vector `z = basis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWitness", into = "RawWitness")]
pub struct SosWitness {
    pub basis: Vec<Monomial>,
    pub gram: DMatrix<f64>,
    /// l1-norm of `p - z^T G z`.
    pub residual: f64,
}

#[derive(Serialize, Deserialize)]
struct RawWitness {
    basis: Vec<Monomial>,
    gram: Vec<f64>,
    residual: f64,
}

impl TryFrom<RawWitness> for SosWitness {
    type Error = Error;

    fn try_from(raw: RawWitness) -> Result<Self> {
        let k = raw.basis.len();
        if raw.gram.len() != k * k {
            return Err(Error::DimensionMismatch { expected: k * k, got: raw.gram.len() });
        }
        SosWitness::from_gram(raw.basis, DMatrix::from_row_slice(k, k, &raw.gram), raw.residual)
    }
}

impl From<SosWitness> for RawWitness {
    fn from(w: SosWitness) -> Self {
        let k = w.basis.len();
        let gram = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| w.gram[(i, j)]).collect();
        RawWitness { basis: w.basis, gram, residual: w.residual }
    }
}

impl SosWitness {
    pub fn from_gram(basis: Vec<Monomial>, gram: DMatrix<f64>, residual: f64) -> Result<Self> {
        if gram.nrows() != basis.len() || gram.ncols() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), got: gram.nrows() });
        }
        Ok(SosWitness { basis, gram, residual })
    }

    /// `z^T G z` as a polynomial in `nvars` variables.
    pub fn polynomial(&self, nvars: usize) -> Polynomial {
        let mut p = Polynomial::zero(nvars);
        for i in 0..self.basis.len() {
            for j in 0..self.basis.len() {
                let g = self.gram[(i, j)];
                if g != 0.0 {
                    p.add_term(self.basis[i].mul(&self.basis[j]), g);
                }
            }
        }
        p
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        if self.basis.is_empty() {
            return Ok(0.0);
        }
        sdp::min_eigenvalue(&self.gram)
    }

    /// Checks both witness invariants against `p`.
    pub fn is_valid_for(&self, p: &Polynomial) -> Result<bool> {
        let residual = (p - &self.polynomial(p.nvars())).l1_norm();
        Ok(self.min_eigenvalue()? >= -GRAM_PSD_TOL && residual <= GRAM_RESIDUAL_TOL * (1.0 + p.l1_norm()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SosOutcome {
    Sos(SosWitness),
    /// No Gram matrix exists. `dual_ray` is the separating functional found
    /// by the solver; it is `None` when the support alone rules p out.
    Infeasible {
        dual_ray: Option<DVector<f64>>,
    },
    /// The solver neither certified nor refuted.
    Inconclusive {
        status: SdpStatus,
        detail: String,
    },
}

impl SosOutcome {
    pub fn witness(&self) -> Option<&SosWitness> {
        match self {
            SosOutcome::Sos(w) => Some(w),
            _ => None,
        }
    }

    pub fn is_sos(&self) -> bool {
        matches!(self, SosOutcome::Sos(_))
    }
}

/// Decides whether `p` is a sum of squares by a Gram-matrix SDP.
pub fn sos_decompose(p: &Polynomial) -> Result<SosOutcome> {
    sos_decompose_with(p, &SdpOptions::default())
}

pub fn sos_decompose_with(p: &Polynomial, options: &SdpOptions) -> Result<SosOutcome> {
    if p.is_zero() {
        return Err(Error::InvalidArgument("zero polynomial".into()));
    }
    if p.degree() % 2 == 1 {
        return Err(Error::InvalidArgument(format!("odd degree {} is never SOS", p.degree())));
    }
    let basis = newton_box_basis(p);
    gram_search(p, basis, options)
}

// Monomials m with 2m inside the coordinate box and degree band of supp(p).
fn newton_box_basis(p: &Polynomial) -> Vec<Monomial> {
    let n = p.nvars();
    let mut lo = vec![u32::MAX; n];
    let mut hi = vec![0u32; n];
    let mut dmin = usize::MAX;
    for (m, _) in p.terms() {
        for i in 0..n {
            lo[i] = lo[i].min(m.exponents()[i]);
            hi[i] = hi[i].max(m.exponents()[i]);
        }
        dmin = dmin.min(m.degree());
    }
    monomial_basis(n, p.degree() / 2)
        .into_iter()
        .filter(|m| {
            m.degree() * 2 >= dmin && m.exponents().iter().enumerate().all(|(i, &e)| 2 * e >= lo[i] && 2 * e <= hi[i])
        })
        .collect()
}

// Drops basis monomials whose square can only arise as a diagonal product
// and whose square is absent from p: such a diagonal Gram entry must be 0,
// which forces its whole row to vanish in any PSD solution.
fn prune_diagonal(p: &Polynomial, mut basis: Vec<Monomial>) -> Vec<Monomial> {
    loop {
        let mut counts: BTreeMap<Monomial, usize> = BTreeMap::new();
        for i in 0..basis.len() {
            for j in i..basis.len() {
                *counts.entry(basis[i].mul(&basis[j])).or_default() += 1;
            }
        }
        let before = basis.len();
        basis.retain(|m| {
            let sq = m.mul(m);
            p.coeff(&sq) != 0.0 || counts[&sq] > 1
        });
        if basis.len() == before {
            return basis;
        }
    }
}

fn gram_search(p: &Polynomial, basis: Vec<Monomial>, options: &SdpOptions) -> Result<SosOutcome> {
    let basis = prune_diagonal(p, basis);
    let mut pairs: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..basis.len() {
        for j in i..basis.len() {
            pairs.entry(basis[i].mul(&basis[j])).or_default().push((i, j));
        }
    }
    if p.terms().any(|(m, _)| !pairs.contains_key(m)) {
        return Ok(SosOutcome::Infeasible { dual_ray: None });
    }
    let k = basis.len();
    let constraints: Vec<SdpConstraint> = pairs
        .iter()
        .map(|(gamma, cells)| {
            let mut a = DMatrix::zeros(k, k);
            for &(i, j) in cells {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
            SdpConstraint { blocks: vec![a], rhs: p.coeff(gamma) }
        })
        .collect();
    let problem = SdpProblem::new(vec![k], vec![DMatrix::zeros(k, k)], constraints)?;
    let sol = sdp::solve(&problem, options)?;
    match sol.status {
        SdpStatus::Infeasible => {
            let ray = match sol.certificate {
                Some(sdp::InfeasibilityCertificate::DualRay(y)) => Some(y),
                _ => None,
            };
            return Ok(SosOutcome::Infeasible { dual_ray: ray });
        }
        SdpStatus::Unbounded => {
            return Ok(SosOutcome::Inconclusive {
                status: sol.status,
                detail: "solver reported an unbounded feasibility problem".into(),
            })
        }
        // On a low-rank face the solver can stall short of its tolerances;
        // the iterate is still a usable candidate and is verified below.
        _ => {}
    }
    let mut candidates = face_candidates(p, &pairs, &sol.primal[0]);
    let mut plain = sol.primal[0].clone();
    project_onto_constraints(p, &pairs, &mut plain);
    candidates.push(plain);
    let mut worst = (f64::NEG_INFINITY, f64::INFINITY);
    for gram in candidates {
        let residual = (p - &SosWitness::from_gram(basis.clone(), gram.clone(), 0.0)?.polynomial(p.nvars())).l1_norm();
        let witness = SosWitness::from_gram(basis.clone(), gram, residual)?;
        if witness.is_valid_for(p)? {
            return Ok(SosOutcome::Sos(witness));
        }
        worst = (witness.min_eigenvalue()?, residual);
    }
    Ok(SosOutcome::Inconclusive {
        status: sol.status,
        detail: format!("Gram candidate rejected: min eigenvalue {:e}, residual {:e}", worst.0, worst.1),
    })
}

// On a low-rank face the solver stalls short of its tolerances. Each
// candidate keeps the eigenpairs of `x` above a relative cutoff as a factor
// `x ~ L L^T` and refines `L` by Gauss-Newton on the coefficient equations,
// so the result is PSD by construction.
fn face_candidates(
    p: &Polynomial,
    pairs: &BTreeMap<Monomial, Vec<(usize, usize)>>,
    x: &DMatrix<f64>,
) -> Vec<DMatrix<f64>> {
    let eig = x.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    if lmax <= 0.0 {
        return Vec::new();
    }
    let k = x.nrows();
    let mut out = Vec::new();
    let mut last_rank = usize::MAX;
    for cutoff in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
        let keep: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > cutoff * lmax).collect();
        let r = keep.len();
        if r == last_rank {
            continue;
        }
        last_rank = r;
        let mut l = DMatrix::from_fn(k, r, |i, a| eig.eigenvectors[(i, keep[a])] * eig.eigenvalues[keep[a]].sqrt());
        for _ in 0..GAUSS_NEWTON_STEPS {
            let g = &l * l.transpose();
            let mut jac = DMatrix::zeros(pairs.len(), k * r);
            let mut res = DVector::zeros(pairs.len());
            for (row, (gamma, cells)) in pairs.iter().enumerate() {
                let mut have = 0.0;
                for &(i, j) in cells {
                    let w = if i == j { 1.0 } else { 2.0 };
                    have += w * g[(i, j)];
                    for a in 0..r {
                        jac[(row, i * r + a)] += w * l[(j, a)];
                        jac[(row, j * r + a)] += w * l[(i, a)];
                    }
                }
                res[row] = p.coeff(gamma) - have;
            }
            if res.amax() <= 1e-14 * (1.0 + p.l1_norm()) {
                break;
            }
            let svd = jac.svd(true, true);
            let smax = svd.singular_values.max();
            let Ok(step) = svd.solve(&res, 1e-10 * smax) else {
                break;
            };
            for i in 0..k {
                for a in 0..r {
                    l[(i, a)] += step[i * r + a];
                }
            }
        }
        out.push(&l * l.transpose());
    }
    out
}

const GAUSS_NEWTON_STEPS: usize = 20;

// Orthogonal projection onto the affine coefficient-matching constraints.
// Each constraint touches a disjoint set of cells, so the projection spreads
// each residual evenly over its cells.
fn project_onto_constraints(p: &Polynomial, pairs: &BTreeMap<Monomial, Vec<(usize, usize)>>, gram: &mut DMatrix<f64>) {
    for (gamma, cells) in pairs {
        let mut have = 0.0;
        let mut count = 0.0;
        for &(i, j) in cells {
            if i == j {
                have += gram[(i, i)];
                count += 1.0;
            } else {
                have += 2.0 * gram[(i, j)];
                count += 2.0;
            }
        }
        let delta = (p.coeff(gamma) - have) / count;
        for &(i, j) in cells {
            gram[(i, j)] += delta;
            if i != j {
                gram[(j, i)] += delta;
            }
        }
    }
}

/// Certificate that `W^T Hess f(X) W` is SOS in the doubled variables
/// `(X, W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSosWitness {
    /// Number of original variables; the witness lives in `2 * nvars`.
    pub nvars: usize,
    pub witness: SosWitness,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SosConvexity {
    SosConvex(MatrixSosWitness),
    NotSosConvex { reason: String },
}

impl SosConvexity {
    pub fn is_sos_convex(&self) -> bool {
        matches!(self, SosConvexity::SosConvex(_))
    }
}

/// `W^T Hess f(X) W` in `2n` variables, `X` first.
pub fn scalarized_hessian(f: &Polynomial) -> Polynomial {
    let n = f.nvars();
    let h = f.hessian();
    let mut out = Polynomial::zero(2 * n);
    for i in 0..n {
        for j in 0..n {
            let hij = h.get(i, j);
            if hij.is_zero() {
                continue;
            }
            let wij = Polynomial::from_monomial(Monomial::var(2 * n, n + i).mul(&Monomial::var(2 * n, n + j)), 1.0);
            out = &out + &(&hij.embed(2 * n, 0) * &wij);
        }
    }
    out
}

pub fn is_sos_convex(f: &Polynomial) -> Result<SosConvexity> {
    is_sos_convex_with(f, &SdpOptions::default())
}

pub fn is_sos_convex_with(f: &Polynomial, options: &SdpOptions) -> Result<SosConvexity> {
    let n = f.nvars();
    let deg = f.degree();
    if deg <= 1 {
        let w = SosWitness::from_gram(wvars(n), DMatrix::zeros(n, n), 0.0)?;
        return Ok(SosConvexity::SosConvex(MatrixSosWitness { nvars: n, witness: w }));
    }
    if deg % 2 == 1 {
        return Ok(SosConvexity::NotSosConvex { reason: format!("odd degree {deg}") });
    }
    if deg == 2 {
        // Constant Hessian: its own Gram matrix in the basis W.
        let h = f.hessian().eval(&vec![0.0; n])?;
        let w = SosWitness::from_gram(wvars(n), h, 0.0)?;
        let lmin = w.min_eigenvalue()?;
        if lmin >= -GRAM_PSD_TOL {
            return Ok(SosConvexity::SosConvex(MatrixSosWitness { nvars: n, witness: w }));
        }
        return Ok(SosConvexity::NotSosConvex { reason: format!("constant Hessian has eigenvalue {lmin:e}") });
    }
    let h = scalarized_hessian(f);
    if h.is_zero() {
        let w = SosWitness::from_gram(wvars(n), DMatrix::zeros(n, n), 0.0)?;
        return Ok(SosConvexity::SosConvex(MatrixSosWitness { nvars: n, witness: w }));
    }
    // Bihomogeneous basis: degree one in W, degree <= (deg f - 2) / 2 in X.
    let mut basis = Vec::new();
    for wi in 0..n {
        for xb in monomial_basis(n, (deg - 2) / 2) {
            let mut e = xb.exponents().to_vec();
            e.resize(2 * n, 0);
            e[n + wi] = 1;
            basis.push(Monomial::new(e));
        }
    }
    basis.sort();
    match gram_search(&h, basis, options)? {
        SosOutcome::Sos(w) => Ok(SosConvexity::SosConvex(MatrixSosWitness { nvars: n, witness: w })),
        SosOutcome::Infeasible { .. } => {
            Ok(SosConvexity::NotSosConvex { reason: "scalarized Hessian is not SOS".into() })
        }
        SosOutcome::Inconclusive { detail, .. } => {
            Ok(SosConvexity::NotSosConvex { reason: format!("no certificate found: {detail}") })
        }
    }
}

fn wvars(n: usize) -> Vec<Monomial> {
    (0..n).map(|i| Monomial::var(2 * n, n + i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl JensenReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        JensenReport { lhs, rhs, holds: lhs >= rhs - JENSEN_TOL * (1.0 + rhs.abs()) }
    }
}

/// Checks `L_y(f) >= f(L_y(X))` after verifying all preconditions.
pub fn jensen_check(f: &Polynomial, y: &MomentVector) -> Result<JensenReport> {
    JensenVerifier::new(f)?.check(y)
}

/// An SOS-convex `f`, certified once and then checked against many `y`.
#[derive(Debug, Clone)]
pub struct JensenVerifier {
    f: Polynomial,
    witness: MatrixSosWitness,
}

impl JensenVerifier {
    pub fn new(f: &Polynomial) -> Result<Self> {
        match is_sos_convex(f)? {
            SosConvexity::SosConvex(witness) => Ok(JensenVerifier { f: f.clone(), witness }),
            SosConvexity::NotSosConvex { reason } => {
                Err(Error::Precondition(format!("f is not SOS-convex ({reason})")))
            }
        }
    }

    pub fn witness(&self) -> &MatrixSosWitness {
        &self.witness
    }

    pub fn check(&self, y: &MomentVector) -> Result<JensenReport> {
        if y.nvars() != self.f.nvars() {
            return Err(Error::DimensionMismatch { expected: self.f.nvars(), got: y.nvars() });
        }
        if self.f.degree() > 2 * y.order() {
            return Err(Error::Precondition(format!(
                "deg f = {} exceeds 2 * order(y) = {}",
                self.f.degree(),
                2 * y.order()
            )));
        }
        check_admissible(y)?;
        let lhs = y.riesz(&self.f)?;
        let rhs = self.f.eval(&y.mean_point()?)?;
        Ok(JensenReport::new(lhs, rhs))
    }
}

// y0 = 1 and M_d(y) PSD, the hypotheses on y shared by both checks.
fn check_admissible(y: &MomentVector) -> Result<()> {
    if (y.y0() - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("y0 = {} is not 1", y.y0())));
    }
    if y.order() == 0 {
        return Err(Error::Precondition("order(y) must be at least 1".into()));
    }
    let m = y.moment_matrix(y.order())?;
    let lmin = sdp::min_eigenvalue(&m)?;
    if lmin < -1e-7 * m.norm().max(1.0) {
        return Err(Error::Precondition(format!("M_d(y) is not PSD (min eigenvalue {lmin:e})")));
    }
    Ok(())
}

/// Checks `L_y(f(g)) >= f(L_y(g))` for a convex univariate `f`.
pub fn jensen_composed_check(f_uni: &Polynomial, g: &Polynomial, y: &MomentVector) -> Result<JensenReport> {
    if f_uni.nvars() != 1 {
        return Err(Error::InvalidArgument("outer polynomial must be univariate".into()));
    }
    if g.nvars() != y.nvars() {
        return Err(Error::DimensionMismatch { expected: y.nvars(), got: g.nvars() });
    }
    check_univariate_convex(f_uni)?;
    let composed = f_uni.compose_univariate(g)?;
    if composed.degree() > 2 * y.order() {
        return Err(Error::Precondition(format!(
            "deg f(g) = {} exceeds 2 * order(y) = {}",
            composed.degree(),
            2 * y.order()
        )));
    }
    check_admissible(y)?;
    let lhs = y.riesz(&composed)?;
    let rhs = f_uni.eval(&[y.riesz(g)?])?;
    Ok(JensenReport::new(lhs, rhs))
}

/// Accepts `f` when `f''` is SOS; otherwise reports a point where `f'' < 0`.
pub fn check_univariate_convex(f: &Polynomial) -> Result<()> {
    let f2 = f.partial(0).partial(0);
    if f2.is_zero() {
        return Ok(());
    }
    if f2.degree().is_multiple_of(2) {
        if let SosOutcome::Sos(_) = sos_decompose(&f2)? {
            return Ok(());
        }
    }
    // Scan beyond the Cauchy root bound so every sign change is bracketed.
    let lead = f2.coeff(&Monomial::new(vec![f2.degree() as u32]));
    let bound = 1.0 + f2.terms().map(|(_, c)| (c / lead).abs()).fold(0.0, f64::max);
    let steps = 20_000;
    let mut worst = (f64::INFINITY, 0.0);
    for k in 0..=steps {
        let t = -bound + 2.0 * bound * k as f64 / steps as f64;
        let v = f2.eval(&[t])?;
        if v < worst.0 {
            worst = (v, t);
        }
    }
    if worst.0 < 0.0 {
        return Err(Error::Precondition(format!("outer polynomial is not convex: f''({}) = {:e}", worst.1, worst.0)));
    }
    Err(Error::Precondition("could not certify convexity of the outer polynomial".into()))
}

/// Distinct squares used by a witness; handy for audits.
pub fn witness_support(w: &SosWitness) -> BTreeSet<Monomial> {
    let mut s = BTreeSet::new();
    for a in &w.basis {
        for b in &w.basis {
            s.insert(a.mul(b));
        }
    }
    s
}
