//! Numerical convexity certificates for basic semi-algebraic sets and their
//! semidefinite representations.
//!
//! For each constraint `g_j` the test program works with moments `z` of
//! `(X, Y)` in `2n` variables and minimizes `L_z(<grad g_j(Y), X - Y>)` over
//! `x, y` in `K` with `g_j(y) = 0`. A value of zero (to tolerance) together
//! with boundary nondegeneracy is the supporting-hyperplane certificate.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::hierarchy::ball_augment;
use crate::lmi::{CellTerms, MomentProgram, MomentStatus};
use crate::moment::MomentVector;
use crate::polyalg::{basis_size, monomial_basis, Monomial, Polynomial, SemialgebraicSet, Term};
use crate::sampling::{self, SampleBox};
use crate::sdp::{self, SdpOptions};
use crate::sos::SosWitness;
use crate::{Error, Result};

/// Gradient norms below this on the boundary mark a constraint degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;
/// Half-width of the band `|g_j| <= band` counted as boundary.
pub const BOUNDARY_BAND: f64 = 1e-4;

/// The set actually certified: the ball constraint is appended when a ball
/// bound is declared.
pub fn working_set(set: &SemialgebraicSet) -> Result<SemialgebraicSet> {
    match set.ball_bound() {
        Some(m) => ball_augment(set, m),
        None => Ok(set.clone()),
    }
}

/// Embeds `p(X)` as `p(X)` or `p(Y)` in the doubled variables.
fn as_x(p: &Polynomial) -> Polynomial {
    p.embed(2 * p.nvars(), 0)
}

fn as_y(p: &Polynomial) -> Polynomial {
    p.embed(2 * p.nvars(), p.nvars())
}

/// `<grad g(Y), X - Y>` in `2n` variables.
pub fn hyperplane_polynomial(g: &Polynomial) -> Polynomial {
    let n = g.nvars();
    let mut out = Polynomial::zero(2 * n);
    for (i, d) in g.gradient().iter().enumerate() {
        let diff = &Polynomial::var(2 * n, i) - &Polynomial::var(2 * n, n + i);
        out = &out + &(&as_y(d) * &diff);
    }
    out
}

/// Smallest admissible test order for constraint `j`.
pub fn min_test_order(set: &SemialgebraicSet, j: usize) -> usize {
    let rmax = set.half_degrees().into_iter().max().unwrap_or(0);
    set.constraints()[j].degree().div_ceil(2).max(rmax).max(1)
}

/// The test program for constraint `j` (zero-based) at order `d`.
pub fn rho_program(set: &SemialgebraicSet, j: usize, d: usize) -> Result<MomentProgram> {
    let m = set.num_constraints();
    if j >= m {
        return Err(Error::InvalidArgument(format!("constraint index {j} out of range (m = {m})")));
    }
    let need = min_test_order(set, j);
    if d < need {
        return Err(Error::Precondition(format!("test order {d} is below the minimal order {need}")));
    }
    let n = set.nvars();
    let gj = &set.constraints()[j];
    let mut p = MomentProgram::new(d, hyperplane_polynomial(gj))?;
    p.add_psd(Polynomial::constant(2 * n, 1.0), d)?;
    let rs = set.half_degrees();
    for (g, &r) in set.constraints().iter().zip(&rs) {
        p.add_psd(as_x(g), d - r)?;
    }
    for (k, (g, &r)) in set.constraints().iter().zip(&rs).enumerate() {
        if k != j {
            p.add_psd(as_y(g), d - r)?;
        }
    }
    p.add_zero_block(as_y(gj), d - rs[j])?;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMethod {
    RhoSdp,
    QuadraticConcaveShortcut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertStatus {
    CertifiedNumerically,
    Inconclusive,
    RefutedBySample,
}

impl std::fmt::Display for CertStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CertStatus::CertifiedNumerically => "certified_numerically",
            CertStatus::Inconclusive => "inconclusive",
            CertStatus::RefutedBySample => "refuted_by_sample",
        })
    }
}

/// Weights of the identity
/// `<grad g_j(Y), X - Y> - rho_j = sum_k sigma_jk g_k(X) + sum_(k != j) psi_jk g_k(Y) + psi_j g_j(Y)`,
/// with `g_0 = 1`, over the doubled variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateWeights {
    /// `sigma_j0, sigma_j1, ..., sigma_jm`.
    pub sigma: Vec<SosWitness>,
    /// `psi_jk` for `k != j`, in increasing `k`.
    pub psi: Vec<SosWitness>,
    /// The free multiplier `psi_j`, as a term list in `2n` variables.
    pub psi_j: Vec<Term>,
    /// l1-norm of the identity residual.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoAttempt {
    pub d: usize,
    pub status: MomentStatus,
    pub rho: f64,
    pub iterations: usize,
    /// Largest KKT measure of the reported iterate.
    pub kkt_error: f64,
}

impl RhoAttempt {
    /// Optimal, or stopped early at an iterate whose KKT error is within `tol`.
    pub fn accurate(&self, tol: f64) -> bool {
        match self.status {
            MomentStatus::Optimal => true,
            MomentStatus::Inaccurate | MomentStatus::NumericalFailure => self.kkt_error <= tol,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    /// Zero-based constraint index.
    pub j: usize,
    pub method: CertMethod,
    /// Order at which the record closed, or the last order tried.
    pub d: usize,
    pub rho: f64,
    pub closed: bool,
    pub attempts: Vec<RhoAttempt>,
    pub weights: Option<CertificateWeights>,
    pub weights_error: Option<String>,
    /// Moments of the last test solve.
    pub moments: Option<MomentVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub j: usize,
    pub samples: usize,
    pub min_gradient_norm: Option<f64>,
    pub degenerate: bool,
}

impl ProbeRecord {
    pub fn verdict(&self) -> &'static str {
        match (self.samples, self.degenerate) {
            (0, _) => "no active samples",
            (_, true) => "DEGENERATE",
            _ => "ok",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaterReport {
    pub found: bool,
    pub point: Vec<f64>,
    /// `min_j g_j` at `point`.
    pub margin: f64,
    /// Always `heuristic`.
    pub provenance: String,
}

/// A pair violating the supporting-hyperplane inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub j: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub status: CertStatus,
    pub tol: f64,
    pub set: SemialgebraicSet,
    pub records: Vec<ConstraintRecord>,
    pub probe: Vec<ProbeRecord>,
    pub degenerate: bool,
    pub slater: SlaterReport,
    pub counterexample: Option<Counterexample>,
    pub notes: Vec<String>,
}

impl ConvexityCertificate {
    /// `max_j d_j`.
    pub fn order(&self) -> usize {
        self.records.iter().map(|r| r.d).max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    pub d_max: usize,
    /// First test order tried; the minimal admissible order when unset.
    pub start_order: Option<usize>,
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
    pub recover_weights: bool,
    pub slater_margin: f64,
    /// Sampling box; defaults to the set's own bounding box.
    pub sample_box: Option<SampleBox>,
    pub sdp: SdpOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            d_max: 4,
            start_order: None,
            tol: 1e-6,
            samples: 500,
            seed: sampling::DEFAULT_SEED,
            recover_weights: true,
            slater_margin: 1e-6,
            sample_box: None,
            sdp: SdpOptions::default(),
        }
    }
}

/// Quadratic `g` with constant negative semidefinite Hessian.
pub fn is_concave_quadratic(g: &Polynomial) -> Result<bool> {
    if g.degree() > 2 {
        return Ok(false);
    }
    if g.degree() < 2 {
        return Ok(true);
    }
    let h = g.hessian().eval(&vec![0.0; g.nvars()])?;
    Ok(sdp::min_eigenvalue(&(-h))? >= -1e-12)
}

/// `<grad g(Y), X - Y> = g(X) - g(Y) + (X - Y)^T (-H/2) (X - Y)` for a
/// concave quadratic `g` with Hessian `H`.
fn shortcut_weights(set: &SemialgebraicSet, j: usize) -> Result<CertificateWeights> {
    let g = &set.constraints()[j];
    let n = g.nvars();
    let m = set.num_constraints();
    let q = g.hessian().eval(&vec![0.0; n])?.scale(-0.5);
    let basis: Vec<Monomial> = (0..2 * n).map(|i| Monomial::var(2 * n, i)).collect();
    let mut gram = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        for b in 0..n {
            gram[(a, b)] = q[(a, b)];
            gram[(n + a, n + b)] = q[(a, b)];
            gram[(a, n + b)] = -q[(a, b)];
            gram[(n + a, b)] = -q[(a, b)];
        }
    }
    let one = vec![Monomial::one(2 * n)];
    let mut sigma = vec![SosWitness::from_gram(basis, gram, 0.0)?];
    for k in 0..m {
        let w = if k == j { 1.0 } else { 0.0 };
        sigma.push(SosWitness::from_gram(one.clone(), DMatrix::from_element(1, 1, w), 0.0)?);
    }
    let psi = (0..m)
        .filter(|&k| k != j)
        .map(|_| SosWitness::from_gram(one.clone(), DMatrix::zeros(1, 1), 0.0))
        .collect::<Result<Vec<_>>>()?;
    let mut w =
        CertificateWeights { sigma, psi, psi_j: Polynomial::constant(2 * n, -1.0).to_term_list(), residual: 0.0 };
    w.residual = weights_residual(set, j, 0.0, &w)?;
    Ok(w)
}

/// l1-norm of the identity residual for `weights`.
pub fn weights_residual(set: &SemialgebraicSet, j: usize, rho: f64, weights: &CertificateWeights) -> Result<f64> {
    let n = set.nvars();
    let gs = set.constraints();
    let mut rhs = weights.sigma[0].polynomial(2 * n);
    for (k, g) in gs.iter().enumerate() {
        rhs = &rhs + &(&weights.sigma[k + 1].polynomial(2 * n) * &as_x(g));
    }
    for (w, k) in weights.psi.iter().zip((0..gs.len()).filter(|&k| k != j)) {
        rhs = &rhs + &(&w.polynomial(2 * n) * &as_y(&gs[k]));
    }
    let psi_j = Polynomial::from_term_list(2 * n, &weights.psi_j)?;
    rhs = &rhs + &(&psi_j * &as_y(&gs[j]));
    let lhs = &hyperplane_polynomial(&gs[j]) - &Polynomial::constant(2 * n, rho);
    Ok((&lhs - &rhs).l1_norm())
}

/// Bound on the identity residual for constraint `g`.
pub fn weights_tolerance(g: &Polynomial) -> f64 {
    let grad_l1: f64 = g.gradient().iter().map(Polynomial::l1_norm).sum();
    1e-5 * (1.0 + grad_l1)
}

fn solve_rho(
    set: &SemialgebraicSet,
    j: usize,
    d: usize,
    options: &CertifyOptions,
) -> Result<(RhoAttempt, Option<MomentVector>, Option<Result<CertificateWeights>>)> {
    let program = rho_program(set, j, d)?;
    let compiled = program.compile()?;
    let sol = compiled.solve(&options.sdp)?;
    let attempt = RhoAttempt {
        d,
        status: sol.status,
        rho: sol.value,
        iterations: sol.sdp.as_ref().map_or(0, |s| s.iterations),
        kkt_error: sol.sdp.as_ref().map_or(0.0, |s| s.kkt_error()),
    };
    let weights = if options.recover_weights && attempt.accurate(options.tol) {
        Some(compiled.sos_side(&sol).and_then(|side| {
            let m = set.num_constraints();
            let mut w = CertificateWeights {
                sigma: side.sigmas[..=m].to_vec(),
                psi: side.sigmas[m + 1..].to_vec(),
                psi_j: side.zero_multipliers[0].to_term_list(),
                residual: 0.0,
            };
            w.residual = weights_residual(set, j, side.lambda, &w)?;
            Ok(w)
        }))
    } else {
        None
    };
    Ok((attempt, sol.moments, weights))
}

/// Certifies, numerically, that every constraint admits the
/// supporting-hyperplane identity, and collects the side evidence.
pub fn certify_convexity(set: &SemialgebraicSet, options: &CertifyOptions) -> Result<ConvexityCertificate> {
    let work = working_set(set)?;
    if work.num_constraints() == 0 {
        return Err(Error::InvalidArgument("the whole space needs no certificate".into()));
    }
    let mut notes = Vec::new();
    if set.ball_bound().is_some() {
        notes.push("ball constraint appended before certifying".into());
    }
    let mut rng = sampling::rng(options.seed);
    let bx = options.sample_box.clone().unwrap_or_else(|| sampling::box_for(&work));
    if work.bounding_box().is_none() && options.sample_box.is_none() {
        notes.push("no bounding box; sampling in the cube of radius 10".into());
    }

    let slater = slater_search(&work, &bx, options.slater_margin, &mut rng)?;
    if !slater.found {
        notes.push(format!("Slater heuristic failed (best margin {:e})", slater.margin));
    }
    let probe = probe_constraints(&work, &bx, options.samples, &mut rng)?;
    let degenerate = probe.iter().any(|p| p.degenerate);
    if degenerate {
        notes.push("DEGENERATE boundary: the hyperplane test may hold vacuously".into());
    }

    let mut records = Vec::new();
    let mut failed = false;
    for j in 0..work.num_constraints() {
        let g = &work.constraints()[j];
        if is_concave_quadratic(g)? {
            let weights = if options.recover_weights { Some(shortcut_weights(&work, j)?) } else { None };
            records.push(ConstraintRecord {
                j,
                method: CertMethod::QuadraticConcaveShortcut,
                d: 1,
                rho: 0.0,
                closed: true,
                attempts: Vec::new(),
                weights,
                weights_error: None,
                moments: None,
            });
            continue;
        }
        let d_min = min_test_order(&work, j);
        let d_start = options.start_order.map_or(d_min, |d| d.max(d_min));
        let mut rec = ConstraintRecord {
            j,
            method: CertMethod::RhoSdp,
            d: d_start,
            rho: f64::NAN,
            closed: false,
            attempts: Vec::new(),
            weights: None,
            weights_error: None,
            moments: None,
        };
        for d in d_start..=options.d_max.max(d_start) {
            if d > options.d_max {
                notes.push(format!("g{}: first test order {d_start} exceeds d_max", j + 1));
                break;
            }
            let (attempt, moments, weights) = solve_rho(&work, j, d, options)?;
            rec.d = d;
            rec.rho = attempt.rho;
            rec.moments = moments;
            let ok = attempt.accurate(options.tol);
            rec.closed = ok && attempt.rho.abs() <= options.tol;
            rec.attempts.push(attempt);
            match weights {
                Some(Ok(w)) if w.residual <= weights_tolerance(g) => {
                    rec.weights = Some(w);
                    rec.weights_error = None;
                }
                Some(Ok(w)) => {
                    rec.weights = None;
                    rec.weights_error =
                        Some(format!("identity residual {:e} exceeds {:e}", w.residual, weights_tolerance(g)));
                }
                Some(Err(e)) => rec.weights_error = Some(e.to_string()),
                None => {}
            }
            if !ok {
                failed = true;
            }
            if rec.closed {
                break;
            }
        }
        records.push(rec);
    }
    if failed {
        notes.push("a test solve did not reach the requested accuracy".into());
    }

    let counterexample = search_counterexample(&work, &bx, options.samples, &mut rng)?;
    let status = if counterexample.is_some() {
        CertStatus::RefutedBySample
    } else if records.iter().all(|r| r.closed) {
        CertStatus::CertifiedNumerically
    } else {
        CertStatus::Inconclusive
    };
    Ok(ConvexityCertificate {
        status,
        tol: options.tol,
        set: work,
        records,
        probe,
        degenerate,
        slater,
        counterexample,
        notes,
    })
}

/// Newton iteration toward `g = 0` along the gradient. Returns `None` when
/// the gradient vanishes before the iteration settles.
pub fn project_to_zero_set(g: &Polynomial, start: &[f64], max_iter: usize) -> Option<Vec<f64>> {
    let grad = g.gradient();
    let mut x = start.to_vec();
    for _ in 0..max_iter {
        let v = g.eval(&x).ok()?;
        if v.abs() <= 1e-14 {
            return Some(x);
        }
        let gr: Vec<f64> = grad.iter().map(|d| d.eval(&x).unwrap_or(0.0)).collect();
        let nrm2: f64 = gr.iter().map(|a| a * a).sum();
        if !(nrm2 > 1e-300) {
            return Some(x);
        }
        for (xi, gi) in x.iter_mut().zip(&gr) {
            *xi -= v * gi / nrm2;
        }
        if x.iter().any(|a| !a.is_finite()) {
            return None;
        }
    }
    Some(x)
}

fn gradient_norm(g: &Polynomial, x: &[f64]) -> f64 {
    g.gradient().iter().map(|d| d.eval(x).unwrap_or(0.0).powi(2)).sum::<f64>().sqrt()
}

// Boundary point of constraint j inside K, from a random start.
fn boundary_point<R: Rng>(set: &SemialgebraicSet, j: usize, bx: &[(f64, f64)], rng: &mut R) -> Option<Vec<f64>> {
    let g = &set.constraints()[j];
    let start = sampling::uniform_in_box(rng, bx);
    let y = project_to_zero_set(g, &start, 200)?;
    let in_box = y.iter().zip(bx).all(|(v, &(lo, hi))| *v >= lo && *v <= hi);
    let on = g.eval(&y).ok()?.abs() <= BOUNDARY_BAND;
    (in_box && on && set.contains(&y, 1e-9)).then_some(y)
}

/// Samples boundary points of each constraint and records the smallest
/// gradient norm seen there.
pub fn nondegeneracy_probe(set: &SemialgebraicSet, samples: usize, seed: u64) -> Result<Vec<ProbeRecord>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let work = working_set(set)?;
    let bx = sampling::box_for(&work);
    probe_constraints(&work, &bx, samples, &mut sampling::rng(seed))
}

fn probe_constraints<R: Rng>(
    set: &SemialgebraicSet,
    bx: &[(f64, f64)],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<ProbeRecord>> {
    let mut out = Vec::new();
    for j in 0..set.num_constraints() {
        let g = &set.constraints()[j];
        let mut found = 0;
        let mut min_norm = f64::INFINITY;
        for _ in 0..20 * samples {
            if found == samples {
                break;
            }
            if let Some(y) = boundary_point(set, j, bx, rng) {
                found += 1;
                min_norm = min_norm.min(gradient_norm(g, &y));
            }
        }
        out.push(ProbeRecord {
            j,
            samples: found,
            min_gradient_norm: (found > 0).then_some(min_norm),
            degenerate: found > 0 && min_norm < DEGENERACY_THRESHOLD,
        });
    }
    Ok(out)
}

/// Local ascent on `min_j g_j` inside `bx` from random starts.
pub fn slater_search<R: Rng>(
    set: &SemialgebraicSet,
    bx: &[(f64, f64)],
    margin: f64,
    rng: &mut R,
) -> Result<SlaterReport> {
    let phi = |x: &[f64]| set.min_constraint(x);
    let mut best = (f64::NEG_INFINITY, vec![0.0; set.nvars()]);
    let width = bx.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max).max(1e-3);
    for _ in 0..20 {
        let mut x = sampling::uniform_in_box(rng, bx);
        let mut fx = phi(&x);
        let mut step = 0.25 * width;
        while step > 1e-9 * width {
            let mut improved = false;
            for i in 0..x.len() {
                for s in [step, -step] {
                    if x[i] + s < bx[i].0 || x[i] + s > bx[i].1 {
                        continue;
                    }
                    x[i] += s;
                    let v = phi(&x);
                    if v > fx {
                        fx = v;
                        improved = true;
                        break;
                    }
                    x[i] -= s;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if fx > best.0 {
            best = (fx, x);
        }
        if best.0 >= margin {
            break;
        }
    }
    Ok(SlaterReport { found: best.0 >= margin, point: best.1, margin: best.0, provenance: "heuristic".into() })
}

/// Looks for `x, y` in `K` with `g_j(y) = 0` and
/// `<grad g_j(y), x - y> < -1e-4 (1 + |grad g_j(y)|)`.
pub fn search_counterexample<R: Rng>(
    set: &SemialgebraicSet,
    bx: &[(f64, f64)],
    pairs: usize,
    rng: &mut R,
) -> Result<Option<Counterexample>> {
    let xs = sampling::sample_set(rng, set, bx, pairs, 200 * pairs.max(1));
    if xs.is_empty() {
        return Ok(None);
    }
    for j in 0..set.num_constraints() {
        let g = &set.constraints()[j];
        let grad = g.gradient();
        let mut found = 0;
        for _ in 0..20 * pairs {
            if found == pairs {
                break;
            }
            let Some(y) = boundary_point(set, j, bx, rng) else { continue };
            found += 1;
            let gy: Vec<f64> = grad.iter().map(|d| d.eval(&y)).collect::<Result<_>>()?;
            let gn = gy.iter().map(|v| v * v).sum::<f64>().sqrt();
            let x = &xs[rng.random_range(0..xs.len())];
            let value: f64 = gy.iter().zip(x.iter().zip(&y)).map(|(a, (xi, yi))| a * (xi - yi)).sum();
            if value < -1e-4 * (1.0 + gn) {
                return Ok(Some(Counterexample { j, x: x.clone(), y, value }));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdrForm {
    /// Localizing blocks `M_(d - r_j)(g_j y) >= 0`.
    Putinar,
    /// Scalar rows `L_y(g_j) >= 0`.
    Lagrangian,
}

/// How an SDr is justified.
#[derive(Debug, Clone, Copy)]
pub enum SdrSource<'a> {
    Certificate(&'a ConvexityCertificate),
    /// Explicit order and form, for sets covered by other hypotheses.
    Override {
        order: usize,
        form: SdrForm,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiCell {
    pub row: usize,
    pub col: usize,
    /// `(moment index, coefficient)` pairs.
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiBlockData {
    /// `None` for the moment matrix, otherwise the zero-based constraint.
    pub constraint: Option<usize>,
    pub dim: usize,
    /// Upper-triangle cells.
    pub cells: Vec<LmiCell>,
}

/// `Omega = {(x, y) : M_d(y) >= 0, constraint blocks >= 0, L_y(X_i) = x_i, y_0 = 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdrRepresentation {
    pub d: usize,
    pub form: SdrForm,
    pub base_set: SemialgebraicSet,
    /// Lift coordinates: exponents of every moment `y_alpha`, `|alpha| <= 2d`.
    pub moment_basis: Vec<Monomial>,
    /// Indices into `moment_basis` of the projection coordinates `x_i`.
    pub projection: Vec<usize>,
    pub blocks: Vec<LmiBlockData>,
}

impl SdrRepresentation {
    pub fn lift_dim(&self) -> usize {
        self.moment_basis.len()
    }

    fn program(&self, objective: Polynomial) -> Result<MomentProgram> {
        let n = self.base_set.nvars();
        let mut p = MomentProgram::new(self.d, objective)?;
        p.add_psd(Polynomial::constant(n, 1.0), self.d)?;
        for (g, r) in self.base_set.constraints().iter().zip(self.base_set.half_degrees()) {
            let k = match self.form {
                SdrForm::Putinar => self.d - r,
                SdrForm::Lagrangian => 0,
            };
            p.add_psd(g.clone(), k)?;
        }
        Ok(p)
    }

    /// Whether `(x, y)` satisfies every LMI of the lift to tolerance.
    pub fn contains_lift(&self, x: &[f64], y: &MomentVector, tol: f64) -> Result<bool> {
        let mean = y.mean_point()?;
        if mean.iter().zip(x).any(|(a, b)| (a - b).abs() > tol) {
            return Ok(false);
        }
        for block in self.program(Polynomial::zero(self.base_set.nvars()))?.psd_blocks() {
            let m = y.localizing_matrix(&block.weight, block.half_degree)?;
            if sdp::min_eigenvalue(&m)? < -tol * m.norm().max(1.0) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn build_sdr(set: &SemialgebraicSet, source: SdrSource<'_>) -> Result<SdrRepresentation> {
    let (base, d, form) = match source {
        SdrSource::Certificate(cert) => {
            if cert.status != CertStatus::CertifiedNumerically {
                return Err(Error::Precondition(format!(
                    "certificate status is {}; an override is required",
                    cert.status
                )));
            }
            (cert.set.clone(), cert.order(), SdrForm::Putinar)
        }
        SdrSource::Override { order, form } => (working_set(set)?, order, form),
    };
    let rmax = base.half_degrees().into_iter().max().unwrap_or(0);
    if d < rmax.max(1) {
        return Err(Error::Precondition(format!("order {d} is below the minimal order {}", rmax.max(1))));
    }
    let n = base.nvars();
    let mut sdr = SdrRepresentation {
        d,
        form,
        base_set: base,
        moment_basis: monomial_basis(n, 2 * d),
        projection: (1..=n).collect(),
        blocks: Vec::new(),
    };
    let program = sdr.program(Polynomial::zero(n))?;
    sdr.blocks = program
        .psd_blocks()
        .iter()
        .enumerate()
        .map(|(b, block)| LmiBlockData {
            constraint: b.checked_sub(1),
            dim: block.dim(),
            cells: block.cells().into_iter().map(|(row, col, terms): CellTerms| LmiCell { row, col, terms }).collect(),
        })
        .collect();
    debug_assert_eq!(sdr.moment_basis.len(), basis_size(n, 2 * d));
    Ok(sdr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportResult {
    pub value: f64,
    pub point: Vec<f64>,
    pub status: MomentStatus,
}

/// `min c^T x` over the projection of the lift.
pub fn sdr_support(sdr: &SdrRepresentation, c: &[f64], options: &SdpOptions) -> Result<SupportResult> {
    let n = sdr.base_set.nvars();
    if c.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: c.len() });
    }
    let mut obj = Polynomial::zero(n);
    for (i, &ci) in c.iter().enumerate() {
        obj.add_term(Monomial::var(n, i), ci);
    }
    let sol = sdr.program(obj)?.compile()?.solve(options)?;
    let point = match &sol.moments {
        Some(y) => y.mean_point()?,
        None => Vec::new(),
    };
    Ok(SupportResult { value: sol.value, point, status: sol.status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn poly(n: usize, terms: &[(&[u32], f64)]) -> Polynomial {
        Polynomial::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap()
    }

    fn disk() -> SemialgebraicSet {
        SemialgebraicSet::new(2, vec![poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], -1.0)])], None).unwrap()
    }

    #[test]
    fn disk_uses_shortcut_only() {
        let cert = certify_convexity(&disk(), &CertifyOptions::default()).unwrap();
        assert_eq!(cert.status, CertStatus::CertifiedNumerically);
        let r = &cert.records[0];
        assert_eq!(r.method, CertMethod::QuadraticConcaveShortcut);
        assert!(r.attempts.is_empty());
        assert!(r.weights.as_ref().unwrap().residual < 1e-14);
        assert!(!cert.degenerate);
        assert!(cert.slater.found);
    }

    #[test]
    fn disk_probe_gradient() {
        let p = nondegeneracy_probe(&disk(), 50, 1).unwrap();
        assert_eq!(p[0].samples, 50);
        assert_abs_diff_eq!(p[0].min_gradient_norm.unwrap(), 2.0, epsilon = 1e-6);
        assert!(nondegeneracy_probe(&disk(), 0, 1).is_err());
    }

    #[test]
    fn rho_program_shape() {
        let g1 = poly(2, &[(&[1, 1], 1.0), (&[0, 0], -0.25)]);
        let set = SemialgebraicSet::new(2, vec![g1, disk().constraints()[0].clone()], None).unwrap();
        let p = rho_program(&set, 0, 3).unwrap();
        assert_eq!(p.nvars(), 4);
        let dims: Vec<usize> = p.psd_blocks().iter().map(|b| b.dim()).collect();
        assert_eq!(dims, vec![35, 15, 15, 15]);
        assert_eq!(p.zero_blocks()[0].dim(), 15);
        assert!(rho_program(&set, 2, 3).is_err());
        assert!(rho_program(&set, 0, 0).is_err());
    }

    #[test]
    fn disk_sdr_support() {
        let sdr = build_sdr(&disk(), SdrSource::Override { order: 1, form: SdrForm::Putinar }).unwrap();
        assert_eq!(sdr.lift_dim(), 6);
        assert_eq!(sdr.blocks[0].dim, 3);
        let s = sdr_support(&sdr, &[1.0, 0.0], &SdpOptions::default()).unwrap();
        assert_abs_diff_eq!(s.value, -1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s.point[0], -1.0, epsilon = 1e-4);
        let z = sdr_support(&sdr, &[0.0, 0.0], &SdpOptions::default()).unwrap();
        assert_abs_diff_eq!(z.value, 0.0, epsilon = 1e-9);
        let json = serde_json::to_string(&sdr).unwrap();
        let back: SdrRepresentation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sdr);
    }

    #[test]
    fn refuses_uncertified() {
        let mut cert = certify_convexity(&disk(), &CertifyOptions::default()).unwrap();
        cert.status = CertStatus::Inconclusive;
        assert!(build_sdr(&disk(), SdrSource::Certificate(&cert)).is_err());
    }
}
