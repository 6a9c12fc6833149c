//! The moment-SOS hierarchy `Q_r`, the simplified relaxation `Q^`, and
//! exactness detection.

use serde::{Deserialize, Serialize};

use crate::lmi::{CompiledProgram, MomentProgram, MomentSolution, MomentStatus};
use crate::moment::{FlatnessReport, MomentSource, MomentVector, DEFAULT_RANK_TAU};
use crate::polyalg::{Polynomial, SemialgebraicSet};
use crate::sampling::{self, SampleBox};
use crate::sdp::{numeric_rank, SdpOptions};
use crate::sos::{is_sos_convex_with, SosWitness};
use crate::{Error, Result};

/// `min f(x)` over `x` in `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyOptProblem {
    objective: Polynomial,
    feasible_set: SemialgebraicSet,
}

impl PolyOptProblem {
    pub fn new(objective: Polynomial, feasible_set: SemialgebraicSet) -> Result<Self> {
        if objective.nvars() != feasible_set.nvars() {
            return Err(Error::DimensionMismatch { expected: feasible_set.nvars(), got: objective.nvars() });
        }
        Ok(PolyOptProblem { objective, feasible_set })
    }

    pub fn objective(&self) -> &Polynomial {
        &self.objective
    }

    pub fn feasible_set(&self) -> &SemialgebraicSet {
        &self.feasible_set
    }

    pub fn nvars(&self) -> usize {
        self.objective.nvars()
    }

    /// Smallest `r` with `2r >= deg f` and `r >= r_j` for every `j`.
    pub fn min_order(&self) -> usize {
        let rf = self.objective.degree().div_ceil(2);
        let rg = self.feasible_set.half_degrees().into_iter().max().unwrap_or(0);
        rf.max(rg).max(1)
    }

    fn with_set(&self, set: SemialgebraicSet) -> Self {
        PolyOptProblem { objective: self.objective.clone(), feasible_set: set }
    }
}

/// Appends `M^2 - |X|^2 >= 0`.
pub fn ball_augment(set: &SemialgebraicSet, m: f64) -> Result<SemialgebraicSet> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {m}")));
    }
    let n = set.nvars();
    let mut ball = Polynomial::constant(n, m * m);
    for i in 0..n {
        let xi = Polynomial::var(n, i);
        ball = &ball - &(&xi * &xi);
    }
    let mut constraints = set.constraints().to_vec();
    constraints.push(ball);
    SemialgebraicSet::new(n, constraints, set.ball_bound())
}

/// `Q_r`: `M_r(y) >= 0` and `M_(r - r_j)(g_j y) >= 0`.
pub fn qr_program(problem: &PolyOptProblem, r: usize) -> Result<MomentProgram> {
    let need = problem.min_order();
    if r < need {
        return Err(Error::Precondition(format!("order {r} is below the minimal order {need}")));
    }
    let n = problem.nvars();
    let mut p = MomentProgram::new(r, problem.objective.clone())?;
    p.add_psd(Polynomial::constant(n, 1.0), r)?;
    for (g, rj) in problem.feasible_set.constraints().iter().zip(problem.feasible_set.half_degrees()) {
        p.add_psd(g.clone(), r - rj)?;
    }
    Ok(p)
}

pub fn build_qr(problem: &PolyOptProblem, r: usize) -> Result<CompiledProgram> {
    qr_program(problem, r)?.compile()
}

/// `Q^`: `M_d(y) >= 0` with scalar rows `L_y(g_j) >= 0`.
pub fn qhat_program(problem: &PolyOptProblem) -> Result<MomentProgram> {
    let d = problem.min_order();
    let n = problem.nvars();
    let mut p = MomentProgram::new(d, problem.objective.clone())?;
    p.add_psd(Polynomial::constant(n, 1.0), d)?;
    for g in problem.feasible_set.constraints() {
        p.add_psd(g.clone(), 0)?;
    }
    Ok(p)
}

pub fn build_qhat(problem: &PolyOptProblem) -> Result<CompiledProgram> {
    qhat_program(problem)?.compile()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateForm {
    /// SOS weights on every constraint.
    Putinar,
    /// Nonnegative scalar weights on the constraints.
    Scalar,
}

/// `f - lambda_star = sigma_0 + sum_j sigma_j g_j` up to `residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PutinarCertificate {
    pub lambda_star: f64,
    pub form: CertificateForm,
    /// `sigma_0, ..., sigma_m`.
    pub sigmas: Vec<SosWitness>,
    /// The scalars `lambda_j` for the scalar form.
    pub multipliers: Option<Vec<f64>>,
    pub residual: f64,
}

/// Reconstruction tolerance for accepted certificates.
pub fn certificate_tolerance(f: &Polynomial) -> f64 {
    1e-6 * (1.0 + f.l1_norm())
}

pub fn recover_dual_certificate(
    problem: &PolyOptProblem,
    compiled: &CompiledProgram,
    solution: &MomentSolution,
) -> Result<PutinarCertificate> {
    if solution.status != MomentStatus::Optimal {
        return Err(Error::Precondition(format!("solution status is {}", solution.status)));
    }
    let side = compiled.sos_side(solution)?;
    let bound = certificate_tolerance(&problem.objective);
    if side.residual > bound {
        return Err(Error::CertificateRejected { residual: side.residual, bound });
    }
    let form = if is_qhat(compiled) && !problem.feasible_set.constraints().is_empty() {
        CertificateForm::Scalar
    } else {
        CertificateForm::Putinar
    };
    let multipliers = match form {
        CertificateForm::Scalar => Some(side.sigmas.iter().skip(1).map(|w| w.gram[(0, 0)]).collect()),
        CertificateForm::Putinar => None,
    };
    Ok(PutinarCertificate { lambda_star: side.lambda, form, sigmas: side.sigmas, multipliers, residual: side.residual })
}

// Q^ is the program whose constraint blocks are all scalar rows.
fn is_qhat(compiled: &CompiledProgram) -> bool {
    compiled.program().psd_blocks().iter().skip(1).all(|b| b.half_degree == 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangianReport {
    pub lagrangian: Polynomial,
    /// `|grad L_f(x*)|` at the candidate, when one was given.
    pub gradient_norm: Option<f64>,
    /// `lambda_j g_j(x*)` at the candidate.
    pub complementarity: Option<Vec<f64>>,
}

/// `L_f = f - f* - sum_j lambda_j g_j`.
pub fn lagrangian(
    f: &Polynomial,
    lambda: &[f64],
    fstar: f64,
    set: &SemialgebraicSet,
    candidate: Option<&[f64]>,
) -> Result<LagrangianReport> {
    if lambda.len() != set.num_constraints() {
        return Err(Error::DimensionMismatch { expected: set.num_constraints(), got: lambda.len() });
    }
    if let Some(l) = lambda.iter().find(|&&l| !(l >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative multiplier {l}")));
    }
    let mut lf = f - &Polynomial::constant(f.nvars(), fstar);
    for (g, &l) in set.constraints().iter().zip(lambda) {
        lf = &lf - &g.scale(l);
    }
    let (gradient_norm, complementarity) = match candidate {
        Some(x) => {
            let mut s = 0.0;
            for d in lf.gradient() {
                let v = d.eval(x)?;
                s += v * v;
            }
            let comp =
                set.constraints().iter().zip(lambda).map(|(g, &l)| Ok(l * g.eval(x)?)).collect::<Result<Vec<f64>>>()?;
            (Some(s.sqrt()), Some(comp))
        }
        None => (None, None),
    };
    Ok(LagrangianReport { lagrangian: lf, gradient_norm, complementarity })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    FlatRank,
    ConvexMeanPoint,
    SosConvexSingleShot,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationKind {
    Qhat,
    Qr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationResult {
    pub kind: RelaxationKind,
    pub order: usize,
    pub status: MomentStatus,
    /// Raw optimal value of the relaxation.
    pub lower_bound: f64,
    /// Running maximum of the `Q_r` bounds up to this order.
    pub monotone_bound: f64,
    pub moments: Option<MomentVector>,
    pub dual_certificate: Option<PutinarCertificate>,
    pub certificate_error: Option<String>,
    pub flatness: Option<FlatnessReport>,
    pub exactness: Exactness,
    pub minimizer: Option<Vec<f64>>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ArchimedeanEvidence {
    /// A ball constraint `M^2 - |X|^2 >= 0` was appended.
    BallBound(f64),
    /// Constraint `j` already confines `K` to an ellipsoid.
    EllipsoidConstraint(usize),
    Waived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyOptions {
    pub r_max: usize,
    pub tau: f64,
    /// Tolerance for the mean-point and feasibility tests.
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
    pub waive_archimedean: bool,
    pub sdp: SdpOptions,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        HierarchyOptions {
            r_max: 5,
            tau: DEFAULT_RANK_TAU,
            tol: 1e-6,
            samples: 500,
            seed: sampling::DEFAULT_SEED,
            waive_archimedean: false,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityEvidence {
    /// Always `sampled`: the checks are evidence, not proofs.
    pub provenance: String,
    pub objective_convex: bool,
    pub constraints_concave: Vec<bool>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictConvexityProbe {
    /// Smallest Hessian eigenvalue of `f` over the sampled points of `K`.
    pub delta: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub archimedean: ArchimedeanEvidence,
    pub sos_convex: bool,
    /// Whether the `sigma_0` of the `Q^` certificate is itself SOS-convex.
    pub qhat_sigma0_sos_convex: Option<bool>,
    pub convexity: ConvexityEvidence,
    pub strict_convexity: Option<StrictConvexityProbe>,
    pub results: Vec<RelaxationResult>,
}

impl HierarchyReport {
    /// The first result whose exactness test fired.
    pub fn exact(&self) -> Option<&RelaxationResult> {
        self.results.iter().find(|r| r.exactness != Exactness::None)
    }

    /// Best certified lower bound over all orders.
    pub fn best_bound(&self) -> Option<f64> {
        self.results.iter().filter(|r| r.status == MomentStatus::Optimal).map(|r| r.lower_bound).reduce(f64::max)
    }
}

fn archimedean(set: &SemialgebraicSet, waive: bool) -> Result<(SemialgebraicSet, ArchimedeanEvidence)> {
    if let Some(m) = set.ball_bound() {
        return Ok((ball_augment(set, m)?, ArchimedeanEvidence::BallBound(m)));
    }
    for (j, g) in set.constraints().iter().enumerate() {
        let single = SemialgebraicSet::new(set.nvars(), vec![g.clone()], None)?;
        if single.bounding_box().is_some() {
            return Ok((set.clone(), ArchimedeanEvidence::EllipsoidConstraint(j)));
        }
    }
    if waive {
        return Ok((set.clone(), ArchimedeanEvidence::Waived));
    }
    Err(Error::Precondition(
        "no ball bound and no ellipsoidal constraint; supply ball_bound or waive the Archimedean check".into(),
    ))
}

fn sample_box(set: &SemialgebraicSet) -> SampleBox {
    sampling::box_for(set)
}

/// Solves `Q^`, then `Q_r` for increasing `r`, stopping once an exactness
/// test fires.
pub fn solve_hierarchy(problem: &PolyOptProblem, options: &HierarchyOptions) -> Result<HierarchyReport> {
    let (set, archimedean) = archimedean(&problem.feasible_set, options.waive_archimedean)?;
    let problem = problem.with_set(set);
    let r_min = problem.min_order();
    if options.r_max < r_min {
        return Err(Error::Precondition(format!("r_max = {} is below the minimal order {r_min}", options.r_max)));
    }
    let f = &problem.objective;
    let set = &problem.feasible_set;

    let mut rng = sampling::rng(options.seed);
    let bx = sample_box(set);
    let box_points: Vec<Vec<f64>> = (0..options.samples).map(|_| sampling::uniform_in_box(&mut rng, &bx)).collect();
    let convexity = ConvexityEvidence {
        provenance: "sampled".into(),
        objective_convex: sampling::sampled_convex(f, &box_points)?,
        constraints_concave: set
            .constraints()
            .iter()
            .map(|g| sampling::sampled_convex(&-g, &box_points))
            .collect::<Result<_>>()?,
        points: box_points.len(),
    };
    let k_points = sampling::sample_set(&mut rng, set, &bx, options.samples, 200 * options.samples.max(1));
    let strict_convexity = if k_points.is_empty() || f.degree() < 2 {
        None
    } else {
        Some(StrictConvexityProbe { delta: sampling::min_hessian_eigenvalue(f, &k_points)?, points: k_points.len() })
    };

    let mut sos_convex = is_sos_convex_with(f, &options.sdp)?.is_sos_convex();
    for g in set.constraints() {
        if !sos_convex {
            break;
        }
        sos_convex = is_sos_convex_with(&-g, &options.sdp)?.is_sos_convex();
    }

    let mut results = Vec::new();
    let qhat = build_qhat(&problem)?;
    let sol = qhat.solve(&options.sdp)?;
    let mut first = base_result(&problem, &qhat, &sol, RelaxationKind::Qhat, r_min);
    let mut qhat_sigma0_sos_convex = None;
    if let Some(cert) = &first.dual_certificate {
        let s0 = cert.sigmas[0].polynomial(problem.nvars());
        qhat_sigma0_sos_convex = Some(s0.degree() <= 1 || is_sos_convex_with(&s0, &options.sdp)?.is_sos_convex());
    }
    first.monotone_bound = first.lower_bound;
    if sos_convex && sol.status == MomentStatus::Optimal {
        if let Some(y) = &first.moments {
            first.minimizer = Some(y.mean_point()?);
            first.exactness = Exactness::SosConvexSingleShot;
        }
    }
    let single_shot = first.exactness == Exactness::SosConvexSingleShot;
    let qhat_infeasible = first.status == MomentStatus::Infeasible;
    results.push(first);

    if !single_shot && !qhat_infeasible {
        let mut running = f64::NEG_INFINITY;
        for r in r_min..=options.r_max {
            let compiled = build_qr(&problem, r)?;
            let sol = compiled.solve(&options.sdp)?;
            let mut res = base_result(&problem, &compiled, &sol, RelaxationKind::Qr, r);
            if res.status == MomentStatus::Optimal {
                running = running.max(res.lower_bound);
            }
            res.monotone_bound = running;
            if res.status == MomentStatus::Optimal {
                detect_exactness(&problem, &convexity, options, &mut res)?;
            }
            let stop = res.exactness != Exactness::None || res.status == MomentStatus::Infeasible;
            results.push(res);
            if stop {
                break;
            }
        }
    }

    Ok(HierarchyReport { archimedean, sos_convex, qhat_sigma0_sos_convex, convexity, strict_convexity, results })
}

fn base_result(
    problem: &PolyOptProblem,
    compiled: &CompiledProgram,
    sol: &MomentSolution,
    kind: RelaxationKind,
    order: usize,
) -> RelaxationResult {
    let (dual_certificate, certificate_error) = if sol.status == MomentStatus::Optimal {
        match recover_dual_certificate(problem, compiled, sol) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    RelaxationResult {
        kind,
        order,
        status: sol.status,
        lower_bound: sol.value,
        monotone_bound: sol.value,
        moments: if sol.status == MomentStatus::Optimal { sol.moments.clone() } else { None },
        dual_certificate,
        certificate_error,
        flatness: None,
        exactness: Exactness::None,
        minimizer: None,
        iterations: sol.sdp.as_ref().map_or(0, |s| s.iterations),
    }
}

fn detect_exactness(
    problem: &PolyOptProblem,
    convexity: &ConvexityEvidence,
    options: &HierarchyOptions,
    res: &mut RelaxationResult,
) -> Result<()> {
    let Some(y) = res.moments.clone() else { return Ok(()) };
    let f = &problem.objective;
    let set = &problem.feasible_set;
    let mean = y.mean_point()?;
    let tol = options.tol * (1.0 + res.lower_bound.abs());
    let mean_ok = set.contains(&mean, options.tol) && f.eval(&mean)? <= res.lower_bound + tol;

    let v = set.half_degrees().into_iter().max().unwrap_or(1).max(1);
    if res.order >= v {
        let flat = flat_extension(&y, res.order, v, options.tau)?;
        let accepted = flat.flat && (flat.rank_d == 1 || mean_ok);
        res.flatness = Some(flat);
        if accepted {
            res.exactness = Exactness::FlatRank;
            res.minimizer = Some(mean);
            return Ok(());
        }
    }
    let convex = convexity.objective_convex && convexity.constraints_concave.iter().all(|&c| c);
    if convex && mean_ok {
        res.exactness = Exactness::ConvexMeanPoint;
        res.minimizer = Some(mean);
    }
    Ok(())
}

/// `rank M_d(y) == rank M_(d - v)(y)`, the flat-extension test.
pub fn flat_extension(y: &MomentVector, d: usize, v: usize, tau: f64) -> Result<FlatnessReport> {
    if v == 1 {
        return y.flatness(d, tau, MomentSource::InteriorPoint);
    }
    let md = y.moment_matrix(d)?;
    let small = y.moment_matrix(d - v)?;
    let rank_d = numeric_rank(&md, tau)?;
    let rank_dm1 = numeric_rank(&small, tau)?;
    Ok(FlatnessReport { d, rank_d, rank_dm1, flat: rank_d == rank_dm1, interior_point_caveat: true })
}
