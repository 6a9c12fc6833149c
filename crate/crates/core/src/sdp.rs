//! Dense primal-dual interior-point solver for block-diagonal SDPs.
//!
//! Primal:  minimize <C, X>  s.t.  <A_k, X> = b_k,  X >= 0 (blockwise)
//! Dual:    maximize b^T y   s.t.  C - sum_k y_k A_k = Z >= 0
//!
//! Infeasible-start path following with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector. Every moment relaxation in the crate is
//! posed on the dual side (moments are `y`), so the primal blocks `X` are
//! the Gram matrices of the SOS multipliers.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Blockwise symmetric matrix.
pub type BlockMatrix = Vec<DMatrix<f64>>;

#[derive(Clone, Debug, PartialEq)]
pub struct SdpConstraint {
    pub blocks: BlockMatrix,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    block_dims: Vec<usize>,
    objective: BlockMatrix,
    constraints: Vec<SdpConstraint>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, objective: BlockMatrix, constraints: Vec<SdpConstraint>) -> Result<Self> {
        check_blocks(&block_dims, &objective)?;
        for c in &constraints {
            check_blocks(&block_dims, &c.blocks)?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidArgument("non-finite right-hand side".into()));
            }
        }
        Ok(SdpProblem { block_dims, objective, constraints })
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn objective(&self) -> &BlockMatrix {
        &self.objective
    }

    pub fn constraints(&self) -> &[SdpConstraint] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Sparse SDPA text format (the `.dat-s` flavour).
    ///
    /// SDPA maximizes `<F0, Y>` subject to `<F_k, Y> = c_k`, so `F0 = -C`,
    /// `F_k = A_k` and `c = b`. Entry lines read `matrix block row col value`
    /// over the upper triangle, one-based.
    pub fn to_sdpa(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "\"exported block SDP, min <C,X> s.t. <A_k,X> = b_k\"");
        let _ = writeln!(out, "{}", self.constraints.len());
        let _ = writeln!(out, "{}", self.block_dims.len());
        let dims: Vec<String> = self.block_dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "{}", dims.join(" "));
        let rhs: Vec<String> = self.constraints.iter().map(|c| format!("{:e}", c.rhs + 0.0)).collect();
        let _ = writeln!(out, "{}", rhs.join(" "));
        let mut emit = |k: usize, blocks: &BlockMatrix, sign: f64| {
            for (b, m) in blocks.iter().enumerate() {
                for i in 0..m.nrows() {
                    for j in i..m.ncols() {
                        let v = m[(i, j)];
                        if v != 0.0 {
                            let _ = writeln!(out, "{} {} {} {} {:e}", k, b + 1, i + 1, j + 1, sign * v + 0.0);
                        }
                    }
                }
            }
        };
        emit(0, &self.objective, -1.0);
        for (k, c) in self.constraints.iter().enumerate() {
            emit(k + 1, &c.blocks, 1.0);
        }
        out
    }
}

fn check_blocks(dims: &[usize], blocks: &BlockMatrix) -> Result<()> {
    if blocks.len() != dims.len() {
        return Err(Error::DimensionMismatch { expected: dims.len(), got: blocks.len() });
    }
    for (m, &d) in blocks.iter().zip(dims) {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.nrows().max(m.ncols()) });
        }
        let asym = max_asymmetry(m);
        if asym > SYMMETRY_TOL * (1.0 + m.amax()) {
            return Err(Error::NotSymmetric(asym));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
    }
    Ok(())
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    /// Primal infeasible; the dual is unbounded along `certificate`.
    Infeasible,
    /// Primal unbounded, i.e. the dual (moment side) is infeasible.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

impl fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::Unbounded => "unbounded",
            SdpStatus::MaxIterations => "max_iterations",
            SdpStatus::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

/// Ray proving infeasibility of one side.
#[derive(Clone, Debug, PartialEq)]
pub enum InfeasibilityCertificate {
    /// `y` with `b^T y = 1` and `-sum_k y_k A_k >= 0` (approximately).
    DualRay(DVector<f64>),
    /// `X >= 0` with `<C, X> = -1` and `A(X) = 0` (approximately).
    PrimalRay(BlockMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpOptions {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub tol_infeas: f64,
    pub max_iter: usize,
    pub max_block: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { tol_feas: 1e-8, tol_gap: 1e-8, tol_infeas: 1e-8, max_iter: 200, max_block: 512 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub primal: BlockMatrix,
    pub dual: DVector<f64>,
    pub slack: BlockMatrix,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `|primal_value - dual_value| / (1 + |primal_value|)`.
    pub gap: f64,
    /// `||A(X) - b|| / (1 + ||b||)`.
    pub primal_residual: f64,
    /// `||C - A^T y - Z||_F / (1 + ||C||_F)`.
    pub dual_residual: f64,
    /// `<X, Z> / (1 + |primal_value|)`.
    pub complementarity: f64,
    pub iterations: usize,
    pub certificate: Option<InfeasibilityCertificate>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// Largest of the three KKT measures.
    pub fn kkt_error(&self) -> f64 {
        self.primal_residual.max(self.dual_residual).max(self.gap).max(self.complementarity)
    }
}

fn inner(a: &BlockMatrix, b: &BlockMatrix) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn block_norm(a: &BlockMatrix) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

fn add_scaled(acc: &mut DMatrix<f64>, s: f64, m: &DMatrix<f64>) {
    acc.zip_apply(m, |a, b| *a += s * b);
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

// Scaled working copy of the problem.
struct Scaled {
    dims: Vec<usize>,
    a: Vec<BlockMatrix>,
    b: DVector<f64>,
    c: BlockMatrix,
    row_scale: Vec<f64>,
    b_scale: f64,
    c_scale: f64,
}

impl Scaled {
    fn new(p: &SdpProblem) -> Self {
        let mut a = Vec::with_capacity(p.constraints.len());
        let mut b = DVector::zeros(p.constraints.len());
        let mut row_scale = Vec::with_capacity(p.constraints.len());
        for (k, con) in p.constraints.iter().enumerate() {
            let nrm = block_norm(&con.blocks);
            let s = if nrm > 0.0 { nrm } else { 1.0 };
            a.push(con.blocks.iter().map(|m| m / s).collect::<BlockMatrix>());
            b[k] = con.rhs / s;
            row_scale.push(s);
        }
        let b_scale = b.norm().max(1.0);
        b /= b_scale;
        let c_scale = block_norm(&p.objective).max(1.0);
        let c = p.objective.iter().map(|m| m / c_scale).collect();
        Scaled { dims: p.block_dims.clone(), a, b, c, row_scale, b_scale, c_scale }
    }

    fn op_a(&self, x: &BlockMatrix) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|ak| inner(ak, x)))
    }

    fn op_at(&self, y: &DVector<f64>) -> BlockMatrix {
        let mut out: BlockMatrix = self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (k, ak) in self.a.iter().enumerate() {
            let yk = y[k];
            if yk == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(ak) {
                add_scaled(o, yk, m);
            }
        }
        out
    }

    fn unscale_x(&self, x: &BlockMatrix) -> BlockMatrix {
        x.iter().map(|m| m * self.b_scale).collect()
    }

    fn unscale_y(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(y.len(), y.iter().zip(&self.row_scale).map(|(v, s)| v * self.c_scale / s))
    }

    fn unscale_z(&self, z: &BlockMatrix) -> BlockMatrix {
        z.iter().map(|m| m * self.c_scale).collect()
    }
}

// Nesterov-Todd scaling of one block: G^T Z G = D = G^{-1} X G^{-T}.
struct NtBlock {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
}

fn nt_block(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<NtBlock> {
    let lx = Cholesky::new(x.clone())?.unpack();
    let lz = Cholesky::new(z.clone())?.unpack();
    let prod = lz.transpose() * &lx;
    let svd = prod.svd(false, true);
    let v_t = svd.v_t?;
    let s = svd.singular_values;
    if s.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let inv_sqrt = DVector::from_iterator(s.len(), s.iter().map(|v| 1.0 / v.sqrt()));
    let sqrt = DVector::from_iterator(s.len(), s.iter().map(|v| v.sqrt()));
    let v = v_t.transpose();
    let g = &lx * &v * DMatrix::from_diagonal(&inv_sqrt);
    // G^{-1} = S^{1/2} V^T Lx^{-1}
    let lx_inv = lx.solve_lower_triangular(&DMatrix::identity(x.nrows(), x.nrows()))?;
    let g_inv = DMatrix::from_diagonal(&sqrt) * &v_t * lx_inv;
    let w = &g * g.transpose();
    Some(NtBlock { g, g_inv, w, d: s })
}

/// Largest `alpha` with `x + alpha * dx` PSD (capped at `f64::MAX`).
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let l = Cholesky::new(x.clone())?.unpack();
    let t = l.solve_lower_triangular(dx)?;
    let mut t = l.solve_lower_triangular(&t.transpose())?;
    symmetrize(&mut t);
    let lmin = SymmetricEigen::new(t).eigenvalues.min();
    Some(if lmin >= 0.0 { f64::MAX } else { -1.0 / lmin })
}

fn block_max_step(x: &BlockMatrix, dx: &BlockMatrix) -> Option<f64> {
    let mut a = f64::MAX;
    for (xb, db) in x.iter().zip(dx) {
        a = a.min(max_step(xb, db)?);
    }
    Some(a)
}

enum SchurFactor {
    Chol(Cholesky<f64, Dyn>),
    Lu(nalgebra::LU<f64, Dyn, Dyn>),
}

impl SchurFactor {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            SchurFactor::Chol(c) => Some(c.solve(rhs)),
            SchurFactor::Lu(lu) => lu.solve(rhs),
        }
    }
}

fn factor_schur(mut m: DMatrix<f64>) -> Option<SchurFactor> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(SchurFactor::Chol(c));
    }
    let scale = m.diagonal().amax().max(1e-300);
    for k in 0..m.nrows() {
        m[(k, k)] += 1e-13 * scale;
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(SchurFactor::Chol(c));
    }
    let lu = m.lu();
    if lu.is_invertible() {
        Some(SchurFactor::Lu(lu))
    } else {
        None
    }
}

struct Metrics {
    pv: f64,
    dv: f64,
    pres: f64,
    dres: f64,
    gap: f64,
    compl: f64,
}

impl Metrics {
    fn worst(&self) -> f64 {
        self.pres.max(self.dres).max(self.gap).max(self.compl)
    }
}

fn best_or<'a>(best: &'a Option<(f64, Iterate)>, it: &'a Iterate) -> &'a Iterate {
    best.as_ref().map(|(_, b)| b).unwrap_or(it)
}

#[derive(Clone)]
struct Iterate {
    x: BlockMatrix,
    y: DVector<f64>,
    z: BlockMatrix,
}

/// Solves `problem` to the tolerances in `options`.
///
/// Infeasibility and unboundedness are reported through the status, never as
/// an `Err`; `Err` is reserved for malformed input.
pub fn solve(problem: &SdpProblem, options: &SdpOptions) -> Result<SdpSolution> {
    if let Some(&big) = problem.block_dims.iter().find(|&&d| d > options.max_block) {
        return Err(Error::InvalidArgument(format!(
            "block of size {big} exceeds the configured cap {}",
            options.max_block
        )));
    }
    let sc = Scaled::new(problem);
    let m = sc.a.len();
    let total_dim: usize = sc.dims.iter().sum();
    let b_norm_orig = problem.constraints.iter().map(|c| c.rhs * c.rhs).sum::<f64>().sqrt();
    let c_norm_orig = block_norm(&problem.objective);

    let mut it = initial_point(&sc);

    let metrics = |it: &Iterate| -> Metrics {
        let x = sc.unscale_x(&it.x);
        let y = sc.unscale_y(&it.y);
        let z = sc.unscale_z(&it.z);
        let pv = inner(&problem.objective, &x);
        let dv: f64 = problem.constraints.iter().zip(y.iter()).map(|(c, v)| c.rhs * v).sum();
        let mut rp = 0.0;
        for c in problem.constraints.iter() {
            let r = inner(&c.blocks, &x) - c.rhs;
            rp += r * r;
        }
        let mut rd = 0.0;
        for (bi, cb) in problem.objective.iter().enumerate() {
            let mut r = cb - &z[bi];
            for (k, c) in problem.constraints.iter().enumerate() {
                add_scaled(&mut r, -y[k], &c.blocks[bi]);
            }
            rd += r.norm_squared();
        }
        Metrics {
            pv,
            dv,
            pres: rp.sqrt() / (1.0 + b_norm_orig),
            dres: rd.sqrt() / (1.0 + c_norm_orig),
            gap: (pv - dv).abs() / (1.0 + pv.abs()),
            compl: inner(&x, &z).abs() / (1.0 + pv.abs()),
        }
    };

    let finish = |it: &Iterate, status: SdpStatus, iters: usize, cert: Option<InfeasibilityCertificate>| {
        let mt = metrics(it);
        SdpSolution {
            status,
            primal: sc.unscale_x(&it.x),
            dual: sc.unscale_y(&it.y),
            slack: sc.unscale_z(&it.z),
            primal_value: mt.pv,
            dual_value: mt.dv,
            gap: mt.gap,
            primal_residual: mt.pres,
            dual_residual: mt.dres,
            complementarity: mt.compl,
            iterations: iters,
            certificate: cert,
        }
    };

    let mut stall = 0usize;
    let mut best: Option<(f64, Iterate)> = None;
    for iter in 0..options.max_iter {
        let mt = metrics(&it);
        if best.as_ref().is_none_or(|(w, _)| mt.worst() < *w) {
            best = Some((mt.worst(), it.clone()));
        }
        if mt.pres <= options.tol_feas
            && mt.dres <= options.tol_feas
            && mt.gap <= options.tol_gap
            && mt.compl <= options.tol_gap
        {
            return Ok(finish(&it, SdpStatus::Optimal, iter, None));
        }

        // Infeasibility rays, measured in the scaled problem.
        let by = sc.b.dot(&it.y);
        if by > 0.0 {
            let aty = sc.op_at(&it.y);
            let ray: BlockMatrix = aty.iter().zip(&it.z).map(|(a, z)| a + z).collect();
            if block_norm(&ray) / by < options.tol_infeas {
                let y = sc.unscale_y(&it.y);
                let dv: f64 = problem.constraints.iter().zip(y.iter()).map(|(c, v)| c.rhs * v).sum();
                let cert = InfeasibilityCertificate::DualRay(y / dv);
                return Ok(finish(&it, SdpStatus::Infeasible, iter, Some(cert)));
            }
        }
        let cx = inner(&sc.c, &it.x);
        if cx < 0.0 && sc.op_a(&it.x).norm() / (-cx) < options.tol_infeas {
            let x = sc.unscale_x(&it.x);
            let pv = inner(&problem.objective, &x);
            let cert = InfeasibilityCertificate::PrimalRay(x.iter().map(|m| m / (-pv)).collect());
            return Ok(finish(&it, SdpStatus::Unbounded, iter, Some(cert)));
        }

        let mu = inner(&it.x, &it.z) / total_dim as f64;
        let rp = &sc.b - sc.op_a(&it.x);
        let aty = sc.op_at(&it.y);
        let rd: BlockMatrix = sc.c.iter().zip(&aty).zip(&it.z).map(|((c, a), z)| c - a - z).collect();

        let nt: Option<Vec<NtBlock>> = it.x.iter().zip(&it.z).map(|(x, z)| nt_block(x, z)).collect();
        let Some(nt) = nt else {
            return Ok(finish(best_or(&best, &it), SdpStatus::NumericalFailure, iter, None));
        };

        // Schur complement M_ik = <A_i, W A_k W>.
        let wak: Vec<BlockMatrix> =
            sc.a.iter().map(|ak| ak.iter().zip(&nt).map(|(a, s)| &s.w * a * &s.w).collect()).collect();
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for k in i..m {
                let v = inner(&sc.a[i], &wak[k]);
                schur[(i, k)] = v;
                schur[(k, i)] = v;
            }
        }
        let Some(factor) = factor_schur(schur) else {
            return Ok(finish(best_or(&best, &it), SdpStatus::NumericalFailure, iter, None));
        };

        let w_rd_w: BlockMatrix = rd.iter().zip(&nt).map(|(r, s)| &s.w * r * &s.w).collect();
        let a_wrdw = sc.op_a(&w_rd_w);
        let solve_dir = |r: &BlockMatrix| -> Option<(BlockMatrix, DVector<f64>, BlockMatrix)> {
            let rhs = &rp - sc.op_a(r) + &a_wrdw;
            let dy = factor.solve(&rhs)?;
            let atdy = sc.op_at(&dy);
            let dz: BlockMatrix = rd.iter().zip(&atdy).map(|(r, a)| r - a).collect();
            let dx: BlockMatrix = r
                .iter()
                .zip(&dz)
                .zip(&nt)
                .map(|((r, dz), s)| {
                    let mut v = r - &s.w * dz * &s.w;
                    symmetrize(&mut v);
                    v
                })
                .collect();
            Some((dx, dy, dz))
        };

        // Predictor: dX + W dZ W = -X.
        let r_aff: BlockMatrix = it.x.iter().map(|x| -x).collect();
        let Some((dx_a, _dy_a, dz_a)) = solve_dir(&r_aff) else {
            return Ok(finish(best_or(&best, &it), SdpStatus::NumericalFailure, iter, None));
        };
        let (Some(ap_a), Some(ad_a)) = (block_max_step(&it.x, &dx_a), block_max_step(&it.z, &dz_a)) else {
            return Ok(finish(best_or(&best, &it), SdpStatus::NumericalFailure, iter, None));
        };
        let ap_a = ap_a.min(1.0);
        let ad_a = ad_a.min(1.0);
        let mut mu_aff = 0.0;
        for b in 0..it.x.len() {
            let xa = &it.x[b] + &dx_a[b] * ap_a;
            let za = &it.z[b] + &dz_a[b] * ad_a;
            mu_aff += xa.dot(&za);
        }
        mu_aff /= total_dim as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector in the NT-scaled space, where X and Z are both diag(d).
        let r_corr: BlockMatrix = nt
            .iter()
            .zip(dx_a.iter().zip(&dz_a))
            .map(|(s, (dxa, dza))| {
                let dxs = &s.g_inv * dxa * s.g_inv.transpose();
                let dzs = s.g.transpose() * dza * &s.g;
                let prod = &dxs * &dzs;
                let n = s.d.len();
                let mut rt = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let mut rhs = -0.5 * (prod[(i, j)] + prod[(j, i)]);
                        if i == j {
                            rhs += sigma * mu - s.d[i] * s.d[i];
                        }
                        rt[(i, j)] = 2.0 * rhs / (s.d[i] + s.d[j]);
                    }
                }
                let mut r = &s.g * rt * s.g.transpose();
                symmetrize(&mut r);
                r
            })
            .collect();
        let Some((dx, dy, dz)) = solve_dir(&r_corr) else {
            return Ok(finish(best_or(&best, &it), SdpStatus::NumericalFailure, iter, None));
        };
        let (Some(ap), Some(ad)) = (block_max_step(&it.x, &dx), block_max_step(&it.z, &dz)) else {
            return Ok(finish(best_or(&best, &it), SdpStatus::NumericalFailure, iter, None));
        };
        let gamma = 0.9 + 0.09 * ap_a.min(ad_a);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);

        for b in 0..it.x.len() {
            add_scaled(&mut it.x[b], ap, &dx[b]);
            symmetrize(&mut it.x[b]);
            add_scaled(&mut it.z[b], ad, &dz[b]);
            symmetrize(&mut it.z[b]);
        }
        it.y.axpy(ad, &dy, 1.0);

        if ap.max(ad) < 1e-10 {
            stall += 1;
            if stall >= 3 {
                return Ok(finish(best_or(&best, &it), SdpStatus::NumericalFailure, iter + 1, None));
            }
        } else {
            stall = 0;
        }
    }
    let last = best.map(|(_, b)| b).unwrap_or(it);
    Ok(finish(&last, SdpStatus::MaxIterations, options.max_iter, None))
}

fn initial_point(sc: &Scaled) -> Iterate {
    let mut x = Vec::with_capacity(sc.dims.len());
    let mut z = Vec::with_capacity(sc.dims.len());
    for (bi, &n) in sc.dims.iter().enumerate() {
        let nf = n as f64;
        let mut xi: f64 = 10f64.max(nf.sqrt());
        let mut eta: f64 = 10f64.max(nf.sqrt()).max(sc.c[bi].norm());
        for (k, ak) in sc.a.iter().enumerate() {
            let na = ak[bi].norm();
            xi = xi.max(nf * (1.0 + sc.b[k].abs()) / (1.0 + na));
            eta = eta.max(na);
        }
        x.push(DMatrix::identity(n, n) * xi);
        z.push(DMatrix::identity(n, n) * eta);
    }
    Iterate { x, y: DVector::zeros(sc.a.len()), z }
}

fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let asym = max_asymmetry(m);
    if asym > tol * (1.0 + m.amax()) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m, 1e-9)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// Smallest eigenvalue of a symmetric matrix (0 for an empty matrix).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?.first().copied().unwrap_or(0.0))
}

/// Number of eigenvalues above `tau * lambda_max`.
pub fn numeric_rank(m: &DMatrix<f64>, tau: f64) -> Result<usize> {
    let ev = symmetric_eigenvalues(m)?;
    let Some(&lmax) = ev.last() else {
        return Ok(0);
    };
    let spectral = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&lmin) = ev.first() {
        if lmin < -1e-6 * spectral.max(f64::MIN_POSITIVE) {
            return Err(Error::Indefinite(lmin));
        }
    }
    if lmax <= 0.0 {
        return Ok(0);
    }
    Ok(ev.iter().filter(|&&l| l > tau * lmax).count())
}
