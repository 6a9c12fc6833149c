//! Compilation of moment programs into block SDPs.
//!
//! A moment program is
//!
//! ```text
//! minimize L_y(f)  s.t.  M_k(w y) >= 0   (psd blocks)
//!                        M_k(w y) == 0   (zero blocks, entrywise)
//!                        L_y(q) == 0     (scalar equalities)
//!                        y_0 == 1
//! ```
//!
//! Moment symmetry is structural: every matrix cell that shares a monomial
//! shares the same variable. The affine equalities are eliminated by
//! Gauss-Jordan reduction, `y = y_p + N w`, and the remaining free
//! coordinates `w` become the dual variables of the SDP. The primal blocks
//! of the SDP are then Gram matrices of the SOS multipliers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::moment::MomentVector;
use crate::polyalg::{basis_size, grlex_index, monomial_basis, Monomial, Polynomial};
use crate::sdp::{self, SdpConstraint, SdpOptions, SdpProblem, SdpSolution, SdpStatus};
use crate::sos::SosWitness;
use crate::{Error, Result};

/// `M_k(weight * y)` for the basis of degree `k = half_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub weight: Polynomial,
    pub half_degree: usize,
}

/// One matrix cell of a block: `(row, col, [(moment index, coefficient)])`.
pub type CellTerms = (usize, usize, Vec<(usize, f64)>);

impl LmiBlock {
    pub fn dim(&self) -> usize {
        basis_size(self.weight.nvars(), self.half_degree)
    }

    pub fn basis(&self) -> Vec<Monomial> {
        monomial_basis(self.weight.nvars(), self.half_degree)
    }

    /// Upper-triangle cells, each as a combination of moments.
    pub fn cells(&self) -> Vec<CellTerms> {
        let basis = self.basis();
        let mut out = Vec::with_capacity(basis.len() * (basis.len() + 1) / 2);
        for i in 0..basis.len() {
            for j in i..basis.len() {
                let ab = basis[i].mul(&basis[j]);
                let terms = self.weight.terms().map(|(m, c)| (grlex_index(&ab.mul(m)), c)).collect();
                out.push((i, j, terms));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentProgram {
    nvars: usize,
    order: usize,
    objective: Polynomial,
    psd: Vec<LmiBlock>,
    zero: Vec<LmiBlock>,
    equalities: Vec<Polynomial>,
}

impl MomentProgram {
    /// Program over the moments of degree `<= 2 * order`.
    pub fn new(order: usize, objective: Polynomial) -> Result<Self> {
        let p = MomentProgram {
            nvars: objective.nvars(),
            order,
            objective,
            psd: Vec::new(),
            zero: Vec::new(),
            equalities: Vec::new(),
        };
        p.check_degree(p.objective.degree())?;
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn objective(&self) -> &Polynomial {
        &self.objective
    }

    pub fn psd_blocks(&self) -> &[LmiBlock] {
        &self.psd
    }

    pub fn zero_blocks(&self) -> &[LmiBlock] {
        &self.zero
    }

    pub fn equalities(&self) -> &[Polynomial] {
        &self.equalities
    }

    /// Adds `M_k(weight * y) >= 0`; `k = 0` gives the scalar row `L_y(weight) >= 0`.
    pub fn add_psd(&mut self, weight: Polynomial, half_degree: usize) -> Result<()> {
        let block = self.block(weight, half_degree)?;
        self.psd.push(block);
        Ok(())
    }

    /// Adds `M_k(weight * y) = 0` entry by entry.
    pub fn add_zero_block(&mut self, weight: Polynomial, half_degree: usize) -> Result<()> {
        let block = self.block(weight, half_degree)?;
        self.zero.push(block);
        Ok(())
    }

    /// Adds `L_y(q) = 0`.
    pub fn add_equality(&mut self, q: Polynomial) -> Result<()> {
        self.check_vars(q.nvars())?;
        self.check_degree(q.degree())?;
        self.equalities.push(q);
        Ok(())
    }

    fn block(&self, weight: Polynomial, half_degree: usize) -> Result<LmiBlock> {
        self.check_vars(weight.nvars())?;
        self.check_degree(2 * half_degree + weight.degree())?;
        if weight.is_zero() {
            return Err(Error::InvalidArgument("zero weight polynomial".into()));
        }
        Ok(LmiBlock { weight, half_degree })
    }

    fn check_vars(&self, n: usize) -> Result<()> {
        if n != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: n });
        }
        Ok(())
    }

    fn check_degree(&self, degree: usize) -> Result<()> {
        if degree > 2 * self.order {
            return Err(Error::DegreeOverflow { degree, bound: 2 * self.order });
        }
        Ok(())
    }

    /// Rows of the affine system on `y`: first `y_0 = 1`, then every
    /// equality polynomial, then every cell of every zero block.
    fn equality_rows(&self) -> Vec<Polynomial> {
        let mut rows = vec![Polynomial::constant(self.nvars, 1.0)];
        rows.extend(self.equalities.iter().cloned());
        for b in &self.zero {
            let basis = b.basis();
            for i in 0..basis.len() {
                for j in i..basis.len() {
                    let m = Polynomial::from_monomial(basis[i].mul(&basis[j]), 1.0);
                    rows.push(&b.weight * &m);
                }
            }
        }
        rows
    }

    /// Structural facial reduction. A polynomial `p = q * u`, with `q` a
    /// zero-block weight, spans a kernel vector of the psd block with weight
    /// `w` whenever `L_y(w p^2) = 0` follows from the current rows; the rows
    /// `L_y(w p b) = 0` for every basis monomial `b` are then implied too.
    /// Returns, per psd block, the kernel polynomials found, and appends the
    /// implied rows together with their `(zero block, multiplier)` factorization.
    fn facial_reduction(
        &self,
        rows: &mut Vec<Polynomial>,
        extra: &mut Vec<(usize, Polynomial)>,
    ) -> Vec<Vec<Polynomial>> {
        let size = basis_size(self.nvars, 2 * self.order);
        let mut kernels: Vec<Vec<Polynomial>> = vec![Vec::new(); self.psd.len()];
        if self.zero.is_empty() {
            return kernels;
        }
        let mut done: Vec<Vec<(usize, Monomial)>> = vec![Vec::new(); self.psd.len()];
        loop {
            let space = Elimination::new(rows, &vec![0.0; rows.len()], size);
            let mut added = false;
            for (bi, block) in self.psd.iter().enumerate() {
                let basis = block.basis();
                for (zi, z) in self.zero.iter().enumerate() {
                    let q = &z.weight;
                    if q.degree() > block.half_degree {
                        continue;
                    }
                    for u in monomial_basis(self.nvars, block.half_degree - q.degree()) {
                        if done[bi].iter().any(|(k, m)| *k == zi && *m == u) {
                            continue;
                        }
                        let p = q * &Polynomial::from_monomial(u.clone(), 1.0);
                        if !space.implies(&(&block.weight * &(&p * &p))) {
                            continue;
                        }
                        for b in &basis {
                            let wub = &block.weight * &Polynomial::from_monomial(u.mul(b), 1.0);
                            rows.push(q * &wub);
                            extra.push((zi, wub));
                        }
                        kernels[bi].push(p);
                        done[bi].push((zi, u));
                        added = true;
                    }
                }
            }
            if !added {
                return kernels;
            }
        }
    }

    pub fn compile(&self) -> Result<CompiledProgram> {
        let size = basis_size(self.nvars, 2 * self.order);
        let mut rows = self.equality_rows();
        let mut extra = Vec::new();
        let kernels = self.facial_reduction(&mut rows, &mut extra);
        let mut rhs = vec![0.0; rows.len()];
        rhs[0] = 1.0;
        let elim = Elimination::new(&rows, &rhs, size);

        // Sparse view of N, by moment index.
        let free = elim.free.len();
        let mut n_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
        for (k, &f) in elim.free.iter().enumerate() {
            n_rows[f].push((k, 1.0));
        }
        for (r, &p) in elim.pivots.iter().enumerate() {
            for (k, &f) in elim.free.iter().enumerate() {
                let v = elim.reduced[(r, f)];
                if v != 0.0 {
                    n_rows[p].push((k, -v));
                }
            }
        }

        let particular = elim.particular;
        let dims: Vec<usize> = self.psd.iter().map(LmiBlock::dim).collect();
        let mut f0: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        let mut fk: Vec<Vec<DMatrix<f64>>> = vec![dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(); free];
        for (bi, block) in self.psd.iter().enumerate() {
            for (i, j, terms) in block.cells() {
                for (idx, c) in terms {
                    let v0 = c * particular[idx];
                    f0[bi][(i, j)] += v0;
                    if i != j {
                        f0[bi][(j, i)] += v0;
                    }
                    for &(k, nv) in &n_rows[idx] {
                        let v = c * nv;
                        fk[k][bi][(i, j)] += v;
                        if i != j {
                            fk[k][bi][(j, i)] += v;
                        }
                    }
                }
            }
        }

        // Restrict each block to the complement of its kernel; blocks with
        // nothing left are dropped.
        let mut faces: Vec<Option<DMatrix<f64>>> = Vec::with_capacity(self.psd.len());
        let mut block_map = Vec::with_capacity(self.psd.len());
        let mut kept_blocks = Vec::new();
        for (bi, block) in self.psd.iter().enumerate() {
            let face = if kernels[bi].is_empty() { None } else { Some(complement(&block.basis(), &kernels[bi])) };
            if let Some(v) = &face {
                f0[bi] = v.transpose() * &f0[bi] * v;
                for m in fk.iter_mut() {
                    m[bi] = v.transpose() * &m[bi] * v;
                }
            }
            let dim = f0[bi].nrows();
            block_map.push(if dim > 0 { Some(kept_blocks.len()) } else { None });
            if dim > 0 {
                kept_blocks.push(bi);
            }
            faces.push(face);
        }
        let pick = |ms: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> { kept_blocks.iter().map(|&b| ms[b].clone()).collect() };
        let f0 = pick(&f0);
        let fk: Vec<Vec<DMatrix<f64>>> = fk.iter().map(|m| pick(m)).collect();
        let dims: Vec<usize> = f0.iter().map(|m| m.nrows()).collect();
        let scale = fk.iter().flatten().map(|m| m.amax()).fold(0.0, f64::max).max(1.0);
        let touched: Vec<bool> = fk.iter().map(|m| m.iter().any(|b| b.amax() > 1e-12 * scale)).collect();

        let mut kappa = 0.0;
        let mut cost = vec![0.0; free];
        for (m, c) in self.objective.terms() {
            let idx = grlex_index(m);
            kappa += c * particular[idx];
            for &(k, nv) in &n_rows[idx] {
                cost[k] += c * nv;
            }
        }

        // Coordinates that no block sees are either irrelevant (zero cost)
        // or make the moment objective unbounded below.
        let mut kept = Vec::new();
        let mut unbounded = false;
        for k in 0..free {
            if touched[k] {
                kept.push(k);
            } else if cost[k].abs() > 1e-12 {
                unbounded = true;
            }
        }
        let constraints =
            kept.iter().map(|&k| SdpConstraint { blocks: fk[k].iter().map(|m| -m).collect(), rhs: -cost[k] }).collect();
        let sdp = SdpProblem::new(dims, f0, constraints)?;

        let mut basis_map = DMatrix::zeros(size, kept.len());
        for (idx, row) in n_rows.iter().enumerate() {
            for &(k, v) in row {
                if let Ok(col) = kept.binary_search(&k) {
                    basis_map[(idx, col)] = v;
                }
            }
        }

        Ok(CompiledProgram {
            program: self.clone(),
            sdp,
            particular: DVector::from_vec(particular),
            basis_map,
            kappa,
            rows,
            extra,
            faces,
            block_map,
            inconsistent: elim.inconsistent,
            unbounded,
        })
    }
}

/// Orthonormal basis of the complement of the span of `kernel` in the
/// coefficient space of `basis`.
fn complement(basis: &[Monomial], kernel: &[Polynomial]) -> DMatrix<f64> {
    let dim = basis.len();
    let mut k = DMatrix::zeros(dim, kernel.len());
    for (c, p) in kernel.iter().enumerate() {
        for (r, v) in p.coefficients_in(basis).into_iter().enumerate() {
            k[(r, c)] = v;
        }
    }
    let eig = (&k * k.transpose()).symmetric_eigen();
    let tol = 1e-10 * eig.eigenvalues.amax().max(1.0);
    let cols: Vec<DVector<f64>> =
        (0..dim).filter(|&i| eig.eigenvalues[i] <= tol).map(|i| eig.eigenvectors.column(i).into_owned()).collect();
    if cols.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

// Gauss-Jordan reduction of `A y = b` with full pivoting.
struct Elimination {
    reduced: DMatrix<f64>,
    pivots: Vec<usize>,
    free: Vec<usize>,
    particular: Vec<f64>,
    inconsistent: bool,
}

impl Elimination {
    fn new(rows: &[Polynomial], rhs: &[f64], size: usize) -> Self {
        let mut a = DMatrix::zeros(rows.len(), size + 1);
        for (r, p) in rows.iter().enumerate() {
            for (m, c) in p.terms() {
                a[(r, grlex_index(m))] += c;
            }
            a[(r, size)] = rhs[r];
        }
        let scale = a.columns(0, size).amax().max(1.0);
        let tol = 1e-10 * scale;
        let mut pivots = Vec::new();
        let mut row = 0;
        let mut used = vec![false; size];
        while row < rows.len() {
            let mut best = (0.0, 0, 0);
            for r in row..rows.len() {
                for c in 0..size {
                    let v = a[(r, c)].abs();
                    if !used[c] && v > best.0 {
                        best = (v, r, c);
                    }
                }
            }
            if best.0 <= tol {
                break;
            }
            let (_, pr, pc) = best;
            a.swap_rows(row, pr);
            let inv = 1.0 / a[(row, pc)];
            for c in 0..=size {
                a[(row, c)] *= inv;
            }
            a[(row, pc)] = 1.0;
            for r in 0..rows.len() {
                if r != row {
                    let f = a[(r, pc)];
                    if f != 0.0 {
                        for c in 0..=size {
                            let v = a[(row, c)];
                            if v != 0.0 {
                                a[(r, c)] -= f * v;
                            }
                        }
                        a[(r, pc)] = 0.0;
                    }
                }
            }
            used[pc] = true;
            pivots.push(pc);
            row += 1;
        }
        let inconsistent = (row..rows.len()).any(|r| a[(r, size)].abs() > 1e-8 * (1.0 + scale));
        let free: Vec<usize> = (0..size).filter(|&c| !used[c]).collect();
        let mut particular = vec![0.0; size];
        for (r, &p) in pivots.iter().enumerate() {
            particular[p] = a[(r, size)];
        }
        Elimination {
            reduced: a.rows(0, pivots.len()).columns(0, size).into_owned(),
            pivots,
            free,
            particular,
            inconsistent,
        }
    }

    /// Whether `L_y(p) = 0` lies in the row space of the homogeneous system.
    fn implies(&self, p: &Polynomial) -> bool {
        let size = self.particular.len();
        let mut v = vec![0.0; size];
        for (m, c) in p.terms() {
            v[grlex_index(m)] += c;
        }
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
        for (r, &piv) in self.pivots.iter().enumerate() {
            let f = v[piv];
            if f != 0.0 {
                for c in 0..size {
                    v[c] -= f * self.reduced[(r, c)];
                }
            }
        }
        v.iter().all(|x| x.abs() <= 1e-9 * scale)
    }
}

/// Interpretation of a solve from the moment side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentStatus {
    Optimal,
    /// No pseudo-moment vector satisfies the constraints.
    Infeasible,
    /// The moment objective is unbounded below.
    Unbounded,
    /// Iteration cap hit; the best iterate is returned.
    Inaccurate,
    NumericalFailure,
}

impl std::fmt::Display for MomentStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MomentStatus::Optimal => "optimal",
            MomentStatus::Infeasible => "infeasible",
            MomentStatus::Unbounded => "unbounded",
            MomentStatus::Inaccurate => "inaccurate",
            MomentStatus::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct CompiledProgram {
    program: MomentProgram,
    sdp: SdpProblem,
    particular: DVector<f64>,
    basis_map: DMatrix<f64>,
    kappa: f64,
    rows: Vec<Polynomial>,
    // Rows added by facial reduction, as `zero weight * multiplier`.
    extra: Vec<(usize, Polynomial)>,
    // Orthonormal basis of the face of each psd block, when reduced.
    faces: Vec<Option<DMatrix<f64>>>,
    block_map: Vec<Option<usize>>,
    inconsistent: bool,
    unbounded: bool,
}

#[derive(Debug, Clone)]
pub struct MomentSolution {
    pub status: MomentStatus,
    /// Moment-side objective `L_y(f)`.
    pub value: f64,
    /// SOS-side objective; a lower bound on `value` up to solver accuracy.
    pub bound: f64,
    pub moments: Option<MomentVector>,
    pub sdp: Option<SdpSolution>,
}

/// The SOS side of a solved program:
/// `f - lambda = sum_j w_j sigma_j + sum_k w'_k psi_k + sum_i mu_i q_i + residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct SosSide {
    pub lambda: f64,
    /// One witness per psd block, in insertion order.
    pub sigmas: Vec<SosWitness>,
    /// Free multipliers of the zero blocks.
    pub zero_multipliers: Vec<Polynomial>,
    /// Multipliers of the scalar equalities.
    pub equality_multipliers: Vec<f64>,
    /// l1-norm of the reconstruction residual.
    pub residual: f64,
}

impl CompiledProgram {
    pub fn program(&self) -> &MomentProgram {
        &self.program
    }

    pub fn sdp(&self) -> &SdpProblem {
        &self.sdp
    }

    /// Number of moment coordinates left after eliminating the equalities.
    pub fn free_dim(&self) -> usize {
        self.basis_map.ncols()
    }

    pub fn moments_from(&self, w: &DVector<f64>) -> Result<MomentVector> {
        let y = &self.particular + &self.basis_map * w;
        MomentVector::new(self.program.nvars, self.program.order, y.as_slice().to_vec())
    }

    pub fn solve(&self, options: &SdpOptions) -> Result<MomentSolution> {
        if self.inconsistent {
            return Ok(MomentSolution::without_solve(MomentStatus::Infeasible, f64::INFINITY));
        }
        if self.unbounded {
            return Ok(MomentSolution::without_solve(MomentStatus::Unbounded, f64::NEG_INFINITY));
        }
        if self.sdp.num_constraints() == 0 {
            // Fully determined moments: only a feasibility check remains.
            let ok = self
                .sdp
                .objective()
                .iter()
                .map(sdp::min_eigenvalue)
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .all(|e| e >= -1e-9);
            if !ok {
                return Ok(MomentSolution::without_solve(MomentStatus::Infeasible, f64::INFINITY));
            }
            return Ok(MomentSolution {
                status: MomentStatus::Optimal,
                value: self.kappa,
                bound: self.kappa,
                moments: Some(self.moments_from(&DVector::zeros(0))?),
                sdp: None,
            });
        }
        let sol = sdp::solve(&self.sdp, options)?;
        let status = match sol.status {
            SdpStatus::Optimal => MomentStatus::Optimal,
            SdpStatus::Infeasible => MomentStatus::Unbounded,
            SdpStatus::Unbounded => MomentStatus::Infeasible,
            SdpStatus::MaxIterations => MomentStatus::Inaccurate,
            SdpStatus::NumericalFailure => MomentStatus::NumericalFailure,
        };
        let (value, bound, moments) = match status {
            MomentStatus::Optimal | MomentStatus::Inaccurate | MomentStatus::NumericalFailure => {
                (self.kappa - sol.dual_value, self.kappa - sol.primal_value, Some(self.moments_from(&sol.dual)?))
            }
            MomentStatus::Infeasible => (f64::INFINITY, f64::INFINITY, None),
            MomentStatus::Unbounded => (f64::NEG_INFINITY, f64::NEG_INFINITY, None),
        };
        Ok(MomentSolution { status, value, bound, moments, sdp: Some(sol) })
    }

    /// Reads the SOS multipliers off the primal blocks and fits the
    /// equality multipliers by least squares.
    pub fn sos_side(&self, solution: &MomentSolution) -> Result<SosSide> {
        let n = self.program.nvars;
        let gram_blocks: Vec<DMatrix<f64>> = self
            .program
            .psd
            .iter()
            .enumerate()
            .map(|(bi, b)| match (&solution.sdp, self.block_map[bi]) {
                (Some(s), Some(k)) => match &self.faces[bi] {
                    Some(v) => v * &s.primal[k] * v.transpose(),
                    None => s.primal[k].clone(),
                },
                _ => DMatrix::zeros(b.dim(), b.dim()),
            })
            .collect();
        let mut sigmas = Vec::with_capacity(self.program.psd.len());
        let mut remainder = self.program.objective.clone();
        for (block, gram) in self.program.psd.iter().zip(gram_blocks) {
            let w = SosWitness::from_gram(block.basis(), gram, 0.0)?;
            remainder = &remainder - &(&block.weight * &w.polynomial(n));
            sigmas.push(w);
        }

        let support = basis_size(n, 2 * self.program.order);
        let mut a: DMatrix<f64> = DMatrix::zeros(support, self.rows.len());
        for (c, p) in self.rows.iter().enumerate() {
            for (m, v) in p.terms() {
                a[(grlex_index(m), c)] += v;
            }
        }
        let target = DVector::from_vec(remainder.coefficients_in(&monomial_basis(n, 2 * self.program.order)));
        let svd = a.clone().svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(1.0);
        let mu = svd.solve(&target, eps).map_err(|e| Error::Solver(e.to_string()))?;
        let fitted = &a * &mu;
        let residual: f64 = (&target - &fitted).iter().map(|v| v.abs()).sum();

        let neq = self.program.equalities.len();
        let mut zero_multipliers = Vec::with_capacity(self.program.zero.len());
        let mut offset = 1 + neq;
        for block in &self.program.zero {
            let basis = block.basis();
            let mut psi = Polynomial::zero(n);
            for i in 0..basis.len() {
                for j in i..basis.len() {
                    psi.add_term(basis[i].mul(&basis[j]), mu[offset]);
                    offset += 1;
                }
            }
            zero_multipliers.push(psi);
        }
        for (zi, m) in &self.extra {
            zero_multipliers[*zi] = &zero_multipliers[*zi] + &m.scale(mu[offset]);
            offset += 1;
        }
        Ok(SosSide {
            lambda: mu[0],
            sigmas,
            zero_multipliers,
            equality_multipliers: mu.rows(1, neq).iter().copied().collect(),
            residual,
        })
    }
}

impl MomentSolution {
    fn without_solve(status: MomentStatus, value: f64) -> Self {
        MomentSolution { status, value, bound: value, moments: None, sdp: None }
    }
}
