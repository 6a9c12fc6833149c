//! Sparse multivariate polynomials over `f64`.
//!
//! Monomials are ordered graded-lexicographically everywhere in the crate:
//! by total degree first, then lexicographically with `X1 > X2 > ... > Xn`.
//! `monomial_basis(2, 2)` is therefore `[1, X1, X2, X1^2, X1*X2, X2^2]`, and
//! every moment or Gram matrix is indexed in this order.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped after arithmetic.
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// A multi-index `alpha` in `N^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    /// The monomial `X_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Exponent-wise sum, i.e. the product of two monomials.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.nvars(), other.nvars());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "X{}", i + 1)?;
            } else {
                write!(f, "X{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Dimension `s(d) = C(n + d, d)` of the space of polynomials of degree at most `d`.
pub fn basis_size(nvars: usize, degree: usize) -> usize {
    binomial(nvars + degree, degree)
}

/// All monomials of degree `<= degree` in graded-lex order.
pub fn monomial_basis(nvars: usize, degree: usize) -> Vec<Monomial> {
    let mut out = Vec::with_capacity(basis_size(nvars, degree));
    let mut buf = vec![0u32; nvars];
    for d in 0..=degree {
        fill_homogeneous(&mut buf, 0, d as u32, &mut out);
    }
    out
}

/// Position of `m` in `monomial_basis(m.nvars(), d)` for any `d >= deg m`.
pub fn grlex_index(m: &Monomial) -> usize {
    let n = m.nvars();
    let deg = m.degree();
    if n == 0 {
        return 0;
    }
    // All monomials of smaller degree come first.
    let mut idx = if deg == 0 { 0 } else { basis_size(n, deg - 1) };
    let mut remaining = deg;
    for i in 0..n.saturating_sub(1) {
        let ai = m.0[i] as usize;
        let k = n - i - 1;
        // Monomials agreeing on the prefix but with a larger exponent here
        // precede `m`; each leaves `remaining - e` for the last `k` variables.
        for e in ai + 1..=remaining {
            idx += binomial(remaining - e + k - 1, k - 1);
        }
        remaining -= ai;
    }
    idx
}

// Emits exponent vectors of total degree `remaining` over buf[pos..] in
// descending lex order, which is the graded-lex order within a degree.
fn fill_homogeneous(buf: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<Monomial>) {
    if pos + 1 == buf.len() {
        buf[pos] = remaining;
        out.push(Monomial(buf.to_vec()));
        buf[pos] = 0;
        return;
    }
    if buf.is_empty() {
        out.push(Monomial(Vec::new()));
        return;
    }
    for e in (0..=remaining).rev() {
        buf[pos] = e;
        fill_homogeneous(buf, pos + 1, remaining - e, out);
    }
    buf[pos] = 0;
}

/// One `{"exponents": [...], "coeff": c}` record of the JSON interchange format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// A sparse real polynomial in `nvars` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::from_monomial(Monomial::one(nvars), c)
    }

    /// The coordinate polynomial `X_i` (zero-based `i`).
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index {i} out of range for {nvars} variables");
        Self::from_monomial(Monomial::var(nvars, i), 1.0)
    }

    pub fn from_monomial(m: Monomial, c: f64) -> Self {
        let mut p = Polynomial::zero(m.nvars());
        p.add_term(m, c);
        p
    }

    /// Builds a polynomial by summing `(exponents, coeff)` pairs.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Polynomial::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: e.len() });
            }
            p.add_term(Monomial(e), c);
        }
        Ok(p)
    }

    /// Parses the JSON term list. Unlike [`Polynomial::from_terms`], repeated
    /// exponent vectors are rejected.
    pub fn from_term_list(nvars: usize, terms: &[Term]) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut p = Polynomial::zero(nvars);
        for t in terms {
            if t.exponents.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: t.exponents.len() });
            }
            if !t.coeff.is_finite() {
                return Err(Error::Parse(format!("non-finite coefficient {}", t.coeff)));
            }
            if !seen.insert(t.exponents.clone()) {
                return Err(Error::Parse(format!("duplicate monomial {:?} in polynomial", t.exponents)));
            }
            p.add_term(Monomial(t.exponents.clone()), t.coeff);
        }
        Ok(p)
    }

    pub fn to_term_list(&self) -> Vec<Term> {
        self.terms.iter().map(|(m, &c)| Term { exponents: m.0.clone(), coeff: c }).collect()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Largest exponent of variable `i` over all terms.
    pub fn degree_in(&self, i: usize) -> u32 {
        self.terms.keys().map(|m| m.0[i]).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&Monomial::one(self.nvars))
    }

    /// `sum |f_alpha|`.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, c| acc + c.abs())
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.nvars(), self.nvars);
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                if c.abs() >= ZERO_THRESHOLD {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().abs() < ZERO_THRESHOLD {
                    o.remove();
                }
            }
        }
    }

    fn prune(mut self) -> Self {
        self.terms.retain(|_, c| c.abs() >= ZERO_THRESHOLD);
        self
    }

    pub fn scale(&self, s: f64) -> Self {
        Polynomial { nvars: self.nvars, terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect() }.prune()
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// `sum_alpha f_alpha x^alpha`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: x.len() });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    /// `d/dX_i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut out = Polynomial::zero(self.nvars);
        for (m, &c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.0[i] -= 1;
            out.add_term(dm, c * e as f64);
        }
        out
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.nvars).map(|i| self.partial(i)).collect()
    }

    pub fn hessian(&self) -> PolyMatrix {
        let grad = self.gradient();
        let n = self.nvars;
        let mut rows = vec![vec![Polynomial::zero(n); n]; n];
        for i in 0..n {
            for j in i..n {
                let h = grad[i].partial(j);
                rows[j][i] = h.clone();
                rows[i][j] = h;
            }
        }
        PolyMatrix { rows }
    }

    /// Substitutes `X_i -> subs[i]`; all substitutes share one variable count.
    pub fn compose(&self, subs: &[Polynomial]) -> Result<Self> {
        if subs.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: subs.len() });
        }
        let target = subs.first().map(|s| s.nvars).unwrap_or(0);
        if subs.iter().any(|s| s.nvars != target) {
            return Err(Error::InvalidArgument("substituted polynomials must share a variable count".into()));
        }
        let mut powers: Vec<Vec<Polynomial>> =
            subs.iter().map(|s| vec![Polynomial::constant(target, 1.0), s.clone()]).collect();
        let mut out = Polynomial::zero(target);
        for (m, &c) in &self.terms {
            let mut term = Polynomial::constant(target, c);
            for (i, &e) in m.0.iter().enumerate() {
                let e = e as usize;
                while powers[i].len() <= e {
                    let next = &powers[i][powers[i].len() - 1] * &subs[i];
                    powers[i].push(next);
                }
                if e > 0 {
                    term = &term * &powers[i][e];
                }
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// Composition `f(g(X))` of a univariate `self` with `g`.
    pub fn compose_univariate(&self, g: &Polynomial) -> Result<Self> {
        if self.nvars != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.nvars });
        }
        self.compose(std::slice::from_ref(g))
    }

    /// Re-expresses the polynomial in `nvars` variables, sending `X_i` to
    /// `X_{offset + i}`.
    pub fn embed(&self, nvars: usize, offset: usize) -> Self {
        assert!(offset + self.nvars <= nvars);
        let mut out = Polynomial::zero(nvars);
        for (m, &c) in &self.terms {
            let mut e = vec![0; nvars];
            e[offset..offset + self.nvars].copy_from_slice(&m.0);
            out.add_term(Monomial(e), c);
        }
        out
    }

    /// Coefficient vector over `basis`; terms outside the basis are ignored.
    pub fn coefficients_in(&self, basis: &[Monomial]) -> Vec<f64> {
        basis.iter().map(|m| self.coeff(m)).collect()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, &c)) in self.terms.iter().enumerate() {
            let sign = if c < 0.0 { "-" } else { "+" };
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if m.is_constant() {
                write!(f, "{}", c.abs())?;
            } else if (c.abs() - 1.0).abs() < 1e-15 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", c.abs())?;
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            *out.terms.entry(m.clone()).or_insert(0.0) += c;
        }
        out.prune()
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            *out.terms.entry(m.clone()).or_insert(0.0) -= c;
        }
        out.prune()
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut terms: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &rhs.terms {
                *terms.entry(a.mul(b)).or_insert(0.0) += ca * cb;
            }
        }
        Polynomial { nvars: self.nvars, terms }.prune()
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: Polynomial) -> Polynomial {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: &Polynomial) -> Polynomial {
                (&self).$f(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_term_list().serialize(s)
    }
}

/// Square matrix with polynomial entries (Hessians, averaged Hessians).
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    rows: Vec<Vec<Polynomial>>,
}

impl PolyMatrix {
    pub fn from_rows(rows: Vec<Vec<Polynomial>>) -> Self {
        PolyMatrix { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.rows[i][j]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| self.rows[i][j] == self.rows[j][i]))
    }

    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.rows[i][j].eval(x)?;
            }
        }
        Ok(m)
    }

    /// The quadratic form `v^T P v` for a vector of polynomials `v`.
    pub fn quadratic_form(&self, v: &[Polynomial]) -> Polynomial {
        let n = self.dim();
        assert_eq!(v.len(), n);
        let nv = v.first().map(|p| p.nvars()).unwrap_or(0);
        let mut acc = Polynomial::zero(nv);
        for i in 0..n {
            for j in 0..n {
                if self.rows[i][j].is_zero() {
                    continue;
                }
                acc = acc + &(&(&v[i] * &self.rows[i][j]) * &v[j]);
            }
        }
        acc
    }
}

/// Exact gradient and Hessian of `p`.
pub fn differentiate(p: &Polynomial) -> (Vec<Polynomial>, PolyMatrix) {
    (p.gradient(), p.hessian())
}

/// `theta_r(X) = 1 + sum_{k=1..r} sum_i X_i^(2k) / k!`.
pub fn theta(nvars: usize, r: u32) -> Polynomial {
    let mut p = Polynomial::constant(nvars, 1.0);
    let mut factorial = 1.0;
    for k in 1..=r {
        factorial *= k as f64;
        for i in 0..nvars {
            let mut e = vec![0; nvars];
            e[i] = 2 * k;
            p.add_term(Monomial(e), 1.0 / factorial);
        }
    }
    p
}

/// `f + eps * (theta_{r0} + theta_r)` with `r0 = floor(deg f / 2) + 1`.
pub fn theta_perturbation(f: &Polynomial, eps: f64, r: u32) -> Result<Polynomial> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let r0 = (f.degree() / 2 + 1) as u32;
    if r < r0 {
        return Err(Error::InvalidArgument(format!("perturbation order r={r} is below r0={r0}")));
    }
    let n = f.nvars();
    let bump = &theta(n, r0) + &theta(n, r);
    Ok(f + &bump.scale(eps))
}

/// `F(X, u) = int_0^1 int_0^t Hess f(u + s (X - u)) ds dt`, in closed form.
///
/// Writing each Hessian entry as a Taylor polynomial `sum_beta h_beta D^beta`
/// in `D = X - u`, the substitution scales `D^beta` by `s^|beta|`, and
/// `int_0^1 int_0^t s^k ds dt = 1 / ((k+1)(k+2))`.
pub fn averaged_hessian_remainder(f: &Polynomial, u: &[f64]) -> Result<PolyMatrix> {
    let n = f.nvars();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() });
    }
    let hess = f.hessian();
    // X_i -> D_i + u_i and back.
    let shift: Vec<Polynomial> = (0..n).map(|i| &Polynomial::var(n, i) + &Polynomial::constant(n, u[i])).collect();
    let unshift: Vec<Polynomial> = (0..n).map(|i| &Polynomial::var(n, i) - &Polynomial::constant(n, u[i])).collect();
    let mut rows = vec![vec![Polynomial::zero(n); n]; n];
    for i in 0..n {
        for j in i..n {
            let h = hess.get(i, j);
            if h.is_zero() {
                continue;
            }
            let taylor = h.compose(&shift)?;
            let mut weighted = Polynomial::zero(n);
            for (m, c) in taylor.terms() {
                let k = m.degree() as u64;
                let denom = (k + 1) * (k + 2);
                weighted.add_term(m.clone(), c / denom as f64);
            }
            let entry = weighted.compose(&unshift)?;
            rows[j][i] = entry.clone();
            rows[i][j] = entry;
        }
    }
    Ok(PolyMatrix { rows })
}

/// `f(u) + grad f(u)^T (X - u) + (X - u)^T F(X, u) (X - u)`; equals `f`.
pub fn taylor_reconstruction(f: &Polynomial, u: &[f64], remainder: &PolyMatrix) -> Result<Polynomial> {
    let n = f.nvars();
    let mut acc = Polynomial::constant(n, f.eval(u)?);
    let diffs: Vec<Polynomial> = (0..n).map(|i| &Polynomial::var(n, i) - &Polynomial::constant(n, u[i])).collect();
    for (i, g) in f.gradient().iter().enumerate() {
        acc = acc + diffs[i].scale(g.eval(u)?);
    }
    Ok(acc + remainder.quadratic_form(&diffs))
}

/// `K = { x : g_j(x) >= 0 }`, optionally with a ball bound `M` for the
/// Archimedean augmentation `M^2 - |X|^2 >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSet", into = "RawSet")]
pub struct SemialgebraicSet {
    nvars: usize,
    constraints: Vec<Polynomial>,
    ball_bound: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSet {
    n: usize,
    constraints: Vec<Vec<Term>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ball_bound: Option<f64>,
}

impl TryFrom<RawSet> for SemialgebraicSet {
    type Error = Error;

    fn try_from(raw: RawSet) -> Result<Self> {
        let constraints =
            raw.constraints.iter().map(|t| Polynomial::from_term_list(raw.n, t)).collect::<Result<Vec<_>>>()?;
        SemialgebraicSet::build(raw.n, constraints, raw.ball_bound)
    }
}

impl From<SemialgebraicSet> for RawSet {
    fn from(k: SemialgebraicSet) -> Self {
        RawSet {
            n: k.nvars,
            constraints: k.constraints.iter().map(Polynomial::to_term_list).collect(),
            ball_bound: k.ball_bound,
        }
    }
}

impl SemialgebraicSet {
    pub fn new(nvars: usize, constraints: Vec<Polynomial>, ball_bound: Option<f64>) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::InvalidArgument(
                "a semi-algebraic set needs at least one constraint; use whole_space for R^n".into(),
            ));
        }
        Self::build(nvars, constraints, ball_bound)
    }

    /// `R^n`, the unconstrained case (`m = 0`).
    pub fn whole_space(nvars: usize) -> Self {
        SemialgebraicSet { nvars, constraints: Vec::new(), ball_bound: None }
    }

    fn build(nvars: usize, constraints: Vec<Polynomial>, ball_bound: Option<f64>) -> Result<Self> {
        if nvars == 0 {
            return Err(Error::InvalidArgument("need at least one variable".into()));
        }
        for g in &constraints {
            if g.nvars() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: g.nvars() });
            }
        }
        if let Some(m) = ball_bound {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidArgument(format!("ball bound must be positive, got {m}")));
            }
        }
        Ok(SemialgebraicSet { nvars, constraints, ball_bound })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn ball_bound(&self) -> Option<f64> {
        self.ball_bound
    }

    /// `r_j = ceil(deg g_j / 2)`.
    pub fn half_degrees(&self) -> Vec<usize> {
        self.constraints.iter().map(|g| g.degree().div_ceil(2)).collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.nvars && self.constraints.iter().all(|g| g.eval_unchecked(x) >= -tol)
    }

    /// Smallest constraint value at `x`; `+inf` for `R^n`.
    pub fn min_constraint(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|g| g.eval_unchecked(x)).fold(f64::INFINITY, f64::min)
    }

    /// A box containing `K` when one can be read off the data: the ball bound,
    /// intersected with the bounding box of every concave quadratic
    /// constraint (an ellipsoid).
    pub fn bounding_box(&self) -> Option<Vec<(f64, f64)>> {
        let n = self.nvars;
        let mut bx: Option<Vec<(f64, f64)>> = self.ball_bound.map(|m| vec![(-m, m); n]);
        for g in &self.constraints {
            if let Some(b) = ellipsoid_box(g) {
                bx = Some(match bx {
                    None => b,
                    Some(cur) => cur.iter().zip(&b).map(|(&(l0, u0), &(l1, u1))| (l0.max(l1), u0.min(u1))).collect(),
                });
            }
        }
        bx
    }
}

// Box around { g >= 0 } for g = c + b^T x - x^T Q x with Q positive definite.
fn ellipsoid_box(g: &Polynomial) -> Option<Vec<(f64, f64)>> {
    if g.degree() != 2 {
        return None;
    }
    let n = g.nvars();
    let zero = vec![0.0; n];
    let q = g.hessian().eval(&zero).ok()?.scale(-0.5);
    let eig = q.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 1e-12) {
        return None;
    }
    let b = nalgebra::DVector::from_iterator(n, g.gradient().iter().map(|p| p.eval_unchecked(&zero)));
    let qinv = q.try_inverse()?;
    let center = &qinv * &b * 0.5;
    let gmax = g.eval_unchecked(center.as_slice());
    if gmax < 0.0 {
        return Some(vec![(0.0, 0.0); n]);
    }
    Some(
        (0..n)
            .map(|i| {
                let half = (gmax * qinv[(i, i)]).sqrt();
                (center[i] - half, center[i] + half)
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, terms: &[(&[u32], f64)]) -> Polynomial {
        Polynomial::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap()
    }

    #[test]
    fn basis_order_and_size() {
        let b = monomial_basis(2, 1);
        assert_eq!(b, vec![Monomial::new(vec![0, 0]), Monomial::new(vec![1, 0]), Monomial::new(vec![0, 1])]);
        assert_eq!(monomial_basis(2, 3).len(), 10);
        let b2 = monomial_basis(2, 2);
        assert_eq!(b2[3], Monomial::new(vec![2, 0]));
        assert_eq!(b2[4], Monomial::new(vec![1, 1]));
        assert_eq!(b2[5], Monomial::new(vec![0, 2]));
        // sorted consistently with Ord
        let mut sorted = b2.clone();
        sorted.sort();
        assert_eq!(sorted, b2);
    }

    #[test]
    fn grlex_index_matches_basis_position() {
        for n in 1..=4 {
            let basis = monomial_basis(n, 5);
            for (i, m) in basis.iter().enumerate() {
                assert_eq!(grlex_index(m), i, "{m}");
            }
        }
    }

    #[test]
    fn basis_size_by_enumeration() {
        // Stars-and-bars oracle: count exponent vectors with sum <= d directly.
        fn count(n: usize, d: usize) -> usize {
            if n == 0 {
                return 1;
            }
            (0..=d).map(|e| count(n - 1, d - e)).sum()
        }
        assert_eq!(count(4, 3), 35);
        assert_eq!(monomial_basis(4, 3).len(), 35);
        for n in 1..=6 {
            for d in 0..=6 {
                assert_eq!(monomial_basis(n, d).len(), count(n, d));
                assert_eq!(basis_size(n, d), binomial(n + d, d));
            }
        }
    }

    #[test]
    fn eval_examples() {
        let g1 = p(2, &[(&[1, 1], 1.0), (&[0, 0], -0.25)]);
        assert!((g1.eval(&[1.0, 1.0]).unwrap() - 0.75).abs() < 1e-15);
        let disk = p(2, &[(&[0, 0], 0.0), (&[2, 0], -1.0), (&[1, 0], 1.0), (&[0, 2], -1.0), (&[0, 1], 1.0)]);
        // 0.5 - (x1-0.5)^2 - (x2-0.5)^2 expands to x1 + x2 - x1^2 - x2^2
        assert!((disk.eval(&[0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
        let q = p(3, &[(&[0, 0, 0], 4.5), (&[1, 2, 0], 3.0)]);
        assert_eq!(q.eval(&[0.0, 0.0, 0.0]).unwrap(), 4.5);
        assert!(matches!(q.eval(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn differentiate_examples() {
        let xy = p(2, &[(&[1, 1], 1.0)]);
        let (g, h) = differentiate(&xy);
        assert_eq!(g[0], Polynomial::var(2, 1));
        assert_eq!(g[1], Polynomial::var(2, 0));
        assert_eq!(h.eval(&[3.0, -2.0]).unwrap(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(h.is_symmetric());

        let x4 = p(1, &[(&[4], 1.0)]);
        let (g, h) = differentiate(&x4);
        assert_eq!(g[0], p(1, &[(&[3], 4.0)]));
        assert_eq!(*h.get(0, 0), p(1, &[(&[2], 12.0)]));

        let c = Polynomial::constant(2, 3.0);
        let (g, h) = differentiate(&c);
        assert!(g.iter().all(Polynomial::is_zero));
        assert!(h.get(0, 1).is_zero() && h.get(1, 1).is_zero());
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta(1, 1), p(1, &[(&[0], 1.0), (&[2], 1.0)]));
        for n in 1..4 {
            for r in 1..4 {
                assert_eq!(theta(n, r).eval(&vec![0.0; n]).unwrap(), 1.0);
            }
        }
        let f = p(1, &[(&[2], 1.0)]);
        let got = theta_perturbation(&f, 0.1, 2).unwrap();
        // deg f = 2 gives r0 = 2, so both terms are theta_2 = 1 + X^2 + X^4/2.
        let want = p(1, &[(&[2], 1.2), (&[0], 0.2), (&[4], 0.1)]);
        assert!((&got - &want).l1_norm() < 1e-14);
        assert!(theta_perturbation(&f, 0.1, 1).is_err());
        assert!(theta_perturbation(&f, 0.0, 3).is_err());
    }

    #[test]
    fn averaged_hessian_examples() {
        let x2 = p(1, &[(&[2], 1.0)]);
        let f = averaged_hessian_remainder(&x2, &[0.0]).unwrap();
        assert_eq!(*f.get(0, 0), Polynomial::constant(1, 1.0));
        let rec = taylor_reconstruction(&x2, &[0.0], &f).unwrap();
        assert!((&rec - &x2).l1_norm() < 1e-14);

        // int_0^1 int_0^t 6 s X ds dt = X
        let x3 = p(1, &[(&[3], 1.0)]);
        let f = averaged_hessian_remainder(&x3, &[0.0]).unwrap();
        assert!((f.get(0, 0) - &Polynomial::var(1, 0)).l1_norm() < 1e-14);
        let rec = taylor_reconstruction(&x3, &[0.0], &f).unwrap();
        assert!((&rec - &x3).l1_norm() < 1e-14);

        let lin = p(2, &[(&[1, 0], 2.0), (&[0, 1], -1.0), (&[0, 0], 3.0)]);
        let f = averaged_hessian_remainder(&lin, &[0.3, 0.7]).unwrap();
        assert!((0..2).all(|i| (0..2).all(|j| f.get(i, j).is_zero())));
    }

    #[test]
    fn compose_and_embed() {
        let t2 = p(1, &[(&[2], 1.0)]);
        let g = p(2, &[(&[1, 0], 1.0), (&[0, 1], 1.0)]);
        let c = t2.compose_univariate(&g).unwrap();
        assert_eq!(c, p(2, &[(&[2, 0], 1.0), (&[1, 1], 2.0), (&[0, 2], 1.0)]));
        let e = g.embed(4, 2);
        assert_eq!(e, p(4, &[(&[0, 0, 1, 0], 1.0), (&[0, 0, 0, 1], 1.0)]));
    }

    #[test]
    fn term_list_rejects_duplicates() {
        let terms = vec![Term { exponents: vec![1, 0], coeff: 1.0 }, Term { exponents: vec![1, 0], coeff: 2.0 }];
        assert!(matches!(Polynomial::from_term_list(2, &terms), Err(Error::Parse(_))));
        let ok = Polynomial::from_term_list(2, &terms[..1]).unwrap();
        assert_eq!(Polynomial::from_term_list(2, &ok.to_term_list()).unwrap(), ok);
    }

    #[test]
    fn set_validation_and_box() {
        let disk = p(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], -1.0)]);
        assert!(SemialgebraicSet::new(2, vec![], None).is_err());
        assert!(SemialgebraicSet::new(2, vec![disk.clone()], Some(0.0)).is_err());
        assert!(SemialgebraicSet::new(3, vec![disk.clone()], None).is_err());
        let k = SemialgebraicSet::new(2, vec![disk], None).unwrap();
        let b = k.bounding_box().unwrap();
        for (l, u) in b {
            assert!((l + 1.0).abs() < 1e-12 && (u - 1.0).abs() < 1e-12);
        }
        assert_eq!(k.half_degrees(), vec![1]);
    }
}
