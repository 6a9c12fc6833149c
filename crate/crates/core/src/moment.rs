//! Truncated pseudo-moment sequences and the matrices built from them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::polyalg::{basis_size, grlex_index, monomial_basis, Monomial, Polynomial};
use crate::sdp::numeric_rank;
use crate::{Error, Result};

/// Default relative eigenvalue threshold for rank decisions.
pub const DEFAULT_RANK_TAU: f64 = 1e-6;

/// Where a moment vector came from. Interior-point solutions sit at the
/// analytic center of the optimal face, so their moment matrices have
/// maximal rank and a failed rank test says little.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    Exact,
    InteriorPoint,
}

/// Pseudo-moments `y_alpha` for all `|alpha| <= 2 * order`, in graded-lex
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMoments")]
pub struct MomentVector {
    n: usize,
    order: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMoments {
    n: usize,
    order: usize,
    values: Vec<f64>,
}

impl TryFrom<RawMoments> for MomentVector {
    type Error = Error;

    fn try_from(raw: RawMoments) -> Result<Self> {
        MomentVector::new(raw.n, raw.order, raw.values)
    }
}

impl MomentVector {
    pub fn new(n: usize, order: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("moment vector needs n >= 1".into()));
        }
        let expected = basis_size(n, 2 * order);
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("moment values must be finite".into()));
        }
        Ok(Self { n, order, values })
    }

    /// Moments of the point mass at `point`.
    pub fn dirac(point: &[f64], order: usize) -> Result<Self> {
        Self::from_atoms(&[1.0], &[point.to_vec()], order)
    }

    /// Moments of the atomic measure `sum_k weights[k] * delta(points[k])`.
    pub fn from_atoms(weights: &[f64], points: &[Vec<f64>], order: usize) -> Result<Self> {
        if weights.len() != points.len() || points.is_empty() {
            return Err(Error::InvalidArgument("need one weight per atom and at least one atom".into()));
        }
        let n = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
        let basis = monomial_basis(n, 2 * order);
        let values = basis.iter().map(|m| weights.iter().zip(points).map(|(w, p)| w * m.eval(p)).sum()).collect();
        Self::new(n, order, values)
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn y0(&self) -> f64 {
        self.values[0]
    }

    pub fn get(&self, m: &Monomial) -> Result<f64> {
        self.check_vars(m.nvars())?;
        self.check_degree(m.degree())?;
        Ok(self.values[grlex_index(m)])
    }

    /// The Riesz functional `L_y(p) = sum_alpha p_alpha y_alpha`.
    pub fn riesz(&self, p: &Polynomial) -> Result<f64> {
        self.check_vars(p.nvars())?;
        self.check_degree(p.degree())?;
        Ok(p.terms().map(|(m, c)| c * self.values[grlex_index(m)]).sum())
    }

    /// `M_d(y)` indexed by `monomial_basis(n, d)`.
    pub fn moment_matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        self.localizing_matrix(&Polynomial::constant(self.n, 1.0), d)
    }

    /// `M_d(g y)` with entries `L_y(g X^(alpha + beta))`.
    pub fn localizing_matrix(&self, g: &Polynomial, d: usize) -> Result<DMatrix<f64>> {
        self.check_vars(g.nvars())?;
        self.check_degree(2 * d + g.degree())?;
        let basis = monomial_basis(self.n, d);
        let s = basis.len();
        let mut m = DMatrix::zeros(s, s);
        for i in 0..s {
            for j in i..s {
                let ab = basis[i].mul(&basis[j]);
                let v: f64 = g.terms().map(|(gm, c)| c * self.values[grlex_index(&ab.mul(gm))]).sum();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Rank test `rank M_d(y) == rank M_(d-1)(y)`.
    pub fn flatness(&self, d: usize, tau: f64, source: MomentSource) -> Result<FlatnessReport> {
        if d == 0 {
            return Err(Error::InvalidArgument("flatness needs d >= 1".into()));
        }
        let md = self.moment_matrix(d)?;
        let rank_d = numeric_rank(&md, tau)?;
        let s = basis_size(self.n, d - 1);
        let rank_dm1 = numeric_rank(&md.view((0, 0), (s, s)).into_owned(), tau)?;
        Ok(FlatnessReport {
            d,
            rank_d,
            rank_dm1,
            flat: rank_d == rank_dm1,
            interior_point_caveat: source == MomentSource::InteriorPoint,
        })
    }

    /// First-order moments `(L_y(X_1), ..., L_y(X_n))`.
    pub fn mean_point(&self) -> Result<Vec<f64>> {
        if self.order == 0 {
            return Err(Error::Precondition("mean point needs order >= 1".into()));
        }
        if (self.y0() - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("y0 = {} is not 1", self.y0())));
        }
        Ok(self.values[1..=self.n].to_vec())
    }

    /// Keep only the moments of degree `<= 2 * order`.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        self.check_degree(2 * order)?;
        let len = basis_size(self.n, 2 * order);
        Self::new(self.n, order, self.values[..len].to_vec())
    }

    fn check_vars(&self, n: usize) -> Result<()> {
        if n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: n });
        }
        Ok(())
    }

    fn check_degree(&self, degree: usize) -> Result<()> {
        if degree > 2 * self.order {
            return Err(Error::DegreeOverflow { degree, bound: 2 * self.order });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub d: usize,
    pub rank_d: usize,
    pub rank_dm1: usize,
    pub flat: bool,
    /// Set whenever the moments came from an interior-point solve.
    pub interior_point_caveat: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn poly(n: usize, terms: &[(&[u32], f64)]) -> Polynomial {
        Polynomial::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap()
    }

    #[test]
    fn riesz_on_dirac() {
        let y = MomentVector::dirac(&[1.0, 2.0], 1).unwrap();
        assert_abs_diff_eq!(y.riesz(&poly(2, &[(&[1, 1], 1.0)])).unwrap(), 2.0);
        assert_abs_diff_eq!(y.riesz(&Polynomial::constant(2, 1.0)).unwrap(), y.y0());
        assert!(matches!(y.riesz(&poly(2, &[(&[3, 0], 1.0)])), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn riesz_two_point_law() {
        let y = MomentVector::new(1, 1, vec![1.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(y.riesz(&poly(1, &[(&[2], 1.0)])).unwrap(), 1.0);
        let mix = MomentVector::from_atoms(&[0.5, 0.5], &[vec![-1.0], vec![1.0]], 1).unwrap();
        assert_eq!(mix, y);
    }

    #[test]
    fn moment_matrix_small() {
        let y = MomentVector::new(1, 1, vec![1.0, 0.3, 0.7]).unwrap();
        let m = y.moment_matrix(1).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.7]));
        let d = MomentVector::dirac(&[1.0], 1).unwrap().moment_matrix(1).unwrap();
        assert_eq!(d, DMatrix::from_element(2, 2, 1.0));
        let y2 = MomentVector::dirac(&[0.1, 0.2], 3).unwrap();
        assert_eq!(y2.moment_matrix(3).unwrap().nrows(), 10);
        assert!(y2.moment_matrix(4).is_err());
    }

    #[test]
    fn localizing_definitions() {
        let y = MomentVector::new(1, 1, vec![1.0, 0.2, 0.6]).unwrap();
        let g = poly(1, &[(&[0], 1.0), (&[2], -1.0)]);
        let l = y.localizing_matrix(&g, 0).unwrap();
        assert_abs_diff_eq!(l[(0, 0)], 0.4, epsilon = 1e-15);
        assert!(y.localizing_matrix(&g, 1).is_err());

        let y = MomentVector::dirac(&[0.3, -0.4], 2).unwrap();
        let one = Polynomial::constant(2, 1.0);
        assert_eq!(y.localizing_matrix(&one, 2).unwrap(), y.moment_matrix(2).unwrap());
    }

    #[test]
    fn localizing_on_dirac_is_scaled_outer_product() {
        let x = [0.6, 0.7];
        let y = MomentVector::dirac(&x, 2).unwrap();
        let g = poly(2, &[(&[1, 1], 1.0), (&[0, 0], -0.25)]);
        let gx = g.eval(&x).unwrap();
        let v: Vec<f64> = monomial_basis(2, 1).iter().map(|m| m.eval(&x)).collect();
        let l = y.localizing_matrix(&g, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(l[(i, j)], gx * v[i] * v[j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn flatness_on_atoms() {
        let y = MomentVector::dirac(&[0.4, -1.1], 3).unwrap();
        for d in 1..=3 {
            let r = y.flatness(d, DEFAULT_RANK_TAU, MomentSource::Exact).unwrap();
            assert_eq!((r.rank_d, r.rank_dm1, r.flat), (1, 1, true));
            assert!(!r.interior_point_caveat);
        }
        let two = MomentVector::from_atoms(&[0.5, 0.5], &[vec![-1.0], vec![2.0]], 2).unwrap();
        let r = two.flatness(2, DEFAULT_RANK_TAU, MomentSource::InteriorPoint).unwrap();
        assert_eq!((r.rank_d, r.rank_dm1, r.flat), (2, 2, true));
        assert!(r.interior_point_caveat);
    }

    #[test]
    fn mean_point_cases() {
        let y = MomentVector::dirac(&[0.3, -0.2], 1).unwrap();
        let m = y.mean_point().unwrap();
        assert_abs_diff_eq!(m[0], 0.3);
        assert_abs_diff_eq!(m[1], -0.2);
        let mix = MomentVector::from_atoms(&[0.5, 0.5], &[vec![0.0], vec![2.0]], 1).unwrap();
        assert_abs_diff_eq!(mix.mean_point().unwrap()[0], 1.0);
        let bad = MomentVector::new(1, 1, vec![2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(bad.mean_point(), Err(Error::Precondition(_))));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let y = MomentVector::new(1, 2, vec![1.0, 0.0, 1.0, 0.0, 3.0]).unwrap();
        let s = serde_json::to_string(&y).unwrap();
        assert_eq!(s, r#"{"n":1,"order":2,"values":[1.0,0.0,1.0,0.0,3.0]}"#);
        let back: MomentVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, y);
        assert!(serde_json::from_str::<MomentVector>(r#"{"n":1,"order":2,"values":[1.0]}"#).is_err());
    }
}
