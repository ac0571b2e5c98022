//! Dense multivariate polynomials in graded-lexicographic monomial order.
//!
//! For `m` variables the coefficient list enumerates monomials by total degree,
//! and within a degree lexicographically with the first variable leading:
//! `1, x1, .., xm, x1², x1x2, .., x1xm, x2², ..`. The degree is inferred from
//! the coefficient count, which must equal `C(m + d, d)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    n_vars: usize,
    coeffs: Vec<f64>,
    exponents: Vec<Vec<u32>>,
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Exponent vectors of all monomials of total degree `d` in `m` variables,
/// lexicographic with the first variable leading.
fn monomials_of_degree(m: usize, d: u32) -> Vec<Vec<u32>> {
    if m == 0 {
        return if d == 0 { vec![vec![]] } else { vec![] };
    }
    if m == 1 {
        return vec![vec![d]];
    }
    let mut out = Vec::new();
    for first in (0..=d).rev() {
        for mut rest in monomials_of_degree(m - 1, d - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

impl Poly {
    pub fn new(n_vars: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("empty polynomial coefficient list".into()));
        }
        let mut degree = None;
        if n_vars == 0 {
            if coeffs.len() == 1 {
                degree = Some(0);
            }
        } else {
            for d in 0..=64usize {
                let count = binomial(n_vars + d, d);
                if count == coeffs.len() {
                    degree = Some(d as u32);
                    break;
                }
                if count > coeffs.len() {
                    break;
                }
            }
        }
        let degree = degree.ok_or_else(|| {
            Error::InvalidInput(format!(
                "{} coefficients do not form a complete polynomial in {} variables",
                coeffs.len(),
                n_vars
            ))
        })?;
        let exponents = (0..=degree).flat_map(|d| monomials_of_degree(n_vars, d)).collect();
        Ok(Poly { n_vars, coeffs, exponents })
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        Poly { n_vars, coeffs: vec![c], exponents: vec![vec![0; n_vars]] }
    }

    /// The polynomial plus a constant.
    pub fn add_constant(&self, c: f64) -> Poly {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> u32 {
        self.exponents.last().map(|e| e.iter().sum()).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_vars);
        self.coeffs
            .iter()
            .zip(&self.exponents)
            .map(|(c, e)| c * e.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product::<f64>())
            .sum()
    }

    /// Collapse all variables except `var` at the point `x`, returning the
    /// coefficients of the univariate polynomial in `x[var]` (ascending powers).
    pub fn restrict(&self, x: &[f64], var: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.degree() as usize + 1];
        for (c, e) in self.coeffs.iter().zip(&self.exponents) {
            let rest: f64 = e
                .iter()
                .zip(x)
                .enumerate()
                .filter(|(i, _)| *i != var)
                .map(|(_, (&p, &xi))| xi.powi(p as i32))
                .product();
            out[e[var] as usize] += c * rest;
        }
        out
    }

    /// Upper bound of `|p|` on the box `∏ [lo_i, hi_i]` by interval evaluation.
    pub fn abs_bound_on_box(&self, bounds: &[[f64; 2]]) -> f64 {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (c, e) in self.coeffs.iter().zip(&self.exponents) {
            let (mut mlo, mut mhi) = (1.0, 1.0);
            for (&p, b) in e.iter().zip(bounds) {
                let (plo, phi) = interval_pow(b[0], b[1], p);
                let cands = [mlo * plo, mlo * phi, mhi * plo, mhi * phi];
                mlo = cands.iter().cloned().fold(f64::INFINITY, f64::min);
                mhi = cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
            let (tlo, thi) = if *c >= 0.0 { (c * mlo, c * mhi) } else { (c * mhi, c * mlo) };
            lo += tlo;
            hi += thi;
        }
        f64::max(lo.abs(), hi.abs())
    }

    /// Upper bound of `|p|` on the complex polydisc neighbourhood
    /// `{ |y_i - x_i| < r, x ∈ box }`, via `Σ |c_α| ∏ (max|x_i| + r)^α_i`.
    pub fn abs_bound_complex(&self, bounds: &[[f64; 2]], r: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.exponents)
            .map(|(c, e)| {
                c.abs()
                    * e.iter()
                        .zip(bounds)
                        .map(|(&p, b)| (b[0].abs().max(b[1].abs()) + r).powi(p as i32))
                        .product::<f64>()
            })
            .sum()
    }
}

fn interval_pow(lo: f64, hi: f64, p: u32) -> (f64, f64) {
    if p == 0 {
        return (1.0, 1.0);
    }
    let a = lo.powi(p as i32);
    let b = hi.powi(p as i32);
    if p % 2 == 1 {
        (a, b)
    } else if lo <= 0.0 && hi >= 0.0 {
        (0.0, a.max(b))
    } else {
        (a.min(b), a.max(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn graded_lex_order_two_vars() {
        // 1 + 2x + 3y + 4x² + 5xy + 6y²
        let p = Poly::new(2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(p.degree(), 2);
        let (x, y) = (0.3, -1.7);
        let expect = 1.0 + 2.0 * x + 3.0 * y + 4.0 * x * x + 5.0 * x * y + 6.0 * y * y;
        assert_relative_eq!(p.eval(&[x, y]), expect, max_relative = 1e-15);
    }

    #[test]
    fn rejects_incomplete_lists() {
        assert!(Poly::new(2, vec![1.0, 2.0]).is_err());
        assert!(Poly::new(0, vec![1.0, 2.0]).is_err());
        assert!(Poly::new(1, vec![]).is_err());
    }

    #[test]
    fn restrict_collapses_other_variables() {
        let p = Poly::new(2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let x = 0.5;
        let u = p.restrict(&[x, 0.0], 1);
        assert_relative_eq!(u[0], 1.0 + 2.0 * x + 4.0 * x * x);
        assert_relative_eq!(u[1], 3.0 + 5.0 * x);
        assert_relative_eq!(u[2], 6.0);
    }

    #[test]
    fn interval_bound_encloses_samples() {
        let p = Poly::new(2, vec![0.1, -1.0, 0.5, 2.0, -0.3, 0.7]).unwrap();
        let b = [[-1.0, 0.5], [0.2, 1.3]];
        let bound = p.abs_bound_on_box(&b);
        for i in 0..=20 {
            for j in 0..=20 {
                let x = b[0][0] + (b[0][1] - b[0][0]) * i as f64 / 20.0;
                let y = b[1][0] + (b[1][1] - b[1][0]) * j as f64 / 20.0;
                assert!(p.eval(&[x, y]).abs() <= bound + 1e-14);
            }
        }
        assert!(p.abs_bound_complex(&b, 0.1) >= bound);
    }
}
