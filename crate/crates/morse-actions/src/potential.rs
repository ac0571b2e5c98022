//! Parameter-dependent periodic potentials given as finite Fourier series.
//!
//! `F(θ; p) = Σ_{k=1}^{K} c_k(p) cos kθ + s_k(p) sin kθ` where every `c_k`, `s_k`
//! is a polynomial in the parameter vector `p ∈ ℝ^{n_params}`. There is no
//! constant term.

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::trig::TrigSeries;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct FourierPotential {
    n_params: usize,
    cos: Vec<Poly>,
    sin: Vec<Poly>,
    s0: f64,
    param_box: Vec<[f64; 2]>,
}

/// A point of the parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint(pub Vec<f64>);

impl ParamPoint {
    pub fn empty() -> Self {
        ParamPoint(Vec::new())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParamPoint {
    fn from(v: Vec<f64>) -> Self {
        ParamPoint(v)
    }
}

/// On-disk form of a [`FourierPotential`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    #[serde(rename = "K")]
    pub k: usize,
    pub n_params: usize,
    pub cos: Vec<Vec<f64>>,
    pub sin: Vec<Vec<f64>>,
    pub s0: f64,
    pub param_box: Vec<[f64; 2]>,
}

impl FourierPotential {
    pub fn new(
        n_params: usize,
        cos: Vec<Poly>,
        sin: Vec<Poly>,
        s0: f64,
        param_box: Vec<[f64; 2]>,
    ) -> Result<Self> {
        if cos.len() != sin.len() {
            return Err(Error::InvalidInput(format!(
                "{} cosine and {} sine harmonics",
                cos.len(),
                sin.len()
            )));
        }
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::InvalidInput(format!("s0 must be positive, got {s0}")));
        }
        if param_box.len() != n_params {
            return Err(Error::InvalidInput(format!(
                "param_box has {} intervals for {} parameters",
                param_box.len(),
                n_params
            )));
        }
        if let Some(b) = param_box.iter().find(|b| !(b[0] <= b[1])) {
            return Err(Error::InvalidInput(format!("empty parameter interval {b:?}")));
        }
        if let Some(p) = cos.iter().chain(&sin).find(|p| p.n_vars() != n_params) {
            return Err(Error::InvalidInput(format!(
                "coefficient polynomial in {} variables, expected {}",
                p.n_vars(),
                n_params
            )));
        }
        Ok(FourierPotential { n_params, cos, sin, s0, param_box })
    }

    /// Parameter-free potential with constant coefficients.
    pub fn from_series(series: &TrigSeries, s0: f64) -> Result<Self> {
        let cos = series.cos.iter().map(|&c| Poly::constant(0, c)).collect();
        let sin = series.sin.iter().map(|&c| Poly::constant(0, c)).collect();
        FourierPotential::new(0, cos, sin, s0, Vec::new())
    }

    /// `-η cos θ` with analyticity width `s0`.
    pub fn cosine(eta: f64, s0: f64) -> Self {
        FourierPotential::from_series(&TrigSeries::cosine(eta), s0)
            .expect("cosine potential is valid")
    }

    pub fn from_spec(spec: &PotentialSpec) -> Result<Self> {
        if spec.cos.len() != spec.k {
            return Err(Error::Schema {
                field: "cos".into(),
                message: format!("expected {} harmonics, found {}", spec.k, spec.cos.len()),
            });
        }
        if spec.sin.len() != spec.k {
            return Err(Error::Schema {
                field: "sin".into(),
                message: format!("expected {} harmonics, found {}", spec.k, spec.sin.len()),
            });
        }
        let polys = |field: &str, list: &[Vec<f64>]| -> Result<Vec<Poly>> {
            list.iter()
                .map(|c| {
                    Poly::new(spec.n_params, c.clone()).map_err(|e| Error::Schema {
                        field: field.into(),
                        message: e.to_string(),
                    })
                })
                .collect()
        };
        let cos = polys("cos", &spec.cos)?;
        let sin = polys("sin", &spec.sin)?;
        if spec.param_box.len() != spec.n_params {
            return Err(Error::Schema {
                field: "param_box".into(),
                message: format!("expected {} intervals, found {}", spec.n_params, spec.param_box.len()),
            });
        }
        FourierPotential::new(spec.n_params, cos, sin, spec.s0, spec.param_box.clone())
            .map_err(|e| Error::Schema { field: "s0".into(), message: e.to_string() })
    }

    pub fn to_spec(&self) -> PotentialSpec {
        PotentialSpec {
            k: self.harmonics(),
            n_params: self.n_params,
            cos: self.cos.iter().map(|p| p.coeffs().to_vec()).collect(),
            sin: self.sin.iter().map(|p| p.coeffs().to_vec()).collect(),
            s0: self.s0,
            param_box: self.param_box.clone(),
        }
    }

    pub fn harmonics(&self) -> usize {
        self.cos.len()
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn param_box(&self) -> &[[f64; 2]] {
        &self.param_box
    }

    /// Center of the parameter box.
    pub fn center(&self) -> ParamPoint {
        ParamPoint(self.param_box.iter().map(|b| 0.5 * (b[0] + b[1])).collect())
    }

    pub fn check_point(&self, p: &ParamPoint) -> Result<()> {
        if p.0.len() != self.n_params {
            return Err(Error::ParamDimension { expected: self.n_params, got: p.0.len() });
        }
        let inside = p.0.iter().zip(&self.param_box).all(|(x, b)| {
            let slack = 1e-12 * (1.0 + b[0].abs().max(b[1].abs()));
            *x >= b[0] - slack && *x <= b[1] + slack
        });
        if inside {
            Ok(())
        } else {
            Err(Error::ParamOutOfBox { point: p.0.clone() })
        }
    }

    /// The fixed-parameter series `θ ↦ F(θ; p)`.
    pub fn at(&self, p: &ParamPoint) -> Result<TrigSeries> {
        self.check_point(p)?;
        Ok(self.at_unchecked(&p.0))
    }

    /// As [`FourierPotential::at`] without the box check, for difference
    /// stencils that step slightly outside the box.
    pub fn at_unchecked(&self, p: &[f64]) -> TrigSeries {
        TrigSeries::new(
            0.0,
            self.cos.iter().map(|c| c.eval(p)).collect(),
            self.sin.iter().map(|c| c.eval(p)).collect(),
        )
    }

    /// The potential `F + η cos θ`, i.e. the difference to `-η cos θ`.
    pub fn plus_cosine(&self, eta: f64) -> FourierPotential {
        let mut out = self.clone();
        if out.cos.is_empty() {
            out.cos.push(Poly::constant(self.n_params, 0.0));
            out.sin.push(Poly::constant(self.n_params, 0.0));
        }
        out.cos[0] = out.cos[0].add_constant(eta);
        out
    }

    /// `∂^order_θ F(θ; p)` for `order ≤ 3`.
    pub fn eval(&self, theta: f64, p: &ParamPoint, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::InvalidInput(format!("derivative order {order} exceeds 3")));
        }
        Ok(self.at(p)?.deriv(theta, order))
    }

    /// `sup_k |f_k(p)| e^{k s}` at a parameter point.
    pub fn sup_fourier_norm(&self, s: f64, p: &ParamPoint) -> Result<f64> {
        if s > self.s0 {
            return Err(Error::WidthExceedsAnalyticity { width: s, s0: self.s0 });
        }
        Ok(self.at(p)?.sup_fourier_norm(s))
    }

    /// `sup_k |f_k| e^{k s}` over the whole parameter box, with the
    /// coefficient polynomials bounded by interval arithmetic.
    pub fn sup_fourier_norm_box(&self, s: f64) -> Result<f64> {
        if s > self.s0 {
            return Err(Error::WidthExceedsAnalyticity { width: s, s0: self.s0 });
        }
        Ok(self
            .cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(k, (c, sn))| {
                let a = c.abs_bound_on_box(&self.param_box);
                let b = sn.abs_bound_on_box(&self.param_box);
                0.5 * a.hypot(b) * ((k + 1) as f64 * s).exp()
            })
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn two_param() -> FourierPotential {
        // cos: -(1 + 0.1 p1), sin: 0.05 p2 ; second harmonic 0.1 p1 p2 cos 2θ
        let c1 = Poly::new(2, vec![-1.0, -0.1, 0.0]).unwrap();
        let s1 = Poly::new(2, vec![0.0, 0.0, 0.05]).unwrap();
        let c2 = Poly::new(2, vec![0.0, 0.0, 0.0, 0.0, 0.1, 0.0]).unwrap();
        let s2 = Poly::constant(2, 0.0);
        FourierPotential::new(2, vec![c1, c2], vec![s1, s2], 1.0, vec![[-1.0, 1.0], [-1.0, 1.0]])
            .unwrap()
    }

    #[test]
    fn cosine_examples() {
        let f = FourierPotential::cosine(1.0, 1.0);
        let p = ParamPoint::empty();
        assert_relative_eq!(f.eval(0.0, &p, 0).unwrap(), -1.0);
        assert_relative_eq!(f.eval(PI / 2.0, &p, 1).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(f.sup_fourier_norm(0.0, &p).unwrap(), 0.5);
        assert!(matches!(
            f.sup_fourier_norm(2.0, &p),
            Err(Error::WidthExceedsAnalyticity { .. })
        ));
    }

    #[test]
    fn parameter_checks() {
        let f = two_param();
        assert!(matches!(
            f.at(&ParamPoint(vec![2.0, 0.0])),
            Err(Error::ParamOutOfBox { .. })
        ));
        assert!(matches!(f.at(&ParamPoint(vec![0.0])), Err(Error::ParamDimension { .. })));
        let g = f.at(&ParamPoint(vec![0.5, -0.5])).unwrap();
        assert_relative_eq!(g.cos[0], -1.05);
        assert_relative_eq!(g.sin[0], -0.025);
        assert_relative_eq!(g.cos[1], -0.025);
    }

    #[test]
    fn box_norm_dominates_pointwise_norm() {
        let f = two_param();
        let b = f.sup_fourier_norm_box(0.5).unwrap();
        for p in [[-1.0, -1.0], [1.0, 1.0], [0.3, -0.8]] {
            assert!(f.sup_fourier_norm(0.5, &ParamPoint(p.to_vec())).unwrap() <= b + 1e-15);
        }
    }

    #[test]
    fn spec_round_trip() {
        let f = two_param();
        let back = FourierPotential::from_spec(&f.to_spec()).unwrap();
        assert_eq!(f, back);
    }
}
