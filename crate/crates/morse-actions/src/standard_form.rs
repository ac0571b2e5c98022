//! Normalisation of `H* = Pₙ² + G(p̂, Pₙ, Qₙ)` into the standard form
//! `Ĥ = (1 + b)(pₙ - P*)² + G_m(p̂, qₙ)`.
//!
//! At a fixed parameter slice `p̂` the map is
//!
//! ```text
//! Pₙ = pₙ + a*(p̂, qₙ),   Qₙ = qₙ,   P̂ = p̂,   Q̂ = q̂ + b*(p̂, qₙ)
//! ```
//!
//! where `𝙿 = P* + a*` is the fixed point of `𝙿 = -½ ∂_{Pₙ} G(p̂, 𝙿, qₙ)`,
//! `a* = ∂_{qₙ} φ` with `⟨φ⟩ = 0`, and `b* = -∂_{p̂} φ`.

use crate::actions::Kinetic;
use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::potential::{FourierPotential, ParamPoint, PotentialSpec};
use crate::quadrature::GaussLegendre;
use crate::report::BoundCheck;
use crate::trig::TrigSeries;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const GRID: usize = 128;

/// Perturbation `f(p̂, Pₙ, Qₙ)` as a Fourier series in `Qₙ` whose
/// coefficients (including the mean) are polynomials in `(p̂, Pₙ)`, with
/// `Pₙ` the last variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    n_vars: usize,
    mean: Poly,
    cos: Vec<Poly>,
    sin: Vec<Poly>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(rename = "K")]
    pub k: usize,
    pub mean: Vec<f64>,
    pub cos: Vec<Vec<f64>>,
    pub sin: Vec<Vec<f64>>,
}

impl Perturbation {
    pub fn new(n_vars: usize, mean: Poly, cos: Vec<Poly>, sin: Vec<Poly>) -> Result<Self> {
        if cos.len() != sin.len() {
            return Err(Error::Schema {
                field: "perturbation.sin".into(),
                message: format!("expected {} harmonics, found {}", cos.len(), sin.len()),
            });
        }
        for (i, p) in std::iter::once(&mean).chain(&cos).chain(&sin).enumerate() {
            if p.n_vars() != n_vars {
                return Err(Error::Schema {
                    field: format!("perturbation coefficient {i}"),
                    message: format!("polynomial in {} variables, expected {n_vars}", p.n_vars()),
                });
            }
        }
        Ok(Perturbation { n_vars, mean, cos, sin })
    }

    /// `Pₙ · g(Qₙ)` with `g` independent of `p̂`.
    pub fn momentum_linear(n_params: usize, g: &TrigSeries) -> Self {
        let nv = n_params + 1;
        // the monomial list of degree one is `x1, .., x_nv`, so Pₙ is last
        let linear = |c: f64| {
            let mut coeffs = vec![0.0; nv + 1];
            coeffs[nv] = c;
            Poly::new(nv, coeffs).expect("complete degree-one list")
        };
        Perturbation {
            n_vars: nv,
            mean: linear(g.mean),
            cos: g.cos.iter().map(|&c| linear(c)).collect(),
            sin: g.sin.iter().map(|&c| linear(c)).collect(),
        }
    }

    pub fn from_spec(spec: &PerturbationSpec, n_params: usize) -> Result<Self> {
        let nv = n_params + 1;
        if spec.cos.len() != spec.k {
            return Err(Error::Schema {
                field: "perturbation.cos".into(),
                message: format!("expected K = {} rows, found {}", spec.k, spec.cos.len()),
            });
        }
        let poly = |field: String, c: &Vec<f64>| {
            Poly::new(nv, c.clone()).map_err(|e| Error::Schema { field, message: e.to_string() })
        };
        let mean = poly("perturbation.mean".into(), &spec.mean)?;
        let cos = spec
            .cos
            .iter()
            .enumerate()
            .map(|(k, c)| poly(format!("perturbation.cos[{k}]"), c))
            .collect::<Result<Vec<_>>>()?;
        let sin = spec
            .sin
            .iter()
            .enumerate()
            .map(|(k, c)| poly(format!("perturbation.sin[{k}]"), c))
            .collect::<Result<Vec<_>>>()?;
        Perturbation::new(nv, mean, cos, sin)
    }

    pub fn to_spec(&self) -> PerturbationSpec {
        PerturbationSpec {
            k: self.cos.len(),
            mean: self.mean.coeffs().to_vec(),
            cos: self.cos.iter().map(|p| p.coeffs().to_vec()).collect(),
            sin: self.sin.iter().map(|p| p.coeffs().to_vec()).collect(),
        }
    }

    /// Series `T_d(q)` with `f(p̂, Pₙ, q) = Σ_d Pₙ^d T_d(q)`.
    fn momentum_expansion(&self, p: &[f64]) -> Vec<TrigSeries> {
        let mut x = p.to_vec();
        x.push(0.0);
        let var = self.n_vars - 1;
        let mean = self.mean.restrict(&x, var);
        let cos: Vec<Vec<f64>> = self.cos.iter().map(|c| c.restrict(&x, var)).collect();
        let sin: Vec<Vec<f64>> = self.sin.iter().map(|c| c.restrict(&x, var)).collect();
        let degree = std::iter::once(&mean).chain(&cos).chain(&sin).map(|v| v.len()).max().unwrap_or(1);
        (0..degree)
            .map(|d| {
                let at = |v: &Vec<f64>| v.get(d).copied().unwrap_or(0.0);
                TrigSeries::new(at(&mean), cos.iter().map(at).collect(), sin.iter().map(at).collect())
            })
            .collect()
    }

    /// Bound of `|f|` over `|Im q| ≤ s`, `p̂` within complex distance `r` of
    /// the box and `|Pₙ| ≤ r`.
    fn complex_bound(&self, param_box: &[[f64; 2]], r: f64, s: f64) -> f64 {
        let mut bounds = param_box.to_vec();
        bounds.push([0.0, 0.0]);
        let mut total = self.mean.abs_bound_complex(&bounds, r);
        for (k, (c, sn)) in self.cos.iter().zip(&self.sin).enumerate() {
            let w = ((k + 1) as f64 * s).cosh();
            total += w * (c.abs_bound_complex(&bounds, r) + sn.abs_bound_complex(&bounds, r));
        }
        total
    }
}

/// `H* = Pₙ² + F̄(p̂, Qₙ) + η f(p̂, Pₙ, Qₙ)` with its radii.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedHamiltonian {
    pub base: FourierPotential,
    pub perturbation: Perturbation,
    pub eta: f64,
    pub r0: f64,
    pub r_big: f64,
    pub s_hat: Option<f64>,
    pub eta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbedSpec {
    pub base: PotentialSpec,
    pub perturbation: PerturbationSpec,
    pub eta: f64,
    pub r0: f64,
    #[serde(rename = "R0")]
    pub r_big: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta0: Option<f64>,
}

impl PerturbedHamiltonian {
    /// When `eta0` is absent it is replaced by a sup bound of `|G - F̄|`
    /// on the complex neighbourhood of width `s0` in `q` and radius `r0`
    /// in `(p̂, Pₙ)`.
    pub fn new(
        base: FourierPotential,
        perturbation: Perturbation,
        eta: f64,
        r0: f64,
        r_big: f64,
        s_hat: Option<f64>,
        eta0: Option<f64>,
    ) -> Result<Self> {
        if perturbation.n_vars != base.n_params() + 1 {
            return Err(Error::ParamDimension { expected: base.n_params() + 1, got: perturbation.n_vars });
        }
        for (name, v) in [("r0", r0), ("R0", r_big)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !eta.is_finite() {
            return Err(Error::InvalidInput(format!("eta must be finite, got {eta}")));
        }
        let eta0 = match eta0 {
            Some(e) if e >= 0.0 => e,
            Some(e) => return Err(Error::InvalidInput(format!("eta0 must be nonnegative, got {e}"))),
            None => eta.abs() * perturbation.complex_bound(base.param_box(), r0, base.s0()),
        };
        Ok(PerturbedHamiltonian { base, perturbation, eta, r0, r_big, s_hat, eta0 })
    }

    /// `-cos Q + ε Pₙ g(Q)`.
    pub fn momentum_linear(eps: f64, g: &TrigSeries, s0: f64, r0: f64, r_big: f64) -> Result<Self> {
        let base = FourierPotential::cosine(1.0, s0);
        let eta0 = eps.abs() * g.sup_fourier_norm(s0);
        PerturbedHamiltonian::new(base, Perturbation::momentum_linear(0, g), eps, r0, r_big, None, Some(eta0))
    }

    pub fn from_spec(spec: &PerturbedSpec) -> Result<Self> {
        let base = FourierPotential::from_spec(&spec.base)?;
        let perturbation = Perturbation::from_spec(&spec.perturbation, base.n_params())?;
        PerturbedHamiltonian::new(base, perturbation, spec.eta, spec.r0, spec.r_big, spec.s_hat, spec.eta0)
    }

    pub fn to_spec(&self) -> PerturbedSpec {
        PerturbedSpec {
            base: self.base.to_spec(),
            perturbation: self.perturbation.to_spec(),
            eta: self.eta,
            r0: self.r0,
            r_big: self.r_big,
            s_hat: self.s_hat,
            eta0: Some(self.eta0),
        }
    }

    pub fn s0(&self) -> f64 {
        self.base.s0()
    }

    /// Admissible size of the perturbation, `(r0²/64) min(s0/π, 1)`.
    pub fn eta0_limit(&self) -> f64 {
        self.r0 * self.r0 / 64.0 * (self.s0() / PI).min(1.0)
    }

    fn slice(&self, p: &[f64]) -> Slice {
        Slice {
            fbar: self.base.at_unchecked(p),
            terms: self.perturbation.momentum_expansion(p),
            eta: self.eta,
        }
    }

    /// `H*(p̂, Pₙ, Qₙ)`.
    pub fn energy(&self, p: &ParamPoint, pn: f64, qn: f64) -> Result<f64> {
        self.base.check_point(p)?;
        Ok(pn * pn + self.slice(&p.0).g(pn, qn))
    }
}

/// `G` at a fixed `p̂`, as polynomial in `Pₙ` with series coefficients.
#[derive(Debug, Clone)]
struct Slice {
    fbar: TrigSeries,
    terms: Vec<TrigSeries>,
    eta: f64,
}

impl Slice {
    /// `Σ_d c(d) Pₙ^{d-order} T_d(q)` for the `order`-th `Pₙ`-derivative.
    fn pn_derivative(&self, order: usize, pn: f64, q: f64) -> f64 {
        let mut acc = 0.0;
        for (d, t) in self.terms.iter().enumerate().skip(order) {
            let falling: f64 = (0..order).map(|j| (d - j) as f64).product();
            acc += falling * pn.powi((d - order) as i32) * t.eval(q);
        }
        self.eta * acc
    }

    fn g(&self, pn: f64, q: f64) -> f64 {
        self.fbar.eval(q) + self.pn_derivative(0, pn, q)
    }

    fn degree(&self) -> usize {
        self.terms
            .iter()
            .rposition(|t| t.mean != 0.0 || !t.is_constant())
            .unwrap_or(0)
    }

    /// Fixed point `𝙿 = -½ ∂_{Pₙ} G(𝙿, q)` on the uniform grid.
    fn contraction(&self, r0: f64) -> Result<(Vec<f64>, usize, f64)> {
        let qs: Vec<f64> = (0..GRID).map(|i| 2.0 * PI * i as f64 / GRID as f64).collect();
        let mut p = vec![0.0; GRID];
        let mut prev = f64::INFINITY;
        let floor = 1e-13 * r0;
        for step in 1..=200 {
            let mut res: f64 = 0.0;
            for (pi, &q) in p.iter_mut().zip(&qs) {
                let next = -0.5 * self.pn_derivative(1, *pi, q);
                res = res.max((next - *pi).abs());
                *pi = next;
            }
            if !res.is_finite() {
                return Err(Error::ContractionFailed { context: "momentum fixed point diverged".into() });
            }
            if res <= floor {
                return Ok((p, step, res));
            }
            if res > 0.5 * prev && res > 1e-3 * floor {
                return Err(Error::ContractionFailed {
                    context: format!("momentum fixed point: residual {res:.3e} after {prev:.3e}"),
                });
            }
            prev = res;
        }
        Err(Error::ContractionFailed { context: "momentum fixed point: 200 steps".into() })
    }
}

/// Drop trailing harmonics below `1e-17` of the largest coefficient.
fn trimmed(mut s: TrigSeries) -> TrigSeries {
    let scale = s
        .cos
        .iter()
        .chain(&s.sin)
        .fold(s.mean.abs(), |m, c| m.max(c.abs()));
    while let (Some(a), Some(b)) = (s.cos.last(), s.sin.last()) {
        if a.abs().max(b.abs()) <= 1e-17 * scale {
            s.cos.pop();
            s.sin.pop();
        } else {
            break;
        }
    }
    s
}

/// `(P*, a*, φ)` at one parameter slice.
fn momentum_shift(slice: &Slice, r0: f64) -> Result<(f64, TrigSeries, TrigSeries, usize, f64)> {
    let (p, steps, res) = slice.contraction(r0)?;
    let series = TrigSeries::from_samples(&p, GRID / 2 - 1);
    let pstar = series.mean;
    let a_star = trimmed(TrigSeries { mean: 0.0, ..series });
    let phi = a_star.primitive();
    Ok((pstar, a_star, phi, steps, res))
}

/// Standard form at one parameter slice.
#[derive(Debug, Clone)]
pub struct StandardFormSystem {
    pub params: ParamPoint,
    pub pstar: f64,
    pub a_star: TrigSeries,
    pub phi: TrigSeries,
    /// `b*_j = -∂_{p̂_j} φ`, one series per parameter slot.
    pub b_star: Vec<TrigSeries>,
    pub gm: TrigSeries,
    pub fbar: TrigSeries,
    pub eta0: f64,
    pub r0: f64,
    pub r_big: f64,
    pub s0: f64,
    pub contraction_steps: usize,
    pub contraction_residual: f64,
    pub checks: Vec<BoundCheck>,
    slice: Slice,
    b_vanishes: bool,
}

/// Normalise `h` at the parameter point `p`.
pub fn normalize(h: &PerturbedHamiltonian, p: &ParamPoint) -> Result<StandardFormSystem> {
    h.base.check_point(p)?;
    BoundCheck::at_most("eta0 <= (r0^2/64) min(s0/pi, 1)", h.eta0, h.eta0_limit()).into_result()?;
    let slice = h.slice(&p.0);
    let (pstar, a_star, phi, steps, res) = momentum_shift(&slice, h.r0)?;
    let step = 1e-5 * h.r0;
    let mut b_star = Vec::with_capacity(p.0.len());
    for j in 0..p.0.len() {
        let side = |sign: f64| -> Result<TrigSeries> {
            let mut x = p.0.clone();
            x[j] += sign * step;
            Ok(momentum_shift(&h.slice(&x), h.r0)?.2)
        };
        let (plus, minus) = (side(1.0)?, side(-1.0)?);
        b_star.push(trimmed(minus.add(&plus.scaled(-1.0)).scaled(0.5 / step)));
    }
    let gm_samples: Vec<f64> = (0..GRID)
        .map(|i| {
            let q = 2.0 * PI * i as f64 / GRID as f64;
            let pq = pstar + a_star.eval(q);
            pq * pq + slice.g(pq, q)
        })
        .collect();
    let gm = trimmed(TrigSeries::from_samples(&gm_samples, GRID / 2 - 1));
    let b_vanishes = slice.degree() <= 1 || h.eta == 0.0;
    let mut sys = StandardFormSystem {
        params: p.clone(),
        pstar,
        a_star,
        phi,
        b_star,
        gm,
        fbar: slice.fbar.clone(),
        eta0: h.eta0,
        r0: h.r0,
        r_big: h.r_big,
        s0: h.s0(),
        contraction_steps: steps,
        contraction_residual: res,
        checks: Vec::new(),
        slice,
        b_vanishes,
    };
    sys.checks = sys.bound_ledger()?;
    crate::report::first_failure(&sys.checks)?;
    Ok(sys)
}

fn sup_on_grid(s: &TrigSeries) -> f64 {
    (0..4 * GRID)
        .map(|i| s.eval(2.0 * PI * i as f64 / (4 * GRID) as f64).abs())
        .fold(0.0, f64::max)
}

impl StandardFormSystem {
    /// `𝙿(qₙ) = P* + a*(qₙ)`.
    pub fn momentum_map(&self, q: f64) -> f64 {
        self.pstar + self.a_star.eval(q)
    }

    pub fn b_vanishes(&self) -> bool {
        self.b_vanishes
    }

    /// `b(pₙ, qₙ) = ∫_0^1 (1 - t) ∂²_{Pₙ} G(𝙿 + t (pₙ - P*)) dt`.
    pub fn b(&self, pn: f64, q: f64) -> f64 {
        if self.b_vanishes {
            return 0.0;
        }
        let base = self.momentum_map(q);
        let d = pn - self.pstar;
        GaussLegendre::cached(32).apply(0.0, 1.0, |t| (1.0 - t) * self.slice.pn_derivative(2, base + t * d, q))
    }

    /// `∂_{pₙ} b`.
    pub fn b_dp(&self, pn: f64, q: f64) -> f64 {
        if self.b_vanishes {
            return 0.0;
        }
        let base = self.momentum_map(q);
        let d = pn - self.pstar;
        GaussLegendre::cached(32)
            .apply(0.0, 1.0, |t| (1.0 - t) * t * self.slice.pn_derivative(3, base + t * d, q))
    }

    /// `(Pₙ, Qₙ)` from `(pₙ, qₙ)`.
    pub fn transform(&self, pn: f64, qn: f64) -> (f64, f64) {
        (pn + self.a_star.eval(qn), qn)
    }

    /// `Q̂ - q̂ = b*(qₙ)`.
    pub fn angle_shift(&self, qn: f64) -> Vec<f64> {
        self.b_star.iter().map(|b| b.eval(qn)).collect()
    }

    /// `H*` in the original variables.
    pub fn original_energy(&self, pn_big: f64, qn: f64) -> f64 {
        pn_big * pn_big + self.slice.g(pn_big, qn)
    }

    /// `(1 + b)(pₙ - P*)² + G_m` in the new variables.
    pub fn standard_energy(&self, pn: f64, qn: f64) -> f64 {
        let d = pn - self.pstar;
        (1.0 + self.b(pn, qn)) * d * d + self.gm.eval(qn)
    }

    /// Max of `|H*∘Φ - Ĥ| / (1 + |H*|)` over an `n × n` grid and `random`
    /// seeded samples, with `|pₙ| ≤ R0 - r0/4`.
    pub fn composition_residual(&self, n: usize, random: usize, seed: u64) -> f64 {
        let pmax = self.momentum_radius();
        let mut worst: f64 = 0.0;
        let mut check = |pn: f64, qn: f64| {
            let (pb, qb) = self.transform(pn, qn);
            let h = self.original_energy(pb, qb);
            worst = worst.max((h - self.standard_energy(pn, qn)).abs() / (1.0 + h.abs()));
        };
        for i in 0..n {
            for j in 0..n {
                let pn = -pmax + 2.0 * pmax * i as f64 / (n - 1).max(1) as f64;
                let qn = 2.0 * PI * j as f64 / n as f64;
                check(pn, qn);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random {
            let pn = rng.random_range(-pmax..pmax);
            let qn = rng.random_range(0.0..2.0 * PI);
            check(pn, qn);
        }
        worst
    }

    /// Determinant of the difference Jacobian of `(pₙ, qₙ) ↦ (Pₙ, Qₙ)`.
    pub fn slice_jacobian_det(&self, pn: f64, qn: f64) -> f64 {
        let h = 1e-5;
        let d = |dp: f64, dq: f64| {
            let (a, b) = self.transform(pn + dp, qn + dq);
            let (c, e) = self.transform(pn - dp, qn - dq);
            ((a - c) / (2.0 * h), (b - e) / (2.0 * h))
        };
        let (pp, qp) = d(h, 0.0);
        let (pq, qq) = d(0.0, h);
        pp * qq - pq * qp
    }

    /// Largest admissible `|z|` and `|pₙ|`, `R0 - r0/4`.
    pub fn momentum_radius(&self) -> f64 {
        self.r_big - 0.25 * self.r0
    }

    fn one_plus_b(&self, p: f64, q: f64) -> Result<f64> {
        let v = 1.0 + self.b(p, q);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::NegativeRadicand { value: v })
        }
    }

    /// `𝒫(z, qₙ)`, the solution of `p = P* + z / √(1 + b(p, qₙ))`.
    pub fn solve_momentum(&self, z: f64, q: f64) -> Result<f64> {
        if !(z.abs() < self.r_big) {
            return Err(Error::BoundViolated { which: "|z| < R0".into(), value: z.abs(), bound: self.r_big });
        }
        let mut p = self.pstar + z;
        if self.b_vanishes {
            return Ok(p);
        }
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let next = self.pstar + z / self.one_plus_b(p, q)?.sqrt();
            let res = (next - p).abs();
            p = next;
            if res <= 1e-15 * self.r0.max(p.abs()) {
                return Ok(p);
            }
            if res > 0.5 * prev && res > 1e-13 * self.r0 {
                return Err(Error::ContractionFailed { context: format!("momentum solver at z = {z}") });
            }
            prev = res;
        }
        Err(Error::ContractionFailed { context: format!("momentum solver at z = {z}: 200 steps") })
    }

    /// `∂_z 𝒫(z, qₙ)` by implicit differentiation.
    pub fn momentum_dz(&self, z: f64, q: f64) -> Result<f64> {
        if self.b_vanishes {
            return Ok(1.0);
        }
        let p = self.solve_momentum(z, q)?;
        let w = self.one_plus_b(p, q)?;
        let bp = self.b_dp(p, q);
        Ok(w.powf(-0.5) / (1.0 + 0.5 * z * w.powf(-1.5) * bp))
    }

    /// `b♯(z) = ½(1 + b(𝒫(z)))^{-1/2} + ½(1 + b(𝒫(-z)))^{-1/2} - 1`.
    pub fn b_sharp(&self, z: f64, q: f64) -> Result<f64> {
        if self.b_vanishes {
            return Ok(0.0);
        }
        let plus = self.one_plus_b(self.solve_momentum(z, q)?, q)?;
        let minus = self.one_plus_b(self.solve_momentum(-z, q)?, q)?;
        Ok(0.5 * plus.powf(-0.5) + 0.5 * minus.powf(-0.5) - 1.0)
    }

    /// `b†(v) = b♯(√v)`.
    pub fn b_dag(&self, v: f64, q: f64) -> Result<f64> {
        self.b_sharp(v.max(0.0).sqrt(), q)
    }

    /// `b̃(v) = b† + 2v ∂_v b† = b♯ + z ∂_z b♯` at `z = √v`.
    pub fn b_tilde(&self, v: f64, q: f64) -> Result<f64> {
        if self.b_vanishes {
            return Ok(0.0);
        }
        let z = v.max(0.0).sqrt();
        let h = (1e-3 * z).max(1e-6);
        let d = (self.b_sharp(z + h, q)? - self.b_sharp(z - h, q)?) / (2.0 * h);
        Ok(self.b_sharp(z, q)? + z * d)
    }

    fn bound_ledger(&self) -> Result<Vec<BoundCheck>> {
        let (e0, r0) = (self.eta0, self.r0);
        let mut checks = vec![
            BoundCheck::at_most("|<a*>| = 0", self.a_star.mean.abs(), 0.0),
            BoundCheck::at_most("|P*| <= 2 eta0/r0", self.pstar.abs(), 2.0 * e0 / r0),
            BoundCheck::at_most("|a*| <= 4 eta0/r0", sup_on_grid(&self.a_star), 4.0 * e0 / r0),
            BoundCheck::at_most(
                "|b*| <= 16 pi eta0/r0^2",
                self.b_star.iter().map(sup_on_grid).fold(0.0, f64::max),
                16.0 * PI * e0 / (r0 * r0),
            ),
            BoundCheck::at_most(
                "|Gm - Fbar| <= 2 eta0",
                sup_on_grid(&self.gm.add(&self.fbar.scaled(-1.0))),
                2.0 * e0,
            ),
        ];
        let pmax = self.momentum_radius();
        let (mut b_sup, mut pb_sup, mut dag_sup, mut tilde_sup) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..16 {
            let q = 2.0 * PI * i as f64 / 16.0;
            for j in 0..16 {
                let pn = -pmax + 2.0 * pmax * j as f64 / 15.0;
                let b = self.b(pn, q);
                b_sup = b_sup.max(b.abs());
                pb_sup = pb_sup.max((pn * b).abs());
                let z = 0.999 * pmax * j as f64 / 15.0;
                dag_sup = dag_sup.max(self.b_dag(z * z, q)?.abs());
                tilde_sup = tilde_sup.max(self.b_tilde(z * z, q)?.abs());
            }
        }
        checks.push(BoundCheck::at_most("|b| <= 32 eta0/r0^2", b_sup, 32.0 * e0 / (r0 * r0)));
        checks.push(BoundCheck::at_most("|pn b| <= 10 eta0/r0", pb_sup, 10.0 * e0 / r0));
        checks.push(BoundCheck::at_most("|b_dag| <= eta0/r0^2", dag_sup, e0 / (r0 * r0)));
        checks.push(BoundCheck::at_most("|b_tilde| <= 9 eta0/r0^2", tilde_sup, 9.0 * e0 / (r0 * r0)));
        Ok(checks)
    }

    /// Kinetic data in the frame where `θ = qₙ - offset`.
    pub fn kinetic(self: &std::sync::Arc<Self>, offset: f64) -> SliceKinetic {
        SliceKinetic { sys: self.clone(), offset }
    }
}

/// [`Kinetic`] view of a [`StandardFormSystem`] in a translated frame.
#[derive(Debug, Clone)]
pub struct SliceKinetic {
    sys: std::sync::Arc<StandardFormSystem>,
    offset: f64,
}

impl Kinetic for SliceKinetic {
    fn pstar(&self) -> f64 {
        self.sys.pstar
    }
    fn momentum(&self, z: f64, theta: f64) -> Result<f64> {
        self.sys.solve_momentum(z, theta + self.offset)
    }
    fn momentum_dz(&self, z: f64, theta: f64) -> Result<f64> {
        self.sys.momentum_dz(z, theta + self.offset)
    }
    fn b_dag(&self, v: f64, theta: f64) -> Result<f64> {
        self.sys.b_dag(v, theta + self.offset)
    }
    fn b_tilde(&self, v: f64, theta: f64) -> Result<f64> {
        self.sys.b_tilde(v, theta + self.offset)
    }
}

/// Symplecticity of the full map at one phase-space point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticReport {
    pub slice_det_error: f64,
    /// `max |Jᵀ Ω J - Ω|` over all parameter slots.
    pub full_defect: f64,
}

/// Difference Jacobian of `(p̂, pₙ, q̂, qₙ) ↦ (P̂, Pₙ, Q̂, Qₙ)`, compared
/// against the canonical form.
pub fn symplectic_check(
    h: &PerturbedHamiltonian,
    p: &ParamPoint,
    pn: f64,
    qhat: &[f64],
    qn: f64,
) -> Result<SymplecticReport> {
    let sys = normalize(h, p)?;
    let slice_det_error = (sys.slice_jacobian_det(pn, qn) - 1.0).abs();
    let n = p.0.len();
    if n == 0 {
        return Ok(SymplecticReport { slice_det_error, full_defect: slice_det_error });
    }
    let dim = 2 * (n + 1);
    let map = |x: &[f64]| -> Result<Vec<f64>> {
        let ph = ParamPoint(x[..n].to_vec());
        let s = normalize(h, &ph)?;
        let (pb, qb) = s.transform(x[n], x[2 * n + 1]);
        let mut out = x.to_vec();
        out[n] = pb;
        for (j, b) in s.angle_shift(qb).into_iter().enumerate() {
            out[n + 1 + j] += b;
        }
        Ok(out)
    };
    let mut x0 = p.0.clone();
    x0.push(pn);
    x0.extend_from_slice(qhat);
    x0.push(qn);
    let step = 1e-4 * h.r0;
    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    for c in 0..dim {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[c] += step;
        xm[c] -= step;
        let (fp, fm) = (map(&xp)?, map(&xm)?);
        for r in 0..dim {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    let half = n + 1;
    let mut omega = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..half {
        omega[(i, half + i)] = 1.0;
        omega[(half + i, i)] = -1.0;
    }
    let defect = jac.transpose() * &omega * &jac - &omega;
    Ok(SymplecticReport { slice_det_error, full_defect: defect.amax() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn eps_linear(eps: f64) -> PerturbedHamiltonian {
        let g = TrigSeries::new(0.0, vec![0.0], vec![1.0]);
        PerturbedHamiltonian::momentum_linear(eps, &g, 1.0, 2.0, 3.0).unwrap()
    }

    #[test]
    fn momentum_independent_perturbation_is_identity() {
        let base = FourierPotential::cosine(1.0, 1.0);
        let c = Poly::new(1, vec![0.3, 0.0]).unwrap();
        let pert = Perturbation::new(1, Poly::constant(1, 0.0), vec![Poly::constant(1, 0.0), c], vec![
            Poly::constant(1, 0.0),
            Poly::constant(1, 0.0),
        ])
        .unwrap();
        let h = PerturbedHamiltonian::new(base, pert, 1e-3, 2.0, 3.0, None, None).unwrap();
        let sys = normalize(&h, &ParamPoint::empty()).unwrap();
        assert_eq!(sys.pstar, 0.0);
        assert!(sys.a_star.cos.iter().chain(&sys.a_star.sin).all(|c| *c == 0.0));
        assert!(sys.b_vanishes());
        for q in [0.0, 1.0, 2.5] {
            assert_relative_eq!(sys.gm.eval(q), -q.cos() + 3e-4 * (2.0 * q).cos(), epsilon = 1e-15);
            assert_eq!(sys.transform(0.4, q), (0.4, q));
        }
    }

    #[test]
    fn linear_momentum_closed_form() {
        let eps = 1e-3;
        let sys = normalize(&eps_linear(eps), &ParamPoint::empty()).unwrap();
        assert!(sys.pstar.abs() < 1e-18);
        for q in [0.0, 0.7, 2.0, 4.0] {
            assert_relative_eq!(sys.momentum_map(q), -0.5 * eps * q.sin(), epsilon = 1e-17);
            let gm = -q.cos() - 0.25 * eps * eps * q.sin().powi(2);
            assert_relative_eq!(sys.gm.eval(q), gm, epsilon = 1e-15);
        }
        assert!(sys.checks.iter().all(|c| c.holds), "{:?}", sys.checks);
        assert!(sys.composition_residual(16, 200, 7) <= 1e-10);
        assert_relative_eq!(sys.slice_jacobian_det(0.3, 1.1), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn quadratic_momentum_gives_kinetic_factor() {
        // f = Pₙ² cos q: ∂²G = 2η cos q, so b = η cos q
        let base = FourierPotential::cosine(1.0, 1.0);
        let pert = Perturbation::new(
            1,
            Poly::constant(1, 0.0),
            vec![Poly::new(1, vec![0.0, 0.0, 1.0]).unwrap()],
            vec![Poly::new(1, vec![0.0, 0.0, 0.0]).unwrap()],
        )
        .unwrap();
        let eta = 1e-4;
        let h = PerturbedHamiltonian::new(base, pert, eta, 2.0, 3.0, None, None).unwrap();
        let sys = normalize(&h, &ParamPoint::empty()).unwrap();
        assert_eq!(sys.pstar, 0.0);
        for q in [0.0, 1.0, 3.0] {
            assert_relative_eq!(sys.b(0.7, q), eta * q.cos(), max_relative = 1e-12);
            let z = 0.8;
            let p = sys.solve_momentum(z, q).unwrap();
            assert_relative_eq!(p, z / (1.0 + eta * q.cos()).sqrt(), max_relative = 1e-14);
            let sharp = (1.0 + eta * q.cos()).powf(-0.5) - 1.0;
            assert_relative_eq!(sys.b_sharp(z, q).unwrap(), sharp, max_relative = 1e-10);
        }
        assert!(sys.composition_residual(16, 100, 1) <= 1e-10);
    }

    #[test]
    fn parameter_dependent_angle_shift() {
        // f = p̂ Pₙ sin q: 𝙿 = -ε p̂ sin q / 2, φ = ε p̂ cos q / 2, b* = -ε cos q / 2
        let base = FourierPotential::new(
            1,
            vec![Poly::new(1, vec![-1.0, 0.0]).unwrap()],
            vec![Poly::new(1, vec![0.0, 0.0]).unwrap()],
            1.0,
            vec![[0.0, 1.0]],
        )
        .unwrap();
        // monomials in (p̂, Pₙ): 1, p̂, Pₙ, p̂², p̂Pₙ, Pₙ²
        let pert = Perturbation::new(
            2,
            Poly::constant(2, 0.0),
            vec![Poly::constant(2, 0.0)],
            vec![Poly::new(2, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap()],
        )
        .unwrap();
        let eps = 1e-3;
        let h = PerturbedHamiltonian::new(base, pert, eps, 2.0, 3.0, None, None).unwrap();
        let sys = normalize(&h, &ParamPoint(vec![0.5])).unwrap();
        for q in [0.0, 1.3, 4.0] {
            assert_relative_eq!(sys.momentum_map(q), -0.25 * eps * q.sin(), epsilon = 1e-16);
            assert_relative_eq!(sys.angle_shift(q)[0], -0.5 * eps * q.cos(), epsilon = 1e-10);
        }
        let rep = symplectic_check(&h, &ParamPoint(vec![0.5]), 0.4, &[0.2], 1.0).unwrap();
        assert!(rep.slice_det_error < 1e-8, "{rep:?}");
        assert!(rep.full_defect < 1e-8, "{rep:?}");
    }

    #[test]
    fn oversized_perturbation_is_rejected() {
        let h = eps_linear(0.5);
        assert!(matches!(normalize(&h, &ParamPoint::empty()), Err(Error::BoundViolated { .. })));
    }

    #[test]
    fn spec_round_trip() {
        let h = eps_linear(1e-3);
        let spec = h.to_spec();
        let json = serde_json::to_string(&spec).unwrap();
        let back: PerturbedSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(PerturbedHamiltonian::from_spec(&back).unwrap(), h);
    }

    #[test]
    fn linear_momentum_solver_is_shift() {
        let sys = normalize(&eps_linear(1e-3), &ParamPoint::empty()).unwrap();
        assert_eq!(sys.solve_momentum(0.0, 1.0).unwrap(), sys.pstar);
        assert_relative_eq!(sys.solve_momentum(1.2, 1.0).unwrap(), 1.2 + sys.pstar);
        assert!(sys.solve_momentum(3.1, 0.0).is_err());
    }

    fn quartic_system() -> StandardFormSystem {
        // f = Pₙ³ sin q + Pₙ² cos 2q: b depends on pₙ, so b♯ is nontrivial
        let base = FourierPotential::cosine(1.0, 1.0);
        let zero = || Poly::new(1, vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        let cube = Poly::new(1, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let square = Poly::new(1, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let pert = Perturbation::new(1, zero(), vec![zero(), square], vec![cube, zero()]).unwrap();
        let h = PerturbedHamiltonian::new(base, pert, 1e-4, 2.0, 3.0, None, Some(1e-3)).unwrap();
        normalize(&h, &ParamPoint::empty()).unwrap()
    }

    #[test]
    fn b_sharp_is_even_and_tilde_matches_definition() {
        let sys = quartic_system();
        for i in 0..50 {
            let z = -2.0 + 4.0 * i as f64 / 49.0;
            let q = 0.37 * i as f64;
            assert_relative_eq!(sys.b_sharp(z, q).unwrap(), sys.b_sharp(-z, q).unwrap(), epsilon = 1e-17);
        }
        let (v, q) = (1.1, 0.4);
        let h = 1e-4;
        let dv = (sys.b_dag(v + h, q).unwrap() - sys.b_dag(v - h, q).unwrap()) / (2.0 * h);
        assert_relative_eq!(sys.b_tilde(v, q).unwrap(), sys.b_dag(v, q).unwrap() + 2.0 * v * dv, max_relative = 1e-7);
        assert!(sys.composition_residual(16, 200, 3) <= 1e-10);
    }

    #[test]
    fn momentum_derivative_matches_differences() {
        let sys = quartic_system();
        for (z, q) in [(0.5, 0.3), (-1.2, 2.0), (2.0, 5.0)] {
            let h = 1e-5;
            let fd = (sys.solve_momentum(z + h, q).unwrap() - sys.solve_momentum(z - h, q).unwrap()) / (2.0 * h);
            assert_relative_eq!(sys.momentum_dz(z, q).unwrap(), fd, max_relative = 1e-8);
        }
    }

    proptest! {
        #[test]
        fn momentum_solver_is_monotone(z1 in -2.45f64..2.4, dz in 1e-6f64..0.2, q in 0.0f64..6.3) {
            let sys = quartic_system();
            let z2 = (z1 + dz).min(2.45);
            prop_assume!(z2 > z1);
            let (a, b) = (sys.solve_momentum(z1, q).unwrap(), sys.solve_momentum(z2, q).unwrap());
            prop_assert!(b > a);
            prop_assert!(sys.momentum_dz(z1, q).unwrap() >= 0.5);
        }
    }
}
