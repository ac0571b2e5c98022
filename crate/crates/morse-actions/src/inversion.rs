//! Inversion `Iₙ ↦ 𝙴(p̂, Iₙ)` of the actions and the derivatives of the
//! resulting energy function.

use crate::actions::{ActionSystem, RegionKind};
use crate::error::{Error, Result};
use crate::morse::{continue_critical, morse_check};
use crate::potential::{FourierPotential, ParamPoint};
use crate::standard_form::{normalize, PerturbedHamiltonian};
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Mutex};

/// A family of action systems indexed by the adiabatic parameters `p̂`.
pub trait ActionModel: Send + Sync {
    fn n_params(&self) -> usize;
    fn r0(&self) -> f64;
    fn check_point(&self, p: &ParamPoint) -> Result<()>;
    /// System at `p`, which may lie marginally outside the box.
    fn system_at(&self, p: &ParamPoint) -> Result<ActionSystem>;
}

/// Pure potential `H = p² + F(θ; p̂)` with unbounded rotational windows.
#[derive(Debug, Clone)]
pub struct PotentialModel {
    pub potential: FourierPotential,
    pub r0: f64,
}

impl PotentialModel {
    pub fn new(potential: FourierPotential, r0: f64) -> Self {
        PotentialModel { potential, r0 }
    }
}

impl ActionModel for PotentialModel {
    fn n_params(&self) -> usize {
        self.potential.n_params()
    }
    fn r0(&self) -> f64 {
        self.r0
    }
    fn check_point(&self, p: &ParamPoint) -> Result<()> {
        self.potential.check_point(p)
    }
    fn system_at(&self, p: &ParamPoint) -> Result<ActionSystem> {
        if p.0.len() != self.n_params() {
            return Err(Error::ParamDimension { expected: self.n_params(), got: p.0.len() });
        }
        let series = self.potential.at_unchecked(&p.0);
        Ok(ActionSystem::pure(morse_check(&series, self.potential.s0())?))
    }
}

/// Normalised perturbed system. Region indices and reference data come
/// from the base potential, windows from the continued critical points
/// of `G_m`.
#[derive(Debug, Clone)]
pub struct StandardFormModel {
    pub hamiltonian: PerturbedHamiltonian,
}

impl ActionModel for StandardFormModel {
    fn n_params(&self) -> usize {
        self.hamiltonian.base.n_params()
    }
    fn r0(&self) -> f64 {
        self.hamiltonian.r0
    }
    fn check_point(&self, p: &ParamPoint) -> Result<()> {
        self.hamiltonian.base.check_point(p)
    }
    fn system_at(&self, p: &ParamPoint) -> Result<ActionSystem> {
        let h = &self.hamiltonian;
        let sys = Arc::new(normalize(h, p)?);
        let reference = morse_check(&h.base.at_unchecked(&p.0), h.s0())?;
        let gm = sys.gm.shifted(reference.offset);
        let crit = continue_critical(&gm, &reference, 2.0 * h.eta0)?;
        let kinetic = Arc::new(sys.kinetic(reference.offset));
        ActionSystem::new(gm, reference, crit, h.r_big, Some(kinetic))
    }
}

/// Action interval on which the energy map is inverted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionDomain {
    pub region: usize,
    /// Safety margin requested.
    pub lambda: f64,
    /// Margin actually used after the floor relative to the window width.
    pub lambda_used: f64,
    pub lower: f64,
    pub upper: f64,
    pub energy_lower: f64,
    pub energy_upper: f64,
}

impl ActionDomain {
    pub fn contains(&self, action: f64) -> bool {
        action > self.lower && action < self.upper
    }
}

/// `(∂_I E, ∂_p̂ E, ∂²_I E, ∂_I ∂_p̂ E, ∂²_p̂ E)` at one action value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDerivs {
    pub energy: f64,
    pub d_action: f64,
    pub d_params: Vec<f64>,
    pub d2_action: f64,
    pub d_action_params: Vec<f64>,
    pub d2_params: Vec<Vec<f64>>,
    /// `|∂_I E · ∂_E I - 1|`.
    pub identity_residual: f64,
}

/// Inverse of one action branch, with a one-slot cache of the system.
pub struct EnergyMap<'m> {
    model: &'m dyn ActionModel,
    pub region: usize,
    /// `None` selects `𝚛₄/4` from the constants of the system.
    pub lambda: Option<f64>,
    pub tol: f64,
    cache: Mutex<Option<(ParamPoint, Arc<ActionSystem>)>>,
}

impl<'m> EnergyMap<'m> {
    pub fn new(model: &'m dyn ActionModel, region: usize) -> Self {
        EnergyMap { model, region, lambda: None, tol: 1e-13, cache: Mutex::new(None) }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn system(&self, p: &ParamPoint) -> Result<Arc<ActionSystem>> {
        let mut slot = self.cache.lock().expect("cache poisoned");
        if let Some((q, s)) = slot.as_ref() {
            if q == p {
                return Ok(s.clone());
            }
        }
        let s = Arc::new(self.model.system_at(p)?);
        *slot = Some((p.clone(), s.clone()));
        Ok(s)
    }

    fn sign(&self, sys: &ActionSystem) -> f64 {
        if self.region == 0 && sys.branch(0).map(|b| b.region().kind == RegionKind::Rotational).unwrap_or(false) {
            -1.0
        } else {
            1.0
        }
    }

    pub fn domain(&self, p: &ParamPoint) -> Result<ActionDomain> {
        self.model.check_point(p)?;
        let sys = self.system(p)?;
        self.domain_in(&sys, self.lambda)
    }

    /// Domain endpoints `a±` for an explicit margin.
    pub fn domain_with_lambda(&self, p: &ParamPoint, lambda: f64) -> Result<ActionDomain> {
        self.model.check_point(p)?;
        let sys = self.system(p)?;
        self.domain_in(&sys, Some(lambda))
    }

    fn domain_in(&self, sys: &ActionSystem, lambda: Option<f64>) -> Result<ActionDomain> {
        let br = sys.branch(self.region)?;
        let (lo, hi) = br.window();
        let lambda = lambda.unwrap_or_else(|| sys.morse.constants(self.model.r0()).r4.value / 4.0);
        let width = if hi.is_finite() { hi - lo } else { sys.morse.m };
        let used = lambda.max(1e-13 * width);
        let kind = br.region().kind;
        let e_lo = if kind == RegionKind::Well { lo } else { lo + used };
        let e_hi = if kind == RegionKind::Rotational { hi } else { hi - used };
        let at = |e: f64, exact_bottom: bool| -> Result<f64> {
            if exact_bottom {
                Ok(0.0)
            } else if e.is_infinite() {
                Ok(self.sign(sys) * f64::INFINITY)
            } else if e == hi {
                br.action(hi - 1e-15 * width.max(hi.abs()))
            } else {
                br.action(e)
            }
        };
        let a = at(e_lo, kind == RegionKind::Well)?;
        let b = at(e_hi, false)?;
        Ok(ActionDomain {
            region: self.region,
            lambda,
            lambda_used: used,
            lower: a.min(b),
            upper: a.max(b),
            energy_lower: e_lo,
            energy_upper: e_hi,
        })
    }

    /// `𝙴(p̂, Iₙ)`.
    pub fn invert(&self, action: f64, p: &ParamPoint) -> Result<f64> {
        self.model.check_point(p)?;
        let sys = self.system(p)?;
        self.invert_in(&sys, action)
    }

    fn invert_in(&self, sys: &ActionSystem, action: f64) -> Result<f64> {
        let dom = self.domain_in(sys, self.lambda)?;
        if !dom.contains(action) {
            return Err(Error::ActionOutOfDomain { action, lower: dom.lower, upper: dom.upper });
        }
        let br = sys.branch(self.region)?;
        let s = self.sign(sys);
        let target = s * action;
        let f = |e: f64| -> Result<(f64, f64)> { Ok((s * br.action(e)? - target, s * br.action_deriv(e)?)) };
        let (mut lo, mut hi) = (dom.energy_lower, dom.energy_upper);
        if hi.is_infinite() {
            let step = sys.morse.m.max(1.0);
            hi = lo + step;
            while f(hi)?.0 < 0.0 {
                lo = hi;
                hi = lo + 4.0 * (hi - dom.energy_lower);
            }
        }
        let width = hi - lo;
        let mut e = 0.5 * (lo + hi);
        for _ in 0..300 {
            let (fe, de) = f(e)?;
            if fe.abs() <= self.tol * (1.0 + target.abs()) {
                return Ok(e);
            }
            if fe < 0.0 {
                lo = e;
            } else {
                hi = e;
            }
            let step = (fe / de).clamp(-0.5 * width, 0.5 * width);
            let newton = e - step;
            let next = if de > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 4.0 * f64::EPSILON * (1.0 + e.abs()) || next == e {
                return Ok(next);
            }
            e = next;
        }
        Err(Error::NewtonStalled { at: e })
    }

    /// Derivatives of `𝙴` by the implicit-function formulas, with the
    /// parameter derivatives of the actions taken by centred differences
    /// of step `10⁻⁵ r0` at fixed energy.
    pub fn energy_derivs(&self, action: f64, p: &ParamPoint) -> Result<EnergyDerivs> {
        self.model.check_point(p)?;
        let sys = self.system(p)?;
        let e = self.invert_in(&sys, action)?;
        let br = sys.branch(self.region)?;
        let i_e = br.action_deriv(e)?;
        let i_ee = br.action_second_deriv(e)?;
        let n = p.0.len();
        let h = 1e-5 * self.model.r0();
        let shifted = |d: &[(usize, f64)]| -> Result<ActionSystem> {
            let mut x = p.0.clone();
            for &(j, s) in d {
                x[j] += s * h;
            }
            self.model.system_at(&ParamPoint(x))
        };
        let value = |s: &ActionSystem| s.branch(self.region)?.action(e);
        let slope = |s: &ActionSystem| s.branch(self.region)?.action_deriv(e);
        let i0 = br.action(e)?;
        let mut i_p = vec![0.0; n];
        let mut i_ep = vec![0.0; n];
        let mut i_pp = vec![vec![0.0; n]; n];
        for j in 0..n {
            let (sp, sm) = (shifted(&[(j, 1.0)])?, shifted(&[(j, -1.0)])?);
            let (ip, im) = (value(&sp)?, value(&sm)?);
            i_p[j] = (ip - im) / (2.0 * h);
            i_ep[j] = (slope(&sp)? - slope(&sm)?) / (2.0 * h);
            i_pp[j][j] = (ip - 2.0 * i0 + im) / (h * h);
            for k in 0..j {
                let pp = value(&shifted(&[(j, 1.0), (k, 1.0)])?)?;
                let pm = value(&shifted(&[(j, 1.0), (k, -1.0)])?)?;
                let mp = value(&shifted(&[(j, -1.0), (k, 1.0)])?)?;
                let mm = value(&shifted(&[(j, -1.0), (k, -1.0)])?)?;
                i_pp[j][k] = (pp - pm - mp + mm) / (4.0 * h * h);
                i_pp[k][j] = i_pp[j][k];
            }
        }
        let d_action = 1.0 / i_e;
        let d_params: Vec<f64> = i_p.iter().map(|v| -v / i_e).collect();
        let d2_action = -i_ee / i_e.powi(3);
        let d_action_params =
            (0..n).map(|j| i_ee * i_p[j] / i_e.powi(3) - i_ep[j] / (i_e * i_e)).collect();
        let d2_params = (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        -i_pp[j][k] / i_e + (i_ep[j] * i_p[k] + i_ep[k] * i_p[j]) / (i_e * i_e)
                            - i_ee * i_p[j] * i_p[k] / i_e.powi(3)
                    })
                    .collect()
            })
            .collect();
        Ok(EnergyDerivs {
            energy: e,
            d_action,
            d_params,
            d2_action,
            d_action_params,
            d2_params,
            identity_residual: (d_action * i_e - 1.0).abs(),
        })
    }

    /// `∂²_{Iₙ} 𝙴 = -∂_EE I / (∂_E I)³` at `(𝙴(Iₙ), p̂)`.
    pub fn twist(&self, action: f64, p: &ParamPoint) -> Result<f64> {
        self.model.check_point(p)?;
        let sys = self.system(p)?;
        let e = self.invert_in(&sys, action)?;
        twist_at_energy(&sys, self.region, e)
    }
}

/// `-∂_EE I / (∂_E I)³` at energy `E`.
pub fn twist_at_energy(sys: &ActionSystem, region: usize, e: f64) -> Result<f64> {
    let br = sys.branch(region)?;
    let d1 = br.action_deriv(e)?;
    Ok(-br.action_second_deriv(e)? / (d1 * d1 * d1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn pendulum() -> PotentialModel {
        PotentialModel::new(FourierPotential::cosine(1.0, 1.0), 1.0)
    }

    /// `F = -(1 + p₁/2) cos θ + p₁ p₂ sin θ / 4 - (p₂/3) cos 2θ`.
    fn two_param() -> PotentialModel {
        // monomials in (p₁, p₂): 1, p₁, p₂, p₁², p₁p₂, p₂²
        let pot = FourierPotential::new(
            2,
            vec![
                Poly::new(2, vec![-1.0, -0.5, 0.0, 0.0, 0.0, 0.0]).unwrap(),
                Poly::new(2, vec![0.0, 0.0, -1.0 / 3.0, 0.0, 0.0, 0.0]).unwrap(),
            ],
            vec![
                Poly::new(2, vec![0.0, 0.0, 0.0, 0.0, 0.25, 0.0]).unwrap(),
                Poly::new(2, vec![0.0; 6]).unwrap(),
            ],
            1.0,
            vec![[0.0, 0.4], [0.0, 0.2]],
        )
        .unwrap();
        PotentialModel::new(pot, 1.0)
    }

    #[test]
    fn round_trip_pendulum_regions() {
        let model = pendulum();
        let p = ParamPoint::empty();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for region in 0..=2 {
            let map = EnergyMap::new(&model, region);
            let dom = map.domain(&p).unwrap();
            let (lo, hi) = if dom.upper.is_finite() { (dom.lower, dom.upper) } else { (dom.lower, dom.lower + 5.0) };
            let (lo, hi) = if dom.lower.is_finite() { (lo, hi) } else { (hi - 5.0, hi) };
            for _ in 0..20 {
                let a = rng.random_range(lo..hi);
                let e = map.invert(a, &p).unwrap();
                let back = model.system_at(&p).unwrap().branch(region).unwrap().action(e).unwrap();
                assert!((back - a).abs() <= 1e-10 * (1.0 + a.abs()), "{region} {a} {back}");
            }
        }
    }

    #[test]
    fn well_domain_and_separatrix_limit() {
        let model = pendulum();
        let map = EnergyMap::new(&model, 1);
        let dom = map.domain(&ParamPoint::empty()).unwrap();
        assert_eq!(dom.lower, 0.0);
        assert_relative_eq!(dom.upper, 4.0 * 2f64.sqrt() / PI, max_relative = 1e-9);
        let e = map.invert(dom.upper * (1.0 - 1e-9), &ParamPoint::empty()).unwrap();
        assert!(e > 0.99 && e < 1.0);
        assert!(map.invert(2.0, &ParamPoint::empty()).is_err());
    }

    #[test]
    fn derivative_identities_without_parameters() {
        let model = pendulum();
        let map = EnergyMap::new(&model, 1);
        let d = map.energy_derivs(1.0, &ParamPoint::empty()).unwrap();
        assert!(d.identity_residual <= 1e-12);
        assert!(d.d_params.is_empty() && d.d2_params.is_empty());
        assert!(d.d2_action < 0.0);
        let rot = EnergyMap::new(&model, 2);
        assert!(rot.twist(2.0, &ParamPoint::empty()).unwrap() > 0.0);
    }

    #[test]
    fn twist_matches_second_differences_of_inverse() {
        let model = pendulum();
        let p = ParamPoint::empty();
        for (region, a) in [(1, 0.8), (2, 1.5)] {
            let map = EnergyMap::new(&model, region);
            let h = 1e-3;
            let e = |x: f64| map.invert(x, &p).unwrap();
            let fd = (e(a + h) - 2.0 * e(a) + e(a - h)) / (h * h);
            assert_relative_eq!(map.twist(a, &p).unwrap(), fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn parameter_derivatives_match_differences_of_inverse() {
        let model = two_param();
        let p = ParamPoint(vec![0.2, 0.1]);
        let region = 1;
        let map = EnergyMap::new(&model, region);
        let a = 0.5;
        let d = map.energy_derivs(a, &p).unwrap();
        let h = 1e-4;
        for j in 0..2 {
            let mut xp = p.0.clone();
            let mut xm = p.0.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (map.invert(a, &ParamPoint(xp)).unwrap() - map.invert(a, &ParamPoint(xm)).unwrap()) / (2.0 * h);
            assert_relative_eq!(d.d_params[j], fd, max_relative = 1e-6);
        }
        assert!(d.identity_residual <= 1e-10);
        assert_relative_eq!(d.d2_params[0][1], d.d2_params[1][0]);
    }

    #[test]
    fn domain_is_monotone_in_margin() {
        let model = pendulum();
        let map = EnergyMap::new(&model, 2);
        let p = ParamPoint::empty();
        let a = map.domain_with_lambda(&p, 1e-3).unwrap();
        let b = map.domain_with_lambda(&p, 1e-2).unwrap();
        assert!(b.lower > a.lower);
        let w = EnergyMap::new(&model, 1);
        assert!(w.domain_with_lambda(&p, 1e-2).unwrap().upper < w.domain_with_lambda(&p, 1e-3).unwrap().upper);
    }

    #[test]
    fn standard_form_model_inverts() {
        use crate::trig::TrigSeries;
        let g = TrigSeries::new(0.0, vec![0.0], vec![1.0]);
        let h = PerturbedHamiltonian::momentum_linear(1e-3, &g, 1.0, 2.0, 3.0).unwrap();
        let model = StandardFormModel { hamiltonian: h };
        let p = ParamPoint::empty();
        for region in [1, 2] {
            let map = EnergyMap::new(&model, region);
            let dom = map.domain(&p).unwrap();
            let a = dom.lower + 0.3 * (dom.upper - dom.lower).min(2.0);
            let e = map.invert(a, &p).unwrap();
            let back = map.system(&p).unwrap().branch(region).unwrap().action(e).unwrap();
            assert!((back - a).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }
}
