//! Reference values for the pendulum potential `F = -η cos θ`.
//!
//! This module deliberately shares no quadrature code with
//! [`crate::actions`]: it uses the substitutions `sin(θ/2) = k sin α`
//! (well) and `β = θ/2` (rotation), which turn every integral into a
//! smooth integrand on `[0, π/2]`, and a globally adaptive 7/15-point
//! Gauss–Kronrod rule.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Kronrod estimate and error estimate on `[a, b]`.
fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod: bisect the interval with the largest
/// error estimate until the total estimate meets `tol` relative.
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (v, e) = kronrod(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..5000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::QuadratureStalled { doublings: parts.len() });
        }
        if err <= tol * total.abs() || err <= 1e-300 {
            return Ok(total);
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(Error::QuadratureStalled { doublings: parts.len() });
        }
        for (x, y) in [(lo, mid), (mid, hi)] {
            let (v, e) = kronrod(&f, x, y);
            parts.push((x, y, v, e));
        }
    }
    Err(Error::QuadratureStalled { doublings: parts.len() })
}

/// Pendulum reference for amplitude `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineRef {
    pub eta: f64,
    pub tol: f64,
}

/// Measured infimum of the rotational twist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistInfimum {
    pub value: f64,
    pub energy: f64,
    pub action: f64,
}

/// One row of a golden table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldenRow {
    pub region: usize,
    pub energy: f64,
    pub action: f64,
    pub d_action: f64,
    pub d2_action: f64,
    pub twist: f64,
}

impl CosineRef {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidInput(format!("amplitude must be positive, got {eta}")));
        }
        Ok(CosineRef { eta, tol: 1e-13 })
    }

    /// `(4√(2η)/π, 2√(2η)/π)`: well and rotational actions at the separatrix.
    pub fn separatrix_actions(&self) -> (f64, f64) {
        let a = (2.0 * self.eta).sqrt() / PI;
        (4.0 * a, 2.0 * a)
    }

    fn check(&self, i: usize, e: f64) -> Result<()> {
        let ok = match i {
            1 => e > -self.eta && e < self.eta,
            0 | 2 => e > self.eta && e.is_finite(),
            _ => return Err(Error::NoSuchRegion { region: i, max: 2 }),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::EnergyOutOfRange { region: i, energy: e })
        }
    }

    fn gk<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        adaptive_gk(f, 0.0, FRAC_PI_2, self.tol)
    }

    /// `I^(i),⋆(E)`.
    pub fn action_star(&self, i: usize, e: f64) -> Result<f64> {
        self.check(i, e)?;
        let eta = self.eta;
        if i == 1 {
            let k2 = 0.5 * (1.0 + e / eta);
            let int = self.gk(|a: f64| {
                let (s, c) = a.sin_cos();
                c * c / (1.0 - k2 * s * s).sqrt()
            })?;
            return Ok(4.0 * (2.0 * eta).sqrt() * k2 * int / PI);
        }
        let e1 = e / eta + 1.0;
        let m = 2.0 / e1;
        let int = self.gk(|b: f64| (1.0 - m * b.sin().powi(2)).sqrt())?;
        let v = 2.0 * (eta * e1).sqrt() * int / PI;
        Ok(if i == 0 { -v } else { v })
    }

    /// `∂^order_E I^(i),⋆(E)` for `order ∈ {1, 2}`.
    pub fn action_star_deriv(&self, i: usize, e: f64, order: usize) -> Result<f64> {
        self.check(i, e)?;
        let eta = self.eta;
        let v = match (i, order) {
            (1, 1) => {
                let k2 = 0.5 * (1.0 + e / eta);
                let int = self.gk(|a: f64| 1.0 / (1.0 - k2 * a.sin().powi(2)).sqrt())?;
                2f64.sqrt() * int / (PI * eta.sqrt())
            }
            (1, 2) => {
                let k2 = 0.5 * (1.0 + e / eta);
                let int = self.gk(|a: f64| {
                    let s2 = a.sin().powi(2);
                    s2 / (1.0 - k2 * s2).powf(1.5)
                })?;
                2f64.sqrt() * int / (4.0 * PI * eta.powf(1.5))
            }
            (_, 1) => {
                let e1 = e / eta + 1.0;
                let m = 2.0 / e1;
                let int = self.gk(|b: f64| 1.0 / (1.0 - m * b.sin().powi(2)).sqrt())?;
                int / (PI * (eta * e1).sqrt())
            }
            (_, 2) => {
                let e1 = e / eta + 1.0;
                let m = 2.0 / e1;
                let int = self.gk(|b: f64| (1.0 - m * b.sin().powi(2)).powf(-1.5))?;
                -int / (2.0 * PI * (eta * e1).powf(1.5))
            }
            _ => return Err(Error::InvalidInput(format!("derivative order {order} not in 1..=2"))),
        };
        Ok(if i == 0 { -v } else { v })
    }

    /// `𝙴^(i),⋆(I)` by safeguarded Newton on a monotone bracket.
    pub fn energy_star(&self, i: usize, action: f64) -> Result<f64> {
        let (well, rot) = self.separatrix_actions();
        let eta = self.eta;
        let sign = if i == 0 { -1.0 } else { 1.0 };
        let target = sign * action;
        let (mut lo, mut hi) = match i {
            1 if action > 0.0 && action < well => (-eta, eta),
            0 | 2 if target > rot => {
                let mut hi = 2.0 * eta;
                while self.action_star(2, hi)? < target {
                    hi *= 4.0;
                }
                (eta, hi)
            }
            0..=2 => return Err(Error::ActionOutOfDomain { action, lower: 0.0, upper: f64::INFINITY }),
            _ => return Err(Error::NoSuchRegion { region: i, max: 2 }),
        };
        let j = if i == 1 { 1 } else { 2 };
        let mut e = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.action_star(j, e)? - target;
            if f == 0.0 {
                return Ok(e);
            }
            if f < 0.0 {
                lo = e;
            } else {
                hi = e;
            }
            let next = e - f / self.action_star_deriv(j, e, 1)?;
            let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if (next - e).abs() <= 4.0 * f64::EPSILON * (1.0 + e.abs()) {
                return Ok(next);
            }
            e = next;
        }
        Err(Error::NewtonStalled { at: e })
    }

    /// `∂²_I 𝙴 = -∂_EE I / (∂_E I)³` at energy `E`.
    pub fn twist_at_energy(&self, i: usize, e: f64) -> Result<f64> {
        let d1 = self.action_star_deriv(i, e, 1)?;
        let d2 = self.action_star_deriv(i, e, 2)?;
        Ok(-d2 / (d1 * d1 * d1))
    }

    pub fn twist_star(&self, i: usize, action: f64) -> Result<f64> {
        self.twist_at_energy(i, self.energy_star(i, action)?)
    }

    /// Smallest rotational twist over actions `I > 4√(2η)/π`, sampled on
    /// `count` energies log-spaced up to `10⁶ η`.
    pub fn rotational_twist_infimum(&self, count: usize) -> Result<TwistInfimum> {
        let start = self.energy_star(2, self.separatrix_actions().0)?;
        let stop = 1e6 * self.eta;
        let mut best = TwistInfimum { value: f64::INFINITY, energy: start, action: 0.0 };
        for k in 0..count {
            let e = start * (stop / start).powf(k as f64 / (count - 1) as f64);
            let t = self.twist_at_energy(2, e)?;
            if t < best.value {
                best = TwistInfimum { value: t, energy: e, action: self.action_star(2, e)? };
            }
        }
        Ok(best)
    }

    pub fn golden_row(&self, i: usize, e: f64) -> Result<GoldenRow> {
        Ok(GoldenRow {
            region: i,
            energy: e,
            action: self.action_star(i, e)?,
            d_action: self.action_star_deriv(i, e, 1)?,
            d2_action: self.action_star_deriv(i, e, 2)?,
            twist: self.twist_at_energy(i, e)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// `(K(k), E(k))` by the arithmetic-geometric mean, `k2 = k²`.
    fn agm_elliptic(k2: f64) -> (f64, f64) {
        let (mut a, mut b) = (1.0f64, (1.0 - k2).sqrt());
        let mut c2sum = 0.5 * k2;
        let mut pow = 0.5;
        for _ in 0..40 {
            let c = 0.5 * (a - b);
            let an = 0.5 * (a + b);
            b = (a * b).sqrt();
            a = an;
            pow *= 2.0;
            c2sum += pow * c * c;
        }
        let kk = PI / (2.0 * a);
        (kk, kk * (1.0 - c2sum))
    }

    #[test]
    fn gauss_kronrod_handles_endpoint_singularity() {
        let v = adaptive_gk(|x: f64| x.sqrt().recip(), 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-10);
        let w = adaptive_gk(|x: f64| x.cos().sqrt(), 0.0, FRAC_PI_2, 1e-13).unwrap();
        // ∫_0^{π/2} √cos = √(2π) Γ(3/4) / Γ(1/4)... in closed form 1.19814023473559220744
        assert_relative_eq!(w, 1.198140234735592, max_relative = 1e-13);
    }

    #[test]
    fn well_action_against_elliptic_integrals() {
        let r = CosineRef::new(1.0).unwrap();
        for e in [-0.99, -0.5, 0.0, 0.3, 0.9] {
            let k2 = 0.5 * (1.0 + e);
            let (kk, ee) = agm_elliptic(k2);
            let exact = 4.0 * 2f64.sqrt() / PI * (ee - (1.0 - k2) * kk);
            assert_relative_eq!(r.action_star(1, e).unwrap(), exact, max_relative = 1e-13);
            assert_relative_eq!(r.action_star_deriv(1, e, 1).unwrap(), 2f64.sqrt() * kk / PI, max_relative = 1e-13);
        }
    }

    #[test]
    fn mid_well_action_is_root_cosine_integral() {
        let r = CosineRef::new(1.0).unwrap();
        assert_relative_eq!(r.action_star(1, 0.0).unwrap(), 2.0 / PI * 1.198140234735592, max_relative = 1e-13);
    }

    #[test]
    fn separatrix_and_bottom_limits() {
        for eta in [1.0, 0.3] {
            let r = CosineRef::new(eta).unwrap();
            let (w, rot) = r.separatrix_actions();
            assert_relative_eq!(r.action_star(1, eta * (1.0 - 1e-12)).unwrap(), w, max_relative = 1e-9);
            assert_relative_eq!(r.action_star(2, eta * (1.0 + 1e-12)).unwrap(), rot, max_relative = 1e-9);
            let bottom = -eta * (1.0 - 1e-8);
            assert_relative_eq!(r.action_star_deriv(1, bottom, 1).unwrap(), 1.0 / (2.0 * eta).sqrt(), max_relative = 1e-6);
            assert_relative_eq!(
                r.action_star_deriv(1, bottom, 2).unwrap(),
                1.0 / (8.0 * 2f64.sqrt() * eta.powf(1.5)),
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn symmetry_and_rotational_derivative_bound() {
        let r = CosineRef::new(1.0).unwrap();
        for e in [1.5, 2.0, 5.0, 40.0] {
            assert_eq!(r.action_star(0, e).unwrap(), -r.action_star(2, e).unwrap());
            if e >= 2.0 {
                assert!(r.action_star_deriv(2, e, 1).unwrap() <= 1.0 / (2.0 * e).sqrt());
            }
            let fd = (r.action_star(2, e + 1e-5).unwrap() - r.action_star(2, e - 1e-5).unwrap()) / 2e-5;
            assert_relative_eq!(r.action_star_deriv(2, e, 1).unwrap(), fd, max_relative = 1e-8);
        }
    }

    #[test]
    fn derivatives_positive_in_well() {
        let r = CosineRef::new(1.0).unwrap();
        for k in 1..40 {
            let e = -1.0 + 2.0 * k as f64 / 40.0;
            assert!(r.action_star_deriv(1, e, 1).unwrap() >= 1.0 / 2f64.sqrt());
            assert!(r.action_star_deriv(1, e, 2).unwrap() > 0.0);
        }
    }

    #[test]
    fn twist_limits() {
        let r = CosineRef::new(1.0).unwrap();
        assert_relative_eq!(r.twist_at_energy(1, -1.0 + 1e-8).unwrap(), -0.25, max_relative = 1e-6);
        assert_relative_eq!(r.twist_at_energy(2, 1e6).unwrap(), 2.0, max_relative = 1e-5);
        let action = r.action_star(1, 0.0).unwrap();
        assert_relative_eq!(r.energy_star(1, action).unwrap(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(r.twist_star(1, action).unwrap(), r.twist_at_energy(1, 0.0).unwrap(), max_relative = 1e-12);
        let inf = r.rotational_twist_infimum(64).unwrap();
        assert!(inf.value > 0.0 && inf.value <= 2.0 + 1e-6);
    }

    #[test]
    fn domain_errors() {
        let r = CosineRef::new(1.0).unwrap();
        assert!(matches!(r.action_star(1, 1.5), Err(Error::EnergyOutOfRange { .. })));
        assert!(matches!(r.action_star(2, 0.5), Err(Error::EnergyOutOfRange { .. })));
        assert!(matches!(r.action_star(3, 2.0), Err(Error::NoSuchRegion { .. })));
        assert!(matches!(r.energy_star(1, 2.0), Err(Error::ActionOutOfDomain { .. })));
        assert!(CosineRef::new(0.0).is_err());
    }
}
