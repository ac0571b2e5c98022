//! Critical points of periodic potentials: the Morse certificate, continuation
//! under perturbation, and inversion of the potential on its monotone branches.
//!
//! Angles are reported in a translated frame in which the unique global
//! maximum sits at `±π`. Critical points are indexed `θ_0 = θ_{2N} - 2π <
//! θ_1 < … < θ_{2N}`, odd indices being minima and even indices maxima.

use crate::constants::{CosineConstants, ConstantTable};
use crate::error::{Error, Result};
use crate::potential::FourierPotential;
use crate::report::BoundCheck;
use crate::trig::{wrap_angle, TrigSeries};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const INITIAL_GRID: usize = 4096;
const MAX_GRID: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseData {
    pub n_wells: usize,
    /// `θ_0, …, θ_{2N}` in the translated frame.
    pub theta: Vec<f64>,
    /// `E_0, …, E_{2N}` with `E_0 = E_{2N}`.
    pub energy: Vec<f64>,
    /// `F''(θ_i)`.
    pub curvature: Vec<f64>,
    pub beta: f64,
    pub beta_derivative: f64,
    pub beta_separation: f64,
    /// Supremum of `|F|` on the strip of half-width `s0`.
    pub m: f64,
    pub s0: f64,
    pub theta_star: f64,
    /// Original angle = translated angle + `offset`.
    pub offset: f64,
    /// The potential in the translated frame.
    pub series: TrigSeries,
}

/// Critical points and values of a perturbed potential, indexed as in the
/// reference [`MorseData`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalContinuation {
    pub theta: Vec<f64>,
    pub energy: Vec<f64>,
    pub eta: f64,
    pub checks: Vec<BoundCheck>,
}

impl CriticalContinuation {
    pub fn n_wells(&self) -> usize {
        (self.theta.len() - 1) / 2
    }
}

/// Which end of a monotone branch anchors the square-root factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchEnd {
    /// The minimum `θ_{2j-1}` bounding the branch; `E = E_c + y²`.
    Minimum,
    /// The maximum bounding the branch; `E = E_c - y²`.
    Maximum,
}

/// Zeros of `F'` on `(-π, π]`, by sign scan on a grid doubled until the
/// zero count is unchanged over two refinements, then Newton polish.
pub fn critical_points(series: &TrigSeries) -> Vec<f64> {
    let mut n = INITIAL_GRID;
    let mut counts = Vec::new();
    loop {
        let roots = scan_roots(series, n);
        counts.push(roots.len());
        let k = counts.len();
        if (k >= 3 && counts[k - 1] == counts[k - 2] && counts[k - 2] == counts[k - 3]) || n >= MAX_GRID {
            return roots;
        }
        n *= 2;
    }
}

fn scan_roots(series: &TrigSeries, n: usize) -> Vec<f64> {
    let h = 2.0 * PI / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| -PI + h * i as f64).collect();
    let gs: Vec<f64> = xs[..n].iter().map(|&x| series.derivs(x)[1]).collect();
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..n {
        // periodic wrap: the sample at π is the sample at -π
        let (a, b) = (gs[i], gs[(i + 1) % n]);
        if a == 0.0 {
            roots.push(polish_root(series, xs[i]));
        } else if a * b < 0.0 {
            roots.push(bracketed_root(series, xs[i], xs[i + 1], a));
        }
    }
    let mut out: Vec<f64> = roots.into_iter().map(wrap_angle).collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
    if out.len() > 1 && (out[0] + 2.0 * PI - out[out.len() - 1]).abs() < 1e-10 {
        out.remove(0);
    }
    out
}

/// Safeguarded Newton for a zero of `F'` in `[a, b]` where `F'(a)` has sign of `fa`.
fn bracketed_root(series: &TrigSeries, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let d = series.derivs(x);
        let f = d[1];
        if f == 0.0 {
            return x;
        }
        if (f < 0.0) == (fa < 0.0) {
            a = x;
        } else {
            b = x;
        }
        let newton = x - f / d[2];
        let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) || (b - a) <= 4e-16 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// Plain Newton on `F'` from `x`; returns the last iterate.
fn polish_root(series: &TrigSeries, mut x: f64) -> f64 {
    for _ in 0..60 {
        let d = series.derivs(x);
        if d[2] == 0.0 {
            break;
        }
        let step = d[1] / d[2];
        x -= step;
        if step.abs() <= 1e-16 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// Certify Morse non-degeneracy of `series` and build its [`MorseData`].
pub fn morse_check(series: &TrigSeries, s0: f64) -> Result<MorseData> {
    if series.is_constant() {
        return Err(Error::NoCriticalPoints);
    }
    let m = series.sup_strip(s0);
    let roots = critical_points(series);
    if roots.is_empty() {
        return Err(Error::NoCriticalPoints);
    }
    let tol = 1e-9 * m;
    let mut info = Vec::with_capacity(roots.len());
    for &r in &roots {
        let d = series.derivs(r);
        if d[2].abs() < tol {
            return Err(Error::DegenerateCriticalPoint { theta: r, second: d[2] });
        }
        info.push((r, d[0], d[2]));
    }
    for i in 0..info.len() {
        for j in i + 1..info.len() {
            if (info[i].1 - info[j].1).abs() < tol {
                return Err(Error::NonDistinctCriticalValues { first: info[i].1, second: info[j].1 });
            }
        }
    }
    let top = info
        .iter()
        .filter(|c| c.2 < 0.0)
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .copied()
        .ok_or(Error::NoCriticalPoints)?;
    let offset = top.0 - PI;
    let shifted = series.shifted(offset);

    let mut others: Vec<f64> = info
        .iter()
        .filter(|c| c.0 != top.0)
        .map(|c| polish_root(&shifted, wrap_angle(c.0 - offset)))
        .collect();
    others.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let top_theta = polish_root(&shifted, PI);
    let mut theta = Vec::with_capacity(others.len() + 2);
    theta.push(top_theta - 2.0 * PI);
    theta.extend(others);
    theta.push(top_theta);
    let n_wells = (theta.len() - 1) / 2;
    if theta.len() % 2 == 0 {
        return Err(Error::InvalidInput("odd number of critical points".into()));
    }

    let mut energy = Vec::with_capacity(theta.len());
    let mut curvature = Vec::with_capacity(theta.len());
    for (i, &t) in theta.iter().enumerate() {
        let d = shifted.derivs(t);
        let is_min = i % 2 == 1;
        if is_min != (d[2] > 0.0) {
            return Err(Error::InvalidInput(format!(
                "critical points do not alternate at theta = {t}"
            )));
        }
        energy.push(d[0]);
        curvature.push(d[2]);
    }
    energy[0] = energy[2 * n_wells];

    let grid_floor = (0..8192)
        .map(|i| {
            let d = shifted.derivs(-PI + 2.0 * PI * i as f64 / 8192.0);
            d[1].abs() + d[2].abs()
        })
        .fold(f64::INFINITY, f64::min);
    let beta_derivative = curvature[1..]
        .iter()
        .map(|c| c.abs())
        .fold(f64::INFINITY, f64::min)
        .min(grid_floor);
    let mut beta_separation = f64::INFINITY;
    for i in 1..=2 * n_wells {
        for j in i + 1..=2 * n_wells {
            beta_separation = beta_separation.min((energy[i] - energy[j]).abs());
        }
    }
    let beta = beta_derivative.min(beta_separation);
    Ok(MorseData {
        n_wells,
        theta,
        energy,
        curvature,
        beta,
        beta_derivative,
        beta_separation,
        m,
        s0,
        theta_star: (beta * s0.powi(3) / (3.0 * m)).sqrt(),
        offset,
        series: shifted,
    })
}

/// [`morse_check`] for a parameter-dependent potential at `p`.
pub fn morse_check_potential(
    pot: &FourierPotential,
    p: &crate::potential::ParamPoint,
) -> Result<MorseData> {
    morse_check(&pot.at(p)?, pot.s0())
}

impl MorseData {
    pub fn constants(&self, r0: f64) -> ConstantTable {
        ConstantTable::new(self.m, self.beta, self.s0, r0)
    }

    /// The unperturbed critical set viewed as a trivial continuation.
    pub fn critical_set(&self) -> CriticalContinuation {
        CriticalContinuation {
            theta: self.theta.clone(),
            energy: self.energy.clone(),
            eta: 0.0,
            checks: Vec::new(),
        }
    }

    /// Structural inequalities every accepted potential satisfies.
    pub fn checks(&self) -> Vec<BoundCheck> {
        let mut out = Vec::new();
        let (b, s, m) = (self.beta, self.s0, self.m);
        let min_gap = self.theta.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        out.push(BoundCheck::at_least("critical gap >= 2 theta_*", min_gap, 2.0 * self.theta_star));
        out.push(BoundCheck::at_most(
            "N <= pi / (2 theta_*)",
            self.n_wells as f64,
            PI / (2.0 * self.theta_star),
        ));
        out.push(BoundCheck::at_most("beta <= 2M", b, 2.0 * m));
        out.push(BoundCheck::at_most("beta s0 <= 2M", b * s, 2.0 * m));
        out.push(BoundCheck::at_most("beta s0^2 <= 4M", b * s * s, 4.0 * m));
        let sharp = b * s.powi(3) / (6.0 * m);
        let floor = b * b * s.powi(3) / (32.0 * m);
        let mut worst = f64::INFINITY;
        for w in self.theta.windows(2) {
            let (lo, hi) = (w[0] + 0.5 * sharp, w[1] - 0.5 * sharp);
            if hi <= lo {
                continue;
            }
            let n = 512;
            for k in 0..=n {
                let t = lo + (hi - lo) * k as f64 / n as f64;
                worst = worst.min(self.series.derivs(t)[1].abs());
            }
        }
        out.push(BoundCheck::at_least("min |F'| away from critical points", worst, floor));
        out
    }
}

/// Follow the critical points of a perturbed potential from the reference
/// points by Newton's method and confirm no other critical points exist.
///
/// `series` must be given in the reference frame (translated by
/// `reference.offset`). `eta` is the size of the perturbation used in the
/// displacement bounds.
pub fn continue_critical(
    series: &TrigSeries,
    reference: &MorseData,
    eta: f64,
) -> Result<CriticalContinuation> {
    let n = reference.n_wells;
    let radius = reference.s0 / 8.0;
    let scale = reference.m;
    let mut theta = vec![0.0; 2 * n + 1];
    for i in 1..=2 * n {
        let seed = reference.theta[i];
        let mut x = seed;
        let mut converged = false;
        for _ in 0..80 {
            let d = series.derivs(x);
            if d[2] == 0.0 {
                break;
            }
            let step = d[1] / d[2];
            x -= step;
            if (x - seed).abs() > radius {
                return Err(Error::ContinuationDiverged { index: i });
            }
            if step.abs() <= 1e-15 * (1.0 + x.abs()) {
                converged = true;
                break;
            }
        }
        if !converged && series.derivs(x)[1].abs() > 1e-12 * scale {
            return Err(Error::ContinuationDiverged { index: i });
        }
        theta[i] = x;
    }
    theta[0] = theta[2 * n] - 2.0 * PI;
    for root in critical_points(series) {
        let matched = theta[1..].iter().any(|t| {
            let d = wrap_angle(root - t).abs();
            d < 1e-7
        });
        if !matched {
            return Err(Error::ExtraCriticalPoint { theta: root });
        }
    }
    let mut energy: Vec<f64> = theta.iter().map(|&t| series.eval(t)).collect();
    energy[0] = energy[2 * n];
    let disp = (1..=2 * n)
        .map(|i| (theta[i] - reference.theta[i]).abs())
        .fold(0.0, f64::max);
    let shift = (1..=2 * n)
        .map(|i| (energy[i] - reference.energy[i]).abs())
        .fold(0.0, f64::max);
    let checks = vec![
        BoundCheck::at_most(
            "|theta_i - theta_bar_i| <= 2 eta / (beta s0)",
            disp,
            2.0 * eta / (reference.beta * reference.s0),
        ),
        BoundCheck::at_most("|E_i - E_bar_i| <= 2 eta", shift, 2.0 * eta),
    ];
    Ok(CriticalContinuation { theta, energy, eta, checks })
}

/// The angle `Θ_i(E) ∈ [θ_{i-1}, θ_i]` with `G(Θ_i(E)) = E`.
pub fn branch_invert(
    series: &TrigSeries,
    crit: &CriticalContinuation,
    i: usize,
    e: f64,
) -> Result<f64> {
    let n2 = crit.theta.len() - 1;
    if i == 0 || i > n2 {
        return Err(Error::NoSuchRegion { region: i, max: n2 });
    }
    let (ea, eb) = (crit.energy[i - 1], crit.energy[i]);
    if !(e > ea.min(eb) && e < ea.max(eb)) {
        return Err(Error::EnergyOutOfBranch { branch: i, energy: e });
    }
    // the minimum bounds the branch on one side
    let (tmin, emin) = if i % 2 == 1 {
        (crit.theta[i], crit.energy[i])
    } else {
        (crit.theta[i - 1], crit.energy[i - 1])
    };
    let target = e - emin;
    let f = |t: f64| series.diff(t, tmin) - target;
    let (mut a, mut b) = (crit.theta[i - 1], crit.theta[i]);
    let fa_neg = f(a) < 0.0;
    let mut x = 0.5 * (a + b);
    for _ in 0..300 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == fa_neg {
            a = x;
        } else {
            b = x;
        }
        let d = series.derivs(x)[1];
        let newton = x - fx / d;
        let next = if d != 0.0 && newton > a.min(b) && newton < a.max(b) {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= 2e-16 * (1.0 + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// `Σ_{i,±}(y) = |Θ_i(E) - θ_c| / y` with `E = E_c ± y²`.
///
/// For negative `y` the factor of the mirror branch sharing the anchor point
/// is returned at `|y|`, which is the analytic continuation through `y = 0`.
pub fn sqrt_factor(
    series: &TrigSeries,
    crit: &CriticalContinuation,
    i: usize,
    end: BranchEnd,
    y: f64,
) -> Result<f64> {
    let n2 = crit.theta.len() - 1;
    if i == 0 || i > n2 {
        return Err(Error::NoSuchRegion { region: i, max: n2 });
    }
    let (branch, y) = if y < 0.0 { (mirror_branch(i, end, n2), -y) } else { (i, y) };
    let (c, sigma) = anchor(branch, end);
    let (tc, ec) = (crit.theta[c], crit.energy[c]);
    let d = series.derivs(tc);
    if y < 1e-4 {
        let a = 0.5 * d[2].abs();
        let s = match end {
            BranchEnd::Minimum => sigma,
            BranchEnd::Maximum => -sigma,
        };
        let cub = s * d[3] / 6.0;
        return Ok(1.0 / a.sqrt() - cub / (2.0 * a * a) * y);
    }
    let e = match end {
        BranchEnd::Minimum => ec + y * y,
        BranchEnd::Maximum => ec - y * y,
    };
    let theta = branch_invert(series, crit, branch, e)
        .map_err(|_| Error::TooCloseToSeparatrix { branch, y, energy: e })?;
    Ok((theta - tc).abs() / y)
}

/// Critical index anchoring branch `i` at `end`, with the direction `σ`
/// pointing from the anchor into the branch.
fn anchor(i: usize, end: BranchEnd) -> (usize, f64) {
    let anchor = match (end, i % 2) {
        (BranchEnd::Minimum, 1) => i,
        (BranchEnd::Minimum, _) => i - 1,
        (BranchEnd::Maximum, 1) => i - 1,
        (BranchEnd::Maximum, _) => i,
    };
    let sigma = if anchor == i { -1.0 } else { 1.0 };
    (anchor, sigma)
}

fn mirror_branch(i: usize, end: BranchEnd, n2: usize) -> usize {
    match (end, i % 2) {
        (BranchEnd::Minimum, 1) => i + 1,
        (BranchEnd::Minimum, _) => i - 1,
        (BranchEnd::Maximum, 1) => {
            if i == 1 {
                n2
            } else {
                i - 1
            }
        }
        (BranchEnd::Maximum, _) => {
            if i == n2 {
                1
            } else {
                i + 1
            }
        }
    }
}

/// Whether `series` lies within `η◊⋆(η, s0, r0)` of `-η cos` in the
/// sup-Fourier norm of width `s0`.
pub fn cosine_like_check(series: &TrigSeries, eta: f64, s0: f64, r0: f64) -> bool {
    let distance = series.add(&TrigSeries::cosine(-eta)).sup_fourier_norm(s0);
    CosineConstants::new(eta, s0, r0).eta_diamond_star.bounds(distance)
}

/// [`cosine_like_check`] over the whole parameter box of a potential.
pub fn cosine_like_check_potential(pot: &FourierPotential, eta: f64, r0: f64) -> Result<bool> {
    let shifted = pot.plus_cosine(eta);
    let distance = shifted.sup_fourier_norm_box(pot.s0())?;
    Ok(CosineConstants::new(eta, pot.s0(), r0).eta_diamond_star.bounds(distance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pendulum() -> MorseData {
        morse_check(&TrigSeries::cosine(1.0), 1.0).unwrap()
    }

    pub(crate) fn two_well() -> TrigSeries {
        TrigSeries::new(0.0, vec![-0.3, -1.0], vec![0.2, 0.0])
    }

    #[test]
    fn pendulum_morse_data() {
        let md = pendulum();
        assert_eq!(md.n_wells, 1);
        assert_relative_eq!(md.theta[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(md.theta[2], PI, epsilon = 1e-15);
        assert_relative_eq!(md.theta[0], -PI, epsilon = 1e-15);
        assert_relative_eq!(md.energy[1], -1.0, epsilon = 1e-15);
        assert_relative_eq!(md.energy[2], 1.0, epsilon = 1e-15);
        assert_relative_eq!(md.beta, 1.0, epsilon = 1e-12);
        assert_relative_eq!(md.m, 1f64.cosh(), max_relative = 1e-12);
        assert!(md.checks().iter().all(|c| c.holds), "{:?}", md.checks());
    }

    #[test]
    fn equal_minima_are_rejected() {
        let g = TrigSeries::new(0.0, vec![-1.0, 0.3], vec![]);
        match morse_check(&g, 1.0) {
            Err(Error::NonDistinctCriticalValues { first, second }) => {
                // minima at ±arccos(5/6) with value -5/6 + 0.3 (2·25/36 - 1)
                let e = -5.0 / 6.0 + 0.3 * (2.0 * 25.0 / 36.0 - 1.0);
                assert_relative_eq!(first, e, max_relative = 1e-9);
                assert_relative_eq!(second, e, max_relative = 1e-9);
                assert_relative_eq!(e, -0.716667, max_relative = 1e-5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_and_degenerate_potentials() {
        assert_eq!(morse_check(&TrigSeries::new(0.0, vec![0.0], vec![0.0]), 1.0), Err(Error::NoCriticalPoints));
        // -cos θ + 0.25 cos 2θ has F''(π) = 1 - 1 = 0
        let g = TrigSeries::new(0.0, vec![-1.0, 0.25], vec![]);
        assert!(matches!(morse_check(&g, 1.0), Err(Error::DegenerateCriticalPoint { .. })));
    }

    #[test]
    fn translation_invariance() {
        let g = TrigSeries::cosine(1.0).shifted(-0.7);
        let md = morse_check(&g, 1.0).unwrap();
        let p = pendulum();
        assert_eq!(md.n_wells, 1);
        assert_relative_eq!(md.beta, p.beta, max_relative = 1e-12);
        assert_relative_eq!(md.m, p.m, max_relative = 1e-12);
        assert_relative_eq!(md.theta[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(md.offset - 0.7), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_well_structure() {
        let md = morse_check(&two_well(), 1.0).unwrap();
        assert_eq!(md.n_wells, 2);
        assert!(md.energy[2] < md.energy[4]);
        assert!(md.checks().iter().all(|c| c.holds), "{:?}", md.checks());
        for i in 1..=4 {
            assert!(md.series.derivs(md.theta[i])[1].abs() <= 1e-12 * md.m);
        }
    }

    #[test]
    fn continuation_of_tilted_cosine() {
        let md = pendulum();
        let same = continue_critical(&md.series, &md, 0.0).unwrap();
        assert_eq!(same.theta, md.theta);
        let eta = 1e-4;
        let g = md.series.add(&TrigSeries::new(0.0, vec![0.0], vec![eta]));
        let c = continue_critical(&g, &md, eta).unwrap();
        assert_relative_eq!(c.theta[1], -eta.atan(), epsilon = 1e-15);
        assert!(c.checks.iter().all(|b| b.holds));
    }

    #[test]
    fn continuation_failures() {
        let md = pendulum();
        let g = TrigSeries::new(0.0, vec![-1.0], vec![3.0]);
        assert!(matches!(continue_critical(&g, &md, 3.0), Err(Error::ContinuationDiverged { .. })));
        let g = TrigSeries::new(0.0, vec![-1.0, 0.0, 0.2], vec![]);
        assert!(matches!(continue_critical(&g, &md, 0.2), Err(Error::ExtraCriticalPoint { .. })));
    }

    #[test]
    fn branch_inversion_pendulum() {
        let md = pendulum();
        let c = md.critical_set();
        assert_relative_eq!(branch_invert(&md.series, &c, 2, 0.0).unwrap(), PI / 2.0, epsilon = 1e-14);
        assert_relative_eq!(branch_invert(&md.series, &c, 1, -0.5).unwrap(), -PI / 3.0, epsilon = 1e-15);
        let near = branch_invert(&md.series, &c, 1, -1.0 + 1e-14).unwrap();
        assert!(near.abs() < 1e-6);
        assert!(matches!(branch_invert(&md.series, &c, 1, 1.5), Err(Error::EnergyOutOfBranch { .. })));
    }

    #[test]
    fn sqrt_factor_pendulum() {
        let md = pendulum();
        let c = md.critical_set();
        let s0 = sqrt_factor(&md.series, &c, 2, BranchEnd::Minimum, 0.0).unwrap();
        assert_relative_eq!(s0, 2f64.sqrt(), max_relative = 1e-15);
        let y: f64 = 0.1;
        let closed = (1.0 - y * y).acos() / y;
        let s = sqrt_factor(&md.series, &c, 2, BranchEnd::Minimum, y).unwrap();
        assert_relative_eq!(s, closed, max_relative = 1e-12);
        // continuity at the Taylor switch
        let a = sqrt_factor(&md.series, &c, 2, BranchEnd::Minimum, 0.99999e-4).unwrap();
        let b = sqrt_factor(&md.series, &c, 2, BranchEnd::Minimum, 1.00001e-4).unwrap();
        assert!((a - b).abs() < 1e-6);
        assert!(matches!(
            sqrt_factor(&md.series, &c, 2, BranchEnd::Minimum, 1.5),
            Err(Error::TooCloseToSeparatrix { .. })
        ));
    }

    #[test]
    fn sqrt_factor_mirror_is_smooth_through_zero() {
        let md = morse_check(&two_well(), 1.0).unwrap();
        let c = md.critical_set();
        let f = |y: f64| sqrt_factor(&md.series, &c, 2, BranchEnd::Minimum, y).unwrap();
        assert_relative_eq!(
            f(-0.05),
            sqrt_factor(&md.series, &c, 1, BranchEnd::Minimum, 0.05).unwrap(),
            max_relative = 1e-15
        );
        // a smooth function has small third differences across y = 0
        let h = 0.02;
        let third = f(2.0 * h) - 3.0 * f(h) + 3.0 * f(0.0) - f(-h);
        let scale = f(0.0);
        assert!(third.abs() < 1e-3 * scale, "third difference {third}");
        let at_max = sqrt_factor(&md.series, &c, 2, BranchEnd::Maximum, 0.0).unwrap();
        assert_relative_eq!(at_max, (2.0 / md.curvature[2].abs()).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn cosine_like_examples() {
        assert!(cosine_like_check(&TrigSeries::cosine(1.0), 1.0, 1.0, 1.0));
        let tilted = TrigSeries::new(0.0, vec![-1.0], vec![0.5]);
        assert!(!cosine_like_check(&tilted, 1.0, 1.0, 1.0));
        let eps = CosineConstants::new(1.0, 1.0, 1.0).eta_diamond_star.value / 2.0;
        let g = TrigSeries::new(0.0, vec![-1.0], vec![eps]);
        assert!(cosine_like_check(&g, 1.0, 1.0, 1.0));
        let md = morse_check(&g, 1.0).unwrap();
        assert_eq!(md.n_wells, 1);
        assert!(md.beta >= 0.25);
        assert!(md.m <= 0.25 + 1f64.cosh());
    }

    proptest! {
        #[test]
        fn inversion_inverts_potential(t in 0.01f64..0.99) {
            let md = morse_check(&two_well(), 1.0).unwrap();
            let c = md.critical_set();
            for i in 1..=4 {
                let theta = c.theta[i - 1] + t * (c.theta[i] - c.theta[i - 1]);
                let e = md.series.eval(theta);
                let back = branch_invert(&md.series, &c, i, e).unwrap();
                prop_assert!((back - theta).abs() < 1e-10);
            }
        }

        #[test]
        fn branches_are_monotone(a in 0.05f64..0.95, b in 0.05f64..0.95) {
            let md = pendulum();
            let c = md.critical_set();
            let (lo, hi) = (a.min(b) * 2.0 - 1.0, a.max(b) * 2.0 - 1.0);
            prop_assume!(hi - lo > 1e-6);
            prop_assert!(branch_invert(&md.series, &c, 2, hi).unwrap() > branch_invert(&md.series, &c, 2, lo).unwrap());
            prop_assert!(branch_invert(&md.series, &c, 1, hi).unwrap() < branch_invert(&md.series, &c, 1, lo).unwrap());
        }
    }
}
