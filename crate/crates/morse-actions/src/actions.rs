//! Phase-space regions and the actions `I^(i)(E)` with their energy derivatives.
//!
//! The level set `{ (1+b)(p - P*)² + G(θ) = E }` splits into `2N + 1` regions:
//! odd `i = 2j-1` are the wells around the minima `θ_{2j-1}`, even
//! `0 < i < 2N` are the over-barrier regions above an inner maximum, and
//! `i ∈ {0, 2N}` are the two rotational regions above the global maximum.
//!
//! Every action is assembled from elementary pieces attached to a minimum
//! `θ_m`: a *half* piece runs from `θ_m` to the turning point on one side,
//! a *full* piece runs from `θ_m` to the adjacent maximum. Two independent
//! quadrature routes are available:
//!
//! * the *bottom* route parametrises each half piece by `φ ∈ [0, π/2]` with
//!   `G(θ) - E_m = Δ cos²φ`, which removes the square-root endpoint
//!   singularity exactly and stays regular as `Δ = E - E_m → 0`;
//! * the *direct* route integrates in `θ` between the turning points with an
//!   `s = L u²` substitution at each turning point.
//!
//! Both routes cluster nodes with a sinh map wherever the energy is close to
//! a maximum, which is where the logarithmic singularity develops.

use crate::error::{Error, Result};
use crate::morse::{branch_invert, CriticalContinuation, MorseData};
use crate::quadrature::Quadrature;
use crate::report::BoundCheck;
use crate::trig::TrigSeries;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Momentum-dependent kinetic data of a normalised system on a fixed
/// parameter slice. Angles are in the translated frame of the system.
pub trait Kinetic: Send + Sync {
    fn pstar(&self) -> f64;
    /// `𝒫(z, θ)`, solving `p = P* + z / √(1 + b(p, θ))`.
    fn momentum(&self, z: f64, theta: f64) -> Result<f64>;
    fn momentum_dz(&self, z: f64, theta: f64) -> Result<f64>;
    fn b_dag(&self, v: f64, theta: f64) -> Result<f64>;
    fn b_tilde(&self, v: f64, theta: f64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Well,
    OverBarrier,
    Rotational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub index: usize,
    pub kind: RegionKind,
    pub lower: f64,
    pub upper: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_diamond: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_minus: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_plus: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_star: Option<usize>,
    /// Minima whose half or full pieces make up the region, left to right.
    pub minima: Vec<usize>,
    /// Maxima strictly inside the `θ`-interval of the region.
    pub interior_maxima: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTable {
    pub n_wells: usize,
    pub r_big: f64,
    pub regions: Vec<Region>,
}

impl RegionTable {
    pub fn region(&self, i: usize) -> Result<&Region> {
        self.regions
            .get(i)
            .ok_or(Error::NoSuchRegion { region: i, max: 2 * self.n_wells })
    }
}

/// Build the region table. Indices are resolved on the reference energies
/// of `morse`, windows use the continued energies of `crit`.
pub fn region_table(morse: &MorseData, crit: &CriticalContinuation, r_big: f64) -> Result<RegionTable> {
    let required = 2.0 * morse.m.sqrt();
    if !(r_big >= required) {
        return Err(Error::R0TooSmall { r0_big: r_big, required });
    }
    let n = morse.n_wells;
    let eb = &morse.energy;
    let e = &crit.energy;
    let rot_top = if r_big.is_finite() { r_big * r_big - 2.0 * morse.m } else { f64::INFINITY };
    let mut regions = Vec::with_capacity(2 * n + 1);
    let rotational = |index| Region {
        index,
        kind: RegionKind::Rotational,
        lower: e[2 * n],
        upper: rot_top,
        j_diamond: None,
        j_minus: None,
        j_plus: None,
        j_star: None,
        minima: (1..=n).map(|j| 2 * j - 1).collect(),
        interior_maxima: (1..n).map(|j| 2 * j).collect(),
    };
    regions.push(rotational(0));
    for i in 1..2 * n {
        let j = (i + 1) / 2;
        if i % 2 == 1 {
            let jd = if eb[2 * j - 2] < eb[2 * j] { j - 1 } else { j };
            regions.push(Region {
                index: i,
                kind: RegionKind::Well,
                lower: e[i],
                upper: e[2 * jd],
                j_diamond: Some(jd),
                j_minus: None,
                j_plus: None,
                j_star: None,
                minima: vec![i],
                interior_maxima: Vec::new(),
            });
        } else {
            let j = i / 2;
            let jm = (0..j).rev().find(|&k| eb[2 * k] > eb[2 * j]).expect("global maximum exceeds");
            let jp = (j + 1..=n).find(|&k| eb[2 * k] > eb[2 * j]).expect("global maximum exceeds");
            let js = if eb[2 * jm] < eb[2 * jp] { jm } else { jp };
            regions.push(Region {
                index: i,
                kind: RegionKind::OverBarrier,
                lower: e[2 * j],
                upper: e[2 * js],
                j_diamond: None,
                j_minus: Some(jm),
                j_plus: Some(jp),
                j_star: Some(js),
                minima: (jm + 1..=jp).map(|k| 2 * k - 1).collect(),
                interior_maxima: (jm + 1..jp).map(|k| 2 * k).collect(),
            });
        }
    }
    regions.push(rotational(2 * n));
    Ok(RegionTable { n_wells: n, r_big, regions })
}

/// Quadrature route for the first energy derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivPath {
    /// Bottom route near well bottoms, direct route elsewhere.
    Auto,
    Bottom,
    Direct,
}

/// An elementary piece attached to minimum `min`, on side `side = ±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub min: usize,
    pub side: i32,
    /// Runs to the adjacent maximum instead of to a turning point.
    pub full: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceValue {
    pub piece: Piece,
    /// `(1/π) ∫ √(E - G) (1 + b†) dθ` over the piece.
    pub value: f64,
}

#[derive(Debug, Clone, Copy)]
enum Integrand {
    Action,
    Deriv,
    Second,
    RotAction(f64),
    RotDeriv(f64),
}

/// Everything needed to evaluate actions at one parameter value.
#[derive(Clone)]
pub struct ActionSystem {
    pub series: TrigSeries,
    pub morse: MorseData,
    pub crit: CriticalContinuation,
    pub table: RegionTable,
    pub quad: Quadrature,
    kinetic: Option<Arc<dyn Kinetic>>,
}

impl std::fmt::Debug for ActionSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ActionSystem")
            .field("table", &self.table)
            .field("kinetic", &self.kinetic.is_some())
            .finish()
    }
}

impl ActionSystem {
    /// Pure potential (`b ≡ 0`, `P* = 0`) with unbounded rotational windows.
    pub fn pure(morse: MorseData) -> Self {
        let crit = morse.critical_set();
        let table = region_table(&morse, &crit, f64::INFINITY).expect("infinite R0 is admissible");
        ActionSystem {
            series: morse.series.clone(),
            morse,
            crit,
            table,
            quad: Quadrature::default(),
            kinetic: None,
        }
    }

    /// General system: `series` in the frame of `morse`, critical data `crit`.
    pub fn new(
        series: TrigSeries,
        morse: MorseData,
        crit: CriticalContinuation,
        r_big: f64,
        kinetic: Option<Arc<dyn Kinetic>>,
    ) -> Result<Self> {
        let table = region_table(&morse, &crit, r_big)?;
        Ok(ActionSystem { series, morse, crit, table, quad: Quadrature::default(), kinetic })
    }

    pub fn with_quadrature(mut self, quad: Quadrature) -> Self {
        self.quad = quad;
        self
    }

    pub fn n_wells(&self) -> usize {
        self.table.n_wells
    }

    pub fn has_kinetic(&self) -> bool {
        self.kinetic.is_some()
    }

    pub fn pstar(&self) -> f64 {
        self.kinetic.as_ref().map(|k| k.pstar()).unwrap_or(0.0)
    }

    pub fn branch(&self, i: usize) -> Result<ActionBranch<'_>> {
        let region = self.table.region(i)?;
        Ok(ActionBranch { sys: self, region })
    }

    fn weight_action(&self, v: f64, theta: f64) -> Result<f64> {
        match self.kinetic.as_deref() {
            Some(k) => Ok(1.0 + k.b_dag(v, theta)?),
            None => Ok(1.0),
        }
    }

    fn weight_deriv(&self, v: f64, theta: f64) -> Result<f64> {
        match self.kinetic.as_deref() {
            Some(k) => Ok(1.0 + k.b_tilde(v, theta)?),
            None => Ok(1.0),
        }
    }

    fn integrand(&self, kind: Integrand, v: f64, theta: f64) -> Result<f64> {
        let v = v.max(0.0);
        let k = self.kinetic.as_deref();
        Ok(match kind {
            Integrand::Action => v.sqrt() * self.weight_action(v, theta)?,
            Integrand::Deriv => self.weight_deriv(v, theta)? / v.sqrt(),
            Integrand::Second => -0.5 / (v * v.sqrt()),
            Integrand::RotAction(s) => match k {
                Some(k) => k.momentum(s * v.sqrt(), theta)?,
                None => s * v.sqrt(),
            },
            Integrand::RotDeriv(s) => {
                let dz = match k {
                    Some(k) => k.momentum_dz(s * v.sqrt(), theta)?,
                    None => 1.0,
                };
                s * dz / (2.0 * v.sqrt())
            }
        })
    }

    /// Solve `G(θ_m + σx) - E_m = y²` for `x ∈ [0, len]`.
    fn turning_offset(&self, tm: f64, sigma: f64, len: f64, curv: f64, y: f64) -> f64 {
        let target = y * y;
        let (mut lo, mut hi) = (0.0, len);
        let mut x = (y * (2.0 / curv).sqrt()).min(0.5 * len);
        for _ in 0..200 {
            let f = self.series.increment(tm, sigma * x) - target;
            if f == 0.0 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let slope = sigma * self.series.derivs(tm + sigma * x)[1];
            let newton = x - f / slope;
            let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - x).abs() <= 1e-16 * x.max(1e-300) || hi - lo <= 2e-16 * hi {
                return next;
            }
            x = next;
        }
        x
    }

    /// Half piece by the bottom route: `∫_{θ_m}^{turning point}` in the
    /// `φ`-variable. Returns the unnormalised integral.
    fn half_bottom(&self, m: usize, side: i32, e: f64, kind: Integrand) -> Result<f64> {
        let sigma = side as f64;
        let tm = self.crit.theta[m];
        let em = self.crit.energy[m];
        let top = (m as i64 + side as i64) as usize;
        let delta = e - em;
        let gap = self.crit.energy[top] - e;
        if !(delta > 0.0) || !(gap > 0.0) {
            return Err(Error::EnergyOutOfBranch { branch: m, energy: e });
        }
        let len = (self.crit.theta[top] - tm).abs();
        let curv = self.series.derivs(tm)[2];
        let sd = delta.sqrt();
        let scale = (gap / delta).sqrt();
        let f = |phi: f64| -> Result<f64> {
            let (sphi, cphi) = phi.sin_cos();
            let y = sd * cphi;
            let (x, d1, d2) = if y == 0.0 {
                (0.0, 0.0, curv)
            } else {
                let x = self.turning_offset(tm, sigma, len, curv, y);
                let d = self.series.derivs(tm + sigma * x);
                (x, sigma * d[1], d[2])
            };
            let r = if y == 0.0 { 1.0 / (2.0 * curv).sqrt() } else { y / d1 };
            let theta = tm + sigma * x;
            let v = delta * sphi * sphi;
            Ok(match kind {
                Integrand::Action => 2.0 * v * r * self.weight_action(v, theta)?,
                Integrand::Deriv => 2.0 * r * self.weight_deriv(v, theta)?,
                Integrand::Second => {
                    let dr = if y == 0.0 {
                        let c = sigma * self.series.derivs(tm)[3] / 6.0;
                        let a = 0.5 * curv;
                        -c / (2.0 * a * a)
                    } else {
                        (d1 * d1 - 2.0 * y * y * d2) / (d1 * d1 * d1)
                    };
                    dr * cphi / sd
                }
                _ => unreachable!("rotational integrands have no half pieces"),
            })
        };
        self.quad.integrate_clustered(0.5 * PI, scale, f)
    }

    /// `∫` from the maximum `θ_top` over length `len` in direction `dir`,
    /// clustering nodes at the maximum. `E` must exceed `E_top`.
    fn from_maximum(&self, top: usize, dir: f64, len: f64, e: f64, kind: Integrand) -> Result<f64> {
        let tt = self.crit.theta[top];
        let delta = e - self.crit.energy[top];
        if !(delta > 0.0) {
            return Err(Error::InteriorTurningPoint {
                region: top,
                energy: e,
                maximum: self.crit.energy[top],
            });
        }
        let curv = self.series.derivs(tt)[2].abs();
        let scale = (2.0 * delta / curv).sqrt();
        self.quad.integrate_clustered(len, scale, |xi| {
            let theta = tt + dir * xi;
            let v = delta - self.series.increment(tt, dir * xi);
            self.integrand(kind, v, theta)
        })
    }

    /// `∫` from the turning point `t` (where `G(t) = E`) over length `len`
    /// in direction `dir`, via `s = len · u²`.
    fn from_turning(&self, t: f64, dir: f64, len: f64, kind: Integrand) -> Result<f64> {
        let d = self.series.derivs(t);
        let (g1, g2) = (d[1].abs(), d[2].abs());
        let sc = if g2 > 0.0 { 2.0 * g1 / g2 } else { f64::INFINITY };
        let scale = (sc / len).sqrt();
        self.quad.integrate_clustered(1.0, scale, |u| {
            let s = len * u * u;
            let theta = t + dir * s;
            let v = -self.series.increment(t, dir * s);
            Ok(self.integrand(kind, v, theta)? * 2.0 * len * u)
        })
    }

    /// `(1/2π) ∫ (1 + b̃)/√(E - G) dθ` from the minimum `θ_m` to the adjacent
    /// maximum on side `side`, for `E` above that maximum.
    pub fn full_piece_deriv(&self, m: usize, side: i32, e: f64) -> Result<f64> {
        let n2 = 2 * self.n_wells();
        if m % 2 == 0 || m >= n2 || side.abs() != 1 {
            return Err(Error::InvalidInput(format!("no full piece at minimum {m}, side {side}")));
        }
        Ok(self.full_piece(m, side, e, Integrand::Deriv)? / (2.0 * PI))
    }

    fn full_piece(&self, m: usize, side: i32, e: f64, kind: Integrand) -> Result<f64> {
        let top = (m as i64 + side as i64) as usize;
        let len = (self.crit.theta[top] - self.crit.theta[m]).abs();
        self.from_maximum(top, -(side as f64), len, e, kind)
    }
}

/// One region of an [`ActionSystem`].
#[derive(Clone, Copy)]
pub struct ActionBranch<'a> {
    sys: &'a ActionSystem,
    region: &'a Region,
}

/// Human-readable description of the quadrature used by a branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePlan {
    pub region: usize,
    pub pieces: Vec<Piece>,
    pub half_route: String,
    pub full_route: String,
    pub panel_nodes: usize,
    pub tolerance: f64,
}

impl<'a> ActionBranch<'a> {
    pub fn index(&self) -> usize {
        self.region.index
    }

    pub fn region(&self) -> &Region {
        self.region
    }

    pub fn system(&self) -> &ActionSystem {
        self.sys
    }

    pub fn window(&self) -> (f64, f64) {
        (self.region.lower, self.region.upper)
    }

    fn is_rotational(&self) -> bool {
        self.region.kind == RegionKind::Rotational
    }

    /// `+1` for `I^(2N)`, `-1` for `I^(0)`.
    fn rot_sign(&self) -> f64 {
        if self.region.index == 0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn pieces(&self) -> Vec<Piece> {
        let ms = &self.region.minima;
        let mut out = Vec::new();
        for (k, &m) in ms.iter().enumerate() {
            let rot = self.is_rotational();
            out.push(Piece { min: m, side: -1, full: rot || k > 0 });
            out.push(Piece { min: m, side: 1, full: rot || k + 1 < ms.len() });
        }
        out
    }

    pub fn plan(&self) -> QuadraturePlan {
        QuadraturePlan {
            region: self.region.index,
            pieces: self.pieces(),
            half_route: "phi substitution, sinh clustering at the turning point".into(),
            full_route: "theta, sinh clustering at the maximum".into(),
            panel_nodes: self.sys.quad.panel_nodes,
            tolerance: self.sys.quad.tol,
        }
    }

    fn check_window(&self, e: f64) -> Result<()> {
        let (lo, hi) = self.window();
        if e > lo && e < hi && e.is_finite() {
            Ok(())
        } else {
            Err(Error::EnergyOutOfWindow { region: self.region.index, energy: e, lower: lo, upper: hi })
        }
    }

    fn check_interior(&self, e: f64) -> Result<()> {
        for &k in &self.region.interior_maxima {
            if !(e > self.sys.crit.energy[k]) {
                return Err(Error::InteriorTurningPoint {
                    region: self.region.index,
                    energy: e,
                    maximum: self.sys.crit.energy[k],
                });
            }
        }
        Ok(())
    }

    fn piece_integral(&self, p: Piece, e: f64, kind: Integrand) -> Result<f64> {
        if p.full {
            self.sys.full_piece(p.min, p.side, e, kind)
        } else {
            self.sys.half_bottom(p.min, p.side, e, kind)
        }
    }

    fn sum_pieces(&self, e: f64, kind: Integrand) -> Result<f64> {
        self.pieces().into_iter().map(|p| self.piece_integral(p, e, kind)).sum()
    }

    /// `I^(i)(E)`.
    pub fn action(&self, e: f64) -> Result<f64> {
        self.check_window(e)?;
        self.check_interior(e)?;
        if self.is_rotational() {
            let s = self.rot_sign();
            Ok(self.sum_pieces(e, Integrand::RotAction(s))? / (2.0 * PI))
        } else {
            Ok(self.sum_pieces(e, Integrand::Action)? / PI)
        }
    }

    /// `I^(i)(E)` by the direct route (turning points located first).
    pub fn action_direct(&self, e: f64) -> Result<f64> {
        self.check_window(e)?;
        self.check_interior(e)?;
        if self.is_rotational() {
            let s = self.rot_sign();
            Ok(self.direct(e, Integrand::RotAction(s))? / (2.0 * PI))
        } else {
            Ok(self.direct(e, Integrand::Action)? / PI)
        }
    }

    /// `∂_E I^(i)(E)`.
    pub fn action_deriv(&self, e: f64) -> Result<f64> {
        self.action_deriv_with(e, DerivPath::Auto)
    }

    pub fn action_deriv_with(&self, e: f64, path: DerivPath) -> Result<f64> {
        self.check_window(e)?;
        self.check_interior(e)?;
        if self.is_rotational() {
            let s = self.rot_sign();
            let kind = Integrand::RotDeriv(s);
            let raw = match path {
                DerivPath::Direct => self.direct(e, kind)?,
                _ => self.sum_pieces(e, kind)?,
            };
            return Ok(raw / (2.0 * PI));
        }
        let bottom = match path {
            DerivPath::Bottom => true,
            DerivPath::Direct => false,
            DerivPath::Auto => {
                self.region.kind == RegionKind::Well
                    && e - self.region.lower < self.bottom_radius()
            }
        };
        let raw = if bottom {
            self.sum_pieces(e, Integrand::Deriv)?
        } else {
            self.direct(e, Integrand::Deriv)?
        };
        Ok(raw / (2.0 * PI))
    }

    /// Width of the energy band above a well bottom served by the bottom route.
    pub fn bottom_radius(&self) -> f64 {
        0.1 * self.sys.morse.beta
    }

    /// `∂_EE I^(i)(E)`: exact formula for pure potentials, Richardson
    /// extrapolated differences of `∂_E I` otherwise.
    pub fn action_second_deriv(&self, e: f64) -> Result<f64> {
        self.check_window(e)?;
        self.check_interior(e)?;
        if self.sys.kinetic.is_none() {
            let raw = if self.is_rotational() {
                self.rot_sign() * self.sum_pieces(e, Integrand::Second)? / 2.0
            } else {
                let mut acc = 0.0;
                for p in self.pieces() {
                    acc += self.piece_integral(p, e, Integrand::Second)?;
                }
                acc
            };
            return Ok(raw / (2.0 * PI));
        }
        let (lo, hi) = self.window();
        let room = (e - lo).min(hi - e);
        let h = (0.05 * room).min(1e-3 * (1.0 + e.abs()));
        let d = |h: f64| -> Result<f64> {
            Ok((self.action_deriv(e + h)? - self.action_deriv(e - h)?) / (2.0 * h))
        };
        let (d1, d2) = (d(h)?, d(0.5 * h)?);
        Ok((4.0 * d2 - d1) / 3.0)
    }

    /// Values of the elementary pieces, each normalised by `1/π`.
    pub fn piece_values(&self, e: f64) -> Result<Vec<PieceValue>> {
        self.check_window(e)?;
        self.check_interior(e)?;
        self.pieces()
            .into_iter()
            .map(|p| Ok(PieceValue { piece: p, value: self.piece_integral(p, e, Integrand::Action)? / PI }))
            .collect()
    }

    /// Turning points bounding the `θ`-interval of a non-rotational region.
    pub fn turning_points(&self, e: f64) -> Result<(f64, f64)> {
        let ms = &self.region.minima;
        let (first, last) = (ms[0], ms[ms.len() - 1]);
        let left = branch_invert(&self.sys.series, &self.sys.crit, first, e)?;
        let right = branch_invert(&self.sys.series, &self.sys.crit, last + 1, e)?;
        Ok((left, right))
    }

    /// Direct route: split the `θ`-interval at interior maxima (and at the
    /// midpoint of every sub-interval), treating each end by its type.
    fn direct(&self, e: f64, kind: Integrand) -> Result<f64> {
        enum End {
            Turning(f64),
            Max(usize),
        }
        let crit = &self.sys.crit;
        let mut ends = Vec::new();
        if self.is_rotational() {
            ends.push(End::Max(0));
            for &k in &self.region.interior_maxima {
                ends.push(End::Max(k));
            }
            ends.push(End::Max(2 * self.sys.n_wells()));
        } else {
            let (l, r) = self.turning_points(e)?;
            ends.push(End::Turning(l));
            for &k in &self.region.interior_maxima {
                ends.push(End::Max(k));
            }
            ends.push(End::Turning(r));
        }
        let pos = |end: &End| match end {
            End::Turning(t) => *t,
            End::Max(k) => crit.theta[*k],
        };
        let mut total = 0.0;
        for w in ends.windows(2) {
            let (a, b) = (pos(&w[0]), pos(&w[1]));
            let half = 0.5 * (b - a);
            for (end, dir) in [(&w[0], 1.0), (&w[1], -1.0)] {
                total += match end {
                    End::Turning(t) => self.sys.from_turning(*t, dir, half, kind)?,
                    End::Max(k) => self.sys.from_maximum(*k, dir, half, e, kind)?,
                };
            }
        }
        Ok(total)
    }
}

/// Residual of one split identity at one energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResidual {
    pub identity: String,
    pub region: usize,
    pub energy: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / (1 + |lhs|)`.
    pub residual: f64,
}

impl SplitResidual {
    fn new(identity: &str, region: usize, energy: f64, lhs: f64, rhs: f64) -> Self {
        SplitResidual {
            identity: identity.into(),
            region,
            energy,
            lhs,
            rhs,
            residual: (lhs - rhs).abs() / (1.0 + lhs.abs()),
        }
    }
}

/// Check the decomposition of every action that is defined at `E` into its
/// elementary pieces. The left-hand sides use the direct route, the pieces
/// use the bottom route.
pub fn split_identities(sys: &ActionSystem, e: f64) -> Result<Vec<SplitResidual>> {
    let mut out = Vec::new();
    let n2 = 2 * sys.n_wells();
    for i in 1..n2 {
        let br = sys.branch(i)?;
        let (lo, hi) = br.window();
        if !(e > lo && e < hi) {
            continue;
        }
        let lhs = br.action_direct(e)?;
        let rhs: f64 = br.piece_values(e)?.iter().map(|p| p.value).sum();
        let name = if i % 2 == 1 { "well split" } else { "over-barrier split" };
        out.push(SplitResidual::new(name, i, e, lhs, rhs));
    }
    let top = sys.branch(n2)?;
    let (lo, hi) = top.window();
    if e > lo && e < hi {
        let bottom = sys.branch(0)?;
        let lhs = top.action_direct(e)? - bottom.action_direct(e)?;
        let rhs: f64 = top.piece_values(e)?.iter().map(|p| p.value).sum();
        out.push(SplitResidual::new("rotational split", n2, e, lhs, rhs));
        if !sys.has_kinetic() {
            out.push(SplitResidual::new("2 I^(2N) split", n2, e, 2.0 * top.action_direct(e)?, rhs));
        }
    }
    Ok(out)
}

/// Sample grid of a window: 32 points log-spaced in distance from each end,
/// starting `1e-6` inside. Unbounded windows are cut at `lower + 100 M`.
pub fn window_grid(lower: f64, upper: f64, m: f64, count: usize) -> Vec<f64> {
    let upper = if upper.is_finite() { upper } else { lower + 100.0 * m };
    let half = 0.5 * (upper - lower);
    let clip = 1e-6_f64.min(0.1 * half);
    let per_side = count / 2;
    let mut out = Vec::with_capacity(count);
    for k in 0..per_side {
        let t = if per_side > 1 { k as f64 / (per_side - 1) as f64 } else { 0.0 };
        let d = clip * (half / clip).powf(t);
        out.push(lower + d.min(half * (1.0 - 1e-9)));
    }
    for k in (0..count - per_side).rev() {
        let n = count - per_side;
        let t = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
        let d = clip * (half / clip).powf(t);
        out.push(upper - d.min(half * (1.0 - 1e-9)));
    }
    out
}

/// Minimum of `∂_E I` over window grids against the lower bounds
/// `√β s0^{3/2} / (64 M)` (bounded regions) and `1/(4√(E + 3M/2))`
/// (rotational regions), plus strict monotonicity of `I` along each grid.
pub fn lower_bound_report(sys: &ActionSystem) -> Result<Vec<BoundCheck>> {
    let md = &sys.morse;
    let floor = md.beta.sqrt() * md.s0.powf(1.5) / (64.0 * md.m);
    let n2 = 2 * sys.n_wells();
    let mut checks = Vec::new();
    for i in 0..=n2 {
        let br = sys.branch(i)?;
        let (lo, hi) = br.window();
        let grid = window_grid(lo, hi, md.m, 64);
        let sign = if i == 0 { -1.0 } else { 1.0 };
        let mut worst = f64::INFINITY;
        let mut worst_e = grid[0];
        let mut monotone = true;
        let mut prev = f64::NEG_INFINITY;
        for &e in &grid {
            let d = sign * br.action_deriv(e)?;
            let bound = if i == 0 || i == n2 { 1.0 / (4.0 * (e + 1.5 * md.m).sqrt()) } else { floor };
            if d - bound < worst {
                worst = d - bound;
                worst_e = e;
            }
            let a = sign * br.action(e)?;
            monotone &= a > prev;
            prev = a;
        }
        let name = format!("region {i}: min (dI/dE - bound) at E = {worst_e:.6e}");
        let c = BoundCheck::at_least(name, worst, 0.0);
        if !c.holds {
            return Err(Error::BoundViolated { which: c.name, value: worst, bound: 0.0 });
        }
        checks.push(c);
        checks.push(BoundCheck::at_least(
            format!("region {i}: action strictly monotone"),
            if monotone { 1.0 } else { 0.0 },
            1.0,
        ));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse::morse_check;
    use approx::assert_relative_eq;

    fn pendulum() -> ActionSystem {
        ActionSystem::pure(morse_check(&TrigSeries::cosine(1.0), 1.0).unwrap())
    }

    fn two_well() -> ActionSystem {
        let g = TrigSeries::new(0.0, vec![-0.3, -1.0], vec![0.2, 0.0]);
        ActionSystem::pure(morse_check(&g, 1.0).unwrap())
    }

    /// `K(k)` and `E(k)` by the arithmetic-geometric mean.
    fn elliptic(k2: f64) -> (f64, f64) {
        let (mut a, mut b) = (1.0, (1.0 - k2).sqrt());
        let mut sum = 0.5 * k2;
        let mut pow = 0.5;
        for _ in 0..40 {
            let an = 0.5 * (a + b);
            let c = 0.5 * (a - b);
            b = (a * b).sqrt();
            a = an;
            pow *= 2.0;
            sum += pow * c * c;
        }
        let kk = PI / (2.0 * a);
        (kk, kk * (1.0 - sum))
    }

    #[test]
    fn pendulum_regions() {
        let sys = pendulum();
        let t = &sys.table;
        assert_eq!(t.regions.len(), 3);
        assert_eq!(t.regions[1].kind, RegionKind::Well);
        assert_relative_eq!(t.regions[1].lower, -1.0);
        assert_relative_eq!(t.regions[1].upper, 1.0);
        assert_eq!(t.regions[0].kind, RegionKind::Rotational);
        assert_relative_eq!(t.regions[2].lower, 1.0);
        let md = morse_check(&TrigSeries::cosine(1.0), 1.0).unwrap();
        let finite = region_table(&md, &md.critical_set(), 3.0).unwrap();
        assert_relative_eq!(finite.regions[2].upper, 9.0 - 2.0 * 1f64.cosh(), max_relative = 1e-12);
        assert!(matches!(
            region_table(&md, &md.critical_set(), 1.0),
            Err(Error::R0TooSmall { .. })
        ));
    }

    #[test]
    fn two_well_indices() {
        let sys = two_well();
        let e = &sys.morse.energy;
        // E_2 < E_4 = E_0, so j◊(1) = 1 and j◊(2) = 1
        assert!(e[2] < e[4]);
        let t = &sys.table;
        assert_eq!(t.regions[1].j_diamond, Some(1));
        assert_eq!(t.regions[3].j_diamond, Some(1));
        assert_eq!(t.regions[2].j_minus, Some(0));
        assert_eq!(t.regions[2].j_plus, Some(2));
        assert_eq!(t.regions[2].j_star, Some(2));
        assert_eq!(t.regions[2].minima, vec![1, 3]);
        assert_eq!(t.regions[2].interior_maxima, vec![2]);
        for r in &t.regions {
            assert!(r.lower < r.upper);
        }
    }

    #[test]
    fn pendulum_matches_elliptic_integrals() {
        let sys = pendulum();
        let well = sys.branch(1).unwrap();
        for &e in &[-0.9, -0.3, 0.0, 0.5, 0.95] {
            let k2 = (1.0 + e) / 2.0;
            let (kk, ee) = elliptic(k2);
            let i_exact = 4.0 * 2f64.sqrt() / PI * (ee - (1.0 - k2) * kk);
            assert_relative_eq!(well.action(e).unwrap(), i_exact, max_relative = 1e-12);
            let d_exact = 2f64.sqrt() / PI * kk;
            for path in [DerivPath::Bottom, DerivPath::Direct] {
                assert_relative_eq!(well.action_deriv_with(e, path).unwrap(), d_exact, max_relative = 1e-12);
            }
        }
        let rot = sys.branch(2).unwrap();
        for &e in &[1.5, 3.0, 10.0] {
            let k2 = 2.0 / (e + 1.0);
            let (kk, ee) = elliptic(k2);
            let i_exact = 2.0 / PI * (e + 1.0).sqrt() * ee;
            assert_relative_eq!(rot.action(e).unwrap(), i_exact, max_relative = 1e-12);
            assert_relative_eq!(sys.branch(0).unwrap().action(e).unwrap(), -i_exact, max_relative = 1e-12);
            let d_exact = kk / (PI * (e + 1.0).sqrt());
            assert_relative_eq!(rot.action_deriv(e).unwrap(), d_exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn separatrix_limits() {
        let sys = pendulum();
        let lim1 = 4.0 * 2f64.sqrt() / PI;
        let lim2 = 2.0 * 2f64.sqrt() / PI;
        assert_relative_eq!(sys.branch(1).unwrap().action(1.0 - 1e-10).unwrap(), lim1, max_relative = 1e-7);
        assert_relative_eq!(sys.branch(2).unwrap().action(1.0 + 1e-10).unwrap(), lim2, max_relative = 1e-7);
    }

    #[test]
    fn bottom_limits() {
        let sys = pendulum();
        let well = sys.branch(1).unwrap();
        let e = -1.0 + 1e-6;
        assert_relative_eq!(well.action_deriv(e).unwrap(), 1.0 / 2f64.sqrt(), max_relative = 1e-6);
        assert_relative_eq!(well.action_second_deriv(e).unwrap(), 1.0 / (8.0 * 2f64.sqrt()), max_relative = 1e-4);
    }

    #[test]
    fn second_derivative_matches_differences() {
        for sys in [pendulum(), two_well()] {
            for i in 0..=2 * sys.n_wells() {
                let br = sys.branch(i).unwrap();
                let (lo, hi) = br.window();
                let hi = if hi.is_finite() { hi } else { lo + 5.0 };
                for t in [0.3, 0.6] {
                    let e = lo + t * (hi - lo);
                    let h = 1e-4;
                    let fd = (br.action_deriv(e + h).unwrap() - br.action_deriv(e - h).unwrap()) / (2.0 * h);
                    assert_relative_eq!(br.action_second_deriv(e).unwrap(), fd, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn derivative_matches_differences_two_well() {
        let sys = two_well();
        for i in 0..=4 {
            let br = sys.branch(i).unwrap();
            let (lo, hi) = br.window();
            let hi = if hi.is_finite() { hi } else { lo + 5.0 };
            for t in [0.2, 0.5, 0.8] {
                let e = lo + t * (hi - lo);
                let h = 1e-5;
                let fd = (br.action(e + h).unwrap() - br.action(e - h).unwrap()) / (2.0 * h);
                assert_relative_eq!(br.action_deriv(e).unwrap(), fd, max_relative = 1e-7);
                if i % 2 == 1 {
                    let a = br.action_deriv_with(e, DerivPath::Bottom).unwrap();
                    let b = br.action_deriv_with(e, DerivPath::Direct).unwrap();
                    assert_relative_eq!(a, b, max_relative = 1e-11);
                }
            }
        }
    }

    #[test]
    fn splits_hold() {
        let sys = two_well();
        let e = &sys.morse.energy;
        for energy in [0.5 * (e[1] + e[2]), 0.5 * (e[3] + e[2]), 0.5 * (e[2] + e[4]), e[4] + 0.7] {
            let rep = split_identities(&sys, energy).unwrap();
            assert!(!rep.is_empty());
            for r in rep {
                assert!(r.residual < 1e-12, "{r:?}");
            }
        }
    }

    #[test]
    fn out_of_window_is_rejected() {
        let sys = pendulum();
        assert!(matches!(sys.branch(1).unwrap().action(1.5), Err(Error::EnergyOutOfWindow { .. })));
        assert!(matches!(sys.branch(5), Err(Error::NoSuchRegion { .. })));
    }

    #[test]
    fn lower_bounds_pendulum() {
        let checks = lower_bound_report(&pendulum()).unwrap();
        assert!(checks.iter().all(|c| c.holds));
    }

    #[test]
    fn grid_is_inside_and_sorted() {
        let g = window_grid(-1.0, 1.0, 1.5, 64);
        assert_eq!(g.len(), 64);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_relative_eq!(g[0], -1.0 + 1e-6, max_relative = 1e-12);
        assert_relative_eq!(g[63], 1.0 - 1e-6, max_relative = 1e-12);
    }
}
