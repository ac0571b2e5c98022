//! Composite Gauss–Legendre quadrature with panel doubling, plus a sinh
//! change of variables that resolves near-singular endpoint behaviour of the
//! form `1/√(β² + x²)`.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess, then Newton on P_n
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared rule for `n` points, computed once per process.
    pub fn cached(n: usize) -> &'static GaussLegendre {
        static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussLegendre>>> = OnceLock::new();
        let mut map = CACHE.get_or_init(Default::default).lock().expect("rule cache poisoned");
        map.entry(n).or_insert_with(|| Box::leak(Box::new(GaussLegendre::new(n))))
    }

    /// `∫_a^b f` with a single application of the rule.
    pub fn apply<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Panel-doubling integrator.
///
/// Level `L` splits the interval into `2^L` panels carrying a fixed
/// Gauss–Legendre rule; the result is accepted once two consecutive levels
/// agree to `tol` relative.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub tol: f64,
    pub panel_nodes: usize,
    pub max_doublings: usize,
}

/// Relative size below which non-decreasing changes are taken as rounding noise.
const NOISE_FLOOR: f64 = 1e-8;

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { tol: 1e-13, panel_nodes: 20, max_doublings: 20 }
    }
}

impl Quadrature {
    pub fn with_tol(tol: f64) -> Self {
        Quadrature { tol, ..Default::default() }
    }

    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let rule = GaussLegendre::cached(self.panel_nodes);
        let mut level_sum = |panels: usize| -> Result<f64> {
            let h = (b - a) / panels as f64;
            let mut total = 0.0;
            for p in 0..panels {
                let lo = a + h * p as f64;
                let (c, half) = (lo + 0.5 * h, 0.5 * h);
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    total += half * w * f(c + half * x)?;
                }
            }
            Ok(total)
        };
        let mut prev = level_sum(1)?;
        let mut last_change = f64::INFINITY;
        let mut stagnant = 0;
        for level in 1..=self.max_doublings {
            let cur = level_sum(1 << level)?;
            if !cur.is_finite() {
                return Err(Error::QuadratureStalled { doublings: level });
            }
            let change = (cur - prev).abs();
            if change <= self.tol * cur.abs() || cur == prev {
                return Ok(cur);
            }
            // rounding noise in the integrand: the change stops shrinking
            stagnant = if change > 0.5 * last_change { stagnant + 1 } else { 0 };
            if level >= 4 && stagnant >= 2 && change <= NOISE_FLOOR * cur.abs() {
                return Ok(cur);
            }
            last_change = change;
            prev = cur;
        }
        Err(Error::QuadratureStalled { doublings: self.max_doublings })
    }

    /// `∫_0^len f(x) dx` with nodes clustered at `x = 0` on the length scale
    /// `scale`, through `x = scale · sinh(u · asinh(len / scale))`.
    pub fn integrate_clustered<F>(&self, len: f64, scale: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if !(scale > 0.0) || scale >= 0.25 * len {
            return self.integrate(0.0, len, f);
        }
        let a = (len / scale).asinh();
        self.integrate(0.0, 1.0, |u| {
            let x = scale * (u * a).sinh();
            let jac = scale * a * (u * a).cosh();
            Ok(f(x.min(len))? * jac)
        })
    }
}
