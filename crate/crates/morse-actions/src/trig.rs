//! Real trigonometric polynomials in one angle.
//!
//! A [`TrigSeries`] stores `c0 + Σ_k (a_k cos kθ + b_k sin kθ)` for `k = 1..=K`.
//! It is the fixed-parameter view of every potential in the crate.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigSeries {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

/// Iterator over `(cos kθ, sin kθ)` for `k = 1, 2, ...` by angle addition.
struct Harmonics {
    c1: f64,
    s1: f64,
    c: f64,
    s: f64,
}

impl Harmonics {
    fn new(theta: f64) -> Self {
        let (s1, c1) = theta.sin_cos();
        Harmonics { c1, s1, c: 1.0, s: 0.0 }
    }
}

impl Iterator for Harmonics {
    type Item = (f64, f64);
    fn next(&mut self) -> Option<(f64, f64)> {
        let c = self.c * self.c1 - self.s * self.s1;
        let s = self.s * self.c1 + self.c * self.s1;
        self.c = c;
        self.s = s;
        Some((c, s))
    }
}

impl TrigSeries {
    pub fn new(mean: f64, mut cos: Vec<f64>, mut sin: Vec<f64>) -> Self {
        let k = cos.len().max(sin.len());
        cos.resize(k, 0.0);
        sin.resize(k, 0.0);
        TrigSeries { mean, cos, sin }
    }

    /// `-η cos θ`.
    pub fn cosine(eta: f64) -> Self {
        TrigSeries::new(0.0, vec![-eta], vec![0.0])
    }

    pub fn harmonics(&self) -> usize {
        self.cos.len()
    }

    pub fn is_constant(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|c| *c == 0.0)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut acc = self.mean;
        for ((a, b), (c, s)) in self.cos.iter().zip(&self.sin).zip(Harmonics::new(theta)) {
            acc += a * c + b * s;
        }
        acc
    }

    /// Value and the first three derivatives.
    pub fn derivs(&self, theta: f64) -> [f64; 4] {
        let mut d = [self.mean, 0.0, 0.0, 0.0];
        for (k, ((a, b), (c, s))) in self
            .cos
            .iter()
            .zip(&self.sin)
            .zip(Harmonics::new(theta))
            .enumerate()
        {
            let k = (k + 1) as f64;
            let even = a * c + b * s;
            let odd = b * c - a * s;
            d[0] += even;
            d[1] += k * odd;
            d[2] -= k * k * even;
            d[3] -= k * k * k * odd;
        }
        d
    }

    pub fn deriv(&self, theta: f64, order: usize) -> f64 {
        match order {
            0 => self.eval(theta),
            1..=3 => self.derivs(theta)[order],
            _ => {
                // higher orders by the same pattern of k-powers
                let mut acc = 0.0;
                for (k, ((a, b), (c, s))) in self
                    .cos
                    .iter()
                    .zip(&self.sin)
                    .zip(Harmonics::new(theta))
                    .enumerate()
                {
                    let kf = (k + 1) as f64;
                    let w = kf.powi(order as i32);
                    let term = match order % 4 {
                        0 => a * c + b * s,
                        1 => b * c - a * s,
                        2 => -(a * c + b * s),
                        _ => a * s - b * c,
                    };
                    acc += w * term;
                }
                acc
            }
        }
    }

    /// `G(θ) - G(θ_ref)` without cancellation when the two angles are close.
    pub fn diff(&self, theta: f64, theta_ref: f64) -> f64 {
        self.increment(theta_ref, theta - theta_ref)
    }

    /// `G(θ + s) - G(θ)` computed from the offset `s` itself, so that tiny
    /// offsets keep full relative accuracy.
    pub fn increment(&self, theta: f64, s: f64) -> f64 {
        let m = theta + 0.5 * s;
        let d = 0.5 * s;
        let mut acc = 0.0;
        for ((a, b), ((cm, sm), (_, sd))) in self
            .cos
            .iter()
            .zip(&self.sin)
            .zip(Harmonics::new(m).zip(Harmonics::new(d)))
        {
            acc += 2.0 * sd * (b * cm - a * sm);
        }
        acc
    }

    /// The series `θ ↦ G(θ + offset)`.
    pub fn shifted(&self, offset: f64) -> TrigSeries {
        let mut cos = Vec::with_capacity(self.harmonics());
        let mut sin = Vec::with_capacity(self.harmonics());
        for ((a, b), (c, s)) in self.cos.iter().zip(&self.sin).zip(Harmonics::new(offset)) {
            cos.push(a * c + b * s);
            sin.push(b * c - a * s);
        }
        TrigSeries { mean: self.mean, cos, sin }
    }

    pub fn scaled(&self, factor: f64) -> TrigSeries {
        TrigSeries {
            mean: self.mean * factor,
            cos: self.cos.iter().map(|c| c * factor).collect(),
            sin: self.sin.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &TrigSeries) -> TrigSeries {
        let k = self.harmonics().max(other.harmonics());
        let get = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(0.0);
        TrigSeries {
            mean: self.mean + other.mean,
            cos: (0..k).map(|i| get(&self.cos, i) + get(&other.cos, i)).collect(),
            sin: (0..k).map(|i| get(&self.sin, i) + get(&other.sin, i)).collect(),
        }
    }

    /// Modulus of the complex Fourier coefficient `f_k` (`k ≥ 1`).
    pub fn coefficient_modulus(&self, k: usize) -> f64 {
        if k == 0 {
            return self.mean.abs();
        }
        0.5 * self.cos[k - 1].hypot(self.sin[k - 1])
    }

    /// `sup_k |f_k| e^{|k| s}`.
    pub fn sup_fourier_norm(&self, s: f64) -> f64 {
        (1..=self.harmonics())
            .map(|k| self.coefficient_modulus(k) * (k as f64 * s).exp())
            .fold(self.mean.abs(), f64::max)
    }

    /// Value at the complex point `x + i y`.
    pub fn eval_complex(&self, x: f64, y: f64) -> (f64, f64) {
        let mut re = self.mean;
        let mut im = 0.0;
        for (k, ((a, b), (c, s))) in self
            .cos
            .iter()
            .zip(&self.sin)
            .zip(Harmonics::new(x))
            .enumerate()
        {
            let ky = (k + 1) as f64 * y;
            let (ch, sh) = (ky.cosh(), ky.sinh());
            // cos(kx + iky) = cos kx cosh ky - i sin kx sinh ky
            // sin(kx + iky) = sin kx cosh ky + i cos kx sinh ky
            re += a * c * ch + b * s * ch;
            im += -a * s * sh + b * c * sh;
        }
        (re, im)
    }

    /// Supremum of `|G|` over the closed strip `|Im θ| ≤ s`.
    ///
    /// The modulus is subharmonic, so the maximum sits on the boundary line
    /// `Im θ = s` (conjugate symmetry covers `-s`). A dense scan is refined by
    /// golden-section search around the best sample.
    pub fn sup_strip(&self, s: f64) -> f64 {
        let n = 4096.max(64 * self.harmonics());
        let h = 2.0 * PI / n as f64;
        let modulus = |x: f64| {
            let (re, im) = self.eval_complex(x, s);
            re.hypot(im)
        };
        let (mut best_x, mut best) = (-PI, modulus(-PI));
        for i in 1..n {
            let x = -PI + h * i as f64;
            let m = modulus(x);
            if m > best {
                best = m;
                best_x = x;
            }
        }
        let (mut a, mut b) = (best_x - h, best_x + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if modulus(c) > modulus(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.max(modulus(0.5 * (a + b)))
    }

    /// Coefficients of the trigonometric interpolant of `n` equispaced
    /// samples `f(2πj/n)`, truncated to `k_max < n/2` harmonics.
    pub fn from_samples(samples: &[f64], k_max: usize) -> TrigSeries {
        let n = samples.len();
        assert!(2 * k_max < n, "need more samples than twice the harmonics");
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let cos = (1..=k_max).map(|k| 2.0 * buf[k].re * scale).collect();
        let sin = (1..=k_max).map(|k| -2.0 * buf[k].im * scale).collect();
        TrigSeries { mean: buf[0].re * scale, cos, sin }
    }

    /// Zero-mean primitive `Φ` with `Φ' = G - mean`.
    pub fn primitive(&self) -> TrigSeries {
        let mut cos = Vec::with_capacity(self.harmonics());
        let mut sin = Vec::with_capacity(self.harmonics());
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let k = (k + 1) as f64;
            cos.push(-b / k);
            sin.push(a / k);
        }
        TrigSeries { mean: 0.0, cos, sin }
    }

    pub fn derivative(&self) -> TrigSeries {
        let mut cos = Vec::with_capacity(self.harmonics());
        let mut sin = Vec::with_capacity(self.harmonics());
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let k = (k + 1) as f64;
            cos.push(k * b);
            sin.push(-k * a);
        }
        TrigSeries { mean: 0.0, cos, sin }
    }
}

/// Reduce an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}
