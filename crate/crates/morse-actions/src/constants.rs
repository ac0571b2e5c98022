//! Explicit smallness radii and thresholds derived from `(M, β, s0, r0)`.
//!
//! Several of these numbers are far below the smallest positive `f64`, so
//! every quantity is carried as a natural logarithm alongside its (possibly
//! underflowed) value.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// A positive number stored with its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScalar {
    pub value: f64,
    pub ln: f64,
    pub log10: f64,
}

impl LogScalar {
    pub fn from_ln(ln: f64) -> Self {
        LogScalar { value: ln.exp(), ln, log10: ln / std::f64::consts::LN_10 }
    }

    pub fn from_value(v: f64) -> Self {
        LogScalar::from_ln(v.ln())
    }

    /// `x ≤ self`, decided in log space so underflow cannot flip the answer.
    pub fn bounds(&self, x: f64) -> bool {
        x <= 0.0 || x.ln() <= self.ln
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantTable {
    pub m: f64,
    pub beta: f64,
    pub s0: f64,
    pub r0: f64,
    pub s_star: f64,
    pub eta_diamond: LogScalar,
    pub r_star: LogScalar,
    pub r2: LogScalar,
    pub r3: LogScalar,
    pub r4: LogScalar,
    pub theta_star: f64,
    pub theta_sharp: f64,
    pub derivative_floor: f64,
    pub action_derivative_floor: f64,
    pub bottom_derivative_bound: f64,
    pub psi_floor: f64,
    pub psi_floor_rotational: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cosine: Option<CosineConstants>,
}

/// Thresholds of the cosine-like regime for amplitude `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineConstants {
    pub eta: f64,
    pub r2_star: LogScalar,
    pub eta_diamond_star: LogScalar,
}

impl ConstantTable {
    pub fn new(m: f64, beta: f64, s0: f64, r0: f64) -> Self {
        let (lm, lb, ls, lr) = (m.ln(), beta.ln(), s0.ln(), r0.ln());
        let eta_diamond = 9.0 * lb + 15.0 * ls - 120.0 * LN_2 - 9.0 * lm
            + (2.0 * lr)
                .min(3.0 * lr - 0.5 * lm)
                .min(45.0 * lb + 75.0 * ls - 321.0 * LN_2 - 44.0 * lm);
        let r_star = (18.0 * ls - 77.0 * LN_2 + 12.0 * lb - 11.0 * lm).min(2.0 * lr - 8.0 * LN_2);
        let r2 = (49.0 * ls + 30.0 * lb - 214.0 * LN_2 - 30.0 * lm)
            .min(2.0 * lr - 10.0 * LN_2 - lm);
        let r3 = (6.0 * ls + 3.0 * lb - 25.0 * LN_2 - 3.0 * lm).min(2.0 * lr - 8.0 * LN_2 - lm);
        let r4 = r2 + lm - 5.0 * LN_2;
        ConstantTable {
            m,
            beta,
            s0,
            r0,
            s_star: s0.min(1.0),
            eta_diamond: LogScalar::from_ln(eta_diamond),
            r_star: LogScalar::from_ln(r_star),
            r2: LogScalar::from_ln(r2),
            r3: LogScalar::from_ln(r3),
            r4: LogScalar::from_ln(r4),
            theta_star: (beta * s0.powi(3) / (3.0 * m)).sqrt(),
            theta_sharp: beta * s0.powi(3) / (6.0 * m),
            derivative_floor: beta * beta * s0.powi(3) / (32.0 * m),
            action_derivative_floor: beta.sqrt() * s0.powf(1.5) / (64.0 * m),
            bottom_derivative_bound: 16.0 * m.sqrt() / (s0 * beta),
            psi_floor: s0 / (32.0 * m.sqrt()),
            psi_floor_rotational: s0 / (4.0 * m.sqrt()),
            cosine: None,
        }
    }

    /// Attach the cosine-like thresholds for amplitude `η`.
    pub fn with_cosine(mut self, eta: f64) -> Self {
        self.cosine = Some(CosineConstants::new(eta, self.s0, self.r0));
        self
    }

    /// Lower bound of the rotational action derivative at energy `e`.
    pub fn rotational_derivative_floor(&self, e: f64) -> f64 {
        1.0 / (4.0 * (e + 1.5 * self.m).sqrt())
    }
}

impl CosineConstants {
    pub fn new(eta: f64, s0: f64, r0: f64) -> Self {
        let ls = s0.ln();
        let s_star = s0.min(1.0);
        let r2_star = (49.0 * ls - 304.0 * LN_2 - 30.0 * s0)
            .min(2.0 * r0.ln() - 11.0 * LN_2 - eta.ln() - s0);
        let eta_ds = 13.5 * ls + 4.0 * r2_star + eta.ln()
            - 135.0 * LN_2
            - 12.0 * s_star.ln()
            - 6.0 * s0;
        CosineConstants {
            eta,
            r2_star: LogScalar::from_ln(r2_star),
            eta_diamond_star: LogScalar::from_ln(eta_ds),
        }
    }
}
