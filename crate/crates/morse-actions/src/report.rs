//! Named inequality checks collected into ledgers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// One evaluated inequality `value ≤ bound` or `value ≥ bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub holds: bool,
    /// `bound - value` for upper bounds, `value - bound` for lower bounds.
    pub margin: f64,
}

impl BoundCheck {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        BoundCheck {
            name: name.into(),
            value,
            bound,
            relation: Relation::AtMost,
            holds: value <= bound,
            margin: bound - value,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        BoundCheck {
            name: name.into(),
            value,
            bound,
            relation: Relation::AtLeast,
            holds: value >= bound,
            margin: value - bound,
        }
    }

    pub fn into_result(self) -> crate::Result<Self> {
        if self.holds {
            Ok(self)
        } else {
            Err(crate::Error::BoundViolated { which: self.name, value: self.value, bound: self.bound })
        }
    }
}

/// First failing check of a ledger, as an error.
pub fn first_failure(checks: &[BoundCheck]) -> crate::Result<()> {
    match checks.iter().find(|c| !c.holds) {
        Some(c) => Err(crate::Error::BoundViolated {
            which: c.name.clone(),
            value: c.value,
            bound: c.bound,
        }),
        None => Ok(()),
    }
}
