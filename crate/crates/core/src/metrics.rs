//! Confusion counts and the accuracy / precision / recall triple.

use core::fmt;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Tallies one trial. `actual`: the subject is registered; `predicted`:
    /// the system accepted them.
    pub fn record(&mut self, actual: bool, predicted: bool) {
        match (actual, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

/// A ratio that may have a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Defined(f64),
    Undefined,
}

impl Ratio {
    fn of(num: u64, den: u64) -> Ratio {
        if den == 0 {
            Ratio::Undefined
        } else {
            Ratio::Defined(num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Defined(v) => Some(v),
            Ratio::Undefined => None,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Defined(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            Ratio::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: Ratio,
    pub precision: Ratio,
    pub recall: Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("confusion counts are all zero")]
pub struct EmptyCounts;

pub fn compute_metrics(c: &ConfusionCounts) -> Result<Metrics, EmptyCounts> {
    let total = c.total();
    if total == 0 {
        return Err(EmptyCounts);
    }
    Ok(Metrics {
        accuracy: Ratio::of(c.tp + c.tn, total),
        precision: Ratio::of(c.tp, c.tp + c.fp),
        recall: Ratio::of(c.tp, c.tp + c.fn_),
    })
}
