use crate::error::{Error, Result};

/// Population step sizes `beta_k`, `k >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `beta_k = min(1, c / k)`.
    Harmonic(f64),
}

impl StepSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant(b) => b,
            StepSchedule::Harmonic(c) => (c / k.max(1) as f64).min(1.0),
        }
    }

    /// Step sizes must lie in `[0, 1]`; zero freezes the population.
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            StepSchedule::Constant(b) => b,
            StepSchedule::Harmonic(c) => c,
        };
        let ok = match self {
            StepSchedule::Constant(_) => (0.0..=1.0).contains(&v),
            StepSchedule::Harmonic(_) => v >= 0.0 && v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("step-size schedule {self:?} out of range")))
        }
    }
}
