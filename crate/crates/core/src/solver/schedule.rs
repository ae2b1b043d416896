/// Number of generative-model samples per update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleSchedule {
    /// The theorem bound for the run's `ε`, `δ` and `L`.
    Theorem,
    Constant(u64),
    /// `K_t = min(⌊t^exponent⌋, cap)`, floored at 1.
    Adaptive { exponent: f64, cap: u64 },
}

impl SampleSchedule {
    pub const ADAPTIVE: Self = Self::Adaptive {
        exponent: 0.175,
        cap: 35,
    };

    /// `K` at 1-based iteration `t`. `None` for [`SampleSchedule::Theorem`],
    /// which has to be resolved against a budget first.
    pub fn at(&self, t: u64) -> Option<u64> {
        match *self {
            Self::Theorem => None,
            Self::Constant(k) => Some(k.max(1)),
            Self::Adaptive { exponent, cap } => {
                let k = (t.max(1) as f64).powf(exponent).floor() as u64;
                Some(k.min(cap).max(1))
            }
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match *self {
            Self::Adaptive { exponent, cap } if !(exponent >= 0.0 && exponent.is_finite()) || cap == 0 => {
                Err(format!("adaptive sample schedule needs exponent >= 0 and cap >= 1, got {exponent}, {cap}"))
            }
            _ => Ok(()),
        }
    }
}

/// Learning rate of the Q-learning baselines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `α_t = t^{−exponent}`.
    Polynomial { exponent: f64 },
    /// `α_t = max(t^{−exponent}, floor)`.
    Adaptive { exponent: f64, floor: f64 },
}

impl StepSchedule {
    pub const DIMINISHING: Self = Self::Polynomial { exponent: 0.51 };

    pub const ADAPTIVE: Self = Self::Adaptive {
        exponent: 0.1,
        floor: 0.1,
    };

    /// `α` at 1-based iteration `t`.
    pub fn at(&self, t: u64) -> f64 {
        let t = t.max(1) as f64;
        match *self {
            Self::Constant(a) => a,
            Self::Polynomial { exponent } => t.powf(-exponent),
            Self::Adaptive { exponent, floor } => t.powf(-exponent).max(floor),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            Self::Constant(a) => a > 0.0 && a <= 1.0,
            Self::Polynomial { exponent } => exponent >= 0.0 && exponent.is_finite(),
            Self::Adaptive { exponent, floor } => {
                exponent >= 0.0 && exponent.is_finite() && floor > 0.0 && floor <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("step schedule {self:?} does not keep alpha in (0, 1]"))
        }
    }
}
