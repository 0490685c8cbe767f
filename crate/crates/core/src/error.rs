use alloc::string::String;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter or initial condition is outside its admissible range.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A user-supplied model failed an eager consistency check.
    #[error("validation failed: {0}")]
    Validation(String),
    /// The solver ran out of its step budget before reaching the horizon.
    #[error("step budget of {max_steps} exhausted at t = {time}")]
    StepBudget {
        /// Budget that was exhausted.
        max_steps: usize,
        /// Time reached when the budget ran out.
        time: f64,
    },
    /// The adaptive step size collapsed below the representable resolution.
    #[error("step size underflow at t = {time}")]
    StepSizeUnderflow {
        /// Time at which the step collapsed.
        time: f64,
    },
    /// A metric was requested on a trajectory that diverged.
    #[error("trajectory diverged at t = {time}")]
    Diverged {
        /// Divergence time reported by the solver.
        time: f64,
    },
    /// The requested analysis does not apply to this plant.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
