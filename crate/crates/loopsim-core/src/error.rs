//! Error type shared by all modules.

use alloc::string::String;

/// Everything that can go wrong while building states, compiling programs,
/// running schedules or fitting data.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Vector/matrix dimensions do not describe the same number of modes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// More modes than the engine is sized for (1..=4).
    #[error("mode count {0} outside supported range 1..=4")]
    ModeCount(usize),

    /// A mode index does not exist in the state, or two indices collide.
    #[error("bad mode index: {0}")]
    BadModeIndex(String),

    /// A matrix that must be symmetric is not, beyond tolerance.
    #[error("matrix not symmetric: max asymmetry {0:.3e}")]
    NotSymmetric(f64),

    /// A matrix that must be symplectic is not, beyond tolerance.
    #[error("matrix not symplectic: max defect {0:.3e}")]
    NotSymplectic(f64),

    /// NaN or infinity where a finite number is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Covariance fails the uncertainty-principle check.
    #[error("unphysical covariance: {0}")]
    Unphysical(String),

    /// Parameter outside its documented range.
    #[error("bad parameter: {0}")]
    BadParameter(String),

    /// Homodyne conditioning on a direction with no variance.
    #[error("measured quadrature has non-positive variance {0:.3e}")]
    SingularMeasurement(f64),

    /// Measuring the only mode would leave no state to return.
    #[error("cannot condition away the last remaining mode")]
    MeasureLastMode,

    /// Program asks the beam-splitter driver for more distinct levels than
    /// the two-value line can produce.
    #[error("driver supports one nonzero reflectivity, program needs {0}")]
    DriverConstraint(String),

    /// Not enough data for the requested statistical operation.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    /// Sample set is degenerate (zero spread where spread is required).
    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    /// Optimizer failed to converge within the iteration budget.
    #[error("fit did not converge: {0}")]
    NoConvergence(String),

    /// Symbolic measurement cannot be solved for the requested symbol.
    #[error("cannot solve measured combination for {0}: coefficient is not a unit")]
    NotSolvable(String),

    /// Symbolic expression violates a structural requirement.
    #[error("symbolic structure error: {0}")]
    SymbolicStructure(String),
}
