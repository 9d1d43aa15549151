use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Standing hypotheses on the model data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Lipschitz continuity of the noise coefficient.
    SigmaLipschitz,
    /// Uniform ellipticity of the velocity diffusion block.
    Ellipticity,
    /// Lipschitz continuity of the interaction kernel.
    KernelLipschitz,
    /// Lipschitz continuity of the potential gradient.
    PotentialLipschitz,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::SigmaLipschitz => "H1(1): sigma Lipschitz",
            Hypothesis::Ellipticity => "H1(2): strict ellipticity",
            Hypothesis::KernelLipschitz => "H2: kernel Lipschitz",
            Hypothesis::PotentialLipschitz => "H3: potential Lipschitz",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empirical measure has no atoms")]
    EmptyMeasure,

    #[error("weights must be nonnegative and sum to one (sum = {total})")]
    Unnormalized { total: f64 },

    #[error("model evaluation produced a non-finite value in the {term} term")]
    ModelFault { term: &'static str },

    #[error("assumption violated ({hypothesis}): declared {declared}, probed {estimated}")]
    AssumptionViolation {
        hypothesis: Hypothesis,
        declared: f64,
        estimated: f64,
    },

    #[error("test function does not provide analytic derivatives")]
    MissingDerivatives,

    #[error("non-finite state at step {step} for particle {particle}")]
    BlowUp { step: u64, particle: usize },

    #[error("exact W1 unavailable: {0}; use the sliced estimator")]
    ExactUnavailable(String),

    #[error("Picard iteration did not converge at step {step} after {iterations} iterations (L1 residual {residual:e})")]
    PicardDiverged {
        step: u64,
        iterations: usize,
        residual: f64,
    },

    #[error("negative mass {value:e} in cell {cell} at step {step}")]
    NegativeMass { step: u64, cell: usize, value: f64 },

    #[error("frozen flow does not cover [{from}, {to}]")]
    FlowGap { from: f64, to: f64 },

    #[error("diffusion is degenerate (theta = 0); gradient bound unavailable")]
    DegenerateEllipticity,

    #[error("inconsistent trajectory: {0}")]
    InconsistentTrajectory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. }
                | Error::PicardDiverged { .. }
                | Error::NegativeMass { .. }
                | Error::ModelFault { .. }
        )
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
