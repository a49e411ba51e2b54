use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// The dark port cannot fire at this point, so conditional expectations
    /// are undefined.
    #[error("degenerate post-selection: success probability {prob:e} is below 1e-300")]
    DegeneratePostselection { prob: f64 },

    #[error("closed-form momentum requires gamma = 0 (got {gamma}); use the Lindblad oracle")]
    DampingUnsupported { gamma: f64 },

    /// The decoherence exponent came out complex: the formula was transcribed wrong.
    #[error("decoherence exponent has imaginary residue {residue:e}")]
    ImaginaryResidue { residue: f64 },

    #[error("Fock truncation inadequate: {0}")]
    TruncationInadequate(String),

    #[error("integration unstable at tau = {tau}: {reason}")]
    StepUnstable { tau: f64, reason: String },
}

