use thiserror::Error;

/// Errors surfaced by the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("level {level} outside attainable range [{min}, {max}]")]
    Level { level: f64, min: f64, max: f64 },
    #[error("singular thrust {thrust} outside [0, 1]")]
    InfeasibleSingular { thrust: f64 },
    #[error("infeasible switching schedule: {0}")]
    InfeasibleSchedule(String),
    #[error("not an extremal: {0}")]
    NotAnExtremal(String),
    #[error("no extremal found")]
    NoExtremalFound,
    #[error("no feasible schedule for structure {0}")]
    NoFeasibleSchedule(String),
    #[error("closed-form costate denominator vanishes at z = {z}")]
    SingularDenominator { z: f64 },
    #[error("costate check failed: {0}")]
    VerifierFlag(String),
    #[error("analytic claim violated: {0}")]
    TheoryViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
