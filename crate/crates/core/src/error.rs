use thiserror::Error;

/// Everything that can go wrong in the analysis pipeline.
///
/// Variants split into two families: input validation problems (bad drift,
/// bad parameters, bad intervals) and numerical failures. The CLI maps these
/// onto different exit codes via [`Error::is_validation`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("drift spec is malformed: {0}")]
    InvalidSpec(String),
    #[error("drift mean {0} is zero within tolerance; a positive winding rate is required")]
    ZeroMeanDrift(f64),
    #[error("drift mean {0} is negative; reflect the circle (x -> -x) to obtain a positive mean")]
    NegativeMean(f64),
    #[error("degenerate zero of the drift near x = {x} (|b'| = {b_prime:e})")]
    DegenerateCritical { x: f64, b_prime: f64 },
    #[error("could not resolve the zeros of the drift on a grid of {0} points")]
    Unresolved(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite input or result: {0}")]
    NonFinite(String),
    #[error("asymptotic case does not apply: {0}")]
    WrongCase(String),
    #[error("drift has no zeros, the decomposition is trivial")]
    NoMaxima,
    #[error("level crossing near x = {0} is ambiguous")]
    LevelAmbiguous(f64),
    #[error("well cut level {v_cut} is not below the barrier height {h}")]
    CutTooHigh { v_cut: f64, h: f64 },
    #[error("well cut level lands on a critical point near x = {0}")]
    CutAtCritical(f64),
    #[error("cut level {v_cut} separates the deepest minima of the valley starting at {valley_left} (inner barrier {barrier})")]
    CutSplitsValley { valley_left: f64, v_cut: f64, barrier: f64 },
    #[error("x = {0} lies outside the requested landscape")]
    OutsideLandscape(f64),
    #[error("intervals overlap")]
    Overlap,
    #[error("well condition violated: {0}")]
    WellConditionViolated(String),
    #[error("neighbourhood ({lo}, {hi}) is not inside the valley")]
    BadNeighborhood { lo: f64, hi: f64 },
    #[error("no deep wells")]
    EmptyWellSystem,
    #[error("stationary residual {0:e} exceeds tolerance")]
    StationarityViolated(f64),
    #[error("bad state label ({0}, {1})")]
    BadLabel(usize, usize),
    #[error("right-hand side has mean {0:e}, expected zero")]
    MeanNotZero(f64),
    #[error("Poisson residual {0:e} exceeds tolerance")]
    ResidualTooLarge(f64),
    #[error("time step {dt} violates dt <= eps/10 = {limit}")]
    UnstableStep { dt: f64, limit: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Unresolved(_)
                | Error::NonFinite(_)
                | Error::LevelAmbiguous(_)
                | Error::StationarityViolated(_)
                | Error::ResidualTooLarge(_)
                | Error::InsufficientData(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
