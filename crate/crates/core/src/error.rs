use thiserror::Error;

/// Errors raised by the solver, the polynomial algebra and the normal-form
/// constructions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SzegoError {
    /// An operation was called outside its documented domain.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("quadrature grid of {grid} points is too small for degree {degree} (need at least {required})")]
    GridTooSmall {
        grid: usize,
        degree: usize,
        required: usize,
    },

    /// A numerically evaluated real functional came back with a significant
    /// imaginary part.
    #[error("imaginary residue {residue:e} exceeds tolerance for value magnitude {magnitude:e}")]
    ImaginaryResidue { residue: f64, magnitude: f64 },

    /// The integrator produced a non-finite state or a norm above the
    /// blow-up ceiling.
    #[error("blow-up at t = {time}: {reason}")]
    BlowUp { time: f64, reason: String },

    /// The adaptive flow integrator could not make progress.
    #[error("flow diverged at sigma = {sigma}: step size underflow ({step:e})")]
    FlowDivergence { sigma: f64, step: f64 },

    /// A divisor of the plane-wave homological system is (numerically) zero.
    #[error("small divisor {value:e} at (j, k) = ({j}, {k})")]
    SmallDivisor { j: u32, k: u32, value: f64 },

    /// |u_m| vanished along a trajectory, so the plane-wave frame is undefined.
    #[error("plane-wave frame degenerate at t = {time}: |u_m| = {modulus:e}")]
    FrameDegenerate { time: f64, modulus: f64 },

    /// Consecutive samples are too far apart to unwrap the phase of u_m.
    #[error("phase jump {jump} between t = {t0} and t = {t1} exceeds pi/2; sample more densely")]
    PhaseUnwrap { t0: f64, t1: f64, jump: f64 },

    #[error("series for the H^{s} norm did not converge within {cap} terms")]
    Convergence { s: f64, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SzegoError>;
