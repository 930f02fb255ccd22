use num_complex::Complex64;
use thiserror::Error;

use crate::funcexpr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("evaluation point {z} coincides with the pole at {pole}")]
    PoleHit { z: Complex64, pole: Complex64 },

    #[error("expression is undefined at {z}")]
    Domain { z: Complex64 },

    #[error("expression outside the supported corpus: {0}")]
    UnsupportedExpr(String),

    #[error("pole at {pole} lies on the circle |z| = {r}")]
    PoleOnCircle { r: f64, pole: Complex64 },

    #[error("refinement did not converge: {0}")]
    NonConvergent(String),

    #[error("phase increment {jump:.3} rad exceeds pi/2 on |z| = {r} near angle {phi:.6}")]
    PhaseJumpTooLarge { r: f64, phi: f64, jump: f64 },

    #[error("pole at {pole} has modulus between the outer radii {r1} and {r2}")]
    PoleBetweenOuterRadii { r1: f64, r2: f64, pole: Complex64 },

    #[error("insufficient growth: {0}")]
    InsufficientGrowth(String),

    #[error("radius schedule is not geometric")]
    NonGeometricSchedule,

    #[error("order {0} outside (0, inf)")]
    SigmaOutOfRange(f64),

    #[error("indicator coefficient a must be non-zero")]
    ZeroCoefficient,

    #[error("angle {phi} lies in the critical set of the indicator")]
    CriticalAngle { phi: f64 },

    #[error("function vanishes at {z}")]
    ZeroDenominator { z: Complex64 },

    #[error("f(1/w) is not entire: {0}")]
    NotEntireAfterInversion(String),

    #[error("maximal term sits at the truncation index {0}")]
    TruncationTooSmall(usize),

    #[error("integrator step underflow at r = {r}")]
    StepUnderflow { r: f64 },

    #[error("coefficient pole at {pole} lies on the integration ray")]
    PoleOnRay { pole: Complex64 },

    #[error("Wronskian of the supplied solutions vanishes")]
    DegenerateWronskian,

    #[error("equation order {0} not supported (k <= 3)")]
    UnsupportedOrder(usize),

    #[error("value exceeds the log-magnitude budget at {z}")]
    Overflow { z: Complex64 },

    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures that stem from numerics rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonConvergent(_)
                | Error::PhaseJumpTooLarge { .. }
                | Error::StepUnderflow { .. }
                | Error::Overflow { .. }
                | Error::TruncationTooSmall(_)
        )
    }
}
