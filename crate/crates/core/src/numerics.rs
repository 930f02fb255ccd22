//! Complex values stored as `(ln |z|, arg z)`.
//!
//! Coefficients such as `exp(1/z^2)` reach `e^400` at `r = 0.05`, far past
//! what an `f64` can hold. Every magnitude in the crate is therefore carried
//! as its natural logarithm; products become sums and sums are formed by
//! factoring out the larger operand.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Div, Mul, Neg};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-magnitude that encodes an exact zero.
pub const NEG_INF: f64 = f64::NEG_INFINITY;

/// Largest `|logmag|` for which conversion to `Complex64` is lossless.
pub const SAFE_LOGMAG: f64 = 700.0;

/// Map an angle into `(-pi, pi]`.
pub fn normalize(phase: f64) -> f64 {
    if !phase.is_finite() {
        return phase;
    }
    let x = phase.rem_euclid(TAU);
    if x > PI {
        x - TAU
    } else {
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub logmag: f64,
    pub phase: f64,
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex {
        logmag: NEG_INF,
        phase: 0.0,
    };
    pub const ONE: LogComplex = LogComplex {
        logmag: 0.0,
        phase: 0.0,
    };

    pub fn new(logmag: f64, phase: f64) -> Self {
        if logmag == NEG_INF {
            return Self::ZERO;
        }
        LogComplex {
            logmag,
            phase: normalize(phase),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.re == 0.0 && z.im == 0.0 {
            return Self::ZERO;
        }
        // hypot keeps subnormal and huge parts finite
        LogComplex::new(z.re.hypot(z.im).ln(), z.im.atan2(z.re))
    }

    pub fn from_real(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }

    /// `exp(w)` for an ordinary complex exponent, never materializing `e^Re(w)`.
    pub fn exp_of(w: Complex64) -> Self {
        LogComplex::new(w.re, w.im)
    }

    pub fn is_zero(&self) -> bool {
        self.logmag == NEG_INF
    }

    pub fn is_finite(&self) -> bool {
        self.logmag.is_finite() || self.is_zero()
    }

    /// Convert back to an ordinary complex number. Saturates to infinity past
    /// the double range.
    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.logmag.exp(), self.phase)
    }

    /// The value `ln z` on the principal branch, as an ordinary complex number.
    pub fn ln(&self) -> Complex64 {
        Complex64::new(self.logmag, self.phase)
    }

    pub fn abs(&self) -> f64 {
        self.logmag.exp()
    }

    pub fn recip(&self) -> Self {
        if self.is_zero() {
            return LogComplex::new(f64::INFINITY, 0.0);
        }
        LogComplex::new(-self.logmag, -self.phase)
    }

    pub fn powi(&self, k: i32) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.is_zero() {
            return if k > 0 {
                Self::ZERO
            } else {
                LogComplex::new(f64::INFINITY, 0.0)
            };
        }
        LogComplex::new(self.logmag * k as f64, self.phase * k as f64)
    }

    pub fn scale(&self, x: f64) -> Self {
        lc_mul(*self, LogComplex::from_real(x))
    }
}

impl Default for LogComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Display for LogComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({} {:+}i)", self.logmag, self.phase)
    }
}

/// Product in log space; zero absorbs.
pub fn lc_mul(a: LogComplex, b: LogComplex) -> LogComplex {
    if a.is_zero() || b.is_zero() {
        return LogComplex::ZERO;
    }
    LogComplex::new(a.logmag + b.logmag, a.phase + b.phase)
}

pub fn lc_div(a: LogComplex, b: LogComplex) -> LogComplex {
    lc_mul(a, b.recip())
}

/// Sum in log space: `big * (1 + small/big)`. The correction term never
/// exceeds a factor of two, so nothing leaves the working range.
pub fn lc_add(a: LogComplex, b: LogComplex) -> LogComplex {
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    // Ties broken on phase so that lc_add(a, b) == lc_add(b, a) bit for bit.
    let (big, small) = if a.logmag > b.logmag || (a.logmag == b.logmag && a.phase >= b.phase) {
        (a, b)
    } else {
        (b, a)
    };
    if big.logmag.is_infinite() {
        return big;
    }
    let rho = (small.logmag - big.logmag).exp();
    let theta = small.phase - big.phase;
    let (s, c) = theta.sin_cos();
    let re = 1.0 + rho * c;
    let im = rho * s;
    // Below a few ulps of the larger operand the sum carries no information.
    if re.hypot(im) <= 4.0 * f64::EPSILON {
        return LogComplex::ZERO;
    }
    // |1 + rho e^{i theta}|^2 = 1 + 2 rho cos(theta) + rho^2
    let t = rho * (2.0 * c + rho);
    let log_mod = if t > -0.5 {
        0.5 * t.ln_1p()
    } else {
        re.hypot(im).ln()
    };
    LogComplex::new(big.logmag + log_mod, big.phase + im.atan2(re))
}

pub fn lc_neg(a: LogComplex) -> LogComplex {
    if a.is_zero() {
        return a;
    }
    LogComplex::new(a.logmag, a.phase + PI)
}

pub fn lc_sub(a: LogComplex, b: LogComplex) -> LogComplex {
    lc_add(a, lc_neg(b))
}

/// Sum of many terms, scaled by the largest one before accumulation.
pub fn lc_sum<I: IntoIterator<Item = LogComplex>>(terms: I) -> LogComplex {
    let terms: Vec<LogComplex> = terms.into_iter().filter(|t| !t.is_zero()).collect();
    let Some(top) = terms.iter().map(|t| t.logmag).reduce(f64::max) else {
        return LogComplex::ZERO;
    };
    if top.is_infinite() {
        return LogComplex::new(top, 0.0);
    }
    let mut acc = NeumaierComplex::default();
    for t in &terms {
        acc.add(Complex64::from_polar((t.logmag - top).exp(), t.phase));
    }
    lc_mul(LogComplex::from_complex(acc.value()), LogComplex::new(top, 0.0))
}

impl Mul for LogComplex {
    type Output = LogComplex;
    fn mul(self, rhs: LogComplex) -> LogComplex {
        lc_mul(self, rhs)
    }
}

impl Div for LogComplex {
    type Output = LogComplex;
    fn div(self, rhs: LogComplex) -> LogComplex {
        lc_div(self, rhs)
    }
}

impl Neg for LogComplex {
    type Output = LogComplex;
    fn neg(self) -> LogComplex {
        lc_neg(self)
    }
}

/// Precision knobs shared by every numeric routine.
///
/// Values are carried in `f64` log space; `work_bits` sets the magnitude
/// budget (`|logmag| <= 2^(work_bits/4)`) that schedules must respect, and
/// `target_rel_err` drives quadrature and integrator tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecisionPolicy {
    pub work_bits: u32,
    pub target_rel_err: f64,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy {
            work_bits: 128,
            target_rel_err: 1e-12,
        }
    }
}

impl PrecisionPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.work_bits < 53 {
            return Err(Error::InvalidArgument(format!(
                "work_bits must be at least 53, got {}",
                self.work_bits
            )));
        }
        if !(self.target_rel_err > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "target_rel_err must be positive, got {}",
                self.target_rel_err
            )));
        }
        Ok(())
    }

    /// Largest log-magnitude a sweep may produce under this policy.
    pub fn logmag_budget(&self) -> f64 {
        2f64.powf(self.work_bits as f64 / 4.0)
    }
}

/// Neumaier-compensated accumulator. Summation order is the caller's, so
/// results are reproducible run to run.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierComplex {
    re: Neumaier,
    im: Neumaier,
}

impl NeumaierComplex {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}
