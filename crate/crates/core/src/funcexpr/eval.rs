use num_complex::Complex64;

use super::{FnExpr, Node};
use crate::error::{Error, Result};
use crate::numerics::{lc_add, lc_sub, LogComplex, PrecisionPolicy};

/// Relative distance below which an evaluation point counts as a pole hit.
pub const POLE_HIT_TOL: f64 = 1e-12;

fn ev(n: &Node, z: Complex64, zl: LogComplex) -> Result<LogComplex> {
    Ok(match n {
        Node::Var => zl,
        Node::Const(c) => LogComplex::from_complex(*c),
        Node::Neg(a) => -ev(a, z, zl)?,
        Node::Add(a, b) => lc_add(ev(a, z, zl)?, ev(b, z, zl)?),
        Node::Sub(a, b) => lc_sub(ev(a, z, zl)?, ev(b, z, zl)?),
        Node::Mul(a, b) => {
            let x = ev(a, z, zl)?;
            if x.is_zero() {
                // still evaluate b so that poles are reported
                ev(b, z, zl)?;
                return Ok(LogComplex::ZERO);
            }
            x * ev(b, z, zl)?
        }
        Node::Div(a, b) => {
            let d = ev(b, z, zl)?;
            if d.is_zero() {
                return Err(Error::PoleHit { z, pole: z });
            }
            ev(a, z, zl)? / d
        }
        Node::Pow(a, k) => {
            let x = ev(a, z, zl)?;
            if x.is_zero() && *k < 0 {
                return Err(Error::PoleHit { z, pole: z });
            }
            x.powi(*k)
        }
        Node::Exp(a) => {
            let x = ev(a, z, zl)?;
            if x.logmag > 700.0 {
                return Err(Error::Overflow { z });
            }
            LogComplex::exp_of(x.to_complex())
        }
    })
}

/// Value together with `ln` of its term-wise magnitude, where every sum is
/// replaced by the sum of moduli. The rounding error of an evaluation is a
/// small multiple of `ε` times that magnitude.
fn ev_abs(n: &Node, z: Complex64, zl: LogComplex) -> Result<(LogComplex, f64)> {
    let lae = |a: f64, b: f64| {
        let m = a.max(b);
        if m == f64::NEG_INFINITY {
            m
        } else {
            m + ((a - m).exp() + (b - m).exp()).ln()
        }
    };
    Ok(match n {
        Node::Var => (zl, zl.logmag),
        Node::Const(c) => {
            let v = LogComplex::from_complex(*c);
            (v, v.logmag)
        }
        Node::Neg(a) => {
            let (v, s) = ev_abs(a, z, zl)?;
            (-v, s)
        }
        Node::Add(a, b) | Node::Sub(a, b) => {
            let (x, sx) = ev_abs(a, z, zl)?;
            let (y, sy) = ev_abs(b, z, zl)?;
            let v = if matches!(n, Node::Add(..)) { lc_add(x, y) } else { lc_sub(x, y) };
            (v, lae(sx, sy))
        }
        Node::Mul(a, b) => {
            let (x, sx) = ev_abs(a, z, zl)?;
            let (y, sy) = ev_abs(b, z, zl)?;
            (x * y, sx + sy)
        }
        Node::Div(a, b) => {
            let (x, sx) = ev_abs(a, z, zl)?;
            let (d, sd) = ev_abs(b, z, zl)?;
            if d.is_zero() {
                return Err(Error::PoleHit { z, pole: z });
            }
            // relative error of the denominator carries over to the quotient
            (x / d, lae(sx, x.logmag + sd - d.logmag) - d.logmag)
        }
        Node::Pow(a, k) => {
            let (x, sx) = ev_abs(a, z, zl)?;
            if x.is_zero() && *k < 0 {
                return Err(Error::PoleHit { z, pole: z });
            }
            let v = x.powi(*k);
            if *k == 0 {
                (v, 0.0)
            } else {
                (v, v.logmag + sx - x.logmag + (k.unsigned_abs() as f64).ln())
            }
        }
        Node::Exp(a) => {
            let (x, sx) = ev_abs(a, z, zl)?;
            if x.logmag > 700.0 {
                return Err(Error::Overflow { z });
            }
            let v = LogComplex::exp_of(x.to_complex());
            (v, v.logmag + sx.max(0.0))
        }
    })
}

pub(crate) fn eval_with_scale(n: &Node, z: Complex64) -> Result<(LogComplex, f64)> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite point {z}")));
    }
    let (v, s) = ev_abs(n, z, LogComplex::from_complex(z))?;
    if v.logmag.is_nan() || v.phase.is_nan() || s.is_nan() {
        return Err(Error::Domain { z });
    }
    Ok((v, s))
}

pub(crate) fn eval_node(n: &Node, z: Complex64) -> Result<LogComplex> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite point {z}")));
    }
    let v = ev(n, z, LogComplex::from_complex(z))?;
    if v.logmag.is_nan() || v.phase.is_nan() {
        return Err(Error::Domain { z });
    }
    Ok(v)
}

pub(crate) fn eval_checked(f: &FnExpr, z: Complex64) -> Result<LogComplex> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::Domain { z });
    }
    if let Ok(poles) = f.poles() {
        for &(p, _) in poles {
            if (z - p).norm() < POLE_HIT_TOL * p.norm() {
                return Err(Error::PoleHit { z, pole: p });
            }
        }
    }
    eval_node(f.root(), z)
}

/// Evaluate `f(z)` in log space, enforcing the policy's magnitude budget.
pub fn eval_log(f: &FnExpr, z: Complex64, policy: &PrecisionPolicy) -> Result<LogComplex> {
    let v = f.eval_log(z)?;
    if v.logmag > policy.logmag_budget() {
        return Err(Error::Overflow { z });
    }
    Ok(v)
}
