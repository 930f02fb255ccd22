//! Linear ODEs `f^(k) + A_{k-1} f^(k-1) + … + A_0 f = 0` with coefficients
//! singular at the origin: ray integration in projective log-derivative
//! form, hyper-order estimation, and oracle equations built from known
//! solutions together with the order-reduction identities.

mod construct;
mod hyper;
mod integrate;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcexpr::{parse_fn, FnExpr};

pub use construct::{
    construct_equation, equation_residual, gq_check, order_reduce, v0_coeff_bound_check, ReductionStep, V0Report,
    V0Row,
};
pub use hyper::{eq4_rays, eqc_rays, hyper_order_estimate, run_rays, HyperOrderReport, RaySlope};
pub use integrate::{integrate_ray, Controls, RayGrowthTrace, TraceSample, TraceStatus};

#[derive(Clone, Debug, Serialize)]
pub struct ODEProblem {
    pub k: usize,
    /// `A_0 … A_{k-1}`.
    pub coeffs: Vec<FnExpr>,
    pub label: String,
}

impl ODEProblem {
    pub fn new(coeffs: Vec<FnExpr>, label: impl Into<String>) -> Result<Self> {
        let k = coeffs.len();
        if k < 2 {
            return Err(Error::InvalidArgument(format!("order must be at least 2, got {k}")));
        }
        Ok(ODEProblem {
            k,
            coeffs,
            label: label.into(),
        })
    }
}

impl fmt::Display for ODEProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.k)?;
        for a in &self.coeffs {
            write!(f, ";{a}")?;
        }
        Ok(())
    }
}

/// `"k;A0;A1[;A2…]"`.
impl FromStr for ODEProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(';');
        let head = parts.next().unwrap_or("").trim();
        let k: usize = head
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("equation must start with its order, got {head:?}")))?;
        let coeffs = parts
            .map(|p| parse_fn(p).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        if coeffs.len() != k {
            return Err(Error::InvalidArgument(format!(
                "order {k} needs {k} coefficients, got {}",
                coeffs.len()
            )));
        }
        ODEProblem::new(coeffs, s.trim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_equation_spec() {
        let p: ODEProblem = "2;exp(1/z);z".parse().unwrap();
        assert_eq!(p.k, 2);
        assert_eq!(p.coeffs[1].to_string(), "z");
        assert!("2;z".parse::<ODEProblem>().is_err());
        assert!("x;1;1".parse::<ODEProblem>().is_err());
        assert!("1;1".parse::<ODEProblem>().is_err());
    }
}
