#![allow(dead_code)]

use singlab_core::{parse_fn, FnExpr};

/// Products and quotients of polynomials and exp(rational): the class the
/// pole/zero registry is exact on.
pub const CORPUS: &[&str] = &[
    "exp(z^2 + z^-2)",
    "exp(z^-1)",
    "exp(z^-2)",
    "exp(z^-3)",
    "exp(1/z)/(z-0.3)",
    "z*exp(1/z)",
    "exp(i/z)",
    "(z-0.2)^2*exp(z^-1)/(z+0.4)",
    "1/((z-0.5)*(z-0.2)^2)",
    "(z^2+0.04)*exp(-1/z^2)",
    "z^3 - 0.1",
    "exp(z^-1)*(z-0.25)/(z^2+0.09)",
];

pub fn f(src: &str) -> FnExpr {
    parse_fn(src).unwrap_or_else(|e| panic!("{src}: {e}"))
}

/// ln n! by direct summation.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

/// Angles spread by the golden ratio; deterministic stand-in for random
/// points on a circle.
pub fn golden_angles(n: usize) -> Vec<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    (0..n)
        .map(|j| std::f64::consts::TAU * ((0.1 + g * j as f64) % 1.0))
        .collect()
}
