//! Power-series coefficients of `g(w) = f(1/w)`, maximal term and central
//! index, and the Wiman-Valiron ratio `|f^{(j)}(z_r)/f(z_r)| / (V₀/|z_r|)^j`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcexpr::{invert_variable, FnExpr};
use crate::growth::{envelope_fit, RadiusSchedule};
use crate::logderiv::logderiv_ratio;
use crate::nevanlinna::{max_modulus, CircleGrid};
use crate::numerics::PrecisionPolicy;

/// Coefficients below this fraction of the dominant term on every ring
/// are indistinguishable from roundoff and are omitted.
const COEFF_FLOOR_LN: f64 = -27.631; // ln 1e-12

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coefficient {
    pub k: usize,
    pub logmag: f64,
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LaurentData {
    pub coeffs: Vec<Coefficient>,
    pub truncation: usize,
    pub source: FnExpr,
}

impl LaurentData {
    /// `g(w)` from the retained coefficients.
    pub fn eval(&self, w: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|c| Complex64::from_polar(c.logmag.exp(), c.phase) * w.powu(c.k as u32))
            .sum()
    }

    pub fn get(&self, k: usize) -> Option<&Coefficient> {
        self.coeffs
            .binary_search_by_key(&k, |c| c.k)
            .ok()
            .map(|i| &self.coeffs[i])
    }
}

type Row = (f64, f64, f64);

/// Scaled discrete Cauchy sums on one ring: for each `k ≤ n`, `ln|a_k|`,
/// the phase, and `ln|a_k ρ^k| − ln max|g|` (how dominant the term is
/// there). Also returns the index of the dominant term over the whole
/// resolved spectrum `k < m/2`.
fn ring(g: &FnExpr, rho: f64, m: usize, n: usize) -> Result<(Vec<Row>, usize)> {
    let vals: Vec<crate::numerics::LogComplex> = (0..m)
        .into_par_iter()
        .map(|j| g.eval_log(Complex64::from_polar(rho, TAU * j as f64 / m as f64)))
        .collect::<Result<_>>()?;
    let top = vals.iter().map(|v| v.logmag).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Ok((vec![(f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY); n + 1], 0));
    }
    let mut buf: Vec<Complex64> = vals
        .iter()
        .map(|v| {
            if v.is_zero() {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar((v.logmag - top).exp(), v.phase)
            }
        })
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    let ln_m = (m as f64).ln();
    let dominant = (0..m / 2)
        .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
        .unwrap_or(0);
    let rows = (0..=n)
        .map(|k| {
            let a = buf[k];
            let rel = a.norm().ln() - ln_m;
            (top + rel - k as f64 * rho.ln(), a.arg(), rel)
        })
        .collect();
    Ok((rows, dominant))
}

/// Coefficients `a_0..a_N` of `g = f(1/w)`. With `ring_radius` the single
/// discrete Cauchy sum on that ring is used; otherwise each coefficient is
/// taken from the ring `ρ = 2^{i/2}` where its term dominates most.
pub fn laurent_coeffs(f: &FnExpr, n: usize, ring_radius: Option<f64>) -> Result<LaurentData> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!("truncation must be at least 8, got {n}")));
    }
    let g = invert_variable(f);
    if !g.is_entire() {
        return Err(Error::NotEntireAfterInversion(g.to_string()));
    }
    let m = (4 * n).next_power_of_two();
    let mut best: Vec<Row> = vec![(f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY); n + 1];
    let mut take = |rows: Vec<Row>| {
        for (b, r) in best.iter_mut().zip(rows) {
            if r.2 > b.2 {
                *b = r;
            }
        }
    };
    match ring_radius {
        Some(rho) => {
            if !(rho > 0.0) {
                return Err(Error::InvalidArgument(format!("ring radius must be positive, got {rho}")));
            }
            take(ring(&g, rho, m, n)?.0);
        }
        None => {
            let max_i = 2 * ((4 * n) as f64).log2().ceil() as usize;
            for i in 0..=max_i {
                let rho = 2f64.powf(i as f64 / 2.0);
                let (rows, dominant) = ring(&g, rho, m, n)?;
                // a ring whose dominant term sits far past N is aliased
                // garbage for the low indices; stop before using it
                if dominant > 2 * n {
                    break;
                }
                take(rows);
                if dominant >= n {
                    break;
                }
            }
        }
    }
    let coeffs = best
        .into_iter()
        .enumerate()
        .filter(|(_, (lm, _, rel))| lm.is_finite() && *rel >= COEFF_FLOOR_LN)
        .map(|(k, (logmag, phase, _))| Coefficient { k, logmag, phase })
        .collect();
    Ok(LaurentData {
        coeffs,
        truncation: n,
        source: g,
    })
}

/// Largest index maximizing `ln|a_k| + k ln(1/r)`.
pub fn central_index(data: &LaurentData, r: f64) -> Result<usize> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let lr = (1.0 / r).ln();
    let score = |c: &Coefficient| c.logmag + c.k as f64 * lr;
    let top = data
        .coeffs
        .iter()
        .map(score)
        .fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-9 * (1.0 + top.abs());
    let k = data
        .coeffs
        .iter()
        .filter(|c| score(c) >= top - tie)
        .map(|c| c.k)
        .max()
        .ok_or_else(|| Error::InsufficientGrowth("no non-zero coefficients".into()))?;
    if k + 1 >= data.truncation {
        return Err(Error::TruncationTooSmall(data.truncation));
    }
    Ok(k)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CentralIndexCurve {
    pub samples: Vec<(f64, usize)>,
}

pub fn central_index_curve(data: &LaurentData, schedule: &RadiusSchedule) -> Result<CentralIndexCurve> {
    schedule.validate()?;
    let samples = schedule
        .radii()
        .into_iter()
        .map(|r| central_index(data, r).map(|v| (r, v)))
        .collect::<Result<_>>()?;
    Ok(CentralIndexCurve { samples })
}

/// Iterated order of the central index: envelope slope of `log_n⁺ V₀(r)`
/// against `−ln r`. Bounded central indices give `0`.
pub fn ci_order(curve: &CentralIndexCurve, level: u32) -> Result<f64> {
    if curve.samples.len() < 12 {
        return Err(Error::InvalidArgument(format!(
            "need at least 12 samples, got {}",
            curve.samples.len()
        )));
    }
    let mut pts: Vec<(f64, f64)> = curve.samples.iter().map(|&(r, v)| (r, v as f64)).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let fit = envelope_fit(&pts, level);
    Ok(fit.slope.map_or(0.0, |(s, _)| s.max(0.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WvRow {
    pub r: f64,
    pub j: usize,
    pub v0: usize,
    pub z_r: Complex64,
    pub rho: f64,
    pub ln_rho: f64,
    /// `|ρ_j − 1| > 0.1`: empirical exceptional candidate.
    pub flagged: bool,
}

/// `ρ_j = |f^{(j)}(z_r)/f(z_r)| / (V₀(r)/|z_r|)^j` at the maximum-modulus
/// point `z_r` of `|z| = r`.
pub fn wv_ratio_check(
    f: &FnExpr,
    j: usize,
    r: f64,
    data: &LaurentData,
    grid: &CircleGrid,
    policy: &PrecisionPolicy,
) -> Result<WvRow> {
    if j == 0 {
        return Err(Error::InvalidArgument("j must be at least 1".into()));
    }
    let v0 = central_index(data, r)?;
    if v0 == 0 {
        return Err(Error::InsufficientGrowth(format!("central index is 0 at r = {r}")));
    }
    let mm = max_modulus(f, r, grid, policy)?;
    let z_r = Complex64::from_polar(r, mm.phi);
    let lhs = logderiv_ratio(f, j, z_r, policy)?.logmag;
    let ln_rho = lhs - j as f64 * ((v0 as f64).ln() - r.ln());
    let rho = ln_rho.exp();
    Ok(WvRow {
        r,
        j,
        v0,
        z_r,
        rho,
        ln_rho,
        flagged: (rho - 1.0).abs() > 0.1,
    })
}

/// [`wv_ratio_check`] over a schedule, in schedule order.
pub fn wv_sweep(
    f: &FnExpr,
    j: usize,
    schedule: &RadiusSchedule,
    data: &LaurentData,
    grid: &CircleGrid,
    policy: &PrecisionPolicy,
) -> Result<Vec<WvRow>> {
    schedule.validate()?;
    schedule
        .radii()
        .par_iter()
        .map(|&r| wv_ratio_check(f, j, r, data, grid, policy))
        .collect()
}
