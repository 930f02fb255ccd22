//! Hyper-order from ray traces.
//!
//! For a solution of hyper-order `σ₂`, `ln|f′/f|` grows like `r^{-σ₂}` on
//! rays where the solution is of maximal growth, so the slope of
//! `ln ln|u|` against `−ln r` estimates `σ₂`. Only samples where `u` has
//! settled on its slowly varying branch are used: `r|u|` large, `|u′|/|u|²`
//! small and no zero of `f` crossed since the previous sample.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::integrate::{integrate_ray, Controls, RayGrowthTrace, TraceSample, TraceStatus};
use super::ODEProblem;
use crate::error::{Error, Result};
use crate::growth::{indicator, GrowthKind, OrderEstimate};
use crate::util::fit_line;

const MIN_R_U: f64 = 8.0;
const MAX_DRIFT: f64 = 0.25;
const MIN_POINTS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RaySlope {
    pub phi: f64,
    pub slope: Option<f64>,
    pub residual: f64,
    pub points: usize,
    pub window: (f64, f64),
    /// Slope of `ln ln ln|f|` over the same tail, for comparison.
    pub loglog_f_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperOrderReport {
    pub estimate: OrderEstimate,
    pub rays: Vec<RaySlope>,
}

fn usable(prev: &TraceSample, s: &TraceSample) -> Option<(f64, f64)> {
    let lu = s.u.logmag;
    let ok = lu.is_finite()
        && lu > 1.0
        && s.r.ln() + lu >= MIN_R_U.ln()
        && s.drift <= MAX_DRIFT
        && s.swaps == prev.swaps;
    ok.then(|| (-s.r.ln(), lu.ln()))
}

/// Running-maximum envelope and its least-squares slope.
fn envelope_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let mut top = f64::NEG_INFINITY;
    let y: Vec<f64> = pts
        .iter()
        .map(|p| {
            top = top.max(p.1);
            top
        })
        .collect();
    let (slope, _, rms) = fit_line(&x, &y);
    (slope, rms)
}

fn ray_slope(tr: &RayGrowthTrace) -> RaySlope {
    let n = tr.samples.len();
    let start = (n / 2).max(1);
    let tail = &tr.samples[start..];
    let window = (tail.last().map_or(0.0, |s| s.r), tail.first().map_or(0.0, |s| s.r));
    let pts: Vec<(f64, f64)> = (start..n)
        .filter_map(|i| usable(&tr.samples[i - 1], &tr.samples[i]))
        .collect();
    let (slope, residual) = if tr.status == TraceStatus::Ok && pts.len() >= MIN_POINTS {
        let (s, rms) = envelope_slope(&pts);
        (Some(s), rms)
    } else {
        (None, 0.0)
    };
    let lf: Vec<(f64, f64)> = tail
        .iter()
        .filter(|s| s.log_abs_f > std::f64::consts::E)
        .map(|s| (-s.r.ln(), s.log_abs_f.ln().ln()))
        .collect();
    let loglog_f_slope = (lf.len() >= MIN_POINTS).then(|| envelope_slope(&lf).0);
    RaySlope {
        phi: tr.phi,
        slope,
        residual,
        points: pts.len(),
        window,
        loglog_f_slope,
    }
}

/// Largest per-ray slope of `ln ln|f′/f|` against `−ln r`.
pub fn hyper_order_estimate(traces: &[RayGrowthTrace]) -> Result<HyperOrderReport> {
    if traces.is_empty() {
        return Err(Error::InsufficientGrowth("no traces".into()));
    }
    for t in traces {
        if t.status == TraceStatus::Ok && t.samples.len() < 12 {
            return Err(Error::InvalidArgument(format!(
                "trace at φ={} has {} samples, need at least 12",
                t.phi,
                t.samples.len()
            )));
        }
    }
    let rays: Vec<RaySlope> = traces.iter().map(ray_slope).collect();
    let best = rays
        .iter()
        .filter(|r| r.slope.is_some())
        .max_by(|a, b| a.slope.unwrap().total_cmp(&b.slope.unwrap()))
        .ok_or_else(|| {
            Error::InsufficientGrowth("no ray reached the regime where f′/f varies slowly".into())
        })?;
    let estimate = OrderEstimate {
        sigma: best.slope.unwrap(),
        tau: None,
        level: 2,
        kind: GrowthKind::M,
        slope_residual: best.residual,
        window: best.window,
        points: best.points,
    };
    Ok(HyperOrderReport { estimate, rays })
}

/// Integrates every ray twice, from `u0 = 1` and `u0 = −1`, keeping the run
/// with the larger final `ln|f|`. Traces come back sorted by angle.
pub fn run_rays(
    p: &ODEProblem,
    rays: &[f64],
    r_start: f64,
    r_end: f64,
    controls: &Controls,
) -> Result<Vec<RayGrowthTrace>> {
    let runs: Vec<RayGrowthTrace> = rays
        .par_iter()
        .map(|&phi| {
            let mut best: Option<RayGrowthTrace> = None;
            for sign in [1.0, -1.0] {
                let u0 = vec![Complex64::new(sign, 0.0); p.k - 1];
                let tr = integrate_ray(p, phi, r_start, r_end, &u0, controls)?;
                let score = |t: &RayGrowthTrace| {
                    (t.status == TraceStatus::Ok, t.samples.last().map_or(f64::NEG_INFINITY, |s| s.log_abs_f))
                };
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let (ok_b, lb) = score(b);
                        let (ok_t, lt) = score(&tr);
                        (ok_t && !ok_b) || (ok_t == ok_b && lt > lb)
                    }
                };
                if better {
                    best = Some(tr);
                }
            }
            Ok(best.unwrap())
        })
        .collect::<Result<_>>()?;
    let mut runs = runs;
    runs.sort_by(|a, b| a.phi.total_cmp(&b.phi));
    Ok(runs)
}

/// Rays for `f″ + A f′ + B e^{b/zⁿ} f = 0`: the direction where `e^{b/zⁿ}`
/// is largest and the two rays a quarter sector to either side.
pub fn eqc_rays(b: Complex64, n: u32) -> Vec<f64> {
    let c = b.arg() / n as f64;
    let d = PI / (4 * n) as f64;
    vec![c - d, c, c + d]
}

/// Rays for `f″ + A e^{a/zⁿ} f′ + B e^{b/zⁿ} f = 0`: three rays at the
/// quarter points of the widest sector where `δ_b > 0` and `δ_a < 0`.
pub fn eq4_rays(a: Complex64, b: Complex64, n: u32) -> Result<Vec<f64>> {
    const STEPS: usize = 7200;
    let h = 2.0 * PI / STEPS as f64;
    let good = |j: usize| {
        let phi = -PI + h * j as f64;
        indicator(b, n, phi) > 0.0 && indicator(a, n, phi) < 0.0
    };
    let flags: Vec<bool> = (0..STEPS).map(good).collect();
    if flags.iter().all(|&g| g) {
        return Ok(vec![-PI / 2.0, 0.0, PI / 2.0]);
    }
    // longest circular run of admissible angles
    let start = flags.iter().position(|&g| !g).unwrap();
    let mut best = (0usize, 0usize);
    let mut run: Option<usize> = None;
    for off in 1..=STEPS {
        let j = (start + off) % STEPS;
        match (flags[j], run) {
            (true, None) => run = Some(off),
            (false, Some(s)) => {
                if off - s > best.1 {
                    best = (s, off - s);
                }
                run = None;
            }
            _ => {}
        }
    }
    if best.1 == 0 {
        return Err(Error::InvalidArgument(
            "no sector with δ_b > 0 and δ_a < 0".into(),
        ));
    }
    let lo = -PI + h * ((start + best.0) as f64 - 0.5);
    let width = h * best.1 as f64;
    Ok((1..=3)
        .map(|q| crate::numerics::normalize(lo + width * q as f64 / 4.0))
        .collect())
}
