//! Order, type and iterated order near the singular point from radius
//! sweeps, the indicator `δ_a(φ)`, and the large-growth density sets.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcexpr::{eval_log, FnExpr};
use crate::nevanlinna::{max_modulus, nevanlinna_sample, CircleGrid, NevanlinnaSample};
use crate::numerics::PrecisionPolicy;
use crate::util::{angle_0_2pi, fit_line};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiusSchedule {
    pub r_max: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for RadiusSchedule {
    fn default() -> Self {
        RadiusSchedule {
            r_max: 0.5,
            ratio: 0.9,
            count: 60,
        }
    }
}

impl RadiusSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0 && self.r_max < 1.0) {
            return Err(Error::InvalidArgument(format!("r_max must lie in (0, 1), got {}", self.r_max)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidArgument(format!("ratio must lie in (0, 1), got {}", self.ratio)));
        }
        if self.count == 0 {
            return Err(Error::InvalidArgument("count must be positive".into()));
        }
        Ok(())
    }

    /// Radii `r_max·ratio^j`, largest first.
    pub fn radii(&self) -> Vec<f64> {
        (0..self.count)
            .map(|j| self.r_max * self.ratio.powi(j as i32))
            .collect()
    }

    pub fn r_min(&self) -> f64 {
        self.r_max * self.ratio.powi(self.count as i32 - 1)
    }

    pub fn extended(&self, extra: usize) -> RadiusSchedule {
        RadiusSchedule {
            count: self.count + extra,
            ..*self
        }
    }
}

/// Nevanlinna samples over a schedule, in schedule order.
pub fn sweep(
    f: &FnExpr,
    r_outer: f64,
    schedule: &RadiusSchedule,
    grid: &CircleGrid,
    policy: &PrecisionPolicy,
) -> Result<Vec<NevanlinnaSample>> {
    schedule.validate()?;
    schedule
        .radii()
        .par_iter()
        .map(|&r| nevanlinna_sample(f, r, r_outer, grid, policy))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthKind {
    T,
    M,
}

impl std::str::FromStr for GrowthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" | "t" => Ok(GrowthKind::T),
            "M" | "m" => Ok(GrowthKind::M),
            _ => Err(Error::InvalidArgument(format!("kind must be T or M, got {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub sigma: f64,
    pub tau: Option<f64>,
    pub level: u32,
    pub kind: GrowthKind,
    pub slope_residual: f64,
    pub window: (f64, f64),
    /// Number of tail points that entered the fit.
    pub points: usize,
}

/// `log⁺` applied `n` times; `None` once an intermediate value is not
/// above 1 (the point is dropped rather than clamped).
fn log_n_plus(x: f64, n: u32) -> Option<f64> {
    let mut v = x;
    for _ in 0..n {
        if !(v > 1.0) {
            return None;
        }
        v = v.ln();
    }
    (v > 0.0).then_some(v)
}

fn kind_value(s: &NevanlinnaSample, kind: GrowthKind) -> f64 {
    match kind {
        GrowthKind::T => s.t0,
        GrowthKind::M => s.log_m0.max(0.0),
    }
}

/// Radii sorted largest first, checked to form a geometric progression.
fn ordered(samples: &[NevanlinnaSample]) -> Result<Vec<NevanlinnaSample>> {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| b.r.total_cmp(&a.r));
    if v.len() >= 3 {
        let q = v[1].r / v[0].r;
        for w in v.windows(2) {
            if ((w[1].r / w[0].r) - q).abs() > 1e-9 * q {
                return Err(Error::NonGeometricSchedule);
            }
        }
    }
    Ok(v)
}

pub(crate) struct EnvelopeFit {
    /// `(slope, max |deviation|)`, absent with fewer than two usable points.
    pub slope: Option<(f64, f64)>,
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares slope of the running maximum of `log_n⁺(value)` against
/// `−ln r` over the tail half. `pts` are `(r, value)`, largest radius first.
pub(crate) fn envelope_fit(pts: &[(f64, f64)], level: u32) -> EnvelopeFit {
    let tail = &pts[pts.len() / 2..];
    let window = (tail.last().unwrap().0, tail[0].0);
    let use_pts: Vec<(f64, f64)> = tail
        .iter()
        .filter_map(|&(r, v)| log_n_plus(v, level).map(|y| (-r.ln(), y)))
        .collect();
    if use_pts.len() < 2 {
        return EnvelopeFit {
            slope: None,
            window,
            points: use_pts.len(),
        };
    }
    let mut env = Vec::with_capacity(use_pts.len());
    let mut top = f64::NEG_INFINITY;
    for &(_, y) in &use_pts {
        top = top.max(y);
        env.push(top);
    }
    let x: Vec<f64> = use_pts.iter().map(|p| p.0).collect();
    let (slope, icpt, _) = fit_line(&x, &env);
    let dev = x
        .iter()
        .zip(&env)
        .map(|(a, b)| (b - slope * a - icpt).abs())
        .fold(0.0, f64::max);
    EnvelopeFit {
        slope: Some((slope, dev)),
        window,
        points: use_pts.len(),
    }
}

/// Order `σ_{n,T}` or `σ_{n,M}` from samples on a geometric schedule.
pub fn estimate_order(samples: &[NevanlinnaSample], level: u32, kind: GrowthKind) -> Result<OrderEstimate> {
    if level == 0 {
        return Err(Error::InvalidArgument("level must be at least 1".into()));
    }
    if samples.len() < 12 {
        return Err(Error::InvalidArgument(format!(
            "need at least 12 samples, got {}",
            samples.len()
        )));
    }
    let v = ordered(samples)?;
    let pts: Vec<(f64, f64)> = v.iter().map(|s| (s.r, kind_value(s, kind))).collect();
    let fit = envelope_fit(&pts, level);
    let none = OrderEstimate {
        sigma: 0.0,
        tau: None,
        level,
        kind,
        slope_residual: 0.0,
        window: fit.window,
        points: fit.points,
    };
    let Some((slope, slope_residual)) = fit.slope else {
        return Ok(none);
    };
    let sigma = slope.max(0.0);
    let tau = if level == 1 && sigma > 0.0 && sigma.is_finite() {
        estimate_type(samples, sigma, kind).ok()
    } else {
        None
    };
    Ok(OrderEstimate {
        sigma,
        tau,
        slope_residual,
        ..none
    })
}

/// Type `τ_T` or `τ_M`: running maximum of `r^σ·value` over the tail third.
pub fn estimate_type(samples: &[NevanlinnaSample], sigma: f64, kind: GrowthKind) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::SigmaOutOfRange(sigma));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let v = ordered(samples)?;
    let start = v.len() - v.len().div_ceil(3);
    Ok(v[start..]
        .iter()
        .map(|s| s.r.powf(sigma) * kind_value(s, kind))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndicatorProfile {
    pub a: Complex64,
    pub n: u32,
    pub samples: Vec<(f64, f64)>,
    pub critical_angles: Vec<f64>,
}

pub fn indicator(a: Complex64, n: u32, phi: f64) -> f64 {
    let t = n as f64 * phi;
    a.re * t.cos() + a.im * t.sin()
}

/// The `2n` zeros of `δ_a` in `[0, 2π)`, ascending.
pub fn critical_angles(a: Complex64, n: u32) -> Vec<f64> {
    let nf = n as f64;
    let mut v: Vec<f64> = (0..2 * n)
        .map(|m| angle_0_2pi((a.arg() + FRAC_PI_2 + PI * m as f64) / nf))
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn indicator_profile(a: Complex64, n: u32, n_angles: usize) -> Result<IndicatorProfile> {
    if a == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroCoefficient);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let samples = (0..n_angles)
        .map(|j| {
            let phi = TAU * j as f64 / n_angles as f64;
            (phi, indicator(a, n, phi))
        })
        .collect();
    Ok(IndicatorProfile {
        a,
        n,
        samples,
        critical_angles: critical_angles(a, n),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichRow {
    pub r: f64,
    pub logmag: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub delta: f64,
    /// Largest sampled radius below which every sample satisfies the bounds.
    pub r0: Option<f64>,
    pub violations: Vec<f64>,
    pub rows: Vec<SandwichRow>,
}

/// Checks `(1−ε)δ/rⁿ ≤ ln|A·exp(a/zⁿ)| ≤ (1+ε)δ/rⁿ` along the ray `arg z = φ`
/// (bounds swapped when `δ < 0`).
#[allow(clippy::too_many_arguments)]
pub fn indicator_sandwich_check(
    a_fn: &FnExpr,
    a: Complex64,
    n: u32,
    phi: f64,
    eps: f64,
    schedule: &RadiusSchedule,
    policy: &PrecisionPolicy,
) -> Result<SandwichReport> {
    if a == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroCoefficient);
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    schedule.validate()?;
    let p = angle_0_2pi(phi);
    for c in critical_angles(a, n) {
        let d = (p - c).abs();
        if d.min(TAU - d) < 1e-9 {
            return Err(Error::CriticalAngle { phi });
        }
    }
    let delta = indicator(a, n, phi);
    let rows: Vec<SandwichRow> = schedule
        .radii()
        .par_iter()
        .map(|&r| -> Result<SandwichRow> {
            let z = Complex64::from_polar(r, phi);
            let base = eval_log(a_fn, z, policy)?.logmag;
            let logmag = base + (a / z.powi(n as i32)).re;
            let s = delta / r.powi(n as i32);
            let (lower, upper) = if delta > 0.0 {
                ((1.0 - eps) * s, (1.0 + eps) * s)
            } else {
                ((1.0 + eps) * s, (1.0 - eps) * s)
            };
            Ok(SandwichRow {
                r,
                logmag,
                lower,
                upper,
                holds: lower <= logmag && logmag <= upper,
            })
        })
        .collect::<Result<_>>()?;
    let violations = rows.iter().filter(|w| !w.holds).map(|w| w.r).collect();
    // rows are largest radius first; walk up from the smallest
    let r0 = rows
        .iter()
        .rev()
        .take_while(|w| w.holds)
        .last()
        .map(|w| w.r);
    Ok(SandwichReport {
        delta,
        r0,
        violations,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub sigma: f64,
    pub beta: f64,
    /// Sampled radii with `ln M₀(r) > β/r^σ`.
    pub members: Vec<f64>,
    pub log_measure: f64,
    /// Log measure on the base schedule and three successive extensions.
    pub extension_measures: Vec<f64>,
    pub grows: bool,
}

fn log_measure(radii: &[f64], inside: &[bool], ratio: f64) -> f64 {
    radii
        .iter()
        .enumerate()
        .filter(|(j, _)| inside[*j])
        .map(|(j, &r)| if j == 0 { (1.0 / ratio).ln() } else { (radii[j - 1] / r).ln() })
        .sum()
}

/// Empirical logarithmic measure of `{r : ln M₀(r) > β/r^σ}`.
pub fn density_set_check(
    f: &FnExpr,
    sigma: f64,
    beta: f64,
    schedule: &RadiusSchedule,
    grid: &CircleGrid,
    policy: &PrecisionPolicy,
) -> Result<DensityReport> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    schedule.validate()?;
    let step = (schedule.count / 6).max(1);
    let longest = schedule.extended(3 * step);
    let radii = longest.radii();
    let inside: Vec<bool> = radii
        .par_iter()
        .map(|&r| -> Result<bool> {
            let m = max_modulus(f, r, grid, policy)?;
            Ok(m.log_m > beta / r.powf(sigma))
        })
        .collect::<Result<_>>()?;
    let extension_measures: Vec<f64> = (0..4)
        .map(|k| {
            let c = schedule.count + k * step;
            log_measure(&radii[..c], &inside[..c], schedule.ratio)
        })
        .collect();
    let c = schedule.count;
    let members = radii[..c]
        .iter()
        .zip(&inside[..c])
        .filter(|(_, &b)| b)
        .map(|(&r, _)| r)
        .collect();
    let grows = extension_measures.windows(2).all(|w| w[1] > w[0]);
    Ok(DensityReport {
        sigma,
        beta,
        members,
        log_measure: extension_measures[0],
        extension_measures,
        grows,
    })
}
