//! `|f^{(k)}/f|` on circles and rays, swept against the logarithmic
//! derivative bounds, with the empirical exceptional sets.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcexpr::{differentiate, eval_log, FnExpr};
use crate::growth::RadiusSchedule;
use crate::nevanlinna::NevanlinnaSample;
use crate::numerics::{LogComplex, PrecisionPolicy};
use crate::util::{angle_0_2pi, golden_max};

/// `f^{(k)}(z)/f(z)`.
pub fn logderiv_ratio(f: &FnExpr, k: usize, z: Complex64, policy: &PrecisionPolicy) -> Result<LogComplex> {
    LogDeriv::new(f, k).at(z, policy)
}

/// `f` together with its `k`-th derivative, built once for repeated use.
#[derive(Clone, Debug)]
pub struct LogDeriv {
    f: FnExpr,
    fk: FnExpr,
}

impl LogDeriv {
    pub fn new(f: &FnExpr, k: usize) -> Self {
        LogDeriv {
            f: f.clone(),
            fk: differentiate(f, k),
        }
    }

    pub fn at(&self, z: Complex64, policy: &PrecisionPolicy) -> Result<LogComplex> {
        let v = eval_log(&self.f, z, policy)?;
        if v.is_zero() {
            return Err(Error::ZeroDenominator { z });
        }
        Ok(eval_log(&self.fk, z, policy)? / v)
    }

    /// `ln|f^{(k)}/f|`, with a zero of `f` or a pole hit read as `+∞`.
    fn ln_abs(&self, z: Complex64, policy: &PrecisionPolicy) -> Result<f64> {
        match self.at(z, policy) {
            Ok(v) => Ok(v.logmag),
            Err(Error::ZeroDenominator { .. }) | Err(Error::PoleHit { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Maximum of `ln|f^{(k)}/f|` over `|z| = r`: 64-angle scan then
    /// golden-section around the best nodes.
    pub fn circle_max(&self, r: f64, policy: &PrecisionPolicy) -> Result<(f64, f64)> {
        let n = 64;
        let h = TAU / n as f64;
        let vals: Vec<f64> = (0..n)
            .map(|j| self.ln_abs(Complex64::from_polar(r, h * j as f64), policy))
            .collect::<Result<_>>()?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut err = None;
        for &j in idx.iter().take(3) {
            let c = h * j as f64;
            let mut probe = |t: f64| match self.ln_abs(Complex64::from_polar(r, t), policy) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            };
            let (x, v) = if vals[j].is_finite() {
                golden_max(&mut probe, c - h, c + h, 60)
            } else {
                (c, vals[j])
            };
            let (x, v) = if vals[j] >= v { (c, vals[j]) } else { (x, v) };
            if v > best.0 {
                best = (v, angle_0_2pi(x));
            }
        }
        match err {
            Some(e) => Err(e),
            None => Ok(best),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Bound {
    #[serde(rename = "TH1")]
    Th1 { alpha: f64 },
    #[serde(rename = "CORO1")]
    Coro1 { sigma: f64, eps: f64 },
    #[serde(rename = "CORO2")]
    Coro2 { sigma: f64, eps: f64, n: u32 },
}

impl Bound {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        match *self {
            Bound::Th1 { alpha } if !(alpha > 0.0) => bad("alpha must be positive"),
            Bound::Coro1 { sigma, eps } | Bound::Coro2 { sigma, eps, .. } if !(sigma >= 0.0 && eps > 0.0) => {
                bad("need sigma >= 0 and eps > 0")
            }
            Bound::Coro2 { n, .. } if n < 2 => bad("CORO2 needs n >= 2"),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Bound::Th1 { .. } => "TH1",
            Bound::Coro1 { .. } => "CORO1",
            Bound::Coro2 { .. } => "CORO2",
        }
    }
}

/// Iterated exponential `exp_m(x)` (`exp_0(x) = x`).
fn exp_iter(x: f64, m: u32) -> f64 {
    (0..m).fold(x, |v, _| v.exp())
}

/// Interpolates `T₀` at radius `r` from samples, linearly in `ln r`
/// (and in `ln T₀` where both neighbours are positive).
pub fn interpolate_t0(samples: &[NevanlinnaSample], r: f64) -> Option<f64> {
    let mut v: Vec<(f64, f64)> = samples.iter().map(|s| (s.r, s.t0)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lo = v.first()?.0;
    let hi = v.last()?.0;
    let slack = 1e-12 * r;
    if r < lo - slack || r > hi + slack {
        return None;
    }
    let i = v.partition_point(|p| p.0 < r).min(v.len() - 1);
    if (v[i].0 - r).abs() <= slack || i == 0 {
        return Some(v[i].1);
    }
    let (r0, t0) = v[i - 1];
    let (r1, t1) = v[i];
    let s = (r.ln() - r0.ln()) / (r1.ln() - r0.ln());
    Some(if t0 > 0.0 && t1 > 0.0 {
        (t0.ln() + s * (t1.ln() - t0.ln())).exp()
    } else {
        t0 + s * (t1 - t0)
    })
}

/// Log of the bound at radius `r`, without the constant `C`. `None` where
/// the expression is undefined (for TH1: `T₀(r/α) ≤ 1`).
pub fn bound_ln(bound: &Bound, k: usize, r: f64, samples: &[NevanlinnaSample]) -> Result<Option<f64>> {
    let kf = k as f64;
    let inv = (1.0 / r).ln();
    Ok(match *bound {
        Bound::Coro1 { sigma, eps } => Some(kf * (sigma + 1.0 + eps) * inv),
        Bound::Coro2 { sigma, eps, n } => {
            Some(exp_iter(((sigma + eps) * inv).exp(), n - 2))
        }
        Bound::Th1 { alpha } => {
            let t = interpolate_t0(samples, r / alpha).ok_or_else(|| {
                Error::InvalidArgument(format!("samples do not cover radius {}", r / alpha))
            })?;
            if !(t > 1.0) || !(inv > 0.0) {
                None
            } else {
                Some(kf * (inv + t.ln() + alpha * inv.ln() + t.ln().ln()))
            }
        }
    })
}

/// Schedule with the same ratio whose radii reach `r/α` for every `r` of
/// `schedule` (what TH1 needs for its `T₀(r/α)` samples).
pub fn covering_schedule(schedule: &RadiusSchedule, alpha: f64) -> RadiusSchedule {
    let q = (1.0 / schedule.ratio).ln();
    let r_max = if alpha < 1.0 { schedule.r_max / alpha } else { schedule.r_max };
    let r_min = schedule.r_min() / alpha.max(1.0);
    let count = ((r_max / r_min).ln() / q).ceil() as usize + 2;
    RadiusSchedule {
        r_max,
        ratio: schedule.ratio,
        count,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub r: f64,
    pub logderiv_max_ln: f64,
    pub bound_ln: Option<f64>,
    pub violation: bool,
    /// Row used to calibrate `C` (TH1 only).
    pub calibration: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExceptionalSetReport {
    pub bound: Bound,
    pub k: usize,
    pub fitted_c: Option<f64>,
    pub violating_radii: Vec<f64>,
    pub log_measure: f64,
    pub total_log_measure: f64,
    pub rows: Vec<BoundRow>,
}

fn log_weights(radii: &[f64], ratio: f64) -> Vec<f64> {
    radii
        .iter()
        .enumerate()
        .map(|(j, &r)| if j == 0 { (1.0 / ratio).ln() } else { (radii[j - 1] / r).ln() })
        .collect()
}

/// Sweeps the schedule, comparing the maximum of `|f^{(k)}/f|` on each circle
/// (or its value on the ray `φ`) with the bound.
#[allow(clippy::too_many_arguments)]
pub fn bound_sweep(
    f: &FnExpr,
    k: usize,
    bound: &Bound,
    phi: Option<f64>,
    schedule: &RadiusSchedule,
    samples: &[NevanlinnaSample],
    policy: &PrecisionPolicy,
) -> Result<ExceptionalSetReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    bound.validate()?;
    schedule.validate()?;
    let ld = LogDeriv::new(f, k);
    let radii = schedule.radii();
    let observed: Vec<f64> = radii
        .par_iter()
        .map(|&r| match phi {
            Some(t) => ld.ln_abs(Complex64::from_polar(r, t), policy),
            None => ld.circle_max(r, policy).map(|m| m.0),
        })
        .collect::<Result<_>>()?;
    let bounds: Vec<Option<f64>> = radii
        .iter()
        .map(|&r| bound_ln(bound, k, r, samples))
        .collect::<Result<_>>()?;
    finish_report(f, k, bound, schedule, &radii, observed, bounds)
}

fn finish_report(
    _f: &FnExpr,
    k: usize,
    bound: &Bound,
    schedule: &RadiusSchedule,
    radii: &[f64],
    observed: Vec<f64>,
    bounds: Vec<Option<f64>>,
) -> Result<ExceptionalSetReport> {
    let n = radii.len();
    let mut calibration = vec![false; n];
    let mut ln_c = 0.0;
    let mut fitted_c = None;
    if let Bound::Th1 { .. } = bound {
        let usable: Vec<usize> = (0..n).filter(|&j| bounds[j].is_some()).collect();
        let cal = usable.len().div_ceil(3);
        if cal == 0 {
            return Err(Error::InsufficientGrowth(
                "T0 never exceeds 1 on the schedule, TH1 bound undefined".into(),
            ));
        }
        ln_c = usable[..cal]
            .iter()
            .map(|&j| observed[j] - bounds[j].unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        for &j in &usable[..cal] {
            calibration[j] = true;
        }
        fitted_c = Some(ln_c.exp());
    }
    let weights = log_weights(radii, schedule.ratio);
    let mut rows = Vec::with_capacity(n);
    let mut violating = Vec::new();
    let mut measure = 0.0;
    for j in 0..n {
        let b = bounds[j].map(|b| b + ln_c);
        let violation = !calibration[j] && b.is_some_and(|b| observed[j] > b);
        if violation {
            violating.push(radii[j]);
            measure += weights[j];
        }
        rows.push(BoundRow {
            r: radii[j],
            logderiv_max_ln: observed[j],
            bound_ln: b,
            violation,
            calibration: calibration[j],
        });
    }
    Ok(ExceptionalSetReport {
        bound: *bound,
        k,
        fitted_c,
        violating_radii: violating,
        log_measure: measure,
        total_log_measure: weights.iter().sum(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleRow {
    pub phi: f64,
    /// Largest sampled radius below which the bound holds at every sample.
    pub r0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngularReport {
    pub bound: Bound,
    pub k: usize,
    pub r_floor: f64,
    pub fitted_c: Option<f64>,
    pub angles: Vec<AngleRow>,
    /// Angles with no `r₀ ≥ r_floor` (empirical exceptional directions).
    pub candidates: Vec<f64>,
    pub linear_measure: f64,
}

/// Per-ray version of [`bound_sweep`]. For TH1 the constant is calibrated
/// on the circle maxima first, as in the radial sweep.
#[allow(clippy::too_many_arguments)]
pub fn angular_sweep(
    f: &FnExpr,
    k: usize,
    bound: &Bound,
    n_angles: usize,
    r_floor: f64,
    schedule: &RadiusSchedule,
    samples: &[NevanlinnaSample],
    policy: &PrecisionPolicy,
) -> Result<AngularReport> {
    if n_angles < 16 {
        return Err(Error::InvalidArgument(format!("n_angles must be at least 16, got {n_angles}")));
    }
    bound.validate()?;
    schedule.validate()?;
    let fitted_c = match bound {
        Bound::Th1 { .. } => bound_sweep(f, k, bound, None, schedule, samples, policy)?.fitted_c,
        _ => None,
    };
    let ln_c = fitted_c.map_or(0.0, f64::ln);
    let ld = LogDeriv::new(f, k);
    let radii = schedule.radii();
    let bounds: Vec<Option<f64>> = radii
        .iter()
        .map(|&r| bound_ln(bound, k, r, samples))
        .collect::<Result<_>>()?;
    let angles: Vec<AngleRow> = (0..n_angles)
        .into_par_iter()
        .map(|i| -> Result<AngleRow> {
            let phi = TAU * i as f64 / n_angles as f64;
            let mut r0 = None;
            for j in (0..radii.len()).rev() {
                let v = ld.ln_abs(Complex64::from_polar(radii[j], phi), policy)?;
                let holds = bounds[j].is_none_or(|b| v <= b + ln_c);
                if !holds {
                    break;
                }
                r0 = Some(radii[j]);
            }
            Ok(AngleRow { phi, r0 })
        })
        .collect::<Result<_>>()?;
    let candidates: Vec<f64> = angles
        .iter()
        .filter(|a| a.r0.is_none_or(|r| r < r_floor))
        .map(|a| a.phi)
        .collect();
    let linear_measure = TAU / n_angles as f64 * candidates.len() as f64;
    Ok(AngularReport {
        bound: *bound,
        k,
        r_floor,
        fitted_c,
        angles,
        candidates,
        linear_measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcexpr::parse_fn;

    fn p(s: &str) -> FnExpr {
        parse_fn(s).unwrap()
    }

    #[test]
    fn ratio_examples() {
        let pol = PrecisionPolicy::default();
        for r in [0.5, 0.1, 0.01] {
            let v = logderiv_ratio(&p("exp(z^-1)"), 1, Complex64::new(r, 0.0), &pol).unwrap();
            assert!((v.logmag - (1.0 / (r * r)).ln()).abs() < 1e-12);
            let v = logderiv_ratio(&p("z"), 1, Complex64::new(r, 0.0), &pol).unwrap();
            assert!((v.logmag - (1.0 / r).ln()).abs() < 1e-14);
        }
        let v = logderiv_ratio(&p("exp(z^-1)"), 2, Complex64::new(0.1, 0.0), &pol).unwrap();
        assert!((v.abs() - 12000.0).abs() < 1e-8);
    }

    #[test]
    fn zero_of_f() {
        let e = logderiv_ratio(&p("z - 0.5"), 1, Complex64::new(0.5, 0.0), &PrecisionPolicy::default());
        assert!(matches!(e, Err(Error::ZeroDenominator { .. })));
    }

    #[test]
    fn coro1_exp_recip_has_no_violations() {
        let b = Bound::Coro1 { sigma: 1.0, eps: 0.5 };
        let rep = bound_sweep(
            &p("exp(z^-1)"),
            1,
            &b,
            None,
            &RadiusSchedule::default(),
            &[],
            &PrecisionPolicy::default(),
        )
        .unwrap();
        assert!(rep.violating_radii.is_empty());
        assert_eq!(rep.log_measure, 0.0);
        assert!((rep.total_log_measure - 60.0 * (1.0f64 / 0.9).ln()).abs() < 1e-12);
    }

    #[test]
    fn circle_max_finds_off_node_peak() {
        // |f'/f| = |z|^-2 |1 + 0.2 z e^{-0.3i}|-type profile, max off the 64 nodes
        let ld = LogDeriv::new(&p("exp(z^-1)*exp((0.7+0.2*i)*z)"), 1);
        let r = 0.3;
        let (v, _) = ld.circle_max(r, &PrecisionPolicy::default()).unwrap();
        let brute = (0..200_000)
            .map(|j| {
                let z = Complex64::from_polar(r, TAU * j as f64 / 200_000.0);
                (-1.0 / (z * z) + Complex64::new(0.7, 0.2)).norm().ln()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((v - brute).abs() < 1e-9, "{v} vs {brute}");
    }

    #[test]
    fn interpolation_is_log_log() {
        let mk = |r: f64| NevanlinnaSample {
            r,
            r_outer: 0.9,
            m0: 0.0,
            n0: 0.0,
            t0: r.powi(-2),
            log_m0: 0.0,
        };
        let s: Vec<_> = RadiusSchedule::default().radii().into_iter().map(mk).collect();
        let t = interpolate_t0(&s, 0.0123).unwrap();
        assert!((t - 0.0123f64.powi(-2)).abs() < 1e-9 * t);
        assert!(interpolate_t0(&s, 0.9).is_none());
    }

    #[test]
    fn angular_examples() {
        let pol = PrecisionPolicy::default();
        let sched = RadiusSchedule::default();
        let b = Bound::Coro1 { sigma: 1.0, eps: 0.5 };
        let rep = angular_sweep(&p("exp(z^-1)"), 1, &b, 64, 0.05, &sched, &[], &pol).unwrap();
        assert!(rep.candidates.is_empty());
        let rep = angular_sweep(&p("exp(z^-1)/(z-0.3)"), 1, &b, 64, 0.05, &sched, &[], &pol).unwrap();
        assert!(rep.candidates.is_empty());
        let b = Bound::Coro1 { sigma: 0.0, eps: 0.5 };
        let rep = angular_sweep(&p("z^-3"), 1, &b, 64, 0.05, &sched, &[], &pol).unwrap();
        assert!(rep.candidates.is_empty());
        assert_eq!(rep.linear_measure, 0.0);
    }
}
