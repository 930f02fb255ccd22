//! Projective integration of the companion system along a ray.
//!
//! The state `y = (f, f′, …, f^(k-1))` is rescaled to `Y_i = y_i / s^i` with
//! `ln s = max(0, max_j ln|A_j|/(k−j))` frozen per step, so that the
//! rescaled coefficients `A_j / s^(k−j)` have modulus at most about one.
//! Only the direction `v = Y / Y_c` (chart `c`) is integrated, together with
//! `ℓ = ln|Y_c|`; for `k = 2` the chart change `c: 0 ↔ 1` is exactly the
//! switch between `u` and `1/u`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ODEProblem;
use crate::error::{Error, Result};
use crate::funcexpr::FnExpr;
use crate::numerics::LogComplex;

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Controls {
    /// Relative tolerance of the embedded pair (also used as absolute).
    pub rtol: f64,
    /// Number of geometric output radii from `r_start` to `r_end`.
    pub samples: usize,
    pub max_steps: usize,
    /// A component of `v` above this modulus triggers a chart change.
    pub chart_threshold: f64,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            rtol: 1e-10,
            samples: 60,
            max_steps: 5_000_000,
            chart_threshold: 2.0,
        }
    }
}

impl Controls {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1e-2) {
            return Err(Error::InvalidArgument(format!("rtol must lie in (0, 1e-2), got {}", self.rtol)));
        }
        if self.samples < 2 {
            return Err(Error::InvalidArgument("need at least 2 output radii".into()));
        }
        if !(self.chart_threshold > 1.0) {
            return Err(Error::InvalidArgument("chart threshold must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    #[serde(rename = "OK")]
    Ok,
    #[serde(rename = "POLE_STORM")]
    PoleStorm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceSample {
    pub r: f64,
    pub log_abs_f: f64,
    /// `f′/f` at `r e^{iφ}`.
    pub u: LogComplex,
    /// `|u′|/|u|²`, small once `u` follows the slowly varying branch.
    pub drift: f64,
    /// Chart changes since the start of the ray.
    pub swaps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayGrowthTrace {
    pub phi: f64,
    pub samples: Vec<TraceSample>,
    pub chart_swaps: usize,
    pub status: TraceStatus,
    pub steps: usize,
    /// Sum of the accepted local error estimates of the chart variables.
    pub error_estimate: f64,
}

// Dormand-Prince 5(4)
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct System<'a> {
    coeffs: &'a [FnExpr],
    k: usize,
    dir: C,
}

impl System<'_> {
    /// `ln s` at radius `t`; `None` if a coefficient cannot be evaluated.
    fn log_scale(&self, t: f64) -> Option<f64> {
        let z = self.dir * t;
        let mut ls = 0.0f64;
        for (j, a) in self.coeffs.iter().enumerate() {
            let v = a.eval_raw(z).ok()?;
            if !v.is_zero() {
                ls = ls.max(v.logmag / (self.k - j) as f64);
            }
        }
        ls.is_finite().then_some(ls)
    }

    /// `w = M̃ v`: shift plus the rescaled coefficient row.
    fn apply(&self, t: f64, v: &[C], ls: f64) -> Option<Vec<C>> {
        let k = self.k;
        let z = self.dir * t;
        let mut w = Vec::with_capacity(k);
        w.extend_from_slice(&v[1..k]);
        let mut last = C::new(0.0, 0.0);
        for (j, a) in self.coeffs.iter().enumerate() {
            let lc = a.eval_raw(z).ok()?;
            if lc.is_zero() {
                continue;
            }
            let lm = lc.logmag - (k - j) as f64 * ls;
            if lm > 300.0 {
                return None;
            }
            last -= LogComplex::new(lm, lc.phase).to_complex() * v[j];
        }
        w.push(last);
        Some(w)
    }

    /// Derivative in `t` of `(v, ℓ)` for chart `c`.
    fn rhs(&self, t: f64, y: &[C], ls: f64, c: usize) -> Option<Vec<C>> {
        let k = self.k;
        let w = self.apply(t, &y[..k], ls)?;
        let g = self.dir * ls.exp();
        let wc = w[c];
        let mut out: Vec<C> = (0..k).map(|i| g * (w[i] - y[i] * wc)).collect();
        out[c] = C::new(0.0, 0.0);
        out.push(C::new((g * wc).re, 0.0));
        out.iter().all(|d| d.re.is_finite() && d.im.is_finite()).then_some(out)
    }
}

struct Stepper {
    v: Vec<C>,
    ell: f64,
    chart: usize,
    ls: f64,
}

impl Stepper {
    fn state(&self) -> Vec<C> {
        let mut y = self.v.clone();
        y.push(C::new(self.ell, 0.0));
        y
    }

    fn rescale(&mut self, ls_new: f64) {
        let d = self.ls - ls_new;
        if d != 0.0 {
            for (i, vi) in self.v.iter_mut().enumerate() {
                *vi *= ((i as f64 - self.chart as f64) * d).exp();
            }
            self.ell += self.chart as f64 * d;
            self.ls = ls_new;
        }
    }

    /// Moves to the chart of the largest component once it passes `thr`.
    fn recenter(&mut self, thr: f64) -> bool {
        let (j, m) = self
            .v
            .iter()
            .enumerate()
            .map(|(j, x)| (j, x.norm()))
            .fold((self.chart, 1.0), |a, b| if b.1 > a.1 { b } else { a });
        if j == self.chart || m <= thr {
            return false;
        }
        let p = self.v[j];
        for x in self.v.iter_mut() {
            *x /= p;
        }
        self.v[j] = C::new(1.0, 0.0);
        self.ell += m.ln();
        self.chart = j;
        true
    }
}

/// One Dormand-Prince step; `(y_new, error vector)`.
fn dopri(sys: &System, t: f64, h: f64, y: &[C], ls: f64, c: usize) -> Option<(Vec<C>, Vec<C>)> {
    let n = y.len();
    let cs = [0.0, C2, C3, C4, C5, 1.0];
    let mut ks: Vec<Vec<C>> = Vec::with_capacity(7);
    ks.push(sys.rhs(t, y, ls, c)?);
    for s in 1..7 {
        let mut yt = y.to_vec();
        for (i, yi) in yt.iter_mut().enumerate() {
            let mut acc = C::new(0.0, 0.0);
            for (j, kj) in ks.iter().enumerate() {
                acc += kj[i] * A[s - 1][j];
            }
            *yi += acc * h;
        }
        if s == 6 {
            // the seventh stage is evaluated at the 5th-order solution
            ks.push(sys.rhs(t + h, &yt, ls, c)?);
            let err: Vec<C> = (0..n)
                .map(|i| ks.iter().zip(E).map(|(kj, e)| kj[i] * e).sum::<C>() * h)
                .collect();
            return Some((yt, err));
        }
        ks.push(sys.rhs(t + cs[s] * h, &yt, ls, c)?);
    }
    unreachable!()
}

fn check_ray(p: &ODEProblem, phi: f64, r_end: f64, r_start: f64) -> Result<()> {
    for a in &p.coeffs {
        // coefficients whose poles cannot be located are not checked here;
        // a hit then shows up as a step failure
        let Ok(poles) = a.poles() else { continue };
        for &(q, _) in poles {
            let m = q.norm();
            if m >= r_end * (1.0 - 1e-12)
                && m <= r_start * (1.0 + 1e-12)
                && (q - C::from_polar(m, phi)).norm() <= 1e-9 * m
            {
                return Err(Error::PoleOnRay { pole: q });
            }
        }
    }
    Ok(())
}

/// Integrates from `r_start·e^{iφ}` inward to `r_end·e^{iφ}`. `u0` holds
/// `f′/f, f″/f, …, f^(k-1)/f` at the start; `f` is normalized to 1 there.
pub fn integrate_ray(
    p: &ODEProblem,
    phi: f64,
    r_start: f64,
    r_end: f64,
    u0: &[C],
    controls: &Controls,
) -> Result<RayGrowthTrace> {
    controls.validate()?;
    if !(0.0 < r_end && r_end < r_start && r_start < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < r_end < r_start < 1, got r_end={r_end}, r_start={r_start}"
        )));
    }
    let k = p.k;
    if p.coeffs.len() != k || u0.len() != k - 1 {
        return Err(Error::InvalidArgument(format!(
            "order {k} needs {k} coefficients and {} initial values",
            k - 1
        )));
    }
    if !phi.is_finite() {
        return Err(Error::InvalidArgument("ray angle must be finite".into()));
    }
    check_ray(p, phi, r_end, r_start)?;

    let sys = System {
        coeffs: &p.coeffs,
        k,
        dir: C::from_polar(1.0, phi),
    };
    let n_out = controls.samples;
    let q = (r_end / r_start).ln() / (n_out - 1) as f64;
    let outs: Vec<f64> = (0..n_out)
        .map(|j| if j + 1 == n_out { r_end } else { r_start * (q * j as f64).exp() })
        .collect();

    let ls0 = sys
        .log_scale(r_start)
        .ok_or_else(|| Error::InvalidArgument("coefficients cannot be evaluated at r_start".into()))?;
    let mut yv: Vec<C> = std::iter::once(C::new(1.0, 0.0)).chain(u0.iter().copied()).collect();
    for (i, y) in yv.iter_mut().enumerate() {
        *y *= (-(i as f64) * ls0).exp();
    }
    let (c0, m0) = yv
        .iter()
        .enumerate()
        .map(|(j, y)| (j, y.norm()))
        .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    if !(m0 > 0.0 && m0.is_finite()) {
        return Err(Error::InvalidArgument("initial data must be finite".into()));
    }
    let pivot = yv[c0];
    let mut st = Stepper {
        v: yv.iter().map(|y| y / pivot).collect(),
        ell: m0.ln(),
        chart: c0,
        ls: ls0,
    };

    let mut trace = RayGrowthTrace {
        phi,
        samples: Vec::with_capacity(n_out),
        chart_swaps: 0,
        status: TraceStatus::Ok,
        steps: 0,
        error_estimate: 0.0,
    };
    let record = |st: &Stepper, t: f64, swaps: usize| -> Option<TraceSample> {
        let w = sys.apply(t, &st.v, st.ls)?;
        let (v0, v1) = (st.v[0], st.v[1]);
        let drift = if v1.norm() > 0.0 {
            (w[1] * v0 - v1 * v1).norm() / v1.norm_sqr()
        } else {
            f64::INFINITY
        };
        let u = if v0.norm() > 0.0 {
            LogComplex::new(st.ls + (v1.norm() / v0.norm()).ln(), v1.arg() - v0.arg())
        } else {
            LogComplex::new(f64::INFINITY, v1.arg())
        };
        Some(TraceSample {
            r: t,
            log_abs_f: st.ell + v0.norm().ln(),
            u,
            drift,
            swaps,
        })
    };
    trace.samples.push(record(&st, r_start, 0).ok_or_else(|| {
        Error::InvalidArgument("coefficients cannot be evaluated at r_start".into())
    })?);

    let tol = controls.rtol;
    let mut t = r_start;
    let mut h = -(r_start * 1e-3).min(0.1 * (-ls0).exp());
    let mut next = 1;
    while next < n_out {
        if trace.steps >= controls.max_steps {
            trace.status = TraceStatus::PoleStorm;
            break;
        }
        let Some(ls) = sys.log_scale(t) else {
            trace.status = TraceStatus::PoleStorm;
            break;
        };
        st.rescale(ls);
        st.recenter(controls.chart_threshold);
        let target = outs[next];
        let hit = t + h <= target;
        let h_try = if hit { target - t } else { h };
        if h_try.abs() < t * 1e-13 {
            trace.status = TraceStatus::PoleStorm;
            break;
        }
        let y = st.state();
        let Some((yn, err)) = dopri(&sys, t, h_try, &y, st.ls, st.chart) else {
            h = h_try * 0.25;
            continue;
        };
        let mut en = 0.0f64;
        let mut eabs = 0.0f64;
        for i in 0..k {
            let sc = tol * (1.0 + y[i].norm().max(yn[i].norm()));
            en = en.max(err[i].norm() / sc);
            eabs = eabs.max(err[i].norm());
        }
        let dl = (yn[k].re - y[k].re).abs();
        en = en.max(err[k].norm() / (tol * (1.0 + dl)));
        if !en.is_finite() {
            h = h_try * 0.25;
            continue;
        }
        let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        if en <= 1.0 {
            trace.steps += 1;
            trace.error_estimate += eabs;
            st.v = yn[..k].to_vec();
            st.ell = yn[k].re;
            t = if hit { target } else { t + h_try };
            if st.recenter(controls.chart_threshold) {
                trace.chart_swaps += 1;
            }
            if hit {
                match record(&st, t, trace.chart_swaps) {
                    Some(s) => trace.samples.push(s),
                    None => {
                        trace.status = TraceStatus::PoleStorm;
                        break;
                    }
                }
                next += 1;
                // a step shortened to land on an output radius does not
                // shrink the step proposal
                h = if h_try.abs() < h.abs() { h } else { h_try * fac };
            } else {
                h = h_try * fac;
            }
        } else {
            h = h_try * fac;
        }
    }
    Ok(trace)
}
