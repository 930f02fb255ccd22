//! Proximity, counting and characteristic functions on circles `|z| = r`
//! around the singular point, plus the maximum modulus.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcexpr::{eval_log, FnExpr};
use crate::numerics::{normalize, Neumaier, PrecisionPolicy};
use crate::util::{angle_0_2pi, brent, golden_max, romberg};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NevanlinnaSample {
    pub r: f64,
    #[serde(rename = "R_outer")]
    pub r_outer: f64,
    pub m0: f64,
    #[serde(rename = "N0")]
    pub n0: f64,
    #[serde(rename = "T0")]
    pub t0: f64,
    #[serde(rename = "logM0")]
    pub log_m0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleGrid {
    pub n_nodes: usize,
    pub refine_depth: u32,
}

impl Default for CircleGrid {
    fn default() -> Self {
        CircleGrid {
            n_nodes: 4096,
            refine_depth: 6,
        }
    }
}

impl CircleGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 64 || !self.n_nodes.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "n_nodes must be a power of two >= 64, got {}",
                self.n_nodes
            )));
        }
        Ok(())
    }

    fn nodes(&self) -> impl IndexedParallelIterator<Item = f64> + '_ {
        let n = self.n_nodes;
        (0..n).into_par_iter().map(move |j| TAU * j as f64 / n as f64)
    }
}

/// Location of the maximum modulus on a circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaxModulus {
    pub log_m: f64,
    /// Angle of the maximizing point in `[0, 2π)`.
    pub phi: f64,
}

/// Wraps a fallible scalar function for use in routines that want `f64`.
/// The first error is kept and later reported.
struct Probe<'a> {
    f: &'a FnExpr,
    r: f64,
    policy: &'a PrecisionPolicy,
    err: Option<Error>,
}

impl Probe<'_> {
    fn at(&mut self, phi: f64) -> f64 {
        match logmag_on_circle(self.f, self.r, phi, self.policy) {
            Ok(v) => v,
            Err(e) => {
                self.err.get_or_insert(e);
                f64::NAN
            }
        }
    }

    fn finish<T>(self, v: T) -> Result<T> {
        match self.err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

pub(crate) fn logmag_on_circle(f: &FnExpr, r: f64, phi: f64, policy: &PrecisionPolicy) -> Result<f64> {
    Ok(eval_log(f, Complex64::from_polar(r, phi), policy)?.logmag)
}

fn check_radius(f: &FnExpr, r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if let Ok(poles) = f.poles() {
        for &(p, _) in poles {
            if (p.norm() - r).abs() <= 1e-12 * r {
                return Err(Error::PoleOnCircle { r, pole: p });
            }
        }
    }
    Ok(())
}

fn grid_values(f: &FnExpr, r: f64, grid: &CircleGrid, policy: &PrecisionPolicy) -> Result<Vec<f64>> {
    grid.nodes()
        .map(|phi| logmag_on_circle(f, r, phi, policy))
        .collect()
}

/// `m₀(r, f)`: mean of `ln⁺|f|` over the circle.
pub fn proximity_m0(f: &FnExpr, r: f64, grid: &CircleGrid, policy: &PrecisionPolicy) -> Result<f64> {
    grid.validate()?;
    check_radius(f, r)?;
    let vals = grid_values(f, r, grid, policy)?;
    m0_from_grid(f, r, &vals, grid, policy)
}

fn m0_from_grid(
    f: &FnExpr,
    r: f64,
    vals: &[f64],
    grid: &CircleGrid,
    policy: &PrecisionPolicy,
) -> Result<f64> {
    let n = vals.len();
    let h = TAU / n as f64;
    let pos = |v: f64| v > 0.0;
    let trap: f64 = vals.iter().map(|v| v.max(0.0)).collect::<Neumaier>().value() / n as f64;
    let tol = policy.target_rel_err * (1.0 + trap);

    let mut probe = Probe {
        f,
        r,
        policy,
        err: None,
    };

    let changes: Vec<usize> = (0..n).filter(|&j| pos(vals[j]) != pos(vals[(j + 1) % n])).collect();
    if changes.is_empty() {
        if !pos(vals[0]) {
            return Ok(0.0);
        }
        // smooth periodic integrand: trapezoid converges geometrically
        let mut sum: Neumaier = vals.iter().copied().collect();
        let mut count = n;
        let mut prev = trap;
        for _ in 0..grid.refine_depth.max(1) {
            let step = TAU / count as f64;
            for j in 0..count {
                sum.add(probe.at(step * (j as f64 + 0.5)));
            }
            count *= 2;
            let est = sum.value() / count as f64;
            if (est - prev).abs() <= tol.max(64.0 * f64::EPSILON * est.abs()) {
                return probe.finish(est);
            }
            prev = est;
        }
        probe.finish(())?;
        return Err(Error::NonConvergent(format!("m0 on |z| = {r}")));
    }

    let mut crossings = Vec::with_capacity(changes.len());
    for &j in &changes {
        let a = h * j as f64;
        let b = h * (j + 1) as f64;
        let fa = vals[j];
        let fb = vals[(j + 1) % n];
        crossings.push(brent(|t| probe.at(t), a, b, fa, fb, 1e-15));
    }
    probe.err.take().map_or(Ok(()), Err)?;

    let mut total = Neumaier::default();
    let k = crossings.len();
    for i in 0..k {
        let a = crossings[i];
        let mut b = crossings[(i + 1) % k];
        if b <= a {
            b += TAU;
        }
        // the node just after the crossing tells which side we are on
        let first = (changes[i] + 1) % n;
        if !pos(vals[first]) {
            continue;
        }
        let len = b - a;
        let panels = ((len / h).ceil() as usize).max(4);
        let piece_tol = tol * len;
        let (v, ok) = romberg(|t| probe.at(t).max(0.0), a, b, panels, grid.refine_depth, piece_tol);
        if let Some(e) = probe.err.take() {
            return Err(e);
        }
        if !ok {
            // accept when the remaining disagreement is pure roundoff
            let (v2, _) = romberg(|t| probe.at(t).max(0.0), a, b, 2 * panels, grid.refine_depth, piece_tol);
            if (v2 - v).abs() > piece_tol.max(256.0 * f64::EPSILON * v.abs()) {
                return Err(Error::NonConvergent(format!("m0 on |z| = {r}")));
            }
        }
        total.add(v);
    }
    probe.finish(total.value() / TAU)
}

/// `N₀(r, R′, f) = Σ m·ln(|p|/r)` over registered poles with `r ≤ |p| ≤ R′`.
pub fn counting_n0(f: &FnExpr, r: f64, r_outer: f64) -> Result<f64> {
    let poles = f.poles()?;
    Ok(poles
        .iter()
        .filter(|(p, _)| p.norm() >= r && p.norm() <= r_outer)
        .map(|(p, m)| *m as f64 * (p.norm() / r).ln())
        .collect::<Neumaier>()
        .value())
}

/// `ln M₀(r, f)` with the maximizing angle.
pub fn max_modulus(f: &FnExpr, r: f64, grid: &CircleGrid, policy: &PrecisionPolicy) -> Result<MaxModulus> {
    grid.validate()?;
    check_radius(f, r)?;
    let vals = grid_values(f, r, grid, policy)?;
    max_from_grid(f, r, &vals, policy)
}

fn max_from_grid(f: &FnExpr, r: f64, vals: &[f64], policy: &PrecisionPolicy) -> Result<MaxModulus> {
    let n = vals.len();
    let h = TAU / n as f64;
    let mut cands: Vec<usize> = (0..n)
        .filter(|&j| vals[j] >= vals[(j + n - 1) % n] && vals[j] >= vals[(j + 1) % n])
        .collect();
    if cands.is_empty() {
        cands = (0..n).collect();
    }
    cands.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let top = vals[cands[0]];
    // keep every local maximum that could still win after refinement
    let spread = 1e-6 * (1.0 + top.abs());
    cands.retain(|&j| vals[j] >= top - spread);
    cands.truncate(16);

    let mut probe = Probe {
        f,
        r,
        policy,
        err: None,
    };
    let mut best: Option<MaxModulus> = None;
    for &j in &cands {
        let c = h * j as f64;
        let (x, v) = golden_max(|t| probe.at(t), c - h, c + h, 60);
        let (x, v) = if vals[j] >= v { (c, vals[j]) } else { (x, v) };
        let phi = angle_0_2pi(x);
        let better = match &best {
            None => true,
            Some(b) => {
                let tie = 1e-12 * (1.0 + v.abs());
                v > b.log_m + tie || ((v - b.log_m).abs() <= tie && phi < b.phi)
            }
        };
        if better {
            best = Some(MaxModulus { log_m: v, phi });
        }
    }
    probe.finish(best.expect("at least one candidate"))
}

/// `(m₀, N₀, T₀, ln M₀)` at radius `r` with outer radius `R′`.
pub fn nevanlinna_sample(
    f: &FnExpr,
    r: f64,
    r_outer: f64,
    grid: &CircleGrid,
    policy: &PrecisionPolicy,
) -> Result<NevanlinnaSample> {
    grid.validate()?;
    policy.validate()?;
    if !(r > 0.0 && r < r_outer && r_outer < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < r < R_outer < 1, got r = {r}, R_outer = {r_outer}"
        )));
    }
    check_radius(f, r)?;
    let n0 = counting_n0(f, r, r_outer)?;
    let vals = grid_values(f, r, grid, policy)?;
    let m0 = m0_from_grid(f, r, &vals, grid, policy)?;
    let mm = max_from_grid(f, r, &vals, policy)?;
    Ok(NevanlinnaSample {
        r,
        r_outer,
        m0,
        n0,
        t0: m0 + n0,
        log_m0: mm.log_m,
    })
}

fn winding(f: &FnExpr, rho: f64, grid: &CircleGrid) -> Result<f64> {
    let n = grid.n_nodes;
    let phase = |phi: f64| -> Result<f64> { Ok(f.eval_log(Complex64::from_polar(rho, phi))?.phase) };
    let ph: Vec<f64> = grid.nodes().map(phase).collect::<Result<_>>()?;
    let h = TAU / n as f64;
    let mut total = Neumaier::default();
    for j in 0..n {
        let a = h * j as f64;
        let step = refine_step(&phase, a, ph[j], a + h, ph[(j + 1) % n], grid.refine_depth, rho)?;
        total.add(step);
    }
    Ok(total.value() / TAU)
}

fn refine_step(
    phase: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    pa: f64,
    b: f64,
    pb: f64,
    depth: u32,
    rho: f64,
) -> Result<f64> {
    let d = normalize(pb - pa);
    if d.abs() <= FRAC_PI_2 {
        return Ok(d);
    }
    if depth == 0 {
        return Err(Error::PhaseJumpTooLarge {
            r: rho,
            phi: a,
            jump: d.abs(),
        });
    }
    let m = 0.5 * (a + b);
    let pm = phase(m)?;
    Ok(refine_step(phase, a, pa, m, pm, depth - 1, rho)? + refine_step(phase, m, pm, b, pb, depth - 1, rho)?)
}

/// Zeros minus poles in `r < |z| < R′`, from the phase winding on both
/// boundary circles.
pub fn argument_principle_count(f: &FnExpr, r: f64, r_outer: f64, grid: &CircleGrid) -> Result<i64> {
    grid.validate()?;
    if !(r > 0.0 && r < r_outer) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < r < R_outer, got r = {r}, R_outer = {r_outer}"
        )));
    }
    check_radius(f, r)?;
    check_radius(f, r_outer)?;
    let outer = winding(f, r_outer, grid)?;
    let inner = winding(f, r, grid)?;
    Ok((outer - inner).round() as i64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftReport {
    pub r: Vec<f64>,
    /// `T₀(r, R₂) − T₀(r, R₁)` for each radius.
    pub differences: Vec<f64>,
    pub median: f64,
    pub deviation: f64,
}

/// Checks that changing the outer radius shifts `T₀` by a constant.
pub fn rprime_shift_check(
    f: &FnExpr,
    r_list: &[f64],
    r1: f64,
    r2: f64,
    grid: &CircleGrid,
    policy: &PrecisionPolicy,
) -> Result<ShiftReport> {
    if r_list.is_empty() || !(r1 < r2 && r2 < 1.0) || r_list.iter().any(|&r| !(r > 0.0 && r < r1)) {
        return Err(Error::InvalidArgument(
            "need 0 < r < R1 < R2 < 1 for every radius".into(),
        ));
    }
    for &(p, _) in f.poles()? {
        if p.norm() > r1 && p.norm() <= r2 {
            return Err(Error::PoleBetweenOuterRadii { r1, r2, pole: p });
        }
    }
    let differences: Vec<f64> = r_list
        .par_iter()
        .map(|&r| -> Result<f64> {
            let m0 = proximity_m0(f, r, grid, policy)?;
            let t2 = m0 + counting_n0(f, r, r2)?;
            let t1 = m0 + counting_n0(f, r, r1)?;
            Ok(t2 - t1)
        })
        .collect::<Result<_>>()?;
    let mut sorted = differences.clone();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    };
    let deviation = differences.iter().map(|d| (d - median).abs()).fold(0.0, f64::max);
    Ok(ShiftReport {
        r: r_list.to_vec(),
        differences,
        median,
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcexpr::parse_fn;
    use std::f64::consts::PI;

    fn p(s: &str) -> FnExpr {
        parse_fn(s).unwrap()
    }

    fn sample(s: &str, r: f64, ro: f64) -> NevanlinnaSample {
        nevanlinna_sample(&p(s), r, ro, &CircleGrid::default(), &PrecisionPolicy::default()).unwrap()
    }

    #[test]
    fn symmetric_example() {
        let s = sample("exp(z^2 + z^-2)", 0.5, 0.9);
        assert!((s.m0 - 4.25 / PI).abs() < 1e-10, "{}", s.m0);
        assert_eq!(s.n0, 0.0);
        assert_eq!(s.t0, s.m0 + s.n0);
        assert!((s.log_m0 - 4.25).abs() < 1e-12);
    }

    #[test]
    fn constant_one() {
        let s = sample("1", 0.3, 0.9);
        assert_eq!((s.m0, s.n0, s.t0), (0.0, 0.0, 0.0));
        assert!(s.log_m0.abs() < 1e-15);
    }

    #[test]
    fn single_pole_counting() {
        let s = sample("1/(z - 0.5)", 0.1, 0.9);
        assert!((s.n0 - 5f64.ln()).abs() < 1e-14);
        // numeric oracle: ∫_r^R n(t)/t dt with n(t) = #poles in t ≤ |p| ≤ R
        let (r, big_r) = (0.1f64, 0.9f64);
        let steps = 200_000;
        let h = (big_r.ln() - r.ln()) / steps as f64;
        let mut acc = 0.0;
        for j in 0..steps {
            let t = (r.ln() + h * (j as f64 + 0.5)).exp();
            let n = if t <= 0.5 { 1.0 } else { 0.0 };
            acc += n * h;
        }
        assert!((acc - s.n0).abs() < 1e-5);
    }

    #[test]
    fn inversion_identity_for_exp_recip() {
        for r in [0.5, 0.2, 0.1] {
            let s = sample("exp(z^-1)", r, 0.9);
            let want = 1.0 / (PI * r);
            assert!((s.t0 - want).abs() <= 1e-6 * want, "r={r}: {} vs {want}", s.t0);
        }
    }

    #[test]
    fn max_modulus_tie_breaks_to_smallest_angle() {
        // |exp(z^-2)| peaks at φ = 0 and φ = π
        let m = max_modulus(&p("exp(z^-2)"), 0.5, &CircleGrid::default(), &PrecisionPolicy::default()).unwrap();
        assert!((m.log_m - 4.0).abs() < 1e-12);
        assert!(m.phi.abs() < 1e-6 || (TAU - m.phi).abs() < 1e-6);
        assert!(m.phi < 1.0);
    }

    #[test]
    fn off_grid_maximum() {
        // maximum of Re(e^{-iθ}/z) sits at φ = -θ, not on a node
        let theta: f64 = 0.123456789;
        let f = p(&format!("exp(({}-{}*i)/z)", theta.cos(), theta.sin()));
        let m = max_modulus(&f, 0.25, &CircleGrid::default(), &PrecisionPolicy::default()).unwrap();
        assert!((m.log_m - 4.0).abs() < 1e-12);
        assert!((m.phi - (TAU - theta)).abs() < 1e-6);
    }

    #[test]
    fn argument_principle() {
        let g = CircleGrid::default();
        assert_eq!(argument_principle_count(&p("(z-0.5)/(z-0.2)"), 0.1, 0.9, &g).unwrap(), 0);
        assert_eq!(argument_principle_count(&p("1/((z-0.5)*(z-0.2)^2)"), 0.1, 0.9, &g).unwrap(), -3);
        assert_eq!(argument_principle_count(&p("exp(z^-1)"), 0.05, 0.9, &g).unwrap(), 0);
    }

    #[test]
    fn phase_jump_reported() {
        let g = CircleGrid {
            n_nodes: 64,
            refine_depth: 0,
        };
        let e = argument_principle_count(&p("exp(z^-1)"), 0.01, 0.9, &g).unwrap_err();
        assert!(matches!(e, Error::PhaseJumpTooLarge { .. }));
    }

    #[test]
    fn pole_on_circle() {
        let e = nevanlinna_sample(&p("1/(z-0.3)"), 0.3, 0.9, &CircleGrid::default(), &PrecisionPolicy::default())
            .unwrap_err();
        assert!(matches!(e, Error::PoleOnCircle { .. }));
    }

    #[test]
    fn rprime_shift() {
        let g = CircleGrid::default();
        let pol = PrecisionPolicy::default();
        let rep = rprime_shift_check(&p("1/(z-0.5)"), &[0.1, 0.2, 0.3], 0.6, 0.9, &g, &pol).unwrap();
        assert!(rep.deviation <= 1e-8);
        let rep = rprime_shift_check(&p("exp(z^-1)"), &[0.1, 0.2], 0.6, 0.9, &g, &pol).unwrap();
        assert_eq!(rep.deviation, 0.0);
        assert!(matches!(
            rprime_shift_check(&p("1/(z-0.7)"), &[0.1], 0.6, 0.9, &g, &pol),
            Err(Error::PoleBetweenOuterRadii { .. })
        ));
    }

    #[test]
    fn n0_non_increasing() {
        let f = p("1/((z-0.5)*(z-0.2)^2*(z+0.35*i))");
        let mut last = f64::INFINITY;
        for j in 0..40 {
            let r = 0.05 + 0.02 * j as f64;
            let v = counting_n0(&f, r, 0.9).unwrap();
            assert!(v <= last);
            last = v;
        }
    }
}
