//! Equations with prescribed solutions, successive order reduction and the
//! bound `V₀(r) ≤ C rᵏ M₀(r)` for a known solution.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use super::ODEProblem;
use crate::error::{Error, Result};
use crate::funcexpr::FnExpr;
use crate::growth::RadiusSchedule;
use crate::nevanlinna::{max_modulus, CircleGrid};
use crate::numerics::{lc_sum, LogComplex, PrecisionPolicy};
use crate::wiman::{central_index, laurent_coeffs};

fn points(r: f64, n: usize) -> impl Iterator<Item = Complex64> {
    (0..n).map(move |j| Complex64::from_polar(r, 0.1 + TAU * j as f64 / n as f64))
}

fn ln_add(v: &[f64]) -> f64 {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + v.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

fn ln_sum_abs(terms: &[LogComplex]) -> f64 {
    ln_add(&terms.iter().map(|t| t.logmag).collect::<Vec<_>>())
}

/// `|Σ t| / scale` with `ln scale` given; zero when the sum vanishes.
fn relative(terms: &[LogComplex], ln_scale: f64) -> f64 {
    let s = lc_sum(terms.iter().copied());
    if s.is_zero() || ln_scale == f64::NEG_INFINITY {
        0.0
    } else {
        (s.logmag - ln_scale).exp()
    }
}

fn det(m: &[Vec<FnExpr>]) -> FnExpr {
    match m.len() {
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        n => {
            let mut acc: Option<FnExpr> = None;
            for col in 0..n {
                let minor: Vec<Vec<FnExpr>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, x)| x.clone()).collect())
                    .collect();
                let term = m[0][col].mul(&det(&minor));
                acc = Some(match acc {
                    None => term,
                    Some(a) if col % 2 == 1 => a.sub(&term),
                    Some(a) => a.add(&term),
                });
            }
            acc.unwrap()
        }
    }
}

/// Rows `f_j^{(i)}` for `i = 0..=k`.
fn derivative_rows(solutions: &[FnExpr], k: usize) -> Vec<Vec<FnExpr>> {
    (0..=k)
        .map(|i| solutions.iter().map(|f| f.derivative(i)).collect())
        .collect()
}

/// Fails when the Wronskian is negligible against the Hadamard bound at
/// all five probe points on `|z| = 0.3`.
fn check_wronskian(rows: &[Vec<FnExpr>], w: &FnExpr) -> Result<()> {
    let k = rows.len() - 1;
    for z in points(0.3, 5) {
        let Ok(wz) = w.eval_raw(z) else { continue };
        let mut bound = 0.0;
        let mut ok = true;
        for row in &rows[..k] {
            let vals: Option<Vec<LogComplex>> = row.iter().map(|f| f.eval_raw(z).ok()).collect();
            let Some(vals) = vals else {
                ok = false;
                break;
            };
            bound += 0.5 * ln_sum_abs(&vals.iter().map(|v| v.powi(2)).collect::<Vec<_>>());
        }
        if ok && !wz.is_zero() && wz.logmag - bound > (1e-10f64).ln() {
            return Ok(());
        }
    }
    Err(Error::DegenerateWronskian)
}

/// Largest relative residual of `y^(m) + Σ a_j y^(j)` over `pts` for each
/// solution in `sols`; `coeffs` are `a_0..a_{m-1}`. The residual is scaled
/// by the term-wise magnitudes of all factors, so coefficients that vanish
/// identically but evaluate to rounding noise do not inflate it. Points
/// where an evaluation fails are skipped.
fn residual_max(coeffs: &[FnExpr], sols: &[FnExpr], pts: &[Complex64]) -> Result<f64> {
    let m = coeffs.len();
    let mut worst = 0.0f64;
    let mut used = 0usize;
    for y in sols {
        let ds: Vec<FnExpr> = (0..=m).map(|i| y.derivative(i)).collect();
        for &z in pts {
            let vals: Result<Vec<_>> = ds.iter().map(|d| d.eval_with_scale(z)).collect();
            let avals: Result<Vec<_>> = coeffs.iter().map(|a| a.eval_with_scale(z)).collect();
            let (Ok(vals), Ok(avals)) = (vals, avals) else { continue };
            let mut terms = vec![vals[m].0];
            let mut scales = vec![vals[m].1];
            for (a, v) in avals.iter().zip(&vals) {
                terms.push(a.0 * v.0);
                scales.push(a.1 + v.1);
            }
            worst = worst.max(relative(&terms, ln_add(&scales)));
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::NonConvergent("no sample point admits a residual evaluation".into()));
    }
    Ok(worst)
}

/// Relative residual of `p` at the 20 probe points on `|z| = 0.3`.
pub fn equation_residual(p: &ODEProblem, f: &FnExpr) -> Result<f64> {
    let pts: Vec<Complex64> = points(0.3, 20).collect();
    residual_max(&p.coeffs, std::slice::from_ref(f), &pts)
}

/// Coefficients `A_j = (−1)^{k−j} det(D_j)/W` of the monic equation whose
/// solution space is spanned by `solutions`, where `D_j` is the matrix of
/// derivatives of orders `0..=k` without row `j`.
pub fn construct_equation(solutions: &[FnExpr]) -> Result<ODEProblem> {
    let k = solutions.len();
    if !(2..=3).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    let rows = derivative_rows(solutions, k);
    let w = det(&rows[..k]);
    check_wronskian(&rows, &w)?;
    let coeffs: Vec<FnExpr> = (0..k)
        .map(|j| {
            let minor: Vec<Vec<FnExpr>> = rows
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, r)| r.clone())
                .collect();
            let a = det(&minor).div(&w);
            if (k - j) % 2 == 1 {
                a.neg()
            } else {
                a
            }
        })
        .collect();
    let label = solutions.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(", ");
    ODEProblem::new(coeffs, format!("span{{{label}}}"))
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionStep {
    pub q: usize,
    /// `A_{q,0} … A_{q,k−q−1}`; the leading coefficient is 1.
    pub reduced_coeffs: Vec<FnExpr>,
    pub residual: f64,
}

fn binom(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Levels `0..=q` of the reduction: solutions `f_{m,j}` and coefficients
/// `A_{m,0..=k−m}` with `A_{m,k−m} = 1`.
struct Tower {
    f: Vec<Vec<FnExpr>>,
    a: Vec<Vec<FnExpr>>,
}

#[allow(clippy::needless_range_loop)]
fn tower(p: &ODEProblem, solutions: &[FnExpr], q: usize) -> Result<Tower> {
    let k = p.k;
    if k > 3 {
        return Err(Error::UnsupportedOrder(k));
    }
    if solutions.len() != k {
        return Err(Error::InvalidArgument(format!(
            "order {k} needs {k} solutions, got {}",
            solutions.len()
        )));
    }
    if q + 1 > solutions.len() {
        return Err(Error::InvalidArgument(format!(
            "q = {q} needs at least {} solutions",
            q + 1
        )));
    }
    let rows = derivative_rows(solutions, k);
    check_wronskian(&rows, &det(&rows[..k]))?;

    let one = FnExpr::constant(Complex64::new(1.0, 0.0));
    let mut a0 = p.coeffs.clone();
    a0.push(one.clone());
    let mut t = Tower {
        f: vec![solutions.to_vec()],
        a: vec![a0],
    };
    for m in 1..=q {
        let prev_f = &t.f[m - 1];
        let prev_a = &t.a[m - 1];
        let f1 = &prev_f[0];
        let fs: Vec<FnExpr> = prev_f[1..].iter().map(|g| g.div(f1).derivative(1)).collect();
        let mut a: Vec<FnExpr> = (0..k - m)
            .map(|j| {
                let mut acc: Option<FnExpr> = None;
                for i in j + 1..=k - m + 1 {
                    let term = prev_a[i]
                        .mul(&f1.derivative(i - j - 1))
                        .div(f1)
                        .scale(Complex64::new(binom(i, j + 1), 0.0));
                    acc = Some(match acc {
                        None => term,
                        Some(s) => s.add(&term),
                    });
                }
                acc.unwrap()
            })
            .collect();
        a.push(one.clone());
        t.f.push(fs);
        t.a.push(a);
    }
    Ok(t)
}

fn reduction_points() -> Vec<Complex64> {
    points(0.3, 20).chain(points(0.1, 20)).collect()
}

/// Reduces `p` by `q` orders using `f_{m,j} = (f_{m−1,j+1}/f_{m−1,1})′` and
/// reports the residual of the reduced equation on all `f_{q,j}`.
pub fn order_reduce(p: &ODEProblem, solutions: &[FnExpr], q: usize) -> Result<ReductionStep> {
    let t = tower(p, solutions, q)?;
    let coeffs = &t.a[q][..p.k - q];
    let residual = residual_max(coeffs, &t.f[q], &reduction_points())?;
    Ok(ReductionStep {
        q,
        reduced_coeffs: coeffs.to_vec(),
        residual,
    })
}

/// Largest relative deviation of `A_{q,0} = A_{0,q} + G_q` over the probe
/// points, with `G_q = Σ_{j=2}^{q+1} H_j` and
/// `H_j = Σ_{i=j}^{k−q+j−1} C(i, j−1) A_{q−j+1,i} f_{q−j+1,1}^{(i−j+1)}/f_{q−j+1,1}`.
pub fn gq_check(p: &ODEProblem, solutions: &[FnExpr], q: usize) -> Result<f64> {
    let t = tower(p, solutions, q)?;
    let k = p.k;
    let mut worst = 0.0f64;
    let mut used = 0usize;
    'pts: for z in reduction_points() {
        let Ok((lhs, s_lhs)) = t.a[q][0].eval_with_scale(z) else { continue };
        let Ok((a0q, s_a0q)) = t.a[0][q].eval_with_scale(z) else { continue };
        let mut terms = vec![lhs, -a0q];
        let mut scales = vec![s_lhs, s_a0q];
        for j in 2..=q + 1 {
            let m = q + 1 - j;
            let f1 = &t.f[m][0];
            let Ok((f1v, s_f1)) = f1.eval_with_scale(z) else { continue 'pts };
            for i in j..=k - q + j - 1 {
                let (Ok((ai, s_ai)), Ok((d, s_d))) =
                    (t.a[m][i].eval_with_scale(z), f1.derivative(i + 1 - j).eval_with_scale(z))
                else {
                    continue 'pts;
                };
                let c = binom(i, j - 1);
                terms.push(-(ai * d / f1v).scale(c));
                scales.push(c.ln() + s_ai + s_d + s_f1 - 2.0 * f1v.logmag);
            }
        }
        worst = worst.max(relative(&terms, ln_add(&scales)));
        used += 1;
    }
    if used == 0 {
        return Err(Error::NonConvergent("no sample point admits an evaluation".into()));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct V0Row {
    pub r: f64,
    pub v0: usize,
    /// `ln max_j max_{|z|=r} |A_j(z)|`.
    pub ln_m0: f64,
    /// `V₀(r) / (rᵏ M₀(r))`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct V0Report {
    pub rows: Vec<V0Row>,
    pub sup_ratio: f64,
    /// The ratio over the innermost third stays below its maximum over the
    /// outermost third.
    pub bounded: bool,
}

/// `V₀(r)/(rᵏ M₀(r))` along the schedule, with `V₀` the central index of
/// the principal part of `known_solution` (zero when it is analytic at 0).
pub fn v0_coeff_bound_check(
    p: &ODEProblem,
    known_solution: &FnExpr,
    schedule: &RadiusSchedule,
    truncation: usize,
    grid: &CircleGrid,
    policy: &PrecisionPolicy,
) -> Result<V0Report> {
    schedule.validate()?;
    let analytic = known_solution.is_entire();
    let data = if analytic {
        None
    } else {
        Some(laurent_coeffs(known_solution, truncation, None)?)
    };
    let mut rows = Vec::with_capacity(schedule.count);
    for r in schedule.radii() {
        let v0 = match &data {
            Some(d) => central_index(d, r)?,
            None => 0,
        };
        let mut ln_m0 = f64::NEG_INFINITY;
        for a in &p.coeffs {
            if let Some(c) = a.root().as_const() {
                if c.norm() > 0.0 {
                    ln_m0 = ln_m0.max(c.norm().ln());
                }
                continue;
            }
            ln_m0 = ln_m0.max(max_modulus(a, r, grid, policy)?.log_m);
        }
        let ratio = if v0 == 0 {
            0.0
        } else {
            ((v0 as f64).ln() - p.k as f64 * r.ln() - ln_m0).exp()
        };
        rows.push(V0Row { r, v0, ln_m0, ratio });
    }
    let sup_ratio = rows.iter().map(|x| x.ratio).fold(0.0, f64::max);
    let third = (rows.len() / 3).max(1);
    let head = rows[..third].iter().map(|x| x.ratio).fold(0.0, f64::max);
    let tail = rows[rows.len() - third..].iter().map(|x| x.ratio).fold(0.0, f64::max);
    Ok(V0Report {
        rows,
        sup_ratio,
        bounded: tail <= head * 1.05 + 1e-12,
    })
}
