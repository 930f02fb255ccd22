use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::eval::eval_node;
use super::poly::{roots, to_rational};
use super::{Divisor, FnExpr, Node};
use crate::error::{Error, Result};

type Cands = std::result::Result<Vec<Complex64>, String>;

/// Poles and zeros of an expression away from the origin.
#[derive(Clone, Debug)]
pub struct Registry {
    poles: std::result::Result<Vec<Divisor>, String>,
    zeros: Option<Vec<Divisor>>,
}

impl Registry {
    pub(crate) fn build(root: &Node) -> Registry {
        let pc = pole_cands(root);
        let zc = zero_cands(root);
        let pc = match pc {
            Ok(v) => v,
            Err(reason) => {
                return Registry {
                    poles: Err(reason),
                    zeros: None,
                }
            }
        };
        let mut all = pc.clone();
        if let Ok(z) = &zc {
            all.extend_from_slice(z);
        }
        let all = dedup(all);
        let mut poles = Vec::new();
        let mut zeros = Vec::new();
        for &p in &all {
            match local_order(root, p, &all) {
                Ok(k) if k < 0 => poles.push((p, k.unsigned_abs())),
                Ok(k) if k > 0 => zeros.push((p, k as u32)),
                Ok(_) => {}
                Err(e) => {
                    return Registry {
                        poles: Err(e),
                        zeros: None,
                    }
                }
            }
        }
        sort(&mut poles);
        sort(&mut zeros);
        Registry {
            poles: Ok(poles),
            zeros: zc.ok().map(|_| zeros),
        }
    }

    pub fn poles(&self) -> Result<&[Divisor]> {
        match &self.poles {
            Ok(v) => Ok(v),
            Err(reason) => Err(Error::UnsupportedExpr(reason.clone())),
        }
    }

    pub fn zeros(&self) -> Option<&[Divisor]> {
        self.zeros.as_deref()
    }
}

fn sort(v: &mut [Divisor]) {
    v.sort_by(|a, b| {
        a.0.norm()
            .total_cmp(&b.0.norm())
            .then(a.0.arg().total_cmp(&b.0.arg()))
    });
}

fn dedup(v: Vec<Complex64>) -> Vec<Complex64> {
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    for p in v {
        if p.norm() < 1e-12 || !p.is_finite() {
            continue;
        }
        match out
            .iter_mut()
            .find(|(q, n)| (*q / *n as f64 - p).norm() <= 1e-6 * (1.0 + p.norm()))
        {
            Some((q, n)) => {
                *q += p;
                *n += 1;
            }
            None => out.push((p, 1)),
        }
    }
    out.into_iter().map(|(q, n)| q / n as f64).collect()
}

fn const_value(n: &Node) -> Option<Complex64> {
    if n.depends_on_var() {
        return None;
    }
    eval_node(n, Complex64::new(1.0, 0.0)).ok().map(|v| v.to_complex())
}

fn zero_cands(n: &Node) -> Cands {
    match n {
        Node::Var => Ok(vec![]),
        Node::Const(c) => {
            if *c == Complex64::new(0.0, 0.0) {
                Err("expression vanishes identically".into())
            } else {
                Ok(vec![])
            }
        }
        Node::Neg(a) => zero_cands(a),
        Node::Mul(a, b) => {
            let mut v = zero_cands(a)?;
            v.extend(zero_cands(b)?);
            Ok(v)
        }
        Node::Div(a, b) => {
            let mut v = zero_cands(a)?;
            v.extend(pole_cands(b)?);
            Ok(v)
        }
        Node::Pow(a, k) => match k.signum() {
            1 => zero_cands(a),
            -1 => pole_cands(a),
            _ => Ok(vec![]),
        },
        Node::Exp(_) => Ok(vec![]),
        Node::Add(..) | Node::Sub(..) => {
            if let Some(c) = const_value(n) {
                return if c == Complex64::new(0.0, 0.0) {
                    Err("expression vanishes identically".into())
                } else {
                    Ok(vec![])
                };
            }
            let r = to_rational(n).ok_or_else(|| {
                "zeros of a sum involving exp cannot be located".to_string()
            })?;
            let mut v = roots(&r.num).ok_or("expression vanishes identically")?;
            // poles of the summands can cancel into zeros of the sum's
            // denominator; those are pole candidates, not zeros
            v.retain(|z| z.norm() > 0.0);
            Ok(v)
        }
    }
}

fn pole_cands(n: &Node) -> Cands {
    match n {
        Node::Var | Node::Const(_) => Ok(vec![]),
        Node::Neg(a) => pole_cands(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
            let mut v = pole_cands(a)?;
            v.extend(pole_cands(b)?);
            Ok(v)
        }
        Node::Div(a, b) => {
            let mut v = pole_cands(a)?;
            v.extend(zero_cands(b)?);
            Ok(v)
        }
        Node::Pow(a, k) => match k.signum() {
            1 => pole_cands(a),
            -1 => zero_cands(a),
            _ => Ok(vec![]),
        },
        Node::Exp(a) => {
            let inner = dedup(pole_cands(a)?);
            let mut all = inner.clone();
            if let Ok(z) = zero_cands(a) {
                all.extend(z);
            }
            let all = dedup(all);
            for &p in &inner {
                if local_order(a, p, &all)? < 0 {
                    return Err(format!("essential singularity at {p} away from the origin"));
                }
            }
            Ok(vec![])
        }
    }
}

fn local_radius(p: Complex64, others: &[Complex64]) -> f64 {
    let sep = others
        .iter()
        .map(|q| (q - p).norm())
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    (0.3 * sep).min(0.01 * p.norm()).min(1e-3)
}

/// Winding number of `n` around the small circle about `p`: the order of the
/// zero (positive) or pole (negative) at `p`.
fn local_order(n: &Node, p: Complex64, others: &[Complex64]) -> std::result::Result<i32, String> {
    let rho = local_radius(p, others);
    let f = |t: f64| -> std::result::Result<f64, String> {
        let z = p + Complex64::from_polar(rho, t);
        eval_node(n, z)
            .map(|v| v.phase)
            .map_err(|e| format!("cannot resolve the order at {p}: {e}"))
    };
    let m = 128;
    let mut total = 0.0;
    let mut t0 = 0.0;
    let mut ph0 = f(t0)?;
    for j in 1..=m {
        let t1 = TAU * j as f64 / m as f64;
        let ph1 = f(t1)?;
        total += phase_step(&f, t0, ph0, t1, ph1, 0)?;
        t0 = t1;
        ph0 = ph1;
    }
    Ok((total / TAU).round() as i32)
}

fn wrap(d: f64) -> f64 {
    crate::numerics::normalize(d)
}

fn phase_step(
    f: &dyn Fn(f64) -> std::result::Result<f64, String>,
    t0: f64,
    ph0: f64,
    t1: f64,
    ph1: f64,
    depth: u32,
) -> std::result::Result<f64, String> {
    let d = wrap(ph1 - ph0);
    if d.abs() <= PI / 2.0 || depth >= 16 {
        return Ok(d);
    }
    let tm = 0.5 * (t0 + t1);
    let pm = f(tm)?;
    Ok(phase_step(f, t0, ph0, tm, pm, depth + 1)? + phase_step(f, tm, pm, t1, ph1, depth + 1)?)
}

/// Poles with `r <= |p| <= r_outer`, with multiplicity.
pub fn poles_in_annulus(f: &FnExpr, r: f64, r_outer: f64) -> Result<Vec<Divisor>> {
    Ok(f.poles()?
        .iter()
        .copied()
        .filter(|(p, _)| {
            let m = p.norm();
            m >= r && m <= r_outer
        })
        .collect())
}
