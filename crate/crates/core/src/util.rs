//! Small scalar routines shared by the sampling modules.

use crate::numerics::Neumaier;

/// Brent's root finder on a bracketing interval `[a, b]` with `fa`, `fb`
/// of opposite sign (or one of them zero).
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, xtol: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..200 {
        if fb == 0.0 || (b - a).abs() <= xtol {
            return b;
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let q = (3.0 * a + b) / 4.0;
        let out_of_range = !((s > q.min(b)) && (s < q.max(b)));
        if out_of_range
            || (mflag && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!mflag && (s - b).abs() >= (c - d).abs() / 2.0)
            || (mflag && (b - c).abs() < xtol)
            || (!mflag && (c - d).abs() < xtol)
            || !s.is_finite()
        {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if (fa < 0.0) != (fs < 0.0) {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    b
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
/// Returns `(x, f(x))`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Romberg integration of `f` over `[a, b]` starting from `panels`
/// trapezoid panels and doubling up to `depth` times. Stops once two
/// successive diagonal entries differ by at most `tol`.
/// Returns `(value, converged)`.
pub fn romberg<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    depth: u32,
    tol: f64,
) -> (f64, bool) {
    let mut h = (b - a) / panels as f64;
    let mut acc = Neumaier::default();
    acc.add(0.5 * (f(a) + f(b)));
    for i in 1..panels {
        acc.add(f(a + h * i as f64));
    }
    let mut n = panels;
    let mut prev_row = vec![h * acc.value()];
    for _ in 0..depth {
        for i in 0..n {
            acc.add(f(a + h * (i as f64 + 0.5)));
        }
        n *= 2;
        h /= 2.0;
        let mut row = vec![h * acc.value()];
        let mut p4 = 1.0;
        for j in 0..prev_row.len() {
            p4 *= 4.0;
            let r = row[j] + (row[j] - prev_row[j]) / (p4 - 1.0);
            row.push(r);
        }
        let last = *row.last().unwrap();
        let before = *prev_row.last().unwrap();
        if (last - before).abs() <= tol {
            return (last, true);
        }
        prev_row = row;
    }
    (*prev_row.last().unwrap(), false)
}

/// Ordinary least-squares line `y = slope*x + intercept`. Returns
/// `(slope, intercept, residual_rms)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// Angle reduced into `[0, 2π)`.
pub fn angle_0_2pi(phi: f64) -> f64 {
    let t = phi.rem_euclid(std::f64::consts::TAU);
    if t >= std::f64::consts::TAU {
        0.0
    } else {
        t
    }
}
