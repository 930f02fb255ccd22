//! Rational-function view of exp-free subtrees, used to locate the zeros
//! of sums that appear in denominators.

use num_complex::Complex64;

use super::Node;

const MAX_DEGREE: usize = 64;

/// Polynomial with ascending coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<Complex64>);

impl Poly {
    fn constant(c: Complex64) -> Poly {
        Poly(vec![c])
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut out = vec![Complex64::new(0.0, 0.0); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        let get = |p: &Poly, i: usize| p.0.get(i).copied().unwrap_or_default();
        Poly((0..n).map(|i| get(self, i) + get(o, i)).collect())
    }

    fn shift(&self, k: usize) -> Poly {
        let mut v = vec![Complex64::new(0.0, 0.0); k];
        v.extend_from_slice(&self.0);
        Poly(v)
    }

    fn scale(&self, s: Complex64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::constant(Complex64::new(0.0, 0.0));
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }
}

/// `z^shift * num / den`.
#[derive(Clone, Debug)]
pub struct Rational {
    pub num: Poly,
    pub den: Poly,
    pub shift: i32,
}

impl Rational {
    fn mul(&self, o: &Rational) -> Option<Rational> {
        let r = Rational {
            num: self.num.mul(&o.num),
            den: self.den.mul(&o.den),
            shift: self.shift.checked_add(o.shift)?,
        };
        r.bounded()
    }

    fn recip(&self) -> Option<Rational> {
        if self.num.is_zero() {
            return None;
        }
        Some(Rational {
            num: self.den.clone(),
            den: self.num.clone(),
            shift: self.shift.checked_neg()?,
        })
    }

    fn add(&self, o: &Rational) -> Option<Rational> {
        let s = self.shift.min(o.shift);
        let a = self.num.mul(&o.den).shift((self.shift - s) as usize);
        let b = o.num.mul(&self.den).shift((o.shift - s) as usize);
        Rational {
            num: a.add(&b),
            den: self.den.mul(&o.den),
            shift: s,
        }
        .bounded()
    }

    fn neg(&self) -> Rational {
        Rational {
            num: self.num.scale(Complex64::new(-1.0, 0.0)),
            ..self.clone()
        }
    }

    fn powi(&self, k: i32) -> Option<Rational> {
        if k.unsigned_abs() as usize > MAX_DEGREE {
            return None;
        }
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut out = Rational {
            num: Poly::constant(Complex64::new(1.0, 0.0)),
            den: Poly::constant(Complex64::new(1.0, 0.0)),
            shift: 0,
        };
        for _ in 0..k.unsigned_abs() {
            out = out.mul(&base)?;
        }
        Some(out)
    }

    fn bounded(self) -> Option<Rational> {
        (self.num.degree() <= MAX_DEGREE && self.den.degree() <= MAX_DEGREE).then_some(self)
    }
}

pub fn to_rational(n: &Node) -> Option<Rational> {
    let one = || Poly::constant(Complex64::new(1.0, 0.0));
    match n {
        Node::Var => Some(Rational {
            num: one(),
            den: one(),
            shift: 1,
        }),
        Node::Const(c) => Some(Rational {
            num: Poly::constant(*c),
            den: one(),
            shift: 0,
        }),
        Node::Neg(a) => Some(to_rational(a)?.neg()),
        Node::Add(a, b) => to_rational(a)?.add(&to_rational(b)?),
        Node::Sub(a, b) => to_rational(a)?.add(&to_rational(b)?.neg()),
        Node::Mul(a, b) => to_rational(a)?.mul(&to_rational(b)?),
        Node::Div(a, b) => to_rational(a)?.mul(&to_rational(b)?.recip()?),
        Node::Pow(a, k) => to_rational(a)?.powi(*k),
        Node::Exp(_) => None,
    }
}

/// Non-zero roots of `p`, with repetition. `None` for the zero polynomial.
pub fn roots(p: &Poly) -> Option<Vec<Complex64>> {
    let scale = p.0.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let tiny = 1e-14 * scale;
    let mut c: Vec<Complex64> = p.0.clone();
    while c.last().is_some_and(|x| x.norm() <= tiny) {
        c.pop();
    }
    let lead_zeros = c.iter().take_while(|x| x.norm() <= tiny).count();
    c.drain(..lead_zeros);
    let q = Poly(c);
    let d = q.degree();
    match d {
        0 => Some(vec![]),
        1 => Some(vec![-q.0[0] / q.0[1]]),
        _ => Some(aberth(&q)),
    }
}

fn aberth(p: &Poly) -> Vec<Complex64> {
    let d = p.degree();
    let lead = p.0[d];
    // Cauchy bound for the root moduli
    let bound = 1.0
        + p.0[..d]
            .iter()
            .map(|c| (c / lead).norm())
            .fold(0.0, f64::max);
    let low = {
        let c0 = p.0[0].norm();
        let m = p.0[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
        c0 / (c0 + m)
    };
    let r0 = (low * bound).sqrt().max(1e-3);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(r0, 0.4 + std::f64::consts::TAU * k as f64 / d as f64))
        .collect();
    let dp = p.derivative();
    for _ in 0..2000 {
        let mut max_step: f64 = 0.0;
        for k in 0..d {
            let pk = p.eval(z[k]);
            if pk == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = pk / dp.eval(z[k]);
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..d {
                if j != k {
                    s += 1.0 / (z[k] - z[j]);
                }
            }
            let step = ratio / (1.0 - ratio * s);
            if step.is_finite() {
                z[k] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcexpr::parse_fn;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn rational_of_sum() {
        let f = parse_fn("1/z + z - 2").unwrap();
        let r = to_rational(f.root()).unwrap();
        let z = Complex64::new(0.7, -0.2);
        let v = z.powi(r.shift) * r.num.eval(z) / r.den.eval(z);
        let want = 1.0 / z + z - 2.0;
        assert!((v - want).norm() < 1e-14);
    }

    #[test]
    fn cubic_roots() {
        // (z - 0.5)(z + 0.25)(z - 2i)
        let f = parse_fn("(z - 0.5)*(z + 0.25)*(z - 2*i)").unwrap();
        let r = to_rational(f.root()).unwrap();
        let got = sorted(roots(&r.num).unwrap());
        let want = sorted(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(-0.25, 0.0),
            Complex64::new(0.0, 2.0),
        ]);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn double_root_is_close() {
        let p = Poly(vec![
            Complex64::new(0.04, 0.0),
            Complex64::new(-0.4, 0.0),
            Complex64::new(1.0, 0.0),
        ]);
        for r in roots(&p).unwrap() {
            assert!((r - 0.2).norm() < 1e-7);
        }
    }

    #[test]
    fn exp_is_not_rational() {
        assert!(to_rational(parse_fn("exp(z) - 1").unwrap().root()).is_none());
    }
}
