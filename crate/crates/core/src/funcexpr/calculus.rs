use super::{add, div, exp, mul, neg, pow, sub, FnExpr, Node, NodeRef};

fn d(n: &NodeRef) -> NodeRef {
    match &**n {
        Node::Var => Node::real(1.0),
        Node::Const(_) => Node::real(0.0),
        Node::Neg(a) => neg(d(a)),
        Node::Add(a, b) => add(d(a), d(b)),
        Node::Sub(a, b) => sub(d(a), d(b)),
        Node::Mul(a, b) => add(mul(d(a), b.clone()), mul(a.clone(), d(b))),
        Node::Div(a, b) => {
            let db = d(b);
            if db.as_const().is_some_and(|c| c == num_complex::Complex64::new(0.0, 0.0)) {
                return div(d(a), b.clone());
            }
            sub(div(d(a), b.clone()), div(mul(a.clone(), db), pow(b.clone(), 2)))
        }
        Node::Pow(a, k) => mul(
            mul(Node::real(*k as f64), pow(a.clone(), k - 1)),
            d(a),
        ),
        Node::Exp(a) => mul(d(a), exp(a.clone())),
    }
}

/// `k`-th derivative, symbolically.
pub fn differentiate(f: &FnExpr, k: usize) -> FnExpr {
    let mut n = f.root().clone();
    for _ in 0..k {
        n = d(&n);
    }
    FnExpr::new(n, f.var())
}

fn substitute_recip(n: &NodeRef) -> NodeRef {
    match &**n {
        Node::Var => pow(Node::var(), -1),
        Node::Const(_) => n.clone(),
        Node::Neg(a) => neg(substitute_recip(a)),
        Node::Add(a, b) => add(substitute_recip(a), substitute_recip(b)),
        Node::Sub(a, b) => sub(substitute_recip(a), substitute_recip(b)),
        Node::Mul(a, b) => mul(substitute_recip(a), substitute_recip(b)),
        Node::Div(a, b) => div(substitute_recip(a), substitute_recip(b)),
        Node::Pow(a, k) => pow(substitute_recip(a), *k),
        Node::Exp(a) => exp(substitute_recip(a)),
    }
}

/// `f(1/w)` as an expression in `w` (or in `z` if `f` was written in `w`).
pub fn invert_variable(f: &FnExpr) -> FnExpr {
    let var = if f.var() == 'w' { 'z' } else { 'w' };
    FnExpr::new(substitute_recip(f.root()), var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcexpr::parse_fn;
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn derivative_of_exp_recip() {
        let f = parse_fn("exp(1/z)").unwrap();
        let f1 = differentiate(&f, 1);
        assert_eq!(f1.to_string(), "-z^-2*exp(z^-1)");
        let z = Complex64::new(0.4, 0.3);
        let want = -(1.0 / z).exp() / (z * z);
        assert!((f1.eval_log(z).unwrap().to_complex() - want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn inversion() {
        let f = parse_fn("exp(1/z)").unwrap();
        assert_eq!(invert_variable(&f).to_string(), "exp(w)");
        let g = parse_fn("z^2*exp(z^-2)").unwrap();
        assert_eq!(invert_variable(&g).to_string(), "w^-2*exp(w^2)");
        assert_eq!(invert_variable(&invert_variable(&g)), g);
    }

    // central finite-difference oracle, independent of the symbolic rules
    fn fd(f: &FnExpr, z: Complex64, h: f64) -> Complex64 {
        let e = |w: Complex64| f.eval_log(w).unwrap().to_complex();
        let hh = Complex64::new(h, 0.0);
        (-e(z + 2.0 * hh) + 8.0 * e(z + hh) - 8.0 * e(z - hh) + e(z - 2.0 * hh)) / (12.0 * h)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_finite_differences(
            re in 0.6f64..1.5, im in -1.0f64..1.0,
            src in prop::sample::select(vec![
                "exp(z^2 + z^-2)",
                "exp(1/z)/(z - 3)",
                "z^3*exp(-z) - i/z",
                "(z + 2)^-2*exp(i*z)",
                "exp(exp(z/4))",
            ]),
        ) {
            let z = Complex64::new(re, im);
            let f = parse_fn(src).unwrap();
            let g = differentiate(&f, 1);
            let exact = g.eval_log(z).unwrap().to_complex();
            let approx = fd(&f, z, 1e-3);
            let scale = f.eval_log(z).unwrap().to_complex().norm() + exact.norm();
            prop_assert!((exact - approx).norm() <= 1e-6 * scale, "{src} at {z}");
        }
    }
}
