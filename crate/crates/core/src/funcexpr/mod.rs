//! Test functions written as expression text.
//!
//! The grammar covers rational operations, integer powers and `exp`, which
//! is enough for every coefficient and solution used in the experiments.
//! Each [`FnExpr`] carries a lazily built registry of its poles (and zeros,
//! where they can be located) so counting functions get exact inputs.

mod calculus;
mod eval;
mod parse;
mod poly;
mod registry;

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Serialize, Serializer};

pub use calculus::{differentiate, invert_variable};
pub use eval::eval_log;
pub use parse::{parse_fn, ParseError};
pub use registry::{poles_in_annulus, Registry};

use crate::error::Result;
use crate::numerics::LogComplex;

/// A pole or zero location with its multiplicity.
pub type Divisor = (Complex64, u32);

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Var,
    Const(Complex64),
    Neg(Arc<Node>),
    Add(Arc<Node>, Arc<Node>),
    Sub(Arc<Node>, Arc<Node>),
    Mul(Arc<Node>, Arc<Node>),
    Div(Arc<Node>, Arc<Node>),
    Pow(Arc<Node>, i32),
    Exp(Arc<Node>),
}

pub type NodeRef = Arc<Node>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl Node {
    pub fn var() -> NodeRef {
        Arc::new(Node::Var)
    }

    pub fn constant(z: Complex64) -> NodeRef {
        Arc::new(Node::Const(z))
    }

    pub fn real(x: f64) -> NodeRef {
        Node::constant(c(x))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self {
            Node::Const(z) => Some(*z),
            _ => None,
        }
    }

    fn is_const(&self, v: f64) -> bool {
        self.as_const() == Some(c(v))
    }

    /// `Some(k)` when the node is `z^k` (with `z` itself as `k = 1`).
    fn var_power(&self) -> Option<i32> {
        match self {
            Node::Var => Some(1),
            Node::Pow(b, k) if matches!(**b, Node::Var) => Some(*k),
            _ => None,
        }
    }

    pub fn depends_on_var(&self) -> bool {
        match self {
            Node::Var => true,
            Node::Const(_) => false,
            Node::Neg(a) | Node::Pow(a, _) | Node::Exp(a) => a.depends_on_var(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.depends_on_var() || b.depends_on_var()
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Node::Var | Node::Const(_) => 1,
            Node::Neg(a) | Node::Pow(a, _) | Node::Exp(a) => 1 + a.size(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }
}

// Simplifying constructors. Folding is deliberately shallow: constants,
// identities with 0 and 1, and merging integer powers of the variable.

pub fn neg(a: NodeRef) -> NodeRef {
    match &*a {
        Node::Const(z) => Node::constant(-z),
        Node::Neg(inner) => inner.clone(),
        Node::Mul(x, y) if x.as_const().is_some() => mul(neg(x.clone()), y.clone()),
        Node::Div(x, y) if x.as_const().is_some() => div(neg(x.clone()), y.clone()),
        _ => Arc::new(Node::Neg(a)),
    }
}

pub fn add(a: NodeRef, b: NodeRef) -> NodeRef {
    if a.is_const(0.0) {
        return b;
    }
    if b.is_const(0.0) {
        return a;
    }
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        return Node::constant(x + y);
    }
    if let Node::Neg(inner) = &*b {
        return Arc::new(Node::Sub(a, inner.clone()));
    }
    Arc::new(Node::Add(a, b))
}

pub fn sub(a: NodeRef, b: NodeRef) -> NodeRef {
    if b.is_const(0.0) {
        return a;
    }
    if a.is_const(0.0) {
        return neg(b);
    }
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        return Node::constant(x - y);
    }
    if let Node::Neg(inner) = &*b {
        return Arc::new(Node::Add(a, inner.clone()));
    }
    Arc::new(Node::Sub(a, b))
}

pub fn mul(a: NodeRef, b: NodeRef) -> NodeRef {
    if a.is_const(0.0) || b.is_const(0.0) {
        return Node::real(0.0);
    }
    if a.is_const(1.0) {
        return b;
    }
    if b.is_const(1.0) {
        return a;
    }
    if a.is_const(-1.0) {
        return neg(b);
    }
    if b.is_const(-1.0) {
        return neg(a);
    }
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        return Node::constant(x * y);
    }
    if let (Some(p), Some(q)) = (a.var_power(), b.var_power()) {
        if let Some(k) = p.checked_add(q) {
            return pow(Node::var(), k);
        }
    }
    match (&*a, &*b) {
        (Node::Neg(x), Node::Neg(y)) => mul(x.clone(), y.clone()),
        (Node::Neg(x), _) => neg(mul(x.clone(), b)),
        (_, Node::Neg(y)) => neg(mul(a, y.clone())),
        _ => Arc::new(Node::Mul(a, b)),
    }
}

pub fn div(a: NodeRef, b: NodeRef) -> NodeRef {
    if b.is_const(1.0) {
        return a;
    }
    if a.is_const(0.0) && !b.is_const(0.0) {
        return Node::real(0.0);
    }
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        if y != c(0.0) {
            return Node::constant(x / y);
        }
    }
    if let (Some(p), Some(q)) = (a.var_power(), b.var_power()) {
        if let Some(k) = p.checked_sub(q) {
            return pow(Node::var(), k);
        }
    }
    if a.is_const(1.0) {
        if let Some(q) = b.var_power() {
            if let Some(k) = q.checked_neg() {
                return pow(Node::var(), k);
            }
        }
    }
    match (&*a, &*b) {
        (Node::Neg(x), _) => neg(div(x.clone(), b)),
        (_, Node::Neg(y)) => neg(div(a, y.clone())),
        _ => Arc::new(Node::Div(a, b)),
    }
}

pub fn pow(a: NodeRef, k: i32) -> NodeRef {
    if k == 0 {
        return Node::real(1.0);
    }
    if k == 1 {
        return a;
    }
    if let Some(x) = a.as_const() {
        if x != c(0.0) || k > 0 {
            return Node::constant(x.powi(k));
        }
    }
    if let Node::Pow(base, j) = &*a {
        if let Some(m) = j.checked_mul(k) {
            return pow(base.clone(), m);
        }
    }
    if let Node::Neg(inner) = &*a {
        let p = pow(inner.clone(), k);
        return if k % 2 == 0 { p } else { neg(p) };
    }
    Arc::new(Node::Pow(a, k))
}

pub fn exp(a: NodeRef) -> NodeRef {
    if let Some(x) = a.as_const() {
        return Node::constant(x.exp());
    }
    Arc::new(Node::Exp(a))
}

/// A parsed or constructed test function.
#[derive(Clone)]
pub struct FnExpr {
    root: NodeRef,
    var: char,
    registry: Arc<OnceLock<Registry>>,
}

impl FnExpr {
    pub fn new(root: NodeRef, var: char) -> Self {
        FnExpr {
            root,
            var,
            registry: Arc::new(OnceLock::new()),
        }
    }

    pub fn constant(z: Complex64) -> Self {
        FnExpr::new(Node::constant(z), 'z')
    }

    pub fn root(&self) -> &NodeRef {
        &self.root
    }

    /// Variable name used when printing (`z` or `w`).
    pub fn var(&self) -> char {
        self.var
    }

    pub fn with_var(&self, var: char) -> FnExpr {
        FnExpr::new(self.root.clone(), var)
    }

    pub fn is_constant(&self) -> bool {
        !self.root.depends_on_var()
    }

    /// Syntactic entireness: no denominator and no negatively powered base
    /// depends on the variable. Conservative (may reject entire inputs).
    pub fn is_entire(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Var | Node::Const(_) => true,
                Node::Neg(a) | Node::Exp(a) => walk(a),
                Node::Pow(a, k) => (*k >= 0 || !a.depends_on_var()) && walk(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => walk(a) && walk(b),
                Node::Div(a, b) => !b.depends_on_var() && walk(a) && walk(b),
            }
        }
        walk(&self.root)
    }

    /// Log-space value at `z`.
    pub fn eval_log(&self, z: Complex64) -> Result<LogComplex> {
        eval::eval_checked(self, z)
    }

    /// Value at `z` with no pole-registry check. Used on grids that are
    /// already known to avoid the registered poles.
    pub fn eval_raw(&self, z: Complex64) -> Result<LogComplex> {
        eval::eval_node(&self.root, z)
    }

    /// Value at `z` with `ln` of its term-wise magnitude (sums of moduli in
    /// place of sums), the natural scale for rounding errors of the value.
    pub fn eval_with_scale(&self, z: Complex64) -> Result<(LogComplex, f64)> {
        eval::eval_with_scale(&self.root, z)
    }

    pub fn registry(&self) -> &Registry {
        self.registry.get_or_init(|| Registry::build(&self.root))
    }

    /// Registered poles in `0 < |z|`, or the reason the registry is incomplete.
    pub fn poles(&self) -> Result<&[Divisor]> {
        self.registry().poles()
    }

    /// Registered zeros in `0 < |z|`, when they could be located.
    pub fn zeros(&self) -> Option<&[Divisor]> {
        self.registry().zeros()
    }

    pub fn derivative(&self, k: usize) -> FnExpr {
        differentiate(self, k)
    }

    pub fn mul(&self, other: &FnExpr) -> FnExpr {
        FnExpr::new(mul(self.root.clone(), other.root.clone()), self.var)
    }

    pub fn div(&self, other: &FnExpr) -> FnExpr {
        FnExpr::new(div(self.root.clone(), other.root.clone()), self.var)
    }

    pub fn add(&self, other: &FnExpr) -> FnExpr {
        FnExpr::new(add(self.root.clone(), other.root.clone()), self.var)
    }

    pub fn sub(&self, other: &FnExpr) -> FnExpr {
        FnExpr::new(sub(self.root.clone(), other.root.clone()), self.var)
    }

    pub fn neg(&self) -> FnExpr {
        FnExpr::new(neg(self.root.clone()), self.var)
    }

    pub fn scale(&self, x: Complex64) -> FnExpr {
        FnExpr::new(mul(Node::constant(x), self.root.clone()), self.var)
    }
}

impl fmt::Debug for FnExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnExpr({})", self)
    }
}

impl PartialEq for FnExpr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Serialize for FnExpr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl std::str::FromStr for FnExpr {
    type Err = ParseError;
    fn from_str(s: &str) -> std::result::Result<Self, ParseError> {
        parse_fn(s)
    }
}

// Printing. The output always re-parses to the same tree shape up to
// constant folding.

fn fmt_real(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{:?}", x)
    }
}

fn fmt_const(z: Complex64) -> (String, u8) {
    match (z.re, z.im) {
        (re, 0.0) => {
            let s = fmt_real(re);
            let prec = if re < 0.0 || s.contains('e') { 0 } else { 9 };
            (s, prec)
        }
        (0.0, im) => {
            if im == 1.0 {
                ("i".into(), 9)
            } else {
                (format!("{}*i", fmt_real(im)), if im < 0.0 { 0 } else { 2 })
            }
        }
        (re, im) => {
            let sign = if im < 0.0 { "-" } else { "+" };
            (
                format!("{}{}{}*i", fmt_real(re), sign, fmt_real(im.abs())),
                1,
            )
        }
    }
}

fn write_node(n: &Node, var: char, out: &mut String) -> u8 {
    // returns the precedence of what was written:
    // 1 = sum, 2 = product, 3 = unary minus, 4 = power, 9 = atom
    match n {
        Node::Var => {
            out.push(var);
            9
        }
        Node::Const(z) => {
            let (s, p) = fmt_const(*z);
            out.push_str(&s);
            p
        }
        Node::Neg(a) => {
            out.push('-');
            write_child(a, var, 2, out);
            3
        }
        Node::Add(a, b) | Node::Sub(a, b) => {
            write_child(a, var, 1, out);
            out.push_str(if matches!(n, Node::Add(..)) { " + " } else { " - " });
            write_child(b, var, 2, out);
            1
        }
        Node::Mul(a, b) | Node::Div(a, b) => {
            write_child(a, var, 2, out);
            out.push(if matches!(n, Node::Mul(..)) { '*' } else { '/' });
            write_child(b, var, 3, out);
            2
        }
        Node::Pow(a, k) => {
            write_child(a, var, 9, out);
            out.push('^');
            out.push_str(&k.to_string());
            4
        }
        Node::Exp(a) => {
            out.push_str("exp(");
            write_node(a, var, out);
            out.push(')');
            9
        }
    }
}

fn write_child(n: &Node, var: char, min_prec: u8, out: &mut String) {
    let mut buf = String::new();
    let p = write_node(n, var, &mut buf);
    if p < min_prec {
        out.push('(');
        out.push_str(&buf);
        out.push(')');
    } else {
        out.push_str(&buf);
    }
}

impl fmt::Display for FnExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_node(&self.root, self.var, &mut s);
        f.write_str(&s)
    }
}
