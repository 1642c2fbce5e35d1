//! A small total expression language for the scalar function `h`, the
//! endo-map `E` and the bifunction `φ`.
//!
//! Expressions are parsed against a fixed variable signature (`x1..xk` for
//! point functions, `a, b` for bifunctions). Evaluation is pure; any
//! non-finite intermediate result is reported as an [`EvalError`] rather than
//! returned.

mod ast;
mod parser;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use ast::{BinOp, Builtin, CmpOp, Node, MAX_DEPTH};

use crate::manifold::Point;

/// Maximum accepted source length in bytes.
pub const MAX_SOURCE_LEN: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("expression source exceeds {MAX_SOURCE_LEN} bytes")]
    TooLong,
    #[error("syntax error at offset {offset}: expected one of {expected:?}")]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` at offset {offset} takes {expected} argument(s), found {found}")]
    ArityMismatch {
        name: String,
        expected: String,
        found: usize,
        offset: usize,
    },
    #[error("expression depth {depth} exceeds limit {limit}")]
    TooDeep { depth: usize, limit: usize },
    #[error("non-finite numeric literal at offset {offset}")]
    NonFiniteConstant { offset: usize },
    #[error("expected {expected} component expressions, found {found}")]
    ComponentCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation domain error: {reason} (operands {operands:?})")]
pub struct EvalError {
    pub reason: String,
    pub operands: Vec<f64>,
}

impl EvalError {
    pub(crate) fn domain(reason: &str, operands: &[f64]) -> Self {
        Self {
            reason: reason.to_string(),
            operands: operands.to_vec(),
        }
    }

    pub(crate) fn non_finite(v: f64) -> Self {
        Self::domain("non-finite result", &[v])
    }
}

/// Ordered variable names an expression is parsed against.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature(Arc<[String]>);

impl Signature {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Signature(names.into_iter().map(Into::into).collect())
    }

    /// `x1, …, xk`.
    pub fn coords(k: usize) -> Self {
        Self::new((1..=k).map(|i| format!("x{i}")))
    }

    /// `x1, …, xk, v`, used for subsets of `N × ℝ`.
    pub fn coords_and_value(k: usize) -> Self {
        Self::new((1..=k).map(|i| format!("x{i}")).chain(["v".to_string()]))
    }

    /// `a, b`.
    pub fn bifunction() -> Self {
        Self::new(["a", "b"])
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A parsed, immutable expression together with its signature.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    sig: Signature,
}

impl Expr {
    pub fn parse(src: &str, sig: &Signature) -> Result<Self, ParseError> {
        if src.trim().is_empty() {
            return Err(ParseError::Empty);
        }
        if src.len() > MAX_SOURCE_LEN {
            return Err(ParseError::TooLong);
        }
        let root = parser::parse_node(src, sig.names())?;
        Self::from_node(root, sig.clone())
    }

    /// Wraps an AST built programmatically; enforces the depth limit and that
    /// every variable index is in the signature.
    pub fn from_node(root: Node, sig: Signature) -> Result<Self, ParseError> {
        let depth = root.depth();
        if depth > MAX_DEPTH {
            return Err(ParseError::TooDeep {
                depth,
                limit: MAX_DEPTH,
            });
        }
        if let Some(i) = root.max_var() {
            if i >= sig.len() {
                return Err(ParseError::UnknownIdentifier {
                    name: format!("#{i}"),
                    offset: 0,
                });
            }
        }
        Ok(Self { root, sig })
    }

    pub fn constant(c: f64, sig: &Signature) -> Self {
        Self {
            root: Node::Num(c),
            sig: sig.clone(),
        }
    }

    pub fn var(i: usize, sig: &Signature) -> Self {
        assert!(i < sig.len());
        Self {
            root: Node::Var(i),
            sig: sig.clone(),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Evaluates with variables bound positionally in signature order.
    pub fn eval(&self, vars: &[f64]) -> Result<f64, EvalError> {
        if vars.len() < self.sig.len() {
            return Err(EvalError::domain("unbound variables", vars));
        }
        self.root.eval(vars)
    }

    /// Evaluates with variables bound by name.
    pub fn eval_named(&self, env: &[(&str, f64)]) -> Result<f64, EvalError> {
        let mut vals = Vec::with_capacity(self.sig.len());
        for name in self.sig.names() {
            match env.iter().find(|(n, _)| n == name) {
                Some((_, v)) => vals.push(*v),
                None => return Err(EvalError::domain(&format!("unbound variable {name}"), &[])),
            }
        }
        self.root.eval(&vals)
    }

    /// Substitutes `subs[i]` (all over signature `sig`) for variable `i`.
    pub fn substitute(&self, subs: &[Expr], sig: &Signature) -> Result<Expr, ParseError> {
        if subs.len() != self.sig.len() {
            return Err(ParseError::ComponentCount {
                expected: self.sig.len(),
                found: subs.len(),
            });
        }
        let nodes: Vec<Node> = subs.iter().map(|e| e.root.clone()).collect();
        Expr::from_node(self.root.substitute(&nodes), sig.clone())
    }

    /// Re-targets the expression to a larger signature whose prefix matches.
    pub fn widen(&self, sig: &Signature) -> Expr {
        debug_assert!(sig.names().starts_with(self.sig.names()));
        Expr {
            root: self.root.clone(),
            sig: sig.clone(),
        }
    }

    pub fn binary(op: BinOp, a: &Expr, b: &Expr) -> Result<Expr, ParseError> {
        Expr::from_node(
            Node::Bin(op, Box::new(a.root.clone()), Box::new(b.root.clone())),
            a.sig.clone(),
        )
    }

    /// Balanced sum, keeping the depth logarithmic in the number of terms.
    pub fn sum(terms: &[Expr]) -> Result<Expr, ParseError> {
        assert!(!terms.is_empty());
        fn build(nodes: &[Node]) -> Node {
            if nodes.len() == 1 {
                return nodes[0].clone();
            }
            let mid = nodes.len() / 2;
            Node::Bin(BinOp::Add, Box::new(build(&nodes[..mid])), Box::new(build(&nodes[mid..])))
        }
        let nodes: Vec<Node> = terms.iter().map(|t| t.root.clone()).collect();
        Expr::from_node(build(&nodes), terms[0].sig.clone())
    }

    pub fn call(f: Builtin, args: &[Expr]) -> Result<Expr, ParseError> {
        assert!(!args.is_empty());
        Expr::from_node(
            Node::Call(f, args.iter().map(|a| a.root.clone()).collect()),
            args[0].sig.clone(),
        )
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f, self.sig.names())
    }
}

/// Parses `src` against `sig` (free function form of [`Expr::parse`]).
pub fn parse(src: &str, sig: &Signature) -> Result<Expr, ParseError> {
    Expr::parse(src, sig)
}

/// A scalar function `h` on chart coordinates `x1..xk`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFn {
    pub expr: Expr,
    pub label: String,
}

impl ScalarFn {
    pub fn parse(src: &str, coords: usize) -> Result<Self, ParseError> {
        Ok(Self {
            expr: Expr::parse(src, &Signature::coords(coords))?,
            label: src.to_string(),
        })
    }

    pub fn from_expr(expr: Expr, label: impl Into<String>) -> Self {
        Self {
            expr,
            label: label.into(),
        }
    }

    pub fn arity(&self) -> usize {
        self.expr.signature().len()
    }

    pub fn eval(&self, p: &Point) -> Result<f64, EvalError> {
        self.expr.eval(p.coords())
    }

    pub fn eval_coords(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.expr.eval(x)
    }

    /// `h ∘ g` where `g` maps the new coordinates to this function's inputs.
    pub fn compose(&self, inner: &EndoMap) -> Result<ScalarFn, ParseError> {
        let sig = Signature::coords(inner.input_arity());
        let expr = self.expr.substitute(&inner.exprs, &sig)?;
        Ok(ScalarFn::from_expr(
            expr,
            format!("({}) o ({})", self.label, inner.label),
        ))
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

/// A map `E` given componentwise; the output is a point on the same chart.
#[derive(Debug, Clone, PartialEq)]
pub struct EndoMap {
    pub exprs: Vec<Expr>,
    pub label: String,
}

impl EndoMap {
    pub fn parse<S: AsRef<str>>(components: &[S], coords: usize) -> Result<Self, ParseError> {
        Self::parse_between(components, coords, components.len())
    }

    /// Map from `in_coords` chart coordinates to `out_coords` components.
    pub fn parse_between<S: AsRef<str>>(
        components: &[S],
        in_coords: usize,
        out_coords: usize,
    ) -> Result<Self, ParseError> {
        if components.len() != out_coords {
            return Err(ParseError::ComponentCount {
                expected: out_coords,
                found: components.len(),
            });
        }
        let sig = Signature::coords(in_coords);
        let exprs = components
            .iter()
            .map(|c| Expr::parse(c.as_ref(), &sig))
            .collect::<Result<Vec<_>, _>>()?;
        let label = format!(
            "[{}]",
            components.iter().map(|c| c.as_ref()).collect::<Vec<_>>().join(", ")
        );
        Ok(Self { exprs, label })
    }

    pub fn identity(coords: usize) -> Self {
        let sig = Signature::coords(coords);
        Self {
            exprs: (0..coords).map(|i| Expr::var(i, &sig)).collect(),
            label: "identity".into(),
        }
    }

    pub fn constant(values: &[f64], coords: usize) -> Self {
        let sig = Signature::coords(coords);
        Self {
            exprs: values.iter().map(|&c| Expr::constant(c, &sig)).collect(),
            label: format!("constant {values:?}"),
        }
    }

    pub fn input_arity(&self) -> usize {
        self.exprs.first().map_or(0, |e| e.signature().len())
    }

    pub fn output_arity(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_identity(&self) -> bool {
        self.input_arity() == self.output_arity()
            && self
                .exprs
                .iter()
                .enumerate()
                .all(|(i, e)| *e.root() == Node::Var(i))
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.exprs.iter().map(|e| e.eval(x)).collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &EndoMap) -> Result<EndoMap, ParseError> {
        let sig = Signature::coords(inner.input_arity());
        let exprs = self
            .exprs
            .iter()
            .map(|e| e.substitute(&inner.exprs, &sig))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EndoMap {
            exprs,
            label: format!("({}) o ({})", self.label, inner.label),
        })
    }

    pub fn sources(&self) -> Vec<String> {
        self.exprs.iter().map(|e| e.to_string()).collect()
    }
}

/// A bifunction `φ(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bifunction {
    pub expr: Expr,
    pub label: String,
}

impl Bifunction {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        Ok(Self {
            expr: Expr::parse(src, &Signature::bifunction())?,
            label: src.to_string(),
        })
    }

    pub fn from_expr(expr: Expr, label: impl Into<String>) -> Self {
        Self {
            expr,
            label: label.into(),
        }
    }

    /// `φ(a, b) = a − b`.
    pub fn difference() -> Self {
        Self::parse("a - b").expect("static expression")
    }

    pub fn eval(&self, a: f64, b: f64) -> Result<f64, EvalError> {
        self.expr.eval(&[a, b])
    }

    pub fn sum(parts: &[Bifunction]) -> Result<Bifunction, ParseError> {
        let exprs: Vec<Expr> = parts.iter().map(|p| p.expr.clone()).collect();
        Ok(Self {
            expr: Expr::sum(&exprs)?,
            label: parts
                .iter()
                .map(|p| format!("({})", p.label))
                .collect::<Vec<_>>()
                .join(" + "),
        })
    }
}

impl fmt::Display for Bifunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

/// Central-difference directional derivative of `f` at `at` along `dir`,
/// with step `max(1e-6, 1e-6·‖at‖)`.
pub fn differentiate_numeric(f: &ScalarFn, at: &Point, dir: &[f64]) -> Result<f64, EvalError> {
    let step = (1e-6 * at.norm()).max(1e-6);
    let plus: Vec<f64> = at.coords().iter().zip(dir).map(|(x, d)| x + step * d).collect();
    let minus: Vec<f64> = at.coords().iter().zip(dir).map(|(x, d)| x - step * d).collect();
    let fp = f.eval_coords(&plus)?;
    let fm = f.eval_coords(&minus)?;
    let d = (fp - fm) / (2.0 * step);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(EvalError::non_finite(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig2() -> Signature {
        Signature::coords(2)
    }

    #[test]
    fn parses_and_evaluates_sum_with_exp() {
        let e = parse("x1^2 + exp(x2)", &sig2()).unwrap();
        assert_eq!(e.eval(&[1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn piecewise_example() {
        let e = parse("if(x1 >= 0, 1, -(x1^2))", &Signature::coords(1)).unwrap();
        assert_eq!(e.eval(&[-2.0]).unwrap(), -4.0);
        assert_eq!(e.eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(e.eval(&[3.0]).unwrap(), 1.0);
    }

    #[test]
    fn incomplete_expression_reports_offset() {
        match parse("x1 + ", &sig2()) {
            Err(ParseError::Syntax { offset, expected }) => {
                assert_eq!(offset, 5);
                assert!(expected.contains(&"number".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifiers_and_arity() {
        assert!(matches!(
            parse("y + 1", &sig2()),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("foo(x1)", &sig2()),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("exp(x1, x2)", &sig2()),
            Err(ParseError::ArityMismatch { .. })
        ));
        assert!(matches!(
            parse("max(x1)", &sig2()),
            Err(ParseError::ArityMismatch { .. })
        ));
        assert!(matches!(
            parse("x1 < 2", &sig2()),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(parse("   ", &sig2()), Err(ParseError::Empty)));
        assert!(matches!(parse("1e999", &sig2()), Err(ParseError::NonFiniteConstant { .. })));
    }

    #[test]
    fn depth_limit() {
        let deep = format!("{}x1{}", "(".repeat(10), ")".repeat(10));
        assert!(parse(&deep, &sig2()).is_ok());
        let too_deep = format!("{}x1", "-".repeat(70));
        assert!(matches!(
            parse(&too_deep, &sig2()),
            Err(ParseError::TooDeep { .. })
        ));
        let huge = format!("{}x1{}", "(".repeat(5000), ")".repeat(5000));
        assert!(matches!(parse(&huge, &sig2()), Err(ParseError::TooDeep { .. })));
        let long = "x1+".repeat(30_000) + "x1";
        assert!(matches!(parse(&long, &sig2()), Err(ParseError::TooLong)));
    }

    #[test]
    fn bifunction_examples() {
        let phi = Bifunction::parse("a - 2*b").unwrap();
        assert_eq!(phi.eval(-1.0, -1.0).unwrap(), 1.0);
        let d = Bifunction::difference();
        for c in [-3.5, 0.0, 1e10] {
            assert_eq!(d.eval(c, c).unwrap(), 0.0);
        }
    }

    #[test]
    fn domain_errors_surface() {
        let e = parse("log(x1)", &Signature::coords(1)).unwrap();
        assert!(e.eval(&[0.0]).is_err());
        let e = parse("x1 / x2", &sig2()).unwrap();
        assert!(e.eval(&[0.0, 0.0]).is_err());
        let e = parse("x1 ^ x2", &sig2()).unwrap();
        assert!(e.eval(&[0.0, -1.0]).is_err());
        assert!(e.eval(&[-2.0, 0.5]).is_err());
        assert_eq!(e.eval(&[-2.0, 3.0]).unwrap(), -8.0);
        let e = parse("exp(x1)", &Signature::coords(1)).unwrap();
        assert!(e.eval(&[1000.0]).is_err());
        let e = parse("artanh(x1) + sqrt(x1)", &Signature::coords(1)).unwrap();
        assert!(e.eval(&[1.0]).is_err());
        assert!(e.eval(&[-0.5]).is_err());
    }

    #[test]
    fn unary_minus_binds_tighter_than_power() {
        let e = parse("-x1^2", &Signature::coords(1)).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), 9.0);
        let e = parse("-(x1^2)", &Signature::coords(1)).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
        let e = parse("2^3^2", &Signature::coords(1)).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 512.0);
    }

    #[test]
    fn named_binding() {
        let phi = Bifunction::parse("a - 2*b").unwrap();
        assert_eq!(phi.expr.eval_named(&[("b", 1.0), ("a", 5.0)]).unwrap(), 3.0);
        assert!(phi.expr.eval_named(&[("a", 5.0)]).is_err());
    }

    #[test]
    fn print_reparse_is_structural_identity() {
        let sig = sig2();
        for src in [
            "x1^2 + exp(x2)",
            "if(x1 >= 0, 1, -(x1^2))",
            "-x1^2 - 3/x2*x1",
            "max(x1, x2, 0.5) - min(abs(x1), 1e-7)",
            "2^3^x2",
        ] {
            let e = parse(src, &sig).unwrap();
            let printed = e.to_string();
            let back = parse(&printed, &sig).unwrap();
            assert_eq!(e, back, "{src} -> {printed}");
        }
    }

    #[test]
    fn derivatives() {
        let f = ScalarFn::parse("x1^2", 1).unwrap();
        let d = differentiate_numeric(&f, &Point(vec![3.0]), &[1.0]).unwrap();
        assert!((d - 6.0).abs() < 1e-6);
        let f = ScalarFn::parse("3.5*x1", 1).unwrap();
        let d = differentiate_numeric(&f, &Point(vec![-2.0]), &[1.0]).unwrap();
        assert!((d - 3.5).abs() < 1e-9);
        let f = ScalarFn::parse("exp(x1)", 1).unwrap();
        let d = differentiate_numeric(&f, &Point(vec![0.0]), &[1.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-6);
        let f = ScalarFn::parse("log(x1)", 1).unwrap();
        assert!(differentiate_numeric(&f, &Point(vec![0.0]), &[1.0]).is_err());
    }

    #[test]
    fn composition_and_identity() {
        let id = EndoMap::identity(2);
        assert!(id.is_identity());
        let h = ScalarFn::parse("x1 * x2", 2).unwrap();
        let swap = EndoMap::parse(&["x2", "2*x1"], 2).unwrap();
        assert!(!swap.is_identity());
        let hc = h.compose(&swap).unwrap();
        assert_eq!(hc.eval(&Point(vec![3.0, 5.0])).unwrap(), 30.0);
        let twice = swap.compose(&swap).unwrap();
        assert_eq!(twice.apply(&[3.0, 5.0]).unwrap(), vec![6.0, 10.0]);
        assert!(EndoMap::parse(&["x1"], 2).is_ok());
        assert!(EndoMap::parse_between(&["x1"], 2, 2).is_err());
    }
}
