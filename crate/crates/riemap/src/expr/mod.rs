//! Closed-form scalar expressions of chart coordinates with exact first
//! and second derivatives.
//!
//! A [`ScalarExpr`] is an immutable AST over coordinates `x1..xn`, named
//! parameters and the usual elementary functions. Evaluation either
//! produces a plain value ([`ScalarExpr::eval`]) or a full second-order
//! jet ([`ScalarExpr::eval_jet2`]); the jet path is pure forward-mode
//! propagation, not finite differences. Expressions are evaluated exactly
//! as written — there is no simplification pass — so results are
//! bit-reproducible across runs.

mod jet;
mod parser;

pub use jet::Jet2;

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Parameter environment: named constants bound at evaluation time.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdent { offset: usize, name: String },
    #[error("coordinate x{index} out of range at offset {offset} (chart dimension {dim})")]
    CoordOutOfRange {
        offset: usize,
        index: usize,
        dim: usize,
    },
    #[error("domain error in '{subexpr}': {detail}")]
    Domain { subexpr: String, detail: String },
    #[error("point has {got} coordinates, chart dimension is {dim}")]
    PointDim { got: usize, dim: usize },
    #[error("parameter '{0}' is not bound")]
    UnboundParam(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnaryFn {
    Neg,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Exp,
    Ln,
    Sqrt,
}

impl UnaryFn {
    fn from_name(name: &str) -> Option<UnaryFn> {
        Some(match name {
            "sin" => UnaryFn::Sin,
            "cos" => UnaryFn::Cos,
            "tan" => UnaryFn::Tan,
            "sinh" => UnaryFn::Sinh,
            "cosh" => UnaryFn::Cosh,
            "exp" => UnaryFn::Exp,
            "ln" => UnaryFn::Ln,
            "sqrt" => UnaryFn::Sqrt,
            _ => return None,
        })
    }

    fn name(&self) -> &'static str {
        match self {
            UnaryFn::Neg => "-",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Tan => "tan",
            UnaryFn::Sinh => "sinh",
            UnaryFn::Cosh => "cosh",
            UnaryFn::Exp => "exp",
            UnaryFn::Ln => "ln",
            UnaryFn::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    Coord(usize),
    Param(String),
    Unary(UnaryFn, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
}

impl Node {
    fn add(a: Node, b: Node) -> Node {
        Node::Binary(BinOp::Add, Box::new(a), Box::new(b))
    }
    fn sub(a: Node, b: Node) -> Node {
        Node::Binary(BinOp::Sub, Box::new(a), Box::new(b))
    }
    fn mul(a: Node, b: Node) -> Node {
        Node::Binary(BinOp::Mul, Box::new(a), Box::new(b))
    }
    fn div(a: Node, b: Node) -> Node {
        Node::Binary(BinOp::Div, Box::new(a), Box::new(b))
    }
    fn pow(a: Node, b: Node) -> Node {
        Node::Binary(BinOp::Pow, Box::new(a), Box::new(b))
    }

    fn references_coord(&self) -> bool {
        match self {
            Node::Const(_) | Node::Param(_) => false,
            Node::Coord(_) => true,
            Node::Unary(_, a) => a.references_coord(),
            Node::Binary(_, a, b) => a.references_coord() || b.references_coord(),
        }
    }
}

/// A parsed scalar function of chart coordinates. Immutable after parse;
/// safe to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    root: Node,
    dim: usize,
}

impl ScalarExpr {
    /// Parse `text` against a chart of dimension `dim`. `params` supplies
    /// the set of admissible parameter names (values are looked up again
    /// at evaluation time).
    pub fn parse(text: &str, dim: usize, params: &Params) -> Result<ScalarExpr, ExprError> {
        let root = parser::Parser::parse(text, dim, params)?;
        Ok(ScalarExpr { root, dim })
    }

    pub fn constant(value: f64, dim: usize) -> ScalarExpr {
        ScalarExpr {
            root: Node::Const(value),
            dim,
        }
    }

    /// The coordinate function x_{i+1} (0-based index).
    pub fn coordinate(i: usize, dim: usize) -> ScalarExpr {
        assert!(i < dim, "coordinate index out of range");
        ScalarExpr {
            root: Node::Coord(i),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self.root, Node::Const(c) if c == 0.0)
    }

    pub fn add(&self, rhs: &ScalarExpr) -> ScalarExpr {
        assert_eq!(self.dim, rhs.dim);
        ScalarExpr {
            root: Node::add(self.root.clone(), rhs.root.clone()),
            dim: self.dim,
        }
    }

    pub fn sub(&self, rhs: &ScalarExpr) -> ScalarExpr {
        assert_eq!(self.dim, rhs.dim);
        ScalarExpr {
            root: Node::sub(self.root.clone(), rhs.root.clone()),
            dim: self.dim,
        }
    }

    pub fn mul(&self, rhs: &ScalarExpr) -> ScalarExpr {
        assert_eq!(self.dim, rhs.dim);
        ScalarExpr {
            root: Node::mul(self.root.clone(), rhs.root.clone()),
            dim: self.dim,
        }
    }

    pub fn neg(&self) -> ScalarExpr {
        ScalarExpr {
            root: Node::Unary(UnaryFn::Neg, Box::new(self.root.clone())),
            dim: self.dim,
        }
    }

    /// Plain value evaluation. Independent of the jet path; used by the
    /// finite-difference oracles in the test suite.
    pub fn eval(&self, point: &[f64], params: &Params) -> Result<f64, ExprError> {
        if point.len() != self.dim {
            return Err(ExprError::PointDim {
                got: point.len(),
                dim: self.dim,
            });
        }
        eval_value(&self.root, point, params)
    }

    /// Value, gradient and Hessian at `point` by one forward pass.
    pub fn eval_jet2(&self, point: &[f64], params: &Params) -> Result<Jet2, ExprError> {
        if point.len() != self.dim {
            return Err(ExprError::PointDim {
                got: point.len(),
                dim: self.dim,
            });
        }
        eval_jet(&self.root, point, params)
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, 0)
    }
}

fn domain_err(node: &Node, detail: &str) -> ExprError {
    ExprError::Domain {
        subexpr: node_to_string(node),
        detail: detail.to_owned(),
    }
}

fn eval_value(node: &Node, p: &[f64], params: &Params) -> Result<f64, ExprError> {
    Ok(match node {
        Node::Const(c) => *c,
        Node::Coord(i) => p[*i],
        Node::Param(name) => *params
            .get(name)
            .ok_or_else(|| ExprError::UnboundParam(name.clone()))?,
        Node::Unary(func, a) => {
            let u = eval_value(a, p, params)?;
            match func {
                UnaryFn::Neg => -u,
                UnaryFn::Sin => u.sin(),
                UnaryFn::Cos => u.cos(),
                UnaryFn::Tan => {
                    let t = u.tan();
                    if !t.is_finite() {
                        return Err(domain_err(node, "tan pole"));
                    }
                    t
                }
                UnaryFn::Sinh => u.sinh(),
                UnaryFn::Cosh => u.cosh(),
                UnaryFn::Exp => u.exp(),
                UnaryFn::Ln => {
                    if u <= 0.0 {
                        return Err(domain_err(node, &format!("ln of non-positive value {u}")));
                    }
                    u.ln()
                }
                UnaryFn::Sqrt => {
                    if u < 0.0 {
                        return Err(domain_err(node, &format!("sqrt of negative value {u}")));
                    }
                    u.sqrt()
                }
            }
        }
        Node::Binary(op, a, b) => {
            let x = eval_value(a, p, params)?;
            let y = eval_value(b, p, params)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(domain_err(node, "division by zero"));
                    }
                    x / y
                }
                BinOp::Pow => {
                    if b.references_coord() {
                        if x <= 0.0 {
                            return Err(domain_err(
                                node,
                                "base must be positive for a variable exponent",
                            ));
                        }
                        (y * x.ln()).exp()
                    } else {
                        let v = x.powf(y);
                        if !v.is_finite() {
                            return Err(domain_err(node, "power is not finite"));
                        }
                        v
                    }
                }
            }
        }
    })
}

fn eval_jet(node: &Node, p: &[f64], params: &Params) -> Result<Jet2, ExprError> {
    let n = p.len();
    Ok(match node {
        Node::Const(c) => Jet2::constant(*c, n),
        Node::Coord(i) => Jet2::coordinate(p[*i], *i, n),
        Node::Param(name) => Jet2::constant(
            *params
                .get(name)
                .ok_or_else(|| ExprError::UnboundParam(name.clone()))?,
            n,
        ),
        Node::Unary(func, a) => {
            let u = eval_jet(a, p, params)?;
            let out = match func {
                UnaryFn::Neg => u.neg(),
                UnaryFn::Sin => u.sin(),
                UnaryFn::Cos => u.cos(),
                UnaryFn::Tan => u.tan(),
                UnaryFn::Sinh => u.sinh(),
                UnaryFn::Cosh => u.cosh(),
                UnaryFn::Exp => u.exp(),
                UnaryFn::Ln => {
                    if u.value <= 0.0 {
                        return Err(domain_err(
                            node,
                            &format!("ln of non-positive value {}", u.value),
                        ));
                    }
                    u.ln()
                }
                UnaryFn::Sqrt => {
                    if u.value < 0.0 {
                        return Err(domain_err(
                            node,
                            &format!("sqrt of negative value {}", u.value),
                        ));
                    }
                    u.sqrt()
                }
            };
            if !out.is_finite() {
                return Err(domain_err(node, "derivative is not finite"));
            }
            out
        }
        Node::Binary(op, a, b) => {
            let x = eval_jet(a, p, params)?;
            let y = eval_jet(b, p, params)?;
            let out = match op {
                BinOp::Add => x.add(&y),
                BinOp::Sub => x.sub(&y),
                BinOp::Mul => x.mul(&y),
                BinOp::Div => {
                    if y.value == 0.0 {
                        return Err(domain_err(node, "division by zero"));
                    }
                    x.div(&y)
                }
                BinOp::Pow => {
                    if b.references_coord() {
                        if x.value <= 0.0 {
                            return Err(domain_err(
                                node,
                                "base must be positive for a variable exponent",
                            ));
                        }
                        x.pow_jet(&y)
                    } else {
                        x.pow_const(y.value)
                    }
                }
            };
            if !out.is_finite() {
                return Err(domain_err(node, "result is not finite"));
            }
            out
        }
    })
}

fn node_to_string(node: &Node) -> String {
    struct D<'a>(&'a Node);
    impl fmt::Display for D<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write_node(f, self.0, 0)
        }
    }
    format!("{}", D(node))
}

/// Precedence-aware printer; output re-parses to an equivalent AST.
fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, parent_prec: u8) -> fmt::Result {
    let prec = match node {
        Node::Const(_) | Node::Coord(_) | Node::Param(_) => 5,
        Node::Unary(UnaryFn::Neg, _) => 2,
        Node::Unary(..) => 5,
        Node::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Binary(BinOp::Pow, ..) => 3,
    };
    let need_paren = prec < parent_prec;
    if need_paren {
        write!(f, "(")?;
    }
    match node {
        Node::Const(c) => {
            if *c < 0.0 {
                write!(f, "({c})")?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Node::Coord(i) => write!(f, "x{}", i + 1)?,
        Node::Param(name) => write!(f, "{name}")?,
        Node::Unary(UnaryFn::Neg, a) => {
            write!(f, "-")?;
            write_node(f, a, 3)?;
        }
        Node::Unary(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, 0)?;
            write!(f, ")")?;
        }
        Node::Binary(op, a, b) => {
            let (sym, lp, rp) = match op {
                BinOp::Add => ("+", 1, 1),
                BinOp::Sub => ("-", 1, 2),
                BinOp::Mul => ("*", 2, 2),
                BinOp::Div => ("/", 2, 3),
                // right-associative: parenthesize an additive/multiplicative
                // left operand, keep the right operand loose
                BinOp::Pow => ("^", 4, 3),
            };
            write_node(f, a, lp)?;
            write!(f, " {sym} ")?;
            write_node(f, b, rp)?;
        }
    }
    if need_paren {
        write!(f, ")")?;
    }
    Ok(())
}

/// A tangent-vector field given by one component expression per chart
/// coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub components: Vec<ScalarExpr>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarExpr>) -> VectorField {
        assert!(!components.is_empty());
        let dim = components[0].dim();
        assert!(
            components.iter().all(|c| c.dim() == dim),
            "mixed chart dimensions in vector field"
        );
        VectorField { components }
    }

    /// Constant field with the given coefficients.
    pub fn constant(coeffs: &[f64], dim: usize) -> VectorField {
        VectorField {
            components: coeffs
                .iter()
                .map(|&c| ScalarExpr::constant(c, dim))
                .collect(),
        }
    }

    /// The coordinate field ∂/∂x_{i+1}.
    pub fn coordinate(i: usize, dim: usize) -> VectorField {
        let mut coeffs = vec![0.0; dim];
        coeffs[i] = 1.0;
        VectorField::constant(&coeffs, dim)
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn value_at(
        &self,
        p: &[f64],
        params: &Params,
    ) -> Result<nalgebra::DVector<f64>, ExprError> {
        let mut out = nalgebra::DVector::zeros(self.components.len());
        for (k, c) in self.components.iter().enumerate() {
            out[k] = c.eval(p, params)?;
        }
        Ok(out)
    }

    /// Matrix-of-expressions times vector-of-expressions, at the AST level.
    /// Entry `matrix[row][col]` multiplies component `col`.
    pub fn matrix_apply(matrix: &[Vec<ScalarExpr>], v: &VectorField) -> VectorField {
        let dim = v.dim();
        let components = matrix
            .iter()
            .map(|row| {
                assert_eq!(row.len(), v.len());
                let mut acc = ScalarExpr::constant(0.0, dim);
                for (entry, comp) in row.iter().zip(&v.components) {
                    if entry.is_zero_literal() || comp.is_zero_literal() {
                        continue;
                    }
                    acc = acc.add(&entry.mul(comp));
                }
                acc
            })
            .collect();
        VectorField { components }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_params() -> Params {
        Params::new()
    }

    #[test]
    fn parses_and_evaluates_polynomial_with_sin() {
        let e = ScalarExpr::parse("x1^2 + sin(x2)", 2, &no_params()).unwrap();
        assert_eq!(e.eval(&[2.0, 0.0], &no_params()).unwrap(), 4.0);
    }

    #[test]
    fn parses_chart_component() {
        let e = ScalarExpr::parse("exp(x1)*cos(x3)", 4, &no_params()).unwrap();
        let v = e.eval(&[0.0, 0.0, 0.0, 0.0], &no_params()).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn syntax_error_carries_byte_offset() {
        let err = ScalarExpr::parse("x1 + * 2", 2, &no_params()).unwrap_err();
        match err {
            ExprError::Syntax { offset, .. } => assert_eq!(offset, 5),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn coordinate_out_of_range_rejected() {
        let err = ScalarExpr::parse("x3", 2, &no_params()).unwrap_err();
        assert!(matches!(err, ExprError::CoordOutOfRange { index: 3, .. }));
    }

    #[test]
    fn unknown_identifier_rejected() {
        let err = ScalarExpr::parse("q + 1", 2, &no_params()).unwrap_err();
        assert!(matches!(err, ExprError::UnknownIdent { .. }));
    }

    #[test]
    fn unary_minus_binds_looser_than_pow() {
        let e = ScalarExpr::parse("-x1^2", 1, &no_params()).unwrap();
        assert_eq!(e.eval(&[3.0], &no_params()).unwrap(), -9.0);
    }

    #[test]
    fn pow_right_associative() {
        let e = ScalarExpr::parse("2^3^2", 1, &no_params()).unwrap();
        assert_eq!(e.eval(&[0.0], &no_params()).unwrap(), 512.0);
    }

    #[test]
    fn constant_exponent_allows_negative_base() {
        let e = ScalarExpr::parse("x1^2", 1, &no_params()).unwrap();
        let j = e.eval_jet2(&[-0.5], &no_params()).unwrap();
        assert_eq!(j.value, 0.25);
        assert_eq!(j.grad[0], -1.0);
        assert_eq!(j.hess[(0, 0)], 2.0);
    }

    #[test]
    fn param_pow_is_constant_exponent() {
        let mut params = Params::new();
        params.insert("a".to_owned(), 0.3);
        let e = ScalarExpr::parse("pi^a", 1, &params).unwrap();
        let v = e.eval(&[0.0], &params).unwrap();
        assert!((v - std::f64::consts::PI.powf(0.3)).abs() < 1e-15);
    }

    #[test]
    fn ln_domain_error_names_subexpression() {
        let e = ScalarExpr::parse("ln(x1)", 1, &no_params()).unwrap();
        let err = e.eval(&[-1.0], &no_params()).unwrap_err();
        match err {
            ExprError::Domain { subexpr, .. } => assert!(subexpr.contains("ln")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn jet_of_product_matches_hand_values() {
        let e = ScalarExpr::parse("x1*x2", 2, &no_params()).unwrap();
        let j = e.eval_jet2(&[3.0, 5.0], &no_params()).unwrap();
        assert_eq!(j.value, 15.0);
        assert_eq!(j.grad[0], 5.0);
        assert_eq!(j.grad[1], 3.0);
        assert_eq!(j.hess[(0, 1)], 1.0);
    }

    #[test]
    fn display_round_trips() {
        let src = "-x1^2 + sin(x2)*exp(x1/3) - 2/(x2 - 4)";
        let e = ScalarExpr::parse(src, 2, &no_params()).unwrap();
        let printed = format!("{e}");
        let e2 = ScalarExpr::parse(&printed, 2, &no_params()).unwrap();
        for p in [[0.3, 0.7], [-1.2, 2.5], [0.0, 1.0]] {
            let a = e.eval(&p, &no_params()).unwrap();
            let b = e2.eval(&p, &no_params()).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "round-trip changed value at {p:?}");
        }
    }
}
