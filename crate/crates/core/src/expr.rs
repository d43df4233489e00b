//! Scalar arithmetic expressions over `x`, `y`, `z` and named parameters.
//!
//! Parsing is a small Pratt parser. Precedence from loosest to tightest is
//! `+ -`, `* /`, unary `-`, `^`; `^` associates to the right.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("missing binding for `{0}`")]
    MissingBinding(String),
    #[error("numeric overflow: expression evaluated to {0}")]
    NumericOverflow(f64),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    Z,
    Param(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Abs,
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    /// (left, right) binding power.
    fn binding_power(self) -> (u8, u8) {
        match self {
            BinOp::Add | BinOp::Sub => (1, 2),
            BinOp::Mul | BinOp::Div => (3, 4),
            BinOp::Pow => (8, 7),
        }
    }
}

const PREFIX_NEG_BP: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
}

/// A parsed expression together with the parameter names its `Var::Param`
/// indices refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    params: Vec<String>,
}

impl Expression {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn param_names(&self) -> &[String] {
        &self.params
    }

    pub fn from_node(root: Node, params: Vec<String>) -> Self {
        Expression { root, params }
    }

    /// Evaluates with named bindings. Every variable used must be bound.
    pub fn evaluate(&self, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
        let lookup = |name: &str| {
            bindings
                .get(name)
                .copied()
                .ok_or_else(|| EvalError::MissingBinding(name.to_string()))
        };
        let mut used = [false; 3];
        let mut used_params = vec![false; self.params.len()];
        mark_used(&self.root, &mut used, &mut used_params);
        let xyz_names = ["x", "y", "z"];
        let mut xyz = [0.0; 3];
        for k in 0..3 {
            if used[k] {
                xyz[k] = lookup(xyz_names[k])?;
            }
        }
        let mut pvals = vec![0.0; self.params.len()];
        for (i, name) in self.params.iter().enumerate() {
            if used_params[i] {
                pvals[i] = lookup(name)?;
            }
        }
        self.eval(xyz, &pvals)
    }

    /// Fast path: `xyz` and parameter values in declaration order.
    pub fn eval(&self, xyz: [f64; 3], params: &[f64]) -> Result<f64, EvalError> {
        let v = eval_node(&self.root, &xyz, params)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NumericOverflow(v))
        }
    }
}

fn mark_used(node: &Node, used: &mut [bool; 3], params: &mut [bool]) {
    match node {
        Node::Num(_) => {}
        Node::Var(Var::X) => used[0] = true,
        Node::Var(Var::Y) => used[1] = true,
        Node::Var(Var::Z) => used[2] = true,
        Node::Var(Var::Param(i)) => params[*i] = true,
        Node::Neg(a) | Node::Call(_, a) => mark_used(a, used, params),
        Node::Bin(_, a, b) => {
            mark_used(a, used, params);
            mark_used(b, used, params);
        }
    }
}

fn eval_node(node: &Node, xyz: &[f64; 3], params: &[f64]) -> Result<f64, EvalError> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(Var::X) => xyz[0],
        Node::Var(Var::Y) => xyz[1],
        Node::Var(Var::Z) => xyz[2],
        Node::Var(Var::Param(i)) => params[*i],
        Node::Neg(a) => -eval_node(a, xyz, params)?,
        Node::Call(f, a) => {
            let v = eval_node(a, xyz, params)?;
            match f {
                Func::Abs => v.abs(),
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(EvalError::Domain(format!("sqrt of negative value {v}")));
                    }
                    v.sqrt()
                }
            }
        }
        Node::Bin(op, a, b) => {
            let l = eval_node(a, xyz, params)?;
            let r = eval_node(b, xyz, params)?;
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => l / r,
                BinOp::Pow => {
                    if l < 0.0 && r.fract() != 0.0 {
                        return Err(EvalError::Domain(format!(
                            "negative base {l} raised to non-integer power {r}"
                        )));
                    }
                    l.powf(r)
                }
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
    }

    /// Returns the token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let Some(&c) = bytes.get(start) else {
            return Ok((Tok::End, start));
        };
        let c = c as char;
        if c.is_ascii_digit() || (c == '.' && bytes.get(start + 1).is_some_and(u8::is_ascii_digit)) {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &self.src[start..end];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            self.pos = end;
            return Ok((Tok::Num(value), start));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or(c);
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        self.pos = start + 1;
        Ok((tok, start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: (Tok, usize),
    params: &'a [String],
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(Tok, usize), ParseError> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.peeked, next))
    }

    fn expr(&mut self, min_bp: u8) -> Result<Node, ParseError> {
        let (tok, offset) = self.bump()?;
        let mut lhs = match tok {
            Tok::Num(v) => Node::Num(v),
            Tok::Op('-') => Node::Neg(Box::new(self.expr(PREFIX_NEG_BP)?)),
            Tok::LParen => {
                let inner = self.expr(0)?;
                self.expect_rparen()?;
                inner
            }
            Tok::Ident(name) => self.ident(name, offset)?,
            Tok::End => {
                return Err(ParseError::Syntax {
                    offset,
                    message: "unexpected end of input".into(),
                })
            }
            other => {
                return Err(ParseError::Syntax {
                    offset,
                    message: format!("expected operand, found {}", describe(&other)),
                })
            }
        };
        loop {
            let op = match &self.peeked.0 {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                Tok::Op('^') => BinOp::Pow,
                Tok::End | Tok::RParen => break,
                other => {
                    return Err(ParseError::Syntax {
                        offset: self.peeked.1,
                        message: format!("expected operator, found {}", describe(other)),
                    })
                }
            };
            let (lbp, rbp) = op.binding_power();
            if lbp < min_bp {
                break;
            }
            self.bump()?;
            let rhs = self.expr(rbp)?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<Node, ParseError> {
        if let Some(func) = Func::from_name(&name) {
            if self.peeked.0 != Tok::LParen {
                return Err(ParseError::Syntax {
                    offset: self.peeked.1,
                    message: format!("expected `(` after function `{name}`"),
                });
            }
            self.bump()?;
            let arg = self.expr(0)?;
            self.expect_rparen()?;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        let var = match name.as_str() {
            "x" => Var::X,
            "y" => Var::Y,
            "z" => Var::Z,
            _ => match self.params.iter().position(|p| *p == name) {
                Some(i) => Var::Param(i),
                None => return Err(ParseError::UnknownIdentifier { name, offset }),
            },
        };
        Ok(Node::Var(var))
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let (tok, offset) = self.bump()?;
        if tok == Tok::RParen {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                offset,
                message: format!("expected `)`, found {}", describe(&tok)),
            })
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parses `text`; identifiers other than `x`, `y`, `z` and the function
/// names must appear in `param_names`.
pub fn parse<S: AsRef<str>>(text: &str, param_names: &[S]) -> Result<Expression, ParseError> {
    let params: Vec<String> = param_names.iter().map(|s| s.as_ref().to_string()).collect();
    for (i, p) in params.iter().enumerate() {
        let valid = p.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid || matches!(p.as_str(), "x" | "y" | "z") || Func::from_name(p).is_some() {
            return Err(ParseError::Syntax {
                offset: 0,
                message: format!("invalid parameter name `{p}` (position {i})"),
            });
        }
    }
    if text.trim().is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut lexer = Lexer { src: text, pos: 0 };
    let first = lexer.next()?;
    let mut parser = Parser {
        lexer,
        peeked: first,
        params: &params,
    };
    let root = parser.expr(0)?;
    match &parser.peeked {
        (Tok::End, _) => Ok(Expression { root, params }),
        (tok, offset) => Err(ParseError::Syntax {
            offset: *offset,
            message: format!("unexpected {}", describe(tok)),
        }),
    }
}

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Bin(BinOp::Pow, ..) => 4,
        Node::Num(_) | Node::Var(_) | Node::Call(..) => 5,
    }
}

struct Printer<'a> {
    node: &'a Node,
    params: &'a [String],
}

impl Printer<'_> {
    fn child<'b>(&'b self, node: &'b Node) -> Printer<'b> {
        Printer {
            node,
            params: self.params,
        }
    }

    fn wrapped(&self, f: &mut fmt::Formatter<'_>, node: &Node, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({})", self.child(node))
        } else {
            write!(f, "{}", self.child(node))
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Node::Num(v) if *v < 0.0 || v.is_sign_negative() => write!(f, "({v:?})"),
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var(Var::X) => f.write_str("x"),
            Node::Var(Var::Y) => f.write_str("y"),
            Node::Var(Var::Z) => f.write_str("z"),
            Node::Var(Var::Param(i)) => f.write_str(&self.params[*i]),
            Node::Neg(a) => {
                f.write_str("-")?;
                self.wrapped(f, a, precedence(a) < 3)
            }
            Node::Call(func, a) => write!(f, "{}({})", func.name(), self.child(a)),
            Node::Bin(op, a, b) => {
                let p = precedence(self.node);
                let (lp, rp) = (precedence(a), precedence(b));
                let left_parens = if *op == BinOp::Pow { lp <= p } else { lp < p };
                let right_parens = if *op == BinOp::Pow { rp < p } else { rp <= p };
                self.wrapped(f, a, left_parens)?;
                write!(f, " {} ", op.symbol())?;
                self.wrapped(f, b, right_parens)
            }
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer {
            node: &self.root,
            params: &self.params,
        }
        .fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(v: Var) -> Box<Node> {
        Box::new(Node::Var(v))
    }

    fn bind(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn example_family_first_equation() {
        let e = parse("-a*y + z/a", &["a"]).unwrap();
        let a = Var::Param(0);
        let expected = Node::Bin(
            BinOp::Add,
            Box::new(Node::Bin(BinOp::Mul, Box::new(Node::Neg(var(a))), var(Var::Y))),
            Box::new(Node::Bin(BinOp::Div, var(Var::Z), var(a))),
        );
        assert_eq!(*e.root(), expected);
        let v = e
            .evaluate(&bind(&[("a", 3.0), ("x", 0.0), ("y", 1.0), ("z", 0.0)]))
            .unwrap();
        assert_eq!(v, -3.0);
    }

    #[test]
    fn single_variable() {
        assert_eq!(*parse::<&str>("x", &[]).unwrap().root(), Node::Var(Var::X));
    }

    #[test]
    fn error_offsets() {
        let err = parse::<&str>("x + * y", &[]).unwrap_err();
        assert_eq!(err.offset(), 4);
        assert!(matches!(err, ParseError::Syntax { .. }));
        let err = parse::<&str>("x + q", &[]).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "q".into(),
                offset: 4
            }
        );
        assert_eq!(parse::<&str>("(x + y", &[]).unwrap_err().offset(), 6);
        assert_eq!(parse::<&str>("x y", &[]).unwrap_err().offset(), 2);
        assert_eq!(parse::<&str>("sin x", &[]).unwrap_err().offset(), 4);
        assert_eq!(parse::<&str>("x # 1", &[]).unwrap_err().offset(), 2);
        assert_eq!(parse::<&str>("x)", &[]).unwrap_err().offset(), 1);
        assert!(parse::<&str>("   ", &[]).is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let ev = |s: &str| parse::<&str>(s, &[]).unwrap().evaluate(&HashMap::new()).unwrap();
        assert_eq!(ev("2+3*4"), 14.0);
        assert_eq!(ev("2^3^2"), 512.0);
        assert_eq!(ev("10-4-3"), 3.0);
        assert_eq!(ev("64/4/2"), 8.0);
        assert_eq!(ev("-2^2"), -4.0);
        assert_eq!(ev("2^-1"), 0.5);
        assert_eq!(ev("(2+3)*4"), 20.0);
        assert_eq!(ev("1.5e-3*1e3"), 1.5);
        assert_eq!(ev("--3"), 3.0);
        assert_eq!(ev("2*-3"), -6.0);
        assert_eq!(ev(".5 + 0.25"), 0.75);
    }

    #[test]
    fn functions_and_bindings() {
        let e = parse::<&str>("abs(z)", &[]).unwrap();
        assert_eq!(e.evaluate(&bind(&[("z", -2.0), ("x", 0.0), ("y", 0.0)])).unwrap(), 2.0);
        let e = parse::<&str>("x + 1", &[]).unwrap();
        assert_eq!(e.evaluate(&bind(&[("x", 0.0), ("y", 0.0), ("z", 0.0)])).unwrap(), 1.0);
        let e = parse::<&str>("sqrt(4) + exp(0) + cos(0) + sin(0)", &[]).unwrap();
        assert_eq!(e.evaluate(&HashMap::new()).unwrap(), 4.0);
    }

    #[test]
    fn evaluation_errors() {
        let e = parse::<&str>("x + y", &[]).unwrap();
        assert_eq!(
            e.evaluate(&bind(&[("x", 1.0)])).unwrap_err(),
            EvalError::MissingBinding("y".into())
        );
        let e = parse::<&str>("1/x", &[]).unwrap();
        assert!(matches!(
            e.evaluate(&bind(&[("x", 0.0)])).unwrap_err(),
            EvalError::NumericOverflow(_)
        ));
        let e = parse::<&str>("x^0.5", &[]).unwrap();
        assert!(matches!(e.evaluate(&bind(&[("x", -2.0)])).unwrap_err(), EvalError::Domain(_)));
        assert_eq!(e.evaluate(&bind(&[("x", 4.0)])).unwrap(), 2.0);
        let e = parse::<&str>("x^3", &[]).unwrap();
        assert_eq!(e.evaluate(&bind(&[("x", -2.0)])).unwrap(), -8.0);
    }

    #[test]
    fn pretty_print_round_trip_fixtures() {
        for text in [
            "-a*y + z/a",
            "x + 1",
            "a - (b - x)",
            "(x ^ y) ^ z",
            "x ^ y ^ z",
            "-(x + y)",
            "(-x) ^ 2",
            "-x ^ 2",
            "x - -y",
            "2 ^ -x",
            "abs(z) * sin(x - y) / (1 + exp(-x))",
            "1e-7 * x + 1e16",
        ] {
            let e = parse(text, &["a", "b"]).unwrap();
            let printed = e.to_string();
            let again = parse(&printed, &["a", "b"]).unwrap();
            assert_eq!(e, again, "{text} -> {printed}");
        }
        let e = parse::<&str>("x", &[]).unwrap();
        assert_eq!(e.to_string(), "x");
    }
}
