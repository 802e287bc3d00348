//! A small arithmetic-expression language for operator components and
//! integral kernels.
//!
//! Precedence from loosest to tightest: `+ -`, `* /`, unary `-`, `^`.
//! Exponentiation is right-associative and its right operand may carry a
//! unary minus (`2^-1`). Functions: `sin cos exp log sqrt abs`.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable '{name}' at position {pos}")]
    UnknownVariable { name: String, pos: usize },
    #[error("domain error in `{node}`: {msg}")]
    Domain { node: String, msg: String },
    #[error("variable '{0}' is not bound")]
    Unbound(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Expression tree. Variables carry the slot they were resolved to at parse
/// time, so evaluation against a value slice needs no lookups.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Lit(f64),
    Var { name: String, slot: usize },
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; it re-parses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v:?}"),
            Expr::Var { name, .. } => write!(f, "{name}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

impl Expr {
    /// Evaluates with `values[slot]` bound to each variable.
    pub fn eval_slots(&self, values: &[f64]) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Lit(v) => *v,
            Expr::Var { name, slot } => *values.get(*slot).ok_or_else(|| ExprError::Unbound(name.clone()))?,
            Expr::Neg(e) => -e.eval_slots(values)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval_slots(values)?;
                let y = b.eval_slots(values)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(self.domain("division by zero"));
                        }
                        x / y
                    }
                    BinOp::Pow => x.powf(y),
                }
            }
            Expr::Call(func, e) => {
                let x = e.eval_slots(values)?;
                match func {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Abs => x.abs(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(self.domain(&format!("log of nonpositive value {x}")));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(self.domain(&format!("sqrt of negative value {x}")));
                        }
                        x.sqrt()
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(self.domain("non-finite result"));
        }
        Ok(v)
    }

    fn domain(&self, msg: &str) -> ExprError {
        ExprError::Domain { node: self.to_string(), msg: msg.to_string() }
    }

    /// Names of the variables referenced, in first-occurrence order.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var { name, .. } => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

/// Parses `text`, resolving identifiers against `allowed_vars`.
pub fn parse_expr(text: &str, allowed_vars: &[&str]) -> Result<Expr, ExprError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0, vars: allowed_vars, end: text.len() };
    if p.tokens.is_empty() {
        return Err(ExprError::Syntax { pos: 0, msg: "empty expression".into() });
    }
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(ExprError::Syntax { pos: t.pos, msg: format!("unexpected {}", t.kind) });
    }
    Ok(e)
}

/// Evaluates against named bindings.
pub fn eval_expr(e: &Expr, bindings: &HashMap<String, f64>) -> Result<f64, ExprError> {
    let mut slots: Vec<(usize, f64)> = Vec::new();
    bind_slots(e, bindings, &mut slots)?;
    let len = slots.iter().map(|(s, _)| s + 1).max().unwrap_or(0);
    let mut values = vec![f64::NAN; len];
    for (s, v) in slots {
        values[s] = v;
    }
    e.eval_slots(&values)
}

fn bind_slots(e: &Expr, bindings: &HashMap<String, f64>, out: &mut Vec<(usize, f64)>) -> Result<(), ExprError> {
    match e {
        Expr::Lit(_) => Ok(()),
        Expr::Var { name, slot } => {
            let v = bindings.get(name).ok_or_else(|| ExprError::Unbound(name.clone()))?;
            out.push((*slot, *v));
            Ok(())
        }
        Expr::Neg(a) | Expr::Call(_, a) => bind_slots(a, bindings, out),
        Expr::Bin(_, a, b) => {
            bind_slots(a, bindings, out)?;
            bind_slots(b, bindings, out)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "number {v}"),
            TokenKind::Ident(s) => write!(f, "identifier '{s}'"),
            TokenKind::Op(c) => write!(f, "'{c}'"),
            TokenKind::LParen => write!(f, "'('"),
            TokenKind::RParen => write!(f, "')'"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 =
                lit.parse().map_err(|_| ExprError::Syntax { pos: start, msg: format!("malformed number '{lit}'") })?;
            tokens.push(Token { kind: TokenKind::Num(v), pos: start });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Ident(text[start..i].to_string()), pos: start });
        } else {
            let kind = match c {
                '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                _ => return Err(ExprError::Syntax { pos: start, msg: format!("unexpected character '{c}'") }),
            };
            tokens.push(Token { kind, pos: start });
            i += c.len_utf8();
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [&'a str],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token { kind: TokenKind::Op(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.next() {
            Some(Token { kind: TokenKind::RParen, .. }) => Ok(()),
            Some(t) => Err(ExprError::Syntax { pos: t.pos, msg: format!("expected ')', found {}", t.kind) }),
            None => Err(ExprError::Syntax { pos: self.end, msg: "expected ')', found end of input".into() }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.next() else {
            return Err(ExprError::Syntax { pos: self.end, msg: "unexpected end of input".into() });
        };
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Lit(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    match self.next() {
                        Some(Token { kind: TokenKind::LParen, .. }) => {}
                        _ => {
                            return Err(ExprError::Syntax {
                                pos: tok.pos,
                                msg: format!("function '{name}' needs a parenthesized argument"),
                            })
                        }
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(slot) => Ok(Expr::Var { name, slot }),
                    None => Err(ExprError::UnknownVariable { name, pos: tok.pos }),
                }
            }
            other => Err(ExprError::Syntax { pos: tok.pos, msg: format!("unexpected {other}") }),
        }
    }
}

/// Variable names `x1..xd` for a `d`-dimensional operator.
pub fn coordinate_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval1(text: &str, x1: f64) -> Result<f64, ExprError> {
        parse_expr(text, &["x1"])?.eval_slots(&[x1])
    }

    #[test]
    fn parses_simple_trees() {
        let e = parse_expr("x1 + 1", &["x1"]).unwrap();
        assert_eq!(
            e,
            Expr::Bin(BinOp::Add, Box::new(Expr::Var { name: "x1".into(), slot: 0 }), Box::new(Expr::Lit(1.0)))
        );
        let e = parse_expr("cos(x1)", &["x1"]).unwrap();
        assert_eq!(e, Expr::Call(Func::Cos, Box::new(Expr::Var { name: "x1".into(), slot: 0 })));
    }

    #[test]
    fn power_is_right_associative() {
        // 2^(3^2) = 2^9
        assert_eq!(parse_expr("2^3^2", &[]).unwrap().eval_slots(&[]).unwrap(), 512.0);
    }

    #[test]
    fn precedence_rules() {
        let ev = |s| parse_expr(s, &[]).unwrap().eval_slots(&[]).unwrap();
        assert_eq!(ev("-2^2"), -4.0);
        assert_eq!(ev("2^-1"), 0.5);
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("1 - 2 - 3"), -4.0);
        assert_eq!(ev("-(3) * 2"), -6.0);
        assert_eq!(ev("1.5e2 + 2E-1"), 150.2);
    }

    #[test]
    fn named_binding_evaluation() {
        let e = parse_expr("x1 + 1", &["x1"]).unwrap();
        let b = HashMap::from([("x1".to_string(), 2.0)]);
        assert_eq!(eval_expr(&e, &b).unwrap(), 3.0);
        assert!(matches!(eval_expr(&e, &HashMap::new()), Err(ExprError::Unbound(_))));
    }

    #[test]
    fn pythagorean_identity() {
        let v = eval1("sin(x1)^2 + cos(x1)^2", 0.77).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors_name_the_node() {
        match eval1("1/x1", 0.0) {
            Err(ExprError::Domain { node, .. }) => assert_eq!(node, "(1.0 / x1)"),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(matches!(eval1("log(x1)", 0.0), Err(ExprError::Domain { .. })));
        assert!(matches!(eval1("log(x1)", -1.0), Err(ExprError::Domain { .. })));
        assert!(matches!(eval1("sqrt(x1)", -1e-3), Err(ExprError::Domain { .. })));
        assert!(matches!(eval1("x1^0.5", -1.0), Err(ExprError::Domain { .. })));
        assert!(matches!(eval1("exp(x1)", 1e4), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn rejects_unknown_identifiers_and_bad_syntax() {
        match parse_expr("x1 + x9", &["x1", "x2"]) {
            Err(ExprError::UnknownVariable { name, pos }) => {
                assert_eq!(name, "x9");
                assert_eq!(pos, 5);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expr("", &[]), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse_expr("1 +", &[]), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse_expr("(1 + 2", &[]), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse_expr("1 2", &[]), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_expr("sin x1", &["x1"]), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse_expr("1 # 2", &[]), Err(ExprError::Syntax { pos: 2, .. })));
    }

    #[test]
    fn kernel_variables() {
        let e = parse_expr("exp(t - s) * s", &["t", "s"]).unwrap();
        assert_eq!(e.variables(), vec!["t".to_string(), "s".to_string()]);
        assert!((e.eval_slots(&[1.0, 0.5]).unwrap() - 0.5 * 0.5f64.exp()).abs() < 1e-15);
    }

    const VARS: [&str; 3] = ["x1", "x2", "t"];

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0..1e6f64).prop_map(Expr::Lit),
            (0usize..3).prop_map(|slot| Expr::Var { name: VARS[slot].to_string(), slot }),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (0usize..6, inner.clone()).prop_map(|(f, e)| Expr::Call(Func::ALL[f], Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let text = e.to_string();
            let back = parse_expr(&text, &VARS).unwrap();
            prop_assert_eq!(back, e);
        }

        #[test]
        fn eval_is_finite_or_domain_error(e in arb_expr(), x in -10.0..10.0f64, y in -10.0..10.0f64) {
            match e.eval_slots(&[x, y, 0.5]) {
                Ok(v) => prop_assert!(v.is_finite()),
                Err(err) => { let is_domain = matches!(err, ExprError::Domain { .. }); prop_assert!(is_domain) },
            }
        }
    }
}
