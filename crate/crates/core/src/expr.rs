//! Arithmetic expressions in one variable `t`.
//!
//! Potentials are supplied as text, parsed once into an [`ExprAst`], and
//! differentiated symbolically so the solver works with closed-form
//! derivatives instead of finite differences. The grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | 't' | 'pi' | 'e' | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus applied to
//! its left operand, so `-t^2` means `-(t^2)` while `t^-2` is legal.

use std::fmt;

use crate::error::CfdoError;

/// Unary functions accepted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

const KNOWN_NAMES: &str = "t, pi, e, sin, cos, tan, exp, log, sqrt, abs";

/// Immutable expression tree. Shareable across threads after construction.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Num(f64),
    /// The single variable `t`.
    Var,
    Pi,
    E,
    Neg(Box<ExprAst>),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    Div(Box<ExprAst>, Box<ExprAst>),
    Pow(Box<ExprAst>, Box<ExprAst>),
    Func(Func, Box<ExprAst>),
}

/// Parse failure with the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
    pub expected: Vec<&'static str>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.offset, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Evaluation failure carrying the offending subexpression.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub subexpr: String,
    pub t: f64,
    pub message: String,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "evaluation error in `{}` at t = {}: {}",
            self.subexpr, self.t, self.message
        )
    }
}

impl std::error::Error for EvalError {}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err(&self, message: impl Into<String>, expected: Vec<&'static str>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.into(),
            expected,
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprAst::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprAst::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ExprAst::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ExprAst::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<ExprAst, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(ExprAst::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.factor()?;
            return Ok(ExprAst::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprAst, ParseError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input", vec!["expression"])),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("unclosed parenthesis", vec!["')'"]));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.err(
                format!("unexpected character '{}'", c as char),
                vec!["expression"],
            )),
        }
    }

    fn number(&mut self) -> Result<ExprAst, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos == start || (self.pos == start + 1 && self.src[start] == b'.') {
            self.pos = start;
            return Err(self.err("malformed number", vec!["number"]));
        }
        // Scientific suffix only when unambiguously an exponent: 'e'/'E'
        // followed by optional sign and at least one digit.
        if let Some(&e) = self.src.get(self.pos) {
            if e == b'e' || e == b'E' {
                let mut probe = self.pos + 1;
                if self.src.get(probe) == Some(&b'+') || self.src.get(probe) == Some(&b'-') {
                    probe += 1;
                }
                if self
                    .src
                    .get(probe)
                    .map(|c| c.is_ascii_digit())
                    .unwrap_or(false)
                {
                    probe += 1;
                    while self
                        .src
                        .get(probe)
                        .map(|c| c.is_ascii_digit())
                        .unwrap_or(false)
                    {
                        probe += 1;
                    }
                    self.pos = probe;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(ExprAst::Num(v)),
            _ => {
                self.pos = start;
                Err(self.err(format!("malformed number `{text}`"), vec!["number"]))
            }
        }
    }

    fn identifier(&mut self) -> Result<ExprAst, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        match name {
            "t" => Ok(ExprAst::Var),
            "pi" => Ok(ExprAst::Pi),
            "e" => Ok(ExprAst::E),
            _ => {
                if let Some(func) = Func::from_name(name) {
                    if self.peek() != Some(b'(') {
                        return Err(self.err(
                            format!("function `{name}` requires parenthesized argument"),
                            vec!["'('"],
                        ));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(b')') {
                        return Err(self.err("unclosed function argument", vec!["')'"]));
                    }
                    self.pos += 1;
                    Ok(ExprAst::Func(func, Box::new(arg)))
                } else {
                    self.pos = start;
                    Err(self.err(
                        format!("unknown identifier `{name}`; known names: {KNOWN_NAMES}"),
                        vec!["identifier"],
                    ))
                }
            }
        }
    }
}

/// Parse `source` into an AST.
pub fn parse(source: &str) -> Result<ExprAst, ParseError> {
    let mut p = Parser::new(source);
    if p.peek().is_none() {
        return Err(p.err("empty input", vec!["expression"]));
    }
    let ast = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err(
            "unexpected trailing input",
            vec!["end of input", "operator"],
        ));
    }
    Ok(ast)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

impl ExprAst {
    /// Evaluate at `t`. Deterministic: identical inputs give bit-identical
    /// outputs.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let fail = |node: &ExprAst, message: &str| EvalError {
            subexpr: node.to_string(),
            t,
            message: message.to_string(),
        };
        let v = match self {
            ExprAst::Num(v) => *v,
            ExprAst::Var => t,
            ExprAst::Pi => std::f64::consts::PI,
            ExprAst::E => std::f64::consts::E,
            ExprAst::Neg(a) => -a.eval(t)?,
            ExprAst::Add(a, b) => a.eval(t)? + b.eval(t)?,
            ExprAst::Sub(a, b) => a.eval(t)? - b.eval(t)?,
            ExprAst::Mul(a, b) => a.eval(t)? * b.eval(t)?,
            ExprAst::Div(a, b) => {
                let den = b.eval(t)?;
                if den == 0.0 {
                    return Err(fail(self, "division by zero"));
                }
                a.eval(t)? / den
            }
            ExprAst::Pow(a, b) => {
                let base = a.eval(t)?;
                let expo = b.eval(t)?;
                if base < 0.0 && expo.fract() != 0.0 {
                    return Err(fail(self, "fractional power of a negative base"));
                }
                if base == 0.0 && expo < 0.0 {
                    return Err(fail(self, "zero raised to a negative power"));
                }
                base.powf(expo)
            }
            ExprAst::Func(func, a) => {
                let x = a.eval(t)?;
                match func {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(fail(self, "log of a non-positive value"));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(fail(self, "sqrt of a negative value"));
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(fail(self, "non-finite result"))
        }
    }

    fn prec(&self) -> u8 {
        match self {
            ExprAst::Add(..) | ExprAst::Sub(..) => 1,
            ExprAst::Mul(..) | ExprAst::Div(..) => 2,
            ExprAst::Neg(_) => 3,
            ExprAst::Num(v) if *v < 0.0 => 3,
            ExprAst::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.fmt_prec(f, 0)?;
            return write!(f, ")");
        }
        match self {
            ExprAst::Num(v) => write!(f, "{v}"),
            ExprAst::Var => write!(f, "t"),
            ExprAst::Pi => write!(f, "pi"),
            ExprAst::E => write!(f, "e"),
            ExprAst::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 3)
            }
            ExprAst::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, "+")?;
                b.fmt_prec(f, 2)
            }
            ExprAst::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, "-")?;
                b.fmt_prec(f, 2)
            }
            ExprAst::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)
            }
            ExprAst::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)
            }
            ExprAst::Pow(a, b) => {
                a.fmt_prec(f, 5)?;
                write!(f, "^")?;
                // Exponent position accepts any factor (unary minus, power).
                b.fmt_prec(f, 3)
            }
            ExprAst::Func(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

// ---------------------------------------------------------------------------
// Symbolic differentiation
// ---------------------------------------------------------------------------

/// Literal node.
pub fn num(v: f64) -> ExprAst {
    ExprAst::Num(v)
}

fn is_num(e: &ExprAst, v: f64) -> bool {
    matches!(e, ExprAst::Num(x) if *x == v)
}

/// Sum node, folding additive identities.
pub fn add(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&a, 0.0) {
        return b;
    }
    if is_num(&b, 0.0) {
        return a;
    }
    if let (ExprAst::Num(x), ExprAst::Num(y)) = (&a, &b) {
        return num(x + y);
    }
    ExprAst::Add(Box::new(a), Box::new(b))
}

/// Difference node, folding additive identities.
pub fn sub(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&b, 0.0) {
        return a;
    }
    if is_num(&a, 0.0) {
        return neg(b);
    }
    if let (ExprAst::Num(x), ExprAst::Num(y)) = (&a, &b) {
        return num(x - y);
    }
    ExprAst::Sub(Box::new(a), Box::new(b))
}

/// Product node, folding multiplicative identities and zeros.
pub fn mul(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        return num(0.0);
    }
    if is_num(&a, 1.0) {
        return b;
    }
    if is_num(&b, 1.0) {
        return a;
    }
    if let (ExprAst::Num(x), ExprAst::Num(y)) = (&a, &b) {
        return num(x * y);
    }
    ExprAst::Mul(Box::new(a), Box::new(b))
}

/// Quotient node, folding the unit denominator.
pub fn div(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&a, 0.0) {
        return num(0.0);
    }
    if is_num(&b, 1.0) {
        return a;
    }
    ExprAst::Div(Box::new(a), Box::new(b))
}

/// Power node, folding trivial exponents.
pub fn pow(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&b, 1.0) {
        return a;
    }
    if is_num(&b, 0.0) {
        return num(1.0);
    }
    ExprAst::Pow(Box::new(a), Box::new(b))
}

/// Negation node, folding double negation and literals.
pub fn neg(a: ExprAst) -> ExprAst {
    match a {
        ExprAst::Num(v) => num(-v),
        ExprAst::Neg(inner) => *inner,
        other => ExprAst::Neg(Box::new(other)),
    }
}

/// Symbolic d/dt with local simplification. The correctness contract is
/// semantic (values agree with the analytic derivative), not syntactic.
pub fn differentiate(ast: &ExprAst) -> crate::Result<ExprAst> {
    Ok(match ast {
        ExprAst::Num(_) | ExprAst::Pi | ExprAst::E => num(0.0),
        ExprAst::Var => num(1.0),
        ExprAst::Neg(a) => neg(differentiate(a)?),
        ExprAst::Add(a, b) => add(differentiate(a)?, differentiate(b)?),
        ExprAst::Sub(a, b) => sub(differentiate(a)?, differentiate(b)?),
        ExprAst::Mul(a, b) => add(
            mul(differentiate(a)?, (**b).clone()),
            mul((**a).clone(), differentiate(b)?),
        ),
        ExprAst::Div(a, b) => div(
            sub(
                mul(differentiate(a)?, (**b).clone()),
                mul((**a).clone(), differentiate(b)?),
            ),
            pow((**b).clone(), num(2.0)),
        ),
        ExprAst::Pow(base, expo) => match &**expo {
            // Constant exponent: power rule, valid for negative bases with
            // integer exponents as well.
            ExprAst::Num(c) => mul(
                mul(num(*c), pow((**base).clone(), num(c - 1.0))),
                differentiate(base)?,
            ),
            _ => {
                // f^g = exp(g log f): f^g * (g' log f + g f'/f).
                let f = (**base).clone();
                let g = (**expo).clone();
                let df = differentiate(base)?;
                let dg = differentiate(expo)?;
                mul(
                    pow(f.clone(), g.clone()),
                    add(
                        mul(dg, ExprAst::Func(Func::Log, Box::new(f.clone()))),
                        mul(g, div(df, f)),
                    ),
                )
            }
        },
        ExprAst::Func(func, a) => {
            let da = differentiate(a)?;
            let inner = (**a).clone();
            match func {
                Func::Sin => mul(ExprAst::Func(Func::Cos, Box::new(inner)), da),
                Func::Cos => neg(mul(ExprAst::Func(Func::Sin, Box::new(inner)), da)),
                Func::Tan => div(da, pow(ExprAst::Func(Func::Cos, Box::new(inner)), num(2.0))),
                Func::Exp => mul(ExprAst::Func(Func::Exp, Box::new(inner)), da),
                Func::Log => div(da, inner),
                Func::Sqrt => div(
                    da,
                    mul(num(2.0), ExprAst::Func(Func::Sqrt, Box::new(inner))),
                ),
                Func::Abs => {
                    return Err(CfdoError::Unsupported(format!(
                        "abs is not differentiable: `{ast}`"
                    )))
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn p(src: &str) -> ExprAst {
        parse(src).expect("parse")
    }

    #[test]
    fn grammar_shape() {
        use ExprAst::*;
        let ast = p("0.2*sin(2*t)+0.5");
        let expected = Add(
            Box::new(Mul(
                Box::new(Num(0.2)),
                Box::new(Func(
                    super::Func::Sin,
                    Box::new(Mul(Box::new(Num(2.0)), Box::new(Var))),
                )),
            )),
            Box::new(Num(0.5)),
        );
        assert_eq!(ast, expected);
    }

    #[test]
    fn power_right_associative() {
        use ExprAst::*;
        let ast = p("t^2^3");
        let expected = Pow(
            Box::new(Var),
            Box::new(Pow(Box::new(Num(2.0)), Box::new(Num(3.0)))),
        );
        assert_eq!(ast, expected);
        assert_eq!(ast.eval(2.0).unwrap(), 256.0);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        use ExprAst::*;
        let ast = p("-t^2");
        let expected = Neg(Box::new(Pow(Box::new(Var), Box::new(Num(2.0)))));
        assert_eq!(ast, expected);
        assert_eq!(ast.eval(3.0).unwrap(), -9.0);
        // ...while a negative exponent is accepted on the right.
        assert_eq!(p("t^-2").eval(2.0).unwrap(), 0.25);
    }

    #[test]
    fn empty_function_argument_position() {
        let err = parse("sin()").unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(err.expected.contains(&"expression"));
    }

    #[test]
    fn unknown_identifier_lists_known_names() {
        let err = parse("sinh(t)").unwrap_err();
        assert!(err.message.contains("unknown identifier `sinh`"));
        assert!(err.message.contains("sqrt"));
        assert!(err.message.contains("pi"));
    }

    #[test]
    fn trailing_input_rejected() {
        let err = parse("t 5").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn eval_constants() {
        assert_eq!(p("pi").eval(7.0).unwrap(), std::f64::consts::PI);
        assert_eq!(p("e").eval(0.0).unwrap(), std::f64::consts::E);
        assert_eq!(p("t^2+1").eval(2.0).unwrap(), 5.0);
    }

    #[test]
    fn eval_division_by_zero() {
        let err = p("1/(t-1)").eval(1.0).unwrap_err();
        assert!(err.message.contains("division by zero"));
        assert_eq!(err.subexpr, "1/(t-1)");
    }

    #[test]
    fn eval_domain_errors_carry_subexpression() {
        let err = p("log(t-2)").eval(1.0).unwrap_err();
        assert_eq!(err.subexpr, "log(t-2)");
        let err = p("sqrt(0-t)").eval(4.0).unwrap_err();
        assert!(err.message.contains("sqrt"));
        let err = p("(0-2)^0.5").eval(0.0).unwrap_err();
        assert!(err.message.contains("negative base"));
    }

    #[test]
    fn derivative_power_rule() {
        let d = differentiate(&p("t^2")).unwrap();
        assert_eq!(d.eval(3.0).unwrap(), 6.0);
    }

    #[test]
    fn derivative_chain_rule() {
        let d = differentiate(&p("sin(2*t)")).unwrap();
        assert_eq!(d.eval(0.0).unwrap(), 2.0);
    }

    #[test]
    fn derivative_quotient_at_stationary_point() {
        // d/dt exp(t)/t = exp(t)(t-1)/t^2 vanishes at t = 1.
        let d = differentiate(&p("exp(t)/t")).unwrap();
        assert_eq!(d.eval(1.0).unwrap(), 0.0);
    }

    #[test]
    fn abs_not_differentiable() {
        let err = differentiate(&p("abs(t)")).unwrap_err();
        assert!(matches!(err, CfdoError::Unsupported(_)));
    }

    const CORPUS: &[&str] = &[
        "0.2*sin(2*t)+0.5",
        "cos(t)",
        "t^2+1",
        "exp(t)/t",
        "sqrt(t+1)",
        "log(t+2)",
        "t^0.4/0.4",
        "sin(t)*cos(2*t)+t^3",
        "1/(1+t^2)",
        "exp(-t^2)",
        "t^-2",
        "tan(t/4)",
        "(t+1)^t",
        "-t^2+pi*t",
        "e^t-t^e",
    ];

    #[test]
    fn derivative_matches_central_difference() {
        let mut rng = SplitMix64::new(0xC0FFEE);
        for src in CORPUS {
            let ast = p(src);
            let d = differentiate(&ast).expect(src);
            for _ in 0..10 {
                let t = rng.range(0.1, std::f64::consts::PI);
                let h = 1e-6 * (1.0 + t.abs());
                let fd = (ast.eval(t + h).unwrap() - ast.eval(t - h).unwrap()) / (2.0 * h);
                let sym = d.eval(t).unwrap();
                assert!(
                    (sym - fd).abs() < 1e-7 * (1.0 + sym.abs()),
                    "{src} at t={t}: sym={sym} fd={fd}"
                );
            }
        }
    }

    #[test]
    fn print_parse_round_trip() {
        for src in CORPUS {
            let once = p(src);
            let printed = once.to_string();
            let twice = parse(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
            assert_eq!(once, twice, "round trip failed for {src} -> {printed}");
        }
        // Same stability for derivative outputs.
        for src in CORPUS {
            let d = differentiate(&p(src)).unwrap();
            let printed = d.to_string();
            let reparsed = parse(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
            let mut rng = SplitMix64::new(7);
            for _ in 0..5 {
                let t = rng.range(0.2, 3.0);
                let a = d.eval(t).unwrap();
                let b = reparsed.eval(t).unwrap();
                assert!(
                    (a - b).abs() <= 1e-15 * (1.0 + a.abs()),
                    "{printed} at {t}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn eval_deterministic() {
        let ast = p("sin(t)*cos(2*t)+t^3");
        let a = ast.eval(1.2345).unwrap();
        let b = ast.eval(1.2345).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn scientific_notation_numbers() {
        assert_eq!(p("2e3").eval(0.0).unwrap(), 2000.0);
        assert_eq!(p("1.5e-2").eval(0.0).unwrap(), 0.015);
        // 'e' not followed by an exponent stays the Euler constant.
        assert_eq!(p("2*e").eval(0.0).unwrap(), 2.0 * std::f64::consts::E);
    }
}
