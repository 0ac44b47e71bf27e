//! Scalar expressions for composite stage functions `g_k(z, r, x)`.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 'z' | 'r' | constant | func '(' expr (',' expr)* ')' | '(' expr ')'
//! func    := exp/1 | ln/1 | pow/2 | max/2
//! ```
//!
//! Named constants are per-state tables looked up at the current state `x`.
//! Evaluation is a post-order walk, left operand first.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Pow,
    Max,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Exp | Func::Ln => 1,
            Func::Pow | Func::Max => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Z,
    R,
    Const(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Parses `src`, resolving identifiers other than `z`/`r` against `constants`.
    pub fn parse(src: &str, constants: &[&str]) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            constants,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected trailing input in `{src}`"
            )));
        }
        Ok(e)
    }

    pub fn uses_r(&self) -> bool {
        match self {
            Expr::R => true,
            Expr::Num(_) | Expr::Z | Expr::Const(_) => false,
            Expr::Neg(a) => a.uses_r(),
            Expr::Bin(_, a, b) => a.uses_r() || b.uses_r(),
            Expr::Call(_, args) => args.iter().any(Expr::uses_r),
        }
    }

    pub fn eval(&self, z: f64, r: f64, x: usize, constants: &[Vec<f64>]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Z => z,
            Expr::R => r,
            Expr::Const(i) => constants[*i][x],
            Expr::Neg(a) => -a.eval(z, r, x, constants),
            Expr::Bin(op, a, b) => {
                let a = a.eval(z, r, x, constants);
                let b = b.eval(z, r, x, constants);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(z, r, x, constants);
                match f {
                    Func::Exp => a.exp(),
                    Func::Ln => a.ln(),
                    Func::Pow => a.powf(args[1].eval(z, r, x, constants)),
                    Func::Max => a.max(args[1].eval(z, r, x, constants)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{text}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/(),".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    constants: &'a [&'a str],
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expression(format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Token::Op(c) => Err(Error::Expression(format!("unexpected `{c}`"))),
            Token::Ident(name) => {
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "ln" => Some(Func::Ln),
                    "pow" => Some(Func::Pow),
                    "max" => Some(Func::Max),
                    _ => None,
                };
                if let Some(f) = func {
                    self.expect('(')?;
                    let mut args = vec![self.expr()?];
                    while self.peek_op() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != f.arity() {
                        return Err(Error::Expression(format!(
                            "`{name}` takes {} argument(s), got {}",
                            f.arity(),
                            args.len()
                        )));
                    }
                    return Ok(Expr::Call(f, args));
                }
                match name.as_str() {
                    "z" => Ok(Expr::Z),
                    "r" => Ok(Expr::R),
                    _ => self
                        .constants
                        .iter()
                        .position(|c| *c == name)
                        .map(Expr::Const)
                        .ok_or_else(|| Error::Expression(format!("unknown identifier `{name}`"))),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, z: f64, r: f64) -> f64 {
        Expr::parse(src, &["gamma"])
            .unwrap()
            .eval(z, r, 1, &[vec![0.5, 2.0]])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(eval("8 - 3 - 2", 0.0, 0.0), 3.0);
        assert_eq!(eval("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(eval("-(z - r)", 5.0, 2.0), -3.0);
        assert_eq!(eval("2.5e1 * 0.1", 0.0, 0.0), 2.5);
    }

    #[test]
    fn functions_and_constants() {
        assert_eq!(eval("gamma * z", 3.0, 0.0), 6.0);
        assert_eq!(eval("max(z - r, 0)", 1.0, 3.0), 0.0);
        assert_eq!(eval("pow(z, 2)", 3.0, 0.0), 9.0);
        assert!((eval("ln(exp(z))", 1.25, 0.0) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("foo + 1", &[]).is_err());
        assert!(Expr::parse("pow(z)", &[]).is_err());
        assert!(Expr::parse("(z", &[]).is_err());
        assert!(Expr::parse("z z", &[]).is_err());
        assert!(Expr::parse("z $ 1", &[]).is_err());
    }

    #[test]
    fn detects_r() {
        assert!(Expr::parse("ln(r)", &[]).unwrap().uses_r());
        assert!(!Expr::parse("exp(z)", &[]).unwrap().uses_r());
    }
}
