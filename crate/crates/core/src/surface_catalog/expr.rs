//! A small expression language for chart components.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          right-associative
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers are `u`, `v` and parameter names, which are substituted at
//! parse time. Functions: `sin cos sinh cosh exp log sqrt`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::taylor_jets::Jet2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: &Jet2) -> Result<Jet2> {
        Ok(match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Exp => x.exp(),
            Func::Log => x.log()?,
            Func::Sqrt => x.sqrt()?,
        })
    }

    fn apply_f64(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
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

/// Compiled expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    U,
    V,
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Evaluate on jets for `u` and `v`.
    pub fn eval(&self, u: &Jet2, v: &Jet2) -> Result<Jet2> {
        Ok(match self {
            Expr::Const(c) => Jet2::constant(*c, u.order().min(v.order())),
            Expr::U => u.clone(),
            Expr::V => v.clone(),
            Expr::Neg(e) => -e.eval(u, v)?,
            Expr::Call(f, e) => f.apply(&e.eval(u, v)?)?,
            Expr::Binary(op, a, b) => {
                if let (BinOp::Pow, Expr::Const(p)) = (op, b.as_ref()) {
                    let base = a.eval(u, v)?;
                    return if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
                        base.powi(*p as i32)
                    } else {
                        base.powf(*p)
                    };
                }
                let x = a.eval(u, v)?;
                let y = b.eval(u, v)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x.div(&y)?,
                    BinOp::Pow => (y * x.log()?).exp(),
                }
            }
        })
    }

    /// Plain numeric evaluation.
    pub fn eval_f64(&self, u: f64, v: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::U => u,
            Expr::V => v,
            Expr::Neg(e) => -e.eval_f64(u, v),
            Expr::Call(f, e) => f.apply_f64(e.eval_f64(u, v)),
            Expr::Binary(op, a, b) => {
                let x = a.eval_f64(u, v);
                let y = b.eval_f64(u, v);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => {
                        if y.fract() == 0.0 {
                            x.powi(y as i32)
                        } else {
                            x.powf(y)
                        }
                    }
                }
            }
        }
    }

    fn fold(self) -> Expr {
        match self {
            Expr::Neg(e) => match e.fold() {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            },
            Expr::Call(f, e) => match e.fold() {
                Expr::Const(c) => Expr::Const(f.apply_f64(c)),
                other => Expr::Call(f, Box::new(other)),
            },
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.fold(), b.fold());
                match (&a, &b) {
                    (Expr::Const(_), Expr::Const(_)) => {
                        Expr::Const(Expr::Binary(op, Box::new(a), Box::new(b)).eval_f64(0.0, 0.0))
                    }
                    _ => Expr::Binary(op, Box::new(a), Box::new(b)),
                }
            }
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
}

fn syntax(column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line: 1,
        column,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>> {
    let mut lexer = Lexer {
        chars: src.char_indices().peekable(),
    };
    let mut out = Vec::new();
    while let Some(&(pos, c)) = lexer.chars.peek() {
        let col = pos + 1;
        if c.is_whitespace() {
            lexer.chars.next();
        } else if c.is_ascii_digit() || c == '.' {
            let mut end = pos;
            let mut prev = ' ';
            while let Some(&(p, d)) = lexer.chars.peek() {
                let exponent_sign = (d == '+' || d == '-') && (prev == 'e' || prev == 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exponent_sign {
                    end = p + d.len_utf8();
                    prev = d;
                    lexer.chars.next();
                } else {
                    break;
                }
            }
            let text = &src[pos..end];
            let value: f64 = text
                .parse()
                .map_err(|_| syntax(col, format!("malformed number `{text}`")))?;
            out.push((Token::Num(value), col));
        } else if c.is_alphabetic() || c == '_' {
            let mut end = pos;
            while let Some(&(p, d)) = lexer.chars.peek() {
                if d.is_alphanumeric() || d == '_' {
                    end = p + d.len_utf8();
                    lexer.chars.next();
                } else {
                    break;
                }
            }
            out.push((Token::Ident(src[pos..end].to_string()), col));
        } else {
            lexer.chars.next();
            let token = match c {
                '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                _ => return Err(syntax(col, format!("unexpected character `{c}`"))),
            };
            out.push((token, col));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end_column: usize,
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end_column, |(_, c)| *c)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Token::Op('-')) = self.peek() {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.next();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self, open_col: usize) -> Result<()> {
        match self.next() {
            Some(Token::RParen) => Ok(()),
            _ => Err(syntax(
                self.column().min(self.end_column),
                format!("unbalanced parenthesis opened at column {open_col}"),
            )),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.column();
        match self.next() {
            Some(Token::Num(x)) => Ok(Expr::Const(x)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect_rparen(col)?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                if let Some(Token::LParen) = self.peek() {
                    let func = Func::from_name(&name).ok_or_else(|| Error::UnknownIdentifier(name.clone()))?;
                    let open = self.column();
                    self.next();
                    let arg = self.expr()?;
                    self.expect_rparen(open)?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "u" => Ok(Expr::U),
                    "v" => Ok(Expr::V),
                    _ => self
                        .params
                        .get(&name)
                        .map(|&x| Expr::Const(x))
                        .ok_or(Error::UnknownIdentifier(name)),
                }
            }
            Some(t) => Err(syntax(col, format!("unexpected token {t:?}"))),
            None => Err(syntax(col, "unexpected end of expression")),
        }
    }
}

/// Parse one expression. Columns in syntax errors are 1-based positions
/// within `src`; the reported line is 1.
pub fn parse_expr(src: &str, params: &BTreeMap<String, f64>) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end_column: src.len() + 1,
        params,
    };
    let expr = parser.expr()?;
    if parser.pos < parser.tokens.len() {
        let col = parser.column();
        let message = match parser.peek() {
            Some(Token::RParen) => "unbalanced parenthesis".to_string(),
            t => format!("unexpected trailing token {t:?}"),
        };
        return Err(syntax(col, message));
    }
    Ok(expr.fold())
}
