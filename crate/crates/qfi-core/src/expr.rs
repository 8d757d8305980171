//! Arithmetic-expression grammar for user-defined fields.
//!
//! Grammar: `+ - * / ^`, parentheses, functions `exp ln sin cos tan sqrt`,
//! variables `x`, `y` (and `r` = sqrt(x^2 + y^2)), plus named parameters.
//! Expressions are evaluated through the dual-number backend so user fields
//! carry exact first and second partials.

use crate::dual::Dual2;
use crate::error::{Error, Result};
use crate::field::{Domain, DualScalar, Func1, ScalarField};
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(String, Box<Expr>),
}

const FUNCTIONS: [&str; 6] = ["exp", "ln", "sin", "cos", "tan", "sqrt"];

// ---------------------------------------------------------------------------
// Tokenizer + recursive-descent parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                toks.push(Tok::Star);
                i += 1;
            }
            '/' => {
                toks.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                toks.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || chars[i] == 'e'
                        || chars[i] == 'E'
                        || ((chars[i] == '+' || chars[i] == '-')
                            && i > start
                            && (chars[i - 1] == 'e' || chars[i - 1] == 'E')))
                {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let num = text
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{text}`")))?;
                toks.push(Tok::Num(num));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Parse(format!("unexpected character `{other}`"))),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }
    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }
    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(got) if got == t => Ok(()),
            got => Err(Error::Parse(format!("expected {t:?}, got {got:?}"))),
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    // power := atom ('^' unary)?   (right-associative)
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.next();
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Ident(name)) => {
                if FUNCTIONS.contains(&name.as_str()) {
                    self.expect(Tok::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Call(name, Box::new(arg)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            got => Err(Error::Parse(format!("unexpected token {got:?}"))),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let toks = tokenize(src)?;
    if toks.is_empty() {
        return Err(Error::Parse("empty expression".into()));
    }
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse(format!(
            "trailing tokens after expression: {:?}",
            &p.toks[p.pos..]
        )));
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Evaluation over dual numbers
// ---------------------------------------------------------------------------

fn eval_dual(e: &Expr, vars: &HashMap<String, Dual2>, n: usize) -> Result<Dual2> {
    Ok(match e {
        Expr::Num(v) => Dual2::constant(*v, n),
        Expr::Var(name) => vars
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Parse(format!("unknown variable or parameter `{name}`")))?,
        Expr::Neg(a) => -eval_dual(a, vars, n)?,
        Expr::Add(a, b) => eval_dual(a, vars, n)? + eval_dual(b, vars, n)?,
        Expr::Sub(a, b) => eval_dual(a, vars, n)? - eval_dual(b, vars, n)?,
        Expr::Mul(a, b) => eval_dual(a, vars, n)? * eval_dual(b, vars, n)?,
        Expr::Div(a, b) => eval_dual(a, vars, n)? / eval_dual(b, vars, n)?,
        Expr::Pow(a, b) => {
            let base = eval_dual(a, vars, n)?;
            match b.as_ref() {
                // Integer exponents keep negative bases legal.
                Expr::Num(p) if p.fract() == 0.0 && p.abs() < 64.0 => base.powi(*p as i32),
                Expr::Neg(inner) => {
                    if let Expr::Num(p) = inner.as_ref() {
                        if p.fract() == 0.0 && p.abs() < 64.0 {
                            return Ok(base.powi(-(*p as i32)));
                        }
                    }
                    let e = eval_dual(b, vars, n)?;
                    if e.grad.iter().any(|g| *g != 0.0) {
                        return Err(Error::Parse(
                            "variable exponents are not supported".into(),
                        ));
                    }
                    base.powf(e.val)
                }
                _ => {
                    let e = eval_dual(b, vars, n)?;
                    if e.grad.iter().any(|g| *g != 0.0) {
                        return Err(Error::Parse(
                            "variable exponents are not supported".into(),
                        ));
                    }
                    base.powf(e.val)
                }
            }
        }
        Expr::Call(name, a) => {
            let arg = eval_dual(a, vars, n)?;
            match name.as_str() {
                "exp" => arg.exp(),
                "ln" => arg.ln(),
                "sin" => arg.sin(),
                "cos" => arg.cos(),
                "tan" => arg.tan(),
                "sqrt" => arg.sqrt(),
                other => return Err(Error::Parse(format!("unknown function `{other}`"))),
            }
        }
    })
}

/// Plain f64 evaluation against a variable environment (used for monitor
/// expressions, where no derivatives are needed).
pub fn eval_f64(e: &Expr, vars: &HashMap<String, f64>) -> Result<f64> {
    Ok(match e {
        Expr::Num(v) => *v,
        Expr::Var(name) => *vars
            .get(name)
            .ok_or_else(|| Error::Parse(format!("unknown variable or parameter `{name}`")))?,
        Expr::Neg(a) => -eval_f64(a, vars)?,
        Expr::Add(a, b) => eval_f64(a, vars)? + eval_f64(b, vars)?,
        Expr::Sub(a, b) => eval_f64(a, vars)? - eval_f64(b, vars)?,
        Expr::Mul(a, b) => eval_f64(a, vars)? * eval_f64(b, vars)?,
        Expr::Div(a, b) => eval_f64(a, vars)? / eval_f64(b, vars)?,
        Expr::Pow(a, b) => eval_f64(a, vars)?.powf(eval_f64(b, vars)?),
        Expr::Call(name, a) => {
            let arg = eval_f64(a, vars)?;
            match name.as_str() {
                "exp" => arg.exp(),
                "ln" => arg.ln(),
                "sin" => arg.sin(),
                "cos" => arg.cos(),
                "tan" => arg.tan(),
                "sqrt" => arg.sqrt(),
                other => return Err(Error::Parse(format!("unknown function `{other}`"))),
            }
        }
    })
}

/// Free variable names referenced by an expression (excluding parameters).
pub fn free_vars(e: &Expr, acc: &mut Vec<String>) {
    match e {
        Expr::Var(v) => {
            if !acc.contains(v) {
                acc.push(v.clone());
            }
        }
        Expr::Num(_) => {}
        Expr::Neg(a) | Expr::Call(_, a) => free_vars(a, acc),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
        | Expr::Pow(a, b) => {
            free_vars(a, acc);
            free_vars(b, acc);
        }
    }
}

/// Compile a 2D scalar field from an expression over `x`, `y`, `r` and the
/// given parameters. Derivatives come from the dual-number backend.
pub fn scalar_field_2d(
    src: &str,
    params: &HashMap<String, f64>,
) -> Result<Arc<dyn ScalarField>> {
    let ast = parse(src)?;
    // Validate variable names now so bad expressions fail at parse time.
    let mut vars = Vec::new();
    free_vars(&ast, &mut vars);
    for v in &vars {
        if v != "x" && v != "y" && v != "r" && !params.contains_key(v) {
            return Err(Error::Parse(format!(
                "unknown variable or parameter `{v}`"
            )));
        }
    }
    let uses_r = vars.iter().any(|v| v == "r");
    let params = params.clone();
    let field = DualScalar::new(2, move |qs| {
        let n = qs[0].nvars();
        let mut env: HashMap<String, Dual2> = params
            .iter()
            .map(|(k, v)| (k.clone(), Dual2::constant(*v, n)))
            .collect();
        env.insert("x".into(), qs[0].clone());
        env.insert("y".into(), qs[1].clone());
        env.insert(
            "r".into(),
            (&(&qs[0] * &qs[0]) + &(&qs[1] * &qs[1])).sqrt(),
        );
        eval_dual(&ast, &env, n).expect("validated expression")
    });
    let dom = if uses_r {
        Domain::excluding(|q: &[f64]| q[0].hypot(q[1]))
    } else {
        Domain::all()
    };
    Ok(Arc::new(field.with_domain(dom)))
}

/// Compile a one-variable function (for the family functions F1(y), F2(x),
/// A1(y), A2(x), F(u), M(u)). `var` names the single free variable.
pub fn func1(src: &str, var: &str, params: &HashMap<String, f64>) -> Result<Func1> {
    let ast = parse(src)?;
    let mut vars = Vec::new();
    free_vars(&ast, &mut vars);
    for v in &vars {
        if v != var && !params.contains_key(v) {
            return Err(Error::Parse(format!(
                "unknown variable `{v}` (expected `{var}`)"
            )));
        }
    }
    let params = params.clone();
    let var = var.to_string();
    let ast2 = ast.clone();
    let eval_at = move |u: f64, order: u8| -> (f64, f64, f64) {
        let mut env: HashMap<String, Dual2> = params
            .iter()
            .map(|(k, v)| (k.clone(), Dual2::constant(*v, 1)))
            .collect();
        env.insert(var.clone(), Dual2::variable(u, 0, 1));
        let d = eval_dual(&ast2, &env, 1).expect("validated expression");
        let _ = order;
        (d.val, d.grad[0], d.hess_at(0, 0))
    };
    let e0 = eval_at.clone();
    let e1 = eval_at.clone();
    let e2 = eval_at;
    Ok(Func1::new(
        move |u| e0(u, 0).0,
        move |u| e1(u, 1).1,
        move |u| e2(u, 2).2,
    ))
}
