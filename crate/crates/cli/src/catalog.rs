//! Identity catalogs: named matrix or scalar identities over ℤ/ℓᵐ with
//! parameter ranges, evaluated exhaustively.
//!
//! ```text
//! [name]
//! primes = 2, 3, 5, 7
//! range s = smin .. 3
//! let a = 2 * l^s
//! require unit(1 + a)
//! lhs = D(a)
//! rhs = M(1 + a, 0, 0, 1 / (1 + a))
//! ```
//!
//! Statements run top to bottom; every `range` opens a loop over the
//! statements after it. Builtins: `l`, `m`, `smin` (2 at ℓ = 2, 1 at ℓ = 3,
//! else 0), `Id`; `L R D M comm inv det tr entry lim unit square nonsquare v`.

use std::collections::HashMap;
use std::fmt;

use pink_forge_core::matrix::{diag_limit_product, standard_gen};
use pink_forge_core::{GenKind, Mat2, PadicScalar, ResidueRing};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Eval(String),
}

type Result<T> = std::result::Result<T, CatalogError>;

fn eval_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(CatalogError::Eval(msg.into()))
}

pub const DEFAULT_CATALOG: &str = include_str!("../catalog/default.catalog");

#[derive(Clone, Debug, PartialEq)]
enum Expr {
    Int(i128),
    Var(String),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Cmp(String, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
enum Statement {
    Range(String, Expr, Expr),
    Let(String, Expr),
    Require(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Identity {
    pub name: String,
    primes: Option<Vec<u64>>,
    statements: Vec<Statement>,
    lhs: Expr,
    rhs: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    pub identities: Vec<Identity>,
}

/// Outcome of one identity at one (ℓ, m).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityResult {
    pub name: String,
    pub prime: u64,
    pub precision: u32,
    pub instances: u64,
    /// The first failing binding, rendered, and the reason.
    pub failure: Option<String>,
    pub skipped: bool,
}

impl IdentityResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl Catalog {
    pub fn parse(text: &str) -> Result<Self> {
        let mut identities = Vec::new();
        let mut current: Option<(String, usize, Option<Vec<u64>>, Vec<Statement>, Option<Expr>, Option<Expr>)> = None;
        let finish = |cur: Option<(String, usize, Option<Vec<u64>>, Vec<Statement>, Option<Expr>, Option<Expr>)>,
                      out: &mut Vec<Identity>|
         -> Result<()> {
            if let Some((name, line, primes, statements, lhs, rhs)) = cur {
                let (Some(lhs), Some(rhs)) = (lhs, rhs) else {
                    return Err(CatalogError::Parse { line, message: format!("identity {name} needs lhs and rhs") });
                };
                out.push(Identity { name, primes, statements, lhs, rhs });
            }
            Ok(())
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            let perr = |message: String| CatalogError::Parse { line, message };
            if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
                finish(current.take(), &mut identities)?;
                current = Some((name.trim().to_string(), line, None, Vec::new(), None, None));
                continue;
            }
            let Some(cur) = current.as_mut() else {
                return Err(perr("statement outside an identity".into()));
            };
            let (keyword, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
            let rest = rest.trim();
            let parse_expr = |s: &str| Parser::new(s).and_then(|mut p| p.finish()).map_err(|m| perr(m));
            let assignment = |s: &str| -> std::result::Result<(String, String), CatalogError> {
                let (name, value) = s.split_once('=').ok_or_else(|| perr("expected name = value".into()))?;
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                    return Err(perr(format!("bad name '{name}'")));
                }
                Ok((name.to_string(), value.trim().to_string()))
            };
            match keyword {
                "range" => {
                    let (name, value) = assignment(rest)?;
                    let (lo, hi) = value.split_once("..").ok_or_else(|| perr("expected lo .. hi".into()))?;
                    cur.3.push(Statement::Range(name, parse_expr(lo)?, parse_expr(hi)?));
                }
                "let" => {
                    let (name, value) = assignment(rest)?;
                    cur.3.push(Statement::Let(name, parse_expr(&value)?));
                }
                "require" => cur.3.push(Statement::Require(parse_expr(rest)?)),
                _ => {
                    let (key, value) = assignment(body)?;
                    match key.as_str() {
                        "primes" => {
                            let primes = value
                                .split(',')
                                .map(|p| p.trim().parse::<u64>().map_err(|e| perr(format!("bad prime: {e}"))))
                                .collect::<std::result::Result<Vec<_>, _>>()?;
                            cur.2 = Some(primes);
                        }
                        "lhs" => cur.4 = Some(parse_expr(&value)?),
                        "rhs" => cur.5 = Some(parse_expr(&value)?),
                        other => return Err(perr(format!("unknown key '{other}'"))),
                    }
                }
            }
        }
        finish(current, &mut identities)?;
        Ok(Self { identities })
    }

    /// Evaluates every identity listing ℓ (or listing no primes).
    pub fn run(&self, ring: ResidueRing) -> Vec<IdentityResult> {
        self.identities.iter().map(|id| id.run(ring)).collect()
    }
}

impl Identity {
    pub fn applies_to(&self, prime: u64) -> bool {
        self.primes.as_ref().is_none_or(|ps| ps.contains(&prime))
    }

    pub fn run(&self, ring: ResidueRing) -> IdentityResult {
        let mut result = IdentityResult {
            name: self.name.clone(),
            prime: ring.prime(),
            precision: ring.precision(),
            instances: 0,
            failure: None,
            skipped: !self.applies_to(ring.prime()),
        };
        if result.skipped {
            return result;
        }
        let mut env = Env::new(ring);
        if let Err(e) = self.walk(0, &mut env, &mut result) {
            result.failure.get_or_insert(format!("{} ({e})", env.describe()));
        }
        result
    }

    fn walk(&self, at: usize, env: &mut Env, result: &mut IdentityResult) -> Result<()> {
        if result.failure.is_some() {
            return Ok(());
        }
        let Some(statement) = self.statements.get(at) else {
            result.instances += 1;
            let (lhs, rhs) = (env.eval(&self.lhs)?, env.eval(&self.rhs)?);
            if !env.equal(&lhs, &rhs)? {
                result.failure = Some(format!("{}: lhs = {lhs}, rhs = {rhs}", env.describe()));
            }
            return Ok(());
        };
        match statement {
            Statement::Range(name, lo, hi) => {
                let (lo, hi) = (env.eval(lo)?.int()?, env.eval(hi)?.int()?);
                for value in lo..=hi {
                    env.bind(name, Value::Int(value));
                    self.walk(at + 1, env, result)?;
                }
                env.unbind(name);
                Ok(())
            }
            Statement::Let(name, expr) => {
                let value = env.eval(expr)?;
                env.bind(name, value);
                self.walk(at + 1, env, result)?;
                env.unbind(name);
                Ok(())
            }
            Statement::Require(expr) => match env.eval(expr)? {
                Value::Bool(true) => self.walk(at + 1, env, result),
                Value::Bool(false) => Ok(()),
                other => eval_err(format!("require needs a condition, got {other}")),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Int(i128),
    Scalar(PadicScalar),
    Matrix(Mat2),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(x) => write!(f, "{x}"),
            Value::Scalar(x) => write!(f, "{}", x.residue()),
            Value::Matrix(x) => write!(f, "{x}"),
            Value::Bool(x) => write!(f, "{x}"),
        }
    }
}

impl Value {
    fn int(&self) -> Result<i128> {
        match self {
            Value::Int(x) => Ok(*x),
            other => eval_err(format!("expected an integer, got {other}")),
        }
    }
}

struct Env {
    ring: ResidueRing,
    vars: HashMap<String, Value>,
    order: Vec<String>,
}

impl Env {
    fn new(ring: ResidueRing) -> Self {
        Self { ring, vars: HashMap::new(), order: Vec::new() }
    }

    fn bind(&mut self, name: &str, value: Value) {
        if self.vars.insert(name.to_string(), value).is_none() {
            self.order.push(name.to_string());
        }
    }

    fn unbind(&mut self, name: &str) {
        self.vars.remove(name);
        self.order.retain(|n| n != name);
    }

    fn describe(&self) -> String {
        let ints: Vec<String> = self
            .order
            .iter()
            .filter_map(|n| match &self.vars[n] {
                Value::Int(x) => Some(format!("{n}={x}")),
                _ => None,
            })
            .collect();
        format!("l={} m={} {}", self.ring.prime(), self.ring.precision(), ints.join(" ")).trim_end().to_string()
    }

    fn scalar(&self, v: &Value) -> Result<PadicScalar> {
        match v {
            Value::Int(x) => Ok(self.ring.scalar(*x)),
            Value::Scalar(x) => Ok(*x),
            other => eval_err(format!("expected a scalar, got {other}")),
        }
    }

    fn matrix(&self, v: &Value) -> Result<Mat2> {
        match v {
            Value::Matrix(x) => Ok(*x),
            other => eval_err(format!("expected a matrix, got {other}")),
        }
    }

    fn equal(&self, a: &Value, b: &Value) -> Result<bool> {
        match (a, b) {
            (Value::Matrix(x), Value::Matrix(y)) => Ok(x == y),
            (Value::Bool(x), Value::Bool(y)) => Ok(x == y),
            (Value::Matrix(_), _) | (_, Value::Matrix(_)) | (Value::Bool(_), _) | (_, Value::Bool(_)) => {
                eval_err("cannot compare values of different kinds")
            }
            _ => Ok(self.scalar(a)? == self.scalar(b)?),
        }
    }

    fn eval(&self, e: &Expr) -> Result<Value> {
        let ring = self.ring;
        match e {
            Expr::Int(x) => Ok(Value::Int(*x)),
            Expr::Var(name) => match name.as_str() {
                "l" => Ok(Value::Int(ring.prime() as i128)),
                "m" => Ok(Value::Int(ring.precision() as i128)),
                "smin" => Ok(Value::Int(match ring.prime() {
                    2 => 2,
                    3 => 1,
                    _ => 0,
                })),
                "Id" => Ok(Value::Matrix(Mat2::identity(ring))),
                _ => self.vars.get(name).cloned().ok_or_else(|| CatalogError::Eval(format!("unknown name '{name}'"))),
            },
            Expr::Neg(x) => match self.eval(x)? {
                Value::Int(v) => Ok(Value::Int(-v)),
                Value::Scalar(v) => Ok(Value::Scalar(-v)),
                Value::Matrix(v) => Ok(Value::Matrix(v.scale(ring.neg(1 % ring.modulus())))),
                Value::Bool(_) => eval_err("cannot negate a condition"),
            },
            Expr::Bin(op, a, b) => self.binary(*op, self.eval(a)?, self.eval(b)?),
            Expr::Cmp(op, a, b) => {
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                if let (Value::Int(x), Value::Int(y)) = (&a, &b) {
                    return Ok(Value::Bool(match op.as_str() {
                        "==" => x == y,
                        "!=" => x != y,
                        "<" => x < y,
                        "<=" => x <= y,
                        ">" => x > y,
                        ">=" => x >= y,
                        _ => unreachable!(),
                    }));
                }
                match op.as_str() {
                    "==" => Ok(Value::Bool(self.equal(&a, &b)?)),
                    "!=" => Ok(Value::Bool(!self.equal(&a, &b)?)),
                    _ => eval_err("ordering is only defined on integers"),
                }
            }
            Expr::Call(name, args) => {
                let args = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>>>()?;
                self.call(name, &args)
            }
        }
    }

    fn binary(&self, op: char, a: Value, b: Value) -> Result<Value> {
        if let (Value::Int(x), Value::Int(y)) = (&a, &b) {
            let exact = match op {
                '+' => x.checked_add(*y),
                '-' => x.checked_sub(*y),
                '*' => x.checked_mul(*y),
                '/' => (*y != 0 && x % y == 0).then(|| x / y),
                '^' => {
                    if *y < 0 {
                        None
                    } else {
                        u32::try_from(*y).ok().and_then(|e| x.checked_pow(e))
                    }
                }
                _ => unreachable!(),
            };
            if let Some(v) = exact {
                return Ok(Value::Int(v));
            }
        }
        match (op, &a, &b) {
            ('^', Value::Matrix(x), Value::Int(e)) => {
                let base = if *e < 0 { self.invert(x)? } else { *x };
                Ok(Value::Matrix(base.pow(e.unsigned_abs() as u64)))
            }
            ('^', _, Value::Int(e)) => {
                let x = self.scalar(&a)?;
                let base = if *e < 0 { self.scalar_inv(x)? } else { x };
                Ok(Value::Scalar(base.pow(e.unsigned_abs() as u64)))
            }
            ('^', _, _) => eval_err("exponents must be integers"),
            (_, Value::Matrix(x), Value::Matrix(y)) => match op {
                '+' => Ok(Value::Matrix(x.add(y))),
                '-' => Ok(Value::Matrix(x.sub(y))),
                '*' => Ok(Value::Matrix(x.mul(y))),
                _ => eval_err("matrices cannot be divided"),
            },
            ('*', Value::Matrix(x), s) | ('*', s, Value::Matrix(x)) => {
                Ok(Value::Matrix(x.scale(self.scalar(s)?.residue())))
            }
            (_, Value::Matrix(_), _) | (_, _, Value::Matrix(_)) => eval_err(format!("bad matrix operation '{op}'")),
            _ => {
                let (x, y) = (self.scalar(&a)?, self.scalar(&b)?);
                Ok(Value::Scalar(match op {
                    '+' => x + y,
                    '-' => x - y,
                    '*' => x * y,
                    '/' => x * self.scalar_inv(y)?,
                    _ => unreachable!(),
                }))
            }
        }
    }

    fn scalar_inv(&self, x: PadicScalar) -> Result<PadicScalar> {
        x.inv().map_err(|_| CatalogError::Eval(format!("{} is not a unit", x.residue())))
    }

    fn invert(&self, x: &Mat2) -> Result<Mat2> {
        x.inv().map_err(|_| CatalogError::Eval(format!("{x} is not invertible")))
    }

    fn call(&self, name: &str, args: &[Value]) -> Result<Value> {
        let ring = self.ring;
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                eval_err(format!("{name} takes {n} arguments, got {}", args.len()))
            }
        };
        let gen = |kind: GenKind| -> Result<Value> {
            arity(1)?;
            let x = self.scalar(&args[0])?;
            standard_gen(kind, x)
                .map(Value::Matrix)
                .map_err(|e| CatalogError::Eval(format!("{name}({}): {e}", x.residue())))
        };
        match name {
            "L" => gen(GenKind::L),
            "R" => gen(GenKind::R),
            "D" => gen(GenKind::D),
            "M" => {
                arity(4)?;
                let [a, b, c, d] = [0, 1, 2, 3].map(|i| self.scalar(&args[i]));
                Mat2::from_scalars(a?, b?, c?, d?).map(Value::Matrix).map_err(|e| CatalogError::Eval(e.to_string()))
            }
            "comm" => {
                arity(2)?;
                let (x, y) = (self.matrix(&args[0])?, self.matrix(&args[1])?);
                Ok(Value::Matrix(x.mul(&y).mul(&self.invert(&x)?).mul(&self.invert(&y)?)))
            }
            "inv" => {
                arity(1)?;
                match &args[0] {
                    Value::Matrix(x) => Ok(Value::Matrix(self.invert(x)?)),
                    other => Ok(Value::Scalar(self.scalar_inv(self.scalar(other)?)?)),
                }
            }
            "det" => {
                arity(1)?;
                Ok(Value::Scalar(self.matrix(&args[0])?.det()))
            }
            "tr" => {
                arity(1)?;
                Ok(Value::Scalar(self.matrix(&args[0])?.trace()))
            }
            "entry" => {
                arity(3)?;
                let x = self.matrix(&args[0])?;
                let (i, j) = (args[1].int()?, args[2].int()?);
                if !(1..=2).contains(&i) || !(1..=2).contains(&j) {
                    return eval_err("entry indices are 1 or 2");
                }
                Ok(Value::Scalar(x.entry(i as usize - 1, j as usize - 1)))
            }
            "lim" => {
                arity(5)?;
                let [a, b, c, d] = [0, 1, 2, 3].map(|i| self.scalar(&args[i]));
                let terms = u32::try_from(args[4].int()?).map_err(|_| CatalogError::Eval("bad term count".into()))?;
                diag_limit_product(a?, b?, c?, d?, terms)
                    .map(Value::Matrix)
                    .map_err(|e| CatalogError::Eval(e.to_string()))
            }
            "unit" => {
                arity(1)?;
                Ok(Value::Bool(ring.is_unit(self.scalar(&args[0])?.residue())))
            }
            "square" | "nonsquare" => {
                arity(1)?;
                let x = self.scalar(&args[0])?.residue();
                let unit = ring.is_unit(x);
                let square = unit && unit_is_square(ring, x);
                Ok(Value::Bool(if name == "square" { square } else { unit && !square }))
            }
            "v" => {
                arity(1)?;
                Ok(Value::Int(self.scalar(&args[0])?.valuation() as i128))
            }
            _ => eval_err(format!("unknown function '{name}'")),
        }
    }
}

/// Units that are squares in ℤ_ℓ: by Hensel, a square mod ℓ (mod 8 at ℓ = 2).
fn unit_is_square(ring: ResidueRing, x: u64) -> bool {
    let l = ring.prime();
    if l == 2 {
        let digits = ring.precision().min(3);
        return x % (1 << digits) == 1;
    }
    let r = x % l;
    (1..l).any(|y| y * y % l == r)
}

struct Parser {
    tokens: Vec<String>,
    at: usize,
}

impl Parser {
    fn new(text: &str) -> std::result::Result<Self, String> {
        let mut tokens = Vec::new();
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                tokens.push(chars[start..i].iter().collect());
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push(chars[start..i].iter().collect());
            } else if "=!<>".contains(c) && chars.get(i + 1) == Some(&'=') {
                tokens.push(format!("{c}="));
                i += 2;
            } else if "+-*/^(),<>".contains(c) {
                tokens.push(c.to_string());
                i += 1;
            } else {
                return Err(format!("unexpected character '{c}'"));
            }
        }
        Ok(Self { tokens, at: 0 })
    }

    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.at).map(String::as_str)
    }

    fn next(&mut self) -> Option<String> {
        let t = self.tokens.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn expect(&mut self, token: &str) -> std::result::Result<(), String> {
        match self.next() {
            Some(t) if t == token => Ok(()),
            Some(t) => Err(format!("expected '{token}', found '{t}'")),
            None => Err(format!("expected '{token}' at end of input")),
        }
    }

    fn finish(&mut self) -> std::result::Result<Expr, String> {
        let e = self.comparison()?;
        match self.peek() {
            None => Ok(e),
            Some(t) => Err(format!("unexpected '{t}'")),
        }
    }

    fn comparison(&mut self) -> std::result::Result<Expr, String> {
        let left = self.sum()?;
        match self.peek() {
            Some(op @ ("==" | "!=" | "<" | "<=" | ">" | ">=")) => {
                let op = op.to_string();
                self.at += 1;
                Ok(Expr::Cmp(op, Box::new(left), Box::new(self.sum()?)))
            }
            _ => Ok(left),
        }
    }

    fn sum(&mut self) -> std::result::Result<Expr, String> {
        let mut left = self.product()?;
        while let Some(op @ ("+" | "-")) = self.peek() {
            let op = op.chars().next().unwrap();
            self.at += 1;
            left = Expr::Bin(op, Box::new(left), Box::new(self.product()?));
        }
        Ok(left)
    }

    fn product(&mut self) -> std::result::Result<Expr, String> {
        let mut left = self.unary()?;
        while let Some(op @ ("*" | "/")) = self.peek() {
            let op = op.chars().next().unwrap();
            self.at += 1;
            left = Expr::Bin(op, Box::new(left), Box::new(self.unary()?));
        }
        Ok(left)
    }

    fn unary(&mut self) -> std::result::Result<Expr, String> {
        if self.peek() == Some("-") {
            self.at += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> std::result::Result<Expr, String> {
        let base = self.atom()?;
        if self.peek() == Some("^") {
            self.at += 1;
            return Ok(Expr::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> std::result::Result<Expr, String> {
        let Some(token) = self.next() else {
            return Err("unexpected end of expression".into());
        };
        if token == "(" {
            let e = self.sum()?;
            self.expect(")")?;
            return Ok(e);
        }
        if let Ok(x) = token.parse::<i128>() {
            return Ok(Expr::Int(x));
        }
        if !token.starts_with(|c: char| c.is_alphabetic() || c == '_') {
            return Err(format!("unexpected '{token}'"));
        }
        if self.peek() == Some("(") {
            self.at += 1;
            let mut args = Vec::new();
            if self.peek() != Some(")") {
                loop {
                    args.push(self.sum()?);
                    if self.peek() == Some(",") {
                        self.at += 1;
                    } else {
                        break;
                    }
                }
            }
            self.expect(")")?;
            return Ok(Expr::Call(token, args));
        }
        Ok(Expr::Var(token))
    }
}
