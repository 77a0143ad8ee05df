//! Expression language for guards, update sequences, connector transfers and
//! property events.
//!
//! Expressions are generic over the reference type `R`. Parsed text produces
//! `Expr<Path>`; the interpreter resolves paths to slot references once and
//! evaluates the resolved tree through the [`Env`] trait.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A runtime value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(Arc<str>),
    /// Fixed-size Boolean vector. Only the disabler uses it.
    BoolVec(Vec<bool>),
}

impl Value {
    pub fn str(s: &str) -> Self {
        Value::Str(Arc::from(s))
    }

    pub fn ty(&self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Bool(_) => Type::Bool,
            Value::Str(_) => Type::Str,
            Value::BoolVec(_) => Type::BoolVec,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write_str_literal(f, s),
            Value::BoolVec(v) => {
                f.write_str("[")?;
                for (i, b) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{b}")?;
                }
                f.write_str("]")
            }
        }
    }
}

fn write_str_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Bool,
    Str,
    BoolVec,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Bool => "bool",
            Type::Str => "string",
            Type::BoolVec => "bool[]",
        })
    }
}

/// A dotted variable reference as written in source text: `x`, `comp.x`,
/// `comp.port.x`, `comp.loc`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<String>);

impl Path {
    pub fn local(name: &str) -> Self {
        Path(vec![name.to_string()])
    }

    pub fn qualified(parts: &[&str]) -> Self {
        Path(parts.iter().map(|s| s.to_string()).collect())
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn last(&self) -> &str {
        self.0.last().map(String::as_str).unwrap_or("")
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("."))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr<R = Path> {
    Lit(Value),
    Var(R),
    Index(Box<Expr<R>>, Box<Expr<R>>),
    Unary(UnOp, Box<Expr<R>>),
    Binary(BinOp, Box<Expr<R>>, Box<Expr<R>>),
}

/// `target := value` or `target[index] := value`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment<R = Path> {
    pub target: R,
    pub index: Option<Expr<R>>,
    pub value: Expr<R>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("type mismatch in `{op}`: {detail}")]
    Type { op: String, detail: String },
    #[error("integer overflow in `{0}`")]
    Overflow(String),
    #[error("index {index} out of range for vector of length {len}")]
    IndexOutOfRange { index: i64, len: usize },
}

/// Variable lookup used during evaluation.
pub trait Env<R> {
    fn lookup(&self, r: &R) -> Result<Value, EvalError>;
}

impl Env<Path> for BTreeMap<String, Value> {
    fn lookup(&self, r: &Path) -> Result<Value, EvalError> {
        let key = r.to_string();
        self.get(&key).cloned().ok_or(EvalError::Unbound(key))
    }
}

/// Valuation override: `v/v2(x) = v2(x)` when `x` is bound by `v2`, `v(x)` otherwise.
pub fn substitute(v: &BTreeMap<String, Value>, v2: &BTreeMap<String, Value>) -> BTreeMap<String, Value> {
    let mut out = v.clone();
    for (k, val) in v2 {
        out.insert(k.clone(), val.clone());
    }
    out
}

/// Evaluates `e` under the valuation `v`.
pub fn eval_expr(e: &Expr, v: &BTreeMap<String, Value>) -> Result<Value, EvalError> {
    e.eval(v)
}

fn type_err(op: impl fmt::Display, detail: String) -> EvalError {
    EvalError::Type { op: op.to_string(), detail }
}

impl<R> Expr<R> {
    pub fn tt() -> Self {
        Expr::Lit(Value::Bool(true))
    }

    pub fn ff() -> Self {
        Expr::Lit(Value::Bool(false))
    }

    pub fn var(r: R) -> Self {
        Expr::Var(r)
    }

    pub fn binary(op: BinOp, l: Expr<R>, r: Expr<R>) -> Self {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr<R>) -> Self {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn and(l: Expr<R>, r: Expr<R>) -> Self {
        Self::binary(BinOp::And, l, r)
    }

    pub fn or(l: Expr<R>, r: Expr<R>) -> Self {
        Self::binary(BinOp::Or, l, r)
    }

    pub fn eq(l: Expr<R>, r: Expr<R>) -> Self {
        Self::binary(BinOp::Eq, l, r)
    }

    /// Conjunction of all items; `true` when empty.
    pub fn all(items: impl IntoIterator<Item = Expr<R>>) -> Self {
        items.into_iter().reduce(Self::and).unwrap_or_else(Self::tt)
    }

    /// Disjunction of all items; `false` when empty.
    pub fn any(items: impl IntoIterator<Item = Expr<R>>) -> Self {
        items.into_iter().reduce(Self::or).unwrap_or_else(Self::ff)
    }

    pub fn is_true_literal(&self) -> bool {
        matches!(self, Expr::Lit(Value::Bool(true)))
    }

    pub fn visit_refs<'a>(&'a self, f: &mut impl FnMut(&'a R)) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(r) => f(r),
            Expr::Index(a, b) | Expr::Binary(_, a, b) => {
                a.visit_refs(f);
                b.visit_refs(f);
            }
            Expr::Unary(_, a) => a.visit_refs(f),
        }
    }

    pub fn refs(&self) -> Vec<&R> {
        let mut out = Vec::new();
        self.visit_refs(&mut |r| out.push(r));
        out
    }

    pub fn try_map_refs<S, E>(&self, f: &mut impl FnMut(&R) -> Result<S, E>) -> Result<Expr<S>, E> {
        Ok(match self {
            Expr::Lit(v) => Expr::Lit(v.clone()),
            Expr::Var(r) => Expr::Var(f(r)?),
            Expr::Index(a, b) => Expr::Index(Box::new(a.try_map_refs(f)?), Box::new(b.try_map_refs(f)?)),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.try_map_refs(f)?)),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.try_map_refs(f)?), Box::new(b.try_map_refs(f)?))
            }
        })
    }

    pub fn map_refs<S>(&self, f: &mut impl FnMut(&R) -> S) -> Expr<S> {
        self.try_map_refs::<S, std::convert::Infallible>(&mut |r| Ok(f(r)))
            .unwrap_or_else(|e| match e {})
    }

    /// Splits a conjunction into its top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&Expr<R>> {
        match self {
            Expr::Binary(BinOp::And, a, b) => {
                let mut out = a.conjuncts();
                out.extend(b.conjuncts());
                out
            }
            e => vec![e],
        }
    }

    pub fn eval(&self, env: &impl Env<R>) -> Result<Value, EvalError>
    where
        R: fmt::Display,
    {
        match self {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Var(r) => env.lookup(r),
            Expr::Index(base, idx) => {
                let base = base.eval(env)?;
                let idx = idx.eval(env)?;
                match (base, idx) {
                    (Value::BoolVec(v), Value::Int(i)) => {
                        let len = v.len();
                        usize::try_from(i)
                            .ok()
                            .and_then(|u| v.get(u).copied())
                            .map(Value::Bool)
                            .ok_or(EvalError::IndexOutOfRange { index: i, len })
                    }
                    (b, i) => Err(type_err("[]", format!("cannot index {} with {}", b.ty(), i.ty()))),
                }
            }
            Expr::Unary(UnOp::Neg, a) => match a.eval(env)? {
                Value::Int(i) => i.checked_neg().map(Value::Int).ok_or_else(|| EvalError::Overflow("-".into())),
                v => Err(type_err("-", format!("expected int, found {}", v.ty()))),
            },
            Expr::Unary(UnOp::Not, a) => match a.eval(env)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                v => Err(type_err("!", format!("expected bool, found {}", v.ty()))),
            },
            Expr::Binary(op @ (BinOp::And | BinOp::Or), a, b) => {
                let l = a.eval(env)?;
                let l = l
                    .as_bool()
                    .ok_or_else(|| type_err(op.symbol(), format!("expected bool, found {}", l.ty())))?;
                if (*op == BinOp::And && !l) || (*op == BinOp::Or && l) {
                    return Ok(Value::Bool(l));
                }
                let r = b.eval(env)?;
                r.as_bool()
                    .map(Value::Bool)
                    .ok_or_else(|| type_err(op.symbol(), format!("expected bool, found {}", r.ty())))
            }
            Expr::Binary(op, a, b) => {
                let l = a.eval(env)?;
                let r = b.eval(env)?;
                apply_binary(*op, l, r)
            }
        }
    }
}

fn apply_binary(op: BinOp, l: Value, r: Value) -> Result<Value, EvalError> {
    use BinOp::*;
    match op {
        Add | Sub | Mul => {
            let (Value::Int(x), Value::Int(y)) = (&l, &r) else {
                return Err(type_err(op.symbol(), format!("expected int operands, found {} and {}", l.ty(), r.ty())));
            };
            let res = match op {
                Add => x.checked_add(*y),
                Sub => x.checked_sub(*y),
                _ => x.checked_mul(*y),
            };
            res.map(Value::Int).ok_or_else(|| EvalError::Overflow(op.symbol().into()))
        }
        Eq | Ne => {
            if l.ty() != r.ty() {
                return Err(type_err(op.symbol(), format!("cannot compare {} with {}", l.ty(), r.ty())));
            }
            Ok(Value::Bool((l == r) == (op == Eq)))
        }
        Lt | Le | Gt | Ge => {
            let (Value::Int(x), Value::Int(y)) = (&l, &r) else {
                return Err(type_err(op.symbol(), format!("expected int operands, found {} and {}", l.ty(), r.ty())));
            };
            Ok(Value::Bool(match op {
                Lt => x < y,
                Le => x <= y,
                Gt => x > y,
                _ => x >= y,
            }))
        }
        And | Or => unreachable!("short-circuit operators are handled by the caller"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct TypeError(pub String);

impl<R: fmt::Display> Expr<R> {
    /// Static type of the expression given the type of each reference.
    pub fn type_of(&self, ty: &impl Fn(&R) -> Option<Type>) -> Result<Type, TypeError> {
        match self {
            Expr::Lit(v) => Ok(v.ty()),
            Expr::Var(r) => ty(r).ok_or_else(|| TypeError(format!("unknown variable `{r}`"))),
            Expr::Index(b, i) => {
                let (bt, it) = (b.type_of(ty)?, i.type_of(ty)?);
                if bt == Type::BoolVec && it == Type::Int {
                    Ok(Type::Bool)
                } else {
                    Err(TypeError(format!("cannot index {bt} with {it} in `{self}`")))
                }
            }
            Expr::Unary(UnOp::Neg, a) => expect(a.type_of(ty)?, Type::Int, self).map(|_| Type::Int),
            Expr::Unary(UnOp::Not, a) => expect(a.type_of(ty)?, Type::Bool, self).map(|_| Type::Bool),
            Expr::Binary(op, a, b) => {
                let (at, bt) = (a.type_of(ty)?, b.type_of(ty)?);
                use BinOp::*;
                match op {
                    Add | Sub | Mul => {
                        expect(at, Type::Int, self)?;
                        expect(bt, Type::Int, self)?;
                        Ok(Type::Int)
                    }
                    Lt | Le | Gt | Ge => {
                        expect(at, Type::Int, self)?;
                        expect(bt, Type::Int, self)?;
                        Ok(Type::Bool)
                    }
                    Eq | Ne => {
                        if at != bt {
                            return Err(TypeError(format!("cannot compare {at} with {bt} in `{self}`")));
                        }
                        Ok(Type::Bool)
                    }
                    And | Or => {
                        expect(at, Type::Bool, self)?;
                        expect(bt, Type::Bool, self)?;
                        Ok(Type::Bool)
                    }
                }
            }
        }
    }
}

fn expect<R: fmt::Display>(found: Type, want: Type, e: &Expr<R>) -> Result<Type, TypeError> {
    if found == want {
        Ok(found)
    } else {
        Err(TypeError(format!("expected {want}, found {found} in `{e}`")))
    }
}

const UNARY_PREC: u8 = 6;

impl<R> Expr<R> {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Lit(Value::Int(i)) if *i < 0 => UNARY_PREC,
            Expr::Lit(_) | Expr::Var(_) | Expr::Index(..) => 7,
            Expr::Unary(..) => UNARY_PREC,
            Expr::Binary(op, ..) => op.precedence(),
        }
    }
}

impl<R: fmt::Display> fmt::Display for Expr<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child<R: fmt::Display>(f: &mut fmt::Formatter<'_>, e: &Expr<R>, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(r) => write!(f, "{r}"),
            Expr::Index(b, i) => {
                child(f, b, b.precedence() < 7)?;
                write!(f, "[{i}]")
            }
            Expr::Unary(op, a) => {
                f.write_str(match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                })?;
                // `-3` would re-parse as a negative literal
                let literal = *op == UnOp::Neg && matches!(**a, Expr::Lit(Value::Int(_)));
                child(f, a, literal || a.precedence() < UNARY_PREC)
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let left_parens = if op.is_comparison() { a.precedence() <= p } else { a.precedence() < p };
                child(f, a, left_parens)?;
                write!(f, " {} ", op.symbol())?;
                child(f, b, b.precedence() <= p)
            }
        }
    }
}

impl<R: fmt::Display> fmt::Display for Assignment<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.target)?;
        if let Some(i) = &self.index {
            write!(f, "[{i}]")?;
        }
        write!(f, " := {}", self.value)
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// Syntax error inside an expression string. `column` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {message}")]
pub struct SyntaxError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(u64),
    Str(String),
    Ident(String),
    Sym(&'static str),
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

const SYMBOLS: &[&str] = &[
    ":=", "==", "!=", "<=", ">=", "&&", "||", "≠", "≤", "≥", "∧", "∨", "¬", "+", "-", "*", "=", "<", ">", "!", "(",
    ")", "[", "]", ",", ".",
];

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (t, col) = lx.next()?;
            let eof = t == Tok::Eof;
            out.push((t, col));
            if eof {
                return Ok(out);
            }
        }
    }

    fn err(&self, at: usize, message: impl Into<String>) -> SyntaxError {
        SyntaxError { column: self.src[..at].chars().count() + 1, message: message.into() }
    }

    fn next(&mut self) -> Result<(Tok, usize), SyntaxError> {
        let rest = &self.src[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
        let start = self.pos;
        let col = self.src[..start].chars().count() + 1;
        let Some(c) = trimmed.chars().next() else {
            return Ok((Tok::Eof, col));
        };
        if c.is_ascii_digit() {
            let len = trimmed.find(|c: char| !c.is_ascii_digit()).unwrap_or(trimmed.len());
            let digits = &trimmed[..len];
            self.pos += len;
            let n = digits.parse::<u64>().map_err(|_| self.err(start, "integer literal too large"))?;
            return Ok((Tok::Int(n), col));
        }
        if c.is_alphabetic() || c == '_' {
            let len = trimmed.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(trimmed.len());
            self.pos += len;
            return Ok((Tok::Ident(trimmed[..len].to_string()), col));
        }
        if c == '"' {
            let mut s = String::new();
            let mut chars = trimmed[1..].char_indices();
            loop {
                match chars.next() {
                    None => return Err(self.err(start, "unterminated string literal")),
                    Some((i, '"')) => {
                        self.pos += i + 2;
                        return Ok((Tok::Str(s), col));
                    }
                    Some((_, '\\')) => match chars.next() {
                        Some((_, c @ ('"' | '\\'))) => s.push(c),
                        Some((_, 'n')) => s.push('\n'),
                        _ => return Err(self.err(start, "invalid escape in string literal")),
                    },
                    Some((_, c)) => s.push(c),
                }
            }
        }
        for sym in SYMBOLS {
            if trimmed.starts_with(sym) {
                self.pos += sym.len();
                return Ok((Tok::Sym(sym), col));
            }
        }
        Err(self.err(start, format!("unexpected character `{c}`")))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Parser { toks: Lexer::tokens(src)?, i: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn col(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError { column: self.col(), message: message.into() })
    }

    fn eat_sym(&mut self, syms: &[&str]) -> Option<&'static str> {
        if let Tok::Sym(s) = self.peek() {
            if syms.contains(s) {
                let s = *s;
                self.bump();
                return Some(s);
            }
        }
        None
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), SyntaxError> {
        if self.eat_sym(&[sym]).is_some() {
            Ok(())
        } else {
            self.err(format!("expected `{sym}`, found {}", describe(self.peek())))
        }
    }

    fn finish(&self) -> Result<(), SyntaxError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err(format!("unexpected {}", describe(self.peek())))
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.or()
    }

    fn or(&mut self) -> Result<Expr, SyntaxError> {
        let mut l = self.and()?;
        while self.eat_sym(&["||", "∨"]).is_some() || self.eat_keyword("or") {
            let r = self.and()?;
            l = Expr::binary(BinOp::Or, l, r);
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        let mut l = self.comparison()?;
        while self.eat_sym(&["&&", "∧"]).is_some() || self.eat_keyword("and") {
            let r = self.comparison()?;
            l = Expr::binary(BinOp::And, l, r);
        }
        Ok(l)
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let l = self.additive()?;
        let op = match self.eat_sym(&["=", "==", "!=", "≠", "<", "<=", "≤", ">", ">=", "≥"]) {
            None => return Ok(l),
            Some("=" | "==") => BinOp::Eq,
            Some("!=" | "≠") => BinOp::Ne,
            Some("<") => BinOp::Lt,
            Some("<=" | "≤") => BinOp::Le,
            Some(">") => BinOp::Gt,
            Some(_) => BinOp::Ge,
        };
        let r = self.additive()?;
        Ok(Expr::binary(op, l, r))
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        let mut l = self.multiplicative()?;
        while let Some(s) = self.eat_sym(&["+", "-"]) {
            let r = self.multiplicative()?;
            l = Expr::binary(if s == "+" { BinOp::Add } else { BinOp::Sub }, l, r);
        }
        Ok(l)
    }

    fn multiplicative(&mut self) -> Result<Expr, SyntaxError> {
        let mut l = self.unary()?;
        while self.eat_sym(&["*"]).is_some() {
            let r = self.unary()?;
            l = Expr::binary(BinOp::Mul, l, r);
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_sym(&["-"]).is_some() {
            let indexed = matches!(self.toks.get(self.i + 1), Some((Tok::Sym("["), _)));
            if let (Tok::Int(n), false) = (self.peek().clone(), indexed) {
                let col = self.col();
                self.bump();
                let v = i64::try_from(-(n as i128))
                    .map_err(|_| SyntaxError { column: col, message: "integer literal too large".into() })?;
                return Ok(Expr::Lit(Value::Int(v)));
            }
            let a = self.unary()?;
            return Ok(Expr::Unary(UnOp::Neg, Box::new(a)));
        }
        if self.eat_sym(&["!", "¬"]).is_some() || self.eat_keyword("not") {
            let a = self.unary()?;
            return Ok(Expr::Unary(UnOp::Not, Box::new(a)));
        }
        let p = self.primary()?;
        self.postfix(p)
    }

    fn postfix(&mut self, mut e: Expr) -> Result<Expr, SyntaxError> {
        while self.eat_sym(&["["]).is_some() {
            let i = self.expr()?;
            self.expect_sym("]")?;
            e = Expr::Index(Box::new(e), Box::new(i));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let col = self.col();
        match self.bump() {
            Tok::Int(n) => i64::try_from(n)
                .map(|v| Expr::Lit(Value::Int(v)))
                .map_err(|_| SyntaxError { column: col, message: "integer literal too large".into() }),
            Tok::Str(s) => Ok(Expr::Lit(Value::str(&s))),
            Tok::Ident(id) if id == "true" => Ok(Expr::tt()),
            Tok::Ident(id) if id == "false" => Ok(Expr::ff()),
            Tok::Ident(id) => Ok(Expr::Var(self.path_rest(id)?)),
            Tok::Sym("(") => {
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("[") => {
                let mut items = Vec::new();
                if self.eat_sym(&["]"]).is_none() {
                    loop {
                        let c = self.col();
                        match self.bump() {
                            Tok::Ident(s) if s == "true" => items.push(true),
                            Tok::Ident(s) if s == "false" => items.push(false),
                            _ => {
                                return Err(SyntaxError {
                                    column: c,
                                    message: "vector literals may only contain `true`/`false`".into(),
                                })
                            }
                        }
                        if self.eat_sym(&["]"]).is_some() {
                            break;
                        }
                        self.expect_sym(",")?;
                    }
                }
                Ok(Expr::Lit(Value::BoolVec(items)))
            }
            t => Err(SyntaxError { column: col, message: format!("expected expression, found {}", describe(&t)) }),
        }
    }

    fn path_rest(&mut self, first: String) -> Result<Path, SyntaxError> {
        let mut segs = vec![first];
        while self.eat_sym(&["."]).is_some() {
            match self.bump() {
                Tok::Ident(s) => segs.push(s),
                t => return self.err(format!("expected identifier after `.`, found {}", describe(&t))),
            }
        }
        Ok(Path(segs))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Int(n) => format!("integer `{n}`"),
        Tok::Str(s) => format!("string \"{s}\""),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

/// Parses an expression.
pub fn parse_expr(src: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses `target := expr` or `target[index] := expr`.
pub fn parse_assignment(src: &str) -> Result<Assignment, SyntaxError> {
    let mut p = Parser::new(src)?;
    let target = match p.bump() {
        Tok::Ident(id) => p.path_rest(id)?,
        t => return p.err(format!("expected assignment target, found {}", describe(&t))),
    };
    let index = if p.eat_sym(&["["]).is_some() {
        let i = p.expr()?;
        p.expect_sym("]")?;
        Some(i)
    } else {
        None
    };
    p.expect_sym(":=")?;
    let value = p.expr()?;
    p.finish()?;
    Ok(Assignment { target, index, value })
}

impl std::str::FromStr for Expr {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn val(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn guard_positive() {
        let e = parse_expr("x>0").unwrap();
        assert_eq!(eval_expr(&e, &val(&[("x", Value::Int(3))])).unwrap(), Value::Bool(true));
    }

    #[test]
    fn sum_of_zeros() {
        let e = parse_expr("x+t").unwrap();
        let v = val(&[("x", Value::Int(0)), ("t", Value::Int(0))]);
        assert_eq!(eval_expr(&e, &v).unwrap(), Value::Int(0));
    }

    #[test]
    fn location_string_equality() {
        let e = parse_expr("loc = \"r\"").unwrap();
        assert_eq!(eval_expr(&e, &val(&[("loc", Value::str("r"))])).unwrap(), Value::Bool(true));
    }

    #[test]
    fn qualified_names_and_unicode_ops() {
        let e = parse_expr("p0.loc = \"r\" ∧ ¬(c.x ≤ 2)").unwrap();
        let v = val(&[("p0.loc", Value::str("r")), ("c.x", Value::Int(3))]);
        assert_eq!(e.eval(&v).unwrap(), Value::Bool(true));
    }

    #[test]
    fn errors_are_reported() {
        let e = parse_expr("y + 1").unwrap();
        assert_eq!(e.eval(&val(&[])), Err(EvalError::Unbound("y".into())));
        let e = parse_expr("x + true").unwrap();
        assert!(matches!(e.eval(&val(&[("x", Value::Int(1))])), Err(EvalError::Type { .. })));
        let e = parse_expr("x = \"a\"").unwrap();
        assert!(matches!(e.eval(&val(&[("x", Value::Int(1))])), Err(EvalError::Type { .. })));
        let e = parse_expr("x + 1").unwrap();
        assert_eq!(e.eval(&val(&[("x", Value::Int(i64::MAX))])), Err(EvalError::Overflow("+".into())));
        let e = parse_expr("x * 2").unwrap();
        assert_eq!(e.eval(&val(&[("x", Value::Int(i64::MIN))])), Err(EvalError::Overflow("*".into())));
    }

    #[test]
    fn vector_indexing() {
        let e = parse_expr("enab[id]").unwrap();
        let v = val(&[("enab", Value::BoolVec(vec![true, false])), ("id", Value::Int(1))]);
        assert_eq!(e.eval(&v).unwrap(), Value::Bool(false));
        let v = val(&[("enab", Value::BoolVec(vec![true])), ("id", Value::Int(4))]);
        assert!(matches!(e.eval(&v), Err(EvalError::IndexOutOfRange { .. })));
    }

    #[test]
    fn substitution() {
        let one = val(&[("x", Value::Int(1))]);
        assert_eq!(substitute(&one, &val(&[("x", Value::Int(5))])), val(&[("x", Value::Int(5))]));
        assert_eq!(substitute(&one, &val(&[])), one);
        assert_eq!(
            substitute(&one, &val(&[("y", Value::Int(2))])),
            val(&[("x", Value::Int(1)), ("y", Value::Int(2))])
        );
    }

    #[test]
    fn syntax_error_columns() {
        let err = parse_expr("x + * 2").unwrap_err();
        assert_eq!(err.column, 5);
        let err = parse_expr("x = \"abc").unwrap_err();
        assert_eq!(err.column, 5);
        assert!(parse_expr("(x").is_err());
        assert!(parse_expr("x y").is_err());
    }

    #[test]
    fn assignments() {
        let a = parse_assignment("y := x + t").unwrap();
        assert_eq!(a.target, Path::local("y"));
        assert_eq!(a.to_string(), "y := x + t");
        let a = parse_assignment("enab[id] := false").unwrap();
        assert!(a.index.is_some());
        assert_eq!(a.to_string(), "enab[id] := false");
        let a = parse_assignment("monitor.pm.p0_loc := p0.pm.loc").unwrap();
        assert_eq!(a.target.segments().len(), 3);
        assert!(parse_assignment("x = 1").is_err());
    }

    #[test]
    fn negative_literals_round_trip() {
        for src in ["-3", "-(3)", "--3", "x - -3", "-x", "-9223372036854775808", "x[-1]"] {
            let e = parse_expr(src).unwrap();
            assert_eq!(parse_expr(&e.to_string()).unwrap(), e, "{src} printed as {e}");
        }
    }

    #[test]
    fn static_types() {
        let e = parse_expr("x + 1 > 2 && b").unwrap();
        let ty = |p: &Path| match p.last() {
            "x" => Some(Type::Int),
            "b" => Some(Type::Bool),
            _ => None,
        };
        assert_eq!(e.type_of(&ty).unwrap(), Type::Bool);
        assert!(parse_expr("x && b").unwrap().type_of(&ty).is_err());
        assert!(parse_expr("z").unwrap().type_of(&ty).is_err());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            any::<i64>().prop_map(|i| Expr::Lit(Value::Int(i))),
            any::<bool>().prop_map(|b| Expr::Lit(Value::Bool(b))),
            "[a-z]{1,3}".prop_map(|s| Expr::Lit(Value::str(&s))),
            prop::sample::select(vec!["x", "y", "p0.loc", "c.p.v"]).prop_map(|s| {
                Expr::Var(Path(s.split('.').map(String::from).collect()))
            }),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            let ops = prop::sample::select(vec![
                BinOp::Add,
                BinOp::Sub,
                BinOp::Mul,
                BinOp::Eq,
                BinOp::Ne,
                BinOp::Lt,
                BinOp::Le,
                BinOp::Gt,
                BinOp::Ge,
                BinOp::And,
                BinOp::Or,
            ]);
            prop_oneof![
                (ops, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::binary(op, a, b)),
                inner.clone().prop_map(|a| Expr::Unary(UnOp::Neg, Box::new(a))),
                inner.clone().prop_map(Expr::not),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Index(Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse_expr(&printed).unwrap();
            prop_assert_eq!(reparsed, e, "printed: {}", printed);
        }
    }
}
