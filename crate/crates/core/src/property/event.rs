//! Events: Boolean combinations of atomic propositions over component state.

use std::fmt;

use super::PropertyError;
use crate::model::{parse_expr, BinOp, EvalError, Expr, UnOp, Value};
use crate::semantics::{Engine, GlobalConfig, VarRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Le,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Le => "<=",
        })
    }
}

/// `c1.v1 ⋈ c2.v2`, `c.v ⋈ val`, `c.loc = l`, or `c.port = p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AtomicProp {
    VarVar { left: (String, String), op: CmpOp, right: (String, String) },
    VarVal { var: (String, String), op: CmpOp, val: Value },
    Loc { comp: String, loc: String },
    Port { comp: String, port: String },
}

impl AtomicProp {
    /// Component/field pairs the proposition reads, left to right.
    pub fn used(&self) -> Vec<(String, String)> {
        match self {
            AtomicProp::VarVar { left, right, .. } => vec![left.clone(), right.clone()],
            AtomicProp::VarVal { var, .. } => vec![var.clone()],
            AtomicProp::Loc { comp, .. } => vec![(comp.clone(), "loc".into())],
            AtomicProp::Port { comp, .. } => vec![(comp.clone(), "port".into())],
        }
    }
}

impl fmt::Display for AtomicProp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomicProp::VarVar { left, op, right } => write!(f, "{}.{} {op} {}.{}", left.0, left.1, right.0, right.1),
            AtomicProp::VarVal { var, op, val } => write!(f, "{}.{} {op} {val}", var.0, var.1),
            AtomicProp::Loc { comp, loc } => write!(f, "{comp}.loc = {}", Value::str(loc)),
            AtomicProp::Port { comp, port } => write!(f, "{comp}.port = {}", Value::str(port)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Formula<A = AtomicProp> {
    Const(bool),
    Atom(A),
    Not(Box<Formula<A>>),
    And(Box<Formula<A>>, Box<Formula<A>>),
    Or(Box<Formula<A>>, Box<Formula<A>>),
}

impl<A> Formula<A> {
    fn not(f: Formula<A>) -> Self {
        Formula::Not(Box::new(f))
    }

    fn atoms_into<'a>(&'a self, out: &mut Vec<&'a A>)
    where
        A: PartialEq,
    {
        match self {
            Formula::Const(_) => {}
            Formula::Atom(a) => {
                if !out.contains(&a) {
                    out.push(a);
                }
            }
            Formula::Not(x) => x.atoms_into(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.atoms_into(out);
                b.atoms_into(out);
            }
        }
    }

    fn eval<E>(&self, atom: &mut impl FnMut(&A) -> Result<bool, E>) -> Result<bool, E> {
        Ok(match self {
            Formula::Const(b) => *b,
            Formula::Atom(a) => atom(a)?,
            Formula::Not(x) => !x.eval(atom)?,
            Formula::And(a, b) => a.eval(atom)? && b.eval(atom)?,
            Formula::Or(a, b) => a.eval(atom)? || b.eval(atom)?,
        })
    }

    fn try_map<B, E>(&self, f: &mut impl FnMut(&A) -> Result<B, E>) -> Result<Formula<B>, E> {
        Ok(match self {
            Formula::Const(b) => Formula::Const(*b),
            Formula::Atom(a) => Formula::Atom(f(a)?),
            Formula::Not(x) => Formula::not(x.try_map(f)?),
            Formula::And(a, b) => Formula::And(Box::new(a.try_map(f)?), Box::new(b.try_map(f)?)),
            Formula::Or(a, b) => Formula::Or(Box::new(a.try_map(f)?), Box::new(b.try_map(f)?)),
        })
    }
}

enum Operand {
    Field(String, String),
    Lit(Value),
}

fn operand(e: &Expr) -> Result<Operand, String> {
    match e {
        Expr::Var(p) => match p.segments() {
            [c, f] => Ok(Operand::Field(c.clone(), f.clone())),
            _ => Err(format!("`{p}` is not of the form component.field")),
        },
        Expr::Lit(v) => Ok(Operand::Lit(v.clone())),
        Expr::Unary(UnOp::Neg, x) => match &**x {
            Expr::Lit(Value::Int(i)) => Ok(Operand::Lit(Value::Int(-i))),
            _ => Err(format!("`{e}` is neither a component field nor a literal")),
        },
        _ => Err(format!("`{e}` is neither a component field nor a literal")),
    }
}

fn is_builtin(f: &str) -> bool {
    f == "loc" || f == "port"
}

fn compare(op: BinOp, l: Operand, r: Operand) -> Result<Formula, String> {
    use Operand::*;
    match op {
        BinOp::Ne => return Ok(Formula::not(compare(BinOp::Eq, l, r)?)),
        BinOp::Ge => return compare(BinOp::Le, r, l),
        BinOp::Lt => return Ok(Formula::not(compare(BinOp::Le, r, l)?)),
        BinOp::Gt => return Ok(Formula::not(compare(BinOp::Le, l, r)?)),
        _ => {}
    }
    let op = if op == BinOp::Eq { CmpOp::Eq } else { CmpOp::Le };
    match (l, r) {
        (Lit(a), Lit(b)) => match (op, &a, &b) {
            (CmpOp::Eq, _, _) if a.ty() == b.ty() => Ok(Formula::Const(a == b)),
            (CmpOp::Le, Value::Int(x), Value::Int(y)) => Ok(Formula::Const(x <= y)),
            _ => Err(format!("cannot compare {a} and {b}")),
        },
        (Field(c, f), Lit(v)) if is_builtin(&f) => match (op, v) {
            (CmpOp::Eq, Value::Str(s)) if f == "loc" => Ok(Formula::Atom(AtomicProp::Loc { comp: c, loc: s.to_string() })),
            (CmpOp::Eq, Value::Str(s)) => Ok(Formula::Atom(AtomicProp::Port { comp: c, port: s.to_string() })),
            _ => Err(format!("`{c}.{f}` may only be compared for equality with a name string")),
        },
        (Field(c, f), Lit(v)) => Ok(Formula::Atom(AtomicProp::VarVal { var: (c, f), op, val: v })),
        (Lit(v), Field(c, f)) => match op {
            CmpOp::Eq => compare(BinOp::Eq, Field(c, f), Lit(v)),
            // v <= x  iff  not (x <= v - 1)
            CmpOp::Le => match v {
                Value::Int(i) if !is_builtin(&f) => {
                    let j = i.checked_sub(1).ok_or_else(|| format!("literal {i} is out of range"))?;
                    Ok(Formula::not(compare(BinOp::Le, Field(c, f), Lit(Value::Int(j)))?))
                }
                _ => Err(format!("`{v} <= {c}.{f}` is not an atomic proposition")),
            },
        },
        (Field(c1, f1), Field(c2, f2)) => {
            if is_builtin(&f1) || is_builtin(&f2) {
                return Err(format!("`{c1}.{f1}` and `{c2}.{f2}` cannot be compared"));
            }
            Ok(Formula::Atom(AtomicProp::VarVar { left: (c1, f1), op, right: (c2, f2) }))
        }
    }
}

fn formula(e: &Expr) -> Result<Formula, String> {
    match e {
        Expr::Lit(Value::Bool(b)) => Ok(Formula::Const(*b)),
        Expr::Unary(UnOp::Not, x) => Ok(Formula::not(formula(x)?)),
        Expr::Binary(BinOp::And, a, b) => Ok(Formula::And(Box::new(formula(a)?), Box::new(formula(b)?))),
        Expr::Binary(BinOp::Or, a, b) => Ok(Formula::Or(Box::new(formula(a)?), Box::new(formula(b)?))),
        Expr::Binary(op, a, b) if op.is_comparison() => compare(*op, operand(a)?, operand(b)?),
        Expr::Var(p) => match p.segments() {
            [c, f] if !is_builtin(f) => {
                Ok(Formula::Atom(AtomicProp::VarVal { var: (c.clone(), f.clone()), op: CmpOp::Eq, val: Value::Bool(true) }))
            }
            _ => Err(format!("`{p}` is not a Boolean component variable")),
        },
        _ => Err(format!("`{e}` is not a Boolean combination of atomic propositions")),
    }
}

/// A letter of the oracle alphabet.
#[derive(Clone, Debug)]
pub struct Event {
    text: String,
    key: String,
    formula: Formula,
}

impl Event {
    pub fn parse(text: &str) -> Result<Self, PropertyError> {
        let expr =
            parse_expr(text).map_err(|source| PropertyError::EventSyntax { text: text.to_string(), source })?;
        let formula =
            formula(&expr).map_err(|detail| PropertyError::NotAnEvent { text: text.to_string(), detail })?;
        let e = Event { text: text.trim().to_string(), key: expr.to_string(), formula };
        if e.atoms().is_empty() {
            return Err(PropertyError::NotAnEvent {
                text: text.to_string(),
                detail: "an event must use at least one atomic proposition".into(),
            });
        }
        Ok(e)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Canonical rendering; syntactically equal events share a key.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    /// Distinct atomic propositions in first-occurrence order.
    pub fn atoms(&self) -> Vec<&AtomicProp> {
        let mut out = Vec::new();
        self.formula.atoms_into(&mut out);
        out
    }

    /// True when the formula holds under every assignment of its atoms.
    pub fn is_tautology(&self) -> bool {
        let atoms = self.atoms();
        if atoms.len() > 20 {
            return false;
        }
        (0u32..1 << atoms.len()).all(|bits| {
            self.formula
                .eval(&mut |a: &AtomicProp| {
                    let i = atoms.iter().position(|x| *x == a).unwrap();
                    Ok::<_, ()>(bits & (1 << i) != 0)
                })
                .unwrap()
        })
    }

    pub fn bind(&self, engine: &Engine) -> Result<BoundEvent, PropertyError> {
        let var = |c: &str, v: &str| -> Result<VarRef, PropertyError> {
            let comp = engine.component_index(c).ok_or_else(|| PropertyError::Unresolved(format!("{c}.{v}")))?;
            let slot = engine.var_slot(comp, v).ok_or_else(|| PropertyError::Unresolved(format!("{c}.{v}")))?;
            Ok(VarRef { comp, slot })
        };
        let formula = self.formula.try_map(&mut |a| {
            Ok(match a {
                AtomicProp::VarVar { left, op, right } => BoundAtom::VarVar(var(&left.0, &left.1)?, *op, var(&right.0, &right.1)?),
                AtomicProp::VarVal { var: (c, v), op, val } => BoundAtom::VarVal(var(c, v)?, *op, val.clone()),
                AtomicProp::Loc { comp, loc } => {
                    let ci = engine.component_index(comp).ok_or_else(|| PropertyError::Unresolved(format!("{comp}.loc")))?;
                    let li = engine
                        .location_index(ci, loc)
                        .ok_or_else(|| PropertyError::Unresolved(format!("location `{loc}` of `{comp}`")))?;
                    BoundAtom::Loc(ci, li)
                }
                AtomicProp::Port { comp, port } => {
                    let g = engine
                        .port(comp, port)
                        .ok_or_else(|| PropertyError::Unresolved(format!("port `{port}` of `{comp}`")))?;
                    BoundAtom::Port(g.comp, g.port)
                }
            })
        })?;
        Ok(BoundEvent { formula })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum BoundAtom {
    VarVar(VarRef, CmpOp, VarRef),
    VarVal(VarRef, CmpOp, Value),
    Loc(u32, u32),
    Port(u32, u32),
}

/// An event resolved to component indices of one system.
#[derive(Clone, Debug)]
pub struct BoundEvent {
    formula: Formula<BoundAtom>,
}

fn cmp(op: CmpOp, a: &Value, b: &Value) -> Result<bool, EvalError> {
    match (op, a, b) {
        (CmpOp::Eq, a, b) if a.ty() == b.ty() => Ok(a == b),
        (CmpOp::Le, Value::Int(x), Value::Int(y)) => Ok(x <= y),
        _ => Err(EvalError::Type { op: op.to_string(), detail: format!("cannot compare {a} and {b}") }),
    }
}

impl BoundEvent {
    pub fn eval(&self, _engine: &Engine, q: &GlobalConfig) -> Result<bool, EvalError> {
        let val = |r: &VarRef| q.locals[r.comp as usize].vals[r.slot as usize].clone();
        self.formula.eval(&mut |a| match a {
            BoundAtom::VarVar(x, op, y) => cmp(*op, &val(x), &val(y)),
            BoundAtom::VarVal(x, op, v) => cmp(*op, &val(x), v),
            BoundAtom::Loc(c, l) => Ok(q.locals[*c as usize].loc == *l),
            BoundAtom::Port(c, p) => Ok(q.locals[*c as usize].last_port == Some(*p)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AtomicComponent, Connector, System, Transition};

    fn atoms(text: &str) -> Vec<String> {
        Event::parse(text).unwrap().atoms().iter().map(|a| a.to_string()).collect()
    }

    #[test]
    fn derived_comparisons_desugar() {
        assert_eq!(atoms("c.x > 0"), ["c.x <= 0"]);
        assert_eq!(atoms("c.x >= c.y"), ["c.y <= c.x"]);
        assert_eq!(atoms("3 <= c.x"), ["c.x <= 2"]);
        assert_eq!(atoms("c.x != 1"), ["c.x = 1"]);
        assert_eq!(atoms("\"r\" = c.loc"), ["c.loc = \"r\""]);
    }

    #[test]
    fn used_pairs() {
        let e = Event::parse("c1.x <= c2.y").unwrap();
        let u = e.atoms()[0].used();
        assert_eq!(u, vec![("c1".into(), "x".into()), ("c2".into(), "y".into())]);
        let e = Event::parse("c.loc = \"l0\"").unwrap();
        assert_eq!(e.atoms()[0].used(), vec![("c".into(), "loc".into())]);
        let e = Event::parse("c.x = 5").unwrap();
        assert_eq!(e.atoms()[0].used(), vec![("c".into(), "x".into())]);
    }

    #[test]
    fn rejects_non_atoms() {
        assert!(Event::parse("c.x + 1 = 2").is_err());
        assert!(Event::parse("c.loc <= \"a\"").is_err());
        assert!(Event::parse("true").is_err());
    }

    #[test]
    fn tautology_detection() {
        assert!(Event::parse("c.x = 0 || !(c.x = 0)").unwrap().is_tautology());
        assert!(!Event::parse("c.x = 0").unwrap().is_tautology());
    }

    #[test]
    fn eval_atoms_on_config() {
        let mut c = AtomicComponent::new("c", "l");
        c.add_var("x", Value::Int(1));
        c.add_port("count", &[]);
        c.add_transition(Transition::new("l", "count", "r"));
        let mut sys = System::default();
        sys.components.push(c);
        sys.connectors.push(Connector::rendezvous("k", &[("c", "count")]));
        let e = Engine::new(sys).unwrap();
        let q = e.initial();
        let ev = |t: &str| Event::parse(t).unwrap().bind(&e).unwrap().eval(&e, &q).unwrap();
        assert!(!ev("c.port = \"count\""));
        assert!(ev("c.x <= c.x"));
        assert!(ev("c.loc = \"l\""));
        assert!(ev("c.x > 0 && c.x < 2"));
        assert!(Event::parse("c.loc = \"nowhere\"").unwrap().bind(&e).is_err());
    }
}
