//! Typed AST for MiniC.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a `while` loop, assigned in source order starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoopId(pub usize);

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
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
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_arith(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    /// The comparison that holds exactly when `self` does not.
    pub fn negated(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            BinOp::Lt => BinOp::Ge,
            BinOp::Le => BinOp::Gt,
            BinOp::Gt => BinOp::Le,
            BinOp::Ge => BinOp::Lt,
            _ => return None,
        })
    }

    /// The comparison obtained by swapping operands (`a < b` iff `b > a`).
    pub fn flipped(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Eq,
            BinOp::Ne => BinOp::Ne,
            BinOp::Lt => BinOp::Gt,
            BinOp::Le => BinOp::Ge,
            BinOp::Gt => BinOp::Lt,
            BinOp::Ge => BinOp::Le,
            _ => return None,
        })
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }
}

/// Integer or boolean expression.
///
/// Variables are always integer-valued; booleans only arise from
/// comparisons, connectives and the `true`/`false` literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Bool,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Int => "int",
            Ty::Bool => "bool",
        })
    }
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn int(v: i64) -> Expr {
        Expr::Int(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Unary(UnOp::Neg, Box::new(e))
    }

    /// Conjunction that drops `true` operands and short-circuits on `false`.
    pub fn and(lhs: Expr, rhs: Expr) -> Expr {
        match (lhs, rhs) {
            (Expr::Bool(true), e) | (e, Expr::Bool(true)) => e,
            (Expr::Bool(false), _) | (_, Expr::Bool(false)) => Expr::Bool(false),
            (l, r) => Expr::binary(BinOp::And, l, r),
        }
    }

    /// Disjunction that drops `false` operands and short-circuits on `true`.
    pub fn or(lhs: Expr, rhs: Expr) -> Expr {
        match (lhs, rhs) {
            (Expr::Bool(false), e) | (e, Expr::Bool(false)) => e,
            (Expr::Bool(true), _) | (_, Expr::Bool(true)) => Expr::Bool(true),
            (l, r) => Expr::binary(BinOp::Or, l, r),
        }
    }

    pub fn conjoin(parts: impl IntoIterator<Item = Expr>) -> Expr {
        parts.into_iter().fold(Expr::Bool(true), Expr::and)
    }

    pub fn disjoin(parts: impl IntoIterator<Item = Expr>) -> Expr {
        parts.into_iter().fold(Expr::Bool(false), Expr::or)
    }

    /// Logical negation, pushing through comparisons and literals.
    pub fn negate(self) -> Expr {
        match self {
            Expr::Bool(b) => Expr::Bool(!b),
            Expr::Unary(UnOp::Not, inner) => *inner,
            Expr::Binary(op, l, r) if op.is_comparison() => {
                Expr::Binary(op.negated().unwrap(), l, r)
            }
            e => Expr::not(e),
        }
    }

    /// Free variables, sorted.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Unary(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Int(_) | Expr::Bool(_) => {}
        }
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            Expr::Var(v) => v == var,
            Expr::Unary(_, e) => e.mentions(var),
            Expr::Binary(_, l, r) => l.mentions(var) || r.mentions(var),
            Expr::Int(_) | Expr::Bool(_) => false,
        }
    }

    /// Integer literals occurring in the expression, with unary minus folded
    /// into the literal.
    pub fn constants(&self, out: &mut BTreeSet<i64>) {
        match self {
            Expr::Int(v) => {
                out.insert(*v);
            }
            Expr::Unary(UnOp::Neg, inner) if matches!(**inner, Expr::Int(_)) => {
                if let Expr::Int(v) = **inner {
                    out.insert(v.saturating_neg());
                }
            }
            Expr::Unary(_, e) => e.constants(out),
            Expr::Binary(_, l, r) => {
                l.constants(out);
                r.constants(out);
            }
            Expr::Var(_) | Expr::Bool(_) => {}
        }
    }

    /// Replace every occurrence of each mapped variable simultaneously.
    pub fn rename(&self, map: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Var(v) => map(v).unwrap_or_else(|| self.clone()),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.rename(map))),
            Expr::Binary(op, l, r) => {
                Expr::Binary(*op, Box::new(l.rename(map)), Box::new(r.rename(map)))
            }
            Expr::Int(_) | Expr::Bool(_) => self.clone(),
        }
    }

    pub fn is_var_free(&self) -> bool {
        match self {
            Expr::Var(_) => false,
            Expr::Unary(_, e) => e.is_var_free(),
            Expr::Binary(_, l, r) => l.is_var_free() && r.is_var_free(),
            Expr::Int(_) | Expr::Bool(_) => true,
        }
    }

    /// Static type, or a description of the first ill-typed subterm.
    pub fn ty(&self) -> Result<Ty, String> {
        match self {
            Expr::Int(_) | Expr::Var(_) => Ok(Ty::Int),
            Expr::Bool(_) => Ok(Ty::Bool),
            Expr::Unary(UnOp::Neg, e) => expect_ty(e, Ty::Int, "operand of unary '-'").map(|_| Ty::Int),
            Expr::Unary(UnOp::Not, e) => expect_ty(e, Ty::Bool, "operand of '!'").map(|_| Ty::Bool),
            Expr::Binary(op, l, r) => {
                let operand = if op.is_logical() { Ty::Bool } else { Ty::Int };
                let what = format!("operand of '{}'", op.symbol());
                expect_ty(l, operand, &what)?;
                expect_ty(r, operand, &what)?;
                if *op == BinOp::Mul && !l.is_var_free() && !r.is_var_free() {
                    return Err("nonlinear multiplication: one factor must be a constant".into());
                }
                Ok(if op.is_arith() { Ty::Int } else { Ty::Bool })
            }
        }
    }

    /// Conjuncts of a top-level `&&` chain.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            match e {
                Expr::Binary(BinOp::And, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                Expr::Bool(true) => {}
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Atomic comparisons reachable through connectives.
    pub fn atoms(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            match e {
                Expr::Binary(op, l, r) if op.is_logical() => {
                    walk(l, out);
                    walk(r, out);
                }
                Expr::Unary(UnOp::Not, inner) => walk(inner, out),
                Expr::Binary(op, _, _) if op.is_comparison() => out.push(e),
                _ => {}
            }
        }
        walk(self, &mut out);
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Unary(..) => 6,
            Expr::Int(v) if *v < 0 => 6,
            _ => 7,
        }
    }
}

fn expect_ty(e: &Expr, want: Ty, what: &str) -> Result<(), String> {
    let got = e.ty()?;
    if got == want {
        Ok(())
    } else {
        Err(format!("{what} must be {want}, found {got} expression `{e}`"))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Unary(op, e) => {
                let sym = match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                };
                // `-(3)` keeps a negated literal distinct from the literal -3.
                if e.precedence() < 7 || matches!(**e, Expr::Int(_)) {
                    write!(f, "{sym}({e})")
                } else {
                    write!(f, "{sym}{e}")
                }
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                // comparisons do not chain, so both sides need a tighter operator
                let (lmin, rmin) = if op.is_comparison() { (p + 1, p + 1) } else { (p, p + 1) };
                write_operand(f, l, lmin)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, r, rmin)
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if e.precedence() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Assign { target: String, value: Expr },
    If { cond: Expr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt>, loop_id: LoopId },
    Assume(Expr),
    Assert(Expr),
    /// `x = nondet();`
    Havoc(String),
}

impl Stmt {
    pub fn assign(target: impl Into<String>, value: Expr) -> Stmt {
        Stmt::Assign { target: target.into(), value }
    }

    pub fn is_compound(&self) -> bool {
        matches!(self, Stmt::If { .. } | Stmt::While { .. })
    }

    /// Variables possibly written by this statement, including nested ones.
    pub fn modified(&self, out: &mut BTreeSet<String>) {
        match self {
            Stmt::Assign { target, .. } | Stmt::Havoc(target) => {
                out.insert(target.clone());
            }
            Stmt::If { then_branch, else_branch, .. } => {
                then_branch.iter().chain(else_branch).for_each(|s| s.modified(out));
            }
            Stmt::While { body, .. } => body.iter().for_each(|s| s.modified(out)),
            Stmt::Assume(_) | Stmt::Assert(_) => {}
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Stmt::Assign { target, value } => {
                out.insert(target.clone());
                out.extend(value.vars());
            }
            Stmt::Havoc(target) => {
                out.insert(target.clone());
            }
            Stmt::If { cond, then_branch, else_branch } => {
                out.extend(cond.vars());
                then_branch.iter().chain(else_branch).for_each(|s| s.vars(out));
            }
            Stmt::While { cond, body, .. } => {
                out.extend(cond.vars());
                body.iter().for_each(|s| s.vars(out));
            }
            Stmt::Assume(e) | Stmt::Assert(e) => out.extend(e.vars()),
        }
    }

    pub fn constants(&self, out: &mut BTreeSet<i64>) {
        match self {
            Stmt::Assign { value, .. } => value.constants(out),
            Stmt::Havoc(_) => {}
            Stmt::If { cond, then_branch, else_branch } => {
                cond.constants(out);
                then_branch.iter().chain(else_branch).for_each(|s| s.constants(out));
            }
            Stmt::While { cond, body, .. } => {
                cond.constants(out);
                body.iter().for_each(|s| s.constants(out));
            }
            Stmt::Assume(e) | Stmt::Assert(e) => e.constants(out),
        }
    }
}

pub fn modified_vars(stmts: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    stmts.iter().for_each(|s| s.modified(&mut out));
    out
}

impl fmt::Display for Stmt {
    /// Single-line rendering used in path listings and prompts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Assign { target, value } => write!(f, "{target} = {value};"),
            Stmt::Havoc(target) => write!(f, "{target} = nondet();"),
            Stmt::Assume(e) => write!(f, "assume({e});"),
            Stmt::Assert(e) => write!(f, "assert({e});"),
            Stmt::If { cond, .. } => write!(f, "if ({cond}) {{ ... }}"),
            Stmt::While { cond, loop_id, .. } => write!(f, "while ({cond}) {{ ... }} // loop {loop_id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnnotationKind {
    Pre,
    Post,
    GoldInvariant(LoopId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub formula: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub name: String,
    pub decls: Vec<String>,
    pub body: Vec<Stmt>,
    pub annotations: Vec<Annotation>,
}

impl Program {
    /// The `pre` annotation, or `true`.
    pub fn precondition(&self) -> Expr {
        self.annotations
            .iter()
            .find(|a| a.kind == AnnotationKind::Pre)
            .map(|a| a.formula.clone())
            .unwrap_or(Expr::Bool(true))
    }

    /// Conjunction of all `post` annotations, or `None` when there are none.
    pub fn postcondition(&self) -> Option<Expr> {
        let posts: Vec<Expr> = self
            .annotations
            .iter()
            .filter(|a| a.kind == AnnotationKind::Post)
            .map(|a| a.formula.clone())
            .collect();
        (!posts.is_empty()).then(|| Expr::conjoin(posts))
    }

    pub fn gold_invariant(&self, id: LoopId) -> Option<&Expr> {
        self.annotations
            .iter()
            .find(|a| a.kind == AnnotationKind::GoldInvariant(id))
            .map(|a| &a.formula)
    }

    /// All loops in source order.
    pub fn loops(&self) -> Vec<&Stmt> {
        fn walk<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
            for s in stmts {
                match s {
                    Stmt::While { body, .. } => {
                        out.push(s);
                        walk(body, out);
                    }
                    Stmt::If { then_branch, else_branch, .. } => {
                        walk(then_branch, out);
                        walk(else_branch, out);
                    }
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut out);
        out
    }

    /// Ids of all loops in source order.
    pub fn loop_ids(&self) -> Vec<LoopId> {
        self.loops()
            .into_iter()
            .filter_map(|s| match s {
                Stmt::While { loop_id, .. } => Some(*loop_id),
                _ => None,
            })
            .collect()
    }

    pub fn find_loop(&self, id: LoopId) -> Option<&Stmt> {
        self.loops()
            .into_iter()
            .find(|s| matches!(s, Stmt::While { loop_id, .. } if *loop_id == id))
    }

    /// Integer literals of the body and the pre/post annotations. Gold
    /// invariants are excluded so that they cannot seed their own search.
    pub fn constants(&self) -> BTreeSet<i64> {
        let mut out = BTreeSet::new();
        self.body.iter().for_each(|s| s.constants(&mut out));
        self.annotations
            .iter()
            .filter(|a| !matches!(a.kind, AnnotationKind::GoldInvariant(_)))
            .for_each(|a| a.formula.constants(&mut out));
        out
    }
}

/// Counts of compound statements, used by structural checks.
pub fn count_compound(stmts: &[Stmt]) -> (usize, usize) {
    let mut loops = 0;
    let mut ifs = 0;
    for s in stmts {
        match s {
            Stmt::While { body, .. } => {
                loops += 1;
                let (l, i) = count_compound(body);
                loops += l;
                ifs += i;
            }
            Stmt::If { then_branch, else_branch, .. } => {
                ifs += 1;
                for b in [then_branch, else_branch] {
                    let (l, i) = count_compound(b);
                    loops += l;
                    ifs += i;
                }
            }
            _ => {}
        }
    }
    (loops, ifs)
}
