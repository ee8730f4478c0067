//! Linear terms and canonical atomic clauses.
//!
//! A clause is `a1*x1 + ... + ak*xk op b` with variables sorted, the leading
//! coefficient positive, coefficients coprime and `op` one of `<=`, `>=`,
//! `==`, `!=`. Strict comparisons are tightened over the integers, so two
//! atoms with the same integer solutions normalize to the same clause.

use std::collections::BTreeMap;
use std::fmt;

use super::LogicError;
use crate::frontend::{BinOp, Expr, UnOp};

/// `sum(coeffs[v] * v) + constant`, with no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Linear {
    pub coeffs: BTreeMap<String, i64>,
    pub constant: i64,
}

impl Linear {
    fn constant(c: i64) -> Linear {
        Linear { coeffs: BTreeMap::new(), constant: c }
    }

    fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn add(mut self, other: Linear, sign: i64, ctx: &Expr) -> Result<Linear, LogicError> {
        let overflow = || LogicError::Overflow(ctx.to_string());
        for (v, c) in other.coeffs {
            let c = c.checked_mul(sign).ok_or_else(overflow)?;
            let slot = self.coeffs.entry(v.clone()).or_insert(0);
            *slot = slot.checked_add(c).ok_or_else(overflow)?;
            if *slot == 0 {
                self.coeffs.remove(&v);
            }
        }
        let c = other.constant.checked_mul(sign).ok_or_else(overflow)?;
        self.constant = self.constant.checked_add(c).ok_or_else(overflow)?;
        Ok(self)
    }

    fn scale(mut self, k: i64, ctx: &Expr) -> Result<Linear, LogicError> {
        if k == 0 {
            return Ok(Linear::constant(0));
        }
        let overflow = || LogicError::Overflow(ctx.to_string());
        for c in self.coeffs.values_mut() {
            *c = c.checked_mul(k).ok_or_else(overflow)?;
        }
        self.constant = self.constant.checked_mul(k).ok_or_else(overflow)?;
        Ok(self)
    }
}

/// Flatten an integer expression into a linear term.
pub fn linearize(e: &Expr) -> Result<Linear, LogicError> {
    match e {
        Expr::Int(v) => Ok(Linear::constant(*v)),
        Expr::Var(v) => Ok(Linear { coeffs: BTreeMap::from([(v.clone(), 1)]), constant: 0 }),
        Expr::Unary(UnOp::Neg, inner) => linearize(inner)?.scale(-1, e),
        Expr::Binary(BinOp::Add, l, r) => linearize(l)?.add(linearize(r)?, 1, e),
        Expr::Binary(BinOp::Sub, l, r) => linearize(l)?.add(linearize(r)?, -1, e),
        Expr::Binary(BinOp::Mul, l, r) => {
            let (l, r) = (linearize(l)?, linearize(r)?);
            if l.is_constant() {
                r.scale(l.constant, e)
            } else if r.is_constant() {
                l.scale(r.constant, e)
            } else {
                Err(LogicError::NonLinear(e.to_string()))
            }
        }
        _ => Err(LogicError::Type(format!("`{e}` is not an integer term"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClauseOp {
    Le,
    Ge,
    Eq,
    Ne,
}

impl ClauseOp {
    fn binop(self) -> BinOp {
        match self {
            ClauseOp::Le => BinOp::Le,
            ClauseOp::Ge => BinOp::Ge,
            ClauseOp::Eq => BinOp::Eq,
            ClauseOp::Ne => BinOp::Ne,
        }
    }

    fn holds(self, lhs: i128, rhs: i128) -> bool {
        match self {
            ClauseOp::Le => lhs <= rhs,
            ClauseOp::Ge => lhs >= rhs,
            ClauseOp::Eq => lhs == rhs,
            ClauseOp::Ne => lhs != rhs,
        }
    }
}

/// Canonical connective-free linear atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    /// Sorted by variable name; first coefficient positive.
    pub terms: Vec<(String, i64)>,
    pub op: ClauseOp,
    pub bound: i64,
}

/// Result of normalizing an atom: either a proper clause or a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Const(bool),
    Clause(Clause),
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

impl Clause {
    /// Normalize a comparison, possibly under `!`.
    pub fn from_atom(e: &Expr) -> Result<Normalized, LogicError> {
        match e {
            Expr::Bool(b) => Ok(Normalized::Const(*b)),
            Expr::Unary(UnOp::Not, inner) => match Clause::from_atom(inner)? {
                Normalized::Const(b) => Ok(Normalized::Const(!b)),
                Normalized::Clause(_) => Clause::from_atom(&(**inner).clone().negate()),
            },
            Expr::Binary(op, l, r) if op.is_comparison() => {
                let diff = linearize(l)?.add(linearize(r)?, -1, e)?;
                let overflow = || LogicError::Overflow(e.to_string());
                // sum + constant op 0  ==>  sum op -constant
                let k = diff.constant.checked_neg().ok_or_else(overflow)?;
                let (op, k) = match op {
                    BinOp::Lt => (ClauseOp::Le, k.checked_sub(1).ok_or_else(overflow)?),
                    BinOp::Gt => (ClauseOp::Ge, k.checked_add(1).ok_or_else(overflow)?),
                    BinOp::Le => (ClauseOp::Le, k),
                    BinOp::Ge => (ClauseOp::Ge, k),
                    BinOp::Eq => (ClauseOp::Eq, k),
                    BinOp::Ne => (ClauseOp::Ne, k),
                    _ => unreachable!(),
                };
                Ok(Clause::canonical(diff.coeffs.into_iter().collect(), op, k))
            }
            _ => Err(LogicError::Type(format!("`{e}` is not an atomic comparison"))),
        }
    }

    fn canonical(mut terms: Vec<(String, i64)>, mut op: ClauseOp, mut k: i64) -> Normalized {
        if terms.is_empty() {
            return Normalized::Const(op.holds(0, k as i128));
        }
        if terms[0].1 < 0 {
            for t in &mut terms {
                t.1 = -t.1;
            }
            k = -k;
            op = match op {
                ClauseOp::Le => ClauseOp::Ge,
                ClauseOp::Ge => ClauseOp::Le,
                other => other,
            };
        }
        let g = terms.iter().fold(0, |g, t| gcd(g, t.1));
        if g > 1 {
            for t in &mut terms {
                t.1 /= g;
            }
            k = match op {
                ClauseOp::Le => k.div_euclid(g),
                ClauseOp::Ge => -((-k).div_euclid(g)),
                ClauseOp::Eq | ClauseOp::Ne if k % g != 0 => return Normalized::Const(op == ClauseOp::Ne),
                ClauseOp::Eq | ClauseOp::Ne => k / g,
            };
        }
        Normalized::Clause(Clause { terms, op, bound: k })
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|(v, _)| v.as_str())
    }

    /// Evaluate under a total assignment; `None` if a variable is missing.
    pub fn eval(&self, value: impl Fn(&str) -> Option<i64>) -> Option<bool> {
        let mut lhs: i128 = 0;
        for (v, c) in &self.terms {
            lhs += *c as i128 * value(v)? as i128;
        }
        Some(self.op.holds(lhs, self.bound as i128))
    }

    /// The clause as a MiniC expression. `x - y <= 0` is written `x <= y`
    /// and `n - x >= 0` is written `x <= n`.
    pub fn to_expr(&self) -> Expr {
        let pos: Vec<_> = self.terms.iter().filter(|t| t.1 > 0).cloned().collect();
        let neg: Vec<_> = self.terms.iter().filter(|t| t.1 < 0).map(|(v, c)| (v.clone(), -c)).collect();
        if self.bound == 0 && !neg.is_empty() && !pos.is_empty() {
            if self.op == ClauseOp::Ge {
                return Expr::binary(BinOp::Le, sum(&neg), sum(&pos));
            }
            return Expr::binary(self.op.binop(), sum(&pos), sum(&neg));
        }
        Expr::binary(self.op.binop(), sum(&self.terms), Expr::Int(self.bound))
    }
}

fn term(v: &str, c: i64) -> Expr {
    match c {
        1 => Expr::var(v),
        -1 => Expr::neg(Expr::var(v)),
        c => Expr::binary(BinOp::Mul, Expr::Int(c), Expr::var(v)),
    }
}

fn sum(terms: &[(String, i64)]) -> Expr {
    let mut it = terms.iter();
    let Some((v, c)) = it.next() else { return Expr::Int(0) };
    let mut acc = term(v, *c);
    for (v, c) in it {
        acc = if *c < 0 {
            Expr::binary(BinOp::Sub, acc, term(v, -c))
        } else {
            Expr::binary(BinOp::Add, acc, term(v, *c))
        };
    }
    acc
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_expr().fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_formula;

    fn norm(s: &str) -> String {
        match Clause::from_atom(&parse_formula(s).unwrap()).unwrap() {
            Normalized::Const(b) => b.to_string(),
            Normalized::Clause(c) => c.to_string(),
        }
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(norm("x < n"), "n - x >= 1");
        assert_eq!(norm("x <= n"), "x <= n");
        assert_eq!(norm("n >= x"), "x <= n");
        assert_eq!(norm("x - n <= 0"), "x <= n");
        assert_eq!(norm("!(x > 3)"), "x <= 3");
        assert_eq!(norm("2 * x <= 5"), "x <= 2");
        assert_eq!(norm("2 * x >= 5"), "x >= 3");
        assert_eq!(norm("2 * x == 5"), "false");
        assert_eq!(norm("2 * x != 5"), "true");
        assert_eq!(norm("4 * x - 2 * y == 6"), "2 * x - y == 3");
        assert_eq!(norm("-x >= 2"), "x <= -2");
        assert_eq!(norm("x - x < 1"), "true");
        assert_eq!(norm("0 - s + 2 * x == 0"), "s == 2 * x");
    }

    #[test]
    fn equivalent_atoms_collide() {
        assert_eq!(norm("x > 0"), norm("x >= 1"));
        assert_eq!(norm("y == x"), norm("x - y == 0"));
        assert_eq!(norm("x + 1 <= n"), norm("x < n"));
    }

    #[test]
    fn nonlinear_is_rejected() {
        let e = crate::frontend::Expr::binary(
            BinOp::Le,
            crate::frontend::Expr::binary(BinOp::Mul, crate::frontend::Expr::var("x"), crate::frontend::Expr::var("x")),
            crate::frontend::Expr::var("n"),
        );
        assert!(matches!(Clause::from_atom(&e), Err(LogicError::NonLinear(_))));
    }

    #[test]
    fn printed_clause_reparses_to_itself() {
        for s in ["x < n", "2 * x - y == 3", "-x >= 2", "x + y != 4", "3 * a - 6 * b <= 7"] {
            let Normalized::Clause(c) = Clause::from_atom(&parse_formula(s).unwrap()).unwrap() else { panic!() };
            let again = Clause::from_atom(&parse_formula(&c.to_string()).unwrap()).unwrap();
            assert_eq!(again, Normalized::Clause(c));
        }
    }
}
