//! Property tests over normalization, printing and counterexample pruning.

mod support;

use std::collections::BTreeSet;

use proptest::prelude::*;

use pathinv_core::candidates::{combine, filter_by_ces, template_clauses, CeSet, ClauseSource, ExprStore, GeneratorBudget};
use pathinv_core::frontend::{parse_expr, parse_formula, BinOp, Expr};
use pathinv_core::hoare::{CeKind, Counterexample};
use pathinv_core::logic::{Clause, Normalized};

fn names() -> Vec<String> {
    vec!["x".to_string(), "y".to_string()]
}

fn linear() -> impl Strategy<Value = Expr> {
    (-3i64..=3, -3i64..=3, -6i64..=6).prop_map(|(a, b, c)| {
        let term = |k: i64, v: &str| Expr::binary(BinOp::Mul, Expr::Int(k), Expr::var(v));
        Expr::binary(BinOp::Add, Expr::binary(BinOp::Add, term(a, "x"), term(b, "y")), Expr::Int(c))
    })
}

fn comparison() -> impl Strategy<Value = Expr> {
    let ops = prop::sample::select(vec![BinOp::Lt, BinOp::Le, BinOp::Eq, BinOp::Ne, BinOp::Ge, BinOp::Gt]);
    (ops, linear(), linear(), any::<bool>()).prop_map(|(op, l, r, neg)| {
        let e = Expr::binary(op, l, r);
        if neg {
            Expr::not(e)
        } else {
            e
        }
    })
}

fn formula() -> impl Strategy<Value = Expr> {
    comparison().prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::or(a, b)),
            inner.prop_map(Expr::not),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    /// Normalization never changes the meaning of an atom (`!=` atoms are
    /// not single clauses and must be rejected).
    #[test]
    fn clause_normalization_preserves_meaning(atom in comparison()) {
        let grid = support::grid(&names(), -5, 5);
        match Clause::from_atom(&atom) {
            Ok(Normalized::Const(b)) => {
                for s in &grid {
                    prop_assert_eq!(support::truth(&atom, s), Some(b));
                }
            }
            Ok(Normalized::Clause(c)) => {
                let back = c.to_expr();
                for s in &grid {
                    prop_assert_eq!(support::truth(&atom, s), support::truth(&back, s), "{} vs {}", atom, back);
                }
                let reparsed = Clause::from_atom(&parse_formula(&c.to_string()).unwrap()).unwrap();
                prop_assert_eq!(reparsed, Normalized::Clause(c));
            }
            Err(_) => {
                let positive = match &atom { Expr::Unary(_, inner) => (**inner).clone().negate(), e => e.clone() };
                prop_assert!(matches!(positive, Expr::Binary(BinOp::Ne, ..)), "rejected {}", atom);
            }
        }
    }

    /// Printing then parsing yields an expression with the same meaning
    /// (negative literals may fold, so structure is compared by value).
    #[test]
    fn formulas_survive_printing(f in formula()) {
        let again = parse_formula(&f.to_string()).unwrap();
        for s in &support::grid(&names(), -3, 3) {
            prop_assert_eq!(support::truth(&f, s), support::truth(&again, s));
        }
        prop_assert_eq!(parse_formula(&again.to_string()).unwrap(), again);
    }

    #[test]
    fn linear_terms_survive_printing(e in linear()) {
        let again = parse_expr(&e.to_string()).unwrap();
        prop_assert_eq!(again.to_string(), e.to_string());
    }

    /// The combinor's bitset cache and the reference filter agree on every
    /// shape, for arbitrary counterexample sets.
    #[test]
    fn cache_agrees_with_filter(
        picks in prop::collection::btree_set(0usize..40, 2..6),
        ces in prop::collection::vec((0u8..3, -4i64..=4, -4i64..=4, -4i64..=4, -4i64..=4), 0..6),
    ) {
        let all = template_clauses(&names().into_iter().collect(), &BTreeSet::from([-1, 0, 1]));
        let mut store = ExprStore::new();
        for i in picks {
            store.insert(all[i % all.len()].clone(), ClauseSource::Template);
        }
        let mut set = CeSet::new();
        for (k, x, y, x2, y2) in ces {
            let s = |a, b| support::St::from([("x".to_string(), a), ("y".to_string(), b)]);
            let kind = [CeKind::Init, CeKind::Preserve, CeKind::Term][k as usize];
            let post = (kind == CeKind::Preserve).then(|| s(x2, y2));
            set.insert(Counterexample { kind, state: s(x, y), post_state: post, segment: Some(0), havoc: vec![], entry: None });
        }
        let mut c = combine(&store, &GeneratorBudget { max_combination_size: 2, ..Default::default() });
        c.set_filter(false);
        while let Some(shape) = c.next_shape_with(&set, |_, _| {}) {
            let cand = c.candidate(&shape, 0);
            prop_assert_eq!(!c.refutes(&set, &shape), filter_by_ces(&cand, &set), "{}", cand.formula);
        }
    }
}
