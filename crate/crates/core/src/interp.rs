//! Concrete evaluation and bounded execution over mathematical integers
//! (represented as `i64`, with overflow reported rather than wrapped).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::frontend::{BinOp, Expr, LoopId, Stmt, UnOp};

pub type State = BTreeMap<String, i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("integer overflow")]
    Overflow,
    #[error("type error in `{0}`")]
    Type(String),
}

pub fn eval_int(e: &Expr, s: &State) -> Result<i64, EvalError> {
    match e {
        Expr::Int(v) => Ok(*v),
        Expr::Var(v) => s.get(v).copied().ok_or_else(|| EvalError::Unbound(v.clone())),
        Expr::Unary(UnOp::Neg, inner) => eval_int(inner, s)?.checked_neg().ok_or(EvalError::Overflow),
        Expr::Binary(op, l, r) if op.is_arith() => {
            let (a, b) = (eval_int(l, s)?, eval_int(r, s)?);
            match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                _ => a.checked_mul(b),
            }
            .ok_or(EvalError::Overflow)
        }
        _ => Err(EvalError::Type(e.to_string())),
    }
}

pub fn eval_bool(e: &Expr, s: &State) -> Result<bool, EvalError> {
    match e {
        Expr::Bool(b) => Ok(*b),
        Expr::Unary(UnOp::Not, inner) => Ok(!eval_bool(inner, s)?),
        Expr::Binary(BinOp::And, l, r) => Ok(eval_bool(l, s)? && eval_bool(r, s)?),
        Expr::Binary(BinOp::Or, l, r) => Ok(eval_bool(l, s)? || eval_bool(r, s)?),
        Expr::Binary(op, l, r) if op.is_comparison() => {
            let (a, b) = (eval_int(l, s)?, eval_int(r, s)?);
            Ok(match op {
                BinOp::Eq => a == b,
                BinOp::Ne => a != b,
                BinOp::Lt => a < b,
                BinOp::Le => a <= b,
                BinOp::Gt => a > b,
                _ => a >= b,
            })
        }
        _ => Err(EvalError::Type(e.to_string())),
    }
}

/// How a bounded run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunEnd {
    Finished(State),
    /// An `assume` was false; the run is discarded.
    Blocked,
    AssertFailed { assertion: Expr, state: State },
    StepLimit,
    /// A `havoc` needed a value beyond the supplied choices.
    OutOfChoices,
    Error(EvalError),
}

/// Executes statements with a step budget, drawing havoc values from a
/// fixed list and reporting every loop-head visit to an observer.
pub struct Runner<'a> {
    choices: &'a [i64],
    used: usize,
    steps: usize,
    max_steps: usize,
    on_loop_head: &'a mut dyn FnMut(LoopId, &State),
}

enum Flow {
    Continue,
    Stop(RunEnd),
}

impl<'a> Runner<'a> {
    pub fn new(choices: &'a [i64], max_steps: usize, on_loop_head: &'a mut dyn FnMut(LoopId, &State)) -> Runner<'a> {
        Runner { choices, used: 0, steps: 0, max_steps, on_loop_head }
    }

    /// Number of havoc choices consumed so far.
    pub fn choices_used(&self) -> usize {
        self.used
    }

    pub fn run(&mut self, stmts: &[Stmt], mut state: State) -> RunEnd {
        match self.block(stmts, &mut state) {
            Flow::Continue => RunEnd::Finished(state),
            Flow::Stop(end) => end,
        }
    }

    fn tick(&mut self) -> Result<(), RunEnd> {
        self.steps += 1;
        if self.steps > self.max_steps {
            Err(RunEnd::StepLimit)
        } else {
            Ok(())
        }
    }

    fn block(&mut self, stmts: &[Stmt], state: &mut State) -> Flow {
        for s in stmts {
            if let Flow::Stop(end) = self.stmt(s, state) {
                return Flow::Stop(end);
            }
        }
        Flow::Continue
    }

    fn stmt(&mut self, s: &Stmt, state: &mut State) -> Flow {
        if let Err(end) = self.tick() {
            return Flow::Stop(end);
        }
        let cond = |e: &Expr, state: &State| eval_bool(e, state).map_err(RunEnd::Error);
        match s {
            Stmt::Assign { target, value } => match eval_int(value, state) {
                Ok(v) => {
                    state.insert(target.clone(), v);
                    Flow::Continue
                }
                Err(e) => Flow::Stop(RunEnd::Error(e)),
            },
            Stmt::Havoc(target) => {
                let Some(&v) = self.choices.get(self.used) else { return Flow::Stop(RunEnd::OutOfChoices) };
                self.used += 1;
                state.insert(target.clone(), v);
                Flow::Continue
            }
            Stmt::Assume(c) => match cond(c, state) {
                Ok(true) => Flow::Continue,
                Ok(false) => Flow::Stop(RunEnd::Blocked),
                Err(end) => Flow::Stop(end),
            },
            Stmt::Assert(c) => match cond(c, state) {
                Ok(true) => Flow::Continue,
                Ok(false) => Flow::Stop(RunEnd::AssertFailed { assertion: c.clone(), state: state.clone() }),
                Err(end) => Flow::Stop(end),
            },
            Stmt::If { cond: c, then_branch, else_branch } => match cond(c, state) {
                Ok(true) => self.block(then_branch, state),
                Ok(false) => self.block(else_branch, state),
                Err(end) => Flow::Stop(end),
            },
            Stmt::While { cond: c, body, loop_id } => loop {
                (self.on_loop_head)(*loop_id, state);
                match cond(c, state) {
                    Ok(true) => {}
                    Ok(false) => return Flow::Continue,
                    Err(end) => return Flow::Stop(end),
                }
                if let Flow::Stop(end) = self.block(body, state) {
                    return Flow::Stop(end);
                }
                if let Err(end) = self.tick() {
                    return Flow::Stop(end);
                }
            },
        }
    }
}

/// Execute straight-line statements, drawing havoc values in order.
/// Returns `None` when an `assume` blocks or evaluation fails.
pub fn exec_straight(stmts: &[Stmt], state: &State, havoc: &[i64]) -> Option<State> {
    let mut ignore = |_: LoopId, _: &State| {};
    match Runner::new(havoc, usize::MAX, &mut ignore).run(stmts, state.clone()) {
        RunEnd::Finished(s) => Some(s),
        RunEnd::AssertFailed { state, .. } => Some(state),
        _ => None,
    }
}
