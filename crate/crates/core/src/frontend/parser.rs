//! Recursive-descent parser with inline type checking.

use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{tokenize_at, AnnotKind, Token, TokenKind};
use super::FrontendError;

type PResult<T> = Result<T, FrontendError>;

struct Use {
    name: String,
    line: usize,
    col: usize,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_loop: usize,
    decls: Vec<String>,
    uses: Vec<Use>,
    first_stmt: Option<usize>,
}

/// Parse a token stream produced by [`super::tokenize`] into a type-checked
/// [`Program`].
pub fn parse(tokens: Vec<Token>) -> PResult<Program> {
    let mut code = Vec::with_capacity(tokens.len());
    let mut annots = Vec::new();
    for tok in tokens {
        if matches!(tok.kind, TokenKind::Annot { .. }) {
            annots.push((tok, code.len()));
        } else {
            code.push(tok);
        }
    }
    if code.last().map(|t| &t.kind) != Some(&TokenKind::Eof) {
        let (line, col) = code.last().map(|t| (t.line, t.col)).unwrap_or((1, 1));
        code.push(Token { kind: TokenKind::Eof, line, col });
    }

    let mut p = Parser { tokens: code, pos: 0, next_loop: 0, decls: Vec::new(), uses: Vec::new(), first_stmt: None };
    let (name, body) = p.program()?;

    let mut annotations = Vec::new();
    for (tok, code_index) in annots {
        let TokenKind::Annot { kind, text, line, col } = tok.kind else { unreachable!() };
        let kind = match kind {
            AnnotKind::Pre => AnnotationKind::Pre,
            AnnotKind::Post => AnnotationKind::Post,
            AnnotKind::GoldInvariant(k) => {
                if k >= p.next_loop {
                    return Err(FrontendError::Invalid {
                        line: tok.line,
                        col: tok.col,
                        message: format!("gold_invariant[{k}] refers to a loop that does not exist"),
                    });
                }
                AnnotationKind::GoldInvariant(LoopId(k))
            }
        };
        if matches!(kind, AnnotationKind::Pre | AnnotationKind::Post)
            && p.first_stmt.is_some_and(|first| code_index > first)
        {
            return Err(FrontendError::Invalid {
                line: tok.line,
                col: tok.col,
                message: "pre/post annotations must precede the first statement".into(),
            });
        }
        let formula = p.annotation_formula(&text, line, col)?;
        annotations.push(Annotation { kind, formula });
    }
    if annotations.iter().filter(|a| a.kind == AnnotationKind::Pre).count() > 1 {
        return Err(FrontendError::Invalid { line: 1, col: 1, message: "at most one `pre` annotation is allowed".into() });
    }

    let declared: BTreeSet<&String> = p.decls.iter().collect();
    if let Some(u) = p.uses.iter().find(|u| !declared.contains(&u.name)) {
        return Err(FrontendError::Undeclared { name: u.name.clone(), line: u.line, col: u.col });
    }

    Ok(Program { name, decls: p.decls, body, annotations })
}

impl Parser {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_at(&self, off: usize) -> &TokenKind {
        let i = (self.pos + off).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> FrontendError {
        let (line, col) = self.here();
        FrontendError::Parse {
            line,
            col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> PResult<Token> {
        if *self.peek() == kind {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&[what]))
        }
    }

    fn ident(&mut self) -> PResult<(String, usize, usize)> {
        let (line, col) = self.here();
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                self.advance();
                Ok((name, line, col))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn program(&mut self) -> PResult<(String, Vec<Stmt>)> {
        let is_function = *self.peek() == TokenKind::KwInt
            && matches!(self.peek_at(1), TokenKind::Ident(_))
            && *self.peek_at(2) == TokenKind::LParen;
        if is_function {
            self.advance();
            let (name, ..) = self.ident()?;
            self.expect(TokenKind::LParen, "`(`")?;
            self.expect(TokenKind::RParen, "`)`")?;
            self.expect(TokenKind::LBrace, "`{`")?;
            let body = self.stmts_until(&TokenKind::RBrace)?;
            self.expect(TokenKind::RBrace, "`}`")?;
            self.expect(TokenKind::Eof, "end of input")?;
            Ok((name, body))
        } else {
            let body = self.stmts_until(&TokenKind::Eof)?;
            Ok(("main".to_string(), body))
        }
    }

    fn stmts_until(&mut self, end: &TokenKind) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while self.peek() != end {
            if *self.peek() == TokenKind::Eof {
                return Err(self.unexpected(&["`}`"]));
            }
            self.stmt(&mut out)?;
        }
        Ok(out)
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        if *self.peek() == TokenKind::LBrace {
            self.advance();
            out = self.stmts_until(&TokenKind::RBrace)?;
            self.advance();
        } else {
            self.stmt(&mut out)?;
        }
        Ok(out)
    }

    fn mark_statement(&mut self) {
        if self.first_stmt.is_none() {
            self.first_stmt = Some(self.pos);
        }
    }

    fn stmt(&mut self, out: &mut Vec<Stmt>) -> PResult<()> {
        match self.peek().clone() {
            TokenKind::KwInt => self.declaration(out),
            TokenKind::Semi => {
                self.advance();
                Ok(())
            }
            TokenKind::LBrace => {
                self.advance();
                let inner = self.stmts_until(&TokenKind::RBrace)?;
                self.advance();
                out.extend(inner);
                Ok(())
            }
            TokenKind::Ident(_) => {
                self.mark_statement();
                let s = self.assignment()?;
                self.expect(TokenKind::Semi, "`;`")?;
                out.push(s);
                Ok(())
            }
            TokenKind::KwIf => {
                self.mark_statement();
                out.push(self.if_stmt()?);
                Ok(())
            }
            TokenKind::KwWhile => {
                self.mark_statement();
                self.advance();
                let loop_id = LoopId(self.next_loop);
                self.next_loop += 1;
                let cond = self.condition()?;
                let body = self.block()?;
                out.push(Stmt::While { cond, body, loop_id });
                Ok(())
            }
            TokenKind::KwAssume | TokenKind::KwAssert => {
                self.mark_statement();
                let is_assume = *self.peek() == TokenKind::KwAssume;
                self.advance();
                let cond = self.condition()?;
                self.expect(TokenKind::Semi, "`;`")?;
                out.push(if is_assume { Stmt::Assume(cond) } else { Stmt::Assert(cond) });
                Ok(())
            }
            _ => Err(self.unexpected(&["statement"])),
        }
    }

    fn declaration(&mut self, out: &mut Vec<Stmt>) -> PResult<()> {
        self.advance();
        loop {
            let (name, line, col) = self.ident()?;
            if self.decls.contains(&name) {
                return Err(FrontendError::Invalid { line, col, message: format!("variable `{name}` declared twice") });
            }
            self.decls.push(name.clone());
            if *self.peek() == TokenKind::Eq {
                self.mark_statement();
                self.advance();
                let value = self.assigned_value(&name)?;
                out.push(value);
            }
            match self.peek() {
                TokenKind::Comma => {
                    self.advance();
                }
                TokenKind::Semi => {
                    self.advance();
                    return Ok(());
                }
                _ => return Err(self.unexpected(&["`,`", "`;`", "`=`"])),
            }
        }
    }

    fn assignment(&mut self) -> PResult<Stmt> {
        let (target, line, col) = self.ident()?;
        self.uses.push(Use { name: target.clone(), line, col });
        let op = self.peek().clone();
        match op {
            TokenKind::Eq => {
                self.advance();
                self.assigned_value(&target)
            }
            TokenKind::PlusPlus | TokenKind::MinusMinus => {
                self.advance();
                let op = if op == TokenKind::PlusPlus { BinOp::Add } else { BinOp::Sub };
                Ok(Stmt::assign(target.clone(), Expr::binary(op, Expr::var(target), Expr::int(1))))
            }
            TokenKind::PlusEq | TokenKind::MinusEq => {
                self.advance();
                let (line, col) = self.here();
                let (rhs, ty) = self.expr()?;
                expect_int(ty, &rhs, line, col)?;
                let op = if op == TokenKind::PlusEq { BinOp::Add } else { BinOp::Sub };
                Ok(Stmt::assign(target.clone(), Expr::binary(op, Expr::var(target), rhs)))
            }
            _ => Err(self.unexpected(&["`=`", "`++`", "`--`", "`+=`", "`-=`"])),
        }
    }

    fn assigned_value(&mut self, target: &str) -> PResult<Stmt> {
        if *self.peek() == TokenKind::KwNondet && *self.peek_at(1) == TokenKind::LParen {
            self.advance();
            self.advance();
            self.expect(TokenKind::RParen, "`)`")?;
            return Ok(Stmt::Havoc(target.to_string()));
        }
        let (line, col) = self.here();
        let (value, ty) = self.expr()?;
        expect_int(ty, &value, line, col)?;
        Ok(Stmt::assign(target, value))
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        self.advance();
        let cond = self.condition()?;
        let then_branch = self.block()?;
        let else_branch = if *self.peek() == TokenKind::KwElse {
            self.advance();
            self.block()?
        } else {
            Vec::new()
        };
        Ok(Stmt::If { cond, then_branch, else_branch })
    }

    /// `( bool-expr )`
    fn condition(&mut self) -> PResult<Expr> {
        self.expect(TokenKind::LParen, "`(`")?;
        let (line, col) = self.here();
        let (cond, ty) = self.expr()?;
        if ty != Ty::Bool {
            return Err(FrontendError::Type {
                line,
                col,
                message: format!("condition `{cond}` must be boolean, found {ty}"),
            });
        }
        self.expect(TokenKind::RParen, "`)`")?;
        Ok(cond)
    }

    fn annotation_formula(&mut self, text: &str, line: usize, col: usize) -> PResult<Expr> {
        let tokens = tokenize_at(text, line, col)?;
        let mut sub = Parser { tokens, pos: 0, next_loop: 0, decls: Vec::new(), uses: Vec::new(), first_stmt: None };
        let (l, c) = sub.here();
        let (e, ty) = sub.expr()?;
        sub.expect(TokenKind::Eof, "end of annotation")?;
        if ty != Ty::Bool {
            return Err(FrontendError::Type { line: l, col: c, message: format!("annotation `{e}` must be boolean") });
        }
        self.uses.append(&mut sub.uses);
        Ok(e)
    }

    pub(crate) fn expr(&mut self) -> PResult<(Expr, Ty)> {
        self.logical(BinOp::Or)
    }

    fn logical(&mut self, op: BinOp) -> PResult<(Expr, Ty)> {
        let (token, next): (TokenKind, fn(&mut Self) -> PResult<(Expr, Ty)>) = match op {
            BinOp::Or => (TokenKind::OrOr, |p| p.logical(BinOp::And)),
            _ => (TokenKind::AndAnd, Self::comparison),
        };
        let (line, col) = self.here();
        let (mut lhs, mut lty) = next(self)?;
        while *self.peek() == token {
            let (oline, ocol) = self.here();
            self.advance();
            let (rhs, rty) = next(self)?;
            if lty != Ty::Bool || rty != Ty::Bool {
                let bad = if lty != Ty::Bool { &lhs } else { &rhs };
                let (l, c) = if lty != Ty::Bool { (line, col) } else { (oline, ocol) };
                return Err(FrontendError::Type {
                    line: l,
                    col: c,
                    message: format!("operand `{bad}` of `{}` must be boolean", op.symbol()),
                });
            }
            lhs = Expr::binary(op, lhs, rhs);
            lty = Ty::Bool;
        }
        Ok((lhs, lty))
    }

    fn comparison(&mut self) -> PResult<(Expr, Ty)> {
        let (line, col) = self.here();
        let (lhs, lty) = self.additive()?;
        let op = match self.peek() {
            TokenKind::EqEq => BinOp::Eq,
            TokenKind::NotEq => BinOp::Ne,
            TokenKind::Lt => BinOp::Lt,
            TokenKind::Le => BinOp::Le,
            TokenKind::Gt => BinOp::Gt,
            TokenKind::Ge => BinOp::Ge,
            _ => return Ok((lhs, lty)),
        };
        let (oline, ocol) = self.here();
        self.advance();
        let (rhs, rty) = self.additive()?;
        expect_int(lty, &lhs, line, col)?;
        expect_int(rty, &rhs, oline, ocol)?;
        if matches!(self.peek(), TokenKind::EqEq | TokenKind::NotEq | TokenKind::Lt | TokenKind::Le | TokenKind::Gt | TokenKind::Ge) {
            let (line, col) = self.here();
            return Err(FrontendError::Parse {
                line,
                col,
                expected: vec!["`&&`".into(), "`||`".into(), "`)`".into()],
                found: format!("{} (comparisons do not chain)", self.peek()),
            });
        }
        Ok((Expr::binary(op, lhs, rhs), Ty::Bool))
    }

    fn additive(&mut self) -> PResult<(Expr, Ty)> {
        let (line, col) = self.here();
        let (mut lhs, lty) = self.multiplicative()?;
        let mut first = Some((lty, line, col));
        loop {
            let op = match self.peek() {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => return Ok((lhs, first.map(|f| f.0).unwrap_or(Ty::Int))),
            };
            if let Some((ty, l, c)) = first.take() {
                expect_int(ty, &lhs, l, c)?;
            }
            self.advance();
            let (line, col) = self.here();
            let (rhs, rty) = self.multiplicative()?;
            expect_int(rty, &rhs, line, col)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> PResult<(Expr, Ty)> {
        let (line, col) = self.here();
        let (mut lhs, lty) = self.unary()?;
        let mut first = Some((lty, line, col));
        while *self.peek() == TokenKind::Star {
            if let Some((ty, l, c)) = first.take() {
                expect_int(ty, &lhs, l, c)?;
            }
            let (oline, ocol) = self.here();
            self.advance();
            let (line, col) = self.here();
            let (rhs, rty) = self.unary()?;
            expect_int(rty, &rhs, line, col)?;
            if !lhs.is_var_free() && !rhs.is_var_free() {
                return Err(FrontendError::Type {
                    line: oline,
                    col: ocol,
                    message: format!("nonlinear product `{lhs} * {rhs}`: one factor must be constant"),
                });
            }
            lhs = Expr::binary(BinOp::Mul, lhs, rhs);
        }
        Ok((lhs, first.map(|f| f.0).unwrap_or(Ty::Int)))
    }

    fn unary(&mut self) -> PResult<(Expr, Ty)> {
        let (line, col) = self.here();
        match self.peek() {
            TokenKind::Minus => {
                self.advance();
                if let TokenKind::IntLit(v) = *self.peek() {
                    self.advance();
                    return Ok((Expr::Int(-v), Ty::Int));
                }
                let (inner, ty) = self.unary()?;
                expect_int(ty, &inner, line, col)?;
                Ok((Expr::neg(inner), Ty::Int))
            }
            TokenKind::Bang => {
                self.advance();
                let (inner, ty) = self.unary()?;
                if ty != Ty::Bool {
                    return Err(FrontendError::Type { line, col, message: format!("operand `{inner}` of `!` must be boolean") });
                }
                Ok((Expr::not(inner), Ty::Bool))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<(Expr, Ty)> {
        let (line, col) = self.here();
        match self.peek().clone() {
            TokenKind::IntLit(v) => {
                self.advance();
                Ok((Expr::Int(v), Ty::Int))
            }
            TokenKind::KwTrue | TokenKind::KwFalse => {
                let b = *self.peek() == TokenKind::KwTrue;
                self.advance();
                Ok((Expr::Bool(b), Ty::Bool))
            }
            TokenKind::Ident(name) => {
                self.advance();
                self.uses.push(Use { name: name.clone(), line, col });
                Ok((Expr::Var(name), Ty::Int))
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::KwNondet => Err(FrontendError::Invalid {
                line,
                col,
                message: "nondet() may only appear as the whole right-hand side of an assignment".into(),
            }),
            _ => Err(self.unexpected(&["integer", "identifier", "`(`", "`-`", "`!`", "`true`", "`false`"])),
        }
    }
}

fn expect_int(ty: Ty, e: &Expr, line: usize, col: usize) -> PResult<()> {
    if ty == Ty::Int {
        Ok(())
    } else {
        Err(FrontendError::Type { line, col, message: format!("expected an integer expression, found boolean `{e}`") })
    }
}

/// Parse a standalone expression (used for invariants supplied on the
/// command line or by a language model). Variables are not checked against
/// any declaration list.
pub fn parse_expr(text: &str) -> PResult<Expr> {
    let tokens = tokenize_at(text, 1, 1)?;
    let mut p = Parser { tokens, pos: 0, next_loop: 0, decls: Vec::new(), uses: Vec::new(), first_stmt: None };
    let (e, _) = p.expr()?;
    p.expect(TokenKind::Eof, "end of expression")?;
    Ok(e)
}

/// Parse a boolean formula, rejecting integer-valued text.
pub fn parse_formula(text: &str) -> PResult<Expr> {
    let e = parse_expr(text)?;
    match e.ty() {
        Ok(Ty::Bool) => Ok(e),
        Ok(Ty::Int) => Err(FrontendError::Type { line: 1, col: 1, message: format!("`{e}` is not a boolean formula") }),
        Err(message) => Err(FrontendError::Type { line: 1, col: 1, message }),
    }
}
