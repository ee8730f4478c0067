//! MiniC frontend: tokenizer, recursive-descent parser and pretty-printer.
//!
//! The accepted language is documented in `docs/minic.md`.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;

use thiserror::Error;

pub use ast::*;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse, parse_expr, parse_formula};
pub use pretty::{pretty_print, print_stmts};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: lex error: {message}")]
    Lex { line: usize, col: usize, message: String },
    #[error("{line}:{col}: parse error: expected {}, found {found}", expected.join(" or "))]
    Parse { line: usize, col: usize, expected: Vec<String>, found: String },
    #[error("{line}:{col}: type error: {message}")]
    Type { line: usize, col: usize, message: String },
    #[error("{line}:{col}: undeclared variable `{name}`")]
    Undeclared { name: String, line: usize, col: usize },
    #[error("{line}:{col}: {message}")]
    Invalid { line: usize, col: usize, message: String },
}

impl FrontendError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            FrontendError::Lex { line, col, .. }
            | FrontendError::Parse { line, col, .. }
            | FrontendError::Type { line, col, .. }
            | FrontendError::Undeclared { line, col, .. }
            | FrontendError::Invalid { line, col, .. } => (*line, *col),
        }
    }
}

/// Tokenize and parse in one step.
pub fn parse_program(source: &str) -> Result<Program, FrontendError> {
    parse(tokenize(source)?)
}
