//! MiniC tokenizer.
//!
//! Ordinary `//` and `/* */` comments are dropped. `//@` lines form a
//! separate annotation channel and come out as [`TokenKind::Annot`] tokens
//! carrying the raw formula text and its position.

use std::fmt;

use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotKind {
    Pre,
    Post,
    GoldInvariant(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    IntLit(i64),
    KwInt,
    KwIf,
    KwElse,
    KwWhile,
    KwAssume,
    KwAssert,
    KwNondet,
    KwTrue,
    KwFalse,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    /// `=`
    Eq,
    PlusEq,
    MinusEq,
    PlusPlus,
    MinusMinus,
    Plus,
    Minus,
    Star,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    /// `//@ kind: text`; `line`/`col` locate the first character of `text`.
    Annot { kind: AnnotKind, text: String, line: usize, col: usize },
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Ident(name) => return write!(f, "identifier `{name}`"),
            TokenKind::IntLit(v) => return write!(f, "integer `{v}`"),
            TokenKind::Annot { .. } => "annotation",
            TokenKind::Eof => "end of input",
            TokenKind::KwInt => "`int`",
            TokenKind::KwIf => "`if`",
            TokenKind::KwElse => "`else`",
            TokenKind::KwWhile => "`while`",
            TokenKind::KwAssume => "`assume`",
            TokenKind::KwAssert => "`assert`",
            TokenKind::KwNondet => "`nondet`",
            TokenKind::KwTrue => "`true`",
            TokenKind::KwFalse => "`false`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::Semi => "`;`",
            TokenKind::Comma => "`,`",
            TokenKind::Eq => "`=`",
            TokenKind::PlusEq => "`+=`",
            TokenKind::MinusEq => "`-=`",
            TokenKind::PlusPlus => "`++`",
            TokenKind::MinusMinus => "`--`",
            TokenKind::Plus => "`+`",
            TokenKind::Minus => "`-`",
            TokenKind::Star => "`*`",
            TokenKind::EqEq => "`==`",
            TokenKind::NotEq => "`!=`",
            TokenKind::Lt => "`<`",
            TokenKind::Le => "`<=`",
            TokenKind::Gt => "`>`",
            TokenKind::Ge => "`>=`",
            TokenKind::AndAnd => "`&&`",
            TokenKind::OrOr => "`||`",
            TokenKind::Bang => "`!`",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    tokens: Vec<Token>,
    _src: &'a str,
}

/// Tokenize `source`. Lines and columns are 1-based and count characters.
pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    tokenize_at(source, 1, 1)
}

/// Tokenize a fragment whose first character sits at (`line`, `col`) of a
/// larger file. Used for annotation formulas.
pub fn tokenize_at(source: &str, line: usize, col: usize) -> Result<Vec<Token>, FrontendError> {
    let mut lx = Lexer { chars: source.chars().collect(), pos: 0, line, col, tokens: Vec::new(), _src: source };
    lx.run()?;
    Ok(lx.tokens)
}

impl Lexer<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, col: usize, message: impl Into<String>) -> FrontendError {
        FrontendError::Lex { line, col, message: message.into() }
    }

    fn push(&mut self, kind: TokenKind, line: usize, col: usize) {
        self.tokens.push(Token { kind, line, col });
    }

    fn run(&mut self) -> Result<(), FrontendError> {
        while let Some(c) = self.peek() {
            let (line, col) = (self.line, self.col);
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            if c == '/' && self.peek_at(1) == Some('/') {
                if self.peek_at(2) == Some('@') {
                    self.annotation()?;
                } else {
                    while self.peek().is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                continue;
            }
            if c == '/' && self.peek_at(1) == Some('*') {
                self.bump();
                self.bump();
                loop {
                    match self.bump() {
                        Some('*') if self.peek() == Some('/') => {
                            self.bump();
                            break;
                        }
                        Some(_) => {}
                        None => return Err(self.error(line, col, "unterminated block comment")),
                    }
                }
                continue;
            }
            if c.is_ascii_digit() {
                let mut text = String::new();
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    text.push(self.bump().unwrap());
                }
                if self.peek().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') {
                    return Err(self.error(self.line, self.col, "identifier cannot start with a digit"));
                }
                let value = text
                    .parse::<i64>()
                    .map_err(|_| self.error(line, col, format!("integer literal `{text}` out of range")))?;
                self.push(TokenKind::IntLit(value), line, col);
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let mut text = String::new();
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                    text.push(self.bump().unwrap());
                }
                let kind = match text.as_str() {
                    "int" => TokenKind::KwInt,
                    "if" => TokenKind::KwIf,
                    "else" => TokenKind::KwElse,
                    "while" => TokenKind::KwWhile,
                    "assume" => TokenKind::KwAssume,
                    "assert" => TokenKind::KwAssert,
                    "nondet" => TokenKind::KwNondet,
                    "true" => TokenKind::KwTrue,
                    "false" => TokenKind::KwFalse,
                    _ => TokenKind::Ident(text),
                };
                self.push(kind, line, col);
                continue;
            }
            let two = self.peek_at(1);
            let (kind, len) = match (c, two) {
                ('=', Some('=')) => (TokenKind::EqEq, 2),
                ('!', Some('=')) => (TokenKind::NotEq, 2),
                ('<', Some('=')) => (TokenKind::Le, 2),
                ('>', Some('=')) => (TokenKind::Ge, 2),
                ('&', Some('&')) => (TokenKind::AndAnd, 2),
                ('|', Some('|')) => (TokenKind::OrOr, 2),
                ('+', Some('+')) => (TokenKind::PlusPlus, 2),
                ('-', Some('-')) => (TokenKind::MinusMinus, 2),
                ('+', Some('=')) => (TokenKind::PlusEq, 2),
                ('-', Some('=')) => (TokenKind::MinusEq, 2),
                ('=', _) => (TokenKind::Eq, 1),
                ('<', _) => (TokenKind::Lt, 1),
                ('>', _) => (TokenKind::Gt, 1),
                ('!', _) => (TokenKind::Bang, 1),
                ('+', _) => (TokenKind::Plus, 1),
                ('-', _) => (TokenKind::Minus, 1),
                ('*', _) => (TokenKind::Star, 1),
                ('(', _) => (TokenKind::LParen, 1),
                (')', _) => (TokenKind::RParen, 1),
                ('{', _) => (TokenKind::LBrace, 1),
                ('}', _) => (TokenKind::RBrace, 1),
                (';', _) => (TokenKind::Semi, 1),
                (',', _) => (TokenKind::Comma, 1),
                _ => return Err(self.error(line, col, format!("unexpected character `{c}`"))),
            };
            for _ in 0..len {
                self.bump();
            }
            self.push(kind, line, col);
        }
        let (line, col) = (self.line, self.col);
        self.push(TokenKind::Eof, line, col);
        Ok(())
    }

    fn annotation(&mut self) -> Result<(), FrontendError> {
        let (line, col) = (self.line, self.col);
        for _ in 0..3 {
            self.bump();
        }
        while self.peek().is_some_and(|c| c == ' ' || c == '\t') {
            self.bump();
        }
        let mut head = String::new();
        while self.peek().is_some_and(|c| c != ':' && c != '\n') {
            head.push(self.bump().unwrap());
        }
        if self.peek() != Some(':') {
            return Err(self.error(line, col, "annotation must have the form `//@ kind: formula`"));
        }
        self.bump();
        let head = head.trim();
        let kind = match head {
            "pre" => AnnotKind::Pre,
            "post" => AnnotKind::Post,
            _ => match head.strip_prefix("gold_invariant[").and_then(|r| r.strip_suffix(']')) {
                Some(idx) => AnnotKind::GoldInvariant(idx.trim().parse().map_err(|_| {
                    self.error(line, col, format!("bad loop index in annotation `{head}`"))
                })?),
                None => return Err(self.error(line, col, format!("unknown annotation kind `{head}`"))),
            },
        };
        let (text_line, text_col) = (self.line, self.col);
        let mut text = String::new();
        while self.peek().is_some_and(|c| c != '\n') {
            text.push(self.bump().unwrap());
        }
        self.push(TokenKind::Annot { kind, text, line: text_line, col: text_col }, line, col);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        let mut toks: Vec<_> = tokenize(src).unwrap().into_iter().map(|t| t.kind).collect();
        assert_eq!(toks.pop(), Some(TokenKind::Eof));
        toks
    }

    #[test]
    fn assignment_tokens() {
        assert_eq!(
            kinds("x = x + 1;"),
            vec![
                TokenKind::Ident("x".into()),
                TokenKind::Eq,
                TokenKind::Ident("x".into()),
                TokenKind::Plus,
                TokenKind::IntLit(1),
                TokenKind::Semi,
            ]
        );
    }

    #[test]
    fn annotation_channel() {
        let toks = kinds("//@ pre: n >= 0");
        assert_eq!(toks.len(), 1);
        match &toks[0] {
            TokenKind::Annot { kind, text, .. } => {
                assert_eq!(*kind, AnnotKind::Pre);
                assert_eq!(text.trim(), "n >= 0");
            }
            other => panic!("unexpected {other:?}"),
        }
        let toks = kinds("//@ gold_invariant[2]: x <= n\n");
        assert!(matches!(&toks[0], TokenKind::Annot { kind: AnnotKind::GoldInvariant(2), .. }));
    }

    #[test]
    fn comments_are_dropped() {
        assert_eq!(kinds("// hi\n/* a\n b */ ;"), vec![TokenKind::Semi]);
    }

    #[test]
    fn illegal_character_reports_column() {
        match tokenize("x @ 1") {
            Err(FrontendError::Lex { line, col, .. }) => assert_eq!((line, col), (1, 3)),
            other => panic!("expected lex error, got {other:?}"),
        }
        match tokenize("x = 1;\n  y # 2") {
            Err(FrontendError::Lex { line, col, .. }) => assert_eq!((line, col), (2, 5)),
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_annotation_is_rejected() {
        assert!(matches!(tokenize("//@ loopy: x"), Err(FrontendError::Lex { .. })));
    }
}
