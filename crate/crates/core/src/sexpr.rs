//! S-expression reader shared by the PDDL, policy and plan formats.
//!
//! Reading happens in two stages: a lexer that turns text into positioned
//! tokens, and a recursive-descent reader that builds a tree of [`SExpr`].
//! The format-specific parsers then walk the tree, so every error they
//! raise can point at a line and column.

use std::fmt;

use thiserror::Error;

/// 1-based line and column of a character in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl Pos {
    pub fn new(line: usize, col: usize) -> Self {
        Pos { line, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unterminated string literal")]
    UnterminatedString,
    #[error("unexpected ')'")]
    UnbalancedClose,
    #[error("unexpected end of input, missing ')'")]
    UnexpectedEof,
    #[error("expected {expected}, found {found}")]
    Expected { expected: String, found: String },
    #[error("predicate '{predicate}' takes {expected} argument(s), found {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown type '{0}'")]
    UnknownType(String),
    #[error("unknown predicate '{0}'")]
    UnknownPredicate(String),
    #[error("unknown action '{0}'")]
    UnknownAction(String),
    #[error("duplicate action '{0}'")]
    DuplicateAction(String),
    #[error("duplicate predicate '{0}'")]
    DuplicatePredicate(String),
    #[error("duplicate object '{0}'")]
    DuplicateObject(String),
    #[error("duplicate variable '{0}'")]
    DuplicateVariable(String),
    #[error("'{0}' is not allowed in an action precondition; preconditions are literal conjunctions")]
    DisallowedInPrecondition(String),
    #[error("undeclared variable '{0}'")]
    UndeclaredVariable(String),
    #[error("undeclared object '{0}'")]
    UndeclaredObject(String),
    #[error("'{name}' has type '{found}' but '{expected}' is required")]
    TypeMismatch {
        name: String,
        expected: String,
        found: String,
    },
    #[error("quantified variable '{0}' shadows an enclosing variable")]
    ShadowedVariable(String),
    #[error("unsupported requirement '{0}'")]
    UnsupportedRequirement(String),
    #[error("problem is for domain '{found}' but domain '{expected}' was given")]
    DomainMismatch { expected: String, found: String },
    #[error("atom {0} is both added and deleted")]
    ConflictingEffect(String),
    #[error("{0}")]
    Unsupported(String),
}

/// A parse failure with the position of the offending input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {kind}")]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn new(pos: Pos, kind: ParseErrorKind) -> Self {
        ParseError { pos, kind }
    }
}

pub type ParseResult<T> = Result<T, ParseError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Open,
    Close,
    Symbol(String),
    Str(String),
}

fn is_symbol_char(c: char) -> bool {
    c.is_alphanumeric() || "-_?:.=<>/*+!@$%&^~".contains(c)
}

/// Split `text` into tokens. `;` starts a comment running to end of line.
pub fn tokenize(text: &str) -> ParseResult<Vec<(Token, Pos)>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);

    // advance one character, keeping line/col in sync
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let pos = Pos::new(line, col);
        match c {
            '(' => {
                bump!();
                out.push((Token::Open, pos));
            }
            ')' => {
                bump!();
                out.push((Token::Close, pos));
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some(e) => s.push(e),
                            None => {
                                return Err(ParseError::new(pos, ParseErrorKind::UnterminatedString))
                            }
                        },
                        Some(ch) => s.push(ch),
                        None => {
                            return Err(ParseError::new(pos, ParseErrorKind::UnterminatedString))
                        }
                    }
                }
                out.push((Token::Str(s), pos));
            }
            c if c.is_whitespace() => {
                bump!();
            }
            c if is_symbol_char(c) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_symbol_char(c) {
                        break;
                    }
                    s.push(c);
                    bump!();
                }
                out.push((Token::Symbol(s), pos));
            }
            other => return Err(ParseError::new(pos, ParseErrorKind::UnexpectedChar(other))),
        }
    }
    Ok(out)
}

/// A node of the s-expression tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Symbol(String, Pos),
    Str(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Symbol(_, p) | SExpr::Str(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol(s, _) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            _ => None,
        }
    }

    /// Short rendering used in "expected X, found Y" messages.
    pub fn describe(&self) -> String {
        match self {
            SExpr::Symbol(s, _) => format!("'{s}'"),
            SExpr::Str(s, _) => format!("string {s:?}"),
            SExpr::List(items, _) => match items.first().and_then(SExpr::as_symbol) {
                Some(head) => format!("list '({head} ...)'"),
                None => "list".to_string(),
            },
        }
    }

    /// The symbol, lower-cased, or an `Expected` error.
    pub fn expect_symbol(&self, what: &str) -> ParseResult<String> {
        match self {
            SExpr::Symbol(s, _) => Ok(s.to_lowercase()),
            other => Err(expected(other.pos(), what, &other.describe())),
        }
    }

    pub fn expect_list(&self, what: &str) -> ParseResult<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Ok(items),
            other => Err(expected(other.pos(), what, &other.describe())),
        }
    }

    /// Lower-cased head symbol of a non-empty list.
    pub fn head(&self) -> Option<String> {
        self.as_list()
            .and_then(|items| items.first())
            .and_then(SExpr::as_symbol)
            .map(str::to_lowercase)
    }
}

pub fn expected(pos: Pos, what: &str, found: &str) -> ParseError {
    ParseError::new(
        pos,
        ParseErrorKind::Expected {
            expected: what.to_string(),
            found: found.to_string(),
        },
    )
}

/// Read every top-level expression in `text`.
pub fn read_all(text: &str) -> ParseResult<Vec<SExpr>> {
    let tokens = tokenize(text)?;
    let end = end_pos(text);
    let mut idx = 0;
    let mut out = Vec::new();
    while idx < tokens.len() {
        out.push(read_one(&tokens, &mut idx, end)?);
    }
    Ok(out)
}

/// Read exactly one expression; trailing input is an error.
pub fn read_single(text: &str) -> ParseResult<SExpr> {
    let mut all = read_all(text)?;
    match all.len() {
        0 => Err(expected(end_pos(text), "an expression", "end of input")),
        1 => Ok(all.pop().unwrap()),
        _ => Err(expected(all[1].pos(), "end of input", &all[1].describe())),
    }
}

fn end_pos(text: &str) -> Pos {
    let line = text.matches('\n').count() + 1;
    let col = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Pos::new(line, col)
}

fn read_one(tokens: &[(Token, Pos)], idx: &mut usize, end: Pos) -> ParseResult<SExpr> {
    let (tok, pos) = &tokens[*idx];
    *idx += 1;
    match tok {
        Token::Symbol(s) => Ok(SExpr::Symbol(s.clone(), *pos)),
        Token::Str(s) => Ok(SExpr::Str(s.clone(), *pos)),
        Token::Close => Err(ParseError::new(*pos, ParseErrorKind::UnbalancedClose)),
        Token::Open => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*idx) {
                    None => return Err(ParseError::new(end, ParseErrorKind::UnexpectedEof)),
                    Some((Token::Close, _)) => {
                        *idx += 1;
                        return Ok(SExpr::List(items, *pos));
                    }
                    Some(_) => items.push(read_one(tokens, idx, end)?),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_carry_positions() {
        let toks = tokenize("(a\n  ?b) ; note\n:c").unwrap();
        assert_eq!(toks[0], (Token::Open, Pos::new(1, 1)));
        assert_eq!(toks[1], (Token::Symbol("a".into()), Pos::new(1, 2)));
        assert_eq!(toks[2], (Token::Symbol("?b".into()), Pos::new(2, 3)));
        assert_eq!(toks[3], (Token::Close, Pos::new(2, 5)));
        assert_eq!(toks[4], (Token::Symbol(":c".into()), Pos::new(3, 1)));
    }

    #[test]
    fn strings_and_escapes() {
        let toks = tokenize(r#""a \"b\" c""#).unwrap();
        assert_eq!(toks[0].0, Token::Str("a \"b\" c".into()));
        let err = tokenize("\n  \"open").unwrap_err();
        assert_eq!(err.pos, Pos::new(2, 3));
        assert_eq!(err.kind, ParseErrorKind::UnterminatedString);
    }

    #[test]
    fn bad_character_is_positioned() {
        let err = tokenize("(a\n b #)").unwrap_err();
        assert_eq!(err.pos, Pos::new(2, 4));
        assert_eq!(err.kind, ParseErrorKind::UnexpectedChar('#'));
    }

    #[test]
    fn unbalanced_input() {
        let err = read_all("(a (b)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnexpectedEof);
        let err = read_all("(a))").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnbalancedClose);
        assert_eq!(err.pos, Pos::new(1, 4));
    }

    #[test]
    fn nested_lists() {
        let e = read_single("(and (at ?x l) (not (p)))").unwrap();
        let items = e.as_list().unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(e.head().as_deref(), Some("and"));
        assert_eq!(items[2].head().as_deref(), Some("not"));
    }

    #[test]
    fn single_rejects_trailing() {
        assert!(read_single("(a) (b)").is_err());
        assert!(read_single("  ").is_err());
    }
}
