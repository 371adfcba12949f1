//! S-expression reader for the SMT-LIB2 subset.
//!
//! Comments are kept aside (with their line numbers) because target
//! annotations live in them.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax error at {pos}: {msg}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Symbol(String),
    Keyword(String),
    Numeral(String),
    Hex(String),
    Binary(String),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(Atom, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn symbol(&self) -> Option<&str> {
        match self {
            Sexp::Atom(Atom::Symbol(s), _) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            _ => None,
        }
    }

    /// Applies `f` to every symbol atom, rebuilding the tree.
    pub fn map_symbols(&self, f: &dyn Fn(&str) -> Option<String>) -> Sexp {
        match self {
            Sexp::Atom(Atom::Symbol(s), p) => Sexp::Atom(Atom::Symbol(f(s).unwrap_or_else(|| s.clone())), *p),
            Sexp::Atom(a, p) => Sexp::Atom(a.clone(), *p),
            Sexp::List(items, p) => Sexp::List(items.iter().map(|i| i.map_symbols(f)).collect(), *p),
        }
    }

    /// Every symbol atom in the tree.
    pub fn symbols(&self, out: &mut Vec<String>) {
        match self {
            Sexp::Atom(Atom::Symbol(s), _) => out.push(s.clone()),
            Sexp::Atom(..) => {}
            Sexp::List(items, _) => items.iter().for_each(|i| i.symbols(out)),
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a, _) => match a {
                Atom::Symbol(s) => write!(f, "{}", super::expr::quote_symbol(s)),
                Atom::Keyword(s) => write!(f, ":{s}"),
                Atom::Numeral(s) => write!(f, "{s}"),
                Atom::Hex(s) => write!(f, "#x{s}"),
                Atom::Binary(s) => write!(f, "#b{s}"),
                Atom::Str(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            },
            Sexp::List(items, _) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub line: u32,
    pub text: String,
}

#[derive(Debug, Default)]
pub struct Document {
    pub items: Vec<Sexp>,
    pub comments: Vec<Comment>,
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader { chars: text.chars().peekable(), pos: Pos { line: 1, col: 1 } }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn err(&self, pos: Pos, msg: impl Into<String>) -> SyntaxError {
        SyntaxError { pos, msg: msg.into() }
    }
}

fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c)
}

/// Reads every top-level s-expression in `text`.
pub fn read_document(text: &str) -> Result<Document, SyntaxError> {
    let mut r = Reader::new(text);
    let mut doc = Document::default();
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    loop {
        let start = r.pos;
        let Some(c) = r.peek() else { break };
        let atom = match c {
            c if c.is_whitespace() => {
                r.bump();
                continue;
            }
            ';' => {
                let line = r.pos.line;
                let mut s = String::new();
                r.bump();
                while let Some(c) = r.peek() {
                    if c == '\n' {
                        break;
                    }
                    s.push(c);
                    r.bump();
                }
                doc.comments.push(Comment { line, text: s });
                continue;
            }
            '(' => {
                r.bump();
                stack.push((Vec::new(), start));
                continue;
            }
            ')' => {
                r.bump();
                let (items, p) = stack.pop().ok_or_else(|| r.err(start, "unbalanced `)`"))?;
                Sexp::List(items, p)
            }
            '|' => {
                r.bump();
                let mut s = String::new();
                loop {
                    match r.bump() {
                        Some('|') => break,
                        Some('\\') => return Err(r.err(start, "backslash in quoted symbol")),
                        Some(c) => s.push(c),
                        None => return Err(r.err(start, "unterminated quoted symbol")),
                    }
                }
                Sexp::Atom(Atom::Symbol(s), start)
            }
            '"' => {
                r.bump();
                let mut s = String::new();
                loop {
                    match r.bump() {
                        Some('"') if r.peek() == Some('"') => {
                            r.bump();
                            s.push('"');
                        }
                        Some('"') => break,
                        Some(c) => s.push(c),
                        None => return Err(r.err(start, "unterminated string literal")),
                    }
                }
                Sexp::Atom(Atom::Str(s), start)
            }
            '#' => {
                r.bump();
                let kind = r.bump();
                let mut s = String::new();
                while let Some(c) = r.peek() {
                    if !c.is_ascii_alphanumeric() {
                        break;
                    }
                    s.push(c);
                    r.bump();
                }
                match kind {
                    Some('x') if !s.is_empty() && s.chars().all(|c| c.is_ascii_hexdigit()) => {
                        Sexp::Atom(Atom::Hex(s), start)
                    }
                    Some('b') if !s.is_empty() && s.chars().all(|c| c == '0' || c == '1') => {
                        Sexp::Atom(Atom::Binary(s), start)
                    }
                    _ => return Err(r.err(start, "malformed `#` literal")),
                }
            }
            ':' => {
                r.bump();
                let mut s = String::new();
                while let Some(c) = r.peek().filter(|c| is_symbol_char(*c)) {
                    s.push(c);
                    r.bump();
                }
                Sexp::Atom(Atom::Keyword(s), start)
            }
            c if is_symbol_char(c) => {
                let mut s = String::new();
                while let Some(c) = r.peek().filter(|c| is_symbol_char(*c)) {
                    s.push(c);
                    r.bump();
                }
                if s.chars().all(|c| c.is_ascii_digit()) {
                    Sexp::Atom(Atom::Numeral(s), start)
                } else {
                    Sexp::Atom(Atom::Symbol(s), start)
                }
            }
            other => return Err(r.err(start, format!("unexpected character `{other}`"))),
        };
        match stack.last_mut() {
            Some((items, _)) => items.push(atom),
            None => doc.items.push(atom),
        }
    }
    if let Some((_, p)) = stack.last() {
        return Err(SyntaxError { pos: *p, msg: "unclosed `(`".into() });
    }
    Ok(doc)
}

/// Reads exactly one s-expression.
pub fn read_one(text: &str) -> Result<Sexp, SyntaxError> {
    let doc = read_document(text)?;
    let mut items = doc.items.into_iter();
    match (items.next(), items.next()) {
        (Some(s), None) => Ok(s),
        (None, _) => Err(SyntaxError { pos: Pos { line: 1, col: 1 }, msg: "expected a term".into() }),
        (Some(_), Some(extra)) => Err(SyntaxError { pos: extra.pos(), msg: "trailing input after term".into() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_atoms_and_lists() {
        let doc = read_document("(assert (bvule x #x29)) ; note\n(a |b c| #b01 12 :k \"s\")").unwrap();
        assert_eq!(doc.items.len(), 2);
        assert_eq!(doc.comments, vec![Comment { line: 1, text: " note".into() }]);
        assert_eq!(doc.items[1].to_string(), "(a |b c| #b01 12 :k \"s\")");
    }

    #[test]
    fn reports_positions() {
        let err = read_document("(a\n  (b)").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 1 });
        let err = read_document("(a)\n  )").unwrap_err();
        assert_eq!(err.pos, Pos { line: 2, col: 3 });
        let err = read_document("#q").unwrap_err();
        assert!(err.msg.contains("literal"));
    }
}
