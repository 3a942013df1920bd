//! Tokenizer.

use crate::ast::SourceLoc;
use thiserror::Error;

pub const KEYWORDS: [&str; 18] = [
    "skip", "if", "then", "elif", "else", "fi", "while", "do", "od", "for", "case", "of", "esac", "fun", "var", "val",
    "read", "write",
];

/// Operators and punctuation, longest first so that matching is maximal.
const SYMBOLS: [&str; 25] = [
    ":=", "==", "!=", "<=", ">=", "&&", "!!", "->", "+", "-", "*", "/", "%", "<", ">", "=", "(", ")", "[", "]", "{",
    "}", ",", ";", "|",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Keyword(&'static str),
    Ident(String),
    /// Capitalized name, used as an S-expression tag.
    UIdent(String),
    /// Magnitude of an integer literal; the sign is handled by the parser.
    Int(u64),
    Str(String),
    Chr(char),
    Sym(&'static str),
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Keyword(k) => write!(f, "`{k}`"),
            Tok::Ident(x) | Tok::UIdent(x) => write!(f, "identifier `{x}`"),
            Tok::Int(n) => write!(f, "integer {n}"),
            Tok::Str(_) => f.write_str("string literal"),
            Tok::Chr(_) => f.write_str("character literal"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub text: String,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{loc}: {message}")]
pub struct LexError {
    pub loc: SourceLoc,
    pub message: String,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map_or(self.src.len(), |&(i, _)| i)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn loc(&self) -> SourceLoc {
        SourceLoc::new(self.line, self.col)
    }

    fn escape(&mut self, quote: char, start: SourceLoc) -> Result<char, LexError> {
        let err = |message: &str| LexError { loc: start, message: message.into() };
        match self.bump() {
            Some('n') => Ok('\n'),
            Some('t') => Ok('\t'),
            Some('\\') => Ok('\\'),
            Some(c) if c == quote => Ok(c),
            Some(c) => Err(err(&format!("unknown escape `\\{c}`"))),
            None => Err(err("unterminated literal")),
        }
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor { chars: src.char_indices().peekable(), src, line: 1, col: 1 };
    let mut tokens = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                cur.bump();
            } else if c == '-' && src[cur.offset()..].starts_with("--") {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
            } else {
                break;
            }
        }
        let loc = cur.loc();
        let start = cur.offset();
        let Some(c) = cur.peek() else {
            tokens.push(Token { tok: Tok::Eof, text: String::new(), loc });
            return Ok(tokens);
        };
        let tok = if c.is_ascii_digit() {
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
            let digits = &src[start..cur.offset()];
            match digits.parse::<u64>() {
                Ok(n) => Tok::Int(n),
                Err(_) => return Err(LexError { loc, message: format!("integer literal {digits} is too large") }),
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            while cur.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                cur.bump();
            }
            let word = &src[start..cur.offset()];
            if let Some(k) = KEYWORDS.iter().find(|&&k| k == word) {
                Tok::Keyword(k)
            } else if c.is_ascii_uppercase() {
                Tok::UIdent(word.to_string())
            } else {
                Tok::Ident(word.to_string())
            }
        } else if c == '"' {
            cur.bump();
            let mut s = String::new();
            loop {
                match cur.bump() {
                    None => return Err(LexError { loc, message: "unterminated string literal".into() }),
                    Some('"') => break,
                    Some('\\') => s.push(cur.escape('"', loc)?),
                    Some(c) => s.push(c),
                }
            }
            Tok::Str(s)
        } else if c == '\'' {
            cur.bump();
            let ch = match cur.bump() {
                Some('\\') => cur.escape('\'', loc)?,
                Some('\'') | None => return Err(LexError { loc, message: "empty character literal".into() }),
                Some(c) => c,
            };
            if cur.bump() != Some('\'') {
                return Err(LexError { loc, message: "unterminated character literal".into() });
            }
            Tok::Chr(ch)
        } else if let Some(sym) = SYMBOLS.iter().find(|s| src[start..].starts_with(**s)) {
            for _ in 0..sym.len() {
                cur.bump();
            }
            Tok::Sym(sym)
        } else {
            return Err(LexError { loc, message: format!("unexpected character `{c}`") });
        };
        let text = src[start..cur.offset()].to_string();
        tokens.push(Token { tok, text, loc });
    }
}
