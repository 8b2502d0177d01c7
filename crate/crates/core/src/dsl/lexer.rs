use std::fmt;
use std::iter::Peekable;
use std::str::CharIndices;

use serde::{Deserialize, Serialize};

use super::{ParseError, Pos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Ident,
    Keyword,
    Number,
    Integer,
    String,
    LBrace,
    RBrace,
    Equals,
    Of,
    Arrow,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenKind::Ident => "identifier",
            TokenKind::Keyword => "keyword",
            TokenKind::Number => "number",
            TokenKind::Integer => "integer",
            TokenKind::String => "string",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::Equals => "`=`",
            TokenKind::Of => "`of`",
            TokenKind::Arrow => "`->`",
            TokenKind::Eof => "end of input",
        })
    }
}

pub const KEYWORDS: &[&str] = &[
    "case",
    "target",
    "scope",
    "profile",
    "testing",
    "detection",
    "srf",
    "oos",
    "labels",
    "audit",
    "observed",
    "assume",
    "expert",
    "data",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text, except for strings where it holds the unescaped value.
    pub lexeme: String,
    pub pos: Pos,
}

impl Token {
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.lexeme == kw
    }

    pub fn describe(&self) -> String {
        match self.kind {
            TokenKind::Eof => "end of input".to_string(),
            TokenKind::String => format!("string {:?}", self.lexeme),
            TokenKind::Keyword => format!("keyword `{}`", self.lexeme),
            _ => format!("`{}`", self.lexeme),
        }
    }
}

struct Lexer<'a> {
    chars: Peekable<CharIndices<'a>>,
    src: &'a str,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
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

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map_or(self.src.len(), |&(i, _)| i)
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn eat_digits(&mut self) -> usize {
        let mut n = 0;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
            n += 1;
        }
        n
    }

    fn number(&mut self, start: Pos) -> Result<Token, ParseError> {
        let begin = self.offset();
        let negative = self.peek() == Some('-');
        if negative {
            self.bump();
        }
        let int_digits = self.eat_digits();
        let mut real = negative;
        let mut frac_digits = 0;
        if self.peek() == Some('.') {
            self.bump();
            real = true;
            frac_digits = self.eat_digits();
        }
        if int_digits + frac_digits == 0 {
            return Err(ParseError::lexical(start, "malformed number"));
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            self.bump();
            real = true;
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if self.eat_digits() == 0 {
                return Err(ParseError::lexical(start, "malformed exponent"));
            }
        }
        let end = self.offset();
        let text = &self.src[begin..end];
        if real {
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Token {
                    kind: TokenKind::Number,
                    lexeme: text.to_string(),
                    pos: start,
                }),
                _ => Err(ParseError::lexical(start, format!("number `{text}` is not finite"))),
            }
        } else if text.parse::<u64>().is_ok() {
            Ok(Token {
                kind: TokenKind::Integer,
                lexeme: text.to_string(),
                pos: start,
            })
        } else {
            Err(ParseError::lexical(start, format!("integer `{text}` is too large")))
        }
    }

    fn string(&mut self, start: Pos) -> Result<Token, ParseError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(ParseError::lexical(start, "unterminated string")),
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some(c @ ('"' | '\\')) => out.push(c),
                    Some(c) => {
                        return Err(ParseError::lexical(
                            start,
                            format!("unknown escape `\\{c}` in string"),
                        ))
                    }
                    None => return Err(ParseError::lexical(start, "unterminated string")),
                },
                Some(c) => out.push(c),
            }
        }
        Ok(Token {
            kind: TokenKind::String,
            lexeme: out,
            pos: start,
        })
    }

    fn word(&mut self, start: Pos) -> Token {
        let begin = self.offset();
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        let end = self.offset();
        let text = &self.src[begin..end];
        let kind = if text == "of" {
            TokenKind::Of
        } else if KEYWORDS.contains(&text) {
            TokenKind::Keyword
        } else {
            TokenKind::Ident
        };
        Token {
            kind,
            lexeme: text.to_string(),
            pos: start,
        }
    }

    fn punct(&mut self, kind: TokenKind, text: &str, start: Pos) -> Token {
        for _ in text.chars() {
            self.bump();
        }
        Token {
            kind,
            lexeme: text.to_string(),
            pos: start,
        }
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        chars: src.char_indices().peekable(),
        src,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        let start = lx.pos();
        let Some(c) = lx.peek() else {
            out.push(Token {
                kind: TokenKind::Eof,
                lexeme: String::new(),
                pos: start,
            });
            return Ok(out);
        };
        let tok = match c {
            c if c.is_whitespace() => {
                lx.bump();
                continue;
            }
            '#' => {
                while !matches!(lx.peek(), None | Some('\n')) {
                    lx.bump();
                }
                continue;
            }
            '{' => lx.punct(TokenKind::LBrace, "{", start),
            '}' => lx.punct(TokenKind::RBrace, "}", start),
            '=' => lx.punct(TokenKind::Equals, "=", start),
            '"' => lx.string(start)?,
            '-' => {
                let mut ahead = lx.src[lx.offset()..].chars().skip(1);
                match ahead.next() {
                    Some('>') => lx.punct(TokenKind::Arrow, "->", start),
                    Some(d) if d.is_ascii_digit() || d == '.' => lx.number(start)?,
                    _ => return Err(ParseError::lexical(start, "unexpected character `-`")),
                }
            }
            c if c.is_ascii_digit() || c == '.' => lx.number(start)?,
            c if c.is_ascii_alphabetic() || c == '_' => lx.word(start),
            other => {
                return Err(ParseError::lexical(
                    start,
                    format!("unexpected character {other:?}"),
                ))
            }
        };
        out.push(tok);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn token_kinds() {
        use TokenKind::*;
        assert_eq!(
            kinds("case \"x\" { p_oos = 0.5 observed = 85 of 200 0 -> 1e-3 }"),
            vec![
                Keyword, String, LBrace, Ident, Equals, Number, Keyword, Equals, Integer, Of,
                Integer, Integer, Arrow, Number, RBrace, Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("# comment\n  target {\n}").unwrap();
        assert_eq!(toks[0].pos, Pos { line: 2, col: 3 });
        assert_eq!(toks[1].pos, Pos { line: 2, col: 10 });
        assert_eq!(toks[2].pos, Pos { line: 3, col: 1 });
    }

    #[test]
    fn string_escapes() {
        let toks = tokenize(r#""a \"quoted\" \\ path""#).unwrap();
        assert_eq!(toks[0].lexeme, r#"a "quoted" \ path"#);
        assert!(tokenize(r#""bad \n escape""#).is_err());
    }

    #[test]
    fn lexical_errors() {
        let e = tokenize("case \"open").unwrap_err();
        assert_eq!((e.line, e.col), (1, 6));
        assert!(e.message.contains("unterminated"));
        let e = tokenize("x = 1e999").unwrap_err();
        assert!(e.message.contains("finite"));
        let e = tokenize("x = 99999999999999999999999").unwrap_err();
        assert!(e.message.contains("too large"));
        let e = tokenize("a\n @").unwrap_err();
        assert_eq!((e.line, e.col), (2, 2));
        assert!(tokenize("-").is_err());
        assert!(tokenize(".").is_err());
        assert!(tokenize("1e").is_err());
    }

    #[test]
    fn negative_numbers_are_real() {
        let toks = tokenize("-5 -0.25").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Number);
        assert_eq!(toks[1].lexeme, "-0.25");
    }
}
