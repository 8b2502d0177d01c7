//! Textual case format (`.qcase`): lexer, parser and canonical serializer.
//!
//! ```text
//! case "stop-sign" {
//!   target { p_target = 0.002 confidence = 0.9999 }
//!   testing { samples = 100000 failures = 100 }
//!   assume "no-out-of-scope-operation"
//! }
//! ```

mod lexer;
mod parser;
mod serialize;

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::evidence::{validate_bundle, CaseBundle, Field, SemanticError};

pub use lexer::{tokenize, Token, TokenKind, KEYWORDS};
pub use serialize::serialize;

/// A 1-based line and column, counted in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    /// Token kinds that would have been accepted, for syntax errors.
    pub expected: Vec<TokenKind>,
    pub found: Option<TokenKind>,
    pub code: String,
}

impl ParseError {
    pub(crate) fn at(pos: Pos, code: &str, message: impl Into<String>) -> Self {
        ParseError {
            line: pos.line,
            col: pos.col,
            message: message.into(),
            expected: Vec::new(),
            found: None,
            code: code.to_string(),
        }
    }

    pub(crate) fn lexical(pos: Pos, message: impl Into<String>) -> Self {
        Self::at(pos, "E_LEX", message)
    }

    pub fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, col {}: {}: {}",
            self.line, self.col, self.code, self.message
        )
    }
}

impl std::error::Error for ParseError {}

/// Where each bundle field was written in the source text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceMap {
    fields: HashMap<Field, Pos>,
    end: Pos,
}

impl Default for Pos {
    fn default() -> Self {
        Pos { line: 1, col: 1 }
    }
}

impl SourceMap {
    pub(crate) fn insert(&mut self, field: Field, pos: Pos) {
        self.fields.insert(field, pos);
    }

    pub(crate) fn set_end(&mut self, pos: Pos) {
        self.end = pos;
        self.fields.insert(Field::CaseEnd, pos);
    }

    /// Position of a field, falling back to the end of the case body.
    pub fn get(&self, field: Field) -> Pos {
        self.fields.get(&field).copied().unwrap_or(self.end)
    }

    /// Position a semantic error is reported at: the latest of its fields.
    pub fn locate(&self, err: &SemanticError) -> Pos {
        err.fields
            .iter()
            .map(|&f| self.get(f))
            .max()
            .unwrap_or(self.end)
    }
}

/// Parses and validates a case file.
///
/// All structural and semantic errors are reported, sorted by position.
/// Syntax errors stop parsing at the first offending token.
pub fn parse(text: &str) -> Result<CaseBundle, Vec<ParseError>> {
    let (bundle, map) = parse_unvalidated(text)?;
    let semantic = validate_bundle(&bundle);
    if semantic.is_empty() {
        Ok(bundle)
    } else {
        Err(locate_errors(&semantic, &map))
    }
}

/// Attaches source positions to bundle validation errors, sorted by position.
pub fn locate_errors(errs: &[SemanticError], map: &SourceMap) -> Vec<ParseError> {
    let mut out: Vec<ParseError> = errs
        .iter()
        .map(|e| ParseError::at(map.locate(e), e.code.as_str(), e.message.clone()))
        .collect();
    out.sort_by_key(ParseError::pos);
    out
}

/// Parses a case file without running bundle validation.
pub fn parse_unvalidated(text: &str) -> Result<(CaseBundle, SourceMap), Vec<ParseError>> {
    let tokens = tokenize(text).map_err(|e| vec![e])?;
    parser::Parser::new(tokens).run()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::evidence::{DetectionForm, LabelQuality, ScopeForm};

    pub(crate) const STOP_SIGN: &str = r#"
# Stop-sign recognition example
case "stop-sign" {
  target {
    p_target = 0.002
    confidence = 0.9999
  }
  scope {
    p_oos = 0.0005
    source = expert "operational design domain review"
  }
  testing {
    samples = 100000
    failures = 100
  }
  detection srf {
    observed = 85 of 200
  }
  detection oos {
    p_detect = 0.495
    source = expert "scope monitor assessment"
  }
  labels {
    rate = 0.001
  }
}
"#;

    fn first_err(text: &str) -> ParseError {
        parse(text).unwrap_err().remove(0)
    }

    #[test]
    fn parses_reference_case() {
        let b = parse(STOP_SIGN).unwrap();
        assert_eq!(b.id, "stop-sign");
        assert_eq!(b.target.p_target.value(), 0.002);
        assert_eq!(b.target.confidence.value(), 0.9999);
        assert_eq!(b.test.samples, 100_000);
        assert_eq!(b.test.failures, 100);
        assert!(matches!(b.scope.as_ref().unwrap().form, ScopeForm::Point(p) if p.value() == 0.0005));
        assert_eq!(
            b.detect_srf.as_ref().unwrap().form,
            DetectionForm::Campaign {
                detected: 85,
                total: 200
            }
        );
        assert!(matches!(b.detect_oos.as_ref().unwrap().form, DetectionForm::Point(p) if p.value() == 0.495));
        assert!(matches!(b.labels, Some(LabelQuality::Rate(r)) if r.value() == 0.001));
        assert!(b.assumptions.is_empty());
    }

    #[test]
    fn empty_input_expects_case() {
        let e = first_err("");
        assert_eq!((e.line, e.col), (1, 1));
        assert_eq!(e.expected, vec![TokenKind::Keyword]);
        assert_eq!(e.found, Some(TokenKind::Eof));
        assert!(e.message.contains("`case`"));
    }

    #[test]
    fn count_order_is_reported_at_testing_block() {
        let text = STOP_SIGN.replace("failures = 100\n", "failures = 200000\n");
        let errs = parse(&text).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].code, "E_COUNT_ORDER");
        assert_eq!((errs[0].line, errs[0].col), (14, 16));
    }

    #[test]
    fn semantic_errors_are_all_reported_in_order() {
        let text = STOP_SIGN
            .replace("p_target = 0.002", "p_target = 0")
            .replace("observed = 85 of 200", "observed = 201 of 200");
        let errs = parse(&text).unwrap_err();
        let codes: Vec<_> = errs.iter().map(|e| e.code.as_str()).collect();
        assert_eq!(codes, ["E_TARGET_RANGE", "E_COUNT_ORDER"]);
        assert!(errs[0].pos() < errs[1].pos());
    }

    #[test]
    fn missing_closed_scope_assumption() {
        let text = "case \"x\" {\n  target { p_target = 0.01 confidence = 0.9 }\n  testing { samples = 10 failures = 0 }\n}\n";
        let e = first_err(text);
        assert_eq!(e.code, "E_CLOSED_SCOPE_REQUIRED");
        assert_eq!((e.line, e.col), (4, 1));
    }

    #[test]
    fn scope_conflict_lands_on_the_later_item() {
        let text = STOP_SIGN.replace("  labels {", "  assume \"no-out-of-scope-operation\"\n  labels {");
        let e = first_err(&text);
        assert_eq!(e.code, "E_SCOPE_CONFLICT");
        assert_eq!(e.line, 23);
    }

    #[test]
    fn source_map_points_at_values() {
        let (_, map) = parse_unvalidated(STOP_SIGN).unwrap();
        assert_eq!(map.get(Field::PTarget), Pos { line: 5, col: 16 });
        assert_eq!(map.get(Field::DetectionObserved(crate::DetectionKind::Srf)), Pos { line: 17, col: 22 });
        assert_eq!(map.get(Field::CaseEnd), Pos { line: 26, col: 1 });
    }
}
