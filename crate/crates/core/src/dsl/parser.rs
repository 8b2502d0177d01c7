use crate::binomial::{ConfidenceLevel, Count, Probability};
use crate::evidence::{
    CaseBundle, DetectionEvidence, DetectionForm, DetectionKind, Field, LabelQuality,
    ProfilePoint, Provenance, SafetyTarget, ScopeEvidence, ScopeForm, Source, TestEvidence,
};

use super::lexer::{Token, TokenKind};
use super::{ParseError, Pos, SourceMap};

type PResult<T> = Result<T, ParseError>;

/// A value together with where it was written.
#[derive(Debug, Clone)]
struct At<T> {
    value: T,
    /// Start of the key or block that introduced the value.
    key: Pos,
    /// Start of the last token of the value.
    end: Pos,
}

#[derive(Debug, Clone)]
enum Value {
    Real(f64),
    Count(Count),
    Source(Source),
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    i: usize,
    errs: Vec<ParseError>,
    map: SourceMap,
}

impl Parser {
    pub(crate) fn new(toks: Vec<Token>) -> Self {
        Parser {
            toks,
            i: 0,
            errs: Vec::new(),
            map: SourceMap::default(),
        }
    }

    pub(crate) fn run(mut self) -> Result<(CaseBundle, SourceMap), Vec<ParseError>> {
        match self.case() {
            Ok(Some(bundle)) if self.errs.is_empty() => Ok((bundle, self.map)),
            Ok(_) => Err(self.finish()),
            Err(e) => {
                self.errs.push(e);
                Err(self.finish())
            }
        }
    }

    fn finish(mut self) -> Vec<ParseError> {
        self.errs.sort_by_key(ParseError::pos);
        self.errs
    }

    fn peek(&self) -> &Token {
        &self.toks[self.i]
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if t.kind != TokenKind::Eof {
            self.i += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[TokenKind], what: &str) -> ParseError {
        let t = self.peek();
        let mut e = ParseError::at(
            t.pos,
            "E_SYNTAX",
            format!("expected {what}, found {}", t.describe()),
        );
        e.expected = expected.to_vec();
        e.found = Some(t.kind);
        e
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Token> {
        if self.peek().kind == kind {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&[kind], &kind.to_string()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Token> {
        if self.peek().is_keyword(kw) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&[TokenKind::Keyword], &format!("`{kw}`")))
        }
    }

    fn structural(&mut self, pos: Pos, code: &str, message: impl Into<String>) {
        self.errs.push(ParseError::at(pos, code, message));
    }

    /// Stores `value` in `slot`, reporting a duplicate at the later occurrence.
    fn set_once<T>(&mut self, slot: &mut Option<At<T>>, value: At<T>, what: &str) {
        if slot.is_some() {
            self.structural(value.key, "E_DUPLICATE", format!("duplicate {what}"));
        } else {
            *slot = Some(value);
        }
    }

    fn case(&mut self) -> PResult<Option<CaseBundle>> {
        self.expect_keyword("case")?;
        let id = self.expect(TokenKind::String)?.lexeme;
        self.expect(TokenKind::LBrace)?;

        let mut mission_time: Option<At<f64>> = None;
        let mut target = None;
        let mut scope = None;
        let mut testing = None;
        let mut srf = None;
        let mut oos = None;
        let mut labels = None;
        let mut assumptions = Vec::new();

        loop {
            let t = self.peek().clone();
            match t.kind {
                TokenKind::RBrace => break,
                TokenKind::Ident => {
                    let (key, value) = self.kv()?;
                    if key.lexeme == "mission_time" {
                        let v = self.real(&key, value);
                        self.set_once(&mut mission_time, v, "key `mission_time`");
                    } else {
                        self.unknown_key(&key, "case body");
                    }
                }
                TokenKind::Keyword => match t.lexeme.as_str() {
                    "target" => {
                        let b = self.target()?;
                        self.set_once(&mut target, b, "block `target`");
                    }
                    "scope" => {
                        let b = self.scope()?;
                        self.set_once(&mut scope, b, "block `scope`");
                    }
                    "testing" => {
                        let b = self.testing()?;
                        self.set_once(&mut testing, b, "block `testing`");
                    }
                    "detection" => {
                        let b = self.detection()?;
                        match b.value.as_ref().map(|d| d.kind) {
                            Some(DetectionKind::Srf) => {
                                self.set_once(&mut srf, b, "block `detection srf`")
                            }
                            Some(DetectionKind::Oos) => {
                                self.set_once(&mut oos, b, "block `detection oos`")
                            }
                            None => {}
                        }
                    }
                    "labels" => {
                        let b = self.labels()?;
                        self.set_once(&mut labels, b, "block `labels`");
                    }
                    "assume" => {
                        self.advance();
                        let s = self.expect(TokenKind::String)?;
                        self.map.insert(Field::Assumption(assumptions.len()), s.pos);
                        assumptions.push(s.lexeme);
                    }
                    _ => return Err(self.block_expected()),
                },
                _ => return Err(self.block_expected()),
            }
        }
        let close = self.advance();
        self.map.set_end(close.pos);
        self.expect(TokenKind::Eof)?;

        if target.is_none() {
            self.structural(close.pos, "E_MISSING", "missing block `target`");
        }
        if testing.is_none() {
            self.structural(close.pos, "E_MISSING", "missing block `testing`");
        }

        if let Some(mt) = &mission_time {
            self.map.insert(Field::MissionTime, mt.end);
        }
        if let Some(s) = &scope {
            self.map.insert(Field::Scope, s.key);
        }
        for d in [&srf, &oos].into_iter().flatten() {
            if let Some(ev) = &d.value {
                self.map.insert(Field::Detection(ev.kind), d.key);
            }
        }

        let (Some(At { value: Some(target), .. }), Some(At { value: Some(test), .. })) =
            (target, testing)
        else {
            return Ok(None);
        };
        Ok(Some(CaseBundle {
            id,
            target,
            mission_time: mission_time.map(|m| m.value),
            scope: inner(scope),
            test,
            detect_srf: inner(srf),
            detect_oos: inner(oos),
            labels: inner(labels),
            assumptions,
        }))
    }

    fn block_expected(&self) -> ParseError {
        self.unexpected(
            &[TokenKind::Keyword, TokenKind::Ident, TokenKind::RBrace],
            "a block, `mission_time` or `}`",
        )
    }

    fn unknown_key(&mut self, key: &Token, block: &str) {
        self.structural(
            key.pos,
            "E_UNKNOWN_KEY",
            format!("unknown key `{}` in {block}", key.lexeme),
        );
    }

    /// `IDENT "=" (NUMBER | INTEGER | ("expert" | "data") STRING)`
    fn kv(&mut self) -> PResult<(Token, At<Value>)> {
        let key = self.expect(TokenKind::Ident)?;
        self.expect(TokenKind::Equals)?;
        let t = self.peek().clone();
        let value = match t.kind {
            TokenKind::Number => {
                self.advance();
                // The lexer only emits finite numbers.
                Value::Real(t.lexeme.parse().unwrap_or(f64::NAN))
            }
            TokenKind::Integer => {
                self.advance();
                Value::Count(t.lexeme.parse().unwrap_or(0))
            }
            TokenKind::Keyword if t.lexeme == "expert" || t.lexeme == "data" => {
                self.advance();
                let provenance = if t.lexeme == "expert" {
                    Provenance::Expert
                } else {
                    Provenance::Data
                };
                let s = self.expect(TokenKind::String)?;
                return Ok((
                    key.clone(),
                    At {
                        value: Value::Source(Source {
                            provenance,
                            justification: s.lexeme,
                        }),
                        key: key.pos,
                        end: s.pos,
                    },
                ));
            }
            _ => {
                return Err(self.unexpected(
                    &[TokenKind::Number, TokenKind::Integer, TokenKind::Keyword],
                    "a number or `expert`/`data` source",
                ))
            }
        };
        Ok((
            key.clone(),
            At {
                value,
                key: key.pos,
                end: t.pos,
            },
        ))
    }

    /// `"=" INTEGER "of" INTEGER`, after the introducing keyword.
    fn of_pair(&mut self) -> PResult<(Count, Count, Pos)> {
        self.expect(TokenKind::Equals)?;
        let a = self.expect(TokenKind::Integer)?;
        self.expect(TokenKind::Of)?;
        let b = self.expect(TokenKind::Integer)?;
        Ok((
            a.lexeme.parse().unwrap_or(0),
            b.lexeme.parse().unwrap_or(0),
            b.pos,
        ))
    }

    // The converters below report type and range errors but still return a
    // placeholder, so that a bad value is not also reported as missing. A
    // bundle is never built once a structural error has been recorded.

    fn real(&mut self, key: &Token, v: At<Value>) -> At<f64> {
        let x = match v.value {
            Value::Real(x) => x,
            Value::Count(c) => c as f64,
            Value::Source(_) => {
                self.structural(
                    v.end,
                    "E_TYPE",
                    format!("`{}` expects a number, not a source", key.lexeme),
                );
                0.0
            }
        };
        At {
            value: x,
            key: v.key,
            end: v.end,
        }
    }

    fn probability(&mut self, key: &Token, v: At<Value>) -> At<Probability> {
        let x = self.real(key, v);
        let value = Probability::new(x.value).unwrap_or_else(|_| {
            self.structural(
                x.end,
                "E_RANGE",
                format!("`{}` must lie in [0, 1], got {}", key.lexeme, x.value),
            );
            Probability::ZERO
        });
        At {
            value,
            key: x.key,
            end: x.end,
        }
    }

    fn count(&mut self, key: &Token, v: At<Value>) -> At<Count> {
        let value = match v.value {
            Value::Count(c) => c,
            _ => {
                self.structural(
                    v.end,
                    "E_TYPE",
                    format!("`{}` expects a non-negative integer", key.lexeme),
                );
                0
            }
        };
        At {
            value,
            key: v.key,
            end: v.end,
        }
    }

    fn source(&mut self, key: &Token, v: At<Value>) -> At<Source> {
        let value = match v.value {
            Value::Source(s) => s,
            _ => {
                self.structural(
                    v.end,
                    "E_TYPE",
                    format!("`{}` expects `expert \"...\"` or `data \"...\"`", key.lexeme),
                );
                Source {
                    provenance: Provenance::Expert,
                    justification: String::new(),
                }
            }
        };
        At {
            value,
            key: v.key,
            end: v.end,
        }
    }

    fn missing(&mut self, close: Pos, what: &str, block: &str) {
        self.structural(close, "E_MISSING", format!("missing {what} in block `{block}`"));
    }

    /// Opens a block and returns the position of its introducing keyword.
    fn open(&mut self, kw: &str) -> PResult<Pos> {
        let pos = self.expect_keyword(kw)?.pos;
        self.expect(TokenKind::LBrace)?;
        Ok(pos)
    }

    fn target(&mut self) -> PResult<At<Option<SafetyTarget>>> {
        let start = self.open("target")?;
        let mut p_target = None;
        let mut confidence: Option<At<f64>> = None;
        let close = loop {
            match self.peek().kind {
                TokenKind::RBrace => break self.advance().pos,
                TokenKind::Ident => {
                    let (key, v) = self.kv()?;
                    match key.lexeme.as_str() {
                        "p_target" => {
                            let p = self.probability(&key, v);
                            self.set_once(&mut p_target, p, "key `p_target`");
                        }
                        "confidence" => {
                            let x = self.real(&key, v);
                            if ConfidenceLevel::new(x.value).is_err() {
                                self.structural(
                                    x.end,
                                    "E_RANGE",
                                    format!(
                                        "`confidence` must lie strictly between 0 and 1, got {}",
                                        x.value
                                    ),
                                );
                            }
                            self.set_once(&mut confidence, x, "key `confidence`");
                        }
                        _ => self.unknown_key(&key, "block `target`"),
                    }
                }
                _ => return Err(self.key_expected()),
            }
        };
        if p_target.is_none() {
            self.missing(close, "key `p_target`", "target");
        }
        if confidence.is_none() {
            self.missing(close, "key `confidence`", "target");
        }
        let value = match (p_target, confidence) {
            (Some(p), Some(c)) => {
                self.map.insert(Field::PTarget, p.end);
                self.map.insert(Field::Confidence, c.end);
                ConfidenceLevel::new(c.value).ok().map(|confidence| SafetyTarget {
                    p_target: p.value,
                    confidence,
                })
            }
            _ => None,
        };
        Ok(At {
            value,
            key: start,
            end: close,
        })
    }

    fn key_expected(&self) -> ParseError {
        self.unexpected(&[TokenKind::Ident, TokenKind::RBrace], "a key or `}`")
    }

    fn testing(&mut self) -> PResult<At<Option<TestEvidence>>> {
        let start = self.open("testing")?;
        let mut samples = None;
        let mut failures = None;
        let close = loop {
            match self.peek().kind {
                TokenKind::RBrace => break self.advance().pos,
                TokenKind::Ident => {
                    let (key, v) = self.kv()?;
                    match key.lexeme.as_str() {
                        "samples" => {
                            let c = self.count(&key, v);
                            self.set_once(&mut samples, c, "key `samples`");
                        }
                        "failures" => {
                            let c = self.count(&key, v);
                            self.set_once(&mut failures, c, "key `failures`");
                        }
                        _ => self.unknown_key(&key, "block `testing`"),
                    }
                }
                _ => return Err(self.key_expected()),
            }
        };
        if samples.is_none() {
            self.missing(close, "key `samples`", "testing");
        }
        if failures.is_none() {
            self.missing(close, "key `failures`", "testing");
        }
        let value = match (samples, failures) {
            (Some(s), Some(f)) => {
                self.map.insert(Field::Samples, s.end);
                self.map.insert(Field::Failures, f.end);
                Some(TestEvidence {
                    samples: s.value,
                    failures: f.value,
                })
            }
            _ => None,
        };
        Ok(At {
            value,
            key: start,
            end: close,
        })
    }

    fn scope(&mut self) -> PResult<At<Option<ScopeEvidence>>> {
        let start = self.open("scope")?;
        let mut form: Option<At<ScopeForm>> = None;
        let mut source = None;
        let close = loop {
            let t = self.peek().clone();
            match t.kind {
                TokenKind::RBrace => break self.advance().pos,
                TokenKind::Keyword if t.lexeme == "profile" => {
                    let profile = self.profile()?;
                    self.set_form(&mut form, profile, "scope forms `p_oos` and `profile`");
                }
                TokenKind::Ident => {
                    let (key, v) = self.kv()?;
                    match key.lexeme.as_str() {
                        "p_oos" => {
                            let p = self.probability(&key, v);
                            self.map.insert(Field::ScopePoint, p.end);
                            let at = At {
                                value: ScopeForm::Point(p.value),
                                key: p.key,
                                end: p.end,
                            };
                            self.set_form(&mut form, at, "scope forms `p_oos` and `profile`");
                        }
                        "source" => {
                            let s = self.source(&key, v);
                            self.set_once(&mut source, s, "key `source`");
                        }
                        _ => self.unknown_key(&key, "block `scope`"),
                    }
                }
                _ => {
                    return Err(self.unexpected(
                        &[TokenKind::Ident, TokenKind::Keyword, TokenKind::RBrace],
                        "a key, `profile` or `}`",
                    ))
                }
            }
        };
        if form.is_none() {
            self.missing(close, "`p_oos` or `profile`", "scope");
        }
        Ok(At {
            value: form.map(|f| ScopeEvidence {
                form: f.value,
                source: source.map(|s| s.value),
            }),
            key: start,
            end: close,
        })
    }

    /// Keeps the first of two mutually exclusive forms and reports the later
    /// one, as a duplicate when both use the same key.
    fn set_form<T>(&mut self, slot: &mut Option<At<T>>, value: At<T>, what: &str) {
        match slot {
            Some(prev) if self.same_key(prev.key, value.key) => {
                self.structural(value.key, "E_DUPLICATE", format!("duplicate {what}"));
            }
            Some(_) => {
                self.structural(value.key, "E_CONFLICT", format!("{what} are mutually exclusive"));
            }
            None => *slot = Some(value),
        }
    }

    fn same_key(&self, a: Pos, b: Pos) -> bool {
        let lexeme = |p: Pos| {
            self.toks
                .iter()
                .find(|t| t.pos == p)
                .map(|t| t.lexeme.clone())
        };
        lexeme(a) == lexeme(b)
    }

    /// `"profile" "{" (NUMBER "->" NUMBER)+ "}"`
    fn profile(&mut self) -> PResult<At<ScopeForm>> {
        let start = self.open("profile")?;
        let mut points = Vec::new();
        let mut end = start;
        loop {
            let t = self.peek().clone();
            match t.kind {
                TokenKind::RBrace if !points.is_empty() => {
                    self.advance();
                    break;
                }
                TokenKind::Number | TokenKind::Integer => {
                    self.advance();
                    self.expect(TokenKind::Arrow)?;
                    let v = self.peek().clone();
                    if !matches!(v.kind, TokenKind::Number | TokenKind::Integer) {
                        return Err(self.unexpected(
                            &[TokenKind::Number, TokenKind::Integer],
                            "a probability",
                        ));
                    }
                    self.advance();
                    end = v.pos;
                    let hours: f64 = t.lexeme.parse().unwrap_or(f64::NAN);
                    let p: f64 = v.lexeme.parse().unwrap_or(f64::NAN);
                    let p_oos = Probability::new(p).unwrap_or_else(|_| {
                        self.structural(
                            v.pos,
                            "E_RANGE",
                            format!("profile p_oos must lie in [0, 1], got {p}"),
                        );
                        Probability::ZERO
                    });
                    self.map.insert(Field::ProfilePoint(points.len()), v.pos);
                    points.push(ProfilePoint { hours, p_oos });
                }
                _ => {
                    let mut expected = vec![TokenKind::Number, TokenKind::Integer];
                    if !points.is_empty() {
                        expected.push(TokenKind::RBrace);
                    }
                    return Err(self.unexpected(&expected, "a profile point `hours -> p_oos`"));
                }
            }
        }
        Ok(At {
            value: ScopeForm::Profile(points),
            key: start,
            end,
        })
    }

    fn detection(&mut self) -> PResult<At<Option<DetectionEvidence>>> {
        let start = self.expect_keyword("detection")?.pos;
        let kind = match self.peek() {
            t if t.is_keyword("srf") => DetectionKind::Srf,
            t if t.is_keyword("oos") => DetectionKind::Oos,
            _ => return Err(self.unexpected(&[TokenKind::Keyword], "`srf` or `oos`")),
        };
        self.advance();
        self.expect(TokenKind::LBrace)?;
        let block = format!("detection {kind}");
        let mut form: Option<At<DetectionForm>> = None;
        let mut source = None;
        let close = loop {
            let t = self.peek().clone();
            match t.kind {
                TokenKind::RBrace => break self.advance().pos,
                TokenKind::Keyword if t.lexeme == "observed" => {
                    self.advance();
                    let (detected, total, end) = self.of_pair()?;
                    self.map.insert(Field::DetectionObserved(kind), end);
                    let at = At {
                        value: DetectionForm::Campaign { detected, total },
                        key: t.pos,
                        end,
                    };
                    self.set_form(&mut form, at, "detection forms `p_detect` and `observed`");
                }
                TokenKind::Ident => {
                    let (key, v) = self.kv()?;
                    match key.lexeme.as_str() {
                        "p_detect" => {
                            let p = self.probability(&key, v);
                            self.map.insert(Field::DetectionPoint(kind), p.end);
                            let at = At {
                                value: DetectionForm::Point(p.value),
                                key: p.key,
                                end: p.end,
                            };
                            self.set_form(&mut form, at, "detection forms `p_detect` and `observed`");
                        }
                        "source" => {
                            let s = self.source(&key, v);
                            self.set_once(&mut source, s, "key `source`");
                        }
                        _ => self.unknown_key(&key, &format!("block `{block}`")),
                    }
                }
                _ => {
                    return Err(self.unexpected(
                        &[TokenKind::Ident, TokenKind::Keyword, TokenKind::RBrace],
                        "a key, `observed` or `}`",
                    ))
                }
            }
        };
        if form.is_none() {
            self.missing(close, "`p_detect` or `observed`", &block);
        }
        Ok(At {
            // The kind is kept even without a form so duplicates are still detected.
            value: Some(DetectionEvidence {
                kind,
                form: form
                    .map(|f| f.value)
                    .unwrap_or(DetectionForm::Point(Probability::ZERO)),
                source: source.map(|s| s.value),
            }),
            key: start,
            end: close,
        })
    }

    fn labels(&mut self) -> PResult<At<Option<LabelQuality>>> {
        let start = self.open("labels")?;
        let mut form: Option<At<LabelQuality>> = None;
        let close = loop {
            let t = self.peek().clone();
            match t.kind {
                TokenKind::RBrace => break self.advance().pos,
                TokenKind::Keyword if t.lexeme == "audit" => {
                    self.advance();
                    let (disagreements, audited, end) = self.of_pair()?;
                    self.map.insert(Field::LabelsAudit, end);
                    let at = At {
                        value: LabelQuality::Audit {
                            disagreements,
                            audited,
                        },
                        key: t.pos,
                        end,
                    };
                    self.set_form(&mut form, at, "label forms `rate` and `audit`");
                }
                TokenKind::Ident => {
                    let (key, v) = self.kv()?;
                    if key.lexeme == "rate" {
                        let p = self.probability(&key, v);
                        self.map.insert(Field::LabelsRate, p.end);
                        let at = At {
                            value: LabelQuality::Rate(p.value),
                            key: p.key,
                            end: p.end,
                        };
                        self.set_form(&mut form, at, "label forms `rate` and `audit`");
                    } else {
                        self.unknown_key(&key, "block `labels`");
                    }
                }
                _ => {
                    return Err(self.unexpected(
                        &[TokenKind::Ident, TokenKind::Keyword, TokenKind::RBrace],
                        "a key, `audit` or `}`",
                    ))
                }
            }
        };
        if form.is_none() {
            self.missing(close, "`rate` or `audit`", "labels");
        }
        Ok(At {
            value: form.map(|f| f.value),
            key: start,
            end: close,
        })
    }
}

fn inner<T>(slot: Option<At<Option<T>>>) -> Option<T> {
    slot.and_then(|a| a.value)
}

#[cfg(test)]
mod tests {
    use crate::dsl::parse;

    fn errs(text: &str) -> Vec<(String, usize, usize)> {
        parse(text)
            .unwrap_err()
            .into_iter()
            .map(|e| (e.code, e.line, e.col))
            .collect()
    }

    const HEAD: &str = "case \"x\" {\n  target { p_target = 0.01 confidence = 0.9 }\n";

    #[test]
    fn duplicate_key_reported_at_second() {
        let text = format!("{HEAD}  testing {{ samples = 10 failures = 0 samples = 20 }}\n  assume \"no-out-of-scope-operation\"\n}}");
        assert_eq!(errs(&text), [("E_DUPLICATE".into(), 3, 39)]);
    }

    #[test]
    fn duplicate_block_reported_at_second() {
        let text = format!("{HEAD}  testing {{ samples = 10 failures = 0 }}\n  testing {{ samples = 10 failures = 0 }}\n  assume \"no-out-of-scope-operation\"\n}}");
        assert_eq!(errs(&text), [("E_DUPLICATE".into(), 4, 3)]);
    }

    #[test]
    fn missing_key_and_block() {
        let text = format!("{HEAD}  testing {{ samples = 10 }}\n}}");
        assert_eq!(errs(&text), [("E_MISSING".into(), 3, 26)]);
        let text = "case \"x\" {\n  testing { samples = 10 failures = 0 }\n}";
        assert_eq!(errs(text), [("E_MISSING".into(), 3, 1)]);
    }

    #[test]
    fn form_conflicts() {
        let text = format!("{HEAD}  testing {{ samples = 10 failures = 0 }}\n  labels {{ rate = 0.1 audit = 1 of 10 }}\n  assume \"no-out-of-scope-operation\"\n}}");
        assert_eq!(errs(&text), [("E_CONFLICT".into(), 4, 23)]);
        let text = format!("{HEAD}  testing {{ samples = 10 failures = 0 }}\n  labels {{ rate = 0.1 rate = 0.2 }}\n  assume \"no-out-of-scope-operation\"\n}}");
        assert_eq!(errs(&text), [("E_DUPLICATE".into(), 4, 23)]);
    }

    #[test]
    fn range_and_type_errors() {
        let text = format!("{HEAD}  testing {{ samples = 10.5 failures = 0 }}\n  labels {{ rate = 1.5 }}\n  assume \"no-out-of-scope-operation\"\n}}");
        let got = errs(&text);
        assert_eq!(got[0], ("E_TYPE".into(), 3, 23));
        assert_eq!(got[1], ("E_RANGE".into(), 4, 19));
    }

    #[test]
    fn syntax_error_stops_at_token() {
        let text = format!("{HEAD}  testing {{ samples 10 }}\n}}");
        let e = parse(&text).unwrap_err();
        assert_eq!(e.len(), 1);
        assert_eq!((e[0].line, e[0].col), (3, 21));
        assert_eq!(e[0].code, "E_SYNTAX");
        assert!(e[0].message.contains("`=`"));
    }

    #[test]
    fn trailing_input_is_rejected() {
        let text = format!("{HEAD}  testing {{ samples = 10 failures = 0 }}\n  assume \"no-out-of-scope-operation\"\n}}\ncase");
        let e = parse(&text).unwrap_err();
        assert_eq!((e[0].line, e[0].col), (6, 1));
    }

    #[test]
    fn profile_with_mission_time() {
        let text = "case \"p\" {\n  mission_time = 12\n  target { p_target = 0.01 confidence = 0.9 }\n  scope { profile { 0 -> 0.001 10 -> 0.002 } source = data \"fleet logs\" }\n  testing { samples = 10 failures = 0 }\n}";
        let b = parse(text).unwrap();
        assert_eq!(b.mission_time, Some(12.0));
        let missing = text.replace("  mission_time = 12\n", "");
        assert_eq!(errs(&missing), [("E_MISSION_TIME_REQUIRED".into(), 5, 1)]);
        let early = text.replace("= 12", "= -1");
        let e = errs(&early);
        assert_eq!(e[0], ("E_MISSION_TIME_RANGE".into(), 2, 18));
        assert_eq!(e[1], ("E_TIME_BEFORE_PROFILE".into(), 4, 26));
        let empty = text.replace("0 -> 0.001 10 -> 0.002", "");
        assert_eq!(parse(&empty).unwrap_err()[0].code, "E_SYNTAX");
    }
}
