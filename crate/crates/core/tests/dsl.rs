mod common;

use common::bundle;
use proptest::prelude::*;
use qcase_core::dsl::{self, tokenize, Pos, TokenKind};

/// Byte offset of every token and the raw source text it spans.
fn spans(text: &str) -> Vec<(Pos, usize, String)> {
    let line_starts: Vec<usize> = std::iter::once(0)
        .chain(text.match_indices('\n').map(|(i, _)| i + 1))
        .collect();
    let toks = tokenize(text).expect("serialized text lexes");
    let offsets: Vec<usize> = toks
        .iter()
        .map(|t| line_starts[t.pos.line - 1] + t.pos.col - 1)
        .collect();
    toks.iter()
        .enumerate()
        .filter(|(_, t)| t.kind != TokenKind::Eof)
        .map(|(i, t)| {
            let end = offsets.get(i + 1).copied().unwrap_or(text.len());
            (t.pos, offsets[i], text[offsets[i]..end].trim_end().to_string())
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn serialize_then_parse_is_identity(b in bundle()) {
        let text = dsl::serialize(&b);
        let back = dsl::parse(&text);
        prop_assert_eq!(back.as_ref(), Ok(&b), "{}", text);
        prop_assert_eq!(dsl::serialize(&back.unwrap()), text);
    }

    /// Deleting, duplicating or replacing one token never produces an error
    /// before the edit.
    #[test]
    fn errors_never_precede_a_single_token_edit(
        b in bundle(),
        pick in any::<prop::sample::Index>(),
        donor in any::<prop::sample::Index>(),
        op in 0..3u8,
    ) {
        let text = dsl::serialize(&b);
        let toks = spans(&text);
        let (site, start, raw) = &toks[pick.index(toks.len())];
        let end = start + raw.len();
        let replacement = match op {
            0 => String::new(),
            1 => format!("{raw} {raw}"),
            _ => toks[donor.index(toks.len())].2.clone(),
        };
        let mutated = format!("{}{}{}", &text[..*start], replacement, &text[end..]);
        if let Err(errs) = dsl::parse(&mutated) {
            for e in &errs {
                prop_assert!(e.pos() >= *site, "{e} precedes edit at {site}\n{mutated}");
            }
        }
    }

    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,200}") {
        let _ = dsl::parse(&s);
    }

    #[test]
    fn shuffled_tokens_never_panic(b in bundle(), seed in any::<u64>()) {
        let text = dsl::serialize(&b);
        let mut words: Vec<&str> = text.split_whitespace().collect();
        let mut state = seed | 1;
        for i in (1..words.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            words.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let _ = dsl::parse(&words.join(" "));
    }
}

#[test]
fn deep_nesting_and_long_input_terminate() {
    let deep = format!("case \"x\" {}", "{".repeat(100_000));
    assert!(dsl::parse(&deep).is_err());
    let long = "# comment\n".repeat(100_000);
    assert!(dsl::parse(&long).is_err());
    let unterminated = format!("case \"{}", "a".repeat(100_000));
    assert!(dsl::parse(&unterminated).is_err());
}

#[test]
fn errors_come_sorted_with_codes() {
    let text = "case \"x\" {\n  testing { samples = 10 failures = 20 }\n  target { p_target = 2.0 confidence = 0.9 }\n}\n";
    let errs = dsl::parse(text).unwrap_err();
    let positions: Vec<Pos> = errs.iter().map(|e| e.pos()).collect();
    let mut sorted = positions.clone();
    sorted.sort();
    assert_eq!(positions, sorted);
    assert!(errs.iter().all(|e| e.code.starts_with("E_")));
}
