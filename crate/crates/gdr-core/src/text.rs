//! Tokenization and normalization primitives shared by indexing and metrics.
//!
//! Three tokenizers live here, each serving a different consumer:
//!
//! - [`index_tokenize`] feeds BM25 term extraction, token counting and
//!   window segmentation. Lowercase, whitespace-split, edge punctuation
//!   stripped.
//! - [`squad_normalize`] implements the SQuAD answer-normalization
//!   convention used by token-F1 and exact match.
//! - [`tokenize_13a`] implements the mteval-13a rules used by the default
//!   SacreBLEU configuration. Case-preserving.
//!
//! All functions are pure and deterministic.

use alloc::string::String;
use alloc::vec::Vec;

use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

/// Unicode general categories P* (all punctuation classes).
fn is_punct(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// The 32 ASCII punctuation characters of the SQuAD normalization
/// convention (`string.punctuation` in the reference script). Note this is
/// a different set from Unicode P*: it includes ASCII symbols like `$` and
/// `+` and excludes all non-ASCII punctuation.
fn is_squad_punct(c: char) -> bool {
    matches!(c, '!'..='/' | ':'..='@' | '['..='`' | '{'..='~')
}

/// Word character in the sense of the SQuAD article-removal rule
/// (the reference script's `\b` boundary): alphanumeric or underscore.
fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// A token together with the half-open byte-offset range of the trimmed
/// piece it came from in the original string. `text` is lowercased, so its
/// length may differ from `end - start`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Index tokenization with source offsets.
///
/// Splits on Unicode whitespace, strips leading and trailing punctuation
/// (Unicode P*) from each piece, drops pieces that become empty, and
/// lowercases the surviving token text. Offsets refer to the trimmed
/// region of the original string, so slicing between token starts never
/// cuts through a token.
pub fn index_token_spans(text: &str) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    let mut piece_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = piece_start.take() {
                push_trimmed(&mut out, text, s, i);
            }
        } else if piece_start.is_none() {
            piece_start = Some(i);
        }
    }
    if let Some(s) = piece_start {
        push_trimmed(&mut out, text, s, text.len());
    }
    out
}

fn push_trimmed(out: &mut Vec<TokenSpan>, text: &str, start: usize, end: usize) {
    let piece = &text[start..end];
    let mut first: Option<usize> = None;
    let mut last_end = 0usize;
    for (i, c) in piece.char_indices() {
        if !is_punct(c) {
            if first.is_none() {
                first = Some(i);
            }
            last_end = i + c.len_utf8();
        }
    }
    if let Some(s) = first {
        out.push(TokenSpan {
            start: start + s,
            end: start + last_end,
            text: piece[s..last_end].to_lowercase(),
        });
    }
}

/// Index tokenization: lowercase, whitespace-split, edge punctuation
/// stripped, empties dropped.
pub fn index_tokenize(text: &str) -> Vec<String> {
    index_token_spans(text)
        .into_iter()
        .map(|t| t.text)
        .collect()
}

/// Number of index tokens in `text`.
pub fn count_index_tokens(text: &str) -> usize {
    index_token_spans(text).len()
}

/// Longest prefix of `text` containing at most `max_tokens` index tokens,
/// cut at a token boundary (never mid-token).
pub fn truncate_to_tokens(text: &str, max_tokens: usize) -> &str {
    if max_tokens == 0 {
        return "";
    }
    let spans = index_token_spans(text);
    if spans.len() <= max_tokens {
        text
    } else {
        &text[..spans[max_tokens - 1].end]
    }
}

/// SQuAD answer normalization: lowercase, remove ASCII punctuation, drop
/// the articles `a`, `an`, `the` as whole words, split on whitespace.
///
/// The steps replicate the published SQuAD evaluation script, in its
/// order: lowercase first, then punctuation removal (deleting characters,
/// which joins pieces like `U.S.` into `us`), then article removal with
/// word-boundary semantics, then whitespace collapse.
pub fn squad_normalize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let no_punct: String = lower.chars().filter(|c| !is_squad_punct(*c)).collect();

    // Word runs equal to an article are replaced by a space, mirroring the
    // reference regex `\b(a|an|the)\b`.
    let mut cleaned = String::with_capacity(no_punct.len());
    let mut run = String::new();
    for c in no_punct.chars() {
        if is_word_char(c) {
            run.push(c);
        } else {
            flush_word_run(&mut cleaned, &mut run);
            cleaned.push(c);
        }
    }
    flush_word_run(&mut cleaned, &mut run);

    cleaned.split_whitespace().map(String::from).collect()
}

fn flush_word_run(out: &mut String, run: &mut String) {
    if run.is_empty() {
        return;
    }
    if run == "a" || run == "an" || run == "the" {
        out.push(' ');
    } else {
        out.push_str(run);
    }
    run.clear();
}

/// Normalized string form used by exact match: the squad tokens joined by
/// single spaces.
pub fn squad_normalized_string(text: &str) -> String {
    squad_normalize(text).join(" ")
}

/// Characters the 13a tokenizer pads with spaces unconditionally: all
/// ASCII symbols except apostrophe, comma, hyphen and period.
fn is_13a_padded(c: char) -> bool {
    matches!(c, ' '..='&' | '('..='+' | '/' | ':'..='@' | '['..='`' | '{'..='~')
}

/// The mteval-13a tokenization used by SacreBLEU's default configuration.
///
/// Normalizes a few XML entities, pads ASCII symbols with spaces, splits
/// period and comma unless they sit between digits, splits a dash after a
/// digit, and finally splits on whitespace. Case is preserved and
/// non-ASCII punctuation is left alone.
pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line = text.replace("<skipped>", "");
    line = line.replace("-\n", "");
    line = line.replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }

    let padded: Vec<char> = core::iter::once(' ')
        .chain(line.chars())
        .chain(core::iter::once(' '))
        .collect();

    let mut s1 = String::with_capacity(padded.len() * 2);
    for &c in &padded {
        if is_13a_padded(c) {
            s1.push(' ');
            s1.push(c);
            s1.push(' ');
        } else {
            s1.push(c);
        }
    }

    // Period/comma after a non-digit.
    let s2 = pair_pass(&s1, |a, b| {
        (!a.is_ascii_digit() && (b == '.' || b == ',')).then_some([a, ' ', b, ' '])
    });
    // Period/comma before a non-digit.
    let s3 = pair_pass(&s2, |a, b| {
        ((a == '.' || a == ',') && !b.is_ascii_digit()).then_some([' ', a, ' ', b])
    });
    // Dash after a digit.
    let s4 = pair_pass(&s3, |a, b| {
        (a.is_ascii_digit() && b == '-').then_some([a, ' ', b, ' '])
    });

    s4.split_whitespace().map(String::from).collect()
}

/// Applies a two-character rewrite rule left to right without overlap,
/// matching sequential regex substitution semantics.
fn pair_pass(input: &str, rule: impl Fn(char, char) -> Option<[char; 4]>) -> String {
    let chars: Vec<char> = input.chars().collect();
    let mut out = String::with_capacity(input.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        if i + 1 < chars.len() {
            if let Some(replacement) = rule(chars[i], chars[i + 1]) {
                out.extend(replacement);
                i += 2;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn index_tokenize_empty() {
        assert!(index_tokenize("").is_empty());
        assert!(index_tokenize("  \t\n ").is_empty());
    }

    #[test]
    fn index_tokenize_strips_edge_punctuation() {
        assert_eq!(
            index_tokenize("Benefits, for YOUR children."),
            toks(&["benefits", "for", "your", "children"])
        );
    }

    #[test]
    fn index_tokenize_keeps_interior_punctuation() {
        assert_eq!(
            index_tokenize("U.S.-based claims"),
            toks(&["u.s.-based", "claims"])
        );
    }

    #[test]
    fn index_tokenize_drops_pure_punctuation_pieces() {
        assert_eq!(index_tokenize("a -- b ((*))"), toks(&["a", "b"]));
    }

    #[test]
    fn index_tokenize_symbols_are_not_punctuation() {
        // `$` and `+` are Unicode symbols, not P*, so they survive edge
        // trimming.
        assert_eq!(index_tokenize("$5 + (tax)"), toks(&["$5", "+", "tax"]));
    }

    #[test]
    fn index_token_spans_offsets_cover_trimmed_pieces() {
        let text = "((Hello)) World";
        let spans = index_token_spans(text);
        assert_eq!(spans.len(), 2);
        assert_eq!(&text[spans[0].start..spans[0].end], "Hello");
        assert_eq!(spans[0].text, "hello");
        assert_eq!(&text[spans[1].start..spans[1].end], "World");
    }

    #[test]
    fn index_tokenize_join_is_fixed_point() {
        let cases = [
            "Benefits, for YOUR children.",
            "U.S.-based claims",
            "a -- b ((*))",
            "Déjà vu – naïve café",
        ];
        for case in cases {
            let once = index_tokenize(case);
            let joined = once.join(" ");
            assert_eq!(index_tokenize(&joined), once, "not a fixed point: {case}");
        }
    }

    #[test]
    fn truncate_keeps_whole_tokens() {
        assert_eq!(
            truncate_to_tokens("a b [SEP] c d [SEP] e", 4),
            "a b [SEP] c"
        );
        assert_eq!(truncate_to_tokens("a b", 5), "a b");
        assert_eq!(truncate_to_tokens("a b", 0), "");
    }

    #[test]
    fn squad_normalize_basics() {
        assert_eq!(squad_normalize("The answer!"), toks(&["answer"]));
        assert_eq!(squad_normalize("a an the"), Vec::<String>::new());
        assert_eq!(squad_normalize("U.S. agency"), toks(&["us", "agency"]));
    }

    #[test]
    fn squad_normalize_article_boundaries() {
        // Punctuation removal happens before article detection: the
        // underscore is ASCII punctuation, so "a_b" collapses to the word
        // run "ab", and "the-answer" to "theanswer". Neither is an article.
        assert_eq!(squad_normalize("a_b theory"), toks(&["ab", "theory"]));
        assert_eq!(squad_normalize("the-answer"), toks(&["theanswer"]));
        // Digits extend a word run: "a1" and "the99" are not articles.
        assert_eq!(
            squad_normalize("a1 van the99"),
            toks(&["a1", "van", "the99"])
        );
    }

    #[test]
    fn squad_normalize_idempotent() {
        let cases = ["The U.S. answer, isn't it?", "a an the", "  spaced   out  "];
        for case in cases {
            let once = squad_normalize(case);
            let again = squad_normalize(&once.join(" "));
            assert_eq!(once, again, "not idempotent: {case}");
        }
    }

    #[test]
    fn tokenize_13a_matches_reference_behavior() {
        // Expected values taken from the reference SacreBLEU tokenizer run
        // on the same inputs.
        assert_eq!(
            tokenize_13a("Hello, world!"),
            toks(&["Hello", ",", "world", "!"])
        );
        assert_eq!(tokenize_13a("3.5 percent"), toks(&["3.5", "percent"]));
        assert_eq!(tokenize_13a(""), Vec::<String>::new());
        assert_eq!(tokenize_13a("don't stop"), toks(&["don't", "stop"]));
        assert_eq!(tokenize_13a("a-b 5-6"), toks(&["a-b", "5", "-", "6"]));
        assert_eq!(
            tokenize_13a("A&amp;B &lt;tag&gt;"),
            toks(&["A", "&", "B", "<", "tag", ">"])
        );
        assert_eq!(
            tokenize_13a("U.S.-based claims"),
            toks(&["U", ".", "S", ".", "-based", "claims"])
        );
        assert_eq!(
            tokenize_13a("price: $5.00 (20%)"),
            toks(&["price", ":", "$", "5.00", "(", "20", "%", ")"])
        );
        assert_eq!(
            tokenize_13a("1,000,000 items"),
            toks(&["1,000,000", "items"])
        );
        assert_eq!(
            tokenize_13a("em—dash and … ellipsis"),
            toks(&["em—dash", "and", "…", "ellipsis"])
        );
        assert_eq!(
            tokenize_13a("ends with period."),
            toks(&["ends", "with", "period", "."])
        );
    }

    #[test]
    fn tokenize_13a_preserves_case() {
        assert_eq!(tokenize_13a("Hello WORLD"), toks(&["Hello", "WORLD"]));
    }

    #[test]
    fn token_spans_roundtrip_slicing() {
        let text = format!("{} {} {}", "alpha", "((beta))", "gamma.");
        let spans = index_token_spans(&text);
        for s in &spans {
            assert_eq!(s.text, text[s.start..s.end].to_lowercase());
        }
    }
}
