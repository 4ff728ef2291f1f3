use unicode_general_category::{get_general_category, GeneralCategory};

/// Lowercases `text`, deletes Unicode punctuation (P*) and symbols (S*), and
/// splits on whitespace. Ideographic and kana/hangul codepoints are emitted
/// as single-codepoint tokens.
///
/// Punctuation is deleted rather than replaced, so `"A--B  c"` yields
/// `["ab", "c"]`; at token boundaries deletion and splitting coincide.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            flush(&mut current, &mut tokens);
        } else if is_punct_or_symbol(ch) {
            continue;
        } else if is_cjk(ch) {
            flush(&mut current, &mut tokens);
            tokens.push(ch.to_lowercase().collect());
        } else {
            current.extend(ch.to_lowercase());
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}

pub(crate) fn is_punct_or_symbol(ch: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(ch),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

/// Scripts written without word separators.
pub(crate) fn is_cjk(ch: char) -> bool {
    matches!(ch as u32,
        0x3040..=0x309F     // hiragana
        | 0x30A0..=0x30FF   // katakana
        | 0x31F0..=0x31FF
        | 0x3400..=0x4DBF   // CJK ext A
        | 0x4E00..=0x9FFF   // CJK unified
        | 0xF900..=0xFAFF
        | 0xFF66..=0xFF9F   // halfwidth katakana
        | 0x1100..=0x11FF   // hangul jamo
        | 0x3130..=0x318F
        | 0xAC00..=0xD7AF
        | 0x20000..=0x2A6DF
    )
}
