//! Shared unicode text helpers.

use unicode_normalization::UnicodeNormalization;

/// Compatibility-composed (NFKC) normalization of a plain string.
///
/// Used both for table cell text at grid construction and for SQL text
/// outside string literals, so the two agree on what "normalized" means.
pub fn nfkc(s: &str) -> String {
    s.nfkc().collect()
}

/// NFKC-normalize a single character, refusing normalizations that would
/// introduce a quote character. A codepoint whose compatibility form
/// contains `'` or `"` (for example U+FF07 FULLWIDTH APOSTROPHE) is kept
/// verbatim, so normalization can never create or destroy a string-literal
/// boundary on a later pass.
pub fn nfkc_char_quote_safe(c: char, out: &mut String) {
    if c == '\'' || c == '"' {
        out.push(c);
        return;
    }
    let start = out.len();
    out.extend(std::iter::once(c).nfkc());
    if out[start..].contains('\'') || out[start..].contains('"') {
        out.truncate(start);
        out.push(c);
    }
}
