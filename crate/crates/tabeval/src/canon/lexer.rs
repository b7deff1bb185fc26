//! Total SQL lexer and the single token-joining discipline shared by the
//! spacing pass and the AST serializer.
//!
//! The lexer never fails: every input byte lands in some token, with
//! unterminated quotes captured as a marked token that later makes the
//! parser (not the lexer) give up. This is what keeps the degraded
//! canonicalization path total over arbitrary model output.

/// One lexical token. Literal and quoted-identifier tokens keep their
/// delimiters so serialization is exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    /// Bare identifier or keyword, case preserved.
    Word(String),
    /// Numeric literal, verbatim.
    Number(String),
    /// Single-quoted string literal including quotes and doubled escapes.
    Str(String),
    /// Quoted identifier with its delimiters (`"x"`, `` `x` ``, `[x]`).
    Quoted(String),
    /// Operator or punctuation.
    Op(String),
    /// Rest of the input after an unclosed quote. Parsing always fails on
    /// this token; joining reproduces it verbatim.
    Unterminated(String),
}

impl Token {
    pub fn text(&self) -> &str {
        match self {
            Token::Word(s)
            | Token::Number(s)
            | Token::Str(s)
            | Token::Quoted(s)
            | Token::Op(s)
            | Token::Unterminated(s) => s,
        }
    }

    fn is_op(&self, s: &str) -> bool {
        matches!(self, Token::Op(t) if t == s)
    }
}

/// Structural keywords that keep a space before `(` and around operators.
/// Function names are deliberately absent so calls stay tight.
const SPACED_KEYWORDS: &[&str] = &[
    "select", "from", "where", "group", "by", "having", "order", "limit", "offset", "distinct",
    "all", "as", "and", "or", "not", "in", "exists", "between", "like", "glob", "regexp", "match",
    "escape", "is", "case", "when", "then", "else", "end", "join", "inner", "left", "right",
    "full", "outer", "cross", "natural", "on", "using", "union", "intersect", "except", "asc",
    "desc", "collate", "values", "set",
];

/// Every word the casing pass lowercases: reserved words plus common
/// built-in function names. Everything else is treated as an identifier
/// and left in its original case.
pub const KEYWORDS: &[&str] = &[
    "select", "from", "where", "group", "by", "having", "order", "limit", "offset", "distinct",
    "all", "as", "and", "or", "not", "in", "exists", "between", "like", "glob", "regexp", "match",
    "escape", "is", "null", "case", "when", "then", "else", "end", "cast", "join", "inner",
    "left", "right", "full", "outer", "cross", "natural", "on", "using", "union", "intersect",
    "except", "asc", "desc", "collate", "values", "set", "insert", "update", "delete", "into",
    "nulls", "first", "last", "true", "false", "current_date", "current_time",
    "current_timestamp", "count", "sum", "avg", "min", "max", "total", "group_concat", "abs",
    "round", "length", "upper", "lower", "coalesce", "ifnull", "nullif", "substr", "substring",
    "replace", "trim", "ltrim", "rtrim", "instr", "hex", "typeof", "printf", "date", "time",
    "datetime", "strftime", "iif", "sign",
];

const TIGHT_OPS: &[&str] = &[
    "=", "==", "!=", "<>", "<", "<=", ">", ">=", "+", "-", "*", "/", "%", "||", "<<", ">>", "&",
    "|", "~", "!",
];

pub fn is_keyword(word: &str) -> bool {
    let lower = word.to_ascii_lowercase();
    KEYWORDS.contains(&lower.as_str())
}

fn is_spaced_keyword(tok: &Token) -> bool {
    match tok {
        Token::Word(w) => SPACED_KEYWORDS.contains(&w.to_ascii_lowercase().as_str()),
        _ => false,
    }
}

fn is_tight_op(tok: &Token) -> bool {
    matches!(tok, Token::Op(s) if TIGHT_OPS.contains(&s.as_str()))
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$' || (c as u32) > 127
}

/// Tokenize. Total: any input produces a token stream whose concatenated
/// texts (with separators chosen by [`join_tokens`]) re-lex to an
/// equivalent stream. Assumes comments were already stripped; `--` here is
/// two minus tokens.
pub fn lex(input: &str) -> Vec<Token> {
    let chars: Vec<char> = input.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '\'' {
            match scan_single_quoted(&chars, i) {
                Some(end) => {
                    tokens.push(Token::Str(chars[i..end].iter().collect()));
                    i = end;
                }
                None => {
                    tokens.push(Token::Unterminated(chars[i..].iter().collect()));
                    break;
                }
            }
            continue;
        }
        if c == '"' || c == '`' {
            match scan_delimited(&chars, i, c, c) {
                Some(end) => {
                    tokens.push(Token::Quoted(chars[i..end].iter().collect()));
                    i = end;
                }
                None => {
                    tokens.push(Token::Unterminated(chars[i..].iter().collect()));
                    break;
                }
            }
            continue;
        }
        if c == '[' {
            match scan_delimited(&chars, i, '[', ']') {
                Some(end) => {
                    tokens.push(Token::Quoted(chars[i..end].iter().collect()));
                    i = end;
                }
                None => {
                    tokens.push(Token::Unterminated(chars[i..].iter().collect()));
                    break;
                }
            }
            continue;
        }
        if c.is_ascii_digit() {
            let end = scan_number(&chars, i);
            tokens.push(Token::Number(chars[i..end].iter().collect()));
            i = end;
            continue;
        }
        if c == '.' && dot_starts_number(&chars, i, tokens.last()) {
            let end = scan_number(&chars, i + 1).max(i + 1);
            tokens.push(Token::Number(chars[i..end].iter().collect()));
            i = end;
            continue;
        }
        if c.is_alphabetic() || c == '_' || (c as u32) > 127 {
            let mut end = i + 1;
            while end < chars.len() && is_word_char(chars[end]) {
                end += 1;
            }
            tokens.push(Token::Word(chars[i..end].iter().collect()));
            i = end;
            continue;
        }
        if i + 1 < chars.len() {
            let pair: String = chars[i..i + 2].iter().collect();
            if matches!(
                pair.as_str(),
                "<=" | ">=" | "<>" | "!=" | "==" | "||" | "<<" | ">>"
            ) {
                tokens.push(Token::Op(pair));
                i += 2;
                continue;
            }
        }
        tokens.push(Token::Op(c.to_string()));
        i += 1;
    }
    tokens
}

fn scan_single_quoted(chars: &[char], start: usize) -> Option<usize> {
    let mut i = start + 1;
    while i < chars.len() {
        if chars[i] == '\'' {
            if i + 1 < chars.len() && chars[i + 1] == '\'' {
                i += 2;
                continue;
            }
            return Some(i + 1);
        }
        i += 1;
    }
    None
}

fn scan_delimited(chars: &[char], start: usize, open: char, close: char) -> Option<usize> {
    let doubled_escape = open == close;
    let mut i = start + 1;
    while i < chars.len() {
        if chars[i] == close {
            if doubled_escape && i + 1 < chars.len() && chars[i + 1] == close {
                i += 2;
                continue;
            }
            return Some(i + 1);
        }
        i += 1;
    }
    None
}

fn scan_number(chars: &[char], start: usize) -> usize {
    let mut i = start;
    if i + 1 < chars.len() && chars[i] == '0' && (chars[i + 1] == 'x' || chars[i + 1] == 'X') {
        i += 2;
        while i < chars.len() && chars[i].is_ascii_hexdigit() {
            i += 1;
        }
        return i;
    }
    while i < chars.len() && chars[i].is_ascii_digit() {
        i += 1;
    }
    if i < chars.len() && chars[i] == '.' {
        i += 1;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
        let mut j = i + 1;
        if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
            j += 1;
        }
        if j < chars.len() && chars[j].is_ascii_digit() {
            i = j;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i
}

fn dot_starts_number(chars: &[char], i: usize, prev: Option<&Token>) -> bool {
    if i + 1 >= chars.len() || !chars[i + 1].is_ascii_digit() {
        return false;
    }
    // After something that can be dereferenced (`t.5` is member access, if
    // nonsense), the dot is an operator; after a keyword like `select` it
    // starts a numeric literal.
    match prev {
        Some(Token::Word(w)) => is_keyword(w),
        Some(Token::Quoted(_)) | Some(Token::Number(_)) => false,
        Some(t) if t.is_op(")") => false,
        _ => true,
    }
}

/// Canonical spacing between two adjacent tokens. This one function
/// defines the whole surface form: the spacing pass and the serializer
/// both go through it, which is what makes the pipeline a fixed point.
fn separator(prev: &Token, next: &Token) -> &'static str {
    if prev.is_op("(") || prev.is_op(".") {
        return "";
    }
    if next.is_op(")") || next.is_op(",") || next.is_op(";") || next.is_op(".") {
        return "";
    }
    if prev.is_op(",") {
        return " ";
    }
    if next.is_op("(") {
        return if is_spaced_keyword(prev) { " " } else { "" };
    }
    if is_spaced_keyword(prev) || is_spaced_keyword(next) {
        return " ";
    }
    if is_tight_op(prev) || is_tight_op(next) {
        // Never synthesize comment openers out of adjacent operators.
        if prev.is_op("-") && next.is_op("-") {
            return " ";
        }
        if prev.is_op("/") && next.is_op("*") {
            return " ";
        }
        return "";
    }
    " "
}

/// Join tokens into a single line under the canonical spacing rules.
pub fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            out.push_str(separator(&tokens[i - 1], tok));
        }
        out.push_str(tok.text());
    }
    out
}
