//! Walk a handful of raw SQL strings through the canonicalizer and show
//! what each conservative pass contributes: comment stripping, keyword
//! case folding, whitespace collapse, redundant-paren removal, and
//! order-insensitive sorting of flat AND/OR chains.
//!
//! Run with `cargo run --example canonicalize_sql`.

use tabeval::canon::canonicalize;

fn main() -> tabeval::Result<()> {
    let samples: &[(&str, &str)] = &[
        ("comments and case", "SELECT Name FROM users -- trailing note\nWHERE age > 30"),
        ("whitespace and operator spacing", "select  a ,  b   from t where a  >=  10"),
        ("redundant parentheses", "SELECT * FROM t WHERE ((x = 1)) AND (y = 2)"),
        (
            "commutative predicate order",
            "SELECT * FROM users WHERE city = 'LA' AND age > 18 AND active = 1",
        ),
        (
            "same predicates, other order",
            "SELECT * FROM users WHERE active = 1 AND age > 18 AND city = 'LA'",
        ),
        ("string literals untouched", "SELECT * FROM t WHERE note = 'KEEP  CASE -- not a comment'"),
        ("degraded input", "SELEC name FROM (broken"),
    ];

    for (label, raw) in samples {
        let got = canonicalize(raw)?;
        let mode = if got.parse_succeeded { "parsed" } else { "degraded" };
        println!("{label} [{mode}]");
        println!("  in:  {}", raw.replace('\n', " "));
        println!("  out: {}", got.text);

        let again = canonicalize(&got.text)?;
        assert_eq!(again.text, got.text, "canonical form must be a fixed point");
    }

    println!("\nall outputs are fixed points: canonicalize(canonicalize(s)) == canonicalize(s)");
    Ok(())
}
