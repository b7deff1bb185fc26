//! Compare the token cost of feeding a model linearized table text against
//! a fixed per-image optical budget, across tables of different sizes and
//! several budget presets.
//!
//! Run with `cargo run --example token_accounting`.

use tabeval::tokens::{count_table_text_tokens, tokenizer_by_id, tsr, BudgetConfig};
use tabeval::{linearize, CellValue, TableGrid};

fn grid_with_rows(name: &str, rows: usize) -> tabeval::Result<TableGrid> {
    let body = (0..rows)
        .map(|r| {
            vec![
                CellValue::Integer(r as i64),
                CellValue::text(format!("item-{r}")),
                CellValue::Real(r as f64 * 1.5),
            ]
        })
        .collect();
    TableGrid::new(name, vec!["id".to_string(), "label".to_string(), "score".to_string()], body)
}

fn main() -> tabeval::Result<()> {
    let tokenizer = tokenizer_by_id("default")?;

    let small = grid_with_rows("small", 3)?;
    let linear = linearize(&small);
    println!("linearized form of `{}`:", small.name());
    println!("  {}", linear.text);
    println!(
        "  schema part: {} chars, total {} tokens\n",
        linear.schema_part_length,
        count_table_text_tokens(&linear, tokenizer.as_ref())
    );

    let sizes = [3usize, 10, 40, 160];
    let mut counts = Vec::new();
    for rows in sizes {
        let grid = grid_with_rows(&format!("t{rows}"), rows)?;
        let n = count_table_text_tokens(&linearize(&grid), tokenizer.as_ref());
        println!("{:>4} rows -> {:>5} text tokens", rows, n);
        counts.push((format!("t{rows}"), n));
    }

    println!("\ntoken savings ratio (mean text tokens / optical budget):");
    for budget in [64u64, 100, 256, 400] {
        let stats = tsr(&counts, "default", &BudgetConfig::new(budget)?)?;
        println!(
            "  budget {budget:>3}: tsr = {:.3} (mean text tokens {:.1})",
            stats.tsr, stats.mean_table_text_tokens
        );
    }

    println!("\ntsr > 1 means the text form costs more tokens than the image budget");
    Ok(())
}
