//! Execute a batch of predicted queries against a SQLite file under a
//! wall-clock timeout and fold the per-query results into the four-way
//! outcome taxonomy.
//!
//! Run with `cargo run --example execute_queries`.

use std::fs;
use std::path::PathBuf;

use tabeval::exec::{classify_outcome_cached, exacc, write_grid_to_sqlite, GoldCache};
use tabeval::{CellValue, TableGrid};

fn main() -> tabeval::Result<()> {
    let out_dir = PathBuf::from("target/example-out/execute_queries");
    fs::create_dir_all(&out_dir).map_err(|e| tabeval::Error::io(&out_dir, e))?;
    let db_path = out_dir.join("crew.sqlite");
    let _ = fs::remove_file(&db_path);

    let grid = TableGrid::new(
        "crew",
        vec!["id".to_string(), "name".to_string(), "missions".to_string()],
        vec![
            vec![CellValue::Integer(1), CellValue::text("Ada"), CellValue::Integer(3)],
            vec![CellValue::Integer(2), CellValue::text("Grace"), CellValue::Integer(5)],
            vec![CellValue::Integer(3), CellValue::text("Mary"), CellValue::Integer(2)],
        ],
    )?;
    write_grid_to_sqlite(&grid, &db_path)?;

    let gold = "SELECT name FROM crew WHERE missions >= 3 ORDER BY name";
    let bomb = "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) \
                SELECT count(*) FROM c";
    let predictions = [
        ("exact", gold),
        ("equivalent spelling", "select name from crew where missions >= 3 order by name asc"),
        ("wrong filter", "SELECT name FROM crew WHERE missions > 3 ORDER BY name"),
        ("typo", "SELEC name FROM crew"),
        ("missing table", "SELECT name FROM staff"),
        ("runaway recursion", bomb),
    ];

    let cache = GoldCache::new();
    let timeout_ms = 500;
    let mut outcomes = Vec::new();
    for (label, sql) in predictions {
        let outcome = classify_outcome_cached(sql, gold, &db_path, timeout_ms, &cache)?;
        println!("{label:<22} -> {outcome:?}");
        outcomes.push(outcome);
    }

    let breakdown = exacc(&outcomes)?;
    println!(
        "\n{} predictions: {} correct, {} executable-wrong, {} timeout, {} non-executable",
        breakdown.total,
        breakdown.correct,
        breakdown.executable_wrong,
        breakdown.timeout,
        breakdown.non_executable,
    );
    println!("EXAcc = {:.4}, ValidSQL = {:.4}", breakdown.exacc(), breakdown.valid_sql());
    Ok(())
}
