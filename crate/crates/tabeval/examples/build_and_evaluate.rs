//! End-to-end pipeline: write grid files and a question set, build a clean
//! rendered dataset (databases synthesized from the grids), score a mixed
//! batch of predictions, and print the metrics report.
//!
//! Run with `cargo run --example build_and_evaluate`. Output lands in
//! `target/example-out/build_and_evaluate/`.

use std::fs;
use std::path::{Path, PathBuf};

use tabeval::grid::grid_to_document;
use tabeval::harness::{build_dataset, evaluate, BuildConfig, EvalConfig};
use tabeval::manifest::{PredictionRecord, PredictionSet};
use tabeval::{CellValue, TableGrid};

fn write_inputs(root: &Path) -> tabeval::Result<()> {
    let tables_dir = root.join("tables");
    fs::create_dir_all(&tables_dir).map_err(|e| tabeval::Error::io(&tables_dir, e))?;

    let cities = TableGrid::new(
        "cities",
        vec!["city".to_string(), "country".to_string(), "population".to_string()],
        vec![
            vec![CellValue::text("Lyon"), CellValue::text("France"), CellValue::Integer(522_000)],
            vec![CellValue::text("Porto"), CellValue::text("Portugal"), CellValue::Integer(231_000)],
            vec![CellValue::text("Graz"), CellValue::text("Austria"), CellValue::Integer(289_000)],
        ],
    )?;
    let rivers = TableGrid::new(
        "rivers",
        vec!["river".to_string(), "length_km".to_string()],
        vec![
            vec![CellValue::text("Loire"), CellValue::Integer(1006)],
            vec![CellValue::text("Douro"), CellValue::Integer(897)],
        ],
    )?;
    for grid in [&cities, &rivers] {
        let path = tables_dir.join(format!("{}.json", grid.name()));
        fs::write(&path, grid_to_document(grid)).map_err(|e| tabeval::Error::io(&path, e))?;
    }

    let questions = [
        ("e1", "cities", "SELECT city FROM cities WHERE population > 250000 ORDER BY city"),
        ("e2", "cities", "SELECT count(*) FROM cities"),
        ("e3", "rivers", "SELECT river FROM rivers ORDER BY length_km DESC LIMIT 1"),
        ("e4", "rivers", "SELECT max(length_km) FROM rivers"),
    ];
    let mut lines = String::new();
    for (id, table, gold) in questions {
        lines.push_str(&format!(
            "{{\"example_id\":\"{id}\",\"question\":\"q {id}\",\"table\":\"{table}\",\"gold_sql\":\"{gold}\"}}\n"
        ));
    }
    let qpath = root.join("questions.jsonl");
    fs::write(&qpath, lines).map_err(|e| tabeval::Error::io(&qpath, e))?;
    Ok(())
}

fn main() -> tabeval::Result<()> {
    let root = PathBuf::from("target/example-out/build_and_evaluate");
    let _ = fs::remove_dir_all(&root);
    write_inputs(&root)?;

    let mut cfg = BuildConfig::new(
        root.join("tables"),
        root.join("questions.jsonl"),
        root.join("dbs"),
        root.join("dataset"),
    );
    cfg.synthesize_missing_dbs = true;
    let manifest = build_dataset(&cfg)?;
    println!("built {} examples", manifest.records().len());

    let predictions = PredictionSet::from_records(vec![
        PredictionRecord {
            example_id: "e1".to_string(),
            predicted_sql: "SELECT city FROM cities WHERE population > 250000 ORDER BY city"
                .to_string(),
        },
        PredictionRecord {
            example_id: "e2".to_string(),
            predicted_sql: "SELECT count(city) FROM cities WHERE population > 0".to_string(),
        },
        PredictionRecord {
            example_id: "e3".to_string(),
            predicted_sql: "SELECT river FROM rivers ODER BY length_km".to_string(),
        },
        // e4 is deliberately absent and scores as non-executable.
    ])?;

    let report = evaluate(&manifest, &predictions, &EvalConfig::default())?;
    print!("{}", report.metrics.to_text());

    println!("\nper-example outcomes:");
    for row in &report.rows {
        println!("  {:<4} {:?} ex_can={}", row.example_id, row.outcome, row.ex_can);
    }

    report.save(&root.join("report"))?;
    println!("\nwrote report.json, rows.jsonl, report.txt to {}", root.join("report").display());
    Ok(())
}
