//! Shared fixtures for the integration suites: seeded grid and query
//! generators, a multi-table SQLite fixture, and dataset scaffolding.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tabeval::exec::{write_grid_to_sqlite, OutcomeBreakdown};
use tabeval::grid::grid_to_document;
use tabeval::harness::{
    build_dataset, BuildConfig, ConfigEcho, MetricsReport, TaxonomyBreakdown,
};
use tabeval::manifest::{DatasetManifest, ManifestRecord, PredictionRecord};
use tabeval::tokens::TokenStats;
use tabeval::{CellValue, TableGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const WORDS: &[&str] = &[
    "alpha",
    "beta",
    "gamma",
    "delta-Δ",
    "épée",
    "a rather long cell value that will not fit",
    "x",
    "Ω",
];

/// Random grid with mixed cell types. Rows span `min_rows..=max_rows`.
pub fn random_grid(
    r: &mut ChaCha8Rng,
    name: &str,
    max_cols: usize,
    min_rows: usize,
    max_rows: usize,
) -> TableGrid {
    let cols = r.random_range(1..=max_cols);
    let rows = r.random_range(min_rows..=max_rows);
    let columns: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
    let body = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| match r.random_range(0u32..4) {
                    0 => CellValue::Integer(r.random_range(-1000i64..1000)),
                    1 => CellValue::Real(r.random_range(-80_000i64..80_000) as f64 / 8.0),
                    2 => CellValue::Null,
                    _ => CellValue::text(WORDS[r.random_range(0..WORDS.len())]),
                })
                .collect()
        })
        .collect();
    TableGrid::new(name, columns, body).expect("generated grid is valid")
}

/// 200 distinct generated queries covering WHERE, GROUP BY, ORDER BY,
/// aggregates, nesting, joins, and deliberately messy surface forms.
pub fn corpus_200() -> Vec<String> {
    let tables = ["users", "orders", "events"];
    let cols: [[&str; 3]; 3] = [
        ["id", "age", "city"],
        ["oid", "total", "status"],
        ["eid", "day", "kind"],
    ];
    let mut out = Vec::with_capacity(200);
    for i in 0..200usize {
        let t = i % 3;
        let (name, c) = (tables[t], cols[t]);
        let (c0, c1, c2) = (c[0], c[1], c[2]);
        let t2 = (t + 1) % 3;
        let (name2, c0b, c1b) = (tables[t2], cols[t2][0], cols[t2][1]);
        let n = 10 + i;
        let m = i;
        let q = match i % 8 {
            0 => format!(
                "SELECT {c0}, {c1} FROM {name} WHERE {c1} > {n} AND {c2} = 'v{i}' ORDER BY {c0} DESC LIMIT 7"
            ),
            1 => format!(
                "select count(*), {c2} from {name} where ({c1} >= {n} or {c1} <= {m}) group by {c2} having count(*) > 1"
            ),
            2 => format!(
                "SELECT avg({c1}) FROM {name} WHERE {c0} IN (SELECT {c0b} FROM {name2} WHERE {c1b} < {n}) -- note {i}"
            ),
            3 => format!(
                "SELECT * FROM (SELECT {c0}, {c1} FROM {name} WHERE {c1} <> {n}) sub WHERE sub.{c1} > {m}"
            ),
            4 => format!(
                "SELECT a.{c0} FROM {name} a JOIN {name2} b ON a.{c0} = b.{c0b} WHERE b.{c1b} BETWEEN {m} AND {n}"
            ),
            5 => format!(
                "SeLeCt  {c0} ,{c1}\tFROM {name}   WHERE ((({c1} = {n})))\n/* block {i} */ ORDER BY {c1} ASC"
            ),
            6 => format!(
                "SELECT {c2}, max({c1}) FROM {name} GROUP BY {c2} ORDER BY max({c1}) DESC LIMIT 5 OFFSET {m}"
            ),
            _ => format!(
                "SELECT {c0} FROM {name} WHERE {c2} IS NOT NULL OR {c1} < {n} OR {c0} = {m}"
            ),
        };
        out.push(q);
    }
    out
}

fn people() -> TableGrid {
    let names = ["Ada", "Grace", "Mary", "Edsger", "Alan", "Barbara", "Donald", "Radia"];
    let cities = ["Lyon", "Porto", "Graz", "Turin", "Basel"];
    let mut r = rng(0x5EED_0001);
    let rows = (0..30)
        .map(|i| {
            vec![
                CellValue::Integer(i),
                CellValue::text(format!("{}-{i}", names[r.random_range(0..names.len())])),
                CellValue::Integer(r.random_range(18i64..70)),
                CellValue::text(cities[r.random_range(0..cities.len())]),
            ]
        })
        .collect();
    TableGrid::new(
        "people",
        vec!["id".into(), "name".into(), "age".into(), "city".into()],
        rows,
    )
    .unwrap()
}

fn orders() -> TableGrid {
    let statuses = ["open", "paid", "void"];
    let mut r = rng(0x5EED_0002);
    let rows = (0..40)
        .map(|i| {
            vec![
                CellValue::Integer(i),
                CellValue::Integer(r.random_range(0i64..30)),
                CellValue::Real(r.random_range(4i64..4000) as f64 / 4.0),
                CellValue::text(statuses[r.random_range(0..statuses.len())]),
            ]
        })
        .collect();
    TableGrid::new(
        "orders",
        vec!["id".into(), "person_id".into(), "total".into(), "status".into()],
        rows,
    )
    .unwrap()
}

fn products() -> TableGrid {
    let mut r = rng(0x5EED_0003);
    let rows = (0..25)
        .map(|i| {
            vec![
                CellValue::Integer(i),
                CellValue::text(format!("prod-{i}")),
                CellValue::Real(r.random_range(1i64..500) as f64 / 2.0),
                CellValue::Integer(r.random_range(0i64..90)),
            ]
        })
        .collect();
    TableGrid::new(
        "products",
        vec!["id".into(), "name".into(), "price".into(), "stock".into()],
        rows,
    )
    .unwrap()
}

fn visits() -> TableGrid {
    let kinds = ["click", "view", "buy"];
    let mut r = rng(0x5EED_0004);
    let rows = (0..35)
        .map(|i| {
            vec![
                CellValue::Integer(i),
                CellValue::Integer(r.random_range(1i64..29)),
                CellValue::text(kinds[r.random_range(0..kinds.len())]),
                CellValue::Integer(r.random_range(0i64..1000)),
            ]
        })
        .collect();
    TableGrid::new(
        "visits",
        vec!["id".into(), "day".into(), "kind".into(), "hits".into()],
        rows,
    )
    .unwrap()
}

fn sensors() -> TableGrid {
    let labels = ["temp", "rpm", "load"];
    let mut r = rng(0x5EED_0005);
    let rows = (0..20)
        .map(|i| {
            vec![
                CellValue::Integer(i),
                CellValue::text(labels[r.random_range(0..labels.len())]),
                CellValue::Real(r.random_range(-4000i64..4000) as f64 / 8.0),
            ]
        })
        .collect();
    TableGrid::new("sensors", vec!["id".into(), "label".into(), "value".into()], rows).unwrap()
}

/// Seeded five-table database written to `dir/fixture.sqlite`.
pub fn five_table_db(dir: &Path) -> PathBuf {
    let db = dir.join("fixture.sqlite");
    for grid in [people(), orders(), products(), visits(), sensors()] {
        write_grid_to_sqlite(&grid, &db).expect("fixture table writes");
    }
    db
}

/// 100 queries that parse and execute against the five-table fixture.
pub fn queries_100() -> Vec<String> {
    let cities = ["Lyon", "Porto", "Graz", "Turin", "Basel"];
    let statuses = ["open", "paid", "void"];
    let kinds = ["click", "view", "buy"];
    let mut r = rng(0x5EED_0100);
    let mut out = Vec::with_capacity(100);
    for i in 0..100usize {
        let a: i64 = r.random_range(20..60);
        let t: i64 = r.random_range(50..800);
        let n: i64 = r.random_range(3..12);
        let city = cities[r.random_range(0..cities.len())];
        let st = statuses[r.random_range(0..statuses.len())];
        let k = kinds[r.random_range(0..kinds.len())];
        let q = match i % 11 {
            0 => format!("SELECT name, age FROM people WHERE age > {a} AND city = '{city}'"),
            1 => format!(
                "select city, count(*) from people where age >= {a} group by city having count(*) >= 1 order by count(*) desc, city asc"
            ),
            2 => format!(
                "SELECT * FROM orders WHERE (total > {t} OR status = '{st}') ORDER BY total DESC LIMIT {n}"
            ),
            3 => format!("SELECT avg(total) FROM orders WHERE total BETWEEN {a} AND {t}"),
            4 => format!(
                "SELECT name FROM people WHERE id IN (SELECT person_id FROM orders WHERE total > {t})"
            ),
            5 => format!(
                "SELECT p.name, o.total FROM people p JOIN orders o ON p.id = o.person_id WHERE o.total >= {t} ORDER BY o.total DESC, p.name ASC"
            ),
            6 => format!("SELECT upper(name), price FROM products WHERE price < {t} AND stock > {n}"),
            7 => "SELECT kind, sum(hits) FROM visits GROUP BY kind ORDER BY sum(hits) DESC"
                .to_string(),
            8 => format!("SELECT label, avg(value) FROM sensors WHERE value > -{t} GROUP BY label"),
            9 => format!("SELECT count(*) FROM visits WHERE day >= {n} AND kind <> '{k}'"),
            _ => format!(
                "SELECT name FROM products WHERE id NOT IN (SELECT id FROM products WHERE stock < {n}) ORDER BY name"
            ),
        };
        out.push(q);
    }
    out
}

/// Dataset whose 50 predictions land on exactly 38 correct, 5 executable
/// wrong, 1 timeout, and 6 non-executable outcomes (two of those by
/// omission from the prediction file).
pub fn taxonomy_fixture(root: &Path) -> (DatasetManifest, Vec<PredictionRecord>) {
    std::fs::create_dir_all(root).unwrap();
    let grid = TableGrid::new(
        "stock",
        vec!["id".into(), "label".into(), "qty".into()],
        (0..6)
            .map(|i| {
                vec![
                    CellValue::Integer(i),
                    CellValue::text(format!("item{i}")),
                    CellValue::Integer(10 * i),
                ]
            })
            .collect(),
    )
    .unwrap();
    let table_path = root.join("stock.json");
    std::fs::write(&table_path, grid_to_document(&grid)).unwrap();
    let db_path = root.join("stock.sqlite");
    write_grid_to_sqlite(&grid, &db_path).unwrap();

    let bomb = "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) \
                SELECT count(*) FROM c";
    let bad = [
        "SELEC count(*) FROM stock",
        "SELECT FROM stock",
        "SELECT * FROM missing_table",
        "SELECT count( FROM stock",
    ];

    let mut records = Vec::new();
    let mut predictions = Vec::new();
    for i in 0..50usize {
        let id = format!("e{i:02}");
        let gold = format!("SELECT count(*) FROM stock WHERE id >= {}", i % 3);
        records.push(ManifestRecord {
            example_id: id.clone(),
            question: format!("question {i}"),
            gold_sql: gold.clone(),
            table_file: "stock.json".into(),
            db_file: "stock.sqlite".into(),
            image_file: None,
            template_id: "base".into(),
            perturbation_tag: "clean".into(),
            mask_record: None,
        });
        let predicted = match i {
            0..=37 => Some(gold),
            38..=42 => Some("SELECT count(*) FROM stock WHERE id > 999".to_string()),
            43 => Some(bomb.to_string()),
            44..=47 => Some(bad[i - 44].to_string()),
            _ => None,
        };
        if let Some(predicted_sql) = predicted {
            predictions.push(PredictionRecord { example_id: id, predicted_sql });
        }
    }
    let manifest = DatasetManifest::new(records, root.to_path_buf()).unwrap();
    (manifest, predictions)
}

/// Built 200-example dataset over four tables with predictions mixing
/// correct, wrong, non-executable, and missing entries.
pub fn dataset_200(root: &Path) -> (DatasetManifest, Vec<PredictionRecord>) {
    let tables_dir = root.join("tables");
    std::fs::create_dir_all(&tables_dir).unwrap();
    for t in 0..4 {
        let name = format!("t{t}");
        let grid = TableGrid::new(
            &name,
            vec!["k".into(), "v".into()],
            (0..8)
                .map(|i| vec![CellValue::Integer(i), CellValue::text(format!("w{t}-{i}"))])
                .collect(),
        )
        .unwrap();
        std::fs::write(tables_dir.join(format!("{name}.json")), grid_to_document(&grid)).unwrap();
    }
    let mut questions = String::new();
    let mut predictions = Vec::new();
    for i in 0..200usize {
        let id = format!("q{i:03}");
        let t = format!("t{}", i % 4);
        let gold = format!("SELECT count(*) FROM {t} WHERE k >= {}", i % 5);
        questions.push_str(&format!(
            "{{\"example_id\":\"{id}\",\"question\":\"q\",\"table\":\"{t}\",\"gold_sql\":\"{gold}\"}}\n"
        ));
        let predicted = match i % 10 {
            0..=6 => Some(gold),
            7 => Some(format!("SELECT count(*) FROM {t} WHERE k >= 999")),
            8 => Some(format!("SELEC count(*) FROM {t}")),
            _ => None,
        };
        if let Some(predicted_sql) = predicted {
            predictions.push(PredictionRecord { example_id: id, predicted_sql });
        }
    }
    let questions_file = root.join("questions.jsonl");
    std::fs::write(&questions_file, questions).unwrap();

    let mut cfg = BuildConfig::new(
        tables_dir,
        questions_file,
        root.join("dbs"),
        root.join("dataset"),
    );
    cfg.synthesize_missing_dbs = true;
    let manifest = build_dataset(&cfg).expect("dataset builds");
    (manifest, predictions)
}

/// Metrics report fixture with the given tag and accuracy; every other
/// field is filled with consistent placeholder values.
pub fn metrics_report(tag: &str, exacc: f64) -> MetricsReport {
    let total = 100usize;
    let correct = (exacc * total as f64).round() as usize;
    let breakdown = OutcomeBreakdown {
        total,
        correct,
        executable_wrong: total - correct,
        timeout: 0,
        non_executable: 0,
    };
    MetricsReport {
        perturbation_tag: tag.to_string(),
        exacc,
        ex_can: 0.0,
        valid_sql: 1.0,
        taxonomy: TaxonomyBreakdown::from_counts(&breakdown),
        token_stats: TokenStats {
            tokenizer_id: "default".into(),
            optical_budget: 256,
            mean_table_text_tokens: 100.0,
            mean_optical_tokens: 256.0,
            tsr: 100.0 / 256.0,
            per_example: Vec::new(),
        },
        deltas: BTreeMap::new(),
        config: ConfigEcho {
            seed: 0,
            timeout_ms: 2000,
            tokenizer_id: "default".into(),
            optical_budget: 256,
        },
    }
}
