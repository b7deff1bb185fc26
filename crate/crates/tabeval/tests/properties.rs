//! Property-based checks over the seams that fixture tests cannot sweep:
//! canonicalizer totality on arbitrary input, clause-order insensitivity
//! on generated selects, grid document round-trips, pairing permutations,
//! token accounting, and render determinism.

mod common;

use proptest::prelude::*;

use tabeval::canon::canonicalize;
use tabeval::grid::{grid_to_document, parse_grid, ColumnType};
use tabeval::perturb::{derangement, example_rng};
use tabeval::render::{render, StylePool};
use tabeval::tokens::{tsr, BudgetConfig};
use tabeval::{CellValue, TableGrid};

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,7}"
}

fn comparison() -> impl Strategy<Value = String> {
    (ident(), prop_oneof!["=", "<>", "<", ">", "<=", ">="], 0i64..100)
        .prop_map(|(col, op, v)| format!("{col} {op} {v}"))
}

fn cell_for(ty: ColumnType) -> BoxedStrategy<CellValue> {
    let value = match ty {
        ColumnType::Int => any::<i64>().prop_map(CellValue::Integer).boxed(),
        ColumnType::Real => {
            (-1.0e9f64..1.0e9).prop_map(CellValue::Real).boxed()
        }
        ColumnType::Text => "[ -~]{0,12}".prop_map(CellValue::text).boxed(),
    };
    prop_oneof![9 => value, 1 => Just(CellValue::Null)].boxed()
}

prop_compose! {
    fn typed_grid()(
        name in ident(),
        types in prop::collection::vec(
            prop_oneof![Just(ColumnType::Int), Just(ColumnType::Real), Just(ColumnType::Text)],
            1..5,
        ),
        nrows in 0usize..8,
    )(
        rows in prop::collection::vec(
            types.iter().map(|&t| cell_for(t)).collect::<Vec<_>>(),
            nrows..=nrows,
        ),
        name in Just(name),
        ncols in Just(types.len()),
    ) -> TableGrid {
        let columns = (0..ncols).map(|c| format!("c{c}")).collect();
        TableGrid::new(name, columns, rows).expect("generated grid is valid")
    }
}

prop_compose! {
    fn small_grid()(
        grid in typed_grid().prop_filter("renderable size", |g| {
            g.column_count() <= 4 && g.row_count() <= 5
        })
    ) -> TableGrid {
        grid
    }
}

proptest! {
    #[test]
    fn canonicalize_never_panics_and_is_idempotent_when_it_succeeds(s in ".{0,60}") {
        if let Ok(first) = canonicalize(&s) {
            let second = canonicalize(&first.text).expect("canonical text re-canonicalizes");
            prop_assert_eq!(second.text, first.text);
        }
    }

    #[test]
    fn generated_selects_are_idempotent_and_chain_order_free(
        table in ident(),
        cols in prop::collection::btree_set(ident(), 1..4),
        conds in prop::collection::vec(comparison(), 1..5),
        use_or in any::<bool>(),
        shuffled in any::<u64>(),
    ) {
        let op = if use_or { "OR" } else { "AND" };
        let select: Vec<String> = cols.into_iter().collect();
        let q = format!(
            "SELECT {} FROM {table} WHERE {}",
            select.join(", "),
            conds.join(&format!(" {op} "))
        );
        let base = canonicalize(&q).unwrap();
        prop_assert!(base.parse_succeeded, "should parse: {}", q);
        let again = canonicalize(&base.text).unwrap();
        prop_assert_eq!(&again.text, &base.text);

        let mut reordered = conds.clone();
        let n = reordered.len();
        for i in (1..n).rev() {
            reordered.swap(i, (shuffled as usize).wrapping_mul(i) % (i + 1));
        }
        let q2 = format!(
            "SELECT {} FROM {table} WHERE {}",
            select.join(", "),
            reordered.join(&format!(" {op} "))
        );
        let other = canonicalize(&q2).unwrap();
        prop_assert_eq!(other.text, base.text, "chain order leaked into canonical form");
    }

    #[test]
    fn grid_documents_round_trip(grid in typed_grid()) {
        let doc = grid_to_document(&grid);
        let back = parse_grid(&doc).expect("serialized grid parses");
        prop_assert_eq!(back.name(), grid.name());
        prop_assert_eq!(back.columns(), grid.columns());
        prop_assert_eq!(back.rows(), grid.rows());
    }

    #[test]
    fn derangements_are_fixed_point_free_permutations(n in 2usize..200, seed in any::<u64>()) {
        let mut rng = example_rng(seed, "property");
        let d = derangement(n, &mut rng).unwrap();
        let mut sorted = d.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        prop_assert!(d.iter().enumerate().all(|(i, &p)| p != i));
    }

    #[test]
    fn tsr_is_the_exact_mean_over_budget_and_ignores_order(
        counts in prop::collection::vec((ident(), 0u64..10_000), 1..40),
        budget in 1u64..2048,
        rot in any::<usize>(),
    ) {
        let cfg = BudgetConfig::new(budget).unwrap();
        let stats = tsr(&counts, "default", &cfg).unwrap();
        let total: u64 = counts.iter().map(|(_, c)| c).sum();
        let expected = (total as f64 / counts.len() as f64) / budget as f64;
        prop_assert_eq!(stats.tsr, expected);

        let mut rotated = counts.clone();
        rotated.rotate_left(rot % counts.len());
        let stats2 = tsr(&rotated, "default", &cfg).unwrap();
        prop_assert_eq!(stats2.tsr, stats.tsr);
        prop_assert_eq!(stats2.mean_table_text_tokens, stats.mean_table_text_tokens);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rendering_is_deterministic(grid in small_grid()) {
        let pool = StylePool::builtin();
        let style = pool.get("zebra").unwrap();
        let a = render(&grid, style).unwrap().to_png_bytes().unwrap();
        let b = render(&grid, style).unwrap().to_png_bytes().unwrap();
        prop_assert_eq!(a, b);
    }
}
