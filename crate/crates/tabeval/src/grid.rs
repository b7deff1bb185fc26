//! Structured table grid: the single source of truth for linearization,
//! rendering, and the transpose transform.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::nfkc;

/// A single table cell.
///
/// Text is stored NFKC-normalized; reals are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum CellValue {
    Text(String),
    Integer(i64),
    Real(f64),
    Null,
}

impl CellValue {
    /// Construct a text cell, applying unicode normalization.
    pub fn text(s: impl AsRef<str>) -> Self {
        CellValue::Text(nfkc(s.as_ref()))
    }

    /// Render the cell the way `linearize` and the renderer print it:
    /// NULL as the literal token, reals in shortest round-trip form.
    pub fn display_text(&self) -> String {
        match self {
            CellValue::Text(s) => s.clone(),
            CellValue::Integer(i) => i.to_string(),
            CellValue::Real(f) => f.to_string(),
            CellValue::Null => "NULL".to_string(),
        }
    }
}

/// Structured table: a header row of column names plus typed body cells.
/// Row and column order are fixed at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableGrid {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<CellValue>>,
    #[serde(default)]
    has_row_index: bool,
}

impl TableGrid {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<String>,
        rows: Vec<Vec<CellValue>>,
    ) -> Result<Self> {
        Self::with_row_index(name, columns, rows, false)
    }

    pub fn with_row_index(
        name: impl Into<String>,
        columns: Vec<String>,
        rows: Vec<Vec<CellValue>>,
        has_row_index: bool,
    ) -> Result<Self> {
        let name = name.into();
        if columns.is_empty() {
            return Err(invalid(None, "grid must have at least one column"));
        }
        for (i, col) in columns.iter().enumerate() {
            if col.is_empty() {
                return Err(invalid(None, format!("column {i} has an empty name")));
            }
            if columns[..i].contains(col) {
                return Err(invalid(None, format!("duplicate column name {col:?}")));
            }
        }
        let mut rows = rows;
        for (r, row) in rows.iter_mut().enumerate() {
            if row.len() != columns.len() {
                return Err(invalid(
                    None,
                    format!(
                        "row {r} has {} cells, expected {}",
                        row.len(),
                        columns.len()
                    ),
                ));
            }
            for (c, cell) in row.iter_mut().enumerate() {
                match cell {
                    CellValue::Real(f) if !f.is_finite() => {
                        return Err(invalid(
                            None,
                            format!("row {r}, column {:?}: non-finite real", columns[c]),
                        ));
                    }
                    CellValue::Text(s) => {
                        let norm = nfkc(s);
                        if norm != *s {
                            *s = norm;
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(TableGrid {
            name,
            columns,
            rows,
            has_row_index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<CellValue>] {
        &self.rows
    }

    pub fn has_row_index(&self) -> bool {
        self.has_row_index
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

/// Deterministic textual linearization of a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearizedTable {
    pub text: String,
    /// Character count of the schema prefix (`table <name> ( ... )`).
    pub schema_part_length: usize,
}

/// Column type tags accepted by the grid file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Int,
    Real,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
}

#[derive(Debug, Deserialize)]
struct GridDocument {
    name: String,
    columns: Vec<ColumnSpec>,
    rows: Vec<Vec<serde_json::Value>>,
}

/// Load and validate a grid from its file format: a JSON document with
/// `{name, columns:[{name,type}], rows:[[...]]}`, types in {text,int,real}.
pub fn load_grid(path: impl AsRef<Path>) -> Result<TableGrid> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: GridDocument = serde_json::from_str(&raw).map_err(|e| Error::GridFormat {
        path: Some(path.to_path_buf()),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    grid_from_document(doc).map_err(|e| match e {
        Error::InvalidGrid { message, .. } => Error::InvalidGrid {
            path: Some(path.to_path_buf()),
            message,
        },
        other => other,
    })
}

/// Parse a grid from an in-memory document string (same format as `load_grid`).
pub fn parse_grid(raw: &str) -> Result<TableGrid> {
    let doc: GridDocument = serde_json::from_str(raw).map_err(|e| Error::GridFormat {
        path: None,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    grid_from_document(doc)
}

/// Serialize a grid back to the grid file format.
pub fn grid_to_document(grid: &TableGrid) -> String {
    let columns: Vec<serde_json::Value> = grid
        .columns()
        .iter()
        .enumerate()
        .map(|(c, name)| {
            // Declared type = widest type observed in the column.
            let mut ty = "text";
            let mut any_real = false;
            let mut any_int = false;
            let mut any_text = false;
            for row in grid.rows() {
                match &row[c] {
                    CellValue::Real(_) => any_real = true,
                    CellValue::Integer(_) => any_int = true,
                    CellValue::Text(_) => any_text = true,
                    CellValue::Null => {}
                }
            }
            if !any_text {
                if any_real {
                    ty = "real";
                } else if any_int {
                    ty = "int";
                }
            }
            serde_json::json!({"name": name, "type": ty})
        })
        .collect();
    let rows: Vec<serde_json::Value> = grid
        .rows()
        .iter()
        .map(|row| {
            serde_json::Value::Array(
                row.iter()
                    .map(|cell| match cell {
                        CellValue::Text(s) => serde_json::Value::String(s.clone()),
                        CellValue::Integer(i) => serde_json::json!(i),
                        CellValue::Real(f) => serde_json::json!(f),
                        CellValue::Null => serde_json::Value::Null,
                    })
                    .collect(),
            )
        })
        .collect();
    let doc = serde_json::json!({
        "name": grid.name(),
        "columns": columns,
        "rows": rows,
    });
    serde_json::to_string_pretty(&doc).expect("grid document serialization")
}

fn grid_from_document(doc: GridDocument) -> Result<TableGrid> {
    let columns: Vec<String> = doc.columns.iter().map(|c| c.name.clone()).collect();
    let mut rows = Vec::with_capacity(doc.rows.len());
    for (r, raw_row) in doc.rows.into_iter().enumerate() {
        if raw_row.len() != doc.columns.len() {
            return Err(invalid(
                None,
                format!(
                    "row {r} has {} cells, expected {}",
                    raw_row.len(),
                    doc.columns.len()
                ),
            ));
        }
        let mut row = Vec::with_capacity(raw_row.len());
        for (c, value) in raw_row.into_iter().enumerate() {
            row.push(cell_from_json(&value, doc.columns[c].column_type).map_err(|msg| {
                invalid(
                    None,
                    format!("row {r}, column {:?}: {msg}", doc.columns[c].name),
                )
            })?);
        }
        rows.push(row);
    }
    TableGrid::new(doc.name, columns, rows)
}

fn cell_from_json(
    value: &serde_json::Value,
    ty: ColumnType,
) -> std::result::Result<CellValue, String> {
    use serde_json::Value;
    match (value, ty) {
        (Value::Null, _) => Ok(CellValue::Null),
        (Value::String(s), ColumnType::Text) => Ok(CellValue::text(s)),
        (Value::Number(n), ColumnType::Int) => n
            .as_i64()
            .map(CellValue::Integer)
            .ok_or_else(|| format!("expected int, got {n}")),
        (Value::Number(n), ColumnType::Real) => {
            let f = n.as_f64().ok_or_else(|| format!("expected real, got {n}"))?;
            if !f.is_finite() {
                return Err("non-finite real".to_string());
            }
            Ok(CellValue::Real(f))
        }
        (other, _) => Err(format!(
            "expected {} value, got {other}",
            match ty {
                ColumnType::Text => "text",
                ColumnType::Int => "int",
                ColumnType::Real => "real",
            }
        )),
    }
}

/// Deterministic linearization: schema prefix `table <name> ( c1, c2, ... )`
/// followed by one line per row, cells pipe-delimited. NULL renders as the
/// literal token `NULL`; reals use shortest round-trip decimal form.
pub fn linearize(grid: &TableGrid) -> LinearizedTable {
    let mut schema = format!("table {} ( ", grid.name());
    for (i, col) in grid.columns().iter().enumerate() {
        if i > 0 {
            schema.push_str(", ");
        }
        schema.push_str(col);
    }
    schema.push_str(" )");
    let schema_part_length = schema.chars().count();

    let mut text = schema;
    for row in grid.rows() {
        text.push('\n');
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                text.push('|');
            }
            let _ = write!(text, "{}", cell.display_text());
        }
    }
    LinearizedTable {
        text,
        schema_part_length,
    }
}

/// Name of the index header column added by `transpose`.
pub const TRANSPOSE_INDEX_HEADER: &str = "idx";

/// Row label for original row `i` (zero-based) in a transposed grid.
pub fn transpose_row_label(i: usize) -> String {
    format!("r{}", i + 1)
}

/// Semantics-preserving transpose: each original column becomes a labeled
/// row whose first cell is the original column name; original rows become
/// columns labeled `r1..rN` behind an index header.
pub fn transpose(grid: &TableGrid) -> TableGrid {
    let mut columns = Vec::with_capacity(grid.row_count() + 1);
    columns.push(TRANSPOSE_INDEX_HEADER.to_string());
    for i in 0..grid.row_count() {
        columns.push(transpose_row_label(i));
    }
    let rows: Vec<Vec<CellValue>> = grid
        .columns()
        .iter()
        .enumerate()
        .map(|(c, col_name)| {
            let mut row = Vec::with_capacity(grid.row_count() + 1);
            row.push(CellValue::Text(col_name.clone()));
            for orig_row in grid.rows() {
                row.push(orig_row[c].clone());
            }
            row
        })
        .collect();
    TableGrid::with_row_index(grid.name(), columns, rows, true)
        .expect("transpose of a valid grid is valid")
}

fn invalid(path: Option<std::path::PathBuf>, message: impl Into<String>) -> Error {
    Error::InvalidGrid {
        path,
        message: message.into(),
    }
}
