//! Dataset toolkit and deterministic evaluation harness for SQL generated
//! from rendered table images.
//!
//! The crate covers the full loop: structured table grids ([`grid`]), a
//! deterministic image renderer with geometry metadata ([`render`]), seeded
//! visual perturbations ([`perturb`]), conservative SQL canonicalization
//! ([`canon`]), sandboxed execution-based scoring ([`exec`]), token budget
//! accounting ([`tokens`]), and the dataset/evaluation orchestration that
//! ties them together ([`harness`]).

pub mod canon;
pub mod error;
pub mod exec;
pub mod grid;
pub mod harness;
pub mod manifest;
pub mod perturb;
pub mod render;
pub mod text;
pub mod tokens;

pub use error::{Error, Result};
pub use grid::{linearize, load_grid, transpose, CellValue, LinearizedTable, TableGrid};
