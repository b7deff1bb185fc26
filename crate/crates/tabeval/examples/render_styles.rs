//! Render one table under several style templates and write the PNGs, the
//! cell-geometry sidecars, and an HTML export side by side.
//!
//! Run with `cargo run --example render_styles`. Output lands in
//! `target/example-out/render_styles/`.

use std::fs;
use std::path::PathBuf;

use tabeval::render::{export_html, render, StylePool};
use tabeval::{CellValue, TableGrid};

fn sample_grid() -> tabeval::Result<TableGrid> {
    TableGrid::new(
        "satellites",
        vec![
            "name".to_string(),
            "body".to_string(),
            "radius_km".to_string(),
            "discovered".to_string(),
        ],
        vec![
            vec![
                CellValue::text("Io"),
                CellValue::text("Jupiter"),
                CellValue::Real(1821.6),
                CellValue::Integer(1610),
            ],
            vec![
                CellValue::text("Europa"),
                CellValue::text("Jupiter"),
                CellValue::Real(1560.8),
                CellValue::Integer(1610),
            ],
            vec![
                CellValue::text("Titan"),
                CellValue::text("Saturn"),
                CellValue::Real(2574.7),
                CellValue::Integer(1655),
            ],
            vec![
                CellValue::text("Triton"),
                CellValue::text("Neptune"),
                CellValue::Real(1353.4),
                CellValue::Integer(1846),
            ],
        ],
    )
}

fn main() -> tabeval::Result<()> {
    let out_dir = PathBuf::from("target/example-out/render_styles");
    fs::create_dir_all(&out_dir).map_err(|e| tabeval::Error::io(&out_dir, e))?;

    let grid = sample_grid()?;
    let pool = StylePool::builtin();

    for template in pool.templates() {
        let img = render(&grid, template)?;
        let png_path = out_dir.join(format!("{}.png", template.template_id));
        fs::write(&png_path, img.to_png_bytes()?).map_err(|e| tabeval::Error::io(&png_path, e))?;

        let sidecar = img.geometry();
        let json_path = out_dir.join(format!("{}.json", template.template_id));
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        fs::write(&json_path, json).map_err(|e| tabeval::Error::io(&json_path, e))?;

        println!(
            "{:<12} {}x{} px, header at ({}, {}) {}x{}, {} clipped cell(s)",
            template.template_id,
            img.width,
            img.height,
            img.header_region.x,
            img.header_region.y,
            img.header_region.w,
            img.header_region.h,
            img.clipped_cells.len(),
        );
    }

    let base = pool.get("base").expect("builtin pool has base");
    let html_path = out_dir.join("satellites.html");
    fs::write(&html_path, export_html(&grid, base)?).map_err(|e| tabeval::Error::io(&html_path, e))?;

    println!("wrote PNGs, geometry sidecars, and satellites.html to {}", out_dir.display());
    Ok(())
}
