//! Deterministic table-image rendering.
//!
//! The renderer turns a [`TableGrid`] into an RGB raster using integer-only
//! layout and the bundled bitmap font, so the same grid and style template
//! produce byte-identical pixels on every platform. Alongside the pixels it
//! reports the header bounding box and one bounding box per body cell, which
//! downstream perturbations and audits rely on.

mod font;

use std::collections::BTreeMap;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::ImageEncoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TableGrid;

pub use font::ELLIPSIS;

/// Default long-side target for [`preprocess`].
pub const DEFAULT_TARGET_LONG_SIDE: u32 = 1024;

/// Hard ceiling on either rendered dimension, to keep layout arithmetic and
/// downstream encoders in sane territory.
pub const MAX_RENDER_SIDE: u32 = 16_384;

const WHITE: [u8; 3] = [255, 255, 255];
const BLACK: [u8; 3] = [0, 0, 0];
const ZEBRA_FILL: [u8; 3] = [235, 235, 235];
const HEADER_FILL: [u8; 3] = [215, 215, 215];

/// Axis-aligned pixel rectangle; `x`/`y` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Region {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Region { x, y, w, h }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

/// How column widths are chosen during layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnWidthMode {
    /// Each column is as wide as its widest cell plus padding.
    Auto,
    /// Every column is exactly this many pixels; overflowing text is clipped
    /// with a trailing ellipsis.
    Fixed(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderEmphasis {
    None,
    Fill,
    Underline,
}

/// A complete visual style for one rendered table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleTemplate {
    pub template_id: String,
    pub font_family: String,
    pub font_size: u32,
    pub header_bold: bool,
    pub cell_padding: u32,
    pub row_height: u32,
    pub column_width_mode: ColumnWidthMode,
    pub border_thickness: u32,
    pub grid_visible: bool,
    pub zebra: bool,
    pub header_emphasis: HeaderEmphasis,
}

impl StyleTemplate {
    /// Checks that every dimension is strictly positive and the font family
    /// is one of the bundled families.
    pub fn validate(&self) -> Result<()> {
        if self.template_id.is_empty() {
            return Err(Error::Config("style template has an empty template_id".into()));
        }
        let dims = [
            ("font_size", self.font_size),
            ("cell_padding", self.cell_padding),
            ("row_height", self.row_height),
            ("border_thickness", self.border_thickness),
        ];
        for (name, value) in dims {
            if value == 0 {
                return Err(Error::Config(format!(
                    "style template '{}': {} must be strictly positive",
                    self.template_id, name
                )));
            }
        }
        if let ColumnWidthMode::Fixed(px) = self.column_width_mode {
            if px == 0 {
                return Err(Error::Config(format!(
                    "style template '{}': fixed column width must be strictly positive",
                    self.template_id
                )));
            }
        }
        if glyph_extra_advance(&self.font_family).is_none() {
            return Err(Error::Config(format!(
                "style template '{}': unknown font family '{}' (bundled families: gridfont, gridfont-wide)",
                self.template_id, self.font_family
            )));
        }
        Ok(())
    }
}

fn glyph_extra_advance(family: &str) -> Option<u32> {
    match family {
        "gridfont" => Some(0),
        "gridfont-wide" => Some(2),
        _ => None,
    }
}

/// A named collection of style templates that perturbations can draw from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StylePool {
    pool_id: String,
    templates: Vec<StyleTemplate>,
}

impl StylePool {
    pub fn new(pool_id: impl Into<String>, templates: Vec<StyleTemplate>) -> Result<Self> {
        let pool = StylePool { pool_id: pool_id.into(), templates };
        pool.validate()?;
        Ok(pool)
    }

    /// The eight bundled templates, spanning both font families, auto and
    /// fixed column widths, zebra striping, visible and invisible grids, and
    /// all three header emphasis modes.
    pub fn builtin() -> Self {
        let base = StyleTemplate {
            template_id: "base".into(),
            font_family: "gridfont".into(),
            font_size: 16,
            header_bold: true,
            cell_padding: 6,
            row_height: 28,
            column_width_mode: ColumnWidthMode::Auto,
            border_thickness: 1,
            grid_visible: true,
            zebra: false,
            header_emphasis: HeaderEmphasis::None,
        };
        let templates = vec![
            base.clone(),
            StyleTemplate {
                template_id: "compact".into(),
                font_size: 8,
                header_bold: false,
                cell_padding: 2,
                row_height: 12,
                ..base.clone()
            },
            StyleTemplate {
                template_id: "airy".into(),
                header_bold: false,
                cell_padding: 14,
                row_height: 44,
                ..base.clone()
            },
            StyleTemplate {
                template_id: "zebra".into(),
                zebra: true,
                header_emphasis: HeaderEmphasis::Fill,
                ..base.clone()
            },
            StyleTemplate {
                template_id: "heavy-grid".into(),
                header_bold: false,
                cell_padding: 8,
                row_height: 32,
                border_thickness: 3,
                header_emphasis: HeaderEmphasis::Underline,
                ..base.clone()
            },
            StyleTemplate {
                template_id: "wide-fixed".into(),
                column_width_mode: ColumnWidthMode::Fixed(120),
                header_emphasis: HeaderEmphasis::Fill,
                ..base.clone()
            },
            StyleTemplate {
                template_id: "wide-font".into(),
                font_family: "gridfont-wide".into(),
                header_bold: false,
                row_height: 30,
                ..base.clone()
            },
            StyleTemplate {
                template_id: "minimal".into(),
                header_bold: false,
                grid_visible: false,
                header_emphasis: HeaderEmphasis::Underline,
                ..base
            },
        ];
        StylePool { pool_id: "builtin".into(), templates }
    }

    /// Loads a pool from a JSON config file and validates it.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let pool: StylePool =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        pool.validate()?;
        Ok(pool)
    }

    fn validate(&self) -> Result<()> {
        if self.pool_id.is_empty() {
            return Err(Error::Config("style pool has an empty pool_id".into()));
        }
        if self.templates.is_empty() {
            return Err(Error::Config(format!("style pool '{}' has no templates", self.pool_id)));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &self.templates {
            t.validate()?;
            if !seen.insert(t.template_id.as_str()) {
                return Err(Error::Config(format!(
                    "style pool '{}' has duplicate template_id '{}'",
                    self.pool_id, t.template_id
                )));
            }
        }
        Ok(())
    }

    pub fn pool_id(&self) -> &str {
        &self.pool_id
    }

    pub fn templates(&self) -> &[StyleTemplate] {
        &self.templates
    }

    pub fn get(&self, template_id: &str) -> Option<&StyleTemplate> {
        self.templates.iter().find(|t| t.template_id == template_id)
    }
}

/// Rendered RGB raster plus the geometry downstream stages need.
///
/// `cell_regions` maps 0-based `(row, col)` of each body cell to its bounding
/// box; the header row is covered by `header_region` as a whole. Entries in
/// `clipped_cells` use row 0 for the header and `1 + body_row` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB8, `width * height * 3` bytes.
    pub pixels: Vec<u8>,
    pub header_region: Region,
    pub cell_regions: BTreeMap<(u32, u32), Region>,
    pub template_id: String,
    /// Reserved for seeded style variation; plain rendering leaves it 0 and
    /// perturbations stamp their own seed here.
    pub seed: u64,
    pub clipped_cells: Vec<(u32, u32)>,
}

/// Per-cell geometry entry in the serialized sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub row: u32,
    pub col: u32,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

/// Geometry sidecar persisted next to each rendered image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySidecar {
    pub width: u32,
    pub height: u32,
    pub template_id: String,
    pub seed: u64,
    pub header_region: Region,
    pub cell_regions: Vec<CellGeometry>,
    pub clipped_cells: Vec<(u32, u32)>,
}

fn solid_canvas(width: u32, height: u32, color: [u8; 3]) -> Vec<u8> {
    let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
    for _ in 0..width as usize * height as usize {
        pixels.extend_from_slice(&color);
    }
    pixels
}

impl RenderedImage {
    pub fn geometry(&self) -> GeometrySidecar {
        let cell_regions = self
            .cell_regions
            .iter()
            .map(|(&(row, col), r)| CellGeometry { row, col, x: r.x, y: r.y, w: r.w, h: r.h })
            .collect();
        GeometrySidecar {
            width: self.width,
            height: self.height,
            template_id: self.template_id.clone(),
            seed: self.seed,
            header_region: self.header_region,
            cell_regions,
            clipped_cells: self.clipped_cells.clone(),
        }
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        PngEncoder::new(&mut buf)
            .write_image(&self.pixels, self.width, self.height, image::ExtendedColorType::Rgb8)
            .map_err(|e| Error::Internal(format!("png encoding failed: {e}")))?;
        Ok(buf)
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let idx = ((y as usize * self.width as usize) + x as usize) * 3;
        [self.pixels[idx], self.pixels[idx + 1], self.pixels[idx + 2]]
    }

    pub fn fill_rect(&mut self, region: Region, color: [u8; 3]) {
        let x1 = region.x.min(self.width);
        let y1 = region.y.min(self.height);
        let x2 = (region.x + region.w).min(self.width);
        let y2 = (region.y + region.h).min(self.height);
        for y in y1..y2 {
            for x in x1..x2 {
                let idx = ((y as usize * self.width as usize) + x as usize) * 3;
                self.pixels[idx..idx + 3].copy_from_slice(&color);
            }
        }
    }
}

struct Layout {
    scale: u32,
    advance: u32,
    glyph_h: u32,
    col_widths: Vec<u32>,
    row_height: u32,
    line: u32,
    width: u32,
    height: u32,
}

fn text_width(text: &str, advance: u32) -> u32 {
    text.chars().count() as u32 * advance
}

fn compute_layout(grid: &TableGrid, style: &StyleTemplate) -> Result<Layout> {
    let scale = (style.font_size / font::GLYPH_H).max(1);
    let extra = glyph_extra_advance(&style.font_family)
        .ok_or_else(|| Error::Config(format!("unknown font family '{}'", style.font_family)))?;
    let advance = (font::GLYPH_W + extra) * scale;
    let glyph_h = font::GLYPH_H * scale;
    let pad = style.cell_padding;
    let row_height = style.row_height.max(glyph_h + 2 * pad);
    let line = if style.grid_visible { style.border_thickness } else { 0 };

    let col_widths: Vec<u32> = match style.column_width_mode {
        ColumnWidthMode::Fixed(px) => vec![px; grid.columns().len()],
        ColumnWidthMode::Auto => grid
            .columns()
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let mut w = text_width(name, advance);
                for row in grid.rows() {
                    w = w.max(text_width(&row[c].display_text(), advance));
                }
                w + 2 * pad
            })
            .collect(),
    };

    let n_rows = 1 + grid.rows().len() as u64;
    let width: u64 =
        line as u64 + col_widths.iter().map(|&w| w as u64 + line as u64).sum::<u64>();
    let height: u64 = line as u64 + n_rows * (row_height as u64 + line as u64);
    if width > MAX_RENDER_SIDE as u64 || height > MAX_RENDER_SIDE as u64 {
        return Err(Error::Config(format!(
            "rendered image would be {width}x{height}, above the {MAX_RENDER_SIDE} px limit"
        )));
    }

    Ok(Layout {
        scale,
        advance,
        glyph_h,
        col_widths,
        row_height,
        line,
        width: width as u32,
        height: height as u32,
    })
}

fn draw_glyph(img: &mut RenderedImage, x: u32, y: u32, c: char, scale: u32, color: [u8; 3]) {
    let glyph = font::glyph(c);
    for (gy, row_bits) in glyph.iter().enumerate() {
        for gx in 0..8u32 {
            if row_bits & (0x80 >> gx) != 0 {
                img.fill_rect(
                    Region::new(x + gx * scale, y + gy as u32 * scale, scale, scale),
                    color,
                );
            }
        }
    }
}

/// Draws `text` left-aligned in `cell`, honoring padding and clipping
/// overflow with a trailing ellipsis. Returns true when the text was clipped.
fn draw_cell_text(
    img: &mut RenderedImage,
    cell: Region,
    text: &str,
    layout: &Layout,
    pad: u32,
    bold: bool,
) -> bool {
    let avail = cell.w.saturating_sub(2 * pad);
    let full = text_width(text, layout.advance);
    let chars: Vec<char> = text.chars().collect();
    let (drawn, clipped): (Vec<char>, bool) = if full <= avail {
        (chars, false)
    } else {
        let keep = (avail / layout.advance).saturating_sub(1) as usize;
        let mut kept: Vec<char> = chars.into_iter().take(keep).collect();
        if avail >= layout.advance {
            kept.push(ELLIPSIS);
        }
        (kept, true)
    };
    let y = cell.y + (cell.h.saturating_sub(layout.glyph_h)) / 2;
    let mut x = cell.x + pad;
    for c in drawn {
        draw_glyph(img, x, y, c, layout.scale, BLACK);
        if bold {
            draw_glyph(img, x + 1, y, c, layout.scale, BLACK);
        }
        x += layout.advance;
    }
    clipped
}

/// Renders `grid` with `style` into an RGB raster.
///
/// Layout is pure integer arithmetic over the bundled bitmap font, so output
/// bytes are identical across runs and platforms. The image is tightly
/// cropped: the outer border (or outermost cells when the grid is invisible)
/// touches the image edge on all four sides.
pub fn render(grid: &TableGrid, style: &StyleTemplate) -> Result<RenderedImage> {
    style.validate()?;
    let layout = compute_layout(grid, style)?;
    let line = layout.line;
    let pad = style.cell_padding;
    let n_cols = layout.col_widths.len();
    let n_body = grid.rows().len();

    let mut img = RenderedImage {
        width: layout.width,
        height: layout.height,
        pixels: solid_canvas(layout.width, layout.height, WHITE),
        header_region: Region::new(line, line, layout.width - 2 * line, layout.row_height),
        cell_regions: BTreeMap::new(),
        template_id: style.template_id.clone(),
        seed: 0,
        clipped_cells: Vec::new(),
    };

    let col_x: Vec<u32> = {
        let mut xs = Vec::with_capacity(n_cols);
        let mut x = line;
        for &w in &layout.col_widths {
            xs.push(x);
            x += w + line;
        }
        xs
    };
    let row_y = |r: u32| line + r * (layout.row_height + line);

    for r in 0..n_body as u32 {
        for c in 0..n_cols as u32 {
            img.cell_regions.insert(
                (r, c),
                Region::new(
                    col_x[c as usize],
                    row_y(r + 1),
                    layout.col_widths[c as usize],
                    layout.row_height,
                ),
            );
        }
    }

    if style.zebra {
        for r in 0..n_body as u32 {
            if r % 2 == 1 {
                img.fill_rect(
                    Region::new(line, row_y(r + 1), layout.width - 2 * line, layout.row_height),
                    ZEBRA_FILL,
                );
            }
        }
    }
    if style.header_emphasis == HeaderEmphasis::Fill {
        img.fill_rect(img.header_region, HEADER_FILL);
    }

    if line > 0 {
        for r in 0..=(n_body as u32 + 1) {
            let y = r * (layout.row_height + line);
            img.fill_rect(Region::new(0, y, layout.width, line), BLACK);
        }
        let mut x = 0;
        for &w in &layout.col_widths {
            img.fill_rect(Region::new(x, 0, line, layout.height), BLACK);
            x += line + w;
        }
        img.fill_rect(Region::new(x, 0, line, layout.height), BLACK);
    }
    if style.header_emphasis == HeaderEmphasis::Underline {
        let thickness = (2 * layout.scale).min(img.header_region.h);
        img.fill_rect(
            Region::new(
                img.header_region.x,
                img.header_region.y + img.header_region.h - thickness,
                img.header_region.w,
                thickness,
            ),
            BLACK,
        );
    }

    for (c, (&x, &w)) in col_x.iter().zip(&layout.col_widths).enumerate() {
        let cell = Region::new(x, row_y(0), w, layout.row_height);
        let name = grid.columns()[c].clone();
        if draw_cell_text(&mut img, cell, &name, &layout, pad, style.header_bold) {
            img.clipped_cells.push((0, c as u32));
        }
    }
    for r in 0..n_body {
        for c in 0..n_cols {
            let cell = img.cell_regions[&(r as u32, c as u32)];
            let text = grid.rows()[r][c].display_text();
            if draw_cell_text(&mut img, cell, &text, &layout, pad, false) {
                img.clipped_cells.push((1 + r as u32, c as u32));
            }
        }
    }

    Ok(img)
}

/// Standardizes a rendered image for model input: nearest-neighbor resize so
/// the long side equals `target_long_side`, then symmetric white padding to a
/// square canvas. Geometry is rescaled through the same mapping.
pub fn preprocess(img: &RenderedImage, target_long_side: u32) -> Result<RenderedImage> {
    if target_long_side == 0 {
        return Err(Error::Config("target long side must be strictly positive".into()));
    }
    let (w, h) = (img.width as u64, img.height as u64);
    let target = target_long_side as u64;
    let long = w.max(h);
    let out_w = (((w * target) + long / 2) / long).max(1) as u32;
    let out_h = (((h * target) + long / 2) / long).max(1) as u32;
    let pad_x = (target_long_side - out_w) / 2;
    let pad_y = (target_long_side - out_h) / 2;

    let side = target_long_side as usize;
    let mut pixels = solid_canvas(target_long_side, target_long_side, WHITE);
    for oy in 0..out_h {
        let sy = (oy as u64 * h / out_h as u64) as u32;
        for ox in 0..out_w {
            let sx = (ox as u64 * w / out_w as u64) as u32;
            let src = img.pixel(sx, sy);
            let idx = ((pad_y + oy) as usize * side + (pad_x + ox) as usize) * 3;
            pixels[idx..idx + 3].copy_from_slice(&src);
        }
    }

    let map_x = |v: u32| pad_x + (v as u64 * out_w as u64 / w) as u32;
    let map_y = |v: u32| pad_y + (v as u64 * out_h as u64 / h) as u32;
    let map_region = |r: &Region| {
        let x1 = map_x(r.x);
        let y1 = map_y(r.y);
        Region::new(x1, y1, map_x(r.x + r.w) - x1, map_y(r.y + r.h) - y1)
    };

    Ok(RenderedImage {
        width: target_long_side,
        height: target_long_side,
        pixels,
        header_region: map_region(&img.header_region),
        cell_regions: img
            .cell_regions
            .iter()
            .map(|(&k, r)| (k, map_region(r)))
            .collect(),
        template_id: img.template_id.clone(),
        seed: img.seed,
        clipped_cells: img.clipped_cells.clone(),
    })
}

fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Emits a standalone HTML document mirroring the rendered table: same
/// content, and a stylesheet that reflects the template's borders, padding,
/// striping, and header treatment. Cell text is entity-escaped.
pub fn export_html(grid: &TableGrid, style: &StyleTemplate) -> Result<String> {
    style.validate()?;
    let mut css = String::new();
    let border = if style.grid_visible {
        format!("{}px solid #000", style.border_thickness)
    } else {
        "none".into()
    };
    let spacing = if style.font_family == "gridfont-wide" { 2 } else { 0 };
    css.push_str(&format!(
        "table {{ border-collapse: collapse; font-family: \"{}\", monospace; font-size: {}px; letter-spacing: {}px; }}\n",
        escape_html(&style.font_family),
        style.font_size,
        spacing
    ));
    css.push_str(&format!(
        "th, td {{ border: {}; padding: {}px; text-align: left; }}\n",
        border, style.cell_padding
    ));
    css.push_str(&format!("tr {{ height: {}px; }}\n", style.row_height));
    css.push_str(&format!(
        "th {{ font-weight: {}; }}\n",
        if style.header_bold { "bold" } else { "normal" }
    ));
    if let ColumnWidthMode::Fixed(px) = style.column_width_mode {
        css.push_str(&format!(
            "table {{ table-layout: fixed; }}\nth, td {{ width: {px}px; overflow: hidden; text-overflow: ellipsis; white-space: nowrap; }}\n"
        ));
    }
    if style.zebra {
        css.push_str("tbody tr:nth-child(even) { background: #ebebeb; }\n");
    }
    match style.header_emphasis {
        HeaderEmphasis::None => {}
        HeaderEmphasis::Fill => css.push_str("th { background: #d7d7d7; }\n"),
        HeaderEmphasis::Underline => {
            css.push_str("th { border-bottom: 4px solid #000; }\n");
        }
    }

    let mut body = String::new();
    body.push_str("<table>\n<thead>\n<tr>");
    for name in grid.columns() {
        body.push_str(&format!("<th>{}</th>", escape_html(name)));
    }
    body.push_str("</tr>\n</thead>\n<tbody>\n");
    for row in grid.rows() {
        body.push_str("<tr>");
        for cell in row {
            body.push_str(&format!("<td>{}</td>", escape_html(&cell.display_text())));
        }
        body.push_str("</tr>\n");
    }
    body.push_str("</tbody>\n</table>");

    Ok(format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>\n{}</style>\n</head>\n<body>\n{}\n</body>\n</html>\n",
        escape_html(grid.name()),
        css,
        body
    ))
}
