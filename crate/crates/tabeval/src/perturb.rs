//! Seeded visual perturbations.
//!
//! Every perturbation draws its randomness from a per-example generator
//! derived from the global seed and the example id, so datasets rebuild
//! identically regardless of iteration order or worker count.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::render::{RenderedImage, StylePool, StyleTemplate};

/// Upper bound on `ratio_cap`: masks never cover more than a third of the
/// header.
pub const MAX_RATIO_CAP: f64 = 1.0 / 3.0;

/// Default number of mask spans drawn per example, before clamping to what
/// fits in the sampled total width.
pub const DEFAULT_MAX_SPANS: u32 = 3;

/// One perturbation applied uniformly to a dataset split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PerturbationSpec {
    /// Re-render each table with a different template drawn from the pool.
    StyleShift { pool_id: String },
    /// Occlude part of the header row with opaque rectangles.
    HeaderMask { ratio_cap: f64, max_spans: u32 },
    /// Drop the image channel entirely.
    NoImage,
    /// Pair each example with another example's image via a derangement.
    WrongTable,
}

impl PerturbationSpec {
    pub fn header_mask_default() -> Self {
        PerturbationSpec::HeaderMask { ratio_cap: MAX_RATIO_CAP, max_spans: DEFAULT_MAX_SPANS }
    }

    /// Stable lowercase tag used in file names and report rows.
    pub fn tag(&self) -> &'static str {
        match self {
            PerturbationSpec::StyleShift { .. } => "styleshift",
            PerturbationSpec::HeaderMask { .. } => "headermask",
            PerturbationSpec::NoImage => "noimage",
            PerturbationSpec::WrongTable => "wrongtable",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PerturbationSpec::StyleShift { pool_id } => {
                if pool_id.is_empty() {
                    return Err(Error::Config("style shift needs a non-empty pool_id".into()));
                }
            }
            PerturbationSpec::HeaderMask { ratio_cap, max_spans } => {
                if !(*ratio_cap > 0.0 && *ratio_cap <= MAX_RATIO_CAP) {
                    return Err(Error::Config(format!(
                        "header mask ratio_cap must lie in (0, 1/3], got {ratio_cap}"
                    )));
                }
                if *max_spans == 0 {
                    return Err(Error::Config("header mask max_spans must be at least 1".into()));
                }
            }
            PerturbationSpec::NoImage | PerturbationSpec::WrongTable => {}
        }
        Ok(())
    }
}

/// Deterministic per-example generator: the global seed and the example id
/// are hashed together, so each example gets an independent stream and the
/// whole dataset is reproducible from one integer.
pub fn example_rng(global_seed: u64, example_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    hasher.update(example_id.as_bytes());
    let seed: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(seed)
}

/// Picks a replacement template uniformly from `pool`, excluding the one the
/// example was originally rendered with.
pub fn style_shift<'p, R: Rng>(
    original_template_id: &str,
    pool: &'p StylePool,
    rng: &mut R,
) -> Result<&'p StyleTemplate> {
    let candidates: Vec<&StyleTemplate> = pool
        .templates()
        .iter()
        .filter(|t| t.template_id != original_template_id)
        .collect();
    if candidates.is_empty() {
        return Err(Error::Config(format!(
            "style pool '{}' has no template other than '{}' to shift to",
            pool.pool_id(),
            original_template_id
        )));
    }
    let idx = rng.random_range(0..candidates.len());
    Ok(candidates[idx])
}

/// Record of one header-mask application, persisted next to the perturbed
/// image. Span coordinates are absolute image pixels; `sampled_ratio` is the
/// realized fraction of the header width that the spans cover, so the span
/// widths always sum to exactly `sampled_ratio * header_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub example_id: String,
    pub spans: Vec<(u32, u32)>,
    pub sampled_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

/// Occludes 1..=`max_spans` disjoint rectangles of the header row, with the
/// covered width drawn as a fraction in `(0, ratio_cap]` of the header width
/// and then clamped so the cap is never exceeded after rounding. Body pixels
/// are untouched. Headers narrower than 3 px are left unchanged and the
/// record carries a warning instead of spans.
pub fn header_mask<R: Rng>(
    img: &mut RenderedImage,
    example_id: &str,
    ratio_cap: f64,
    max_spans: u32,
    rng: &mut R,
) -> Result<MaskRecord> {
    PerturbationSpec::HeaderMask { ratio_cap, max_spans }.validate()?;
    let header = img.header_region;
    if header.w < 3 {
        return Ok(MaskRecord {
            example_id: example_id.to_string(),
            spans: Vec::new(),
            sampled_ratio: 0.0,
            warning: Some(format!("header is only {} px wide, mask skipped", header.w)),
        });
    }

    let w = header.w;
    let r = (1.0 - rng.random::<f64>()) * ratio_cap;
    let hard_cap = (ratio_cap * w as f64).floor() as u32;
    let total = ((r * w as f64).round() as u32).min(hard_cap);
    let spans = sample_spans(w, total, max_spans, rng);

    let mut placed = Vec::with_capacity(spans.len());
    for (offset, width) in spans {
        let x = header.x + offset;
        img.fill_rect(crate::render::Region::new(x, header.y, width, header.h), [0, 0, 0]);
        placed.push((x, width));
    }
    Ok(MaskRecord {
        example_id: example_id.to_string(),
        spans: placed,
        sampled_ratio: total as f64 / w as f64,
        warning: None,
    })
}

/// Splits `total` covered pixels into disjoint spans inside a row of `width`
/// pixels, keeping at least a 1 px gap between spans. Returns `(offset,
/// width)` pairs relative to the row start, in ascending order.
fn sample_spans<R: Rng>(
    width: u32,
    total: u32,
    max_spans: u32,
    rng: &mut R,
) -> Vec<(u32, u32)> {
    if total == 0 {
        return Vec::new();
    }
    let mut k = rng.random_range(1..=max_spans).min(total);
    while k > 1 && total + (k - 1) > width {
        k -= 1;
    }

    let mut widths = Vec::with_capacity(k as usize);
    if k == 1 {
        widths.push(total);
    } else {
        let mut cuts = std::collections::BTreeSet::new();
        while cuts.len() < (k - 1) as usize {
            cuts.insert(rng.random_range(1..total));
        }
        let mut prev = 0;
        for cut in cuts {
            widths.push(cut - prev);
            prev = cut;
        }
        widths.push(total - prev);
    }

    let slack = width - total - (k - 1);
    let mut offsets: Vec<u32> = (0..k).map(|_| rng.random_range(0..=slack)).collect();
    offsets.sort_unstable();

    let mut spans = Vec::with_capacity(k as usize);
    let mut x = offsets[0];
    for (i, &w) in widths.iter().enumerate() {
        spans.push((x, w));
        if i + 1 < widths.len() {
            x += w + 1 + (offsets[i + 1] - offsets[i]);
        }
    }
    spans
}

/// Samples a derangement of `0..n`: a uniform permutation with no fixed
/// points, so no example keeps its own image. Needs at least two elements.
pub fn derangement<R: Rng>(n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::Config(format!(
            "wrong-table pairing needs at least 2 examples, got {n}"
        )));
    }
    for _ in 0..100_000 {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
    Err(Error::Internal("derangement sampling failed to converge".into()))
}

/// Drops the image channel. Applying it twice is the same as applying it
/// once.
pub fn no_image(image_file: &mut Option<String>) {
    *image_file = None;
}

/// Accuracy drop attributable to a perturbation: clean accuracy minus
/// perturbed accuracy. Negative values are legitimate (a perturbation can
/// help) and are returned as-is.
pub fn delta_p(clean_exacc: f64, perturbed_exacc: f64) -> Result<f64> {
    for (name, v) in [("clean", clean_exacc), ("perturbed", perturbed_exacc)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!(
                "{name} accuracy must lie in [0, 1], got {v}"
            )));
        }
    }
    Ok(clean_exacc - perturbed_exacc)
}
