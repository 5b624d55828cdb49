//! Background / body / lung segmentation.
//!
//! The pipeline is: Otsu threshold, binarize, flood fill the background
//! from the four corners, then treat the enclosed holes of the body as
//! lung. Masks from the two images of a pair are merged with
//! [`common_mask`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Image, Label, RegionMask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuResult {
    /// Lower edge of the first foreground bin; pixels `>= threshold` are
    /// foreground.
    pub threshold: f64,
    /// `ω0 ω1 (μ0 − μ1)²` at the chosen split, intensities taken at bin
    /// centers.
    pub between_class_variance: f64,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    pub bins: usize,
    /// Enclosed holes smaller than this many pixels are treated as body.
    pub min_lung_area: usize,
    /// Floor applied to the Otsu threshold; intensities below it are never
    /// foreground.
    pub min_threshold: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            bins: 256,
            min_lung_area: 50,
            min_threshold: 0.1,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "histogram needs at least 2 bins, got {}",
                self.bins
            )));
        }
        if !(0.0..=1.0).contains(&self.min_threshold) {
            return Err(Error::InvalidArgument(format!(
                "threshold floor {} outside [0, 1]",
                self.min_threshold
            )));
        }
        Ok(())
    }
}

/// Histogram bin of `v` over `[0, 1]` split into `bins` equal bins.
///
/// Guarantees `histogram_bin(v) >= k` exactly when `v >= k / bins`, so the
/// Otsu split and [`binarize`] agree on every pixel.
pub fn histogram_bin(v: f64, bins: usize) -> usize {
    let edge = |k: usize| k as f64 / bins as f64;
    let mut b = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
    while b + 1 < bins && edge(b + 1) <= v {
        b += 1;
    }
    while b > 0 && edge(b) > v {
        b -= 1;
    }
    b
}

pub fn histogram(img: &Image, bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    for &v in img.data() {
        h[histogram_bin(v, bins)] += 1;
    }
    h
}

/// Otsu's threshold over a `bins`-bin histogram of `img`.
///
/// Class statistics are accumulated as exact integer counts and bin-index
/// sums; ties resolve to the lowest threshold.
pub fn otsu_threshold(img: &Image, bins: usize) -> Result<OtsuResult> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "histogram needs at least 2 bins, got {bins}"
        )));
    }
    let hist = histogram(img, bins);
    let total: u64 = hist.iter().sum();
    let total_sum: u128 = hist
        .iter()
        .enumerate()
        .map(|(b, &c)| b as u128 * c as u128)
        .sum();

    // Candidate k scores D² / (n0 n1) with D = n1 s0 - n0 s1.
    let mut best: Option<(usize, u128, u128)> = None;
    let (mut n0, mut s0) = (0u64, 0u128);
    for k in 1..bins {
        n0 += hist[k - 1];
        s0 += (k - 1) as u128 * hist[k - 1] as u128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = total_sum - s0;
        let d = (n1 as u128 * s0).abs_diff(n0 as u128 * s1);
        let (num, den) = (d * d, n0 as u128 * n1 as u128);
        if best.is_none_or(|(_, bn, bd)| exceeds(num, den, bn, bd)) {
            best = Some((k, num, den));
        }
    }

    let (k, num, den) = best.ok_or(Error::ConstantImage)?;
    let n = total as f64;
    Ok(OtsuResult {
        threshold: k as f64 / bins as f64,
        between_class_variance: num as f64 / den as f64 / (n * n * (bins * bins) as f64),
        histogram_bins: bins,
    })
}

/// `a / b > c / d`, exact unless the cross products overflow.
fn exceeds(a: u128, b: u128, c: u128, d: u128) -> bool {
    match (a.checked_mul(d), c.checked_mul(b)) {
        (Some(l), Some(r)) => l > r,
        _ => a as f64 / b as f64 > c as f64 / d as f64,
    }
}

/// Foreground where `pixel >= threshold`.
pub fn binarize(img: &Image, threshold: f64) -> BinaryMask {
    BinaryMask::from_fn(img.width(), img.height(), |x, y| img.get(x, y) >= threshold)
}

/// Flood fills the zero pixels 4-connected to the image corners and
/// returns the complement: the original foreground plus every enclosed
/// zero region.
pub fn flood_fill_background(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut background = vec![false; w * h];
    let mut stack: Vec<(usize, usize)> = [(0, 0), (w - 1, 0), (0, h - 1), (w - 1, h - 1)]
        .into_iter()
        .filter(|&(x, y)| !bits[y * w + x])
        .collect();

    let open = |bg: &[bool], x: usize, y: usize| !bits[y * w + x] && !bg[y * w + x];

    while let Some((x, y)) = stack.pop() {
        if !open(&background, x, y) {
            continue;
        }
        let mut left = x;
        while left > 0 && open(&background, left - 1, y) {
            left -= 1;
        }
        let mut right = x;
        while right + 1 < w && open(&background, right + 1, y) {
            right += 1;
        }
        for cell in &mut background[y * w + left..=y * w + right] {
            *cell = true;
        }
        for ny in [y.wrapping_sub(1), y + 1] {
            if ny >= h {
                continue;
            }
            let mut xi = left;
            while xi <= right {
                if open(&background, xi, ny) {
                    stack.push((xi, ny));
                    while xi <= right && open(&background, xi, ny) {
                        xi += 1;
                    }
                } else {
                    xi += 1;
                }
            }
        }
    }

    BinaryMask::new(w, h, background.into_iter().map(|b| !b).collect())
        .expect("dimensions preserved")
}

/// 4-connected components of the set pixels, as lists of linear indices in
/// raster order of their first pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Vec<usize>> {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut seen = vec![false; w * h];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if bits[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        components.push(comp);
    }
    components
}

/// Enclosed holes of the body: `filled_body AND NOT body_with_holes`, with
/// components smaller than `min_area` pixels dropped.
pub fn lung_region(
    body_with_holes: &BinaryMask,
    filled_body: &BinaryMask,
    min_area: usize,
) -> Result<BinaryMask> {
    body_with_holes.check_same(filled_body)?;
    let holes = BinaryMask::new(
        filled_body.width(),
        filled_body.height(),
        filled_body
            .bits()
            .iter()
            .zip(body_with_holes.bits())
            .map(|(&f, &b)| f && !b)
            .collect(),
    )?;
    let mut bits = vec![false; holes.bits().len()];
    for comp in connected_components(&holes) {
        if comp.len() >= min_area {
            for i in comp {
                bits[i] = true;
            }
        }
    }
    BinaryMask::new(holes.width(), holes.height(), bits)
}

/// Per-pixel maximum under `Background < Lung < Body`: background survives
/// only where both masks agree on it.
pub fn common_mask(uldct_mask: &RegionMask, ndct_mask: &RegionMask) -> Result<RegionMask> {
    ndct_mask.check_dims(uldct_mask.width(), uldct_mask.height(), "NDCT mask")?;
    let labels = uldct_mask
        .labels()
        .iter()
        .zip(ndct_mask.labels())
        .map(|(&a, &b)| if a.rank() >= b.rank() { a } else { b })
        .collect();
    RegionMask::new(uldct_mask.width(), uldct_mask.height(), labels)
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub mask: RegionMask,
    pub otsu: OtsuResult,
    /// Threshold actually applied, after the floor.
    pub threshold: f64,
}

pub fn segment(img: &Image, params: &SegmentationParams) -> Result<RegionMask> {
    segment_detailed(img, params).map(|s| s.mask)
}

pub fn segment_detailed(img: &Image, params: &SegmentationParams) -> Result<Segmentation> {
    params.validate()?;
    let otsu = otsu_threshold(img, params.bins)?;
    let threshold = otsu.threshold.max(params.min_threshold);
    let body = binarize(img, threshold);
    let filled = flood_fill_background(&body);
    let lung = lung_region(&body, &filled, params.min_lung_area)?;
    let mask = RegionMask::from_fn(img.width(), img.height(), |x, y| {
        if !filled.get(x, y) {
            Label::Background
        } else if lung.get(x, y) {
            Label::Lung
        } else {
            Label::Body
        }
    });
    Ok(Segmentation {
        mask,
        otsu,
        threshold,
    })
}
