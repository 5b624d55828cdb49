//! Region statistics and distribution distances for dataset QC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Image, Label, RegionMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub region: Label,
    pub pixel_count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

fn stats_of(region: Label, values: &[f64]) -> Option<RegionStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    // Welford update.
    let (mut mean, mut m2) = (0.0, 0.0);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
        min = min.min(v);
        max = max.max(v);
    }
    Some(RegionStats {
        region,
        pixel_count: values.len(),
        mean: mean.clamp(min, max),
        std: (m2 / n).max(0.0).sqrt(),
        min,
        max,
    })
}

/// Samples of `img` under `label`, in raster order.
pub fn region_values(img: &Image, mask: &RegionMask, label: Label) -> Result<Vec<f64>> {
    mask.check_dims(img.width(), img.height(), "mask")?;
    Ok(img
        .data()
        .iter()
        .zip(mask.labels())
        .filter(|(_, &l)| l == label)
        .map(|(&v, _)| v)
        .collect())
}

/// Moments of every non-empty region, in `Background, Body, Lung` order.
/// Empty regions are left out.
pub fn region_stats(img: &Image, mask: &RegionMask) -> Result<Vec<RegionStats>> {
    Label::ALL
        .iter()
        .map(|&label| Ok(stats_of(label, &region_values(img, mask, label)?)))
        .filter_map(|r| r.transpose())
        .collect()
}

pub fn stats_for(img: &Image, mask: &RegionMask, label: Label) -> Result<Option<RegionStats>> {
    Ok(stats_of(label, &region_values(img, mask, label)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistDistance {
    pub bins: usize,
    pub distance: f64,
}

fn cdf(values: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = vec![0u64; bins];
    let last = (bins - 1) as f64;
    for &v in values {
        let b = (v.clamp(0.0, 1.0) * last).round() as usize;
        counts[b] += 1;
    }
    let n = values.len() as f64;
    let mut acc = 0u64;
    counts
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / n
        })
        .collect()
}

/// 1-D Wasserstein distance between the intensity distributions of two
/// sample sets, each quantized onto `bins` evenly spaced levels spanning
/// `[0, 1]`.
///
/// The value is the mean absolute CDF difference over the `bins - 1`
/// gaps of the grid, so two point masses at 0 and 1 are at distance 1.
pub fn wasserstein_1d(a: &[f64], b: &[f64], bins: usize) -> Result<HistDistance> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "distance histogram needs at least 2 bins, got {bins}"
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "Wasserstein distance of an empty region".into(),
        ));
    }
    let (fa, fb) = (cdf(a, bins), cdf(b, bins));
    let sum: f64 = fa[..bins - 1]
        .iter()
        .zip(&fb[..bins - 1])
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(HistDistance {
        bins,
        distance: sum / (bins - 1) as f64,
    })
}

/// [`wasserstein_1d`] between the `label` regions of two images.
pub fn region_wasserstein(
    a: &Image,
    mask_a: &RegionMask,
    b: &Image,
    mask_b: &RegionMask,
    label: Label,
    bins: usize,
) -> Result<HistDistance> {
    wasserstein_1d(
        &region_values(a, mask_a, label)?,
        &region_values(b, mask_b, label)?,
        bins,
    )
}

/// Root-mean-square difference over the pixels where `select` is true.
pub fn rmse_where(a: &Image, b: &Image, select: &[bool]) -> Result<f64> {
    b.check_dims(a.width(), a.height(), "second image")?;
    if select.len() != a.len() {
        return Err(Error::DimensionMismatch(format!(
            "selection has {} entries for {} pixels",
            select.len(),
            a.len()
        )));
    }
    let (sum, count) = a
        .data()
        .iter()
        .zip(b.data())
        .zip(select)
        .filter(|(_, &s)| s)
        .fold((0.0, 0usize), |(s, n), ((x, y), _)| {
            (s + (x - y) * (x - y), n + 1)
        });
    if count == 0 {
        return Err(Error::InvalidArgument("RMSE over an empty region".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// Root-mean-square difference over the whole image, or over one region of
/// `region.0` when given.
pub fn rmse(a: &Image, b: &Image, region: Option<(&RegionMask, Label)>) -> Result<f64> {
    match region {
        None => rmse_where(a, b, &vec![true; a.len()]),
        Some((mask, label)) => {
            mask.check_dims(a.width(), a.height(), "mask")?;
            let select: Vec<bool> = mask.labels().iter().map(|&l| l == label).collect();
            rmse_where(a, b, &select)
        }
    }
}

/// Pixels of a `size` square image inside the inscribed reconstruction
/// circle.
pub fn reconstruction_circle(size: usize) -> Vec<bool> {
    let c = (size as f64 - 1.0) / 2.0;
    let r2 = (size as f64 / 2.0).powi(2);
    (0..size * size)
        .map(|i| {
            let (x, y) = ((i % size) as f64 - c, (i / size) as f64 - c);
            x * x + y * y <= r2
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split_mask(w: usize, h: usize) -> RegionMask {
        RegionMask::from_fn(
            w,
            h,
            |x, _| if x < w / 2 { Label::Body } else { Label::Lung },
        )
    }

    #[test]
    fn constant_image_has_zero_spread() {
        let img = Image::filled(6, 4, 0.5);
        let mask = RegionMask::from_fn(6, 4, |x, y| Label::ALL[(x + y) % 3]);
        for s in region_stats(&img, &mask).unwrap() {
            assert_eq!(s.mean, 0.5);
            assert_eq!(s.std, 0.0);
            assert!(s.min <= s.mean && s.mean <= s.max);
        }
    }

    #[test]
    fn two_region_means_are_exact() {
        let img = Image::from_fn(8, 8, |x, _| if x < 4 { 0.2 } else { 0.8 });
        let stats = region_stats(&img, &split_mask(8, 8)).unwrap();
        assert_eq!(stats.len(), 2, "background is empty and omitted");
        assert_eq!(stats[0].region, Label::Body);
        assert_eq!(stats[0].mean, 0.2);
        assert_eq!(stats[1].mean, 0.8);
        assert_eq!(stats[1].pixel_count, 32);
    }

    #[test]
    fn wasserstein_extremes() {
        let zeros = vec![0.0; 10];
        let ones = vec![1.0; 7];
        assert_eq!(wasserstein_1d(&zeros, &zeros, 128).unwrap().distance, 0.0);
        assert_eq!(wasserstein_1d(&zeros, &ones, 128).unwrap().distance, 1.0);
        assert_eq!(wasserstein_1d(&ones, &zeros, 2).unwrap().distance, 1.0);
        assert!(wasserstein_1d(&[], &ones, 128).is_err());
        assert!(wasserstein_1d(&zeros, &ones, 1).is_err());
    }

    #[test]
    fn wasserstein_of_shift_equals_shift() {
        let a: Vec<f64> = (0..50).map(|i| i as f64 / 127.0).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 10.0 / 127.0).collect();
        let d = wasserstein_1d(&a, &b, 128).unwrap().distance;
        assert!((d - 10.0 / 127.0).abs() < 1e-12);
    }

    #[test]
    fn rmse_basics() {
        let zeros = Image::filled(4, 4, 0.0);
        let ones = Image::filled(4, 4, 1.0);
        assert_eq!(rmse(&zeros, &zeros, None).unwrap(), 0.0);
        assert_eq!(rmse(&zeros, &ones, None).unwrap(), 1.0);
        let mask = RegionMask::filled(4, 4, Label::Body);
        assert!(rmse(&zeros, &ones, Some((&mask, Label::Lung))).is_err());
        assert!(rmse(&zeros, &Image::filled(3, 4, 0.0), None).is_err());
    }

    #[test]
    fn circle_is_symmetric() {
        let c = reconstruction_circle(16);
        assert!(!c[0] && c[8 * 16 + 8]);
        assert_eq!(c.iter().filter(|&&b| b).count() % 4, 0);
    }
}
