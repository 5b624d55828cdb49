//! Pixel-domain containers: intensity images, binary masks and three-way
//! region masks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 2-D scalar image.
///
/// Pipeline stage outputs hold normalized intensities in `[0, 1]`;
/// intermediate images (for example a linear combination fed to the Radon
/// transform) only need to be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
    meta: BTreeMap<String, String>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value {} at index {i}",
                data[i]
            )));
        }
        Ok(Image {
            width,
            height,
            data,
            meta: BTreeMap::new(),
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Image {
            width,
            height,
            data: vec![value; width * height],
            meta: BTreeMap::new(),
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image {
            width,
            height,
            data,
            meta: BTreeMap::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.meta
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn same_dims(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    pub(crate) fn check_dims(&self, width: usize, height: usize, what: &str) -> Result<()> {
        if self.same_dims(width, height) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what} is {}x{}, expected {width}x{height}",
                self.width, self.height
            )))
        }
    }

    /// Applies `f` to every sample, keeping dimensions and metadata.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn clamped(&self) -> Self {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Rounds every sample to the nearest `f32`, the precision of the
    /// on-disk raw format.
    pub fn quantized_f32(&self) -> Self {
        self.map(|v| v as f32 as f64)
    }

    /// True when every sample lies in `[0, 1]`.
    pub fn is_normalized(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Region label of a pixel. The on-disk codes are part of the file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Label {
    Background = 0,
    Body = 1,
    Lung = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Background, Label::Body, Label::Lung];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Label> {
        match code {
            0 => Some(Label::Background),
            1 => Some(Label::Body),
            2 => Some(Label::Lung),
            _ => None,
        }
    }

    /// Position in the combination order `Background < Lung < Body`.
    pub fn rank(self) -> u8 {
        match self {
            Label::Background => 0,
            Label::Lung => 1,
            Label::Body => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Background => "background",
            Label::Body => "body",
            Label::Lung => "lung",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-pixel two-valued mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} mask samples for {width}x{height}",
                bits.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn not(&self) -> Self {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub(crate) fn check_same(&self, other: &BinaryMask) -> Result<()> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "masks are {}x{} and {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

/// Three-way partition of an image into background, body and lung.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl RegionMask {
    pub fn new(width: usize, height: usize, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {width}x{height}",
                labels.len()
            )));
        }
        Ok(RegionMask {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: Label) -> Self {
        RegionMask {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Label) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        RegionMask {
            width,
            height,
            labels,
        }
    }

    pub fn from_codes(width: usize, height: usize, codes: &[u8]) -> Result<Self> {
        let labels = codes
            .iter()
            .map(|&c| {
                Label::from_code(c)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown label code {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        RegionMask::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn codes(&self) -> Vec<u8> {
        self.labels.iter().map(|l| l.code()).collect()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn indicator(&self, label: Label) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }

    /// Fraction of pixels carrying the same label in both masks.
    pub fn agreement(&self, other: &RegionMask) -> Result<f64> {
        self.check_dims(other.width, other.height, "mask")?;
        let same = self
            .labels
            .iter()
            .zip(&other.labels)
            .filter(|(a, b)| a == b)
            .count();
        Ok(same as f64 / self.labels.len() as f64)
    }

    pub(crate) fn check_dims(&self, width: usize, height: usize, what: &str) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what} is {}x{}, expected {width}x{height}",
                self.width, self.height
            )))
        }
    }
}
