//! File formats.
//!
//! The canonical lossless format is a raw little-endian `f32` payload
//! (`<name>.f32`) next to a JSON sidecar (`<name>.json`) carrying the
//! dimensions, the declared intensity range and free-form metadata. Region
//! masks use a raw `u8` payload (`<name>.u8`) with label codes
//! `0 = background`, `1 = body`, `2 = lung`. Sinograms share the `f32`
//! payload layout with a sinogram-specific sidecar. 16-bit grayscale PNG is
//! supported for interchange.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Image, Label, RegionMask};
use crate::tomography::Sinogram;

/// How raw file intensities are mapped onto `[0, 1]` when loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalize {
    /// Min-max over the intensity range declared by the file: the sidecar's
    /// `intensity_min`/`intensity_max`, or the full integer range of a PNG.
    #[default]
    Declared,
    /// Min-max over the values actually present in the file.
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaveOptions {
    pub overwrite: bool,
}

impl Default for SaveOptions {
    fn default() -> Self {
        SaveOptions { overwrite: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SidecarKind {
    Image,
    Mask,
    Sinogram,
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageSidecar {
    kind: SidecarKind,
    width: usize,
    height: usize,
    intensity_min: f64,
    intensity_max: f64,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskSidecar {
    kind: SidecarKind,
    width: usize,
    height: usize,
    labels: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SinogramSidecar {
    kind: SidecarKind,
    num_angles: usize,
    num_bins: usize,
    angle_range: [f64; 2],
    bin_spacing: f64,
    pixel_length: f64,
    angles: Vec<f64>,
}

#[derive(Deserialize)]
struct KindOnly {
    kind: SidecarKind,
}

/// Sidecar path for a payload file: same stem, `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Reads only the `kind` field of the sidecar next to `path`.
pub fn sidecar_kind(path: &Path) -> Result<SidecarKind> {
    let side = sidecar_path(path);
    let bytes = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let k: KindOnly =
        serde_json::from_slice(&bytes).map_err(|e| Error::format(&side, e.to_string()))?;
    Ok(k.kind)
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn read_sidecar<T: for<'de> Deserialize<'de>>(path: &Path, expected: SidecarKind) -> Result<T> {
    let side = sidecar_path(path);
    let bytes = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let kind: KindOnly =
        serde_json::from_slice(&bytes).map_err(|e| Error::format(&side, e.to_string()))?;
    if kind.kind != expected {
        return Err(Error::format(
            &side,
            format!("sidecar describes a {:?}, expected {expected:?}", kind.kind),
        ));
    }
    serde_json::from_slice(&bytes).map_err(|e| Error::format(&side, e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8], opts: SaveOptions) -> Result<()> {
    if !opts.overwrite && path.exists() {
        return Err(Error::PathExists(path.to_path_buf()));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_sidecar<T: Serialize>(path: &Path, sidecar: &T, opts: SaveOptions) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(sidecar).expect("sidecar serializes");
    bytes.push(b'\n');
    write_file(&sidecar_path(path), &bytes, opts)
}

fn f32_payload(values: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    bytes
}

fn read_f32_payload(path: &Path, expected_len: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected_len * 4 {
        return Err(Error::DimensionMismatch(format!(
            "{}: {} bytes on disk, sidecar declares {expected_len} float32 samples",
            path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(path, "payload contains non-finite values"));
    }
    Ok(values)
}

fn normalize(
    raw: Vec<f64>,
    declared: (f64, f64),
    policy: Normalize,
    path: &Path,
) -> Result<(Vec<f64>, (f64, f64))> {
    let (lo, hi) = match policy {
        Normalize::Declared => declared,
        Normalize::Observed => raw
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            }),
    };
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::format(
            path,
            format!("invalid intensity range [{lo}, {hi}]"),
        ));
    }
    let span = hi - lo;
    let data = if span == 0.0 {
        vec![0.0; raw.len()]
    } else {
        raw.into_iter()
            .map(|v| ((v - lo) / span).clamp(0.0, 1.0))
            .collect()
    };
    Ok((data, (lo, hi)))
}

/// Loads an image and maps its intensities onto `[0, 1]`.
///
/// Supported inputs are `.f32` payloads with a JSON sidecar and 8- or
/// 16-bit single-channel PNG files. The returned image's metadata carries
/// the sidecar metadata plus `source`, `raw_min` and `raw_max`.
pub fn load_image(path: &Path, policy: Normalize) -> Result<Image> {
    let (width, height, raw, declared, mut meta) = match extension(path).as_str() {
        "f32" => {
            let side: ImageSidecar = read_sidecar(path, SidecarKind::Image)?;
            let raw = read_f32_payload(path, side.width * side.height)?;
            (
                side.width,
                side.height,
                raw,
                (side.intensity_min, side.intensity_max),
                side.meta,
            )
        }
        "png" => {
            let (w, h, raw, max) = read_png_gray(path)?;
            (w, h, raw, (0.0, max), BTreeMap::new())
        }
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: extension '{other}' (expected .f32 or .png)",
                path.display()
            )))
        }
    };
    let (data, (lo, hi)) = normalize(raw, declared, policy, path)?;
    meta.insert("source".into(), path.display().to_string());
    meta.insert("raw_min".into(), lo.to_string());
    meta.insert("raw_max".into(), hi.to_string());
    let mut img = Image::new(width, height, data)?;
    *img.meta_mut() = meta;
    Ok(img)
}

pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    save_image_with(img, path, SaveOptions::default())
}

/// Writes `img` as `.f32` + sidecar, or as a 16-bit PNG when the extension
/// is `.png`. The `.f32` path is lossless for `f32`-representable samples.
pub fn save_image_with(img: &Image, path: &Path, opts: SaveOptions) -> Result<()> {
    match extension(path).as_str() {
        "f32" => {
            write_file(path, &f32_payload(img.data()), opts)?;
            let side = ImageSidecar {
                kind: SidecarKind::Image,
                width: img.width(),
                height: img.height(),
                intensity_min: 0.0,
                intensity_max: 1.0,
                meta: img.meta().clone(),
            };
            write_sidecar(path, &side, opts)
        }
        "png" => write_png_gray16(img, path, opts),
        other => Err(Error::UnsupportedFormat(format!(
            "{}: extension '{other}' (expected .f32 or .png)",
            path.display()
        ))),
    }
}

fn read_png_gray(path: &Path) -> Result<(usize, usize, Vec<f64>, f64)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let info = reader.info();
    let (w, h) = (info.width as usize, info.height as usize);
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::UnsupportedFormat(format!(
            "{}: only single-channel grayscale PNG is supported",
            path.display()
        )));
    }
    let depth = info.bit_depth;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(path, e.to_string()))?;
    match depth {
        png::BitDepth::Sixteen => {
            let raw = buf[..w * h * 2]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                .collect();
            Ok((w, h, raw, u16::MAX as f64))
        }
        png::BitDepth::Eight => {
            let raw = buf[..w * h].iter().map(|&b| b as f64).collect();
            Ok((w, h, raw, u8::MAX as f64))
        }
        other => Err(Error::UnsupportedFormat(format!(
            "{}: PNG bit depth {other:?}",
            path.display()
        ))),
    }
}

fn write_png_gray16(img: &Image, path: &Path, opts: SaveOptions) -> Result<()> {
    if !opts.overwrite && path.exists() {
        return Err(Error::PathExists(path.to_path_buf()));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(
        BufWriter::new(file),
        img.width() as u32,
        img.height() as u32,
    );
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let mut writer = enc
        .write_header()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut bytes = Vec::with_capacity(img.len() * 2);
    for &v in img.data() {
        let q = (v.clamp(0.0, 1.0) * u16::MAX as f64).round() as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .finish()
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_mask(mask: &RegionMask, path: &Path) -> Result<()> {
    save_mask_with(mask, path, SaveOptions::default())
}

pub fn save_mask_with(mask: &RegionMask, path: &Path, opts: SaveOptions) -> Result<()> {
    write_file(path, &mask.codes(), opts)?;
    let side = MaskSidecar {
        kind: SidecarKind::Mask,
        width: mask.width(),
        height: mask.height(),
        labels: Label::ALL
            .iter()
            .map(|l| (l.code().to_string(), l.name().to_string()))
            .collect(),
    };
    write_sidecar(path, &side, opts)
}

pub fn load_mask(path: &Path) -> Result<RegionMask> {
    let side: MaskSidecar = read_sidecar(path, SidecarKind::Mask)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != side.width * side.height {
        return Err(Error::DimensionMismatch(format!(
            "{}: {} label bytes, sidecar declares {}x{}",
            path.display(),
            bytes.len(),
            side.width,
            side.height
        )));
    }
    RegionMask::from_codes(side.width, side.height, &bytes)
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_sinogram(sino: &Sinogram, path: &Path) -> Result<()> {
    write_file(path, &f32_payload(sino.data()), SaveOptions::default())?;
    let side = SinogramSidecar {
        kind: SidecarKind::Sinogram,
        num_angles: sino.num_angles(),
        num_bins: sino.num_bins(),
        angle_range: [0.0, std::f64::consts::PI],
        bin_spacing: sino.bin_spacing(),
        pixel_length: sino.pixel_length(),
        angles: sino.angles().to_vec(),
    };
    write_sidecar(path, &side, SaveOptions::default())
}

pub fn load_sinogram(path: &Path) -> Result<Sinogram> {
    let side: SinogramSidecar = read_sidecar(path, SidecarKind::Sinogram)?;
    if side.angles.len() != side.num_angles {
        return Err(Error::format(
            sidecar_path(path),
            "angle list length differs from num_angles",
        ));
    }
    let data = read_f32_payload(path, side.num_angles * side.num_bins)?;
    Sinogram::new(
        side.angles,
        side.num_bins,
        side.bin_spacing,
        side.pixel_length,
        data,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn write_png16(path: &Path, w: u32, h: u32, value: u16) {
        let file = fs::File::create(path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut wr = enc.write_header().unwrap();
        let bytes: Vec<u8> = (0..w * h).flat_map(|_| value.to_be_bytes()).collect();
        wr.write_image_data(&bytes).unwrap();
    }

    #[test]
    fn png16_extremes_map_to_unit_bounds() {
        let dir = tmp();
        let zero = dir.path().join("zero.png");
        let full = dir.path().join("full.png");
        write_png16(&zero, 8, 5, 0);
        write_png16(&full, 8, 5, u16::MAX);
        let a = load_image(&zero, Normalize::Declared).unwrap();
        let b = load_image(&full, Normalize::Declared).unwrap();
        assert_eq!((a.width(), a.height()), (8, 5));
        assert!(a.data().iter().all(|&v| v == 0.0));
        assert!(b.data().iter().all(|&v| v == 1.0));
        assert_eq!(b.meta()["raw_max"], "65535");
    }

    #[test]
    fn f32_round_trip_is_bit_exact_over_random_images() {
        let dir = tmp();
        let mut rng = seeded(11);
        for i in 0..100 {
            let w = rng.random_range(1..40);
            let h = rng.random_range(1..40);
            let img = Image::from_fn(w, h, |_, _| rng.random::<f32>() as f64);
            let path = dir.path().join(format!("img{i}.f32"));
            save_image(&img, &path).unwrap();
            let back = load_image(&path, Normalize::Declared).unwrap();
            assert_eq!((back.width(), back.height()), (w, h));
            for (a, b) in img.data().iter().zip(back.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn png16_round_trip_preserves_quantized_values() {
        let dir = tmp();
        let mut rng = seeded(12);
        let img = Image::from_fn(17, 9, |_, _| {
            rng.random_range(0..=u16::MAX) as f64 / 65535.0
        });
        let path = dir.path().join("x.png");
        save_image(&img, &path).unwrap();
        let back = load_image(&path, Normalize::Declared).unwrap();
        assert_eq!(back.data(), img.data());
    }

    #[test]
    fn sidecar_echoes_dimensions_and_meta() {
        let dir = tmp();
        let path = dir.path().join("stage.f32");
        let img = Image::filled(256, 256, 0.25).with_meta("stage", "ipv2_uldct");
        save_image(&img, &path).unwrap();
        let side: serde_json::Value =
            serde_json::from_slice(&fs::read(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(side["width"], 256);
        assert_eq!(side["height"], 256);
        assert_eq!(side["kind"], "image");
        let back = load_image(&path, Normalize::Declared).unwrap();
        assert_eq!(back.meta()["stage"], "ipv2_uldct");
        assert_eq!(back.meta()["source"], path.display().to_string());
    }

    #[test]
    fn overwrite_protection() {
        let dir = tmp();
        let path = dir.path().join("a.f32");
        let img = Image::filled(2, 2, 0.5);
        let opts = SaveOptions { overwrite: false };
        save_image_with(&img, &path, opts).unwrap();
        assert!(matches!(
            save_image_with(&img, &path, opts),
            Err(Error::PathExists(_))
        ));
        save_image(&img, &path).unwrap();
    }

    #[test]
    fn payload_size_must_match_sidecar() {
        let dir = tmp();
        let path = dir.path().join("bad.f32");
        save_image(&Image::filled(4, 4, 0.5), &path).unwrap();
        fs::write(&path, [0u8; 12]).unwrap();
        assert!(matches!(
            load_image(&path, Normalize::Declared),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn unsupported_and_missing_files() {
        let dir = tmp();
        assert!(matches!(
            load_image(&dir.path().join("x.tiff"), Normalize::Declared),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            load_image(&dir.path().join("nope.f32"), Normalize::Declared),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn declared_range_is_applied_and_clamped() {
        let dir = tmp();
        let path = dir.path().join("hu.f32");
        fs::write(&path, f32_payload(&[-1000.0, 0.0, 1000.0, 3000.0])).unwrap();
        let side = ImageSidecar {
            kind: SidecarKind::Image,
            width: 2,
            height: 2,
            intensity_min: -1000.0,
            intensity_max: 1000.0,
            meta: BTreeMap::new(),
        };
        write_sidecar(&path, &side, SaveOptions::default()).unwrap();
        let img = load_image(&path, Normalize::Declared).unwrap();
        assert_eq!(img.data(), &[0.0, 0.5, 1.0, 1.0]);
        let obs = load_image(&path, Normalize::Observed).unwrap();
        assert_eq!(obs.data(), &[0.0, 0.25, 0.5, 1.0]);
        assert_eq!(obs.meta()["raw_min"], "-1000");
    }

    #[test]
    fn mask_round_trip_and_bad_codes() {
        let dir = tmp();
        let path = dir.path().join("m.u8");
        let mask = RegionMask::from_fn(5, 3, |x, y| Label::ALL[(x + y) % 3]);
        save_mask(&mask, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);
        assert_eq!(sidecar_kind(&path).unwrap(), SidecarKind::Mask);
        fs::write(&path, [7u8; 15]).unwrap();
        assert!(load_mask(&path).is_err());
    }

    #[test]
    fn sinogram_round_trip() {
        let dir = tmp();
        let path = dir.path().join("s.f32");
        let angles = vec![0.0, 1.0, 2.0];
        let data: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let sino = Sinogram::new(angles, 4, 1.0, 1.0 / 64.0, data).unwrap();
        save_sinogram(&sino, &path).unwrap();
        let back = load_sinogram(&path).unwrap();
        assert_eq!(back, sino);
        assert!(load_image(&path, Normalize::Declared).is_err());
    }
}
