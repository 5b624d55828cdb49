use std::path::Path;
use std::process::Command;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{self, Normalize};
use crate::raster::Image;

/// Denoiser applied to uLDCT images during label construction. Only its
/// output inside the lung region reaches the label.
pub trait WeakDenoiser: Send + Sync {
    /// Must return an image of the input's dimensions with samples in
    /// `[0, 1]`, deterministically for fixed parameters.
    fn denoise(&self, img: &Image) -> Result<Image>;

    /// Name and parameters, recorded in output metadata.
    fn descriptor(&self) -> String;
}

/// Normalized Gaussian taps for offsets `-radius..=radius`, truncated at
/// three standard deviations.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Gaussian sigma must be positive, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / sum).collect())
}

/// Half-sample symmetric reflection of `i` into `0..n`.
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Separable Gaussian smoothing with reflective boundaries.
#[derive(Debug, Clone)]
pub struct GaussianDenoiser {
    sigma: f64,
    kernel: Vec<f64>,
}

pub fn gaussian_baseline_denoiser(sigma: f64) -> Result<GaussianDenoiser> {
    Ok(GaussianDenoiser {
        sigma,
        kernel: gaussian_kernel(sigma)?,
    })
}

impl GaussianDenoiser {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Convolution without the final clamp.
    pub fn smooth(&self, img: &Image) -> Image {
        let (w, h) = (img.width(), img.height());
        let radius = (self.kernel.len() / 2) as isize;
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = self
                    .kernel
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * img.get(reflect(x as isize + k as isize - radius, w), y))
                    .sum();
            }
        }
        Image::from_fn(w, h, |x, y| {
            self.kernel
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect(y as isize + k as isize - radius, h) * w + x])
                .sum()
        })
    }
}

impl WeakDenoiser for GaussianDenoiser {
    fn denoise(&self, img: &Image) -> Result<Image> {
        let mut out = self.smooth(img).clamped();
        *out.meta_mut() = img.meta().clone();
        Ok(out)
    }

    fn descriptor(&self) -> String {
        format!("gaussian(sigma={})", self.sigma)
    }
}

/// Edge-preserving smoothing: each output pixel is a weighted mean of its
/// neighbours, weighted by spatial distance and by intensity difference.
///
/// Intensity steps much larger than `range_sigma` (lung against tissue or
/// vessel) are left sharp while noise within a region is averaged out.
#[derive(Debug, Clone)]
pub struct BilateralDenoiser {
    spatial_sigma: f64,
    range_sigma: f64,
    spatial: Vec<f64>,
}

pub fn bilateral_denoiser(spatial_sigma: f64, range_sigma: f64) -> Result<BilateralDenoiser> {
    if !(range_sigma.is_finite() && range_sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bilateral range sigma must be positive, got {range_sigma}"
        )));
    }
    // The 2-D spatial weight is the outer product of the 1-D taps.
    let taps = gaussian_kernel(spatial_sigma)?;
    let spatial = taps
        .iter()
        .flat_map(|a| taps.iter().map(move |b| a * b))
        .collect();
    Ok(BilateralDenoiser {
        spatial_sigma,
        range_sigma,
        spatial,
    })
}

impl BilateralDenoiser {
    pub fn spatial_sigma(&self) -> f64 {
        self.spatial_sigma
    }

    pub fn range_sigma(&self) -> f64 {
        self.range_sigma
    }

    /// Filtering without the final clamp. Pixels outside the image are
    /// skipped and the weights renormalized.
    pub fn smooth(&self, img: &Image) -> Image {
        let (w, h) = (img.width(), img.height());
        let side = (self.spatial.len() as f64).sqrt() as usize;
        let radius = (side / 2) as isize;
        let inv = -0.5 / (self.range_sigma * self.range_sigma);
        let data = img.data();
        let out: Vec<f64> = (0..h)
            .into_par_iter()
            .flat_map_iter(|y| {
                (0..w).map(move |x| {
                    let centre = data[y * w + x];
                    let (mut num, mut den) = (0.0, 0.0);
                    for dy in -radius..=radius {
                        let yy = y as isize + dy;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        let row = &self.spatial[(dy + radius) as usize * side..][..side];
                        for dx in -radius..=radius {
                            let xx = x as isize + dx;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let v = data[yy as usize * w + xx as usize];
                            let d = v - centre;
                            let weight = row[(dx + radius) as usize] * (inv * d * d).exp();
                            num += weight * v;
                            den += weight;
                        }
                    }
                    num / den
                })
            })
            .collect();
        Image::new(w, h, out).expect("filtered values are finite")
    }
}

impl WeakDenoiser for BilateralDenoiser {
    fn denoise(&self, img: &Image) -> Result<Image> {
        let mut out = self.smooth(img).clamped();
        *out.meta_mut() = img.meta().clone();
        Ok(out)
    }

    fn descriptor(&self) -> String {
        format!(
            "bilateral(spatial_sigma={},range_sigma={})",
            self.spatial_sigma, self.range_sigma
        )
    }
}

/// Runs an external program as `<program> <args...> <in-path> <out-path>`.
///
/// The input is written as `.f32` + sidecar. The program must exit with
/// status 0 and leave a `.f32` payload of the same dimensions at
/// `out-path`; a sidecar next to it is honored when present.
#[derive(Debug, Clone)]
pub struct ExternalDenoiser {
    program: String,
    args: Vec<String>,
}

impl ExternalDenoiser {
    pub fn new(command: &[String]) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Denoiser("empty external command".into()))?;
        Ok(ExternalDenoiser {
            program: program.clone(),
            args: args.to_vec(),
        })
    }

    fn read_output(&self, path: &Path, like: &Image) -> Result<Image> {
        if io::sidecar_path(path).is_file() {
            let img = io::load_image(path, Normalize::Declared)?;
            img.check_dims(like.width(), like.height(), "external denoiser output")?;
            return Ok(img);
        }
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() != like.len() * 4 {
            return Err(Error::Denoiser(format!(
                "output has {} bytes, expected {} for {}x{}",
                bytes.len(),
                like.len() * 4,
                like.width(),
                like.height()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Image::new(like.width(), like.height(), data)
            .map_err(|e| Error::Denoiser(format!("output: {e}")))
    }
}

impl WeakDenoiser for ExternalDenoiser {
    fn denoise(&self, img: &Image) -> Result<Image> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let input = dir.path().join("input.f32");
        let output = dir.path().join("output.f32");
        io::save_image(img, &input)?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(&input)
            .arg(&output)
            .status()
            .map_err(|e| Error::Denoiser(format!("cannot run '{}': {e}", self.program)))?;
        if !status.success() {
            return Err(Error::Denoiser(format!(
                "'{}' exited with {status}",
                self.program
            )));
        }
        let mut out = self.read_output(&output, img)?.clamped();
        *out.meta_mut() = img.meta().clone();
        Ok(out)
    }

    fn descriptor(&self) -> String {
        let mut parts = vec![self.program.clone()];
        parts.extend(self.args.iter().cloned());
        format!("external({})", parts.join(" "))
    }
}
