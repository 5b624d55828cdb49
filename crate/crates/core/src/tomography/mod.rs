//! Parallel-beam tomography: forward projection, filtered back-projection
//! and dose-calibrated Poisson-Gaussian noise in the sinogram domain.

mod noise;
mod projection;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use noise::{inject_noise, simulate_uldct, NoiseModel};
pub use projection::{backproject, iradon, pad_to_square, radon};

/// Parallel-beam acquisition geometry.
///
/// Angles are uniformly spaced over `[0, π)` unless `angles` overrides them.
/// Detector bins are centered on the rotation axis; when `num_bins` is
/// `None` the count is derived from the image size so that the detector
/// covers the image diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionGeometry {
    pub num_angles: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_bins: Option<usize>,
    /// Detector bin width in pixels.
    pub bin_spacing: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
}

impl Default for ProjectionGeometry {
    fn default() -> Self {
        ProjectionGeometry {
            num_angles: 360,
            num_bins: None,
            bin_spacing: 1.0,
            angles: None,
        }
    }
}

impl ProjectionGeometry {
    pub fn with_angles(num_angles: usize) -> Self {
        ProjectionGeometry {
            num_angles,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_angles == 0 {
            return Err(Error::Geometry("zero projection angles".into()));
        }
        if self.num_bins == Some(0) {
            return Err(Error::Geometry("zero detector bins".into()));
        }
        if !(self.bin_spacing.is_finite() && self.bin_spacing > 0.0) {
            return Err(Error::Geometry(format!(
                "bin spacing must be positive, got {}",
                self.bin_spacing
            )));
        }
        if let Some(angles) = &self.angles {
            if angles.len() != self.num_angles {
                return Err(Error::Geometry(format!(
                    "{} explicit angles for num_angles = {}",
                    angles.len(),
                    self.num_angles
                )));
            }
            let in_range = angles.iter().all(|a| (0.0..PI).contains(a));
            let increasing = angles.windows(2).all(|w| w[0] < w[1]);
            if !(in_range && increasing) {
                return Err(Error::Geometry(
                    "explicit angles must be strictly increasing in [0, π)".into(),
                ));
            }
        }
        Ok(())
    }

    /// Projection angles in radians.
    pub fn angles(&self) -> Vec<f64> {
        match &self.angles {
            Some(a) => a.clone(),
            None => (0..self.num_angles)
                .map(|i| i as f64 * PI / self.num_angles as f64)
                .collect(),
        }
    }

    /// Detector bin count for a square image of side `size`.
    pub fn bins_for(&self, size: usize) -> usize {
        self.num_bins.unwrap_or_else(|| {
            let diagonal = size as f64 * std::f64::consts::SQRT_2;
            (diagonal / self.bin_spacing).ceil() as usize
        })
    }
}

/// Angle-major array of line integrals.
///
/// Line integrals are measured in pixel lengths. `pixel_length` is the
/// physical length of one pixel in units where the (square) image side is
/// 1; the noise model uses it to convert line integrals into attenuation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    angles: Vec<f64>,
    num_bins: usize,
    bin_spacing: f64,
    pixel_length: f64,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn new(
        angles: Vec<f64>,
        num_bins: usize,
        bin_spacing: f64,
        pixel_length: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        if angles.is_empty() || num_bins == 0 {
            return Err(Error::Geometry(format!(
                "sinogram with {} angles and {num_bins} bins",
                angles.len()
            )));
        }
        if data.len() != angles.len() * num_bins {
            return Err(Error::DimensionMismatch(format!(
                "{} sinogram samples for {} angles x {num_bins} bins",
                data.len(),
                angles.len()
            )));
        }
        if !(pixel_length.is_finite() && pixel_length > 0.0)
            || !(bin_spacing.is_finite() && bin_spacing > 0.0)
        {
            return Err(Error::Geometry(
                "bin spacing and pixel length must be positive".into(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "sinogram contains non-finite values".into(),
            ));
        }
        Ok(Sinogram {
            angles,
            num_bins,
            bin_spacing,
            pixel_length,
            data,
        })
    }

    pub fn num_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn bin_spacing(&self) -> f64 {
        self.bin_spacing
    }

    pub fn pixel_length(&self) -> f64 {
        self.pixel_length
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, angle_index: usize) -> &[f64] {
        &self.data[angle_index * self.num_bins..(angle_index + 1) * self.num_bins]
    }

    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Sinogram {
            data,
            ..self.clone()
        }
    }
}

/// Projection filter applied before back-projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampFilter {
    /// Band-limited ramp (Ram-Lak).
    #[default]
    RamLak,
    /// Plain back-projection.
    None,
}

impl std::str::FromStr for RampFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ram-lak" | "ramlak" => Ok(RampFilter::RamLak),
            "none" => Ok(RampFilter::None),
            other => Err(Error::InvalidArgument(format!("unknown filter '{other}'"))),
        }
    }
}
