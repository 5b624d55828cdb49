use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{iradon, radon, ProjectionGeometry, RampFilter, Sinogram};
use crate::error::{Error, Result};
use crate::raster::Image;
use crate::rng::seeded;

/// Photon-counting noise model for a reduced-dose acquisition.
///
/// A detector bin with line integral `p` receives on average
/// `dose_fraction * incident_photons_n0 * exp(-mu_scale * p * pixel_length)`
/// photons. The recorded count is that expectation resampled as Poisson
/// plus zero-mean Gaussian electronic noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Dose relative to the normal-dose acquisition, in `(0, 1]`.
    pub dose_fraction: f64,
    /// Expected unattenuated photon count per bin at full dose.
    pub incident_photons_n0: f64,
    /// Standard deviation of the electronic noise, in photons.
    pub electronic_sigma: f64,
    /// Attenuation per unit image side length for unit intensity.
    pub mu_scale: f64,
    /// Set per call; never read from configuration files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            dose_fraction: 0.02,
            incident_photons_n0: 1e6,
            electronic_sigma: 5.0,
            mu_scale: 4.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn with_seed(&self, seed: u64) -> Self {
        NoiseModel {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dose_fraction > 0.0 && self.dose_fraction <= 1.0) {
            return Err(Error::NoiseModel(format!(
                "dose fraction must be in (0, 1], got {}",
                self.dose_fraction
            )));
        }
        if !(self.incident_photons_n0.is_finite() && self.incident_photons_n0 > 0.0) {
            return Err(Error::NoiseModel(format!(
                "incident photon count must be positive, got {}",
                self.incident_photons_n0
            )));
        }
        if !(self.electronic_sigma.is_finite() && self.electronic_sigma >= 0.0) {
            return Err(Error::NoiseModel(format!(
                "electronic sigma must be non-negative, got {}",
                self.electronic_sigma
            )));
        }
        if !(self.mu_scale.is_finite() && self.mu_scale > 0.0) {
            return Err(Error::NoiseModel(format!(
                "attenuation scale must be positive, got {}",
                self.mu_scale
            )));
        }
        Ok(())
    }

    /// Expected photons per bin at this dose before attenuation.
    pub fn blank_scan(&self) -> f64 {
        self.dose_fraction * self.incident_photons_n0
    }
}

/// Resamples every line integral of `sino` through the photon-counting
/// model and returns the log-transformed noisy sinogram.
///
/// Counts are clamped to at least one photon before the log. Samples are
/// drawn in storage order from a stream seeded by `model.seed`.
pub fn inject_noise(sino: &Sinogram, model: &NoiseModel) -> Result<Sinogram> {
    model.validate()?;
    if let Some(v) = sino.data().iter().find(|&&v| v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative line integral {v} in sinogram"
        )));
    }
    let blank = model.blank_scan();
    let attenuation = model.mu_scale * sino.pixel_length();
    let electronic = if model.electronic_sigma > 0.0 {
        Some(Normal::new(0.0, model.electronic_sigma).expect("validated sigma"))
    } else {
        None
    };
    let mut rng = seeded(model.seed);

    let noisy = sino
        .data()
        .iter()
        .map(|&p| {
            let expected = blank * (-attenuation * p).exp();
            let mut count = if expected > 0.0 {
                Poisson::new(expected)
                    .map_err(|e| Error::NoiseModel(format!("photon count {expected}: {e}")))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            if let Some(g) = &electronic {
                count += g.sample(&mut rng);
            }
            let count = count.max(1.0);
            Ok(-(count / blank).ln() / attenuation)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sino.with_data(noisy))
}

/// Simulates a reduced-dose acquisition of `ndct`: forward projection,
/// sinogram noise, Ram-Lak filtered back-projection. The result has the
/// dimensions of `ndct` and lies in `[0, 1]`.
pub fn simulate_uldct(
    ndct: &Image,
    model: &NoiseModel,
    geom: &ProjectionGeometry,
) -> Result<Image> {
    model.validate()?;
    let sino = radon(ndct, geom)?;
    let noisy = inject_noise(&sino, model)?;
    let size = ndct.width().max(ndct.height());
    let rec = iradon(&noisy, geom, RampFilter::RamLak, size)?;
    let (w, h) = (ndct.width(), ndct.height());
    let (ox, oy) = ((size - w) / 2, (size - h) / 2);
    let mut out = Image::from_fn(w, h, |x, y| rec.get(x + ox, y + oy));
    *out.meta_mut() = ndct.meta().clone();
    Ok(out
        .with_meta("stage", "simulated_uldct")
        .with_meta("noise_seed", model.seed.to_string())
        .with_meta("dose_fraction", model.dose_fraction.to_string()))
}
