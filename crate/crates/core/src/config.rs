//! Pipeline configuration: one TOML file with full defaults.
//!
//! Seed precedence, highest first: command-line flag, config file,
//! `CTPURIFY_SEED`, built-in default. Other fields are taken from the file
//! or the default, with command-line flags applied on top.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::SplitFractions;
use crate::purification::{
    bilateral_denoiser, gaussian_baseline_denoiser, ExternalDenoiser, WeakDenoiser,
};
use crate::segmentation::SegmentationParams;
use crate::tomography::{NoiseModel, ProjectionGeometry};

pub const SEED_ENV: &str = "CTPURIFY_SEED";

/// Weak denoiser used for evaluation labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DenoiserSpec {
    Gaussian {
        sigma: f64,
    },
    Bilateral {
        spatial_sigma: f64,
        range_sigma: f64,
    },
    /// Invoked as `command... <in-path> <out-path>`.
    External {
        command: Vec<String>,
    },
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        DenoiserSpec::Bilateral {
            spatial_sigma: 2.0,
            range_sigma: 0.1,
        }
    }
}

impl DenoiserSpec {
    pub fn build(&self) -> Result<Box<dyn WeakDenoiser>> {
        Ok(match self {
            DenoiserSpec::Gaussian { sigma } => Box::new(gaussian_baseline_denoiser(*sigma)?),
            DenoiserSpec::Bilateral {
                spatial_sigma,
                range_sigma,
            } => Box::new(bilateral_denoiser(*spatial_sigma, *range_sigma)?),
            DenoiserSpec::External { command } => Box::new(ExternalDenoiser::new(command)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Pair `k` of a manifest uses seed `base_seed ^ k`; unsplit manifests
    /// are shuffled with `base_seed`.
    pub base_seed: u64,
    /// Abort on the first failing pair instead of recording it.
    pub strict: bool,
    /// Non-strict runs fail when more than this many pairs fail.
    pub max_failures: usize,
    /// Grid size for the report's histogram distances.
    pub histogram_bins: usize,
    /// Also write (simulated uLDCT, NDCT) pairs for training a weak
    /// denoiser.
    pub emit_weak_denoiser_data: bool,
    pub geometry: ProjectionGeometry,
    pub noise: NoiseModel,
    pub segmentation: SegmentationParams,
    pub denoiser: DenoiserSpec,
    pub split: SplitFractions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            base_seed: 0,
            strict: false,
            max_failures: 0,
            histogram_bins: 128,
            emit_weak_denoiser_data: false,
            geometry: ProjectionGeometry::default(),
            noise: NoiseModel::default(),
            segmentation: SegmentationParams::default(),
            denoiser: DenoiserSpec::default(),
            split: SplitFractions::default(),
        }
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub strict: bool,
}

fn parse_seed(text: &str, what: &str) -> Result<u64> {
    text.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{what}: '{text}' is not an unsigned 64-bit seed")))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.noise.validate()?;
        self.segmentation.validate()?;
        self.split.validate()?;
        if self.histogram_bins < 2 {
            return Err(Error::Config(format!(
                "histogram_bins must be at least 2, got {}",
                self.histogram_bins
            )));
        }
        if let DenoiserSpec::External { command } = &self.denoiser {
            if command.is_empty() {
                return Err(Error::Config("external denoiser command is empty".into()));
            }
        }
        self.denoiser.build().map(|_| ())
    }

    /// Parses TOML text. Returns the config and whether it set `base_seed`.
    pub fn from_toml(text: &str) -> Result<(Self, bool)> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let has_seed = table.contains_key("base_seed");
        let cfg: PipelineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok((cfg, has_seed))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (cfg, _) = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds the effective configuration from an optional file, command-line
    /// overrides and the value of [`SEED_ENV`].
    pub fn resolve(
        path: Option<&Path>,
        overrides: &Overrides,
        env_seed: Option<&str>,
    ) -> Result<Self> {
        let (mut cfg, file_seed) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::from_toml(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => (Self::default(), false),
        };
        if let Some(seed) = overrides.seed {
            cfg.base_seed = seed;
        } else if !file_seed {
            if let Some(text) = env_seed {
                cfg.base_seed = parse_seed(text, SEED_ENV)?;
            }
        }
        cfg.strict |= overrides.strict;
        cfg.validate()?;
        Ok(cfg)
    }

    /// [`PipelineConfig::resolve`] reading the seed variable from the
    /// process environment.
    pub fn resolve_env(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let env = std::env::var(SEED_ENV).ok();
        Self::resolve(path, overrides, env.as_deref())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Noise model seeded for pair `index`.
    pub fn noise_for(&self, index: usize) -> NoiseModel {
        self.noise
            .with_seed(crate::rng::pair_seed(self.base_seed, index))
    }
}
