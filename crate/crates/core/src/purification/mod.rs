//! Training-pair and label construction by mask-guided fusion.
//!
//! Both constructions pick every output pixel from exactly one source image
//! according to the common mask; values are copied bit for bit.

mod denoise;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Normalize};
use crate::manifest::{PairManifest, Split};
use crate::raster::{Image, Label, RegionMask};
use crate::rng::pair_seed;
use crate::tomography::{simulate_uldct, NoiseModel, ProjectionGeometry};

pub use denoise::{
    bilateral_denoiser, gaussian_baseline_denoiser, gaussian_kernel, BilateralDenoiser,
    ExternalDenoiser, GaussianDenoiser, WeakDenoiser,
};

/// Image a fused pixel was copied from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Uldct,
    Ndct,
    NoisedNdct,
    DenoisedUldct,
}

/// Source image for each region label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSources {
    pub background: Source,
    pub body: Source,
    pub lung: Source,
}

impl RegionSources {
    pub fn source(&self, label: Label) -> Source {
        match label {
            Label::Background => self.background,
            Label::Body => self.body,
            Label::Lung => self.lung,
        }
    }
}

/// Copies each pixel from the image assigned to its label.
pub fn fuse(mask: &RegionMask, background: &Image, body: &Image, lung: &Image) -> Result<Image> {
    let (w, h) = (mask.width(), mask.height());
    background.check_dims(w, h, "background source")?;
    body.check_dims(w, h, "body source")?;
    lung.check_dims(w, h, "lung source")?;
    let data = mask
        .labels()
        .iter()
        .enumerate()
        .map(|(i, label)| match label {
            Label::Background => background.data()[i],
            Label::Body => body.data()[i],
            Label::Lung => lung.data()[i],
        })
        .collect();
    Image::new(w, h, data)
}

/// Switches for the two training-side modules, for ablations. Both on is
/// the full construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingModules {
    /// Background pixels come from the uLDCT instead of the NDCT.
    pub remove_background: bool,
    /// Body and lung pixels come from the noise-simulated NDCT instead of
    /// the clean NDCT.
    pub add_noise: bool,
}

impl Default for TrainingModules {
    fn default() -> Self {
        TrainingModules {
            remove_background: true,
            add_noise: true,
        }
    }
}

impl TrainingModules {
    pub fn sources(&self) -> RegionSources {
        let anatomy = if self.add_noise {
            Source::NoisedNdct
        } else {
            Source::Ndct
        };
        RegionSources {
            background: if self.remove_background {
                Source::Uldct
            } else {
                Source::Ndct
            },
            body: anatomy,
            lung: anatomy,
        }
    }
}

/// Switches for the two label-side modules, for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelModules {
    /// Background pixels come from the NDCT instead of the uLDCT.
    pub remove_background: bool,
    /// Lung pixels come from the weakly denoised uLDCT instead of the raw
    /// uLDCT.
    pub remove_noise: bool,
}

impl Default for LabelModules {
    fn default() -> Self {
        LabelModules {
            remove_background: true,
            remove_noise: true,
        }
    }
}

impl LabelModules {
    pub fn sources(&self) -> RegionSources {
        RegionSources {
            background: if self.remove_background {
                Source::Ndct
            } else {
                Source::Uldct
            },
            body: Source::Ndct,
            lung: if self.remove_noise {
                Source::DenoisedUldct
            } else {
                Source::Uldct
            },
        }
    }
}

/// Training input (`input`) aligned with the NDCT (`target`).
#[derive(Debug, Clone)]
pub struct PurifiedPair {
    pub input: Image,
    pub target: Image,
    pub mask: RegionMask,
    pub provenance: RegionSources,
}

/// Evaluation label.
#[derive(Debug, Clone)]
pub struct LabelImage {
    pub label: Image,
    pub mask: RegionMask,
    pub provenance: RegionSources,
}

fn check_pair(uldct: &Image, ndct: &Image, mask: &RegionMask) -> Result<()> {
    ndct.check_dims(uldct.width(), uldct.height(), "NDCT")?;
    mask.check_dims(uldct.width(), uldct.height(), "mask")
}

/// Training input: uLDCT pixels in the background, noise-simulated NDCT
/// pixels in body and lung.
pub fn build_training_pair(
    uldct: &Image,
    ndct: &Image,
    mask: &RegionMask,
    model: &NoiseModel,
    geom: &ProjectionGeometry,
) -> Result<PurifiedPair> {
    build_training_pair_with(uldct, ndct, mask, model, geom, TrainingModules::default())
}

pub fn build_training_pair_with(
    uldct: &Image,
    ndct: &Image,
    mask: &RegionMask,
    model: &NoiseModel,
    geom: &ProjectionGeometry,
    modules: TrainingModules,
) -> Result<PurifiedPair> {
    check_pair(uldct, ndct, mask)?;
    let provenance = modules.sources();
    let noised = if modules.add_noise {
        Some(simulate_uldct(ndct, model, geom)?)
    } else {
        None
    };
    let pick = |s: Source| -> &Image {
        match s {
            Source::Uldct => uldct,
            Source::NoisedNdct => noised.as_ref().expect("noise simulated"),
            _ => ndct,
        }
    };
    let mut input = fuse(
        mask,
        pick(provenance.background),
        pick(provenance.body),
        pick(provenance.lung),
    )?;
    input = input.with_meta("stage", "ipv2_uldct");
    if modules.add_noise {
        input = input.with_meta("noise_seed", model.seed.to_string());
    }
    Ok(PurifiedPair {
        input,
        target: ndct.clone(),
        mask: mask.clone(),
        provenance,
    })
}

/// Evaluation label: NDCT pixels in background and body, weakly denoised
/// uLDCT pixels in the lung.
pub fn build_label(
    uldct: &Image,
    ndct: &Image,
    mask: &RegionMask,
    wd: &dyn WeakDenoiser,
) -> Result<LabelImage> {
    build_label_with(uldct, ndct, mask, wd, LabelModules::default())
}

pub fn build_label_with(
    uldct: &Image,
    ndct: &Image,
    mask: &RegionMask,
    wd: &dyn WeakDenoiser,
    modules: LabelModules,
) -> Result<LabelImage> {
    check_pair(uldct, ndct, mask)?;
    let provenance = modules.sources();
    let denoised = if modules.remove_noise {
        let d = wd.denoise(uldct)?;
        d.check_dims(uldct.width(), uldct.height(), "weak denoiser output")?;
        Some(d)
    } else {
        None
    };
    let pick = |s: Source| -> &Image {
        match s {
            Source::Uldct => uldct,
            Source::DenoisedUldct => denoised.as_ref().expect("denoiser applied"),
            _ => ndct,
        }
    };
    let mut label = fuse(
        mask,
        pick(provenance.background),
        pick(provenance.body),
        pick(provenance.lung),
    )?
    .with_meta("stage", "ipv2_ndct");
    if modules.remove_noise {
        label = label.with_meta("weak_denoiser", wd.descriptor());
    }
    Ok(LabelImage {
        label,
        mask: mask.clone(),
        provenance,
    })
}

/// One emitted (simulated uLDCT, NDCT) training example for an external
/// weak denoiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPair {
    pub pair_id: String,
    pub index: usize,
    pub seed: u64,
    pub simulated_path: PathBuf,
    pub ndct_path: PathBuf,
}

/// Writes `(simulate_uldct(ndct), ndct)` for every training pair to
/// `out_dir/<pair_id>/{simulated,ndct}.f32`.
///
/// Pair `k` of the manifest is simulated with seed `model.seed ^ k`.
pub fn train_weak_denoiser_data(
    manifest: &PairManifest,
    model: &NoiseModel,
    geom: &ProjectionGeometry,
    out_dir: &Path,
) -> Result<Vec<SimulatedPair>> {
    let train: Vec<_> = manifest.entries_in(Split::Train).collect();
    if train.is_empty() {
        return Err(Error::Manifest("training split is empty".into()));
    }
    model.validate()?;
    geom.validate()?;
    train
        .into_par_iter()
        .map(|(index, entry)| {
            let seed = pair_seed(model.seed, index);
            let wrap = |e: Error| Error::Pair {
                pair_id: entry.pair_id.clone(),
                source: Box::new(e),
            };
            let ndct = io::load_image(&entry.ndct_path, Normalize::Declared).map_err(wrap)?;
            let simulated = simulate_uldct(&ndct, &model.with_seed(seed), geom).map_err(wrap)?;
            let dir = out_dir.join(&entry.pair_id);
            std::fs::create_dir_all(&dir).map_err(|e| wrap(Error::io(&dir, e)))?;
            let simulated_path = dir.join("simulated.f32");
            let ndct_path = dir.join("ndct.f32");
            io::save_image(&simulated, &simulated_path).map_err(wrap)?;
            io::save_image(&ndct, &ndct_path).map_err(wrap)?;
            Ok(SimulatedPair {
                pair_id: entry.pair_id.clone(),
                index,
                seed,
                simulated_path,
                ndct_path,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = seeded(seed);
        Image::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    fn random_mask(w: usize, h: usize, seed: u64) -> RegionMask {
        let mut rng = seeded(seed);
        RegionMask::from_fn(w, h, |_, _| Label::ALL[rng.random_range(0..3)])
    }

    #[test]
    fn fuse_selects_by_label() {
        let mask = random_mask(16, 16, 1);
        let (a, b, c) = (
            random_image(16, 16, 2),
            random_image(16, 16, 3),
            random_image(16, 16, 4),
        );
        let out = fuse(&mask, &a, &b, &c).unwrap();
        for (i, l) in mask.labels().iter().enumerate() {
            let src = match l {
                Label::Background => &a,
                Label::Body => &b,
                Label::Lung => &c,
            };
            assert_eq!(out.data()[i].to_bits(), src.data()[i].to_bits());
        }
        assert!(fuse(&mask, &a, &b, &Image::filled(15, 16, 0.0)).is_err());
    }

    #[test]
    fn module_switches_map_to_sources() {
        let full = TrainingModules::default().sources();
        assert_eq!(full.background, Source::Uldct);
        assert_eq!(full.lung, Source::NoisedNdct);
        let none = TrainingModules {
            remove_background: false,
            add_noise: false,
        }
        .sources();
        assert_eq!(none.background, Source::Ndct);
        assert_eq!(none.body, Source::Ndct);

        let full = LabelModules::default().sources();
        assert_eq!(
            (full.background, full.body, full.lung),
            (Source::Ndct, Source::Ndct, Source::DenoisedUldct)
        );
        let none = LabelModules {
            remove_background: false,
            remove_noise: false,
        }
        .sources();
        assert_eq!(
            (none.background, none.body, none.lung),
            (Source::Uldct, Source::Ndct, Source::Uldct)
        );
    }

    #[test]
    fn degenerate_label_masks() {
        let u = random_image(12, 12, 5);
        let n = random_image(12, 12, 6);
        let wd = gaussian_baseline_denoiser(1.0).unwrap();
        let no_lung = random_mask(12, 12, 7);
        let no_lung = RegionMask::from_fn(12, 12, |x, y| match no_lung.get(x, y) {
            Label::Lung => Label::Body,
            l => l,
        });
        let l = build_label(&u, &n, &no_lung, &wd).unwrap();
        assert_eq!(l.label.data(), n.data());

        let all_lung = RegionMask::filled(12, 12, Label::Lung);
        let l = build_label(&u, &n, &all_lung, &wd).unwrap();
        assert_eq!(l.label.data(), wd.denoise(&u).unwrap().data());
        assert_eq!(l.label.meta()["stage"], "ipv2_ndct");
    }

    #[test]
    fn degenerate_training_masks() {
        let u = random_image(64, 64, 8);
        let n = random_image(64, 64, 9);
        let geom = ProjectionGeometry::with_angles(30);
        let model = NoiseModel::default().with_seed(3);
        let bg = RegionMask::filled(64, 64, Label::Background);
        let p = build_training_pair(&u, &n, &bg, &model, &geom).unwrap();
        assert_eq!(p.input.data(), u.data());
        assert_eq!(p.target, n);

        let body = RegionMask::filled(64, 64, Label::Body);
        let p = build_training_pair(&u, &n, &body, &model, &geom).unwrap();
        assert_eq!(
            p.input.data(),
            simulate_uldct(&n, &model, &geom).unwrap().data()
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let u = Image::filled(8, 8, 0.1);
        let n = Image::filled(8, 9, 0.1);
        let m = RegionMask::filled(8, 8, Label::Body);
        let wd = gaussian_baseline_denoiser(1.0).unwrap();
        assert!(matches!(
            build_label(&u, &n, &m, &wd),
            Err(Error::DimensionMismatch(_))
        ));
        let geom = ProjectionGeometry::with_angles(4);
        assert!(build_training_pair(
            &u,
            &u,
            &RegionMask::filled(7, 8, Label::Body),
            &NoiseModel::default(),
            &geom
        )
        .is_err());
    }
}
