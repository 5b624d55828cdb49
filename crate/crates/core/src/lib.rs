//! Region-controlled data construction for real-world ultra-low-dose CT
//! denoising.
//!
//! The crate builds two kinds of synthetic images from paired ultra-low-dose
//! (uLDCT) and normal-dose (NDCT) slices:
//!
//! * training inputs, where the anatomy comes from the NDCT with simulated
//!   sinogram-domain noise and the background comes from the real uLDCT;
//! * evaluation labels, where everything comes from the NDCT except the lung
//!   parenchyma, which comes from a weakly denoised uLDCT.
//!
//! Both constructions are driven by a three-way [`RegionMask`] produced by
//! [`segmentation::segment`] and merged with [`segmentation::common_mask`].
//! Synthetic phantoms ([`phantom`]) make every stage checkable without
//! clinical data.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod purification;
pub mod raster;
pub mod rng;
pub mod segmentation;
pub mod tomography;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use manifest::{PairEntry, PairManifest, Split, SplitFractions};
pub use raster::{BinaryMask, Image, Label, RegionMask};
pub use tomography::{NoiseModel, ProjectionGeometry, RampFilter, Sinogram};
