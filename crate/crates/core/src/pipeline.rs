//! Batch orchestration over a pair manifest.
//!
//! Training pairs produce `train/<id>/{input,target}.f32` and `mask.u8`;
//! validation and test pairs produce `<split>/<id>/label.f32` and
//! `mask.u8`. One JSON line per manifest entry goes to `report.jsonl`, in
//! manifest order, and run totals go to `summary.json`. Pair `k` uses seed
//! `base_seed ^ k`, so output bytes do not depend on the thread count.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::{self, Normalize};
use crate::manifest::{PairEntry, PairManifest, Split};
use crate::metrics::{region_stats, region_wasserstein, stats_for, RegionStats};
use crate::purification::{
    build_label, build_training_pair, train_weak_denoiser_data, WeakDenoiser,
};
use crate::raster::{Image, Label, RegionMask};
use crate::rng::pair_seed;
use crate::segmentation::{common_mask, segment_detailed};

pub const REPORT_FILE: &str = "report.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const WEAK_DENOISER_DIR: &str = "weak_denoiser";

/// Masks of the two images disagreeing on more than this fraction of
/// pixels raise a warning.
const MASK_DISAGREEMENT_WARNING: f64 = 0.05;

/// Mixed into the base seed for weak-denoiser training data so its noise
/// is independent of the training inputs' noise.
const WEAK_DENOISER_SALT: u64 = 0x5744_5345_4544_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionCounts {
    pub background: usize,
    pub body: usize,
    pub lung: usize,
}

impl RegionCounts {
    pub fn of(mask: &RegionMask) -> Self {
        RegionCounts {
            background: mask.count(Label::Background),
            body: mask.count(Label::Body),
            lung: mask.count(Label::Lung),
        }
    }
}

/// Wasserstein distance between a region of an output image and the same
/// region of the NDCT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDistance {
    pub region: Label,
    pub distance: f64,
}

/// One row of `report.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub pair_id: String,
    pub index: usize,
    pub split: Split,
    pub status: PairStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_counts: Option<RegionCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<[f64; 2]>,
    /// Fraction of pixels where the uLDCT and NDCT masks agree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_agreement: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uldct_stats: Vec<RegionStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ndct_stats: Vec<RegionStats>,
    /// Statistics of the written image: the training input or the label.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub output_stats: Vec<RegionStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub output_to_ndct: Vec<RegionDistance>,
    /// Lung std of the written image over lung std of the uLDCT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lung_noise_reduction_ratio: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Written files, relative to the output directory.
    #[serde(default)]
    pub files: Vec<PathBuf>,
}

impl PairReport {
    fn failed(index: usize, entry: &PairEntry, err: &Error) -> Self {
        PairReport {
            pair_id: entry.pair_id.clone(),
            index,
            split: entry.split,
            status: PairStatus::Failed,
            error: Some(err.to_string()),
            seed: None,
            region_counts: None,
            thresholds: None,
            mask_agreement: None,
            uldct_stats: Vec::new(),
            ndct_stats: Vec::new(),
            output_stats: Vec::new(),
            output_to_ndct: Vec::new(),
            lung_noise_reduction_ratio: None,
            warnings: Vec::new(),
            files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub total: usize,
    pub succeeded: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub failed: Vec<String>,
    pub warnings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_denoiser_pairs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub reports: Vec<PairReport>,
}

fn relative(out_dir: &Path, path: &Path) -> PathBuf {
    path.strip_prefix(out_dir).unwrap_or(path).to_path_buf()
}

/// Ratio of lung standard deviations, or `None` without a usable lung.
pub fn lung_noise_ratio(output: &Image, uldct: &Image, mask: &RegionMask) -> Result<Option<f64>> {
    let out = stats_for(output, mask, Label::Lung)?;
    let reference = stats_for(uldct, mask, Label::Lung)?;
    Ok(match (out, reference) {
        (Some(o), Some(r)) if r.std > 0.0 => Some(o.std / r.std),
        _ => None,
    })
}

fn process_pair(
    index: usize,
    entry: &PairEntry,
    cfg: &PipelineConfig,
    wd: &dyn WeakDenoiser,
    out_dir: &Path,
) -> Result<PairReport> {
    let uldct = io::load_image(&entry.uldct_path, Normalize::Declared)?;
    let ndct = io::load_image(&entry.ndct_path, Normalize::Declared)?;
    ndct.check_dims(uldct.width(), uldct.height(), "NDCT")?;

    let seg_u = segment_detailed(&uldct, &cfg.segmentation)?;
    let seg_n = segment_detailed(&ndct, &cfg.segmentation)?;
    let mask = common_mask(&seg_u.mask, &seg_n.mask)?;
    let agreement = seg_u.mask.agreement(&seg_n.mask)?;

    let mut warnings = Vec::new();
    if 1.0 - agreement > MASK_DISAGREEMENT_WARNING {
        warnings.push(format!(
            "uLDCT and NDCT masks disagree on {:.1}% of pixels",
            100.0 * (1.0 - agreement)
        ));
    }
    if mask.count(Label::Lung) == 0 {
        warnings.push("no lung region found".into());
    }
    for (name, seg) in [("uLDCT", &seg_u), ("NDCT", &seg_n)] {
        if seg.threshold > seg.otsu.threshold {
            warnings.push(format!(
                "{name} Otsu threshold {:.4} raised to floor {:.4}",
                seg.otsu.threshold, seg.threshold
            ));
        }
    }

    let dir = out_dir.join(entry.split.name()).join(&entry.pair_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files = Vec::new();
    let mut save = |img: &Image, name: &str| -> Result<Image> {
        let path = dir.join(name);
        io::save_image(img, &path)?;
        files.push(relative(out_dir, &path));
        // Report what is on disk.
        Ok(img.quantized_f32())
    };

    let (seed, output) = match entry.split {
        Split::Train => {
            let seed = pair_seed(cfg.base_seed, index);
            let pair = build_training_pair(
                &uldct,
                &ndct,
                &mask,
                &cfg.noise.with_seed(seed),
                &cfg.geometry,
            )?;
            let input = save(&pair.input, "input.f32")?;
            save(&pair.target, "target.f32")?;
            (Some(seed), input)
        }
        Split::Val | Split::Test => {
            let label = build_label(&uldct, &ndct, &mask, wd)?;
            (None, save(&label.label, "label.f32")?)
        }
    };
    let mask_path = dir.join("mask.u8");
    io::save_mask(&mask, &mask_path)?;
    files.push(relative(out_dir, &mask_path));

    let output_to_ndct = Label::ALL
        .iter()
        .filter(|&&l| mask.count(l) > 0)
        .map(|&region| {
            Ok(RegionDistance {
                region,
                distance: region_wasserstein(
                    &output,
                    &mask,
                    &ndct,
                    &mask,
                    region,
                    cfg.histogram_bins,
                )?
                .distance,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PairReport {
        pair_id: entry.pair_id.clone(),
        index,
        split: entry.split,
        status: PairStatus::Ok,
        error: None,
        seed,
        region_counts: Some(RegionCounts::of(&mask)),
        thresholds: Some([seg_u.threshold, seg_n.threshold]),
        mask_agreement: Some(agreement),
        uldct_stats: region_stats(&uldct, &mask)?,
        ndct_stats: region_stats(&ndct, &mask)?,
        output_stats: region_stats(&output, &mask)?,
        output_to_ndct,
        lung_noise_reduction_ratio: lung_noise_ratio(&output, &uldct, &mask)?,
        warnings,
        files,
    })
}

fn write_json_lines(path: &Path, reports: &[PairReport]) -> Result<()> {
    let mut text = String::new();
    for r in reports {
        text.push_str(&serde_json::to_string(r).expect("report serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a `report.jsonl` file.
pub fn read_report(path: &Path) -> Result<Vec<PairReport>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

/// Processes every pair of `manifest` into `out_dir` using `jobs` worker
/// threads (0 picks the number of CPUs).
///
/// Failing pairs are recorded in the report. In strict mode the first
/// failing pair in manifest order is returned as [`Error::Pair`]; otherwise
/// more than `max_failures` failures yield [`Error::BatchFailures`]. The
/// report and summary are written in every case.
pub fn run_pipeline(
    manifest: &PairManifest,
    cfg: &PipelineConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<RunOutcome> {
    manifest.validate()?;
    cfg.validate()?;
    let wd = cfg.denoiser.build()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let echo = out_dir.join(CONFIG_ECHO_FILE);
    fs::write(&echo, cfg.to_toml()).map_err(|e| Error::io(&echo, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {jobs} worker threads: {e}")))?;

    let results: Vec<Result<PairReport>> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .enumerate()
            .map(|(i, entry)| process_pair(i, entry, cfg, wd.as_ref(), out_dir))
            .collect()
    });

    let mut reports = Vec::with_capacity(results.len());
    let mut first_error = None;
    for ((i, entry), result) in manifest.entries.iter().enumerate().zip(results) {
        match result {
            Ok(r) => reports.push(r),
            Err(e) => {
                reports.push(PairReport::failed(i, entry, &e));
                if first_error.is_none() {
                    first_error = Some(Error::Pair {
                        pair_id: entry.pair_id.clone(),
                        source: Box::new(e),
                    });
                }
            }
        }
    }

    let weak_denoiser_pairs = if cfg.emit_weak_denoiser_data && manifest.count(Split::Train) > 0 {
        let model = cfg.noise.with_seed(cfg.base_seed ^ WEAK_DENOISER_SALT);
        let written = pool.install(|| {
            train_weak_denoiser_data(
                manifest,
                &model,
                &cfg.geometry,
                &out_dir.join(WEAK_DENOISER_DIR),
            )
        });
        match written {
            Ok(pairs) => Some(pairs.len()),
            Err(e) if cfg.strict => return Err(e),
            Err(_) => None,
        }
    } else {
        None
    };

    let ok = |s: Split| {
        reports
            .iter()
            .filter(|r| r.split == s && r.status == PairStatus::Ok)
            .count()
    };
    let summary = RunSummary {
        total: reports.len(),
        succeeded: reports
            .iter()
            .filter(|r| r.status == PairStatus::Ok)
            .count(),
        train: ok(Split::Train),
        val: ok(Split::Val),
        test: ok(Split::Test),
        failed: reports
            .iter()
            .filter(|r| r.status == PairStatus::Failed)
            .map(|r| r.pair_id.clone())
            .collect(),
        warnings: reports.iter().map(|r| r.warnings.len()).sum(),
        weak_denoiser_pairs,
    };
    write_json_lines(&out_dir.join(REPORT_FILE), &reports)?;
    let summary_path = out_dir.join(SUMMARY_FILE);
    let mut bytes = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    bytes.push(b'\n');
    fs::write(&summary_path, bytes).map_err(|e| Error::io(&summary_path, e))?;

    if let Some(err) = first_error {
        if cfg.strict {
            return Err(err);
        }
        if summary.failed.len() > cfg.max_failures {
            return Err(Error::BatchFailures {
                failed: summary.failed.len(),
                total: summary.total,
                pair_ids: summary.failed.clone(),
            });
        }
    }
    Ok(RunOutcome { summary, reports })
}
