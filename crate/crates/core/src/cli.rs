//! Command-line interface of the `ctpurify` binary.
//!
//! Every subcommand loads its inputs, calls one library operation and
//! writes the result with [`crate::io`], so the files it produces are the
//! ones a direct library call with the same configuration would produce.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Overrides, PipelineConfig};
use crate::error::{Error, Result};
use crate::io::{self, Normalize, SidecarKind};
use crate::manifest::{split_manifest, PairManifest, PairSource};
use crate::metrics::{region_stats, region_wasserstein, RegionStats};
use crate::phantom;
use crate::pipeline::run_pipeline;
use crate::purification::{build_label, build_training_pair};
use crate::raster::{Image, Label, RegionMask};
use crate::segmentation::{common_mask, segment_detailed};
use crate::tomography::{
    inject_noise, iradon, radon, simulate_uldct, ProjectionGeometry, RampFilter,
};

#[derive(Debug, Parser)]
#[command(
    name = "ctpurify",
    version,
    about = "Region-controlled uLDCT / NDCT data construction"
)]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the config file and CTPURIFY_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 uses every CPU).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Abort on the first failing pair.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a phantom and its ground-truth mask, or a phantom dataset.
    Phantom(PhantomArgs),
    /// Segment an image into background / body / lung.
    Segment(SegmentArgs),
    /// Project an image to a sinogram.
    Radon(RadonArgs),
    /// Reconstruct an image from a sinogram by filtered back-projection.
    Iradon(IradonArgs),
    /// Add dose-reduction noise to a sinogram, or to an image through a
    /// projection round trip.
    AddNoise(AddNoiseArgs),
    /// Build one training pair.
    BuildPair(PairArgs),
    /// Build one evaluation label.
    BuildLabel(PairArgs),
    /// Per-region statistics of an image.
    Stats(StatsArgs),
    /// Process a whole manifest.
    Run(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhantomKind {
    Lung,
    SheppLogan,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, value_enum, default_value_t = PhantomKind::Lung)]
    pub kind: PhantomKind,
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Also write a simulated low-dose companion.
    #[arg(long)]
    pub noisy: bool,
    /// Write a dataset of this many uLDCT / NDCT lung phantom pairs and a
    /// manifest instead of a single phantom.
    #[arg(long, value_name = "N")]
    pub pairs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub input: PathBuf,
    /// Second image of the pair; the common mask of both is written.
    #[arg(long = "with", value_name = "IMAGE")]
    pub with: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RadonArgs {
    pub input: PathBuf,
    /// Overrides the configured number of angles.
    #[arg(long)]
    pub angles: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IradonArgs {
    pub input: PathBuf,
    /// Side length of the reconstruction.
    #[arg(long)]
    pub size: usize,
    #[arg(long, default_value = "ram-lak")]
    pub filter: RampFilter,
}

#[derive(Debug, Args)]
pub struct AddNoiseArgs {
    pub input: PathBuf,
    /// Overrides the configured dose fraction.
    #[arg(long)]
    pub dose: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub uldct: PathBuf,
    #[arg(long)]
    pub ndct: PathBuf,
    /// Region mask to use instead of segmenting both images.
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Also report per-region Wasserstein distances to this image.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub manifest: PathBuf,
}

fn required_out(out: &Option<PathBuf>) -> Result<&Path> {
    out.as_deref()
        .ok_or_else(|| Error::InvalidArgument("--out is required for this command".into()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load(path: &Path) -> Result<Image> {
    io::load_image(path, Normalize::Declared)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ctpurify: error: {e}");
            e.code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        strict: cli.strict,
    };
    let cfg = PipelineConfig::resolve_env(cli.config.as_deref(), &overrides)?;
    if cli.jobs > 0 {
        // Only fails when a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global();
    }
    match &cli.command {
        Command::Phantom(a) => cmd_phantom(a, &cfg, required_out(&cli.out)?),
        Command::Segment(a) => cmd_segment(a, &cfg, required_out(&cli.out)?),
        Command::Radon(a) => cmd_radon(a, &cfg, required_out(&cli.out)?),
        Command::Iradon(a) => cmd_iradon(a, &cfg, required_out(&cli.out)?),
        Command::AddNoise(a) => cmd_add_noise(a, &cfg, required_out(&cli.out)?),
        Command::BuildPair(a) => cmd_build_pair(a, &cfg, required_out(&cli.out)?),
        Command::BuildLabel(a) => cmd_build_label(a, &cfg, required_out(&cli.out)?),
        Command::Stats(a) => cmd_stats(a, &cfg, cli.out.as_deref()),
        Command::Run(a) => cmd_run(a, &cfg, required_out(&cli.out)?, cli.jobs),
    }
}

pub fn cmd_phantom(args: &PhantomArgs, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    create_dir(out)?;
    if let Some(n) = args.pairs {
        return write_phantom_dataset(args, n, cfg, out);
    }
    let (image, truth) = match args.kind {
        PhantomKind::Lung => {
            let p = phantom::lung_phantom(args.size, cfg.base_seed)?;
            (p.image, p.truth)
        }
        PhantomKind::SheppLogan => (
            phantom::shepp_logan(args.size)?,
            phantom::shepp_logan_truth(args.size)?,
        ),
    };
    io::save_image(&image, &out.join("phantom.f32"))?;
    io::save_mask(&truth, &out.join("truth.u8"))?;
    if args.noisy {
        let noisy = simulate_uldct(&image, &cfg.noise.with_seed(cfg.base_seed), &cfg.geometry)?;
        io::save_image(&noisy, &out.join("phantom_noisy.f32"))?;
    }
    println!(
        "phantom: {}x{} written to {} ({} lung pixels)",
        args.size,
        args.size,
        out.display(),
        truth.count(Label::Lung)
    );
    Ok(())
}

fn write_phantom_dataset(
    args: &PhantomArgs,
    n: usize,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<()> {
    if args.kind != PhantomKind::Lung {
        return Err(Error::InvalidArgument(
            "phantom datasets are built from lung phantoms".into(),
        ));
    }
    let mut sources = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("pair_{i:04}");
        let seed = crate::rng::pair_seed(cfg.base_seed, i);
        let pair =
            phantom::phantom_pair(args.size, seed, &cfg.noise.with_seed(seed), &cfg.geometry)?;
        let dir = out.join("pairs").join(&id);
        create_dir(&dir)?;
        io::save_image(&pair.uldct, &dir.join("uldct.f32"))?;
        io::save_image(&pair.ndct, &dir.join("ndct.f32"))?;
        io::save_mask(&pair.ndct_truth, &dir.join("truth.u8"))?;
        sources.push(PairSource {
            pair_id: id.clone(),
            uldct_path: Path::new("pairs").join(&id).join("uldct.f32"),
            ndct_path: Path::new("pairs").join(&id).join("ndct.f32"),
        });
    }
    let manifest = split_manifest(sources, &cfg.split, cfg.base_seed)?;
    manifest.save(&out.join("manifest.json"))?;
    println!(
        "phantom: {n} pairs and manifest.json written to {}",
        out.display()
    );
    Ok(())
}

pub fn cmd_segment(args: &SegmentArgs, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let seg = segment_detailed(&load(&args.input)?, &cfg.segmentation)?;
    let mask = match &args.with {
        Some(other) => common_mask(
            &seg.mask,
            &segment_detailed(&load(other)?, &cfg.segmentation)?.mask,
        )?,
        None => seg.mask,
    };
    io::save_mask(&mask, out)?;
    println!(
        "segment: threshold {:.4}, background {} body {} lung {} -> {}",
        seg.threshold,
        mask.count(Label::Background),
        mask.count(Label::Body),
        mask.count(Label::Lung),
        out.display()
    );
    Ok(())
}

pub fn cmd_radon(args: &RadonArgs, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let mut geom = cfg.geometry.clone();
    if let Some(n) = args.angles {
        geom = ProjectionGeometry {
            num_angles: n,
            angles: None,
            ..geom
        };
    }
    let sino = radon(&load(&args.input)?, &geom)?;
    io::save_sinogram(&sino, out)?;
    println!(
        "radon: {} angles x {} bins -> {}",
        sino.num_angles(),
        sino.num_bins(),
        out.display()
    );
    Ok(())
}

/// Geometry matching a stored sinogram.
fn geometry_of(sino: &crate::tomography::Sinogram) -> ProjectionGeometry {
    ProjectionGeometry {
        num_angles: sino.num_angles(),
        num_bins: Some(sino.num_bins()),
        bin_spacing: sino.bin_spacing(),
        angles: Some(sino.angles().to_vec()),
    }
}

pub fn cmd_iradon(args: &IradonArgs, _cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let sino = io::load_sinogram(&args.input)?;
    let img = iradon(&sino, &geometry_of(&sino), args.filter, args.size)?;
    io::save_image(&img, out)?;
    println!("iradon: {0}x{0} image -> {1}", args.size, out.display());
    Ok(())
}

pub fn cmd_add_noise(args: &AddNoiseArgs, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let mut model = cfg.noise.with_seed(cfg.base_seed);
    if let Some(d) = args.dose {
        model.dose_fraction = d;
    }
    match io::sidecar_kind(&args.input)? {
        SidecarKind::Sinogram => {
            let noisy = inject_noise(&io::load_sinogram(&args.input)?, &model)?;
            io::save_sinogram(&noisy, out)?;
        }
        SidecarKind::Image => {
            let noisy = simulate_uldct(&load(&args.input)?, &model, &cfg.geometry)?;
            io::save_image(&noisy, out)?;
        }
        SidecarKind::Mask => {
            return Err(Error::UnsupportedFormat(format!(
                "{} is a mask, not an image or sinogram",
                args.input.display()
            )))
        }
    }
    println!(
        "add-noise: dose {} seed {} -> {}",
        model.dose_fraction,
        model.seed,
        out.display()
    );
    Ok(())
}

fn pair_inputs(args: &PairArgs, cfg: &PipelineConfig) -> Result<(Image, Image, RegionMask)> {
    let uldct = load(&args.uldct)?;
    let ndct = load(&args.ndct)?;
    let mask = match &args.mask {
        Some(p) => io::load_mask(p)?,
        None => common_mask(
            &segment_detailed(&uldct, &cfg.segmentation)?.mask,
            &segment_detailed(&ndct, &cfg.segmentation)?.mask,
        )?,
    };
    Ok((uldct, ndct, mask))
}

pub fn cmd_build_pair(args: &PairArgs, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let (uldct, ndct, mask) = pair_inputs(args, cfg)?;
    let pair = build_training_pair(&uldct, &ndct, &mask, &cfg.noise_for(0), &cfg.geometry)?;
    create_dir(out)?;
    io::save_image(&pair.input, &out.join("input.f32"))?;
    io::save_image(&pair.target, &out.join("target.f32"))?;
    io::save_mask(&mask, &out.join("mask.u8"))?;
    println!("build-pair: input, target and mask -> {}", out.display());
    Ok(())
}

pub fn cmd_build_label(args: &PairArgs, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let (uldct, ndct, mask) = pair_inputs(args, cfg)?;
    let wd = cfg.denoiser.build()?;
    let label = build_label(&uldct, &ndct, &mask, wd.as_ref())?;
    create_dir(out)?;
    io::save_image(&label.label, &out.join("label.f32"))?;
    io::save_mask(&mask, &out.join("mask.u8"))?;
    println!(
        "build-label: label and mask -> {} ({})",
        out.display(),
        wd.descriptor()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct StatsRow<'a> {
    #[serde(flatten)]
    stats: &'a RegionStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance_to_reference: Option<f64>,
}

pub fn cmd_stats(args: &StatsArgs, cfg: &PipelineConfig, out: Option<&Path>) -> Result<()> {
    let img = load(&args.input)?;
    let mask = io::load_mask(&args.mask)?;
    let reference = args.reference.as_deref().map(load).transpose()?;
    let stats = region_stats(&img, &mask)?;
    let mut text = String::new();
    for s in &stats {
        let distance = match &reference {
            Some(r) => Some(
                region_wasserstein(&img, &mask, r, &mask, s.region, cfg.histogram_bins)?.distance,
            ),
            None => None,
        };
        let row = StatsRow {
            stats: s,
            distance_to_reference: distance,
        };
        text.push_str(&serde_json::to_string(&row).expect("stats serialize"));
        text.push('\n');
    }
    match out {
        Some(path) => fs::write(path, &text).map_err(|e| Error::io(path, e))?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn cmd_run(args: &RunArgs, cfg: &PipelineConfig, out: &Path, jobs: usize) -> Result<()> {
    let manifest = PairManifest::load_or_split(&args.manifest, &cfg.split, cfg.base_seed)?;
    let outcome = run_pipeline(&manifest, cfg, out, jobs)?;
    let s = &outcome.summary;
    println!(
        "run: {} of {} pairs ok (train {}, val {}, test {}), {} warnings -> {}",
        s.succeeded,
        s.total,
        s.train,
        s.val,
        s.test,
        s.warnings,
        out.display()
    );
    Ok(())
}
