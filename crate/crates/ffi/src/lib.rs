//! C ABI over the `ctpurify` library.
//!
//! Objects cross the boundary as opaque heap handles (`CtpImage`,
//! `CtpMask`, `CtpSinogram`) that the caller releases with the matching
//! `*_free` function. Every fallible call returns a [`CtpStatus`] whose
//! numeric values equal the CLI exit codes; on failure the message is
//! available from [`ctp_last_error_message`] on the same thread. Outputs
//! are written through out-pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ctpurify::io::{self, Normalize};
use ctpurify::phantom;
use ctpurify::purification::{self, bilateral_denoiser, gaussian_baseline_denoiser};
use ctpurify::segmentation::{self, SegmentationParams};
use ctpurify::tomography::{self, NoiseModel, ProjectionGeometry, RampFilter, Sinogram};
use ctpurify::{Error, Image, Label, RegionMask};

/// Result of a call. Values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtpStatus {
    Ok = 0,
    /// Unclassified failure, including a caught panic.
    Failure = 1,
    Io = 3,
    Format = 4,
    DimensionMismatch = 5,
    /// Also returned for null or non-UTF-8 arguments.
    InvalidArgument = 6,
    ConstantImage = 7,
    Geometry = 8,
    NoiseModel = 9,
    PathExists = 10,
    Manifest = 11,
    Config = 12,
    Denoiser = 13,
    Pair = 14,
    BatchFailures = 15,
}

impl CtpStatus {
    fn of(err: &Error) -> Self {
        match err.code() {
            3 => CtpStatus::Io,
            4 => CtpStatus::Format,
            5 => CtpStatus::DimensionMismatch,
            6 => CtpStatus::InvalidArgument,
            7 => CtpStatus::ConstantImage,
            8 => CtpStatus::Geometry,
            9 => CtpStatus::NoiseModel,
            10 => CtpStatus::PathExists,
            11 => CtpStatus::Manifest,
            12 => CtpStatus::Config,
            13 => CtpStatus::Denoiser,
            14 => CtpStatus::Pair,
            15 => CtpStatus::BatchFailures,
            _ => CtpStatus::Failure,
        }
    }
}

/// Reconstruction filter for [`ctp_iradon`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtpFilter {
    RamLak = 0,
    None = 1,
}

/// Parallel-beam geometry with uniformly spaced angles over [0, pi).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtpGeometry {
    pub num_angles: usize,
    /// 0 derives the bin count from the image diagonal.
    pub num_bins: usize,
    /// Detector bin width in pixels.
    pub bin_spacing: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtpNoiseModel {
    pub dose_fraction: f64,
    pub incident_photons_n0: f64,
    pub electronic_sigma: f64,
    pub mu_scale: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtpSegmentParams {
    pub bins: usize,
    pub min_lung_area: usize,
    pub min_threshold: f64,
}

/// Normalized 2-D image.
pub struct CtpImage(Image);
/// Per-pixel region labels: 0 background, 1 body, 2 lung.
pub struct CtpMask(RegionMask);
/// Projection data, one row per angle.
pub struct CtpSinogram(Sinogram);

impl From<CtpGeometry> for ProjectionGeometry {
    fn from(g: CtpGeometry) -> Self {
        ProjectionGeometry {
            num_angles: g.num_angles,
            num_bins: (g.num_bins > 0).then_some(g.num_bins),
            bin_spacing: g.bin_spacing,
            angles: None,
        }
    }
}

impl From<CtpNoiseModel> for NoiseModel {
    fn from(m: CtpNoiseModel) -> Self {
        NoiseModel {
            dose_fraction: m.dose_fraction,
            incident_photons_n0: m.incident_photons_n0,
            electronic_sigma: m.electronic_sigma,
            mu_scale: m.mu_scale,
            seed: m.seed,
        }
    }
}

impl From<CtpSegmentParams> for SegmentationParams {
    fn from(p: CtpSegmentParams) -> Self {
        SegmentationParams {
            bins: p.bins,
            min_lung_area: p.min_lung_area,
            min_threshold: p.min_threshold,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(CtpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(CtpStatus::of(&e), e.to_string())
    }
}

fn invalid(what: &str) -> Failure {
    Failure(CtpStatus::InvalidArgument, what.to_string())
}

/// Runs `f`, recording any error or panic for [`ctp_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CtpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtpStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CtpStatus::Failure
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| invalid(&format!("{name} is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(invalid("path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn check_out<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(invalid("output pointer is null"))
    } else {
        Ok(())
    }
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, len: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(invalid("destination is null"));
    }
    if len < src.len() {
        return Err(Failure(
            CtpStatus::DimensionMismatch,
            format!("destination holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message for the most recent failure on this thread, or NULL. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ctp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn ctp_geometry_default() -> CtpGeometry {
    let g = ProjectionGeometry::default();
    CtpGeometry {
        num_angles: g.num_angles,
        num_bins: g.num_bins.unwrap_or(0),
        bin_spacing: g.bin_spacing,
    }
}

#[no_mangle]
pub extern "C" fn ctp_noise_model_default() -> CtpNoiseModel {
    let m = NoiseModel::default();
    CtpNoiseModel {
        dose_fraction: m.dose_fraction,
        incident_photons_n0: m.incident_photons_n0,
        electronic_sigma: m.electronic_sigma,
        mu_scale: m.mu_scale,
        seed: m.seed,
    }
}

#[no_mangle]
pub extern "C" fn ctp_segment_params_default() -> CtpSegmentParams {
    let p = SegmentationParams::default();
    CtpSegmentParams {
        bins: p.bins,
        min_lung_area: p.min_lung_area,
        min_threshold: p.min_threshold,
    }
}

// Images

/// Copies `width * height` row-major values into a new image.
///
/// # Safety
/// `data` must point to `width * height` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ctp_image_new(
    width: usize,
    height: usize,
    data: *const f64,
    out: *mut *mut CtpImage,
) -> CtpStatus {
    guard(|| {
        check_out(out)?;
        if data.is_null() {
            return Err(invalid("data is null"));
        }
        let len = width
            .checked_mul(height)
            .ok_or_else(|| invalid("image size overflows"))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        put(out, CtpImage(Image::new(width, height, values)?))
    })
}

/// Loads an image file, rescaling by the intensity range it declares.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_image_load(path: *const c_char, out: *mut *mut CtpImage) -> CtpStatus {
    guard(|| {
        check_out(out)?;
        let img = io::load_image(&path_arg(path)?, Normalize::Declared)?;
        put(out, CtpImage(img))
    })
}

/// # Safety
/// `img` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ctp_image_save(img: *const CtpImage, path: *const c_char) -> CtpStatus {
    guard(|| {
        let img = handle(img, "image")?;
        io::save_image(&img.0, &path_arg(path)?)?;
        Ok(())
    })
}

/// Width in pixels, or 0 for a null handle.
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctp_image_width(img: *const CtpImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.width())
}

/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctp_image_height(img: *const CtpImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// Copies the pixels, row-major, into `dst` (capacity `len` values).
///
/// # Safety
/// `img` must be a live handle; `dst` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ctp_image_copy_data(
    img: *const CtpImage,
    dst: *mut f64,
    len: usize,
) -> CtpStatus {
    guard(|| copy_out(handle(img, "image")?.0.data(), dst, len))
}

/// # Safety
/// `img` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctp_image_free(img: *mut CtpImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

// Masks

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_mask_load(path: *const c_char, out: *mut *mut CtpMask) -> CtpStatus {
    guard(|| {
        check_out(out)?;
        put(out, CtpMask(io::load_mask(&path_arg(path)?)?))
    })
}

/// # Safety
/// `mask` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ctp_mask_save(mask: *const CtpMask, path: *const c_char) -> CtpStatus {
    guard(|| {
        io::save_mask(&handle(mask, "mask")?.0, &path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `mask` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctp_mask_width(mask: *const CtpMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.width())
}

/// # Safety
/// `mask` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctp_mask_height(mask: *const CtpMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.height())
}

/// Pixels carrying `label` (0, 1 or 2); 0 for a null handle or unknown label.
///
/// # Safety
/// `mask` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctp_mask_count(mask: *const CtpMask, label: u8) -> usize {
    match (mask.as_ref(), Label::from_code(label)) {
        (Some(m), Some(l)) => m.0.count(l),
        _ => 0,
    }
}

/// Copies the label codes, row-major, into `dst`.
///
/// # Safety
/// `mask` must be a live handle; `dst` must hold `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ctp_mask_copy_labels(
    mask: *const CtpMask,
    dst: *mut u8,
    len: usize,
) -> CtpStatus {
    guard(|| copy_out(&handle(mask, "mask")?.0.codes(), dst, len))
}

/// # Safety
/// `mask` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctp_mask_free(mask: *mut CtpMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

// Sinograms

/// # Safety
/// `sino` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctp_sinogram_num_angles(sino: *const CtpSinogram) -> usize {
    sino.as_ref().map_or(0, |s| s.0.num_angles())
}

/// # Safety
/// `sino` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctp_sinogram_num_bins(sino: *const CtpSinogram) -> usize {
    sino.as_ref().map_or(0, |s| s.0.num_bins())
}

/// Copies the line integrals, angle-major, into `dst`.
///
/// # Safety
/// `sino` must be a live handle; `dst` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ctp_sinogram_copy_data(
    sino: *const CtpSinogram,
    dst: *mut f64,
    len: usize,
) -> CtpStatus {
    guard(|| copy_out(handle(sino, "sinogram")?.0.data(), dst, len))
}

/// # Safety
/// `sino` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctp_sinogram_free(sino: *mut CtpSinogram) {
    if !sino.is_null() {
        drop(Box::from_raw(sino));
    }
}

// Phantoms

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_shepp_logan(size: usize, out: *mut *mut CtpImage) -> CtpStatus {
    guard(|| {
        check_out(out)?;
        put(out, CtpImage(phantom::shepp_logan(size)?))
    })
}

/// Synthetic chest slice. `truth` may be null when the ground-truth mask is
/// not wanted.
///
/// # Safety
/// `image` must be writable; `truth` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_lung_phantom(
    size: usize,
    seed: u64,
    image: *mut *mut CtpImage,
    truth: *mut *mut CtpMask,
) -> CtpStatus {
    guard(|| {
        check_out(image)?;
        let p = phantom::lung_phantom(size, seed)?;
        if !truth.is_null() {
            put(truth, CtpMask(p.truth))?;
        }
        put(image, CtpImage(p.image))
    })
}

// Segmentation

/// `params` may be null for the defaults.
///
/// # Safety
/// `img` must be a live handle, `params` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_segment(
    img: *const CtpImage,
    params: *const CtpSegmentParams,
    out: *mut *mut CtpMask,
) -> CtpStatus {
    guard(|| {
        check_out(out)?;
        let img = handle(img, "image")?;
        let params = params
            .as_ref()
            .map_or_else(SegmentationParams::default, |p| (*p).into());
        put(out, CtpMask(segmentation::segment(&img.0, &params)?))
    })
}

/// Common mask of the uLDCT and NDCT masks.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_mask_common(
    uldct: *const CtpMask,
    ndct: *const CtpMask,
    out: *mut *mut CtpMask,
) -> CtpStatus {
    guard(|| {
        check_out(out)?;
        let m = segmentation::common_mask(
            &handle(uldct, "uLDCT mask")?.0,
            &handle(ndct, "NDCT mask")?.0,
        )?;
        put(out, CtpMask(m))
    })
}

// Tomography

/// `geom` may be null for the default geometry.
///
/// # Safety
/// `img` must be a live handle, `geom` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_radon(
    img: *const CtpImage,
    geom: *const CtpGeometry,
    out: *mut *mut CtpSinogram,
) -> CtpStatus {
    guard(|| {
        check_out(out)?;
        let img = handle(img, "image")?;
        let geom = geom
            .as_ref()
            .map_or_else(ProjectionGeometry::default, |g| (*g).into());
        put(out, CtpSinogram(tomography::radon(&img.0, &geom)?))
    })
}

/// Reconstructs an `out_size` square image using the sinogram's own angles
/// and bins. `filter` takes a [`CtpFilter`] value.
///
/// # Safety
/// `sino` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_iradon(
    sino: *const CtpSinogram,
    filter: i32,
    out_size: usize,
    out: *mut *mut CtpImage,
) -> CtpStatus {
    guard(|| {
        check_out(out)?;
        let s = &handle(sino, "sinogram")?.0;
        let geom = ProjectionGeometry {
            num_angles: s.num_angles(),
            num_bins: Some(s.num_bins()),
            bin_spacing: s.bin_spacing(),
            angles: Some(s.angles().to_vec()),
        };
        let filter = match filter {
            f if f == CtpFilter::RamLak as i32 => RampFilter::RamLak,
            f if f == CtpFilter::None as i32 => RampFilter::None,
            other => return Err(invalid(&format!("unknown filter {other}"))),
        };
        put(
            out,
            CtpImage(tomography::iradon(s, &geom, filter, out_size)?),
        )
    })
}

/// `model` may be null for the default model (seed 0).
///
/// # Safety
/// `sino` must be a live handle, `model` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_inject_noise(
    sino: *const CtpSinogram,
    model: *const CtpNoiseModel,
    out: *mut *mut CtpSinogram,
) -> CtpStatus {
    guard(|| {
        check_out(out)?;
        let s = handle(sino, "sinogram")?;
        let model = model
            .as_ref()
            .map_or_else(NoiseModel::default, |m| (*m).into());
        put(out, CtpSinogram(tomography::inject_noise(&s.0, &model)?))
    })
}

/// Projects, adds noise and reconstructs. Null `model` / `geom` select the
/// defaults.
///
/// # Safety
/// `ndct` must be a live handle, `model` and `geom` null or readable, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_simulate_uldct(
    ndct: *const CtpImage,
    model: *const CtpNoiseModel,
    geom: *const CtpGeometry,
    out: *mut *mut CtpImage,
) -> CtpStatus {
    guard(|| {
        check_out(out)?;
        let img = handle(ndct, "NDCT image")?;
        let model = model
            .as_ref()
            .map_or_else(NoiseModel::default, |m| (*m).into());
        let geom = geom
            .as_ref()
            .map_or_else(ProjectionGeometry::default, |g| (*g).into());
        put(
            out,
            CtpImage(tomography::simulate_uldct(&img.0, &model, &geom)?),
        )
    })
}

// Purification

/// Builds the purified training pair: `input` fuses uLDCT background with
/// noised NDCT elsewhere, `target` is a copy of the NDCT.
///
/// # Safety
/// Image and mask handles must be live, `model` and `geom` null or readable,
/// `input` and `target` writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_build_training_pair(
    uldct: *const CtpImage,
    ndct: *const CtpImage,
    mask: *const CtpMask,
    model: *const CtpNoiseModel,
    geom: *const CtpGeometry,
    input: *mut *mut CtpImage,
    target: *mut *mut CtpImage,
) -> CtpStatus {
    guard(|| {
        check_out(input)?;
        check_out(target)?;
        let model = model
            .as_ref()
            .map_or_else(NoiseModel::default, |m| (*m).into());
        let geom = geom
            .as_ref()
            .map_or_else(ProjectionGeometry::default, |g| (*g).into());
        let pair = purification::build_training_pair(
            &handle(uldct, "uLDCT image")?.0,
            &handle(ndct, "NDCT image")?.0,
            &handle(mask, "mask")?.0,
            &model,
            &geom,
        )?;
        put(input, CtpImage(pair.input))?;
        put(target, CtpImage(pair.target))
    })
}

unsafe fn label_with(
    uldct: *const CtpImage,
    ndct: *const CtpImage,
    mask: *const CtpMask,
    wd: &dyn purification::WeakDenoiser,
    out: *mut *mut CtpImage,
) -> Result<(), Failure> {
    check_out(out)?;
    let label = purification::build_label(
        &handle(uldct, "uLDCT image")?.0,
        &handle(ndct, "NDCT image")?.0,
        &handle(mask, "mask")?.0,
        wd,
    )?;
    put(out, CtpImage(label.label))
}

/// Purified label with a Gaussian weak denoiser for the lung region.
///
/// # Safety
/// Image and mask handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_build_label_gaussian(
    uldct: *const CtpImage,
    ndct: *const CtpImage,
    mask: *const CtpMask,
    sigma: f64,
    out: *mut *mut CtpImage,
) -> CtpStatus {
    guard(|| label_with(uldct, ndct, mask, &gaussian_baseline_denoiser(sigma)?, out))
}

/// Purified label with an edge-preserving bilateral weak denoiser.
///
/// # Safety
/// Image and mask handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctp_build_label_bilateral(
    uldct: *const CtpImage,
    ndct: *const CtpImage,
    mask: *const CtpMask,
    spatial_sigma: f64,
    range_sigma: f64,
    out: *mut *mut CtpImage,
) -> CtpStatus {
    guard(|| {
        label_with(
            uldct,
            ndct,
            mask,
            &bilateral_denoiser(spatial_sigma, range_sigma)?,
            out,
        )
    })
}
