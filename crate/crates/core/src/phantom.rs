//! Synthetic test objects with exact ground truth.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::{Image, Label, RegionMask};
use crate::rng::seeded;
use crate::tomography::{simulate_uldct, NoiseModel, ProjectionGeometry};

/// Smallest phantom side length whose ribs and vessels stay at least one
/// pixel wide.
pub const MIN_PHANTOM_SIZE: usize = 64;

pub const BODY_VALUE: f64 = 0.5;
pub const LUNG_VALUE: f64 = 0.05;
pub const VESSEL_VALUE: f64 = 0.7;
pub const RIB_VALUE: f64 = 0.9;

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    phi: f64,
}

impl Ellipse {
    fn level(&self, u: f64, v: f64) -> f64 {
        let (s, c) = self.phi.sin_cos();
        let (du, dv) = (u - self.cx, v - self.cy);
        let p = du * c + dv * s;
        let q = -du * s + dv * c;
        (p / self.a).powi(2) + (q / self.b).powi(2)
    }

    fn contains(&self, u: f64, v: f64) -> bool {
        self.level(u, v) <= 1.0
    }
}

/// Pixel center in normalized coordinates `[-1, 1]`, `v` pointing down.
fn normalized(x: usize, y: usize, n: usize) -> (f64, f64) {
    (
        (2.0 * x as f64 + 1.0) / n as f64 - 1.0,
        (2.0 * y as f64 + 1.0) / n as f64 - 1.0,
    )
}

fn check_size(size: usize) -> Result<()> {
    if size < MIN_PHANTOM_SIZE {
        return Err(Error::InvalidArgument(format!(
            "phantom size {size} is below the minimum of {MIN_PHANTOM_SIZE}"
        )));
    }
    Ok(())
}

/// Modified (high-contrast) Shepp-Logan head phantom, values in `[0, 1]`.
pub fn shepp_logan(size: usize) -> Result<Image> {
    check_size(size)?;
    let deg = PI / 180.0;
    // (intensity, a, b, x0, y0, phi) with y pointing up.
    let table: [(f64, f64, f64, f64, f64, f64); 10] = [
        (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
        (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
        (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
        (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
        (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
        (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
        (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
        (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
        (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
        (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
    ];
    let ellipses: Vec<(f64, Ellipse)> = table
        .iter()
        .map(|&(value, a, b, x0, y0, phi)| {
            (
                value,
                Ellipse {
                    cx: x0,
                    cy: -y0,
                    a,
                    b,
                    phi: -phi * deg,
                },
            )
        })
        .collect();
    Ok(Image::from_fn(size, size, |x, y| {
        let (u, v) = normalized(x, y, size);
        ellipses
            .iter()
            .filter(|(_, e)| e.contains(u, v))
            .map(|(value, _)| value)
            .sum::<f64>()
            .clamp(0.0, 1.0)
    })
    .with_meta("phantom", "shepp-logan"))
}

/// Ground truth for [`shepp_logan`]: body inside the skull ellipse, lung
/// for the dark (near-zero) ventricles, background elsewhere.
pub fn shepp_logan_truth(size: usize) -> Result<RegionMask> {
    let img = shepp_logan(size)?;
    let skull = Ellipse {
        cx: 0.0,
        cy: 0.0,
        a: 0.69,
        b: 0.92,
        phi: 0.0,
    };
    Ok(RegionMask::from_fn(size, size, |x, y| {
        let (u, v) = normalized(x, y, size);
        if !skull.contains(u, v) {
            Label::Background
        } else if img.get(x, y) < 0.1 {
            Label::Lung
        } else {
            Label::Body
        }
    }))
}

/// A chest-like phantom and its exact region labels.
#[derive(Debug, Clone)]
pub struct LungPhantom {
    pub image: Image,
    pub truth: RegionMask,
}

/// Chest phantom: a body ellipse at [`BODY_VALUE`] holding two dark lungs
/// ([`LUNG_VALUE`]) crossed by short vessel segments ([`VESSEL_VALUE`]),
/// with rib arcs ([`RIB_VALUE`]) inside the body wall.
///
/// `seed` jitters the lung placement and vessel layout. Vessels are labeled
/// body in the ground truth since they are brighter than any sensible
/// air/tissue threshold.
pub fn lung_phantom(size: usize, seed: u64) -> Result<LungPhantom> {
    lung_phantom_shifted(size, seed, (0.0, 0.0))
}

/// [`lung_phantom`] with the lungs and vessels displaced by `shift`
/// (normalized units), standing in for respiratory motion between two
/// acquisitions of the same patient.
pub fn lung_phantom_shifted(size: usize, seed: u64, shift: (f64, f64)) -> Result<LungPhantom> {
    check_size(size)?;
    let mut rng = seeded(seed);
    let body = Ellipse {
        cx: 0.0,
        cy: 0.02,
        a: 0.86,
        b: 0.64,
        phi: 0.0,
    };
    let lungs: Vec<Ellipse> = [-1.0, 1.0]
        .iter()
        .map(|&side: &f64| Ellipse {
            cx: side * 0.40 + rng.random_range(-0.02..0.02) + shift.0,
            cy: rng.random_range(-0.02..0.02) + shift.1,
            a: 0.26,
            b: 0.40,
            phi: side * rng.random_range(0.0..0.1),
        })
        .collect();

    // Segments in pixel coordinates.
    let to_px = |u: f64, v: f64| {
        (
            (u + 1.0) * size as f64 / 2.0 - 0.5,
            (v + 1.0) * size as f64 / 2.0 - 0.5,
        )
    };
    // Vessels branch from one hilum point per lung, so they form a star
    // and never enclose a piece of parenchyma.
    let mut vessels = Vec::new();
    for (lung, side) in lungs.iter().zip([-1.0, 1.0]) {
        let (s, c) = lung.phi.sin_cos();
        let local = |p: f64, q: f64| {
            let (p, q) = (p * lung.a, q * lung.b);
            to_px(lung.cx + p * c - q * s, lung.cy + p * s + q * c)
        };
        let hilum = local(-side * 0.45, rng.random_range(-0.1..0.1));
        let start = rng.random_range(0.0..2.0 * PI);
        for k in 0..3 {
            let t = start + k as f64 * 2.0 * PI / 3.0 + rng.random_range(-0.3..0.3);
            let r = rng.random_range(0.5..0.7);
            vessels.push((hilum, local(r * t.cos(), r * t.sin())));
        }
    }
    let half_width = 0.8;

    let rib_centers = [20.0, 55.0, 125.0, 160.0, 200.0, 235.0, 305.0, 340.0];
    let rib_half_span = 9.0 * PI / 180.0;

    let classify = |x: usize, y: usize| -> (f64, Label) {
        let (u, v) = normalized(x, y, size);
        let level = body.level(u, v);
        if level > 1.0 {
            return (0.0, Label::Background);
        }
        let (px, py) = (x as f64, y as f64);
        if lungs.iter().any(|l| l.contains(u, v)) {
            let on_vessel = vessels
                .iter()
                .any(|&(a, b)| segment_distance((px, py), a, b) <= half_width);
            return if on_vessel {
                (VESSEL_VALUE, Label::Body)
            } else {
                (LUNG_VALUE, Label::Lung)
            };
        }
        let radius = level.sqrt();
        if (0.86..=0.93).contains(&radius) {
            let angle = ((v - body.cy) / body.b)
                .atan2(u / body.a)
                .rem_euclid(2.0 * PI);
            let on_rib = rib_centers.iter().any(|&c: &f64| {
                let d = (angle - c * PI / 180.0 + PI).rem_euclid(2.0 * PI) - PI;
                d.abs() <= rib_half_span
            });
            if on_rib {
                return (RIB_VALUE, Label::Body);
            }
        }
        (BODY_VALUE, Label::Body)
    };

    let mut values = Vec::with_capacity(size * size);
    let mut labels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (value, label) = classify(x, y);
            values.push(value);
            labels.push(label);
        }
    }
    let image = Image::new(size, size, values)?
        .with_meta("phantom", "lung")
        .with_meta("phantom_seed", seed.to_string());
    Ok(LungPhantom {
        image,
        truth: RegionMask::new(size, size, labels)?,
    })
}

/// Largest lung displacement between the two acquisitions of a phantom
/// pair, in normalized units.
pub const PAIR_MAX_SHIFT: f64 = 0.015;

/// A synthetic uLDCT / NDCT acquisition of one patient.
#[derive(Debug, Clone)]
pub struct PhantomPair {
    /// Clean lung phantom.
    pub ndct: Image,
    pub ndct_truth: RegionMask,
    /// Simulated low-dose scan of the same phantom with slightly displaced
    /// lungs.
    pub uldct: Image,
    pub uldct_truth: RegionMask,
    pub shift: (f64, f64),
}

/// Builds a phantom pair. The uLDCT is `simulate_uldct` of a copy of the
/// NDCT phantom whose lungs are moved by up to [`PAIR_MAX_SHIFT`], with the
/// noise drawn from `model.seed`.
pub fn phantom_pair(
    size: usize,
    seed: u64,
    model: &NoiseModel,
    geom: &ProjectionGeometry,
) -> Result<PhantomPair> {
    let ndct = lung_phantom(size, seed)?;
    let mut rng = seeded(!seed);
    let shift = (
        rng.random_range(-PAIR_MAX_SHIFT..=PAIR_MAX_SHIFT),
        rng.random_range(-PAIR_MAX_SHIFT..=PAIR_MAX_SHIFT),
    );
    let moved = lung_phantom_shifted(size, seed, shift)?;
    let uldct =
        simulate_uldct(&moved.image, model, geom)?.with_meta("phantom_seed", seed.to_string());
    Ok(PhantomPair {
        ndct: ndct.image,
        ndct_truth: ndct.truth,
        uldct,
        uldct_truth: moved.truth,
        shift,
    })
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}
