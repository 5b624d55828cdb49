use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{ProjectionGeometry, RampFilter, Sinogram};
use crate::error::{Error, Result};
use crate::raster::Image;

/// Sample spacing along each ray, in pixels.
const RAY_STEP: f64 = 0.5;

/// Centers `img` on a zero-filled square canvas. Returns the canvas and the
/// offset of the original image inside it.
pub fn pad_to_square(img: &Image) -> (Image, usize, usize) {
    let (w, h) = (img.width(), img.height());
    if w == h {
        return (img.clone(), 0, 0);
    }
    let n = w.max(h);
    let (ox, oy) = ((n - w) / 2, (n - h) / 2);
    let padded = Image::from_fn(n, n, |x, y| {
        if x >= ox && x < ox + w && y >= oy && y < oy + h {
            img.get(x - ox, y - oy)
        } else {
            0.0
        }
    });
    (padded, ox, oy)
}

#[inline]
fn bilinear(data: &[f64], n: usize, x: f64, y: f64) -> f64 {
    let xf = x.floor();
    let yf = y.floor();
    let fx = x - xf;
    let fy = y - yf;
    let ix = xf as isize;
    let iy = yf as isize;
    let n_i = n as isize;
    let mut acc = 0.0;
    for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
        let yy = iy + dy;
        if yy < 0 || yy >= n_i || wy == 0.0 {
            continue;
        }
        let row = yy as usize * n;
        for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
            let xx = ix + dx;
            if xx < 0 || xx >= n_i || wx == 0.0 {
                continue;
            }
            acc += wx * wy * data[row + xx as usize];
        }
    }
    acc
}

/// Range of `s` for which `origin + s * slope` stays inside `(-1, n)`.
fn axis_interval(origin: f64, slope: f64, n: f64) -> (f64, f64) {
    if slope.abs() < 1e-12 {
        if origin > -1.0 && origin < n {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (1.0, -1.0)
        }
    } else {
        let a = (-1.0 - origin) / slope;
        let b = (n - origin) / slope;
        (a.min(b), a.max(b))
    }
}

/// Parallel-beam Radon transform.
///
/// Each sinogram sample is the line integral of the bilinearly interpolated
/// image along one ray, evaluated with a fixed half-pixel step. Non-square
/// images are centered on a square canvas first.
pub fn radon(img: &Image, geom: &ProjectionGeometry) -> Result<Sinogram> {
    geom.validate()?;
    let (square, _, _) = pad_to_square(img);
    let n = square.width();
    let data = square.data();
    let angles = geom.angles();
    let num_bins = geom.bins_for(n);
    let spacing = geom.bin_spacing;
    let center = (n as f64 - 1.0) / 2.0;
    let bin_center = (num_bins as f64 - 1.0) / 2.0;

    let half_len = n as f64 * SQRT_2 / 2.0 + 2.0;
    let half_steps = (half_len / RAY_STEP).ceil() as isize;

    let rows: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&theta| {
            let (sin, cos) = theta.sin_cos();
            (0..num_bins)
                .map(|k| {
                    let t = (k as f64 - bin_center) * spacing;
                    let x0 = center + t * cos;
                    let y0 = center + t * sin;
                    let (ax, bx) = axis_interval(x0, -sin, n as f64);
                    let (ay, by) = axis_interval(y0, cos, n as f64);
                    let lo = ax.max(ay);
                    let hi = bx.min(by);
                    if lo > hi {
                        return 0.0;
                    }
                    let j_lo = ((lo / RAY_STEP).floor() as isize).max(-half_steps);
                    let j_hi = ((hi / RAY_STEP).ceil() as isize).min(half_steps);
                    let mut sum = 0.0;
                    for j in j_lo..=j_hi {
                        let s = j as f64 * RAY_STEP;
                        sum += bilinear(data, n, x0 - s * sin, y0 + s * cos);
                    }
                    sum * RAY_STEP
                })
                .collect()
        })
        .collect();

    Sinogram::new(
        angles,
        num_bins,
        spacing,
        1.0 / n as f64,
        rows.into_iter().flatten().collect(),
    )
}

/// Frequency response of the band-limited ramp for `len`-point circular
/// convolution, built from the exact spatial Ram-Lak kernel.
fn ram_lak_response(len: usize, spacing: f64) -> Vec<f64> {
    let mut kernel = vec![Complex::new(0.0, 0.0); len];
    kernel[0].re = 1.0 / (4.0 * spacing * spacing);
    for k in (1..len / 2).step_by(2) {
        let v = -1.0 / (PI * PI * (k * k) as f64 * spacing * spacing);
        kernel[k].re = v;
        kernel[len - k].re = v;
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut kernel);
    kernel.iter().map(|c| c.re).collect()
}

fn filter_rows(sino: &Sinogram, filter: RampFilter) -> Vec<Vec<f64>> {
    let nb = sino.num_bins();
    let rows = (0..sino.num_angles()).map(|a| sino.row(a).to_vec());
    match filter {
        RampFilter::None => rows.collect(),
        RampFilter::RamLak => {
            let len = (2 * nb).next_power_of_two();
            let spacing = sino.bin_spacing();
            let response = ram_lak_response(len, spacing);
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(len);
            let inverse = planner.plan_fft_inverse(len);
            let scale = spacing / len as f64;
            rows.collect::<Vec<_>>()
                .into_par_iter()
                .map(|row| {
                    let mut buf = vec![Complex::new(0.0, 0.0); len];
                    for (b, v) in buf.iter_mut().zip(&row) {
                        b.re = *v;
                    }
                    forward.process(&mut buf);
                    for (b, h) in buf.iter_mut().zip(&response) {
                        *b *= *h;
                    }
                    inverse.process(&mut buf);
                    buf[..nb].iter().map(|c| c.re * scale).collect()
                })
                .collect()
        }
    }
}

/// Filtered back-projection onto an `out_size` square grid, without
/// clamping.
pub fn backproject(sino: &Sinogram, filter: RampFilter, out_size: usize) -> Result<Image> {
    if out_size == 0 {
        return Err(Error::InvalidArgument(
            "output size must be positive".into(),
        ));
    }
    let filtered = filter_rows(sino, filter);
    let nb = sino.num_bins();
    let spacing = sino.bin_spacing();
    let trig: Vec<(f64, f64)> = sino.angles().iter().map(|a| a.sin_cos()).collect();
    let center = (out_size as f64 - 1.0) / 2.0;
    let bin_center = (nb as f64 - 1.0) / 2.0;
    let weight = PI / sino.num_angles() as f64;

    let data: Vec<f64> = (0..out_size)
        .into_par_iter()
        .flat_map_iter(|y| {
            let dy = y as f64 - center;
            let filtered = &filtered;
            let trig = &trig;
            (0..out_size).map(move |x| {
                let dx = x as f64 - center;
                let mut acc = 0.0;
                for (row, &(sin, cos)) in filtered.iter().zip(trig) {
                    let u = (dx * cos + dy * sin) / spacing + bin_center;
                    let uf = u.floor();
                    let i = uf as isize;
                    let f = u - uf;
                    if i >= 0 && (i as usize) < nb {
                        acc += (1.0 - f) * row[i as usize];
                    }
                    if i + 1 >= 0 && ((i + 1) as usize) < nb {
                        acc += f * row[(i + 1) as usize];
                    }
                }
                acc * weight
            })
        })
        .collect();
    Image::new(out_size, out_size, data)
}

/// Inverse Radon transform by filtered back-projection, clamped to `[0, 1]`.
pub fn iradon(
    sino: &Sinogram,
    geom: &ProjectionGeometry,
    filter: RampFilter,
    out_size: usize,
) -> Result<Image> {
    geom.validate()?;
    let expected_bins = geom.bins_for(out_size);
    if sino.num_angles() != geom.num_angles || sino.num_bins() != expected_bins {
        return Err(Error::DimensionMismatch(format!(
            "sinogram is {}x{}, geometry expects {}x{expected_bins} for a {out_size}-pixel image",
            sino.num_angles(),
            sino.num_bins(),
            geom.num_angles
        )));
    }
    Ok(backproject(sino, filter, out_size)?.clamped())
}
