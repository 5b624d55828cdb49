use std::f64::consts::PI;

use ctpurify::metrics::{reconstruction_circle, rmse_where};
use ctpurify::phantom::shepp_logan;
use ctpurify::raster::Image;
use ctpurify::rng::seeded;
use ctpurify::tomography::{backproject, iradon, radon, ProjectionGeometry, RampFilter};
use proptest::prelude::*;
use rand::Rng;

fn random_image(n: usize, seed: u64) -> Image {
    let mut rng = seeded(seed);
    Image::from_fn(n, n, |_, _| rng.random::<f64>())
}

fn disk(n: usize, radius: f64) -> Image {
    let c = (n as f64 - 1.0) / 2.0;
    Image::from_fn(n, n, |x, y| {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        if dx * dx + dy * dy <= radius * radius {
            1.0
        } else {
            0.0
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projection_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let geom = ProjectionGeometry::with_angles(24);
        let x = random_image(32, seed);
        let y = random_image(32, seed ^ 0xabcdef);
        let mixed = Image::new(
            32,
            32,
            x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect(),
        ).unwrap();
        let (sx, sy, sm) = (radon(&x, &geom).unwrap(), radon(&y, &geom).unwrap(), radon(&mixed, &geom).unwrap());
        for i in 0..sm.data().len() {
            let expect = a * sx.data()[i] + b * sy.data()[i];
            prop_assert!((sm.data()[i] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
        // Unclamped back-projection is linear as well.
        let (bx, by, bm) = (
            backproject(&sx, RampFilter::RamLak, 32).unwrap(),
            backproject(&sy, RampFilter::RamLak, 32).unwrap(),
            backproject(&sm, RampFilter::RamLak, 32).unwrap(),
        );
        for i in 0..bm.len() {
            let expect = a * bx.data()[i] + b * by.data()[i];
            prop_assert!((bm.data()[i] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
    }
}

#[test]
fn every_row_conserves_mass() {
    let geom = ProjectionGeometry::with_angles(90);
    for seed in 0..20 {
        let img = random_image(48, seed);
        let total: f64 = img.data().iter().sum();
        let sino = radon(&img, &geom).unwrap();
        for a in 0..sino.num_angles() {
            let mass: f64 = sino.row(a).iter().sum::<f64>() * sino.bin_spacing();
            assert!(
                (mass - total).abs() / total < 0.005,
                "seed {seed} angle {a}"
            );
        }
    }
}

#[test]
fn disk_rows_repeat_on_lattice_symmetric_angles() {
    // Rotations by multiples of 90 degrees map the pixel grid onto itself.
    let geom = ProjectionGeometry {
        angles: Some(vec![0.0, PI / 2.0]),
        num_angles: 2,
        ..Default::default()
    };
    let sino = radon(&disk(64, 20.0), &geom).unwrap();
    assert_eq!(sino.row(0), sino.row(1));
}

#[test]
fn disk_rows_are_close_at_every_angle() {
    let sino = radon(&disk(128, 32.0), &ProjectionGeometry::with_angles(180)).unwrap();
    let reference = sino.row(0).to_vec();
    let peak = reference.iter().cloned().fold(0.0, f64::max);
    for a in 1..sino.num_angles() {
        let worst = sino
            .row(a)
            .iter()
            .zip(&reference)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        // A rasterised disk is only approximately round.
        assert!(worst / peak < 0.05, "angle {a}: {}", worst / peak);
    }
}

#[test]
fn filtered_round_trip_beats_plain_back_projection() {
    let img = shepp_logan(256).unwrap();
    let geom = ProjectionGeometry::with_angles(360);
    let sino = radon(&img, &geom).unwrap();
    let circle = reconstruction_circle(256);
    let filtered = rmse_where(
        &img,
        &iradon(&sino, &geom, RampFilter::RamLak, 256).unwrap(),
        &circle,
    )
    .unwrap();
    let plain = rmse_where(
        &img,
        &iradon(&sino, &geom, RampFilter::None, 256).unwrap(),
        &circle,
    )
    .unwrap();
    assert!(filtered < 0.05, "{filtered}");
    assert!(plain > filtered);
}

#[test]
fn point_object_is_blurred_without_filter() {
    let mut data = vec![0.0; 64 * 64];
    for y in 30..34 {
        for x in 30..34 {
            data[y * 64 + x] = 1.0;
        }
    }
    let img = Image::new(64, 64, data).unwrap();
    let geom = ProjectionGeometry::with_angles(180);
    let sino = radon(&img, &geom).unwrap();
    let circle = reconstruction_circle(64);
    let ramp = iradon(&sino, &geom, RampFilter::RamLak, 64).unwrap();
    let none = iradon(&sino, &geom, RampFilter::None, 64).unwrap();
    assert!(rmse_where(&img, &none, &circle).unwrap() > rmse_where(&img, &ramp, &circle).unwrap());
}
