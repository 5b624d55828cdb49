mod common;

use ctpurify::metrics::{region_stats, wasserstein_1d};
use ctpurify::raster::{Image, Label, RegionMask};
use ctpurify::rng::seeded;
use proptest::prelude::*;
use rand::Rng;

/// W1 between two empirical distributions after rounding to the grid
/// `k / (bins - 1)`, by matching sorted samples through their quantile
/// functions: the integral of |Qa(u) - Qb(u)| over u in [0, 1].
fn quantile_w1(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let q = |v: &[f64]| {
        let mut s: Vec<f64> = v
            .iter()
            .map(|x| (x.clamp(0.0, 1.0) * (bins - 1) as f64).round() / (bins - 1) as f64)
            .collect();
        s.sort_by(f64::total_cmp);
        s
    };
    let (qa, qb) = (q(a), q(b));
    // Breakpoints of both step quantile functions.
    let mut cuts: Vec<f64> = (0..=qa.len())
        .map(|i| i as f64 / qa.len() as f64)
        .chain((0..=qb.len()).map(|i| i as f64 / qb.len() as f64))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let mid = (w[0] + w[1]) / 2.0;
            let ia = ((mid * qa.len() as f64) as usize).min(qa.len() - 1);
            let ib = ((mid * qb.len() as f64) as usize).min(qb.len() - 1);
            (qa[ia] - qb[ib]).abs() * (w[1] - w[0])
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wasserstein_matches_quantile_coupling(
        a in prop::collection::vec(0.0f64..=1.0, 1..200),
        b in prop::collection::vec(0.0f64..=1.0, 1..200),
        bins in 2usize..300,
    ) {
        let d = wasserstein_1d(&a, &b, bins).unwrap().distance;
        prop_assert!((d - quantile_w1(&a, &b, bins)).abs() < 1e-9);
        prop_assert!((d - wasserstein_1d(&b, &a, bins).unwrap().distance).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn region_stats_match_two_pass(seed in any::<u64>(), w in 1usize..40, h in 1usize..40) {
        let mut rng = seeded(seed);
        let img = Image::from_fn(w, h, |_, _| rng.random::<f64>());
        let mask = RegionMask::from_fn(w, h, |_, _| Label::ALL[rng.random_range(0..3)]);
        let stats = region_stats(&img, &mask).unwrap();
        let present: Vec<Label> = Label::ALL.iter().copied().filter(|&l| mask.count(l) > 0).collect();
        prop_assert_eq!(stats.iter().map(|s| s.region).collect::<Vec<_>>(), present);
        for s in &stats {
            let values: Vec<f64> = img.data().iter().zip(mask.labels())
                .filter(|(_, &l)| l == s.region).map(|(&v, _)| v).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            prop_assert_eq!(s.pixel_count, values.len());
            prop_assert!((s.mean - mean).abs() < 1e-12);
            prop_assert!((s.std - common::two_pass_std(&values)).abs() < 1e-12);
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
            prop_assert!(s.pixel_count > 0);
        }
    }
}

#[test]
fn phantom_stats_echo_construction_values() {
    let p = ctpurify::phantom::lung_phantom(256, 1).unwrap();
    let stats = region_stats(&p.image, &p.truth).unwrap();
    let lung = stats.iter().find(|s| s.region == Label::Lung).unwrap();
    assert_eq!(lung.mean, ctpurify::phantom::LUNG_VALUE);
    assert_eq!(lung.std, 0.0);
    let bg = stats
        .iter()
        .find(|s| s.region == Label::Background)
        .unwrap();
    assert_eq!((bg.mean, bg.max), (0.0, 0.0));
}
