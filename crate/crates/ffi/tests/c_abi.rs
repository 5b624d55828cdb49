use std::ffi::{CStr, CString};
use std::ptr;

use ctpurify_ffi::*;

fn last_error() -> String {
    let p = ctp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn image_data(img: *const CtpImage) -> Vec<f64> {
    unsafe {
        let n = ctp_image_width(img) * ctp_image_height(img);
        let mut v = vec![0.0; n];
        assert_eq!(ctp_image_copy_data(img, v.as_mut_ptr(), n), CtpStatus::Ok);
        v
    }
}

fn mask_labels(mask: *const CtpMask) -> Vec<u8> {
    unsafe {
        let n = ctp_mask_width(mask) * ctp_mask_height(mask);
        let mut v = vec![0u8; n];
        assert_eq!(ctp_mask_copy_labels(mask, v.as_mut_ptr(), n), CtpStatus::Ok);
        v
    }
}

#[test]
fn handles_round_trip_pixels() {
    let data: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
    let mut img = ptr::null_mut();
    unsafe {
        assert_eq!(ctp_image_new(4, 3, data.as_ptr(), &mut img), CtpStatus::Ok);
        assert_eq!((ctp_image_width(img), ctp_image_height(img)), (4, 3));
        assert_eq!(image_data(img), data);
        let mut small = [0.0; 5];
        assert_eq!(
            ctp_image_copy_data(img, small.as_mut_ptr(), 5),
            CtpStatus::DimensionMismatch
        );

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("x.f32").to_str().unwrap()).unwrap();
        assert_eq!(ctp_image_save(img, path.as_ptr()), CtpStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(ctp_image_load(path.as_ptr(), &mut loaded), CtpStatus::Ok);
        let back = image_data(loaded);
        for (a, b) in back.iter().zip(&data) {
            assert_eq!(*a, *b as f32 as f64);
        }
        ctp_image_free(loaded);
        ctp_image_free(img);
    }
}

#[test]
fn errors_carry_core_codes_and_messages() {
    let mut img = ptr::null_mut();
    unsafe {
        let bad = [0.5, f64::NAN];
        assert_eq!(
            ctp_image_new(2, 1, bad.as_ptr(), &mut img),
            CtpStatus::InvalidArgument
        );
        assert!(img.is_null(), "no output on failure");
        assert!(!last_error().is_empty());

        let missing = CString::new("/nonexistent/dir/x.f32").unwrap();
        assert_eq!(ctp_image_load(missing.as_ptr(), &mut img), CtpStatus::Io);
        assert!(last_error().contains("/nonexistent/dir"));

        let flat = [0.3; 16];
        assert_eq!(ctp_image_new(4, 4, flat.as_ptr(), &mut img), CtpStatus::Ok);
        let mut mask = ptr::null_mut();
        assert_eq!(
            ctp_segment(img, ptr::null(), &mut mask),
            CtpStatus::ConstantImage
        );
        let mut geom = ctp_geometry_default();
        geom.num_angles = 0;
        let mut sino = ptr::null_mut();
        assert_eq!(ctp_radon(img, &geom, &mut sino), CtpStatus::Geometry);
        let mut out = ptr::null_mut();
        let mut sino_ok = ptr::null_mut();
        assert_eq!(ctp_radon(img, ptr::null(), &mut sino_ok), CtpStatus::Ok);
        assert_eq!(
            ctp_iradon(sino_ok, 9, 4, &mut out),
            CtpStatus::InvalidArgument
        );
        let mut model = ctp_noise_model_default();
        model.dose_fraction = 0.0;
        assert_eq!(
            ctp_inject_noise(sino_ok, &model, &mut sino),
            CtpStatus::NoiseModel
        );
        ctp_sinogram_free(sino_ok);
        ctp_image_free(img);

        assert_eq!(
            ctp_segment(ptr::null(), ptr::null(), &mut mask),
            CtpStatus::InvalidArgument
        );
        assert_eq!(ctp_image_width(ptr::null()), 0);
        ctp_image_free(ptr::null_mut());
    }
}

#[test]
fn pipeline_through_the_abi_matches_the_library() {
    unsafe {
        let (mut ndct, mut truth) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            ctp_lung_phantom(96, 4, &mut ndct, &mut truth),
            CtpStatus::Ok
        );
        let direct = ctpurify::phantom::lung_phantom(96, 4).unwrap();
        assert_eq!(image_data(ndct), direct.image.data());
        assert_eq!(mask_labels(truth), direct.truth.codes());
        assert_eq!(
            ctp_mask_count(truth, 2),
            direct.truth.count(ctpurify::Label::Lung)
        );

        let mut geom = ctp_geometry_default();
        geom.num_angles = 120;
        let mut model = ctp_noise_model_default();
        model.seed = 11;
        let mut uldct = ptr::null_mut();
        assert_eq!(
            ctp_simulate_uldct(ndct, &model, &geom, &mut uldct),
            CtpStatus::Ok
        );
        let expect = ctpurify::tomography::simulate_uldct(
            &direct.image,
            &ctpurify::NoiseModel::default().with_seed(11),
            &ctpurify::ProjectionGeometry::with_angles(120),
        )
        .unwrap();
        assert_eq!(image_data(uldct), expect.data());

        let params = ctp_segment_params_default();
        let (mut mu, mut mn, mut common) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(ctp_segment(uldct, &params, &mut mu), CtpStatus::Ok);
        assert_eq!(ctp_segment(ndct, ptr::null(), &mut mn), CtpStatus::Ok);
        assert_eq!(ctp_mask_common(mu, mn, &mut common), CtpStatus::Ok);
        let labels = mask_labels(common);

        let (mut input, mut target) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            ctp_build_training_pair(uldct, ndct, common, &model, &geom, &mut input, &mut target),
            CtpStatus::Ok
        );
        let (mut lg, mut lb) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            ctp_build_label_gaussian(uldct, ndct, common, 1.0, &mut lg),
            CtpStatus::Ok
        );
        assert_eq!(
            ctp_build_label_bilateral(uldct, ndct, common, 2.0, 0.1, &mut lb),
            CtpStatus::Ok
        );
        assert_eq!(
            ctp_build_label_gaussian(uldct, ndct, common, -1.0, &mut lg),
            CtpStatus::InvalidArgument
        );

        let (u, n, inp, tgt, label) = (
            image_data(uldct),
            image_data(ndct),
            image_data(input),
            image_data(target),
            image_data(lb),
        );
        assert_eq!(tgt, n);
        for (i, &l) in labels.iter().enumerate() {
            if l == 0 {
                assert_eq!(inp[i].to_bits(), u[i].to_bits());
                assert_eq!(label[i].to_bits(), n[i].to_bits());
            } else if l == 1 {
                assert_eq!(label[i].to_bits(), n[i].to_bits());
            }
        }

        let mut sino = ptr::null_mut();
        assert_eq!(ctp_radon(ndct, &geom, &mut sino), CtpStatus::Ok);
        assert_eq!(ctp_sinogram_num_angles(sino), 120);
        let len = ctp_sinogram_num_angles(sino) * ctp_sinogram_num_bins(sino);
        let mut raw = vec![0.0; len];
        assert_eq!(
            ctp_sinogram_copy_data(sino, raw.as_mut_ptr(), len),
            CtpStatus::Ok
        );
        assert!(raw.iter().all(|v| v.is_finite() && *v >= 0.0));
        let mut rec = ptr::null_mut();
        assert_eq!(
            ctp_iradon(sino, CtpFilter::RamLak as i32, 96, &mut rec),
            CtpStatus::Ok
        );
        assert_eq!(ctp_image_width(rec), 96);

        for img in [ndct, uldct, input, target, lg, lb, rec] {
            ctp_image_free(img);
        }
        for m in [truth, mu, mn, common] {
            ctp_mask_free(m);
        }
        ctp_sinogram_free(sino);
    }
}

#[test]
fn errors_are_per_thread() {
    let mut img = ptr::null_mut();
    let missing = CString::new("/nonexistent/a.f32").unwrap();
    unsafe {
        assert_eq!(ctp_image_load(missing.as_ptr(), &mut img), CtpStatus::Io);
    }
    std::thread::spawn(|| assert!(ctp_last_error_message().is_null()))
        .join()
        .unwrap();
    assert!(!ctp_last_error_message().is_null());
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(ctp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
