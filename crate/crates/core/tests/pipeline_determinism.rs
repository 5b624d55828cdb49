mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use ctpurify::io::{self, Normalize};
use ctpurify::manifest::{PairManifest, Split};
use ctpurify::metrics::stats_for;
use ctpurify::pipeline::{lung_noise_ratio, read_report, PairStatus, REPORT_FILE};
use ctpurify::raster::Label;

const PAIRS: usize = 10;

fn ctpurify(args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_ctpurify"))
        .args(args)
        .env_remove("CTPURIFY_SEED")
        .output()
        .unwrap();
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

struct Dataset {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

fn dataset() -> Dataset {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let config = root.join("run.toml");
    std::fs::write(&config, "base_seed = 21\n[geometry]\nnum_angles = 90\n").unwrap();
    let pairs = PAIRS.to_string();
    ctpurify(&[
        "phantom",
        "--size",
        "96",
        "--pairs",
        &pairs,
        "--config",
        p(&config),
        "--out",
        p(&root),
    ]);
    Dataset {
        _dir: dir,
        root,
        config,
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn run(ds: &Dataset, out: &str, jobs: usize) -> PathBuf {
    let out = ds.root.join(out);
    let jobs = jobs.to_string();
    ctpurify(&[
        "run",
        p(&ds.root.join("manifest.json")),
        "--config",
        p(&ds.config),
        "--jobs",
        &jobs,
        "--out",
        p(&out),
    ]);
    out
}

#[test]
fn outputs_are_identical_across_reruns_and_thread_counts() {
    let ds = dataset();
    let a = run(&ds, "a", 1);
    let b = run(&ds, "b", 1);
    let c = run(&ds, "c", 4);
    let ha = common::tree_hash(&a);
    assert_eq!(ha, common::tree_hash(&b));
    assert_eq!(ha, common::tree_hash(&c));

    let manifest = PairManifest::load(&ds.root.join("manifest.json")).unwrap();
    assert_eq!(manifest.count(Split::Train), 7);
    assert_eq!(manifest.count(Split::Val) + manifest.count(Split::Test), 3);
    let inputs = ha.keys().filter(|k| k.ends_with("input.f32")).count();
    let labels = ha.keys().filter(|k| k.ends_with("label.f32")).count();
    assert_eq!((inputs, labels), (7, 3));
}

#[test]
fn report_ratios_match_the_written_files() {
    let ds = dataset();
    let out = run(&ds, "out", 0);
    let manifest = PairManifest::load(&ds.root.join("manifest.json")).unwrap();
    let reports = read_report(&out.join(REPORT_FILE)).unwrap();
    assert_eq!(reports.len(), PAIRS);

    for (r, entry) in reports.iter().zip(&manifest.entries) {
        assert_eq!(r.pair_id, entry.pair_id);
        assert_eq!(r.status, PairStatus::Ok);
        let image_file = r
            .files
            .iter()
            .find(|f| f.extension().is_some_and(|e| e == "f32") && !f.ends_with("target.f32"));
        let output = io::load_image(&out.join(image_file.unwrap()), Normalize::Declared).unwrap();
        let mask_file = r.files.iter().find(|f| f.ends_with("mask.u8")).unwrap();
        let mask = io::load_mask(&out.join(mask_file)).unwrap();
        let uldct = io::load_image(&entry.uldct_path, Normalize::Declared).unwrap();

        let ratio = lung_noise_ratio(&output, &uldct, &mask).unwrap().unwrap();
        assert_eq!(Some(ratio), r.lung_noise_reduction_ratio, "{}", r.pair_id);
        // Independent recomputation from region statistics.
        let std = |img| stats_for(img, &mask, Label::Lung).unwrap().unwrap().std;
        assert!((ratio - std(&output) / std(&uldct)).abs() < 1e-12);

        match entry.split {
            Split::Train => assert_eq!(r.seed, Some(21 ^ r.index as u64)),
            _ => {
                assert!(ratio < 1.0, "{}: label lung ratio {ratio}", r.pair_id);
                assert!(r.seed.is_none());
            }
        }
    }
}
