use std::path::{Path, PathBuf};
use std::process::Command;

const HEADER_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/include");

const PROGRAM: &str = r#"
#include <stdio.h>
#include "ctpurify.h"

int main(void) {
    CtpImage *img = NULL;
    CtpMask *truth = NULL;
    CtpMask *mask = NULL;
    if (ctp_lung_phantom(64, 1, &img, &truth) != CTP_STATUS_OK) return 10;
    CtpSegmentParams params = ctp_segment_params_default();
    if (ctp_segment(img, &params, &mask) != CTP_STATUS_OK) return 11;
    size_t lung = ctp_mask_count(mask, 2);
    CtpImage *bad = NULL;
    CtpStatus s = ctp_image_load("/nonexistent/file.f32", &bad);
    if (s != CTP_STATUS_IO || bad != NULL || ctp_last_error_message() == NULL) return 12;
    printf("%zu %zu %s\n", ctp_image_width(img), lung, ctp_version());
    ctp_mask_free(mask);
    ctp_mask_free(truth);
    ctp_image_free(img);
    return 0;
}
"#;

fn compiler() -> Option<&'static str> {
    ["cc", "clang", "gcc"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

fn write_program(dir: &Path) -> PathBuf {
    let src = dir.join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    src
}

#[test]
fn header_is_generated_and_self_contained() {
    let header = Path::new(HEADER_DIR).join("ctpurify.h");
    let text = std::fs::read_to_string(&header).expect("build script writes the header");
    for name in [
        "CtpImage",
        "ctp_last_error_message",
        "ctp_build_label_bilateral",
        "CTP_STATUS_PAIR",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping syntax check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = write_program(dir.path());
    for std in ["-std=c99", "-std=c11"] {
        let o = Command::new(cc)
            .args([std, "-Wall", "-Werror", "-fsyntax-only", "-I", HEADER_DIR])
            .arg(&src)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping link check");
        return;
    };
    // Test executables live in <target>/<profile>/deps.
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let archive = profile_dir.join("libctpurify_ffi.a");
    if !archive.is_file() {
        eprintln!("{} not built; skipping link check", archive.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = write_program(dir.path());
    let bin = dir.path().join("smoke");
    let o = Command::new(cc)
        .args(["-std=c99", "-I", HEADER_DIR])
        .arg(&src)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let out = String::from_utf8(run.stdout).unwrap();
    let fields: Vec<&str> = out.split_whitespace().collect();
    assert_eq!(fields[0], "64");
    assert!(fields[1].parse::<usize>().unwrap() > 0);
    assert_eq!(fields[2], env!("CARGO_PKG_VERSION"));
}
