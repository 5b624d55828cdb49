#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;

use ctpurify::raster::{BinaryMask, Image};
use sha2::{Digest, Sha256};

/// Exhaustive Otsu: for every candidate split `k` the pixels are classified
/// directly (no prefix sums) and the between-class variance
/// `ω0 ω1 (μ0 - μ1)²` is compared as an exact rational. With `n0, n1` the
/// class sizes and `s0, s1` their bin-index sums this variance equals
/// `(n1 s0 - n0 s1)² / (n0 n1 n²)`; `n²` is common to all `k`.
pub fn otsu_oracle(img: &Image, bins: usize) -> Option<usize> {
    let bin_of: Vec<usize> = img
        .data()
        .iter()
        .map(|&v| {
            // Smallest k with v < (k + 1) / bins, found by linear search.
            (0..bins)
                .find(|&k| v < (k + 1) as f64 / bins as f64)
                .unwrap_or(bins - 1)
        })
        .collect();
    let mut best: Option<(usize, u128, u128)> = None;
    for k in 1..bins {
        let (mut n0, mut n1, mut s0, mut s1) = (0u128, 0u128, 0u128, 0u128);
        for &b in &bin_of {
            if b < k {
                n0 += 1;
                s0 += b as u128;
            } else {
                n1 += 1;
                s1 += b as u128;
            }
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let d = (n1 * s0).abs_diff(n0 * s1);
        let (num, den) = (d * d, n0 * n1);
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((k, num, den));
        }
    }
    best.map(|(k, _, _)| k)
}

/// Zero pixels reachable from a zero corner through 4-neighbours, by plain
/// breadth-first search.
pub fn bfs_background(mask: &BinaryMask) -> Vec<bool> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    for (x, y) in [(0, 0), (w - 1, 0), (0, h - 1), (w - 1, h - 1)] {
        if !mask.get(x, y) && !seen[y * w + x] {
            seen[y * w + x] = true;
            queue.push_back((x, y));
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let mut next = Vec::with_capacity(4);
        if x > 0 {
            next.push((x - 1, y));
        }
        if x + 1 < w {
            next.push((x + 1, y));
        }
        if y > 0 {
            next.push((x, y - 1));
        }
        if y + 1 < h {
            next.push((x, y + 1));
        }
        for (nx, ny) in next {
            if !mask.get(nx, ny) && !seen[ny * w + nx] {
                seen[ny * w + nx] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    seen
}

/// SHA-256 of every file under `root`, keyed by relative path.
pub fn tree_hash(root: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, hex::encode(Sha256::digest(fs::read(&p).unwrap())));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Population variance computed in two passes.
pub fn two_pass_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}
