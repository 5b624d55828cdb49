//! Pair manifests and deterministic train / validation / test splits.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One uLDCT / NDCT pair before split assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSource {
    pub pair_id: String,
    pub uldct_path: PathBuf,
    pub ndct_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEntry {
    pub pair_id: String,
    pub uldct_path: PathBuf,
    pub ndct_path: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Self {
        SplitFractions { train, val, test }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must lie in [0, 1], got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` entries.
    ///
    /// Boundaries are placed at rounded cumulative fractions counted from
    /// the test end (`test = round(n·f_test)`,
    /// `val + test = round(n·(f_val + f_test))`), and train takes the rest.
    /// 4310 entries at 0.70 / 0.15 / 0.15 give 3017 / 646 / 647.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let nf = n as f64;
        let test = ((nf * self.test).round() as usize).min(n);
        let tail = ((nf * (self.val + self.test)).round() as usize).clamp(test, n);
        (n - tail, tail - test, test)
    }
}

#[derive(Deserialize)]
struct RawManifest {
    format_version: u32,
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    pair_id: String,
    uldct_path: PathBuf,
    ndct_path: PathBuf,
    #[serde(default)]
    split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub format_version: u32,
    pub entries: Vec<PairEntry>,
}

/// Assigns every entry to a split. Entries keep their input order; the
/// assignment is drawn from a shuffle seeded by `seed`.
pub fn split_manifest(
    entries: Vec<PairSource>,
    fractions: &SplitFractions,
    seed: u64,
) -> Result<PairManifest> {
    if entries.is_empty() {
        return Err(Error::Manifest("no entries to split".into()));
    }
    fractions.validate()?;
    let n = entries.len();
    let (train, val, _) = fractions.sizes(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    let manifest = PairManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        entries: entries
            .into_iter()
            .zip(splits)
            .map(|(e, split)| PairEntry {
                pair_id: e.pair_id,
                uldct_path: e.uldct_path,
                ndct_path: e.ndct_path,
                split,
            })
            .collect(),
    };
    manifest.validate()?;
    Ok(manifest)
}

impl PairManifest {
    pub fn new(entries: Vec<PairEntry>) -> Result<Self> {
        let m = PairManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            entries,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks the format version and pair id uniqueness.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.pair_id.is_empty() {
                return Err(Error::Manifest("empty pair_id".into()));
            }
            if !seen.insert(e.pair_id.as_str()) {
                return Err(Error::Manifest(format!(
                    "duplicate pair_id '{}'",
                    e.pair_id
                )));
            }
        }
        Ok(())
    }

    /// Pair ids whose image files do not exist.
    pub fn missing_files(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| !e.uldct_path.is_file() || !e.ndct_path.is_file())
            .map(|e| e.pair_id.clone())
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = (usize, &PairEntry)> {
        self.entries
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.split == split)
    }

    /// Reads a manifest whose entries all carry a split. Relative image
    /// paths are resolved against the manifest's directory. File existence
    /// is not checked here; see [`PairManifest::load_checked`].
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_inner(path, None)
    }

    /// Like [`PairManifest::load`], but entries may omit `split` altogether,
    /// in which case they are assigned with [`split_manifest`]. Manifests
    /// where only some entries carry a split are rejected.
    pub fn load_or_split(path: &Path, fractions: &SplitFractions, seed: u64) -> Result<Self> {
        Self::load_inner(path, Some((fractions, seed)))
    }

    fn load_inner(path: &Path, split: Option<(&SplitFractions, u64)>) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let raw: RawManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        if raw.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported format_version {}",
                raw.format_version
            )));
        }
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        let unsplit = raw.entries.iter().filter(|e| e.split.is_none()).count();
        let mut m = if unsplit == 0 {
            PairManifest {
                format_version: raw.format_version,
                entries: raw
                    .entries
                    .into_iter()
                    .map(|e| PairEntry {
                        pair_id: e.pair_id,
                        uldct_path: resolve(e.uldct_path),
                        ndct_path: resolve(e.ndct_path),
                        split: e.split.expect("checked above"),
                    })
                    .collect(),
            }
        } else if unsplit == raw.entries.len() {
            let Some((fractions, seed)) = split else {
                return Err(Error::Manifest(format!(
                    "{}: entries have no split assignment",
                    path.display()
                )));
            };
            let sources = raw
                .entries
                .into_iter()
                .map(|e| PairSource {
                    pair_id: e.pair_id,
                    uldct_path: resolve(e.uldct_path),
                    ndct_path: resolve(e.ndct_path),
                })
                .collect();
            split_manifest(sources, fractions, seed)?
        } else {
            return Err(Error::Manifest(format!(
                "{}: {unsplit} of {} entries lack a split",
                path.display(),
                raw.entries.len()
            )));
        };
        m.format_version = MANIFEST_FORMAT_VERSION;
        m.validate()?;
        Ok(m)
    }

    /// [`PairManifest::load`] plus a check that every referenced file
    /// exists.
    pub fn load_checked(path: &Path) -> Result<Self> {
        let m = Self::load(path)?;
        let missing = m.missing_files();
        if !missing.is_empty() {
            return Err(Error::Manifest(format!(
                "missing image files for pairs: {}",
                missing.join(", ")
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}
