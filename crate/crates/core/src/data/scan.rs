use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::split::{Split, SplitAssignment, SplitFractions};
use crate::error::{Error, Result};

/// Image file extensions picked up by the scanner, matched case-insensitively.
pub const ALLOWED_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png"];

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImageRecord {
    pub path: PathBuf,
    pub label: String,
    pub label_index: usize,
}

/// A file that was seen during a scan but not admitted to the index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanWarning {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub records: Vec<ImageRecord>,
    /// Lexicographically sorted; a record's `label_index` points into this.
    pub class_names: Vec<String>,
    pub counts: Vec<usize>,
    #[serde(default)]
    pub warnings: Vec<ScanWarning>,
}

impl DatasetIndex {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }
}

pub fn is_allowed_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            let e = e.to_ascii_lowercase();
            ALLOWED_EXTENSIONS.contains(&e.as_str())
        })
        .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Checks that a file opens and that its header parses. Full decoding is
/// deferred to load time.
fn probe_image(path: &Path) -> std::result::Result<(), String> {
    image::ImageReader::open(path)
        .map_err(|e| e.to_string())?
        .with_guessed_format()
        .map_err(|e| e.to_string())?
        .into_dimensions()
        .map(|_| ())
        .map_err(|e| e.to_string())
}

/// Scans `root/<class>/*` into an index. Each immediate subdirectory of
/// `root` is one class.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetIndex> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Config(format!(
            "dataset root {} does not exist or is not a directory",
            root.display()
        )));
    }

    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(Error::Dataset(format!(
            "no class subdirectories under {}",
            root.display()
        )));
    }

    let mut by_class: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for dir in &class_dirs {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Dataset(format!("non-UTF-8 class directory {}", dir.display())))?
            .to_string();
        let mut files = Vec::new();
        for path in sorted_entries(dir)? {
            if !path.is_file() {
                continue;
            }
            if !is_allowed_extension(&path) {
                warnings.push(ScanWarning {
                    path,
                    reason: "extension not in jpg/jpeg/png".into(),
                });
                continue;
            }
            match probe_image(&path) {
                Ok(()) => files.push(path),
                Err(reason) => warnings.push(ScanWarning { path, reason }),
            }
        }
        if files.is_empty() {
            return Err(Error::Dataset(format!(
                "class '{name}' has no readable images in {}",
                dir.display()
            )));
        }
        by_class.insert(name, files);
    }

    for w in &warnings {
        log::warn!("skipping {}: {}", w.path.display(), w.reason);
    }

    let class_names: Vec<String> = by_class.keys().cloned().collect();
    let counts = by_class.values().map(Vec::len).collect();
    let records = by_class
        .into_iter()
        .enumerate()
        .flat_map(|(label_index, (label, files))| {
            files.into_iter().map(move |path| ImageRecord {
                path,
                label: label.clone(),
                label_index,
            })
        })
        .collect();

    Ok(DatasetIndex {
        root: root.to_path_buf(),
        records,
        class_names,
        counts,
        warnings,
    })
}

/// Reads a pre-split layout `root/{train,validation,test}/<class>/*`.
///
/// `train` is required; missing `validation` or `test` directories yield
/// empty streams. Class names must agree across the splits present.
pub fn scan_presplit(root: impl AsRef<Path>) -> Result<(SplitAssignment, Vec<String>)> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Config(format!(
            "dataset root {} does not exist or is not a directory",
            root.display()
        )));
    }
    let train_dir = root.join(Split::Train.as_str());
    if !train_dir.is_dir() {
        return Err(Error::Dataset(format!(
            "pre-split layout requires {}",
            train_dir.display()
        )));
    }
    let train = scan_dataset(&train_dir)?;
    let class_names = train.class_names.clone();

    let mut streams = Vec::new();
    for split in [Split::Validation, Split::Test] {
        let dir = root.join(split.as_str());
        if !dir.is_dir() {
            streams.push(Vec::new());
            continue;
        }
        let index = scan_dataset(&dir)?;
        let mut records = index.records;
        for r in &mut records {
            r.label_index = class_names.iter().position(|c| *c == r.label).ok_or_else(|| {
                Error::Dataset(format!(
                    "class '{}' in {} is absent from the train split",
                    r.label,
                    dir.display()
                ))
            })?;
        }
        streams.push(records);
    }
    let test = streams.pop().unwrap_or_default();
    let validation = streams.pop().unwrap_or_default();

    let total = (train.records.len() + validation.len() + test.len()) as f64;
    let fractions = SplitFractions {
        train: train.records.len() as f64 / total,
        validation: validation.len() as f64 / total,
        test: test.len() as f64 / total,
    };
    Ok((
        SplitAssignment {
            train: train.records,
            validation,
            test,
            seed: 0,
            fractions,
        },
        class_names,
    ))
}
