//! JSON split manifests: relative path → `{"split", "label"}`.

use std::collections::BTreeMap;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};

use super::scan::ImageRecord;
use super::split::{Split, SplitAssignment, SplitFractions};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub split: Split,
    pub label: String,
}

pub type SplitManifest = BTreeMap<String, ManifestEntry>;

fn relative_key(root: &Path, path: &Path) -> Result<String> {
    let rel = path.strip_prefix(root).map_err(|_| {
        Error::Dataset(format!(
            "{} is not under dataset root {}",
            path.display(),
            root.display()
        ))
    })?;
    let parts: Vec<&str> = rel
        .components()
        .map(|c| match c {
            Component::Normal(s) => s.to_str().ok_or_else(|| {
                Error::Dataset(format!("non-UTF-8 path {}", path.display()))
            }),
            _ => Err(Error::Dataset(format!("unexpected path component in {}", rel.display()))),
        })
        .collect::<Result<_>>()?;
    Ok(parts.join("/"))
}

pub fn manifest_for(assignment: &SplitAssignment, root: &Path) -> Result<SplitManifest> {
    let mut manifest = SplitManifest::new();
    for split in Split::ALL {
        for r in assignment.get(split) {
            let key = relative_key(root, &r.path)?;
            let entry = ManifestEntry {
                split,
                label: r.label.clone(),
            };
            if manifest.insert(key.clone(), entry).is_some() {
                return Err(Error::Dataset(format!("{key} assigned to more than one split")));
            }
        }
    }
    Ok(manifest)
}

/// Writes the manifest as pretty JSON with sorted keys, so equal
/// assignments give identical bytes.
pub fn write_manifest(assignment: &SplitAssignment, root: &Path, path: &Path) -> Result<SplitManifest> {
    let manifest = manifest_for(assignment, root)?;
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(manifest)
}

/// Rebuilds a split assignment from a manifest. Records are ordered by
/// (class, path) within each split, matching a fresh scan.
pub fn load_manifest(path: &Path, root: &Path) -> Result<(SplitAssignment, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: SplitManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid split manifest {}: {e}", path.display())))?;
    if manifest.is_empty() {
        return Err(Error::Dataset(format!("split manifest {} is empty", path.display())));
    }

    let mut class_names: Vec<String> = manifest.values().map(|e| e.label.clone()).collect();
    class_names.sort();
    class_names.dedup();

    let mut lists: [Vec<ImageRecord>; 3] = Default::default();
    for (key, entry) in &manifest {
        let record = ImageRecord {
            path: root.join(key),
            label: entry.label.clone(),
            label_index: class_names.binary_search(&entry.label).expect("label collected above"),
        };
        let slot = Split::ALL.iter().position(|s| *s == entry.split).expect("known split");
        lists[slot].push(record);
    }
    for list in &mut lists {
        list.sort_by(|a, b| (a.label_index, &a.path).cmp(&(b.label_index, &b.path)));
    }
    let total = manifest.len() as f64;
    let [train, validation, test] = lists;
    let fractions = SplitFractions::new(
        train.len() as f64 / total,
        validation.len() as f64 / total,
        test.len() as f64 / total,
    );
    Ok((
        SplitAssignment {
            train,
            validation,
            test,
            seed: 0,
            fractions,
        },
        class_names,
    ))
}
