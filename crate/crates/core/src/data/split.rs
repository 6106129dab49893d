use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::scan::{DatasetIndex, ImageRecord};
use crate::error::{Error, Result};
use crate::rng;

const SPLIT_STREAM: u64 = 0x5b11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Split> {
        Split::ALL
            .into_iter()
            .find(|split| split.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown split '{s}'")))
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, validation: f64, test: f64) -> Self {
        SplitFractions {
            train,
            validation,
            test,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.as_array();
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config(format!(
                "split fractions must be finite and non-negative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1 (within 1e-9), got {parts:?} summing to {sum}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<ImageRecord>,
    pub validation: Vec<ImageRecord>,
    pub test: Vec<ImageRecord>,
    pub seed: u64,
    pub fractions: SplitFractions,
}

impl SplitAssignment {
    pub fn get(&self, split: Split) -> &[ImageRecord] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stream used for monitoring during training: the validation split, or
    /// the test split when no validation records were assigned.
    pub fn monitor_stream(&self) -> &[ImageRecord] {
        if self.validation.is_empty() {
            &self.test
        } else {
            &self.validation
        }
    }
}

/// Per-class split sizes: floor of each share, then leftovers handed out in
/// train → validation → test order, skipping splits with a zero fraction.
fn split_sizes(n: usize, fractions: &SplitFractions) -> [usize; 3] {
    let parts = fractions.as_array();
    // 1e-9 absorbs products such as 0.29 * 100 = 28.999999999999996.
    let mut sizes = parts.map(|f| ((f * n as f64) + 1e-9).floor() as usize);
    let mut assigned: usize = sizes.iter().sum();
    while assigned > n {
        // Only reachable through the 1e-9 nudge; take back from the end.
        let i = (0..3).rev().find(|&i| sizes[i] > 0).unwrap_or(0);
        sizes[i] -= 1;
        assigned -= 1;
    }
    let eligible: Vec<usize> = (0..3).filter(|&i| parts[i] > 0.0).collect();
    let mut k = 0;
    while assigned < n {
        sizes[eligible[k % eligible.len()]] += 1;
        assigned += 1;
        k += 1;
    }
    sizes
}

/// Stratified, seeded split of an index into train/validation/test.
///
/// Each class is permuted with its own seeded stream and cut according to
/// `fractions`. Within each split, records keep their index order so that a
/// split rebuilt from a manifest is identical to the original.
pub fn split_dataset(
    index: &DatasetIndex,
    fractions: SplitFractions,
    seed: u64,
) -> Result<SplitAssignment> {
    fractions.validate()?;

    let mut tagged: Vec<(usize, usize)> = Vec::with_capacity(index.len()); // (position, split)
    for class in 0..index.class_names.len() {
        let mut members: Vec<usize> = index
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label_index == class)
            .map(|(i, _)| i)
            .collect();
        let mut stream = rng::stream(seed, &[SPLIT_STREAM, class as u64]);
        members.shuffle(&mut stream);

        let [n_train, n_val, _] = split_sizes(members.len(), &fractions);
        for (rank, pos) in members.into_iter().enumerate() {
            let split = if rank < n_train {
                0
            } else if rank < n_train + n_val {
                1
            } else {
                2
            };
            tagged.push((pos, split));
        }
    }
    tagged.sort_unstable();

    let mut lists: [Vec<ImageRecord>; 3] = Default::default();
    for (pos, split) in tagged {
        lists[split].push(index.records[pos].clone());
    }
    let [train, validation, test] = lists;
    Ok(SplitAssignment {
        train,
        validation,
        test,
        seed,
        fractions,
    })
}
