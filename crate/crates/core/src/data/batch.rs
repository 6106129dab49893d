use rand::seq::SliceRandom;

use super::augment::{augment, AugmentationSpec};
use super::image::{decode_image, normalize, ImageTensor, Normalization};
use super::scan::ImageRecord;
use crate::error::{Error, Result};
use crate::model::{adapt_input, InputAdapterPolicy};
use crate::rng;
use crate::workers;

const SHUFFLE_STREAM: u64 = 0x5bff;
const AUGMENT_STREAM: u64 = 0xa06;

#[derive(Clone, Debug)]
pub struct Batch {
    pub images: Vec<ImageTensor>,
    pub labels: Vec<usize>,
    pub record_refs: Vec<ImageRecord>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Builds a batch from already-prepared images.
    pub fn from_parts(images: Vec<ImageTensor>, record_refs: Vec<ImageRecord>) -> Self {
        let labels = record_refs.iter().map(|r| r.label_index).collect();
        Batch {
            images,
            labels,
            record_refs,
        }
    }
}

/// Everything needed to turn a record into a model-ready tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct LoaderSettings {
    pub adapter: InputAdapterPolicy,
    pub normalization: Normalization,
    pub workers: usize,
}

impl Default for LoaderSettings {
    fn default() -> Self {
        LoaderSettings {
            adapter: InputAdapterPolicy::default(),
            normalization: Normalization::Unit0To1,
            workers: workers::configured_workers(),
        }
    }
}

impl LoaderSettings {
    /// Decode → adapt → normalize. No augmentation.
    pub fn prepare(&self, record: &ImageRecord) -> Result<ImageTensor> {
        let raw = decode_image(&record.path)?;
        let adapted = adapt_input(&raw, &self.adapter)?;
        normalize(&adapted, self.normalization)
    }
}

/// Index groups for one epoch. With `shuffle`, the permutation depends only
/// on `(seed, epoch)`.
pub fn plan_batches(
    n: usize,
    batch_size: usize,
    shuffle: bool,
    seed: u64,
    epoch: usize,
) -> Result<Vec<Vec<usize>>> {
    if batch_size < 1 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut rng::stream(seed, &[SHUFFLE_STREAM, epoch as u64]));
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Produces batches for a record stream, epoch by epoch.
#[derive(Clone, Debug)]
pub struct BatchLoader<'a> {
    records: &'a [ImageRecord],
    batch_size: usize,
    shuffle: bool,
    seed: u64,
    augmentation: Option<AugmentationSpec>,
    settings: LoaderSettings,
}

impl<'a> BatchLoader<'a> {
    pub fn new(
        records: &'a [ImageRecord],
        batch_size: usize,
        shuffle: bool,
        seed: u64,
        augmentation: Option<AugmentationSpec>,
        settings: LoaderSettings,
    ) -> Result<Self> {
        if batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if records.is_empty() {
            return Err(Error::Config("cannot batch an empty record stream".into()));
        }
        if let Some(spec) = &augmentation {
            spec.validate()?;
        }
        Ok(BatchLoader {
            records,
            batch_size,
            shuffle,
            seed,
            augmentation,
            settings,
        })
    }

    pub fn num_batches(&self) -> usize {
        self.records.len().div_ceil(self.batch_size)
    }

    pub fn records(&self) -> &'a [ImageRecord] {
        self.records
    }

    /// Lazily loads the batches of `epoch` in order.
    pub fn epoch(&self, epoch: usize) -> impl Iterator<Item = Result<Batch>> + '_ {
        let plan = plan_batches(self.records.len(), self.batch_size, self.shuffle, self.seed, epoch)
            .expect("batch_size validated in new");
        plan.into_iter().map(move |group| self.load_group(&group, epoch))
    }

    fn load_group(&self, group: &[usize], epoch: usize) -> Result<Batch> {
        let images = workers::ordered_map(group, self.settings.workers, |&i| {
            let t = self.settings.prepare(&self.records[i])?;
            Ok(match &self.augmentation {
                Some(spec) => {
                    let mut draw = rng::stream(spec.seed, &[AUGMENT_STREAM, epoch as u64, i as u64]);
                    augment(&t, spec, &mut draw)
                }
                None => t,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let record_refs = group.iter().map(|&i| self.records[i].clone()).collect();
        Ok(Batch::from_parts(images, record_refs))
    }
}

/// Loads every batch of epoch 0 eagerly. Augmentation, when given, is
/// meant for the training stream only.
pub fn make_batches(
    records: &[ImageRecord],
    batch_size: usize,
    shuffle: bool,
    seed: u64,
    augmentation: Option<AugmentationSpec>,
    settings: &LoaderSettings,
) -> Result<Vec<Batch>> {
    let loader = BatchLoader::new(records, batch_size, shuffle, seed, augmentation, settings.clone())?;
    loader.epoch(0).collect()
}
