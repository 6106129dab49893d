//! Dataset discovery, splitting, image decoding, augmentation and batching.

mod augment;
mod batch;
mod image;
mod manifest;
mod scan;
mod split;

pub use self::augment::{augment, flip_horizontal, resample_affine, AugmentationSpec};
pub use self::batch::{make_batches, plan_batches, Batch, BatchLoader, LoaderSettings};
pub use self::image::{
    decode_image, load_image, normalize, resize_bilinear, ImageTensor, Normalization,
};
pub use self::manifest::{load_manifest, manifest_for, write_manifest, ManifestEntry, SplitManifest};
pub use self::scan::{
    is_allowed_extension, scan_dataset, scan_presplit, DatasetIndex, ImageRecord, ScanWarning,
    ALLOWED_EXTENSIONS,
};
pub use self::split::{split_dataset, Split, SplitAssignment, SplitFractions};
