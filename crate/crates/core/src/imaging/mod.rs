//! Image I/O, bicubic resampling, training-pair preparation and manifests.

mod image;
mod manifest;
mod pair;
mod resize;
mod synthetic;

pub use self::image::{load_image, save_gray16, save_image, to_u8, ImageTensor};
pub use manifest::{scan_manifest, DatasetManifest, ManifestEntry, SkippedFile, Split};
pub use pair::{augment_pair, center_origin, make_pair, AugmentConfig, PairGeometry, TrainingPair, Transform};
pub use resize::{bicubic_resize, cubic_kernel};
pub use synthetic::{synthetic_image, synthetic_pairs};
