//! Training-time augmentation: vertical composition of diagrams followed by
//! annotation-preserving image transforms (rotation, flips, color jitter, resize, pad).
//!
//! All randomness comes from the caller's RNG. [`sample_rng`] derives an independent,
//! reproducible stream per sample so batches can be generated in parallel.

mod compose;
mod transform;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use compose::{compose_vertical, compose_vertical_at};
pub use transform::{apply_transform, draw_transform, transform, TransformParams};

use crate::schema::{validate_record, Dataset, DiagramRecord, Violation};

/// Owned RGB raster, 8 bits per channel, row-major.
pub type RasterImage = image::RgbImage;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub compose_probability: f64,
    pub max_compose: usize,
    /// Ratio between the probabilities of composing `k + 1` and `k` diagrams.
    pub decay_ratio: f64,
    /// Rotation angle is drawn from `[-rotation_degrees, rotation_degrees]`.
    pub rotation_degrees: f64,
    pub hflip_probability: f64,
    pub vflip_probability: f64,
    /// Brightness, contrast and saturation factors are drawn from `[1 - a, 1 + a]`.
    pub color_jitter: f64,
    /// Long side after resizing, and the side of the square output canvas.
    pub target_size: u32,
    pub pad_color: [u8; 3],
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            compose_probability: 0.5,
            max_compose: 6,
            decay_ratio: 0.5,
            rotation_degrees: 5.0,
            hflip_probability: 0.5,
            vflip_probability: 0.1,
            color_jitter: 0.2,
            target_size: 1333,
            pad_color: [255, 255, 255],
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |m: String| Err(AugmentError::InvalidConfig(m));
        for (name, p) in [
            ("compose_probability", self.compose_probability),
            ("decay_ratio", self.decay_ratio),
            ("hflip_probability", self.hflip_probability),
            ("vflip_probability", self.vflip_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.max_compose < 2 {
            return bad(format!(
                "max_compose must be at least 2, got {}",
                self.max_compose
            ));
        }
        if self.target_size == 0 {
            return bad("target_size must be positive".into());
        }
        if !(0.0..=180.0).contains(&self.rotation_degrees) {
            return bad(format!(
                "rotation_degrees must be in [0, 180], got {}",
                self.rotation_degrees
            ));
        }
        if !(0.0..=1.0).contains(&self.color_jitter) {
            return bad(format!(
                "color_jitter must be in [0, 1], got {}",
                self.color_jitter
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error("composition needs at least 2 diagrams, got {0}")]
    TooFewDiagrams(usize),
    #[error("{0} horizontal offsets given for {1} diagrams")]
    OffsetCount(usize, usize),
    #[error("offset {offset} places image {image_id} outside a canvas of width {canvas}")]
    OffsetOutOfRange {
        image_id: u64,
        offset: u32,
        canvas: u32,
    },
    #[error("record {image_id} is invalid: {violations:?}")]
    InvalidRecord {
        image_id: u64,
        violations: Vec<Violation>,
    },
    #[error("image for record {image_id} is {actual:?}, record says {expected:?}")]
    ImageSizeMismatch {
        image_id: u64,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("cannot read image {}: {source}", .path.display())]
    MissingImage {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("no image for record {0}")]
    NoImage(u64),
    #[error("the pool is empty")]
    EmptyPool,
}

pub(crate) fn check_record(record: &DiagramRecord) -> Result<(), AugmentError> {
    let violations = validate_record(record);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(AugmentError::InvalidRecord {
            image_id: record.image_id,
            violations,
        })
    }
}

pub(crate) fn check_pair(img: &RasterImage, record: &DiagramRecord) -> Result<(), AugmentError> {
    check_record(record)?;
    if img.dimensions() != (record.width, record.height) {
        return Err(AugmentError::ImageSizeMismatch {
            image_id: record.image_id,
            expected: (record.width, record.height),
            actual: img.dimensions(),
        });
    }
    Ok(())
}

/// Source of diagram images keyed by their records.
pub trait ImageStore {
    fn load(&self, record: &DiagramRecord) -> Result<RasterImage, AugmentError>;
}

/// PNG files under a directory, named by `file_name`.
#[derive(Debug, Clone)]
pub struct DirImageStore {
    root: PathBuf,
}

impl DirImageStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_of(&self, record: &DiagramRecord) -> PathBuf {
        self.root.join(&record.file_name)
    }
}

impl ImageStore for DirImageStore {
    fn load(&self, record: &DiagramRecord) -> Result<RasterImage, AugmentError> {
        let path = self.path_of(record);
        let img = image::open(&path).map_err(|source| AugmentError::MissingImage {
            path: path.clone(),
            source,
        })?;
        Ok(img.to_rgb8())
    }
}

/// In-memory images keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct MemoryImageStore {
    pub images: HashMap<u64, RasterImage>,
}

impl ImageStore for MemoryImageStore {
    fn load(&self, record: &DiagramRecord) -> Result<RasterImage, AugmentError> {
        self.images
            .get(&record.image_id)
            .cloned()
            .ok_or(AugmentError::NoImage(record.image_id))
    }
}

/// Save a raster as PNG.
pub fn save_png(img: &RasterImage, path: &Path) -> Result<(), image::ImageError> {
    img.save_with_format(path, image::ImageFormat::Png)
}

/// Number of diagrams to compose: `k` in `2..=max_compose` with probability
/// proportional to `decay_ratio^(k - 2)`.
pub fn sample_compose_count<R: Rng + ?Sized>(config: &AugmentConfig, rng: &mut R) -> usize {
    let weights: Vec<f64> = (0..=config.max_compose - 2)
        .map(|i| config.decay_ratio.powi(i as i32))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i + 2;
        }
        u -= w;
    }
    // rounding left u at the tail; give it to the last bucket with weight
    2 + weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Deterministic RNG for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One augmented training sample drawn from `pool`.
///
/// With probability `compose_probability`, `k` diagrams are drawn uniformly with replacement
/// and stacked vertically; otherwise one diagram is drawn. The result is then transformed.
/// A single-diagram result keeps its source id and file name; a composite gets id 0 and an
/// empty file name, to be set by the caller.
pub fn augment_sample<S: ImageStore + ?Sized, R: Rng + ?Sized>(
    pool: &Dataset,
    images: &S,
    config: &AugmentConfig,
    rng: &mut R,
) -> Result<(RasterImage, DiagramRecord), AugmentError> {
    config.validate()?;
    if pool.is_empty() {
        return Err(AugmentError::EmptyPool);
    }
    let (img, record) = if rng.random_bool(config.compose_probability) {
        let k = sample_compose_count(config, rng);
        let picks = (0..k)
            .map(|_| {
                let r = &pool.records[rng.random_range(0..pool.len())];
                Ok((images.load(r)?, r.clone()))
            })
            .collect::<Result<Vec<_>, AugmentError>>()?;
        compose_vertical(&picks, config.pad_color, rng)?
    } else {
        let r = &pool.records[rng.random_range(0..pool.len())];
        (images.load(r)?, r.clone())
    };
    transform(&img, &record, config, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        let mut c = AugmentConfig {
            max_compose: 1,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.max_compose = 6;
        c.hflip_probability = 1.5;
        assert!(c.validate().is_err());
        c.hflip_probability = 0.5;
        c.target_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_decay_always_two() {
        let c = AugmentConfig {
            decay_ratio: 0.0,
            ..Default::default()
        };
        let mut rng = sample_rng(1, 0);
        for _ in 0..1000 {
            assert_eq!(sample_compose_count(&c, &mut rng), 2);
        }
    }

    #[test]
    fn counts_stay_in_range() {
        let c = AugmentConfig {
            decay_ratio: 1.0,
            max_compose: 3,
            ..Default::default()
        };
        let mut rng = sample_rng(2, 0);
        let mut seen = [0usize; 4];
        for _ in 0..1000 {
            seen[sample_compose_count(&c, &mut rng)] += 1;
        }
        assert_eq!(seen[0] + seen[1], 0);
        assert!(seen[2] > 400 && seen[3] > 400);
    }

    #[test]
    fn sample_rng_streams_differ() {
        let a: u64 = sample_rng(5, 0).random();
        let b: u64 = sample_rng(5, 1).random();
        let a2: u64 = sample_rng(5, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}
