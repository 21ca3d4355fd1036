//! Seeded generators of valid records, images and logit sources for tests and benchmarks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::RasterImage;
use crate::codec::TokenId;
use crate::decoder::{LogitSource, SourceError};
use crate::schema::{BBox, Dataset, DiagramRecord, Entity, EntityType, Reaction, Style};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub max_reactions: usize,
    /// At least 1 and at most 16.
    pub max_entities: usize,
    pub min_side: u32,
    pub max_side: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            max_reactions: 8,
            max_entities: 10,
            min_side: 200,
            max_side: 1200,
        }
    }
}

const GRID: usize = 4;

fn pick<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: usize, hi: usize) -> Vec<u32> {
    let k = rng.random_range(lo.min(n)..=hi.min(n));
    sample(rng, n, k).into_iter().map(|i| i as u32).collect()
}

/// A valid record. Entities sit in distinct cells of a 4x4 grid and cover at least 40% of
/// their cell along each axis, so boxes never overlap and survive coarse quantization.
/// Reactions within a record are pairwise distinct.
pub fn random_record<R: Rng + ?Sized>(
    rng: &mut R,
    image_id: u64,
    cfg: &SynthConfig,
) -> DiagramRecord {
    let width = rng.random_range(cfg.min_side..=cfg.max_side);
    let height = rng.random_range(cfg.min_side..=cfg.max_side);
    let n_ent = rng.random_range(1..=cfg.max_entities.clamp(1, GRID * GRID));
    let (cw, ch) = (
        f64::from(width) / GRID as f64,
        f64::from(height) / GRID as f64,
    );
    let entities: Vec<Entity> = sample(rng, GRID * GRID, n_ent)
        .into_iter()
        .enumerate()
        .map(|(id, cell)| {
            let (cx, cy) = ((cell % GRID) as f64 * cw, (cell / GRID) as f64 * ch);
            let bw = rng.random_range(0.4..0.9) * cw;
            let bh = rng.random_range(0.4..0.9) * ch;
            let x1 = cx + rng.random_range(0.0..(cw - bw));
            let y1 = cy + rng.random_range(0.0..(ch - bh));
            let etype = EntityType::ALL[rng.random_range(0..3)];
            Entity::new(id as u32, BBox::new(x1, y1, x1 + bw, y1 + bh), etype)
        })
        .collect();

    let target = rng.random_range(0..=cfg.max_reactions);
    let mut reactions: Vec<Reaction> = Vec::with_capacity(target);
    let mut attempts = 0;
    while reactions.len() < target && attempts < 20 * (target + 1) {
        attempts += 1;
        let mut r = Reaction {
            reactants: pick(rng, n_ent, 1, 3),
            conditions: pick(rng, n_ent, 0, 2),
            products: pick(rng, n_ent, 1, 3),
        };
        r.reactants.sort_unstable();
        r.conditions.sort_unstable();
        r.products.sort_unstable();
        if !reactions.contains(&r) {
            reactions.push(r);
        }
    }
    DiagramRecord {
        image_id,
        file_name: format!("{image_id}.png"),
        width,
        height,
        style: Style::ALL[rng.random_range(0..Style::ALL.len())],
        entities,
        reactions,
    }
}

pub fn random_dataset(seed: u64, n: usize, cfg: &SynthConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset::new(
        (0..n as u64)
            .map(|i| random_record(&mut rng, i + 1, cfg))
            .collect(),
    )
}

/// White canvas with each entity box filled by a color derived from its id and type.
pub fn render_record(record: &DiagramRecord) -> RasterImage {
    let mut img = RasterImage::from_pixel(record.width, record.height, image::Rgb([255, 255, 255]));
    for e in &record.entities {
        let base = match e.etype {
            EntityType::Mol => [40u8, 40, 200],
            EntityType::Txt => [200, 40, 40],
            EntityType::Idt => [40, 160, 40],
        };
        let shade = (e.id % 8) as u8 * 6;
        let color = image::Rgb(base.map(|c| c.saturating_add(shade)));
        let x0 = e.bbox.x1.floor().max(0.0) as u32;
        let y0 = e.bbox.y1.floor().max(0.0) as u32;
        let x1 = (e.bbox.x2.ceil() as u32).min(record.width);
        let y1 = (e.bbox.y2.ceil() as u32).min(record.height);
        for y in y0..y1 {
            for x in x0..x1 {
                img.put_pixel(x, y, color);
            }
        }
    }
    img
}

/// Uniform noise image.
pub fn noise_image<R: Rng + ?Sized>(rng: &mut R, width: u32, height: u32) -> RasterImage {
    RasterImage::from_fn(width, height, |_, _| image::Rgb(rng.random()))
}

/// Independent standard-uniform scores at every step.
#[derive(Debug, Clone)]
pub struct RandomLogits {
    rng: ChaCha8Rng,
    vocab_size: usize,
}

impl RandomLogits {
    pub fn new(seed: u64, vocab_size: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            vocab_size,
        }
    }
}

impl LogitSource for RandomLogits {
    fn logits(&mut self, _prefix: &[TokenId]) -> Result<Vec<f32>, SourceError> {
        Ok((0..self.vocab_size).map(|_| self.rng.random()).collect())
    }
}
