use std::collections::HashMap;

use image::Rgb;
use rand::Rng;

use super::{check_pair, AugmentError, RasterImage};
use crate::schema::{DiagramRecord, Entity, Reaction, Role, Style};

fn composite_style(records: &[&DiagramRecord]) -> Style {
    let max = records
        .iter()
        .map(|r| r.style)
        .max()
        .unwrap_or(Style::SingleLine);
    match max {
        // stacked lines read as a multiple-line scheme
        Style::SingleLine | Style::MultipleLine => Style::MultipleLine,
        other => other,
    }
}

/// Stack diagrams top to bottom with the given horizontal offsets.
///
/// The canvas is as wide as the widest input and as tall as all inputs together; uncovered
/// pixels take `pad`. Entity ids are renumbered from 0 in input order and every box is
/// translated by its diagram's offset. The result has image id 0 and an empty file name.
pub fn compose_vertical_at(
    diagrams: &[(RasterImage, DiagramRecord)],
    x_offsets: &[u32],
    pad: [u8; 3],
) -> Result<(RasterImage, DiagramRecord), AugmentError> {
    if diagrams.len() < 2 {
        return Err(AugmentError::TooFewDiagrams(diagrams.len()));
    }
    if x_offsets.len() != diagrams.len() {
        return Err(AugmentError::OffsetCount(x_offsets.len(), diagrams.len()));
    }
    for (img, rec) in diagrams {
        check_pair(img, rec)?;
    }
    let width = diagrams.iter().map(|(i, _)| i.width()).max().unwrap_or(0);
    let height: u32 = diagrams.iter().map(|(i, _)| i.height()).sum();
    for ((img, rec), &x) in diagrams.iter().zip(x_offsets) {
        if x + img.width() > width {
            return Err(AugmentError::OffsetOutOfRange {
                image_id: rec.image_id,
                offset: x,
                canvas: width,
            });
        }
    }

    let mut canvas = RasterImage::from_pixel(width, height, Rgb(pad));
    let mut entities = Vec::new();
    let mut reactions = Vec::new();
    let mut y = 0u32;
    for ((img, rec), &x) in diagrams.iter().zip(x_offsets) {
        image::imageops::replace(&mut canvas, img, i64::from(x), i64::from(y));
        let mut remap = HashMap::with_capacity(rec.entities.len());
        for ent in &rec.entities {
            let id = entities.len() as u32;
            remap.insert(ent.id, id);
            entities.push(Entity::new(
                id,
                ent.bbox.translate(f64::from(x), f64::from(y)),
                ent.etype,
            ));
        }
        for rxn in &rec.reactions {
            let mut out = Reaction::default();
            for role in Role::ALL {
                *out.role_mut(role) = rxn.role(role).iter().map(|id| remap[id]).collect();
            }
            reactions.push(out);
        }
        y += img.height();
    }
    let record = DiagramRecord {
        image_id: 0,
        file_name: String::new(),
        width,
        height,
        style: composite_style(&diagrams.iter().map(|(_, r)| r).collect::<Vec<_>>()),
        entities,
        reactions,
    };
    Ok((canvas, record))
}

/// [`compose_vertical_at`] with each horizontal offset drawn uniformly from the free width.
pub fn compose_vertical<R: Rng + ?Sized>(
    diagrams: &[(RasterImage, DiagramRecord)],
    pad: [u8; 3],
    rng: &mut R,
) -> Result<(RasterImage, DiagramRecord), AugmentError> {
    if diagrams.len() < 2 {
        return Err(AugmentError::TooFewDiagrams(diagrams.len()));
    }
    let width = diagrams.iter().map(|(i, _)| i.width()).max().unwrap_or(0);
    let offsets: Vec<u32> = diagrams
        .iter()
        .map(|(img, _)| rng.random_range(0..=width - img.width()))
        .collect();
    compose_vertical_at(diagrams, &offsets, pad)
}
