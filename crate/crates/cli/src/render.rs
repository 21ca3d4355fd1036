use image::Rgb;
use rxnseq::augment::RasterImage;
use rxnseq::schema::{BBox, DiagramRecord, EntityType, Role};

fn role_color(role: Role) -> Rgb<u8> {
    match role {
        Role::Reactant => Rgb([214, 39, 40]),
        Role::Condition => Rgb([44, 160, 44]),
        Role::Product => Rgb([31, 119, 180]),
    }
}

/// Outline width in pixels and dash period (0 for a solid line).
fn style(etype: EntityType) -> (u32, u32) {
    match etype {
        EntityType::Mol => (3, 0),
        EntityType::Txt => (2, 8),
        EntityType::Idt => (2, 4),
    }
}

fn draw_box(img: &mut RasterImage, b: &BBox, color: Rgb<u8>, thickness: u32, dash: u32) {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return;
    }
    let x1 = (b.x1.max(0.0) as u32).min(w - 1);
    let y1 = (b.y1.max(0.0) as u32).min(h - 1);
    let x2 = (b.x2.max(0.0).ceil() as u32).clamp(x1 + 1, w) - 1;
    let y2 = (b.y2.max(0.0).ceil() as u32).clamp(y1 + 1, h) - 1;
    let on = |i: u32| dash == 0 || (i / dash).is_multiple_of(2);
    for t in 0..thickness {
        for x in x1..=x2 {
            if on(x - x1) {
                for y in [y1.saturating_add(t).min(y2), y2.saturating_sub(t).max(y1)] {
                    img.put_pixel(x, y, color);
                }
            }
        }
        for y in y1..=y2 {
            if on(y - y1) {
                for x in [x1.saturating_add(t).min(x2), x2.saturating_sub(t).max(x1)] {
                    img.put_pixel(x, y, color);
                }
            }
        }
    }
}

/// One copy of `img` per reaction with its entities outlined: color by role, line by type.
pub fn overlays(img: &RasterImage, record: &DiagramRecord) -> Vec<RasterImage> {
    record
        .reactions
        .iter()
        .map(|rxn| {
            let mut out = img.clone();
            for role in Role::ALL {
                for id in rxn.role(role) {
                    if let Some(e) = record.entity(*id) {
                        let (thickness, dash) = style(e.etype);
                        draw_box(&mut out, &e.bbox, role_color(role), thickness, dash);
                    }
                }
            }
            out
        })
        .collect()
}
