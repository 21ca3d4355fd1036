use image::imageops::{self, FilterType};
use image::Rgb;
use rand::Rng;

use super::{check_pair, AugmentConfig, AugmentError, RasterImage};
use crate::schema::{clip_bbox, BBox, DiagramRecord};

/// Concrete draw of the random transform. Factors of 1 and an angle of 0 are no-ops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    /// Counter-clockwise in image coordinates (y down), degrees.
    pub rotation_degrees: f64,
    pub hflip: bool,
    pub vflip: bool,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl TransformParams {
    pub const IDENTITY: TransformParams = TransformParams {
        rotation_degrees: 0.0,
        hflip: false,
        vflip: false,
        brightness: 1.0,
        contrast: 1.0,
        saturation: 1.0,
    };
}

pub fn draw_transform<R: Rng + ?Sized>(config: &AugmentConfig, rng: &mut R) -> TransformParams {
    let r = config.rotation_degrees;
    let rotation_degrees = if r > 0.0 {
        rng.random_range(-r..=r)
    } else {
        0.0
    };
    let hflip = rng.random_bool(config.hflip_probability);
    let vflip = rng.random_bool(config.vflip_probability);
    let a = config.color_jitter;
    let mut factor = || {
        if a > 0.0 {
            rng.random_range(1.0 - a..=1.0 + a)
        } else {
            1.0
        }
    };
    let brightness = factor();
    let contrast = factor();
    let saturation = factor();
    TransformParams {
        rotation_degrees,
        hflip,
        vflip,
        brightness,
        contrast,
        saturation,
    }
}

fn rotate_point(x: f64, y: f64, cx: f64, cy: f64, cos: f64, sin: f64) -> (f64, f64) {
    let (dx, dy) = (x - cx, y - cy);
    (cx + cos * dx - sin * dy, cy + sin * dx + cos * dy)
}

/// Rotate about the image center on the same canvas. Boxes become the hull of their rotated
/// corners, clipped to the canvas.
fn rotate(img: &RasterImage, boxes: &mut [BBox], degrees: f64, pad: [u8; 3]) -> RasterImage {
    let (w, h) = img.dimensions();
    let (cx, cy) = (f64::from(w) / 2.0, f64::from(h) / 2.0);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let out = RasterImage::from_fn(w, h, |u, v| {
        // inverse mapping from the output pixel center
        let (sx, sy) = rotate_point(f64::from(u) + 0.5, f64::from(v) + 0.5, cx, cy, cos, -sin);
        let (fx, fy) = (sx.floor(), sy.floor());
        if fx >= 0.0 && fy >= 0.0 && fx < f64::from(w) && fy < f64::from(h) {
            *img.get_pixel(fx as u32, fy as u32)
        } else {
            Rgb(pad)
        }
    });
    for b in boxes.iter_mut() {
        let corners = [(b.x1, b.y1), (b.x2, b.y1), (b.x1, b.y2), (b.x2, b.y2)]
            .map(|(x, y)| rotate_point(x, y, cx, cy, cos, sin));
        let xs = corners.map(|c| c.0);
        let ys = corners.map(|c| c.1);
        let hull = BBox::new(
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            ys.iter().copied().fold(f64::INFINITY, f64::min),
            xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        *b = clip_bbox(hull, f64::from(w), f64::from(h));
    }
    out
}

fn luma(p: &Rgb<u8>) -> f64 {
    0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
}

fn color_jitter(img: &mut RasterImage, brightness: f64, contrast: f64, saturation: f64) {
    let to_u8 = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    if brightness != 1.0 {
        for p in img.pixels_mut() {
            p.0 = p.0.map(|c| to_u8(f64::from(c) * brightness));
        }
    }
    if contrast != 1.0 {
        let n = f64::from(img.width()) * f64::from(img.height());
        let mean = if n > 0.0 {
            img.pixels().map(luma).sum::<f64>() / n
        } else {
            0.0
        };
        for p in img.pixels_mut() {
            p.0 = p.0.map(|c| to_u8(mean + (f64::from(c) - mean) * contrast));
        }
    }
    if saturation != 1.0 {
        for p in img.pixels_mut() {
            let g = luma(p);
            p.0 = p.0.map(|c| to_u8(g + (f64::from(c) - g) * saturation));
        }
    }
}

/// Apply a concrete transform: rotation, flips, color jitter, then resize so the long side
/// equals `target_size` and pad to a `target_size` square anchored at the top-left corner.
pub fn apply_transform(
    img: &RasterImage,
    record: &DiagramRecord,
    params: &TransformParams,
    target_size: u32,
    pad: [u8; 3],
) -> Result<(RasterImage, DiagramRecord), AugmentError> {
    check_pair(img, record)?;
    let (w, h) = img.dimensions();
    let (wf, hf) = (f64::from(w), f64::from(h));
    let mut boxes: Vec<BBox> = record.entities.iter().map(|e| e.bbox).collect();

    let mut cur = if params.rotation_degrees != 0.0 {
        rotate(img, &mut boxes, params.rotation_degrees, pad)
    } else {
        img.clone()
    };
    if params.hflip {
        imageops::flip_horizontal_in_place(&mut cur);
        for b in &mut boxes {
            *b = BBox::new(wf - b.x2, b.y1, wf - b.x1, b.y2);
        }
    }
    if params.vflip {
        imageops::flip_vertical_in_place(&mut cur);
        for b in &mut boxes {
            *b = BBox::new(b.x1, hf - b.y2, b.x2, hf - b.y1);
        }
    }
    color_jitter(
        &mut cur,
        params.brightness,
        params.contrast,
        params.saturation,
    );

    let scale = f64::from(target_size) / f64::from(w.max(h));
    let nw = ((wf * scale).round() as u32).clamp(1, target_size);
    let nh = ((hf * scale).round() as u32).clamp(1, target_size);
    let resized = if (nw, nh) == (w, h) {
        cur
    } else {
        let filter = if scale.fract() == 0.0 {
            FilterType::Nearest
        } else {
            FilterType::Triangle
        };
        imageops::resize(&cur, nw, nh, filter)
    };
    let mut canvas = RasterImage::from_pixel(target_size, target_size, Rgb(pad));
    imageops::replace(&mut canvas, &resized, 0, 0);

    let t = f64::from(target_size);
    let mut out = record.clone();
    out.width = target_size;
    out.height = target_size;
    for (e, b) in out.entities.iter_mut().zip(boxes) {
        e.bbox = clip_bbox(b.scale(scale), t, t);
    }
    Ok((canvas, out))
}

/// Draw transform parameters from `rng` and apply them.
pub fn transform<R: Rng + ?Sized>(
    img: &RasterImage,
    record: &DiagramRecord,
    config: &AugmentConfig,
    rng: &mut R,
) -> Result<(RasterImage, DiagramRecord), AugmentError> {
    config.validate()?;
    check_pair(img, record)?;
    let params = draw_transform(config, rng);
    apply_transform(img, record, &params, config.target_size, config.pad_color)
}
