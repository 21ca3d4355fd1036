//! Conversion from the published ground-truth layout into the dataset schema.
//!
//! Expected input (COCO-like):
//!
//! ```text
//! {"images": [{"id", "file_name", "width", "height",
//!              "diagram_type" | "style",
//!              "bboxes": [{"id", "bbox": [x, y, w, h], "category_id": 1|2|3}],
//!              "reactions": [{"reactants": [..], "conditions": [..], "products": [..]}]}]}
//! ```
//!
//! Field mapping:
//! - `bboxes` (or `entities`) become entities. The entity id is the `id` field when present,
//!   otherwise the position in the list.
//! - `bbox` is `[x, y, w, h]` by default (see [`BoxFormat`]); boxes are clipped to the image.
//! - `category_id` 1/2/3 map to mol/txt/idt; a string `category` of `mol`/`txt`/`idt` or
//!   `[Mol]`/`[Txt]`/`[Idt]` is accepted too.
//! - the style comes from `diagram_type` or `style`; `single`, `multiple`, `tree`, `graph`
//!   and their `-line` spellings are recognised.

use serde_json::Value;

use super::{DatasetError, ValidationReport};
use crate::schema::{
    clip_bbox, validate_dataset, BBox, Dataset, DiagramRecord, Entity, EntityType, Reaction, Role,
    Style,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoxFormat {
    /// `[x, y, width, height]`
    #[default]
    Xywh,
    /// `[x1, y1, x2, y2]`
    Xyxy,
}

#[derive(Debug, Clone, Default)]
pub struct ConvertOptions {
    pub box_format: BoxFormat,
    /// Style for images that carry none. Without it such images are an error.
    pub default_style: Option<Style>,
    /// Drop entities whose category is not mol/txt/idt (and their references) instead of failing.
    pub skip_unknown_categories: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConvertError {
    #[error("image #{index}: {message}")]
    Field { index: usize, message: String },
    #[error("input is not JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("converted dataset is invalid: {0}")]
    Validation(ValidationReport),
}

impl From<ConvertError> for DatasetError {
    fn from(e: ConvertError) -> Self {
        match e {
            ConvertError::Validation(r) => DatasetError::Validation(r),
            ConvertError::Json(e) => DatasetError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
            other => DatasetError::Parse {
                line: 0,
                column: 0,
                message: other.to_string(),
            },
        }
    }
}

pub fn parse_style(s: &str) -> Option<Style> {
    let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
    match norm.as_str() {
        "single" | "single-line" | "singleline" => Some(Style::SingleLine),
        "multiple" | "multiple-line" | "multi-line" | "multiline" | "multipleline" => {
            Some(Style::MultipleLine)
        }
        "tree" => Some(Style::Tree),
        "graph" => Some(Style::Graph),
        _ => None,
    }
}

fn parse_category(v: &Value) -> Option<EntityType> {
    match v {
        Value::Number(n) => match n.as_u64()? {
            1 => Some(EntityType::Mol),
            2 => Some(EntityType::Txt),
            3 => Some(EntityType::Idt),
            _ => None,
        },
        Value::String(s) => match s.trim_matches(['[', ']']).to_ascii_lowercase().as_str() {
            "mol" => Some(EntityType::Mol),
            "txt" => Some(EntityType::Txt),
            "idt" => Some(EntityType::Idt),
            _ => None,
        },
        _ => None,
    }
}

fn convert_image(
    index: usize,
    img: &Value,
    opts: &ConvertOptions,
) -> Result<DiagramRecord, ConvertError> {
    let err = |message: String| ConvertError::Field { index, message };
    let uint = |key: &str| -> Result<u64, ConvertError> {
        img.get(key)
            .and_then(Value::as_u64)
            .ok_or_else(|| err(format!("missing or non-integer \"{key}\"")))
    };
    let image_id = uint("id")?;
    let width = u32::try_from(uint("width")?).map_err(|e| err(e.to_string()))?;
    let height = u32::try_from(uint("height")?).map_err(|e| err(e.to_string()))?;
    let file_name = img
        .get("file_name")
        .and_then(Value::as_str)
        .ok_or_else(|| err("missing \"file_name\"".into()))?
        .to_owned();
    let style = match img
        .get("diagram_type")
        .or_else(|| img.get("style"))
        .and_then(Value::as_str)
    {
        Some(s) => parse_style(s).ok_or_else(|| err(format!("unknown style {s:?}")))?,
        None => opts
            .default_style
            .ok_or_else(|| err("no style and no default style given".into()))?,
    };

    let raw_entities = img
        .get("bboxes")
        .or_else(|| img.get("entities"))
        .and_then(Value::as_array)
        .map(Vec::as_slice)
        .unwrap_or_default();
    let mut entities = Vec::with_capacity(raw_entities.len());
    let mut skipped = Vec::new();
    for (pos, ent) in raw_entities.iter().enumerate() {
        let id = match ent.get("id") {
            Some(v) => v
                .as_u64()
                .and_then(|x| u32::try_from(x).ok())
                .ok_or_else(|| err(format!("entity #{pos}: bad id")))?,
            None => pos as u32,
        };
        let cat = ent.get("category_id").or_else(|| ent.get("category"));
        let Some(etype) = cat.and_then(parse_category) else {
            if opts.skip_unknown_categories {
                skipped.push(id);
                continue;
            }
            return Err(err(format!("entity {id}: unknown category {cat:?}")));
        };
        let coords: Vec<f64> = ent
            .get("bbox")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .unwrap_or_default();
        let [a, b, c, d] = coords[..] else {
            return Err(err(format!("entity {id}: bbox must have four numbers")));
        };
        let bbox = match opts.box_format {
            BoxFormat::Xywh => BBox::new(a, b, a + c, b + d),
            BoxFormat::Xyxy => BBox::new(a, b, c, d),
        };
        let bbox = clip_bbox(bbox, f64::from(width), f64::from(height));
        entities.push(Entity::new(id, bbox, etype));
    }

    let mut reactions = Vec::new();
    for (ri, rxn) in img
        .get("reactions")
        .and_then(Value::as_array)
        .map(Vec::as_slice)
        .unwrap_or_default()
        .iter()
        .enumerate()
    {
        let mut out = Reaction::default();
        for role in Role::ALL {
            let ids = match rxn.get(role.as_str()) {
                None | Some(Value::Null) => Vec::new(),
                Some(Value::Array(a)) => a
                    .iter()
                    .map(|v| {
                        v.as_u64()
                            .and_then(|x| u32::try_from(x).ok())
                            .ok_or_else(|| {
                                err(format!("reaction {ri}: bad id in {}", role.as_str()))
                            })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                Some(_) => {
                    return Err(err(format!(
                        "reaction {ri}: {} is not a list",
                        role.as_str()
                    )))
                }
            };
            *out.role_mut(role) = ids.into_iter().filter(|id| !skipped.contains(id)).collect();
        }
        reactions.push(out);
    }

    Ok(DiagramRecord {
        image_id,
        file_name,
        width,
        height,
        style,
        entities,
        reactions,
    })
}

/// Convert a published ground-truth document (already parsed) and validate the result.
pub fn convert_value(doc: &Value, opts: &ConvertOptions) -> Result<Dataset, ConvertError> {
    let images = match doc {
        Value::Array(a) => a.as_slice(),
        Value::Object(o) => o
            .get("images")
            .and_then(Value::as_array)
            .map(Vec::as_slice)
            .ok_or(ConvertError::Field {
                index: 0,
                message: "top-level object has no \"images\" list".into(),
            })?,
        _ => {
            return Err(ConvertError::Field {
                index: 0,
                message: "expected an object or a list of images".into(),
            })
        }
    };
    let records = images
        .iter()
        .enumerate()
        .map(|(i, img)| convert_image(i, img, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let dataset = Dataset::new(records);
    let violations = validate_dataset(&dataset);
    if !violations.is_empty() {
        return Err(ConvertError::Validation(ValidationReport { violations }));
    }
    Ok(dataset)
}

pub fn convert_str(text: &str, opts: &ConvertOptions) -> Result<Dataset, ConvertError> {
    let doc: Value = serde_json::from_str(text)?;
    convert_value(&doc, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"images": [{"id": 4, "file_name": "a.png", "width": 200, "height": 100,
        "diagram_type": "single",
        "bboxes": [{"id": 0, "bbox": [10, 10, 40, 30], "category_id": 1},
                   {"id": 1, "bbox": [60, 20, 30, 10], "category_id": 2},
                   {"id": 2, "bbox": [120, 10, 90, 60], "category_id": 1},
                   {"id": 3, "bbox": [5, 80, 10, 10], "category_id": 4}],
        "reactions": [{"reactants": [0], "conditions": [1, 3], "products": [2]}]}]}"#;

    #[test]
    fn converts_xywh_and_clips() {
        let opts = ConvertOptions {
            skip_unknown_categories: true,
            ..Default::default()
        };
        let d = convert_str(SAMPLE, &opts).unwrap();
        let r = &d.records[0];
        assert_eq!(r.style, Style::SingleLine);
        assert_eq!(r.entities.len(), 3);
        assert_eq!(r.entities[0].bbox, BBox::new(10.0, 10.0, 50.0, 40.0));
        // 120 + 90 overshoots the 200 px width
        assert_eq!(r.entities[2].bbox, BBox::new(120.0, 10.0, 200.0, 70.0));
        assert_eq!(r.reactions[0].conditions, vec![1]);
    }

    #[test]
    fn unknown_category_fails_by_default() {
        assert!(matches!(
            convert_str(SAMPLE, &ConvertOptions::default()),
            Err(ConvertError::Field { index: 0, .. })
        ));
    }

    #[test]
    fn missing_style_needs_default() {
        let text = SAMPLE.replace("\"diagram_type\": \"single\",", "");
        let opts = ConvertOptions {
            skip_unknown_categories: true,
            ..Default::default()
        };
        assert!(convert_str(&text, &opts).is_err());
        let opts = ConvertOptions {
            default_style: Some(Style::Graph),
            ..opts
        };
        assert_eq!(
            convert_str(&text, &opts).unwrap().records[0].style,
            Style::Graph
        );
    }

    #[test]
    fn style_spellings() {
        assert_eq!(parse_style("Multiple-Line"), Some(Style::MultipleLine));
        assert_eq!(parse_style("single_line"), Some(Style::SingleLine));
        assert_eq!(parse_style("star"), None);
    }
}
