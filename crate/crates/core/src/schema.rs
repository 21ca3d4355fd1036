//! Domain types for reaction diagrams: boxes, entities, reactions, records and datasets.
//!
//! Coordinates are floating-point pixels with the origin at the top-left corner.
//! Quantization into tokens happens only in [`crate::codec`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in pixel space, `(x1, y1)` top-left and `(x2, y2)` bottom-right.
///
/// Serialized as a four-element array `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x1, y1, x2, y2]: [f64; 4]) -> Self {
        Self { x1, y1, x2, y2 }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl BBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    /// Area, or zero when the box is inverted.
    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// True when the corners are out of order (`x2 < x1` or `y2 < y1`).
    pub fn is_inverted(&self) -> bool {
        self.x2 < self.x1 || self.y2 < self.y1
    }

    /// True when the box has no interior (`x1 >= x2` or `y1 >= y2`).
    pub fn is_empty(&self) -> bool {
        !(self.x1 < self.x2 && self.y1 < self.y2)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::new(
            self.x1 * factor,
            self.y1 * factor,
            self.x2 * factor,
            self.y2 * factor,
        )
    }

    fn is_finite(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Intersect `b` with the canvas `[0, width] x [0, height]`.
///
/// The result may have zero area; callers decide whether that matters.
pub fn clip_bbox(b: BBox, width: f64, height: f64) -> BBox {
    BBox::new(
        b.x1.clamp(0.0, width),
        b.y1.clamp(0.0, height),
        b.x2.clamp(0.0, width),
        b.y2.clamp(0.0, height),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    #[serde(rename = "mol")]
    Mol,
    #[serde(rename = "txt")]
    Txt,
    #[serde(rename = "idt")]
    Idt,
}

impl EntityType {
    pub const ALL: [EntityType; 3] = [EntityType::Mol, EntityType::Txt, EntityType::Idt];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Mol => "mol",
            EntityType::Txt => "txt",
            EntityType::Idt => "idt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub bbox: BBox,
    #[serde(rename = "category")]
    pub etype: EntityType,
}

impl Entity {
    pub fn new(id: u32, bbox: BBox, etype: EntityType) -> Self {
        Self { id, bbox, etype }
    }
}

/// One of the three parts an entity can play in a reaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Reactant,
    Condition,
    Product,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Reactant, Role::Condition, Role::Product];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Reactant => "reactants",
            Role::Condition => "conditions",
            Role::Product => "products",
        }
    }
}

/// A reaction as annotated in a dataset: role lists of entity ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reaction {
    pub reactants: Vec<u32>,
    pub conditions: Vec<u32>,
    pub products: Vec<u32>,
}

impl Reaction {
    pub fn role(&self, role: Role) -> &[u32] {
        match role {
            Role::Reactant => &self.reactants,
            Role::Condition => &self.conditions,
            Role::Product => &self.products,
        }
    }

    pub fn role_mut(&mut self, role: Role) -> &mut Vec<u32> {
        match role {
            Role::Reactant => &mut self.reactants,
            Role::Condition => &mut self.conditions,
            Role::Product => &mut self.products,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Style {
    #[serde(rename = "single-line")]
    SingleLine,
    #[serde(rename = "multiple-line")]
    MultipleLine,
    #[serde(rename = "tree")]
    Tree,
    #[serde(rename = "graph")]
    Graph,
}

impl Style {
    pub const ALL: [Style; 4] = [
        Style::SingleLine,
        Style::MultipleLine,
        Style::Tree,
        Style::Graph,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Style::SingleLine => "single-line",
            Style::MultipleLine => "multiple-line",
            Style::Tree => "tree",
            Style::Graph => "graph",
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One annotated diagram image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramRecord {
    #[serde(rename = "id")]
    pub image_id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub style: Style,
    pub entities: Vec<Entity>,
    pub reactions: Vec<Reaction>,
}

impl DiagramRecord {
    pub fn entity(&self, id: u32) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// Replace every id in each reaction by its entity.
    ///
    /// Ids that do not resolve are skipped; run [`validate_record`] first when that matters.
    pub fn structure(&self) -> ReactionStructure {
        let by_id: BTreeMap<u32, &Entity> = self.entities.iter().map(|e| (e.id, e)).collect();
        let resolve = |ids: &[u32]| -> Vec<Entity> {
            ids.iter()
                .filter_map(|id| by_id.get(id).map(|e| **e))
                .collect()
        };
        ReactionStructure {
            reactions: self
                .reactions
                .iter()
                .map(|r| StructuredReaction {
                    reactants: resolve(&r.reactants),
                    conditions: resolve(&r.conditions),
                    products: resolve(&r.products),
                })
                .collect(),
        }
    }
}

/// A reaction whose roles hold entities directly rather than ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StructuredReaction {
    pub reactants: Vec<Entity>,
    pub conditions: Vec<Entity>,
    pub products: Vec<Entity>,
}

impl StructuredReaction {
    pub fn role(&self, role: Role) -> &[Entity] {
        match role {
            Role::Reactant => &self.reactants,
            Role::Condition => &self.conditions,
            Role::Product => &self.products,
        }
    }

    pub fn role_mut(&mut self, role: Role) -> &mut Vec<Entity> {
        match role {
            Role::Reactant => &mut self.reactants,
            Role::Condition => &mut self.conditions,
            Role::Product => &mut self.products,
        }
    }

    pub fn entity_count(&self) -> usize {
        self.reactants.len() + self.conditions.len() + self.products.len()
    }
}

/// Ordered list of reactions in a diagram: the parse target.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReactionStructure {
    pub reactions: Vec<StructuredReaction>,
}

impl ReactionStructure {
    pub fn is_empty(&self) -> bool {
        self.reactions.is_empty()
    }

    /// Build a dataset record from this structure.
    ///
    /// Entities with identical box and type across reactions collapse into a single entity,
    /// so a molecule that is the product of one step and the reactant of the next is stored once.
    /// Ids are assigned in order of first appearance.
    pub fn to_record(
        &self,
        image_id: u64,
        file_name: &str,
        width: u32,
        height: u32,
        style: Style,
    ) -> DiagramRecord {
        let mut entities: Vec<Entity> = Vec::new();
        let mut reactions = Vec::with_capacity(self.reactions.len());
        for rxn in &self.reactions {
            let mut out = Reaction::default();
            for role in Role::ALL {
                for ent in rxn.role(role) {
                    let id = match entities
                        .iter()
                        .find(|e| e.etype == ent.etype && e.bbox == ent.bbox)
                    {
                        Some(e) => e.id,
                        None => {
                            let id = entities.len() as u32;
                            entities.push(Entity::new(id, ent.bbox, ent.etype));
                            id
                        }
                    };
                    let ids = out.role_mut(role);
                    if !ids.contains(&id) {
                        ids.push(id);
                    }
                }
            }
            reactions.push(out);
        }
        DiagramRecord {
            image_id,
            file_name: file_name.to_owned(),
            width,
            height,
            style,
            entities,
            reactions,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(rename = "images")]
    pub records: Vec<DiagramRecord>,
}

impl Dataset {
    pub fn new(records: Vec<DiagramRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, image_id: u64) -> Option<&DiagramRecord> {
        self.records.iter().find(|r| r.image_id == image_id)
    }
}

/// The rule a record breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    NonPositiveSize,
    DuplicateEntityId,
    NonFiniteBBox,
    DegenerateBBox,
    NegativeCoordinate,
    OutOfBounds,
    ReactantsEmpty,
    ProductsEmpty,
    UnknownEntity(u32),
    RepeatedInRole(Role, u32),
    DuplicateImageId,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::NonPositiveSize => f.write_str("width and height must be positive"),
            Rule::DuplicateEntityId => f.write_str("duplicate entity id"),
            Rule::NonFiniteBBox => f.write_str("non-finite bbox coordinate"),
            Rule::DegenerateBBox => f.write_str("degenerate bbox"),
            Rule::NegativeCoordinate => f.write_str("negative bbox coordinate"),
            Rule::OutOfBounds => f.write_str("bbox outside image bounds"),
            Rule::ReactantsEmpty => f.write_str("reactants empty"),
            Rule::ProductsEmpty => f.write_str("products empty"),
            Rule::UnknownEntity(id) => write!(f, "references unknown entity id {id}"),
            Rule::RepeatedInRole(role, id) => {
                write!(f, "entity id {id} repeated in {}", role.as_str())
            }
            Rule::DuplicateImageId => f.write_str("duplicate image id"),
        }
    }
}

/// What a violation is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    Image,
    Entity(u32),
    Reaction(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub image_id: u64,
    pub subject: Subject,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subject {
            Subject::Image => write!(f, "image {}: {}", self.image_id, self.rule),
            Subject::Entity(id) => {
                write!(f, "image {} entity {}: {}", self.image_id, id, self.rule)
            }
            Subject::Reaction(i) => {
                write!(f, "image {} reaction {}: {}", self.image_id, i, self.rule)
            }
        }
    }
}

/// Check every record invariant and return all violations (empty when valid).
pub fn validate_record(record: &DiagramRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |subject, rule| {
        out.push(Violation {
            image_id: record.image_id,
            subject,
            rule,
        })
    };

    if record.width == 0 || record.height == 0 {
        push(Subject::Image, Rule::NonPositiveSize);
    }
    let (w, h) = (f64::from(record.width), f64::from(record.height));

    let mut seen = BTreeSet::new();
    for ent in &record.entities {
        let subject = Subject::Entity(ent.id);
        if !seen.insert(ent.id) {
            push(subject, Rule::DuplicateEntityId);
        }
        let b = ent.bbox;
        if !b.is_finite() {
            push(subject, Rule::NonFiniteBBox);
            continue;
        }
        if b.is_inverted() {
            push(subject, Rule::DegenerateBBox);
        }
        if b.x1 < 0.0 || b.y1 < 0.0 || b.x2 < 0.0 || b.y2 < 0.0 {
            push(subject, Rule::NegativeCoordinate);
        }
        if b.x1 > w || b.x2 > w || b.y1 > h || b.y2 > h {
            push(subject, Rule::OutOfBounds);
        }
    }

    for (i, rxn) in record.reactions.iter().enumerate() {
        let subject = Subject::Reaction(i);
        if rxn.reactants.is_empty() {
            push(subject, Rule::ReactantsEmpty);
        }
        if rxn.products.is_empty() {
            push(subject, Rule::ProductsEmpty);
        }
        for role in Role::ALL {
            let mut in_role = BTreeSet::new();
            for &id in rxn.role(role) {
                if !seen.contains(&id) {
                    push(subject, Rule::UnknownEntity(id));
                }
                if !in_role.insert(id) {
                    push(subject, Rule::RepeatedInRole(role, id));
                }
            }
        }
    }
    out
}

/// Validate every record and the dataset-level uniqueness of image ids.
pub fn validate_dataset(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for record in &dataset.records {
        if !ids.insert(record.image_id) {
            out.push(Violation {
                image_id: record.image_id,
                subject: Subject::Image,
                rule: Rule::DuplicateImageId,
            });
        }
        out.extend(validate_record(record));
    }
    out
}
