//! Hard and soft reaction matching with micro-averaged precision, recall and F1.
//!
//! A ground-truth entity is matched by the predicted entity of maximal IoU when that IoU
//! clears the threshold. Matching is independent per entity, so two ground-truth entities
//! may share one predicted entity.
//!
//! A predicted reaction matches a ground-truth reaction when coverage holds in both
//! directions: every ground-truth entity finds a prediction and every predicted entity finds
//! a ground-truth entity. Hard mode checks this separately for reactants, conditions and
//! products. Soft mode keeps only molecules, pools reactants with conditions into one input
//! side, and checks inputs and products.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::schema::{
    BBox, Dataset, Entity, EntityType, ReactionStructure, StructuredReaction, Style,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Hard,
    Soft,
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Hard => "hard",
            MatchMode::Soft => "soft",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    /// `true`: IoU must exceed the threshold. `false`: IoU equal to it also matches.
    pub strict: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            strict: true,
        }
    }
}

impl MatchConfig {
    fn passes(&self, iou: f64) -> bool {
        if self.strict {
            iou > self.iou_threshold
        } else {
            iou >= self.iou_threshold
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("IoU is undefined for a box without interior: {0:?}")]
    DegenerateBox(BBox),
    #[error("prediction for unknown image id {0}")]
    UnknownImage(u64),
}

/// Intersection over union of two boxes with positive area.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64, MetricsError> {
    for bx in [a, b] {
        if bx.is_empty() {
            return Err(MetricsError::DegenerateBox(*bx));
        }
    }
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    Ok(inter / union)
}

/// For each gt entity, the index of the pred entity with the highest IoU if it clears the
/// threshold. Ties keep the earliest pred; boxes without interior never match.
pub fn match_entities(gt: &[Entity], pred: &[Entity], config: &MatchConfig) -> Vec<Option<usize>> {
    gt.iter()
        .map(|g| {
            let mut best: Option<(usize, f64)> = None;
            for (j, p) in pred.iter().enumerate() {
                let Ok(v) = iou(&g.bbox, &p.bbox) else {
                    continue;
                };
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            best.filter(|(_, v)| config.passes(*v)).map(|(j, _)| j)
        })
        .collect()
}

fn covers(gt: &[Entity], pred: &[Entity], config: &MatchConfig) -> bool {
    match_entities(gt, pred, config).iter().all(Option::is_some)
        && match_entities(pred, gt, config).iter().all(Option::is_some)
}

fn molecules<'a>(lists: impl IntoIterator<Item = &'a [Entity]>) -> Vec<Entity> {
    lists
        .into_iter()
        .flatten()
        .filter(|e| e.etype == EntityType::Mol)
        .copied()
        .collect()
}

/// Does `pred` match `gt` under `mode`?
pub fn reaction_match(
    gt: &StructuredReaction,
    pred: &StructuredReaction,
    mode: MatchMode,
    config: &MatchConfig,
) -> bool {
    match mode {
        MatchMode::Hard => {
            covers(&gt.reactants, &pred.reactants, config)
                && covers(&gt.conditions, &pred.conditions, config)
                && covers(&gt.products, &pred.products, config)
        }
        MatchMode::Soft => {
            let gt_in = molecules([gt.reactants.as_slice(), gt.conditions.as_slice()]);
            let pred_in = molecules([pred.reactants.as_slice(), pred.conditions.as_slice()]);
            covers(&gt_in, &pred_in, config)
                && covers(
                    &molecules([gt.products.as_slice()]),
                    &molecules([pred.products.as_slice()]),
                    config,
                )
        }
    }
}

/// Match counts; addition is the aggregation used for micro-averaging.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub matched_predictions: usize,
    pub total_predictions: usize,
    pub matched_ground_truth: usize,
    pub total_ground_truth: usize,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            matched_predictions: self.matched_predictions + o.matched_predictions,
            total_predictions: self.total_predictions + o.total_predictions,
            matched_ground_truth: self.matched_ground_truth + o.matched_ground_truth,
            total_ground_truth: self.total_ground_truth + o.total_ground_truth,
        }
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), |a, b| a + b)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.matched_predictions, self.total_predictions)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.matched_ground_truth, self.total_ground_truth)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }

    pub fn scores(&self) -> Scores {
        Scores {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
            counts: *self,
        }
    }
}

/// Compare every prediction with every ground-truth reaction of one diagram.
pub fn diagram_counts(
    gt: &ReactionStructure,
    pred: &ReactionStructure,
    mode: MatchMode,
    config: &MatchConfig,
) -> Counts {
    let n = gt.reactions.len();
    let m = pred.reactions.len();
    let mut gt_hit = vec![false; n];
    let mut pred_hit = vec![false; m];
    for (i, g) in gt.reactions.iter().enumerate() {
        for (j, p) in pred.reactions.iter().enumerate() {
            if reaction_match(g, p, mode, config) {
                gt_hit[i] = true;
                pred_hit[j] = true;
            }
        }
    }
    Counts {
        matched_predictions: pred_hit.iter().filter(|h| **h).count(),
        total_predictions: m,
        matched_ground_truth: gt_hit.iter().filter(|h| **h).count(),
        total_ground_truth: n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramScore {
    pub image_id: u64,
    pub style: Style,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: MatchMode,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched_predictions: usize,
    pub total_predictions: usize,
    pub matched_ground_truth: usize,
    pub total_ground_truth: usize,
    pub per_style: BTreeMap<Style, Scores>,
    pub per_diagram: Vec<DiagramScore>,
}

impl MetricsReport {
    pub fn counts(&self) -> Counts {
        Counts {
            matched_predictions: self.matched_predictions,
            total_predictions: self.total_predictions,
            matched_ground_truth: self.matched_ground_truth,
            total_ground_truth: self.total_ground_truth,
        }
    }

    /// One `key: value` line per metric; per-style rows are prefixed with the style name.
    pub fn to_text(&self, by_style: bool) -> String {
        let mut s = String::new();
        let block = |s: &mut String, prefix: &str, sc: &Scores| {
            let c = sc.counts;
            let _ = writeln!(s, "{prefix}precision: {:.3}", sc.precision);
            let _ = writeln!(s, "{prefix}recall: {:.3}", sc.recall);
            let _ = writeln!(s, "{prefix}f1: {:.3}", sc.f1);
            let _ = writeln!(s, "{prefix}matched_predictions: {}", c.matched_predictions);
            let _ = writeln!(s, "{prefix}total_predictions: {}", c.total_predictions);
            let _ = writeln!(
                s,
                "{prefix}matched_ground_truth: {}",
                c.matched_ground_truth
            );
            let _ = writeln!(s, "{prefix}total_ground_truth: {}", c.total_ground_truth);
        };
        let _ = writeln!(s, "mode: {}", self.mode);
        block(&mut s, "", &self.counts().scores());
        if by_style {
            for style in Style::ALL {
                let sc = self
                    .per_style
                    .get(&style)
                    .copied()
                    .unwrap_or_else(|| Counts::default().scores());
                block(&mut s, &format!("{style}."), &sc);
            }
        }
        s
    }
}

/// Micro-averaged evaluation over a dataset.
///
/// Diagrams without a prediction count as empty predictions. Predictions for image ids
/// absent from `gt` are an error.
pub fn evaluate(
    gt: &Dataset,
    pred: &BTreeMap<u64, ReactionStructure>,
    mode: MatchMode,
    config: &MatchConfig,
) -> Result<MetricsReport, MetricsError> {
    if let Some(id) = pred.keys().find(|id| gt.get(**id).is_none()) {
        return Err(MetricsError::UnknownImage(*id));
    }
    let empty = ReactionStructure::default();
    let per_diagram: Vec<DiagramScore> = gt
        .records
        .par_iter()
        .map(|record| {
            let p = pred.get(&record.image_id).unwrap_or(&empty);
            DiagramScore {
                image_id: record.image_id,
                style: record.style,
                counts: diagram_counts(&record.structure(), p, mode, config),
            }
        })
        .collect();

    let mut per_style_counts: BTreeMap<Style, Counts> = BTreeMap::new();
    for d in &per_diagram {
        let e = per_style_counts.entry(d.style).or_default();
        *e = *e + d.counts;
    }
    let total: Counts = per_diagram.iter().map(|d| d.counts).sum();
    Ok(MetricsReport {
        mode,
        precision: total.precision(),
        recall: total.recall(),
        f1: total.f1(),
        matched_predictions: total.matched_predictions,
        total_predictions: total.total_predictions,
        matched_ground_truth: total.matched_ground_truth,
        total_ground_truth: total.total_ground_truth,
        per_style: per_style_counts
            .into_iter()
            .map(|(k, c)| (k, c.scores()))
            .collect(),
        per_diagram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn e(x1: f64, y1: f64, x2: f64, y2: f64, t: EntityType) -> Entity {
        Entity::new(0, BBox::new(x1, y1, x2, y2), t)
    }

    fn mol(x: f64) -> Entity {
        e(x, 0.0, x + 10.0, 10.0, EntityType::Mol)
    }

    fn txt(x: f64) -> Entity {
        e(x, 0.0, x + 10.0, 10.0, EntityType::Txt)
    }

    fn rxn(r: Vec<Entity>, c: Vec<Entity>, p: Vec<Entity>) -> StructuredReaction {
        StructuredReaction {
            reactants: r,
            conditions: c,
            products: p,
        }
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &BBox::new(20.0, 0.0, 30.0, 10.0)).unwrap(), 0.0);
        // intersection 50, union 150
        assert_abs_diff_eq!(
            iou(&a, &BBox::new(5.0, 0.0, 15.0, 10.0)).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        assert!(iou(&a, &BBox::new(1.0, 1.0, 1.0, 5.0)).is_err());
    }

    #[test]
    fn matching_threshold_and_independence() {
        let cfg = MatchConfig::default();
        let gt = vec![mol(0.0), mol(100.0)];
        assert_eq!(match_entities(&gt, &gt, &cfg), vec![Some(0), Some(1)]);

        // shift so that IoU is 0.4: overlap 40/60 of width... w=10, shift s: (10-s)/(10+s)=0.4 -> s=30/7
        let s = 30.0 / 7.0;
        let shifted: Vec<_> = gt
            .iter()
            .map(|g| e(g.bbox.x1 + s, 0.0, g.bbox.x2 + s, 10.0, g.etype))
            .collect();
        assert_eq!(match_entities(&gt, &shifted, &cfg), vec![None, None]);

        // two gt boxes nearest to one pred box
        let gt2 = vec![
            e(0.0, 0.0, 10.0, 10.0, EntityType::Mol),
            e(0.0, 0.0, 10.0, 9.0, EntityType::Mol),
        ];
        let pred = vec![e(0.0, 0.0, 10.0, 9.5, EntityType::Mol), mol(200.0)];
        assert_eq!(match_entities(&gt2, &pred, &cfg), vec![Some(0), Some(0)]);
    }

    #[test]
    fn strictness_flag() {
        // IoU exactly 0.5: [0,10] vs [0,5] in x with equal height
        let gt = vec![e(0.0, 0.0, 10.0, 10.0, EntityType::Mol)];
        let pred = vec![e(0.0, 0.0, 5.0, 10.0, EntityType::Mol)];
        assert_eq!(
            match_entities(&gt, &pred, &MatchConfig::default()),
            vec![None]
        );
        let inclusive = MatchConfig {
            strict: false,
            ..Default::default()
        };
        assert_eq!(match_entities(&gt, &pred, &inclusive), vec![Some(0)]);
    }

    #[test]
    fn reagent_confusion_is_soft_only() {
        let cfg = MatchConfig::default();
        let gt = rxn(vec![mol(0.0), mol(20.0)], vec![txt(40.0)], vec![mol(60.0)]);
        let pred = rxn(vec![mol(0.0)], vec![mol(20.0), txt(40.0)], vec![mol(60.0)]);
        assert!(!reaction_match(&gt, &pred, MatchMode::Hard, &cfg));
        assert!(reaction_match(&gt, &pred, MatchMode::Soft, &cfg));
        assert!(reaction_match(&gt, &gt, MatchMode::Hard, &cfg));
        assert!(reaction_match(&gt, &gt, MatchMode::Soft, &cfg));
    }

    #[test]
    fn missing_product_fails_both() {
        let cfg = MatchConfig::default();
        let gt = rxn(vec![mol(0.0)], vec![], vec![mol(60.0), mol(80.0)]);
        let pred = rxn(vec![mol(0.0)], vec![], vec![mol(60.0)]);
        assert!(!reaction_match(&gt, &pred, MatchMode::Hard, &cfg));
        assert!(!reaction_match(&gt, &pred, MatchMode::Soft, &cfg));
    }

    #[test]
    fn extra_predicted_entity_fails() {
        let cfg = MatchConfig::default();
        let gt = rxn(vec![mol(0.0)], vec![], vec![mol(60.0)]);
        let pred = rxn(vec![mol(0.0), mol(200.0)], vec![], vec![mol(60.0)]);
        assert!(!reaction_match(&gt, &pred, MatchMode::Hard, &cfg));
        assert!(!reaction_match(&gt, &pred, MatchMode::Soft, &cfg));
    }

    #[test]
    fn soft_ignores_text() {
        let cfg = MatchConfig::default();
        let gt = rxn(vec![mol(0.0)], vec![txt(20.0), txt(30.0)], vec![mol(60.0)]);
        let pred = rxn(vec![mol(0.0)], vec![txt(25.0)], vec![mol(60.0)]);
        assert!(!reaction_match(&gt, &pred, MatchMode::Hard, &cfg));
        assert!(reaction_match(&gt, &pred, MatchMode::Soft, &cfg));
    }

    #[test]
    fn f1_arithmetic() {
        assert_eq!(format!("{:.3}", f1(0.723, 0.662)), "0.691");
        assert_eq!(f1(0.0, 0.0), 0.0);
        assert_eq!(ratio(0, 0), 0.0);
    }
}
