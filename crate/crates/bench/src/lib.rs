//! Shared fixtures for the pipeline benchmarks.

use std::collections::{BTreeMap, HashMap};

use rxnseq::augment::{MemoryImageStore, RasterImage};
use rxnseq::schema::{Dataset, DiagramRecord, ReactionStructure};
use rxnseq::synth::{random_dataset, render_record, SynthConfig};
use rxnseq::{encode, OrderingPolicy, TokenSequence, Vocabulary};

pub const N_BINS: u32 = 2000;

pub struct Fixture {
    pub vocab: Vocabulary,
    pub dataset: Dataset,
    pub sequences: Vec<TokenSequence>,
    pub predictions: BTreeMap<u64, ReactionStructure>,
}

impl Fixture {
    /// `n` synthetic diagrams with up to 8 reactions each, encoded in annotated order.
    pub fn new(n: usize, seed: u64) -> Self {
        let vocab = Vocabulary::new(N_BINS).expect("positive bins");
        let dataset = random_dataset(seed, n, &SynthConfig::default());
        let sequences = dataset
            .records
            .iter()
            .map(|r| {
                encode(r, &vocab, OrderingPolicy::Annotated).expect("synthetic records are valid")
            })
            .collect();
        let predictions = dataset
            .records
            .iter()
            .map(|r| (r.image_id, r.structure()))
            .collect();
        Self {
            vocab,
            dataset,
            sequences,
            predictions,
        }
    }

    pub fn record(&self, i: usize) -> &DiagramRecord {
        &self.dataset.records[i % self.dataset.len()]
    }
}

/// Rendered images for small diagrams, suitable for the augmentation benches.
pub fn image_pool(n: usize, seed: u64) -> (Dataset, MemoryImageStore) {
    let cfg = SynthConfig {
        min_side: 200,
        max_side: 600,
        ..SynthConfig::default()
    };
    let dataset = random_dataset(seed, n, &cfg);
    let images: HashMap<u64, RasterImage> = dataset
        .records
        .iter()
        .map(|r| (r.image_id, render_record(r)))
        .collect();
    (dataset, MemoryImageStore { images })
}
