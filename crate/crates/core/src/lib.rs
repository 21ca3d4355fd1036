//! Reaction diagram parsing as sequence generation: a token codec for reaction structures,
//! grammar-constrained greedy decoding, hard/soft match evaluation, compositional
//! augmentation, dataset tooling and a subprocess bridge to external models.

pub mod augment;
pub mod bridge;
pub mod codec;
pub mod dataset_io;
pub mod decoder;
pub mod metrics;
pub mod schema;
pub mod synth;

pub use codec::{
    decode_tokens, dequantize, encode, quantize, CodecError, OrderingPolicy, Special, TokenId,
    TokenSequence, Vocabulary,
};
pub use decoder::{
    greedy_decode, postprocess, DecodeConfig, DecodeError, DecodeOutput, LogitSource,
};
pub use metrics::{evaluate, f1, iou, MatchConfig, MatchMode, MetricsReport};
pub use schema::{
    validate_dataset, validate_record, BBox, Dataset, DiagramRecord, Entity, EntityType, Reaction,
    ReactionStructure, Role, StructuredReaction, Style, Violation,
};
