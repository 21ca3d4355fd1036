//! Conversion between reaction structures and token sequences.
//!
//! Each entity is five tokens (`x1 y1 x2 y2 type`), each role list is closed by its role
//! token, each reaction by `[Rxn]`, and the whole sequence by `[EOS]`:
//!
//! ```text
//! structure := reaction* [EOS]
//! reaction  := entity+ [Rct] entity* [Cnd] entity+ [Prd] [Rxn]
//! ```
//!
//! `[BOS]` is never part of an encoded sequence; it is a decoder-side start state.

mod vocab;

use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use vocab::{Special, TokenId, TokenKind, Vocabulary, DEFAULT_N_BINS};

use crate::decoder::fsm::{self, DecodeState};
use crate::schema::{
    validate_record, BBox, DiagramRecord, Entity, Reaction, ReactionStructure, Role,
    StructuredReaction, Violation,
};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("coordinate {0} is negative or not finite")]
    InvalidCoordinate(f64),
    #[error("extent {0} must be positive")]
    NonPositiveExtent(f64),
    #[error("bin {bin} out of range for {n_bins} bins")]
    BinOutOfRange { bin: TokenId, n_bins: u32 },
    #[error("record {image_id} is invalid: {}", join(.violations))]
    InvalidRecord {
        image_id: u64,
        violations: Vec<Violation>,
    },
    #[error("token file line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Map a pixel coordinate to its bin: `floor(coord / extent * n_bins)`, clamped to the last bin.
pub fn quantize(coord: f64, extent: f64, n_bins: u32) -> Result<TokenId, CodecError> {
    if !extent.is_finite() || extent <= 0.0 {
        return Err(CodecError::NonPositiveExtent(extent));
    }
    if !coord.is_finite() || coord < 0.0 {
        return Err(CodecError::InvalidCoordinate(coord));
    }
    let bin = (coord / extent * f64::from(n_bins)).floor();
    Ok((bin as u64).min(u64::from(n_bins) - 1) as TokenId)
}

/// Center of `bin` in pixels: `(bin + 0.5) / n_bins * extent`.
pub fn dequantize(bin: TokenId, extent: f64, n_bins: u32) -> Result<f64, CodecError> {
    if bin >= n_bins {
        return Err(CodecError::BinOutOfRange { bin, n_bins });
    }
    if extent.is_nan() || extent <= 0.0 {
        return Err(CodecError::NonPositiveExtent(extent));
    }
    Ok((f64::from(bin) + 0.5) / f64::from(n_bins) * extent)
}

/// How reactions are ordered in the target sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderingPolicy {
    /// The dataset order.
    #[default]
    Annotated,
    /// Top-to-bottom then left-to-right by the reactants' top-left extreme.
    Reading,
    /// A seeded shuffle.
    Random(u64),
}

/// Reactions of `record` in the order given by `order`.
pub fn order_reactions(record: &DiagramRecord, order: OrderingPolicy) -> Vec<Reaction> {
    let mut reactions = record.reactions.clone();
    match order {
        OrderingPolicy::Annotated => {}
        OrderingPolicy::Reading => {
            let key = |r: &Reaction| {
                r.reactants
                    .iter()
                    .filter_map(|id| record.entity(*id))
                    .fold((f64::INFINITY, f64::INFINITY), |(y, x), e| {
                        (y.min(e.bbox.y1), x.min(e.bbox.x1))
                    })
            };
            reactions.sort_by(|a, b| {
                let (ka, kb) = (key(a), key(b));
                ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
            });
        }
        OrderingPolicy::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            reactions.shuffle(&mut rng);
        }
    }
    reactions
}

/// A token sequence together with the image extent needed to dequantize it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<TokenId>,
    pub width: u32,
    pub height: u32,
}

/// Serialize a validated record into its target token sequence.
pub fn encode(
    record: &DiagramRecord,
    vocab: &Vocabulary,
    order: OrderingPolicy,
) -> Result<TokenSequence, CodecError> {
    let violations = validate_record(record);
    if !violations.is_empty() {
        return Err(CodecError::InvalidRecord {
            image_id: record.image_id,
            violations,
        });
    }
    let (w, h) = (f64::from(record.width), f64::from(record.height));
    let n = vocab.n_bins();
    let mut tokens = Vec::new();
    for rxn in order_reactions(record, order) {
        for role in Role::ALL {
            for id in rxn.role(role) {
                // validated above, so the id resolves
                let ent = record.entity(*id).expect("validated entity id");
                let b = ent.bbox;
                tokens.extend([
                    quantize(b.x1, w, n)?,
                    quantize(b.y1, h, n)?,
                    quantize(b.x2, w, n)?,
                    quantize(b.y2, h, n)?,
                    vocab.special(Special::entity_type(ent.etype)),
                ]);
            }
            tokens.push(vocab.special(Special::role_end(role)));
        }
        tokens.push(vocab.special(Special::Rxn));
    }
    tokens.push(vocab.eos());
    Ok(TokenSequence {
        tokens,
        width: record.width,
        height: record.height,
    })
}

/// Outcome of parsing a token list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseStatus {
    /// Accepted by the grammar, terminated by `[EOS]`.
    Clean,
    /// Ran out of tokens before `[EOS]`; any unfinished reaction was dropped.
    Truncated,
    /// Token at this index broke the grammar; reactions completed before it are kept.
    Invalid { position: usize },
}

impl fmt::Display for ParseStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseStatus::Clean => f.write_str("clean"),
            ParseStatus::Truncated => f.write_str("truncated"),
            ParseStatus::Invalid { position } => write!(f, "invalid at position {position}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub structure: ReactionStructure,
    pub status: ParseStatus,
}

/// Parse an arbitrary token list back into a structure with pixel boxes at bin centers.
pub fn decode_tokens(seq: &TokenSequence, vocab: &Vocabulary) -> Parsed {
    let (w, h) = (f64::from(seq.width.max(1)), f64::from(seq.height.max(1)));
    let n = vocab.n_bins();
    let mut done = Vec::new();
    let mut current = StructuredReaction::default();
    let mut coords: Vec<TokenId> = Vec::with_capacity(4);
    let mut state = DecodeState::Start;

    for (pos, &tok) in seq.tokens.iter().enumerate() {
        let next = match fsm::step(state, tok, vocab) {
            Ok(s) => s,
            Err(_) => {
                return Parsed {
                    structure: ReactionStructure { reactions: done },
                    status: ParseStatus::Invalid { position: pos },
                }
            }
        };
        match next {
            DecodeState::X1(_) => {
                coords.clear();
                coords.push(tok);
            }
            DecodeState::Y1(_) | DecodeState::X2(_) | DecodeState::Y2(_) => coords.push(tok),
            DecodeState::Type(role) => {
                let etype = fsm::type_of(tok, vocab).expect("type token");
                let c = |i: usize, extent: f64| {
                    dequantize(coords[i], extent, n).expect("coordinate token within bins")
                };
                let bbox = BBox::new(c(0, w), c(1, h), c(2, w), c(3, h));
                let id = current.entity_count() as u32;
                current.role_mut(role).push(Entity::new(id, bbox, etype));
            }
            DecodeState::RxnEnd => done.push(std::mem::take(&mut current)),
            DecodeState::Start | DecodeState::RoleEnd(_) | DecodeState::Eos => {}
        }
        state = next;
    }
    let status = if state == DecodeState::Eos {
        ParseStatus::Clean
    } else {
        ParseStatus::Truncated
    };
    Parsed {
        structure: ReactionStructure { reactions: done },
        status,
    }
}

/// One line of a token file: `image_id<TAB>width<TAB>height<TAB>space-separated ids`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenLine {
    pub image_id: u64,
    pub sequence: TokenSequence,
}

impl fmt::Display for TokenLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t",
            self.image_id, self.sequence.width, self.sequence.height
        )?;
        for (i, t) in self.sequence.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl TokenLine {
    pub fn parse(line: &str, line_no: usize) -> Result<Self, CodecError> {
        let bad = |message: String| CodecError::Malformed {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(format!(
                "expected 4 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<u64, CodecError> {
            s.trim()
                .parse::<u64>()
                .map_err(|e| bad(format!("bad {what} {s:?}: {e}")))
        };
        let image_id = num(fields[0], "image id")?;
        let width = u32::try_from(num(fields[1], "width")?).map_err(|e| bad(e.to_string()))?;
        let height = u32::try_from(num(fields[2], "height")?).map_err(|e| bad(e.to_string()))?;
        let tokens = fields[3]
            .split_ascii_whitespace()
            .map(|t| {
                t.parse::<TokenId>()
                    .map_err(|e| bad(format!("bad token {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            image_id,
            sequence: TokenSequence {
                tokens,
                width,
                height,
            },
        })
    }
}

pub fn write_token_lines<W: Write>(mut out: W, lines: &[TokenLine]) -> std::io::Result<()> {
    for l in lines {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

/// Read a token file, skipping blank lines.
pub fn read_token_lines<R: BufRead>(input: R) -> Result<Vec<TokenLine>, CodecError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(TokenLine::parse(&line, i + 1)?);
    }
    Ok(out)
}
