//! Grammar-constrained greedy decoding over a pluggable [`LogitSource`].

pub mod fsm;
mod postprocess;
mod sources;

pub use fsm::{accepts, allowed_tokens, step, AllowedTokens, DecodeState, FsmError};
pub use postprocess::postprocess;
pub use sources::{bigram_source, replay_oracle, BigramSource, ReplayOracle};

use crate::codec::{decode_tokens, ParseStatus, Special, TokenId, TokenSequence, Vocabulary};
use crate::schema::ReactionStructure;

pub type SourceError = Box<dyn std::error::Error + Send + Sync>;

/// Anything that scores every vocabulary token given the tokens emitted so far.
///
/// The prefix never contains `[BOS]`; an empty prefix means the first step.
pub trait LogitSource {
    fn logits(&mut self, prefix: &[TokenId]) -> Result<Vec<f32>, SourceError>;
}

impl<S: LogitSource + ?Sized> LogitSource for &mut S {
    fn logits(&mut self, prefix: &[TokenId]) -> Result<Vec<f32>, SourceError> {
        (**self).logits(prefix)
    }
}

impl<S: LogitSource + ?Sized> LogitSource for Box<S> {
    fn logits(&mut self, prefix: &[TokenId]) -> Result<Vec<f32>, SourceError> {
        (**self).logits(prefix)
    }
}

pub const DEFAULT_MAX_LENGTH: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeConfig {
    pub max_length: usize,
    pub vocab: Vocabulary,
    /// When false, `[EOS]` is masked at the first step.
    pub allow_empty_output: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            max_length: DEFAULT_MAX_LENGTH,
            vocab: Vocabulary::default(),
            allow_empty_output: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("max_length must be at least 1")]
    ZeroMaxLength,
    #[error("logit source returned {actual} scores, expected {expected}")]
    LogitLength { expected: usize, actual: usize },
    #[error("logit source failed at step {step}: {source}")]
    Source { step: usize, source: SourceError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// The raw emitted tokens, `[EOS]` included when reached.
    pub sequence: TokenSequence,
    /// Post-processed structure.
    pub structure: ReactionStructure,
    /// True when `max_length` was hit before `[EOS]`.
    pub truncated: bool,
}

/// Highest-scoring allowed token; NaN scores lose and ties go to the lowest id.
fn masked_argmax(scores: &[f32], allowed: &AllowedTokens, vocab: &Vocabulary) -> TokenId {
    let mut best: Option<(TokenId, f32)> = None;
    for t in allowed.iter(vocab) {
        let s = scores[t as usize];
        let s = if s.is_nan() { f32::NEG_INFINITY } else { s };
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((t, s)),
        }
    }
    best.expect("every non-terminal state allows at least one token")
        .0
}

/// Greedy decoding with per-state vocabulary masks.
///
/// `width` and `height` are the image extent used to turn bins back into pixels.
pub fn greedy_decode<S: LogitSource + ?Sized>(
    source: &mut S,
    config: &DecodeConfig,
    width: u32,
    height: u32,
) -> Result<DecodeOutput, DecodeError> {
    if config.max_length == 0 {
        return Err(DecodeError::ZeroMaxLength);
    }
    let vocab = &config.vocab;
    let mut tokens: Vec<TokenId> = Vec::new();
    let mut state = DecodeState::Start;
    while state != DecodeState::Eos && tokens.len() < config.max_length {
        let scores = source
            .logits(&tokens)
            .map_err(|source| DecodeError::Source {
                step: tokens.len(),
                source,
            })?;
        if scores.len() != vocab.size() {
            return Err(DecodeError::LogitLength {
                expected: vocab.size(),
                actual: scores.len(),
            });
        }
        let mut allowed = allowed_tokens(state).expect("state is not terminal");
        if state == DecodeState::Start && !config.allow_empty_output {
            allowed = allowed.without(Special::Eos);
        }
        let tok = masked_argmax(&scores, &allowed, vocab);
        state = step(state, tok, vocab).expect("masked token is legal");
        tokens.push(tok);
    }
    let sequence = TokenSequence {
        tokens,
        width,
        height,
    };
    let parsed = decode_tokens(&sequence, vocab);
    debug_assert!(!matches!(parsed.status, ParseStatus::Invalid { .. }));
    Ok(DecodeOutput {
        truncated: state != DecodeState::Eos,
        structure: postprocess(&parsed.structure),
        sequence,
    })
}
