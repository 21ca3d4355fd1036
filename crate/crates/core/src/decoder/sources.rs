//! Non-neural logit sources: a replay oracle for tests and a smoothed bigram baseline.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{accepts, LogitSource, SourceError};
use crate::codec::{Special, TokenId, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum SourceBuildError {
    #[error("replay target is not accepted by the grammar")]
    InvalidTarget,
    #[error("noise amplitude must be finite and non-negative, got {0}")]
    BadNoise(f32),
    #[error("bigram corpus is empty")]
    EmptyCorpus,
    #[error("smoothing must be positive and finite, got {0}")]
    BadSmoothing(f64),
    #[error("corpus token {0} is outside the vocabulary")]
    TokenOutOfRange(TokenId),
}

/// Scores 1 for the target's next token and 0 elsewhere, plus optional seeded noise.
///
/// Noise is drawn uniformly from `[-noise, noise]` and is a pure function of
/// `(seed, prefix length)`, so repeated queries for the same prefix agree.
#[derive(Debug, Clone)]
pub struct ReplayOracle {
    target: Vec<TokenId>,
    vocab_size: usize,
    noise: f32,
    seed: u64,
}

pub fn replay_oracle(
    target: &[TokenId],
    vocab: &Vocabulary,
    noise: f32,
    seed: u64,
) -> Result<ReplayOracle, SourceBuildError> {
    if !accepts(target, vocab) {
        return Err(SourceBuildError::InvalidTarget);
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(SourceBuildError::BadNoise(noise));
    }
    Ok(ReplayOracle {
        target: target.to_vec(),
        vocab_size: vocab.size(),
        noise,
        seed,
    })
}

impl ReplayOracle {
    pub fn target(&self) -> &[TokenId] {
        &self.target
    }
}

impl LogitSource for ReplayOracle {
    fn logits(&mut self, prefix: &[TokenId]) -> Result<Vec<f32>, SourceError> {
        let mut scores = if self.noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(prefix.len() as u64);
            (0..self.vocab_size)
                .map(|_| rng.random_range(-self.noise..=self.noise))
                .collect()
        } else {
            vec![0.0; self.vocab_size]
        };
        if let Some(&next) = self.target.get(prefix.len()) {
            scores[next as usize] += 1.0;
        }
        Ok(scores)
    }
}

/// Add-k smoothed bigram model over token sequences.
///
/// The first token of every sequence is conditioned on `[BOS]`.
#[derive(Debug, Clone)]
pub struct BigramSource {
    counts: HashMap<TokenId, (u64, HashMap<TokenId, u64>)>,
    smoothing: f64,
    vocab: Vocabulary,
}

pub fn bigram_source<I>(
    train: I,
    smoothing: f64,
    vocab: &Vocabulary,
) -> Result<BigramSource, SourceBuildError>
where
    I: IntoIterator,
    I::Item: AsRef<[TokenId]>,
{
    if !smoothing.is_finite() || smoothing <= 0.0 {
        return Err(SourceBuildError::BadSmoothing(smoothing));
    }
    let bos = vocab.special(Special::Bos);
    let mut counts: HashMap<TokenId, (u64, HashMap<TokenId, u64>)> = HashMap::new();
    let mut n_sequences = 0usize;
    for seq in train {
        n_sequences += 1;
        let mut prev = bos;
        for &t in seq.as_ref() {
            if t as usize >= vocab.size() {
                return Err(SourceBuildError::TokenOutOfRange(t));
            }
            let row = counts.entry(prev).or_default();
            row.0 += 1;
            *row.1.entry(t).or_default() += 1;
            prev = t;
        }
    }
    if n_sequences == 0 {
        return Err(SourceBuildError::EmptyCorpus);
    }
    Ok(BigramSource {
        counts,
        smoothing,
        vocab: *vocab,
    })
}

impl BigramSource {
    /// Smoothed probability of `next` following `prev`.
    pub fn probability(&self, prev: TokenId, next: TokenId) -> f64 {
        let v = self.vocab.size() as f64;
        let k = self.smoothing;
        match self.counts.get(&prev) {
            Some((total, row)) => {
                let c = row.get(&next).copied().unwrap_or(0) as f64;
                (c + k) / (*total as f64 + k * v)
            }
            None => 1.0 / v,
        }
    }
}

impl LogitSource for BigramSource {
    fn logits(&mut self, prefix: &[TokenId]) -> Result<Vec<f32>, SourceError> {
        let prev = prefix
            .last()
            .copied()
            .unwrap_or_else(|| self.vocab.special(Special::Bos));
        Ok((0..self.vocab.size() as TokenId)
            .map(|t| self.probability(prev, t) as f32)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{greedy_decode, DecodeConfig};

    fn target(v: &Vocabulary) -> Vec<TokenId> {
        let s = |x| v.special(x);
        vec![
            1,
            2,
            3,
            4,
            s(Special::Mol),
            s(Special::Rct),
            s(Special::Cnd),
            5,
            6,
            7,
            8,
            s(Special::Txt),
            s(Special::Prd),
            s(Special::Rxn),
            s(Special::Eos),
        ]
    }

    #[test]
    fn replay_rejects_invalid_target() {
        let v = Vocabulary::new(10).unwrap();
        let mut t = target(&v);
        t.pop();
        assert!(matches!(
            replay_oracle(&t, &v, 0.0, 0),
            Err(SourceBuildError::InvalidTarget)
        ));
    }

    #[test]
    fn bounded_noise_preserves_argmax() {
        let v = Vocabulary::new(10).unwrap();
        let t = target(&v);
        let cfg = DecodeConfig {
            vocab: v,
            ..Default::default()
        };
        for seed in 0..50 {
            let mut src = replay_oracle(&t, &v, 0.4, seed).unwrap();
            let out = greedy_decode(&mut src, &cfg, 20, 20).unwrap();
            assert_eq!(out.sequence.tokens, t);
        }
    }

    #[test]
    fn large_noise_stays_grammatical() {
        let v = Vocabulary::new(10).unwrap();
        let t = target(&v);
        let cfg = DecodeConfig {
            vocab: v,
            ..Default::default()
        };
        for seed in 0..50 {
            let mut src = replay_oracle(&t, &v, 2.0, seed).unwrap();
            let out = greedy_decode(&mut src, &cfg, 20, 20).unwrap();
            assert!(out.truncated || accepts(&out.sequence.tokens, &v));
        }
    }

    #[test]
    fn noise_is_a_function_of_prefix() {
        let v = Vocabulary::new(10).unwrap();
        let mut src = replay_oracle(&target(&v), &v, 1.0, 9).unwrap();
        assert_eq!(src.logits(&[1, 2]).unwrap(), src.logits(&[1, 2]).unwrap());
    }

    #[test]
    fn bigram_follows_unique_successors() {
        let v = Vocabulary::new(10).unwrap();
        let t = target(&v);
        let mut src = bigram_source([&t], 0.5, &v).unwrap();
        // brute-force successor table of the toy corpus
        let bos = v.special(Special::Bos);
        let mut prevs = vec![bos];
        prevs.extend_from_slice(&t[..t.len() - 1]);
        for (i, &prev) in prevs.iter().enumerate() {
            let successors: Vec<_> = prevs
                .iter()
                .zip(&t)
                .filter(|(p, _)| **p == prev)
                .map(|(_, n)| *n)
                .collect();
            let unique = successors.iter().all(|s| *s == successors[0]);
            if !unique {
                continue;
            }
            let scores = src.logits(&t[..i]).unwrap();
            let argmax = scores
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0 as TokenId;
            assert_eq!(argmax, t[i], "step {i}");
        }
    }

    #[test]
    fn bigram_unseen_is_uniform() {
        let v = Vocabulary::new(10).unwrap();
        let mut src = bigram_source([&target(&v)], 1.0, &v).unwrap();
        let scores = src.logits(&[9]).unwrap();
        assert!(scores.iter().all(|s| (*s - 1.0 / 20.0).abs() < 1e-7));
    }

    #[test]
    fn bigram_rejects_empty_corpus_and_bad_smoothing() {
        let v = Vocabulary::new(10).unwrap();
        let empty: [Vec<TokenId>; 0] = [];
        assert!(matches!(
            bigram_source(empty, 1.0, &v),
            Err(SourceBuildError::EmptyCorpus)
        ));
        assert!(matches!(
            bigram_source([&target(&v)], 0.0, &v),
            Err(SourceBuildError::BadSmoothing(_))
        ));
    }

    #[test]
    fn bigram_decodes_grammatically() {
        let v = Vocabulary::new(10).unwrap();
        let mut src = bigram_source([&target(&v)], 0.1, &v).unwrap();
        let cfg = DecodeConfig {
            vocab: v,
            max_length: 200,
            ..Default::default()
        };
        let out = greedy_decode(&mut src, &cfg, 20, 20).unwrap();
        assert!(out.truncated || accepts(&out.sequence.tokens, &v));
    }
}
