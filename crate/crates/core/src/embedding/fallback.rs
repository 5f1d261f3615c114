use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{EmbeddingError, VectorProvider, MIN_DIMENSION};
use crate::corpus::TokenDoc;

/// Offline stand-in for a contextual encoder.
///
/// Each vocabulary item gets a seeded pseudo-random unit vector; a token's
/// vector is the normalized sum over the `window` tokens centred on it, so the
/// same word in different surroundings gets different vectors.
#[derive(Debug, Clone)]
pub struct FallbackProvider {
    seed: u64,
    dimension: usize,
    window: usize,
}

impl FallbackProvider {
    pub fn new(seed: u64, dimension: usize, window: usize) -> Result<Self, EmbeddingError> {
        if dimension < MIN_DIMENSION {
            return Err(EmbeddingError::InvalidSpec(format!("dimension must be >= {MIN_DIMENSION}")));
        }
        if window == 0 {
            return Err(EmbeddingError::InvalidSpec("window must be >= 1".into()));
        }
        Ok(Self { seed, dimension, window })
    }

    /// Unit vector determined by `(seed, token)` alone.
    pub fn hash_vector(&self, token: &str) -> Vec<f64> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(token.as_bytes());
        let digest = h.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(key);
        let mut v: Vec<f64> = (0..self.dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }

    /// Token span `[lo, hi)` of the context window around `position`.
    fn span(&self, len: usize, position: usize) -> (usize, usize) {
        let left = (self.window - 1) / 2;
        let right = self.window - 1 - left;
        (position.saturating_sub(left), (position + right + 1).min(len))
    }
}

impl VectorProvider for FallbackProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn token_vector(&self, doc: &TokenDoc, position: usize) -> Result<Vec<f64>, EmbeddingError> {
        if position >= doc.tokens.len() {
            return Err(EmbeddingError::MissingVector {
                doc_id: doc.article_id.clone(),
                position,
            });
        }
        let (lo, hi) = self.span(doc.tokens.len(), position);
        let mut sum = vec![0.0; self.dimension];
        for tok in &doc.tokens[lo..hi] {
            for (s, x) in sum.iter_mut().zip(self.hash_vector(tok)) {
                *s += x;
            }
        }
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            sum.iter_mut().for_each(|x| *x /= norm);
        } else {
            // Opposing hash vectors cancelled out; fall back to the token's own vector.
            sum = self.hash_vector(&doc.tokens[position]);
        }
        Ok(sum)
    }
}
