//! Skip-gram with negative sampling, trained per month. Reproduces the static
//! word-embedding baseline: one vector per vocabulary item, regardless of context.

use std::collections::HashMap;

use rand::distributions::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use super::{EmbeddingError, VectorProvider, MIN_DIMENSION};
use crate::corpus::{MonthlyCorpus, TokenDoc};

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsParams {
    pub dimension: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SgnsParams {
    fn default() -> Self {
        Self {
            dimension: 100,
            window: 5,
            epochs: 5,
            negative_samples: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `-ln σ(pos·w) - Σ ln σ(-neg·w)` for one (center, context, negatives) example.
pub fn sgns_loss(w: &[f64], pos: &[f64], negs: &[&[f64]]) -> f64 {
    -ln_sigmoid(dot(pos, w)) - negs.iter().map(|n| ln_sigmoid(-dot(n, w))).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradient of [`sgns_loss`] with respect to every argument.
pub fn sgns_gradients(w: &[f64], pos: &[f64], negs: &[&[f64]]) -> SgnsGradients {
    let g_pos = sigmoid(dot(pos, w)) - 1.0;
    let mut center: Vec<f64> = pos.iter().map(|p| g_pos * p).collect();
    let context = w.iter().map(|x| g_pos * x).collect();
    let negatives = negs
        .iter()
        .map(|n| {
            let g = sigmoid(dot(n, w));
            for (c, v) in center.iter_mut().zip(n.iter()) {
                *c += g * v;
            }
            w.iter().map(|x| g * x).collect()
        })
        .collect();
    SgnsGradients {
        center,
        context,
        negatives,
    }
}

/// Input vectors of a trained month model, looked up by token.
#[derive(Debug, Clone)]
pub struct StaticSgnsProvider {
    dimension: usize,
    index: HashMap<String, usize>,
    vectors: Vec<Vec<f64>>,
    epoch_losses: Vec<f64>,
}

impl StaticSgnsProvider {
    pub fn train(corpus: &MonthlyCorpus, params: &SgnsParams) -> Result<Self, EmbeddingError> {
        if corpus.token_count() == 0 {
            return Err(EmbeddingError::EmptyCorpus);
        }
        if params.dimension < MIN_DIMENSION || params.window == 0 || params.epochs == 0 {
            return Err(EmbeddingError::InvalidSpec(
                "sgns needs dimension >= 8 and window, epochs >= 1".into(),
            ));
        }
        let d = params.dimension;
        let vocab: Vec<&String> = corpus.vocab.keys().collect();
        let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| ((*w).clone(), i)).collect();
        let weights: Vec<f64> = vocab.iter().map(|w| (corpus.vocab[*w] as f64).powf(0.75)).collect();
        let noise = WeightedIndex::new(&weights).map_err(|e| EmbeddingError::InvalidSpec(e.to_string()))?;

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let bound = 0.5 / d as f64;
        let mut input: Vec<Vec<f64>> = (0..vocab.len())
            .map(|_| (0..d).map(|_| rng.gen_range(-bound..bound)).collect())
            .collect();
        let mut output = vec![vec![0.0; d]; vocab.len()];

        let docs: Vec<Vec<usize>> = corpus
            .docs
            .iter()
            .map(|doc| doc.tokens.iter().map(|t| index[t]).collect())
            .collect();
        let total = (params.epochs * corpus.token_count()) as f64;
        let mut processed = 0usize;
        let mut epoch_losses = Vec::with_capacity(params.epochs);
        let mut neg_ids = Vec::with_capacity(params.negative_samples);

        for _ in 0..params.epochs {
            let mut loss = 0.0;
            for doc in &docs {
                for (i, &center) in doc.iter().enumerate() {
                    let lr = params.learning_rate * (1.0 - processed as f64 / total).max(1e-4);
                    processed += 1;
                    let lo = i.saturating_sub(params.window);
                    let hi = (i + params.window + 1).min(doc.len());
                    for j in lo..hi {
                        if j == i {
                            continue;
                        }
                        let ctx = doc[j];
                        neg_ids.clear();
                        for _ in 0..params.negative_samples {
                            let n = noise.sample(&mut rng);
                            if n != ctx {
                                neg_ids.push(n);
                            }
                        }
                        let negs: Vec<&[f64]> = neg_ids.iter().map(|&n| output[n].as_slice()).collect();
                        loss += sgns_loss(&input[center], &output[ctx], &negs);
                        let g = sgns_gradients(&input[center], &output[ctx], &negs);
                        for (x, gx) in output[ctx].iter_mut().zip(&g.context) {
                            *x -= lr * gx;
                        }
                        for (&n, gn) in neg_ids.iter().zip(&g.negatives) {
                            for (x, gx) in output[n].iter_mut().zip(gn) {
                                *x -= lr * gx;
                            }
                        }
                        for (x, gx) in input[center].iter_mut().zip(&g.center) {
                            *x -= lr * gx;
                        }
                    }
                }
            }
            epoch_losses.push(loss);
        }

        Ok(Self {
            dimension: d,
            index,
            vectors: input,
            epoch_losses,
        })
    }

    pub fn word_vector(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.vectors[i].as_slice())
    }

    /// Summed training loss per epoch.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }
}

impl VectorProvider for StaticSgnsProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn token_vector(&self, doc: &TokenDoc, position: usize) -> Result<Vec<f64>, EmbeddingError> {
        doc.tokens
            .get(position)
            .and_then(|t| self.word_vector(t))
            .map(<[f64]>::to_vec)
            .ok_or_else(|| EmbeddingError::MissingVector {
                doc_id: doc.article_id.clone(),
                position,
            })
    }
}
