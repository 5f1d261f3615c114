//! Per-month bigram vectors built by averaging token vectors over every
//! adjacent, correctly ordered occurrence of the bigram.

mod fallback;
mod precomputed;
mod sgns;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{MonthlyCorpus, TokenDoc};
use crate::keywords::Bigram;
use crate::month::YearMonth;

pub use fallback::FallbackProvider;
pub use precomputed::PrecomputedProvider;
pub use sgns::{sgns_gradients, sgns_loss, SgnsGradients, SgnsParams, StaticSgnsProvider};

pub const MIN_DIMENSION: usize = 8;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("bad vector file header: {0}")]
    BadHeader(String),
    #[error("dimension mismatch on line {0}")]
    DimensionMismatch(usize),
    #[error("malformed vector record on line {0}")]
    Malformed(usize),
    #[error("no vector for ({doc_id}, {position})")]
    MissingVector { doc_id: String, position: usize },
    #[error("vector for ({doc_id}, {position}) is for token `{found}`, document has `{expected}`")]
    TokenMismatch {
        doc_id: String,
        position: usize,
        expected: String,
        found: String,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid provider settings: {0}")]
    InvalidSpec(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Source of per-occurrence token vectors.
pub trait VectorProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Vector of `doc.tokens[position]` in the context of `doc`.
    fn token_vector(&self, doc: &TokenDoc, position: usize) -> Result<Vec<f64>, EmbeddingError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    PrecomputedFile,
    DeterministicFallback,
    StaticSgns,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "precomputed_file" => Ok(Self::PrecomputedFile),
            "deterministic_fallback" => Ok(Self::DeterministicFallback),
            "static_sgns" => Ok(Self::StaticSgns),
            other => Err(format!("unknown provider `{other}`")),
        }
    }
}

/// Provider selection plus its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingProviderSpec {
    pub kind: ProviderKind,
    pub dimension: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    pub learning_rate: f64,
    /// Directory holding `<YYYY-MM>.vec` files, for `precomputed_file`.
    pub vectors_dir: Option<String>,
}

impl Default for EmbeddingProviderSpec {
    fn default() -> Self {
        Self {
            kind: ProviderKind::DeterministicFallback,
            dimension: 100,
            window: 5,
            epochs: 5,
            negative_samples: 5,
            learning_rate: 0.025,
            vectors_dir: None,
        }
    }
}

impl EmbeddingProviderSpec {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dimension < MIN_DIMENSION {
            return Err(EmbeddingError::InvalidSpec(format!(
                "dimension must be >= {MIN_DIMENSION}, got {}",
                self.dimension
            )));
        }
        if self.window == 0 {
            return Err(EmbeddingError::InvalidSpec("window must be >= 1".into()));
        }
        if self.kind == ProviderKind::PrecomputedFile && self.vectors_dir.is_none() {
            return Err(EmbeddingError::InvalidSpec("precomputed_file needs vectors_dir".into()));
        }
        Ok(())
    }

    /// Builds the provider for one month's corpus.
    pub fn build(&self, corpus: &MonthlyCorpus, seed: u64) -> Result<Box<dyn VectorProvider>, EmbeddingError> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::DeterministicFallback => Box::new(FallbackProvider::new(seed, self.dimension, self.window)?),
            ProviderKind::StaticSgns => Box::new(StaticSgnsProvider::train(
                corpus,
                &SgnsParams {
                    dimension: self.dimension,
                    window: self.window,
                    epochs: self.epochs,
                    negative_samples: self.negative_samples,
                    learning_rate: self.learning_rate,
                    seed,
                },
            )?),
            ProviderKind::PrecomputedFile => {
                let dir = self.vectors_dir.as_deref().unwrap_or_default();
                let path = std::path::Path::new(dir).join(format!("{}.vec", corpus.month));
                let provider = PrecomputedProvider::load(&path)?;
                if provider.dimension() != self.dimension {
                    return Err(EmbeddingError::InvalidSpec(format!(
                        "{} has dimension {}, config says {}",
                        path.display(),
                        provider.dimension(),
                        self.dimension
                    )));
                }
                Box::new(provider)
            }
        })
    }
}

/// One vector per (bigram, month).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramEmbedding {
    pub bigram: Bigram,
    pub month: YearMonth,
    pub vector: Vec<f64>,
    pub occurrence_count: usize,
}

impl BigramEmbedding {
    /// `first second<TAB>month<TAB>occurrences<TAB>f1 ... fd`
    pub fn to_line(&self) -> String {
        let floats: Vec<String> = self.vector.iter().map(|f| f.to_string()).collect();
        format!("{}\t{}\t{}\t{}", self.bigram, self.month, self.occurrence_count, floats.join(" "))
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, EmbeddingError> {
        let bad = || EmbeddingError::Malformed(line_no);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad());
        }
        let vector = cols[3]
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            bigram: cols[0].parse().map_err(|_| bad())?,
            month: cols[1].parse().map_err(|_| bad())?,
            occurrence_count: cols[2].parse().map_err(|_| bad())?,
            vector,
        })
    }

    pub fn parse_dump(text: &str) -> Result<Vec<Self>, EmbeddingError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| Self::parse_line(l, i + 1))
            .collect()
    }
}

/// Every `(doc_id, p)` with `tokens[p] == first && tokens[p + 1] == second`.
/// Overlapping matches count; results are ordered by document id, then position.
pub fn find_occurrences(corpus: &MonthlyCorpus, bigram: &Bigram) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for doc in &corpus.docs {
        for (p, w) in doc.tokens.windows(2).enumerate() {
            if w[0] == bigram.first && w[1] == bigram.second {
                out.push((doc.article_id.clone(), p));
            }
        }
    }
    out.sort();
    out
}

/// Averages `(v_first + v_second) / 2` over all occurrences. `None` if the bigram
/// does not occur this month.
pub fn embed_bigram(
    corpus: &MonthlyCorpus,
    bigram: &Bigram,
    provider: &dyn VectorProvider,
) -> Result<Option<BigramEmbedding>, EmbeddingError> {
    let docs: BTreeMap<&str, &TokenDoc> = corpus.docs.iter().map(|d| (d.article_id.as_str(), d)).collect();
    let occurrences = find_occurrences(corpus, bigram);
    if occurrences.is_empty() {
        return Ok(None);
    }
    let dim = provider.dimension();
    let mut sum = vec![0.0; dim];
    for (doc_id, p) in &occurrences {
        let doc = docs[doc_id.as_str()];
        let a = provider.token_vector(doc, *p)?;
        let b = provider.token_vector(doc, p + 1)?;
        for ((s, x), y) in sum.iter_mut().zip(&a).zip(&b) {
            *s += (x + y) / 2.0;
        }
    }
    let n = occurrences.len() as f64;
    Ok(Some(BigramEmbedding {
        bigram: bigram.clone(),
        month: corpus.month,
        vector: sum.into_iter().map(|s| s / n).collect(),
        occurrence_count: occurrences.len(),
    }))
}
