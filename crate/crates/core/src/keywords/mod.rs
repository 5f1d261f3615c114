//! Candidate keyword extraction: TF-IDF bigrams, LDA topic bigrams and the
//! pool built from their intersection.

mod coherence;
mod lda;
mod pool;
mod tfidf;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use coherence::{coherence, word_set_coherence, CoherenceCounts, DEFAULT_WINDOW};
pub use lda::{
    fit_lda, merge_bigrams, select_topic_count, GibbsSampler, LdaParams, TopicModel, TopicSelection, DEFAULT_TOP_M,
};
pub use pool::{build_pool, lda_bigrams, KeywordPool};
pub use tfidf::{tfidf_bigrams, TfidfResult, TfidfTable};

#[derive(Debug, Error, PartialEq)]
pub enum KeywordError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus has no tokens to model")]
    DegenerateVocab,
    #[error("TF-IDF and LDA candidate sets do not intersect")]
    EmptyIntersection,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed keyword record on line {0}")]
    Malformed(usize),
}

/// An ordered pair of adjacent tokens.
///
/// Ordering matches the lexicographic order of the canonical `"first second"` key
/// because tokens never contain characters that sort below a space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bigram {
    pub first: String,
    pub second: String,
}

impl Bigram {
    pub fn new(first: impl Into<String>, second: impl Into<String>) -> Self {
        Self {
            first: first.into(),
            second: second.into(),
        }
    }

    /// Canonical key, `"first second"`.
    pub fn key(&self) -> String {
        format!("{} {}", self.first, self.second)
    }

    /// Composite token used when bigram occurrences are merged before topic modelling.
    pub fn composite(&self) -> String {
        format!("{}_{}", self.first, self.second)
    }
}

impl fmt::Display for Bigram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.first, self.second)
    }
}

impl FromStr for Bigram {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => Ok(Bigram::new(a.to_lowercase(), b.to_lowercase())),
            _ => Err(format!("`{s}` is not a two-token bigram")),
        }
    }
}

impl Serialize for Bigram {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bigram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Sort order used for every ranked list: score descending, then key ascending.
pub(crate) fn by_score_then_key(a: &(Bigram, f64), b: &(Bigram, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}
