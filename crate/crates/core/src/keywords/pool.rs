use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::lda::TopicModel;
use super::{by_score_then_key, Bigram, KeywordError};

/// The curated keyword set tracked through the ranking stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordPool {
    pub tfidf_set: BTreeSet<Bigram>,
    pub lda_set: BTreeSet<Bigram>,
    pub allow_list: BTreeSet<Bigram>,
    pub deny_list: BTreeSet<Bigram>,
    pub pool: BTreeSet<Bigram>,
    /// Set when the intersection was empty and the pool fell back to the allow-list.
    pub empty_intersection: bool,
}

impl KeywordPool {
    pub fn keywords(&self) -> impl Iterator<Item = &Bigram> {
        self.pool.iter()
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }
}

/// Candidates whose composite token is among the top `top_m` words of any topic.
pub fn lda_bigrams(model: &TopicModel, candidates: &BTreeSet<Bigram>, top_m: usize) -> BTreeSet<Bigram> {
    let top: BTreeSet<String> = (0..model.k).flat_map(|t| model.top_m_words(t, top_m)).collect();
    candidates
        .iter()
        .filter(|b| top.contains(&b.composite()))
        .cloned()
        .collect()
}

/// Keeps the `cap` best-scoring members of `tfidf_set ∩ lda_set` (minus `deny_list`)
/// and adds the allow-list.
///
/// An empty intersection is an error only when the allow-list is empty too;
/// otherwise the pool is the allow-list and `empty_intersection` is set.
pub fn build_pool(
    tfidf_set: &BTreeSet<Bigram>,
    lda_set: &BTreeSet<Bigram>,
    avg_scores: &BTreeMap<Bigram, f64>,
    allow_list: &BTreeSet<Bigram>,
    deny_list: &BTreeSet<Bigram>,
    cap: usize,
) -> Result<KeywordPool, KeywordError> {
    if cap == 0 {
        return Err(KeywordError::InvalidParameter("pool cap must be >= 1".into()));
    }
    let mut inter: Vec<(Bigram, f64)> = tfidf_set
        .intersection(lda_set)
        .filter(|b| !deny_list.contains(b))
        .map(|b| (b.clone(), avg_scores.get(b).copied().unwrap_or(0.0)))
        .collect();
    if inter.is_empty() && allow_list.is_empty() {
        return Err(KeywordError::EmptyIntersection);
    }
    inter.sort_by(by_score_then_key);
    let empty_intersection = inter.is_empty();
    let pool: BTreeSet<Bigram> = inter
        .into_iter()
        .take(cap)
        .map(|(b, _)| b)
        .chain(allow_list.iter().cloned())
        .collect();
    Ok(KeywordPool {
        tfidf_set: tfidf_set.clone(),
        lda_set: lda_set.clone(),
        allow_list: allow_list.clone(),
        deny_list: deny_list.clone(),
        pool,
        empty_intersection,
    })
}
