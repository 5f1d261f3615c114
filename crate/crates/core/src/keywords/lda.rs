use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coherence::{coherence, DEFAULT_WINDOW};
use super::{Bigram, KeywordError};
use crate::corpus::{MonthlyCorpus, TokenDoc};
use crate::month::YearMonth;

pub const DEFAULT_TOP_M: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaParams {
    /// Symmetric document-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Retain every `sample_lag`-th sweep after burn-in.
    pub sample_lag: usize,
    pub top_m: usize,
    pub coherence_window: usize,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: 0.01,
            iterations: 500,
            burn_in: 200,
            sample_lag: 10,
            top_m: DEFAULT_TOP_M,
            coherence_window: DEFAULT_WINDOW,
        }
    }
}

impl LdaParams {
    pub fn alpha_for(&self, k: usize) -> f64 {
        self.alpha.unwrap_or(50.0 / k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub month: YearMonth,
    pub k: usize,
    pub vocab: Vec<String>,
    pub doc_ids: Vec<String>,
    pub doc_topic: Vec<Vec<f64>>,
    pub topic_word: Vec<Vec<f64>>,
    pub top_words: Vec<Vec<String>>,
    pub coherence: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
}

impl TopicModel {
    /// Top `m` words of `topic`, by probability descending then word ascending.
    pub fn top_m_words(&self, topic: usize, m: usize) -> Vec<String> {
        let row = &self.topic_word[topic];
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then_with(|| self.vocab[a].cmp(&self.vocab[b])));
        idx.into_iter().take(m).map(|i| self.vocab[i].clone()).collect()
    }

    /// Text dump: a header line with the fit settings, then one line per topic.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "# month={} k={} alpha={} beta={} seed={} iterations={} coherence={}\n",
            self.month, self.k, self.alpha, self.beta, self.seed, self.iterations, self.coherence
        );
        for (t, words) in self.top_words.iter().enumerate() {
            out.push_str(&format!("topic {t}\t{}\n", words.join(" ")));
        }
        out
    }
}

/// Collapsed Gibbs sampler state for one corpus and topic count.
pub struct GibbsSampler {
    k: usize,
    vocab_len: usize,
    alpha: f64,
    beta: f64,
    words: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u32>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl GibbsSampler {
    pub fn new(words: Vec<Vec<usize>>, vocab_len: usize, k: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut doc_topic = vec![vec![0u32; k]; words.len()];
        let mut topic_word = vec![vec![0u32; vocab_len]; k];
        let mut topic_total = vec![0u32; k];
        let assignments: Vec<Vec<usize>> = words
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let t = rng.gen_range(0..k);
                        doc_topic[d][t] += 1;
                        topic_word[t][w] += 1;
                        topic_total[t] += 1;
                        t
                    })
                    .collect()
            })
            .collect();
        Self {
            k,
            vocab_len,
            alpha,
            beta,
            words,
            assignments,
            doc_topic,
            topic_word,
            topic_total,
            rng,
            weights: vec![0.0; k],
        }
    }

    /// Moves token `i` of document `d` to `topic`, keeping every count table in sync.
    pub fn reassign(&mut self, d: usize, i: usize, topic: usize) {
        let w = self.words[d][i];
        let old = self.assignments[d][i];
        self.doc_topic[d][old] -= 1;
        self.topic_word[old][w] -= 1;
        self.topic_total[old] -= 1;
        self.assignments[d][i] = topic;
        self.doc_topic[d][topic] += 1;
        self.topic_word[topic][w] += 1;
        self.topic_total[topic] += 1;
    }

    /// Draws a new topic for token `i` of document `d` from its full conditional.
    pub fn resample(&mut self, d: usize, i: usize) {
        let w = self.words[d][i];
        let old = self.assignments[d][i];
        self.doc_topic[d][old] -= 1;
        self.topic_word[old][w] -= 1;
        self.topic_total[old] -= 1;

        let vbeta = self.vocab_len as f64 * self.beta;
        let mut total = 0.0;
        for t in 0..self.k {
            let p = (self.doc_topic[d][t] as f64 + self.alpha) * (self.topic_word[t][w] as f64 + self.beta)
                / (self.topic_total[t] as f64 + vbeta);
            total += p;
            self.weights[t] = total;
        }
        let u = self.rng.gen::<f64>() * total;
        let topic = self.weights.iter().position(|&c| u < c).unwrap_or(self.k - 1);

        self.assignments[d][i] = topic;
        self.doc_topic[d][topic] += 1;
        self.topic_word[topic][w] += 1;
        self.topic_total[topic] += 1;
    }

    pub fn sweep(&mut self) {
        for d in 0..self.words.len() {
            for i in 0..self.words[d].len() {
                self.resample(d, i);
            }
        }
    }

    pub fn doc_len(&self, d: usize) -> usize {
        self.words[d].len()
    }

    pub fn doc_topic_counts(&self) -> &[Vec<u32>] {
        &self.doc_topic
    }

    pub fn topic_word_counts(&self) -> &[Vec<u32>] {
        &self.topic_word
    }

    /// Verifies that all count tables agree with the current assignments.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut dt = vec![vec![0u32; self.k]; self.words.len()];
        let mut tw = vec![vec![0u32; self.vocab_len]; self.k];
        let mut tt = vec![0u32; self.k];
        for (d, doc) in self.words.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let t = self.assignments[d][i];
                dt[d][t] += 1;
                tw[t][w] += 1;
                tt[t] += 1;
            }
            let s: u32 = self.doc_topic[d].iter().sum();
            if s as usize != doc.len() {
                return Err(format!("doc {d}: topic counts sum to {s}, length {}", doc.len()));
            }
        }
        for t in 0..self.k {
            let s: u32 = self.topic_word[t].iter().sum();
            if s != self.topic_total[t] {
                return Err(format!("topic {t}: word counts sum to {s}, total {}", self.topic_total[t]));
            }
        }
        if dt != self.doc_topic || tw != self.topic_word || tt != self.topic_total {
            return Err("count tables disagree with assignments".into());
        }
        Ok(())
    }
}

/// Replaces adjacent occurrences of candidate bigrams with composite tokens
/// (`first_second`).
///
/// Candidates are applied in the given priority order, each one merging its
/// non-overlapping occurrences left to right in the sequence left by earlier merges.
pub fn merge_bigrams(corpus: &MonthlyCorpus, candidates: &[Bigram]) -> MonthlyCorpus {
    let docs = corpus
        .docs
        .iter()
        .map(|doc| {
            let mut toks = doc.tokens.clone();
            for b in candidates {
                if toks.len() < 2 {
                    break;
                }
                let mut out = Vec::with_capacity(toks.len());
                let mut p = 0;
                while p < toks.len() {
                    if p + 1 < toks.len() && toks[p] == b.first && toks[p + 1] == b.second {
                        out.push(b.composite());
                        p += 2;
                    } else {
                        out.push(std::mem::take(&mut toks[p]));
                        p += 1;
                    }
                }
                toks = out;
            }
            TokenDoc {
                article_id: doc.article_id.clone(),
                month: doc.month,
                tokens: toks,
            }
        })
        .collect();
    MonthlyCorpus::new(corpus.month, docs)
}

/// Fits LDA by collapsed Gibbs sampling. Counts from every `sample_lag`-th sweep at
/// or after `burn_in` are averaged before Dirichlet smoothing.
pub fn fit_lda(corpus: &MonthlyCorpus, k: usize, params: &LdaParams, seed: u64) -> Result<TopicModel, KeywordError> {
    if k < 2 {
        return Err(KeywordError::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    if params.iterations <= params.burn_in {
        return Err(KeywordError::InvalidParameter("iterations must exceed burn_in".into()));
    }
    if params.sample_lag == 0 || params.top_m == 0 {
        return Err(KeywordError::InvalidParameter("sample_lag and top_m must be >= 1".into()));
    }
    if corpus.is_empty() {
        return Err(KeywordError::EmptyCorpus);
    }
    if corpus.vocab.is_empty() {
        return Err(KeywordError::DegenerateVocab);
    }

    let vocab: Vec<String> = corpus.vocab.keys().cloned().collect();
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let words: Vec<Vec<usize>> = corpus
        .docs
        .iter()
        .map(|d| d.tokens.iter().map(|t| index[t.as_str()]).collect())
        .collect();

    let alpha = params.alpha_for(k);
    let beta = params.beta;
    let v = vocab.len();
    let mut sampler = GibbsSampler::new(words, v, k, alpha, beta, seed);

    let mut acc_dt = vec![vec![0.0f64; k]; corpus.docs.len()];
    let mut acc_tw = vec![vec![0.0f64; v]; k];
    let mut retained = 0usize;
    for sweep in 0..params.iterations {
        sampler.sweep();
        if sweep >= params.burn_in && (sweep - params.burn_in) % params.sample_lag == 0 {
            retained += 1;
            for (acc, row) in acc_dt.iter_mut().zip(sampler.doc_topic_counts()) {
                for (a, &c) in acc.iter_mut().zip(row) {
                    *a += c as f64;
                }
            }
            for (acc, row) in acc_tw.iter_mut().zip(sampler.topic_word_counts()) {
                for (a, &c) in acc.iter_mut().zip(row) {
                    *a += c as f64;
                }
            }
        }
    }

    let r = retained as f64;
    let smooth = |row: &[f64], prior: f64| -> Vec<f64> {
        let counts: Vec<f64> = row.iter().map(|c| c / r).collect();
        let denom: f64 = counts.iter().sum::<f64>() + row.len() as f64 * prior;
        counts.iter().map(|c| (c + prior) / denom).collect()
    };
    let doc_topic: Vec<Vec<f64>> = acc_dt.iter().map(|row| smooth(row, alpha)).collect();
    let topic_word: Vec<Vec<f64>> = acc_tw.iter().map(|row| smooth(row, beta)).collect();

    let mut model = TopicModel {
        month: corpus.month,
        k,
        vocab,
        doc_ids: corpus.docs.iter().map(|d| d.article_id.clone()).collect(),
        doc_topic,
        topic_word,
        top_words: Vec::new(),
        coherence: 0.0,
        alpha,
        beta,
        seed,
        iterations: params.iterations,
    };
    model.top_words = (0..k).map(|t| model.top_m_words(t, params.top_m)).collect();
    model.coherence = coherence(&model, corpus, params.top_m, params.coherence_window);
    Ok(model)
}

/// Outcome of a topic-count search.
#[derive(Debug, Clone)]
pub struct TopicSelection {
    pub best_k: usize,
    pub scores: Vec<(usize, f64)>,
    pub model: TopicModel,
}

/// Fits one model per grid value (seed `seed + k`) and keeps the most coherent;
/// ties go to the smaller `k`.
pub fn select_topic_count(
    corpus: &MonthlyCorpus,
    grid: &[usize],
    params: &LdaParams,
    seed: u64,
) -> Result<TopicSelection, KeywordError> {
    if grid.is_empty() || grid.iter().any(|&k| k < 2) {
        return Err(KeywordError::InvalidParameter("topic grid must be nonempty with every k >= 2".into()));
    }
    let mut ks = grid.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut best: Option<TopicModel> = None;
    let mut scores = Vec::with_capacity(ks.len());
    for k in ks {
        let model = fit_lda(corpus, k, params, seed.wrapping_add(k as u64))?;
        scores.push((k, model.coherence));
        if best.as_ref().map_or(true, |b| model.coherence > b.coherence) {
            best = Some(model);
        }
    }
    let model = best.expect("grid is nonempty");
    Ok(TopicSelection {
        best_k: model.k,
        scores,
        model,
    })
}
