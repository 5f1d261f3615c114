use std::collections::{BTreeMap, BTreeSet};

use super::{by_score_then_key, Bigram, KeywordError};
use crate::corpus::MonthlyCorpus;
use crate::month::YearMonth;

/// Per-document bigram TF-IDF scores for one month, plus per-bigram aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfTable {
    pub month: YearMonth,
    pub scores: BTreeMap<(Bigram, String), f64>,
    pub avg: BTreeMap<Bigram, f64>,
    pub max: BTreeMap<Bigram, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfResult {
    pub table: TfidfTable,
    /// Union of the top bigrams by average and by maximum score, ordered by
    /// average score descending.
    pub candidates: Vec<Bigram>,
}

impl TfidfResult {
    /// Keyword list TSV: `first<TAB>second<TAB>avg_tfidf<TAB>max_tfidf`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for b in &self.candidates {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                b.first, b.second, self.table.avg[b], self.table.max[b]
            ));
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Vec<(Bigram, f64, f64)>, KeywordError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, line)| {
                let cols: Vec<&str> = line.split('\t').collect();
                if cols.len() != 4 {
                    return Err(KeywordError::Malformed(i + 1));
                }
                let avg = cols[2].parse().map_err(|_| KeywordError::Malformed(i + 1))?;
                let max = cols[3].parse().map_err(|_| KeywordError::Malformed(i + 1))?;
                Ok((Bigram::new(cols[0], cols[1]), avg, max))
            })
            .collect()
    }
}

/// Scores every adjacent ordered bigram in every document.
///
/// `tf` is the raw occurrence count, `idf = ln((1 + N) / (1 + df)) + 1`.
pub fn tfidf_bigrams(
    corpus: &MonthlyCorpus,
    top_k_avg: usize,
    top_k_max: usize,
) -> Result<TfidfResult, KeywordError> {
    if corpus.is_empty() {
        return Err(KeywordError::EmptyCorpus);
    }
    if top_k_avg == 0 || top_k_max == 0 {
        return Err(KeywordError::InvalidParameter("top_k values must be >= 1".into()));
    }

    let mut tf: Vec<(&str, BTreeMap<Bigram, usize>)> = Vec::with_capacity(corpus.docs.len());
    let mut df: BTreeMap<Bigram, usize> = BTreeMap::new();
    for doc in &corpus.docs {
        let mut counts = BTreeMap::new();
        for w in doc.tokens.windows(2) {
            *counts.entry(Bigram::new(w[0].as_str(), w[1].as_str())).or_insert(0) += 1;
        }
        for b in counts.keys() {
            *df.entry(b.clone()).or_insert(0) += 1;
        }
        tf.push((doc.article_id.as_str(), counts));
    }

    let n = corpus.docs.len() as f64;
    let idf: BTreeMap<&Bigram, f64> = df
        .iter()
        .map(|(b, &d)| (b, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
        .collect();

    let mut scores = BTreeMap::new();
    let mut sums: BTreeMap<Bigram, f64> = BTreeMap::new();
    let mut max: BTreeMap<Bigram, f64> = BTreeMap::new();
    for (doc_id, counts) in &tf {
        for (b, &c) in counts {
            let s = c as f64 * idf[b];
            scores.insert((b.clone(), doc_id.to_string()), s);
            *sums.entry(b.clone()).or_insert(0.0) += s;
            let m = max.entry(b.clone()).or_insert(0.0);
            *m = m.max(s);
        }
    }
    let avg: BTreeMap<Bigram, f64> = sums
        .into_iter()
        .map(|(b, s)| {
            let d = df[&b] as f64;
            (b, s / d)
        })
        .collect();

    let top = |m: &BTreeMap<Bigram, f64>, k: usize| -> Vec<Bigram> {
        let mut v: Vec<(Bigram, f64)> = m.iter().map(|(b, &s)| (b.clone(), s)).collect();
        v.sort_by(by_score_then_key);
        v.into_iter().take(k).map(|(b, _)| b).collect()
    };
    let chosen: BTreeSet<Bigram> = top(&avg, top_k_avg)
        .into_iter()
        .chain(top(&max, top_k_max))
        .collect();
    let mut ranked: Vec<(Bigram, f64)> = chosen.into_iter().map(|b| {
        let s = avg[&b];
        (b, s)
    }).collect();
    ranked.sort_by(by_score_then_key);

    Ok(TfidfResult {
        table: TfidfTable {
            month: corpus.month,
            scores,
            avg,
            max,
        },
        candidates: ranked.into_iter().map(|(b, _)| b).collect(),
    })
}
