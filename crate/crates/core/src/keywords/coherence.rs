use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::lda::TopicModel;
use crate::corpus::MonthlyCorpus;

pub const DEFAULT_WINDOW: usize = 10;
const EPSILON: f64 = 1e-12;

/// Boolean sliding-window document frequencies for a fixed set of words.
///
/// A document shorter than the window counts as a single window.
pub struct CoherenceCounts {
    ids: BTreeMap<String, usize>,
    single: Vec<u64>,
    pairs: HashMap<(usize, usize), u64>,
    windows: u64,
}

impl CoherenceCounts {
    pub fn new(corpus: &MonthlyCorpus, words: &BTreeSet<String>, window: usize) -> Self {
        let window = window.max(2);
        let ids: BTreeMap<String, usize> = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut single = vec![0u64; ids.len()];
        let mut pairs = HashMap::new();
        let mut windows = 0u64;

        for doc in &corpus.docs {
            let seq: Vec<Option<usize>> = doc.tokens.iter().map(|t| ids.get(t).copied()).collect();
            if seq.is_empty() {
                continue;
            }
            let span = window.min(seq.len());
            for start in 0..=(seq.len() - span) {
                windows += 1;
                let mut present: Vec<usize> = seq[start..start + span].iter().flatten().copied().collect();
                present.sort_unstable();
                present.dedup();
                for (i, &a) in present.iter().enumerate() {
                    single[a] += 1;
                    for &b in &present[i + 1..] {
                        *pairs.entry((a, b)).or_insert(0) += 1;
                    }
                }
            }
        }
        Self {
            ids,
            single,
            pairs,
            windows,
        }
    }

    /// Normalized PMI in `[-1, 1]`. Pairs that never share a window score `-1`;
    /// pairs that always appear together score `1`.
    pub fn npmi(&self, a: &str, b: &str) -> f64 {
        let (Some(&ia), Some(&ib)) = (self.ids.get(a), self.ids.get(b)) else {
            return -1.0;
        };
        if ia == ib {
            return 1.0;
        }
        let key = if ia < ib { (ia, ib) } else { (ib, ia) };
        let joint = self.pairs.get(&key).copied().unwrap_or(0);
        if joint == 0 || self.windows == 0 {
            return -1.0;
        }
        if joint == self.single[ia] && joint == self.single[ib] {
            return 1.0;
        }
        let n = self.windows as f64;
        let p_ab = joint as f64 / n + EPSILON;
        let p_a = self.single[ia] as f64 / n;
        let p_b = self.single[ib] as f64 / n;
        ((p_ab / (p_a * p_b)).ln() / -p_ab.ln()).clamp(-1.0, 1.0)
    }

    /// Mean pairwise NPMI of one word list. `None` when it has fewer than two words.
    pub fn set_coherence(&self, words: &[String]) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                sum += self.npmi(&words[i], &words[j]);
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// Mean over word sets of their mean pairwise NPMI.
pub fn word_set_coherence(sets: &[Vec<String>], corpus: &MonthlyCorpus, window: usize) -> f64 {
    let words: BTreeSet<String> = sets.iter().flatten().cloned().collect();
    let counts = CoherenceCounts::new(corpus, &words, window);
    let scores: Vec<f64> = sets.iter().filter_map(|s| counts.set_coherence(s)).collect();
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

/// Model coherence: mean over topics of the NPMI coherence of each topic's top `top_m` words.
pub fn coherence(model: &TopicModel, corpus: &MonthlyCorpus, top_m: usize, window: usize) -> f64 {
    let sets: Vec<Vec<String>> = (0..model.k).map(|t| model.top_m_words(t, top_m.max(2))).collect();
    word_set_coherence(&sets, corpus, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::YearMonth;

    fn month() -> YearMonth {
        "2019-07".parse().unwrap()
    }

    fn s(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    /// Counts windows by materializing every window as a set.
    fn brute_npmi(texts: &[&str], window: usize, a: &str, b: &str) -> f64 {
        let mut n = 0.0;
        let (mut ca, mut cb, mut cab) = (0.0, 0.0, 0.0);
        for t in texts {
            let toks: Vec<&str> = t.split_whitespace().collect();
            let span = window.min(toks.len());
            for start in 0..=(toks.len() - span) {
                let w = &toks[start..start + span];
                n += 1.0;
                let ha = w.contains(&a);
                let hb = w.contains(&b);
                ca += ha as u8 as f64;
                cb += hb as u8 as f64;
                cab += (ha && hb) as u8 as f64;
            }
        }
        if cab == 0.0 {
            return -1.0;
        }
        if cab == ca && cab == cb {
            return 1.0;
        }
        let pab = cab / n + EPSILON;
        (pab / ((ca / n) * (cb / n))).ln() / -pab.ln()
    }

    #[test]
    fn always_together_scores_one() {
        let corpus = MonthlyCorpus::from_texts(month(), &["aa bb xx", "qq rr", "aa bb", "tt uu vv"]);
        let c = word_set_coherence(&[s(&["aa", "bb"])], &corpus, 3);
        assert!((c - 1.0).abs() < 1e-9);
        let everywhere = MonthlyCorpus::from_texts(month(), &["aa bb", "bb aa"]);
        assert_eq!(word_set_coherence(&[s(&["aa", "bb"])], &everywhere, 2), 1.0);
    }

    #[test]
    fn never_together_scores_minus_one() {
        let corpus = MonthlyCorpus::from_texts(month(), &["aa xx xx xx", "bb yy yy yy"]);
        assert_eq!(word_set_coherence(&[s(&["aa", "bb"])], &corpus, 2), -1.0);
    }

    #[test]
    fn matches_window_enumeration() {
        let texts = ["aa bb cc dd aa ee bb", "cc aa ff", "bb bb cc dd ee ff aa"];
        let corpus = MonthlyCorpus::from_texts(month(), &texts);
        let words: BTreeSet<String> = ["aa", "bb", "cc", "ff"].iter().map(|w| w.to_string()).collect();
        for window in [2, 3, 4, 10] {
            let counts = CoherenceCounts::new(&corpus, &words, window);
            for (a, b) in [("aa", "bb"), ("aa", "cc"), ("bb", "ff"), ("cc", "ff")] {
                let got = counts.npmi(a, b);
                let want = brute_npmi(&texts, window, a, b).clamp(-1.0, 1.0);
                assert!((got - want).abs() < 1e-9, "window {window} {a}/{b}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn planted_topics_beat_shuffled() {
        let corpus = crate::synth::two_topic_corpus(4, 40, 40);
        let (truth, shuffled) = crate::synth::two_topic_word_sets(4, 10);
        let good = word_set_coherence(&truth, &corpus, DEFAULT_WINDOW);
        let bad = word_set_coherence(&shuffled, &corpus, DEFAULT_WINDOW);
        assert!(good > bad, "{good} <= {bad}");
        assert!((-1.0..=1.0).contains(&good) && (-1.0..=1.0).contains(&bad));
    }
}
