//! Monthly similarity rankings of keyword pairs and rank-delta detection.
//!
//! Rank 1 is the most similar pair. A pair's delta for month `m` is
//! `rank[m - 1] - rank[m]`, so a positive delta means it climbed toward rank 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::keywords::Bigram;
use crate::month::YearMonth;

#[derive(Debug, Error, PartialEq)]
pub enum RankingError {
    #[error("zero-length vector")]
    ZeroVector,
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("fewer than two keywords have an embedding in {0}")]
    FewerThanTwoEmbedded(YearMonth),
    #[error("rankings are not consecutive months ({0} then {1})")]
    NonConsecutiveMonths(YearMonth, YearMonth),
    #[error("malformed ranking record on line {0}")]
    Malformed(usize),
}

/// An unordered keyword pair stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    a: Bigram,
    b: Bigram,
}

impl PairKey {
    /// Canonicalizes the order; `None` if both keywords are the same.
    pub fn new(x: Bigram, y: Bigram) -> Option<Self> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(Self { a: x, b: y }),
            std::cmp::Ordering::Greater => Some(Self { a: y, b: x }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn a(&self) -> &Bigram {
        &self.a
    }

    pub fn b(&self) -> &Bigram {
        &self.b
    }

    /// File-name friendly form, e.g. `cloud_computing--data_center`.
    pub fn slug(&self) -> String {
        format!("{}--{}", self.a.composite(), self.b.composite())
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.a, self.b)
    }
}

impl FromStr for PairKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (x, y) = s.split_once('|').ok_or_else(|| format!("`{s}` is not `first second|first second`"))?;
        PairKey::new(x.parse()?, y.parse()?).ok_or_else(|| format!("`{s}` pairs a keyword with itself"))
    }
}

impl Serialize for PairKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PairKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// All canonical pairs over a keyword set.
pub fn all_pairs<'a>(keywords: impl IntoIterator<Item = &'a Bigram>) -> Vec<PairKey> {
    let ks: Vec<&Bigram> = keywords.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    let mut out = Vec::with_capacity(ks.len() * ks.len().saturating_sub(1) / 2);
    for i in 0..ks.len() {
        for j in i + 1..ks.len() {
            out.push(PairKey::new(ks[i].clone(), ks[j].clone()).expect("distinct keywords"));
        }
    }
    out
}

/// `u·v / (|u| |v|)`, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, RankingError> {
    if u.len() != v.len() {
        return Err(RankingError::DimensionMismatch(u.len(), v.len()));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(RankingError::ZeroVector);
    }
    let d: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
    Ok((d / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub pair: PairKey,
    pub similarity: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthRanking {
    pub month: YearMonth,
    pub entries: Vec<RankEntry>,
    /// Pairs with at least one keyword lacking an embedding this month.
    pub missing: BTreeSet<PairKey>,
}

impl MonthRanking {
    pub fn rank_of(&self, pair: &PairKey) -> Option<&RankEntry> {
        self.entries.iter().find(|e| &e.pair == pair)
    }

    /// Dump format: `pair_key<TAB>similarity<TAB>rank`; missing pairs have empty cells.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.pair, e.similarity, e.rank));
        }
        for p in &self.missing {
            out.push_str(&format!("{p}\t\t\n"));
        }
        out
    }

    pub fn parse_tsv(month: YearMonth, text: &str) -> Result<Self, RankingError> {
        let mut entries = Vec::new();
        let mut missing = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = || RankingError::Malformed(i + 1);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad());
            }
            let pair: PairKey = cols[0].parse().map_err(|_| bad())?;
            if cols[1].is_empty() && cols[2].is_empty() {
                missing.insert(pair);
            } else {
                entries.push(RankEntry {
                    pair,
                    similarity: cols[1].parse().map_err(|_| bad())?,
                    rank: cols[2].parse().map_err(|_| bad())?,
                });
            }
        }
        Ok(Self { month, entries, missing })
    }
}

/// Ranks every pair of embedded pool keywords by cosine similarity, descending,
/// with ties broken by pair key.
pub fn rank_month(
    embeddings: &BTreeMap<Bigram, Vec<f64>>,
    pool: &BTreeSet<Bigram>,
    month: YearMonth,
) -> Result<MonthRanking, RankingError> {
    let embedded = pool.iter().filter(|b| embeddings.contains_key(*b)).count();
    if embedded < 2 {
        return Err(RankingError::FewerThanTwoEmbedded(month));
    }
    let mut scored = Vec::new();
    let mut missing = BTreeSet::new();
    for pair in all_pairs(pool) {
        match (embeddings.get(pair.a()), embeddings.get(pair.b())) {
            (Some(u), Some(v)) => {
                let s = cosine(u, v)?;
                scored.push((pair, s));
            }
            _ => {
                missing.insert(pair);
            }
        }
    }
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    let entries = scored
        .into_iter()
        .enumerate()
        .map(|(i, (pair, similarity))| RankEntry {
            pair,
            similarity,
            rank: i + 1,
        })
        .collect();
    Ok(MonthRanking { month, entries, missing })
}

/// Similarity, rank and rank delta of one pair across months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRankSeries {
    pub pair: PairKey,
    pub points: BTreeMap<YearMonth, (f64, usize)>,
    /// One entry per ranked month; `None` unless both this and the previous month have a rank.
    pub deltas: BTreeMap<YearMonth, Option<i64>>,
}

fn check_consecutive(rankings: &[MonthRanking]) -> Result<(), RankingError> {
    for w in rankings.windows(2) {
        if w[0].month.succ() != w[1].month {
            return Err(RankingError::NonConsecutiveMonths(w[0].month, w[1].month));
        }
    }
    Ok(())
}

pub fn rank_deltas(rankings: &[MonthRanking], pair: &PairKey) -> Result<PairRankSeries, RankingError> {
    check_consecutive(rankings)?;
    let lookups: Vec<BTreeMap<&PairKey, &RankEntry>> = rankings
        .iter()
        .map(|r| r.entries.iter().map(|e| (&e.pair, e)).collect())
        .collect();
    Ok(series_from_lookups(rankings, &lookups, pair))
}

/// Series for every pair that appears (ranked or missing) in any month.
pub fn all_series(rankings: &[MonthRanking]) -> Result<Vec<PairRankSeries>, RankingError> {
    check_consecutive(rankings)?;
    let pairs: BTreeSet<&PairKey> = rankings
        .iter()
        .flat_map(|r| r.entries.iter().map(|e| &e.pair).chain(r.missing.iter()))
        .collect();
    let lookups: Vec<BTreeMap<&PairKey, &RankEntry>> = rankings
        .iter()
        .map(|r| r.entries.iter().map(|e| (&e.pair, e)).collect())
        .collect();
    Ok(pairs
        .into_iter()
        .map(|p| series_from_lookups(rankings, &lookups, p))
        .collect())
}

fn series_from_lookups(
    rankings: &[MonthRanking],
    lookups: &[BTreeMap<&PairKey, &RankEntry>],
    pair: &PairKey,
) -> PairRankSeries {
    let mut points = BTreeMap::new();
    let mut deltas = BTreeMap::new();
    let mut prev: Option<usize> = None;
    for (r, lookup) in rankings.iter().zip(lookups) {
        let cur = lookup.get(pair).map(|e| (e.similarity, e.rank));
        if let Some(pt) = cur {
            points.insert(r.month, pt);
        }
        let delta = match (prev, cur) {
            (Some(p), Some((_, c))) => Some(p as i64 - c as i64),
            _ => None,
        };
        deltas.insert(r.month, delta);
        prev = cur.map(|(_, rank)| rank);
    }
    PairRankSeries {
        pair: pair.clone(),
        points,
        deltas,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub pair: PairKey,
    pub month: YearMonth,
    pub delta: Option<i64>,
    pub threshold: i64,
    pub emerging: bool,
}

/// One verdict per month of the series; emerging iff the delta exists and exceeds `threshold`.
pub fn detect(series: &PairRankSeries, threshold: i64) -> Vec<DetectionVerdict> {
    series
        .deltas
        .iter()
        .map(|(&month, &delta)| DetectionVerdict {
            pair: series.pair.clone(),
            month,
            delta,
            threshold,
            emerging: delta.is_some_and(|d| d > threshold),
        })
        .collect()
}

pub const VERDICT_CSV_HEADER: &str = "pair,month,delta,threshold,emerging";

pub fn verdicts_to_csv(verdicts: &[DetectionVerdict]) -> String {
    let mut out = format!("{VERDICT_CSV_HEADER}\n");
    for v in verdicts {
        let delta = v.delta.map(|d| d.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", v.pair, v.month, delta, v.threshold, v.emerging));
    }
    out
}

pub fn verdicts_from_csv(text: &str) -> Result<Vec<DetectionVerdict>, RankingError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == VERDICT_CSV_HEADER => {}
        _ => return Err(RankingError::Malformed(1)),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = || RankingError::Malformed(i + 1);
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(bad());
            }
            Ok(DetectionVerdict {
                pair: cols[0].parse().map_err(|_| bad())?,
                month: cols[1].parse().map_err(|_| bad())?,
                delta: if cols[2].is_empty() {
                    None
                } else {
                    Some(cols[2].parse().map_err(|_| bad())?)
                },
                threshold: cols[3].parse().map_err(|_| bad())?,
                emerging: cols[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kw(s: &str) -> Bigram {
        Bigram::new(s, "kw")
    }

    fn pair(x: &str, y: &str) -> PairKey {
        PairKey::new(kw(x), kw(y)).unwrap()
    }

    fn month(i: i64) -> YearMonth {
        "2019-07".parse::<YearMonth>().unwrap().offset(i)
    }

    /// Embeddings in 2-D whose pairwise cosines are the cosines of angle gaps.
    fn angles(list: &[(&str, f64)]) -> BTreeMap<Bigram, Vec<f64>> {
        list.iter().map(|(k, a)| (kw(k), vec![a.cos(), a.sin()])).collect()
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[3.0, -1.0, 2.0], &[3.0, -1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let expected = 32.0 / (14f64.sqrt() * 77f64.sqrt());
        assert!((cosine(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.974632).abs() < 1e-6);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(RankingError::ZeroVector));
        assert_eq!(cosine(&[1.0], &[1.0, 0.0]), Err(RankingError::DimensionMismatch(1, 2)));
    }

    #[test]
    fn three_keyword_ranking() {
        // Unit vectors in 3-D with cos(AB)=0.9, cos(AC)=0.5, cos(BC)=0.7.
        let a = vec![1.0, 0.0, 0.0];
        let b = vec![0.9, (1.0f64 - 0.81).sqrt(), 0.0];
        let c2 = (0.7 - 0.9 * 0.5) / (1.0f64 - 0.81).sqrt();
        let c = vec![0.5, c2, (1.0 - 0.25 - c2 * c2).sqrt()];
        let emb: BTreeMap<Bigram, Vec<f64>> = [(kw("a"), a), (kw("b"), b), (kw("c"), c)].into();
        let pool: BTreeSet<Bigram> = emb.keys().cloned().collect();
        let r = rank_month(&emb, &pool, month(0)).unwrap();
        let order: Vec<(String, usize)> = r.entries.iter().map(|e| (e.pair.to_string(), e.rank)).collect();
        assert_eq!(
            order,
            vec![
                ("a kw|b kw".to_string(), 1),
                ("b kw|c kw".to_string(), 2),
                ("a kw|c kw".to_string(), 3)
            ]
        );
    }

    #[test]
    fn ties_break_by_pair_key() {
        let emb = angles(&[("a", 0.0), ("b", 0.5), ("c", -0.5)]);
        let pool: BTreeSet<Bigram> = emb.keys().cloned().collect();
        let r = rank_month(&emb, &pool, month(0)).unwrap();
        assert_eq!(r.entries[0].pair, pair("a", "b"));
        assert_eq!(r.entries[1].pair, pair("a", "c"));
    }

    #[test]
    fn ten_keywords_give_45_pairs() {
        let emb = angles(&(0..10).map(|i| (["k0", "k1", "k2", "k3", "k4", "k5", "k6", "k7", "k8", "k9"][i], i as f64 * 0.1)).collect::<Vec<_>>());
        let pool: BTreeSet<Bigram> = emb.keys().cloned().collect();
        let r = rank_month(&emb, &pool, month(0)).unwrap();
        assert_eq!(r.entries.len(), 45);
        assert!(r.missing.is_empty());
    }

    #[test]
    fn missing_keywords() {
        let emb = angles(&[("a", 0.0), ("b", 0.5)]);
        let pool: BTreeSet<Bigram> = [kw("a"), kw("b"), kw("c")].into();
        let r = rank_month(&emb, &pool, month(0)).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.missing.len(), 2);
        let lone = angles(&[("a", 0.0)]);
        assert_eq!(rank_month(&lone, &pool, month(0)), Err(RankingError::FewerThanTwoEmbedded(month(0))));
    }

    fn ranking(m: i64, order: &[(&str, &str)]) -> MonthRanking {
        MonthRanking {
            month: month(m),
            entries: order
                .iter()
                .enumerate()
                .map(|(i, (x, y))| RankEntry {
                    pair: pair(x, y),
                    similarity: 1.0 - i as f64 * 0.1,
                    rank: i + 1,
                })
                .collect(),
            missing: BTreeSet::new(),
        }
    }

    #[test]
    fn delta_sign_and_gaps() {
        let p = pair("a", "b");
        let filler = [("c", "d"), ("c", "e"), ("c", "f"), ("c", "g")];
        let mut m0: Vec<(&str, &str)> = filler.to_vec();
        m0.push(("a", "b")); // rank 5
        let mut m1 = filler[..1].to_vec();
        m1.push(("a", "b")); // rank 2
        m1.extend_from_slice(&filler[1..]);
        let m2 = m1.clone(); // unchanged
        let mut r3 = ranking(3, &filler);
        r3.missing.insert(p.clone());
        let rankings = vec![ranking(0, &m0), ranking(1, &m1), ranking(2, &m2), r3, ranking(4, &m1)];
        let s = rank_deltas(&rankings, &p).unwrap();
        assert_eq!(s.deltas[&month(0)], None);
        assert_eq!(s.deltas[&month(1)], Some(3));
        assert_eq!(s.deltas[&month(2)], Some(0));
        assert_eq!(s.deltas[&month(3)], None);
        assert_eq!(s.deltas[&month(4)], None);
        assert_eq!(s.points.len(), 4);

        let gap = vec![ranking(0, &m0), ranking(2, &m1)];
        assert!(matches!(rank_deltas(&gap, &p), Err(RankingError::NonConsecutiveMonths(..))));
    }

    #[test]
    fn detection_thresholds() {
        let series = |d: Option<i64>| PairRankSeries {
            pair: pair("a", "b"),
            points: BTreeMap::new(),
            deltas: [(month(1), d)].into(),
        };
        assert!(detect(&series(Some(1)), 0)[0].emerging);
        assert!(!detect(&series(Some(0)), 0)[0].emerging);
        assert!(detect(&series(Some(1)), -1)[0].emerging);
        assert!(detect(&series(Some(0)), -1)[0].emerging);
        let v = detect(&series(None), -5);
        assert_eq!(v.len(), 1);
        assert!(!v[0].emerging && v[0].delta.is_none());
    }

    #[test]
    fn dumps_round_trip() {
        let mut r = ranking(0, &[("a", "b"), ("a", "c")]);
        r.missing.insert(pair("b", "c"));
        assert_eq!(MonthRanking::parse_tsv(r.month, &r.to_tsv()).unwrap(), r);
        let s = rank_deltas(&[r.clone(), ranking(1, &[("a", "c"), ("a", "b")])], &pair("a", "b")).unwrap();
        let v = detect(&s, 0);
        assert_eq!(verdicts_from_csv(&verdicts_to_csv(&v)).unwrap(), v);
        assert!(verdicts_from_csv("bad header\n").is_err());
        assert_eq!("a kw|b kw".parse::<PairKey>().unwrap(), pair("b", "a"));
        assert!("a kw|a kw".parse::<PairKey>().is_err());
    }

    fn vectors(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), n)
            .prop_filter("nonzero", |vs| vs.iter().all(|v| v.iter().any(|x| x.abs() > 1e-3)))
    }

    const NAMES: [&str; 6] = ["ka", "kb", "kc", "kd", "ke", "kf"];

    fn embed(vs: &[Vec<f64>]) -> BTreeMap<Bigram, Vec<f64>> {
        vs.iter().enumerate().map(|(i, v)| (kw(NAMES[i]), v.clone())).collect()
    }

    proptest! {
        #[test]
        fn ranks_form_a_permutation(vs in vectors(6)) {
            let emb = embed(&vs);
            let pool: BTreeSet<Bigram> = emb.keys().cloned().collect();
            let r = rank_month(&emb, &pool, month(0)).unwrap();
            let ranks: Vec<usize> = r.entries.iter().map(|e| e.rank).collect();
            prop_assert_eq!(ranks, (1..=15).collect::<Vec<_>>());
        }

        #[test]
        fn positive_rescaling_changes_nothing(a in vectors(5), b in vectors(5), scales in proptest::collection::vec(0.01f64..100.0, 10)) {
            let months = [embed(&a), embed(&b)];
            let pool: BTreeSet<Bigram> = months[0].keys().cloned().collect();
            let scaled: Vec<BTreeMap<Bigram, Vec<f64>>> = months.iter().enumerate().map(|(m, emb)| {
                emb.iter().enumerate().map(|(i, (k, v))| (k.clone(), v.iter().map(|x| x * scales[m * 5 + i]).collect())).collect()
            }).collect();
            let rank = |embs: &[BTreeMap<Bigram, Vec<f64>>]| -> Vec<MonthRanking> {
                embs.iter().enumerate().map(|(m, e)| rank_month(e, &pool, month(m as i64)).unwrap()).collect()
            };
            let (base, resc) = (rank(&months), rank(&scaled));
            for (x, y) in base.iter().zip(&resc) {
                let px: Vec<&PairKey> = x.entries.iter().map(|e| &e.pair).collect();
                let py: Vec<&PairKey> = y.entries.iter().map(|e| &e.pair).collect();
                prop_assert_eq!(px, py);
            }
            let sx = all_series(&base).unwrap();
            let sy = all_series(&resc).unwrap();
            for (x, y) in sx.iter().zip(&sy) {
                prop_assert_eq!(&x.deltas, &y.deltas);
            }
            // Two months over the same pair set: deltas sum to zero.
            let total: i64 = sx.iter().filter_map(|s| s.deltas[&month(1)]).sum();
            prop_assert_eq!(total, 0);
        }

        #[test]
        fn detection_monotone_in_threshold(deltas in proptest::collection::vec(proptest::option::of(-20i64..20), 1..12), t in -5i64..5, bump in 0i64..5) {
            let s = PairRankSeries {
                pair: pair("a", "b"),
                points: BTreeMap::new(),
                deltas: deltas.iter().enumerate().map(|(i, d)| (month(i as i64), *d)).collect(),
            };
            for (lo, hi) in detect(&s, t).iter().zip(detect(&s, t + bump)) {
                prop_assert!(!hi.emerging || lo.emerging);
            }
        }

        #[test]
        fn matches_exhaustive_sort(n in 2usize..=6, vs in vectors(6)) {
            let emb = embed(&vs[..n]);
            let pool: BTreeSet<Bigram> = emb.keys().cloned().collect();
            let r = rank_month(&emb, &pool, month(0)).unwrap();
            // Oracle: place each pair by counting how many pairs precede it.
            let mut sims = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let (u, v) = (&vs[i], &vs[j]);
                    let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                    let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    sims.push((PairKey::new(kw(NAMES[i]), kw(NAMES[j])).unwrap(), (dot / (nu * nv)).clamp(-1.0, 1.0)));
                }
            }
            for (p, s) in &sims {
                let ahead = sims.iter().filter(|(q, t)| t > s || (t == s && q < p)).count();
                prop_assert_eq!(r.rank_of(p).unwrap().rank, ahead + 1);
            }
        }
    }
}
