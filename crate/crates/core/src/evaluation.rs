//! Gold-standard labels from search-interest series, and classification / ROC
//! scoring of detection verdicts against them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keywords::Bigram;
use crate::month::YearMonth;
use crate::ranking::{all_pairs, DetectionVerdict, PairKey};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("series share no months")]
    NoOverlap,
    #[error("not enough months after {0} for a horizon of {1}")]
    InsufficientFuture(YearMonth, usize),
    #[error("no interest series for keyword `{0}`")]
    MissingSeries(String),
    #[error("no labeled verdicts to evaluate")]
    EmptyEvaluation,
    #[error("gold labels contain a single class")]
    SingleClassGold,
    #[error("horizon must be >= 2, got {0}")]
    BadHorizon(usize),
    #[error("malformed record on line {0}: {1}")]
    Malformed(usize, String),
}

/// Monthly interest (0-100) for one keyword, or the averaged series of a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestSeries {
    pub keyword: String,
    pub points: BTreeMap<YearMonth, f64>,
}

impl InterestSeries {
    /// True when the series has no gaps between its first and last month.
    pub fn is_contiguous(&self) -> bool {
        match (self.points.keys().next(), self.points.keys().next_back()) {
            (Some(&a), Some(&b)) => a.months_until(b) as usize + 1 == self.points.len(),
            _ => true,
        }
    }
}

pub const INTEREST_CSV_HEADER: &str = "month,keyword,interest";

/// Parses `month,keyword,interest` rows. The month may be `YYYY-MM` or a full
/// `YYYY-MM-DD` date; several rows for the same keyword and month (weekly data)
/// are averaged.
pub fn parse_interest_csv(text: &str) -> Result<BTreeMap<String, InterestSeries>, EvalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == INTEREST_CSV_HEADER => {}
        _ => return Err(EvalError::Malformed(1, format!("expected header `{INTEREST_CSV_HEADER}`"))),
    }
    let mut sums: BTreeMap<(String, YearMonth), (f64, usize)> = BTreeMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(EvalError::Malformed(line_no, "expected 3 columns".into()));
        }
        let month_str = cols[0].get(..7).unwrap_or(cols[0]);
        let month: YearMonth = month_str
            .parse()
            .map_err(|_| EvalError::Malformed(line_no, format!("bad month `{}`", cols[0])))?;
        let keyword: Bigram = cols[1]
            .parse()
            .map_err(|e: String| EvalError::Malformed(line_no, e))?;
        let interest: f64 = cols[2]
            .parse()
            .ok()
            .filter(|v: &f64| (0.0..=100.0).contains(v))
            .ok_or_else(|| EvalError::Malformed(line_no, format!("interest `{}` outside 0-100", cols[2])))?;
        let e = sums.entry((keyword.key(), month)).or_insert((0.0, 0));
        e.0 += interest;
        e.1 += 1;
    }
    let mut out: BTreeMap<String, InterestSeries> = BTreeMap::new();
    for ((kw, month), (sum, n)) in sums {
        out.entry(kw.clone())
            .or_insert_with(|| InterestSeries {
                keyword: kw,
                points: BTreeMap::new(),
            })
            .points
            .insert(month, sum / n as f64);
    }
    Ok(out)
}

/// Pointwise mean over the months both series cover.
pub fn pair_series(a: &InterestSeries, b: &InterestSeries) -> Result<InterestSeries, EvalError> {
    let points: BTreeMap<YearMonth, f64> = a
        .points
        .iter()
        .filter_map(|(m, x)| b.points.get(m).map(|y| (*m, (x + y) / 2.0)))
        .collect();
    if points.is_empty() {
        return Err(EvalError::NoOverlap);
    }
    let (lo, hi) = if a.keyword <= b.keyword { (a, b) } else { (b, a) };
    Ok(InterestSeries {
        keyword: format!("{}|{}", lo.keyword, hi.keyword),
        points,
    })
}

/// Least-squares slope of `ys` against `x = 1..=n`.
pub fn ols_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let x_mean = (n + 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = (i + 1) as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    num / den
}

/// Trend slope over the `n` months starting at `start` (inclusive).
pub fn slope(series: &InterestSeries, start: YearMonth, n: usize) -> Result<f64, EvalError> {
    if n < 2 {
        return Err(EvalError::BadHorizon(n));
    }
    let ys = (0..n)
        .map(|i| series.points.get(&start.offset(i as i64)).copied())
        .collect::<Option<Vec<f64>>>()
        .ok_or(EvalError::InsufficientFuture(start, n))?;
    Ok(ols_slope(&ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldStandard {
    pub horizon: usize,
    pub labels: BTreeMap<(PairKey, YearMonth), bool>,
    pub slopes: BTreeMap<(PairKey, YearMonth), f64>,
}

pub const GOLD_CSV_HEADER: &str = "pair,month,slope,label";

impl GoldStandard {
    pub fn prevalence(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.values().filter(|&&l| l).count() as f64 / self.labels.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{GOLD_CSV_HEADER}\n");
        for ((pair, month), s) in &self.slopes {
            out.push_str(&format!("{pair},{month},{s},{}\n", self.labels[&(pair.clone(), *month)]));
        }
        out
    }
}

/// Labels each (pair, month) by the sign of the averaged pair interest slope over
/// months `m + 1 ..= m + n`. Months without `n` future points are left unlabeled;
/// it is an error if that leaves nothing labeled.
pub fn build_gold(
    series: &BTreeMap<String, InterestSeries>,
    pool: &BTreeSet<Bigram>,
    months: &[YearMonth],
    n: usize,
) -> Result<GoldStandard, EvalError> {
    if n < 2 {
        return Err(EvalError::BadHorizon(n));
    }
    for kw in pool {
        if !series.contains_key(&kw.key()) {
            return Err(EvalError::MissingSeries(kw.key()));
        }
    }
    let mut labels = BTreeMap::new();
    let mut slopes = BTreeMap::new();
    for pair in all_pairs(pool) {
        let joint = pair_series(&series[&pair.a().key()], &series[&pair.b().key()])?;
        for &m in months {
            if let Ok(s) = slope(&joint, m.succ(), n) {
                labels.insert((pair.clone(), m), s > 0.0);
                slopes.insert((pair.clone(), m), s);
            }
        }
    }
    if labels.is_empty() {
        let first = months.first().copied().ok_or(EvalError::EmptyEvaluation)?;
        return Err(EvalError::InsufficientFuture(first.succ(), n));
    }
    Ok(GoldStandard {
        horizon: n,
        labels,
        slopes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    /// Per-class metrics with every zero denominator mapped to 0.
    fn from_counts(hit: usize, predicted: usize, actual: usize) -> Self {
        let precision = ratio(hit, predicted);
        let recall = ratio(hit, actual);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

/// Confusion counts plus per-class and macro metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub confusion: Confusion,
    pub true_class: ClassMetrics,
    pub false_class: ClassMetrics,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    /// Verdicts dropped for lack of a gold label.
    pub unlabeled: usize,
}

impl Classification {
    pub fn from_confusion(confusion: Confusion, unlabeled: usize) -> Self {
        let Confusion { tp, fp, tn, fn_ } = confusion;
        let true_class = ClassMetrics::from_counts(tp, tp + fp, tp + fn_);
        let false_class = ClassMetrics::from_counts(tn, tn + fn_, tn + fp);
        Self {
            confusion,
            true_class,
            false_class,
            precision_macro: (true_class.precision + false_class.precision) / 2.0,
            recall_macro: (true_class.recall + false_class.recall) / 2.0,
            f1_macro: (true_class.f1 + false_class.f1) / 2.0,
            unlabeled,
        }
    }
}

/// Labeled instances as `(delta, gold label)`, in verdict order.
fn labeled_instances<'a>(verdicts: &'a [DetectionVerdict], gold: &GoldStandard) -> (Vec<(&'a DetectionVerdict, bool)>, usize) {
    let mut unlabeled = 0;
    let mut out = Vec::with_capacity(verdicts.len());
    for v in verdicts {
        match gold.labels.get(&(v.pair.clone(), v.month)) {
            Some(&label) => out.push((v, label)),
            None => unlabeled += 1,
        }
    }
    (out, unlabeled)
}

/// Scores verdicts against gold labels. Verdicts without a label are dropped and counted.
pub fn classify(verdicts: &[DetectionVerdict], gold: &GoldStandard) -> Result<Classification, EvalError> {
    let (instances, unlabeled) = labeled_instances(verdicts, gold);
    if instances.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    let mut c = Confusion::default();
    for (v, label) in instances {
        match (v.emerging, label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(Classification::from_confusion(c, unlabeled))
}

/// Predicts "emerging" for every gold instance.
pub fn zero_rule(gold: &GoldStandard) -> Classification {
    let positives = gold.labels.values().filter(|&&l| l).count();
    Classification::from_confusion(
        Confusion {
            tp: positives,
            fp: gold.labels.len() - positives,
            tn: 0,
            fn_: 0,
        },
        0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Instances scoring at or above this value are predicted positive.
    /// `+inf` for the origin, `-inf` for instances with no delta.
    #[serde(with = "float_or_inf")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum F {
            Num(f64),
            Str(String),
        }
        match F::deserialize(d)? {
            F::Num(x) => Ok(x),
            F::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// ROC curve from scores (missing scores rank below everything) and labels, with
/// one point per distinct score; AUC by the trapezoid rule.
pub fn roc_auc(instances: &[(Option<f64>, bool)]) -> Result<(Vec<RocPoint>, f64), EvalError> {
    let pos = instances.iter().filter(|(_, l)| *l).count();
    let neg = instances.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClassGold);
    }
    let mut scored: Vec<(f64, bool)> = instances
        .iter()
        .map(|(s, l)| (s.unwrap_or(f64::NEG_INFINITY), *l))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let t = scored[i].0;
        while i < scored.len() && scored[i].0 == t {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = *points.last().unwrap();
        let p = RocPoint {
            threshold: t,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok((points, auc))
}

pub const ROC_CSV_HEADER: &str = "threshold,fpr,tpr";

pub fn roc_to_csv(points: &[RocPoint]) -> String {
    let mut out = format!("{ROC_CSV_HEADER}\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
    }
    out
}

/// Everything reported for one (threshold, horizon) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: i64,
    pub horizon: usize,
    pub instances: usize,
    pub prevalence: f64,
    pub confusion: Confusion,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub true_class: ClassMetrics,
    pub false_class: ClassMetrics,
    pub unlabeled: usize,
    pub roc: Vec<RocPoint>,
    /// `None` when the evaluated instances hold a single gold class.
    pub auc: Option<f64>,
    pub zero_rule: Classification,
}

/// Classification, ROC/AUC and the zero-rule baseline over the same labeled instances.
pub fn evaluate(verdicts: &[DetectionVerdict], gold: &GoldStandard, threshold: i64) -> Result<EvalReport, EvalError> {
    let class = classify(verdicts, gold)?;
    let (instances, _) = labeled_instances(verdicts, gold);
    let scored: Vec<(Option<f64>, bool)> = instances.iter().map(|(v, l)| (v.delta.map(|d| d as f64), *l)).collect();
    let (roc, auc) = match roc_auc(&scored) {
        Ok((r, a)) => (r, Some(a)),
        Err(EvalError::SingleClassGold) => (Vec::new(), None),
        Err(e) => return Err(e),
    };
    // Zero-rule over exactly the evaluated instances.
    let subset = GoldStandard {
        horizon: gold.horizon,
        labels: instances
            .iter()
            .map(|(v, l)| ((v.pair.clone(), v.month), *l))
            .collect(),
        slopes: BTreeMap::new(),
    };
    let positives = scored.iter().filter(|(_, l)| *l).count();
    Ok(EvalReport {
        threshold,
        horizon: gold.horizon,
        instances: scored.len(),
        prevalence: positives as f64 / scored.len() as f64,
        confusion: class.confusion,
        precision_macro: class.precision_macro,
        recall_macro: class.recall_macro,
        f1_macro: class.f1_macro,
        true_class: class.true_class,
        false_class: class.false_class,
        unlabeled: class.unlabeled,
        roc,
        auc,
        zero_rule: zero_rule(&subset),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn m(i: i64) -> YearMonth {
        "2019-07".parse::<YearMonth>().unwrap().offset(i)
    }

    fn series(name: &str, ys: &[f64]) -> InterestSeries {
        InterestSeries {
            keyword: name.into(),
            points: ys.iter().enumerate().map(|(i, y)| (m(i as i64), *y)).collect(),
        }
    }

    fn pair(i: usize) -> PairKey {
        PairKey::new(Bigram::new(format!("k{i}"), "a"), Bigram::new(format!("k{i}"), "b")).unwrap()
    }

    fn gold_with(labels: &[bool]) -> GoldStandard {
        GoldStandard {
            horizon: 3,
            labels: labels.iter().enumerate().map(|(i, l)| ((pair(i), m(0)), *l)).collect(),
            slopes: BTreeMap::new(),
        }
    }

    /// Normal-equation fit of y = a + b x, solved with Cramer's rule.
    fn lstsq_oracle(ys: &[f64]) -> f64 {
        let n = ys.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (i, y) in ys.iter().enumerate() {
            let x = (i + 1) as f64;
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    /// Fraction of positive/negative pairs ordered correctly, ties counting half.
    fn mann_whitney(inst: &[(Option<f64>, bool)]) -> f64 {
        let score = |s: Option<f64>| s.unwrap_or(f64::NEG_INFINITY);
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (sp, lp) in inst {
            for (sn, ln) in inst {
                if *lp && !*ln {
                    pairs += 1.0;
                    let (a, b) = (score(*sp), score(*sn));
                    wins += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn pair_series_cases() {
        let s = series("a", &[1.0, 5.0, 9.0]);
        assert_eq!(pair_series(&s, &s).unwrap().points, s.points);
        let c = pair_series(&series("a", &[40.0; 4]), &series("b", &[60.0; 4])).unwrap();
        assert!(c.points.values().all(|&v| v == 50.0));
        let d = pair_series(&series("a", &[10.0, 20.0, 30.0]), &series("b", &[30.0, 20.0, 10.0])).unwrap();
        assert_eq!(d.points.values().copied().collect::<Vec<_>>(), vec![20.0, 20.0, 20.0]);
        let far = InterestSeries {
            keyword: "z".into(),
            points: [(m(20), 1.0)].into(),
        };
        assert_eq!(pair_series(&s, &far), Err(EvalError::NoOverlap));
    }

    #[test]
    fn slope_cases() {
        assert_eq!(slope(&series("a", &[7.0, 7.0, 7.0]), m(0), 3).unwrap(), 0.0);
        assert_eq!(slope(&series("a", &[1.0, 2.0, 3.0]), m(0), 3).unwrap(), 1.0);
        assert_eq!(slope(&series("a", &[3.0, 1.0, 2.0]), m(0), 3).unwrap(), -0.5);
        assert_eq!(slope(&series("a", &[1.0, 2.0]), m(0), 3), Err(EvalError::InsufficientFuture(m(0), 3)));
        assert_eq!(slope(&series("a", &[1.0, 2.0]), m(0), 1), Err(EvalError::BadHorizon(1)));
    }

    #[test]
    fn slope_matches_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.gen_range(2..=12);
            let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
            let got = slope(&series("a", &ys), m(0), n).unwrap();
            assert!((got - lstsq_oracle(&ys)).abs() <= 1e-10);
        }
    }

    #[test]
    fn gold_labels() {
        let kws: BTreeSet<Bigram> = [Bigram::new("aa", "x"), Bigram::new("bb", "x")].into();
        let up: Vec<f64> = (0..8).map(|i| i as f64 * 5.0).collect();
        let flat = vec![30.0; 8];
        let mut ser = BTreeMap::new();
        ser.insert("aa x".to_string(), series("aa x", &up));
        ser.insert("bb x".to_string(), series("bb x", &up));
        let months: Vec<YearMonth> = (0..6).map(m).collect();
        let g = build_gold(&ser, &kws, &months, 3).unwrap();
        // Months 0..=4 have three future points inside an 8-month series.
        assert_eq!(g.labels.len(), 5);
        assert!(g.labels.values().all(|&l| l));

        ser.insert("bb x".to_string(), series("bb x", &flat));
        ser.insert("aa x".to_string(), series("aa x", &flat));
        let g = build_gold(&ser, &kws, &months, 3).unwrap();
        assert!(g.labels.values().all(|&l| !l));
        assert!(g.to_csv().starts_with("pair,month,slope,label\naa x|bb x,2019-07,0,false\n"));

        ser.remove("bb x");
        assert_eq!(build_gold(&ser, &kws, &months, 3), Err(EvalError::MissingSeries("bb x".into())));
        ser.insert("bb x".to_string(), series("bb x", &flat[..2]));
        assert!(matches!(build_gold(&ser, &kws, &months, 3), Err(EvalError::InsufficientFuture(..))));
    }

    #[test]
    fn interest_csv_parsing() {
        let text = "month,keyword,interest\n2020-01,Cloud Computing,40\n2020-01-08,cloud computing,60\n2020-02,cloud computing,10\n";
        let s = parse_interest_csv(text).unwrap();
        let cc = &s["cloud computing"];
        assert_eq!(cc.points[&"2020-01".parse().unwrap()], 50.0);
        assert!(cc.is_contiguous());
        assert!(parse_interest_csv("bad\n").is_err());
        assert!(parse_interest_csv("month,keyword,interest\n2020-01,cloud computing,140\n").is_err());
        assert!(parse_interest_csv("month,keyword,interest\n2020-01,cloud,40\n").is_err());
    }

    #[test]
    fn zero_rule_arithmetic() {
        let mut labels = vec![true; 6];
        labels.extend([false; 4]);
        let z = zero_rule(&gold_with(&labels));
        assert!((z.precision_macro - 0.3).abs() <= 1e-12);
        assert!((z.recall_macro - 0.5).abs() <= 1e-12);
        assert!((z.f1_macro - 0.375).abs() <= 1e-12);
        assert!((z.true_class.precision - 0.6).abs() <= 1e-12);
        assert_eq!(z.true_class.recall, 1.0);
        assert!((z.true_class.f1 - 0.75).abs() <= 1e-12);
        assert_eq!(z.false_class, ClassMetrics::default());

        let all = zero_rule(&gold_with(&[true; 5]));
        assert_eq!((all.precision_macro, all.recall_macro, all.f1_macro), (0.5, 0.5, 0.5));
        let none = zero_rule(&gold_with(&[false; 5]));
        assert_eq!((none.precision_macro, none.recall_macro, none.f1_macro), (0.0, 0.0, 0.0));
    }

    fn verdicts(preds: &[(Option<i64>, bool)]) -> Vec<DetectionVerdict> {
        preds
            .iter()
            .enumerate()
            .map(|(i, (delta, emerging))| DetectionVerdict {
                pair: pair(i),
                month: m(0),
                delta: *delta,
                threshold: 0,
                emerging: *emerging,
            })
            .collect()
    }

    #[test]
    fn classify_perfect_and_unlabeled() {
        let g = gold_with(&[true, false, true]);
        let mut v = verdicts(&[(Some(2), true), (Some(-1), false), (Some(1), true), (None, false)]);
        let c = classify(&v, &g).unwrap();
        assert_eq!((c.precision_macro, c.recall_macro, c.f1_macro), (1.0, 1.0, 1.0));
        assert_eq!(c.unlabeled, 1);
        assert_eq!(c.confusion.total(), 3);
        v.truncate(0);
        assert_eq!(classify(&v, &g), Err(EvalError::EmptyEvaluation));
    }

    #[test]
    fn macro_f1_is_mean_of_class_f1() {
        let c = Classification::from_confusion(Confusion { tp: 5, fp: 3, tn: 2, fn_: 7 }, 0);
        let hm = 2.0 * c.precision_macro * c.recall_macro / (c.precision_macro + c.recall_macro);
        assert!((c.f1_macro - (c.true_class.f1 + c.false_class.f1) / 2.0).abs() < 1e-15);
        assert!((c.f1_macro - hm).abs() > 1e-6);
    }

    #[test]
    fn roc_edge_cases() {
        let (_, auc) = roc_auc(&[(Some(3.0), true), (Some(2.0), true), (Some(1.0), false), (None, false)]).unwrap();
        assert_eq!(auc, 1.0);
        let (pts, auc) = roc_auc(&[(Some(0.0), true), (Some(0.0), false), (Some(0.0), true)]).unwrap();
        assert_eq!(auc, 0.5);
        assert_eq!(pts.len(), 2);
        assert_eq!(roc_auc(&[(Some(1.0), true)]), Err(EvalError::SingleClassGold));
        assert!(roc_to_csv(&pts).starts_with("threshold,fpr,tpr\ninf,0,0\n0,1,1\n"));
    }

    #[test]
    fn evaluate_bundles_everything() {
        let g = gold_with(&[true, false, true, true, false]);
        let v = verdicts(&[(Some(2), true), (Some(1), true), (None, false), (Some(-3), false), (Some(0), false)]);
        let r = evaluate(&v, &g, 0).unwrap();
        assert_eq!(r.instances, 5);
        assert_eq!(r.confusion, Confusion { tp: 1, fp: 1, tn: 1, fn_: 2 });
        assert!((r.prevalence - 0.6).abs() < 1e-15);
        assert!((r.zero_rule.f1_macro - 0.375).abs() < 1e-12);
        let auc = r.auc.unwrap();
        assert!((0.0..=1.0).contains(&auc));
        let json = serde_json::to_string(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn auc_is_mann_whitney(inst in proptest::collection::vec((proptest::option::of(-5i64..5), any::<bool>()), 2..40)) {
            let inst: Vec<(Option<f64>, bool)> = inst.into_iter().map(|(s, l)| (s.map(|x| x as f64), l)).collect();
            prop_assume!(inst.iter().any(|x| x.1) && inst.iter().any(|x| !x.1));
            let (pts, auc) = roc_auc(&inst).unwrap();
            prop_assert!((auc - mann_whitney(&inst)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&auc));
            for w in pts.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
            let last = pts.last().unwrap();
            prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        }

        #[test]
        fn negated_scores_flip_auc(vals in proptest::collection::btree_set(-1000i64..1000, 2..30), labels in proptest::collection::vec(any::<bool>(), 30)) {
            let inst: Vec<(Option<f64>, bool)> = vals.iter().zip(&labels).map(|(v, l)| (Some(*v as f64), *l)).collect();
            prop_assume!(inst.iter().any(|x| x.1) && inst.iter().any(|x| !x.1));
            let neg: Vec<(Option<f64>, bool)> = inst.iter().map(|(s, l)| (s.map(|x| -x), *l)).collect();
            let (_, a) = roc_auc(&inst).unwrap();
            let (_, b) = roc_auc(&neg).unwrap();
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn slope_shift_and_scale(ys in proptest::collection::vec(-50.0f64..50.0, 2..12), c in -100.0f64..100.0, k in -5.0f64..5.0) {
            let base = ols_slope(&ys);
            let shifted: Vec<f64> = ys.iter().map(|y| y + c).collect();
            let scaled: Vec<f64> = ys.iter().map(|y| y * k).collect();
            prop_assert!((ols_slope(&shifted) - base).abs() <= 1e-9);
            prop_assert!((ols_slope(&scaled) - k * base).abs() <= 1e-9);
        }

        #[test]
        fn pair_series_commutes(a in proptest::collection::vec(0.0f64..100.0, 1..10), b in proptest::collection::vec(0.0f64..100.0, 1..10)) {
            let (x, y) = (series("a", &a), series("b", &b));
            prop_assert_eq!(pair_series(&x, &y).unwrap(), pair_series(&y, &x).unwrap());
        }

        #[test]
        fn confusion_is_order_invariant(preds in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..30), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let labels: Vec<bool> = preds.iter().map(|p| p.1).collect();
            let g = gold_with(&labels);
            let mut v = verdicts(&preds.iter().map(|p| (Some(0), p.0)).collect::<Vec<_>>());
            let a = classify(&v, &g).unwrap();
            v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(classify(&v, &g).unwrap(), a);
        }
    }
}
