use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stage_seed, MissingSeriesPolicy, PipelineError, RunConfig, Stage};
use crate::corpus::{self, CleaningConfig, MonthlyCorpus};
use crate::embedding::{embed_bigram, BigramEmbedding};
use crate::evaluation::{build_gold, evaluate, parse_interest_csv, roc_to_csv, EvalError, EvalReport};
use crate::keywords::{
    build_pool, lda_bigrams, merge_bigrams, select_topic_count, tfidf_bigrams, Bigram, KeywordError, KeywordPool,
};
use crate::month::YearMonth;
use crate::ranking::{all_pairs, all_series, detect, rank_month, verdicts_from_csv, verdicts_to_csv};
use crate::ranking::{DetectionVerdict, MonthRanking, RankingError};

pub(super) struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a Path,
}

type Artifacts = Vec<(String, Vec<u8>)>;

pub(super) fn run(stage: Stage, ctx: &Ctx) -> Result<Artifacts, PipelineError> {
    match stage {
        Stage::Ingest => ingest(ctx),
        Stage::Keywords => keywords(ctx),
        Stage::Embed => embed(ctx),
        Stage::Rank => rank(ctx),
        Stage::Detect => detect_stage(ctx),
        Stage::Evaluate => evaluate_stage(ctx),
    }
}

pub(super) fn read_artifact(out: &Path, rel: &str) -> Result<String, PipelineError> {
    let path = out.join(rel);
    fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))
}

fn tok_path(m: YearMonth) -> String {
    format!("ingest/{m}.tok")
}

fn load_month(ctx: &Ctx, m: YearMonth) -> Result<MonthlyCorpus, PipelineError> {
    Ok(MonthlyCorpus::parse_token_file(m, &read_artifact(ctx.out, &tok_path(m))?)?)
}

pub(super) fn load_pool(out: &Path) -> Result<KeywordPool, PipelineError> {
    serde_json::from_str(&read_artifact(out, "keywords/pool.json")?)
        .map_err(|e| PipelineError::Data(format!("keywords/pool.json: {e}")))
}

pub(super) fn load_rankings(out: &Path, months: &[YearMonth]) -> Result<Vec<MonthRanking>, PipelineError> {
    months
        .iter()
        .map(|&m| Ok(MonthRanking::parse_tsv(m, &read_artifact(out, &format!("rank/{m}.tsv"))?)?))
        .collect()
}

#[derive(Debug, Serialize)]
struct IngestStats {
    articles: usize,
    outside_range: usize,
    dropped_short: Vec<String>,
    docs_per_month: BTreeMap<YearMonth, usize>,
}

fn ingest(ctx: &Ctx) -> Result<Artifacts, PipelineError> {
    let articles = corpus::ingest(&ctx.cfg.corpus_path)?;
    let cleaning = CleaningConfig::load(&ctx.cfg.cleaning_config_path)?;
    let months = ctx.cfg.months.months();
    let in_range = |m: &YearMonth| ctx.cfg.months.start <= *m && *m <= ctx.cfg.months.end;

    let mut outside_range = 0;
    let mut selected = Vec::new();
    for a in &articles {
        match a.month() {
            Some(m) if in_range(&m) => selected.push(a),
            _ => outside_range += 1,
        }
    }
    let cleaned: Vec<Option<corpus::TokenDoc>> = selected.par_iter().map(|a| corpus::clean(a, &cleaning)).collect();
    let mut dropped_short = Vec::new();
    let mut docs = Vec::new();
    for (a, doc) in selected.iter().zip(cleaned) {
        match doc {
            Some(d) => docs.push(d),
            None => dropped_short.push(a.id.clone()),
        }
    }
    dropped_short.sort();
    let mut by_month = corpus::partition(docs);

    let mut out = Vec::new();
    let mut docs_per_month = BTreeMap::new();
    for m in months {
        let c = by_month.remove(&m).unwrap_or_else(|| MonthlyCorpus::new(m, Vec::new()));
        docs_per_month.insert(m, c.docs.len());
        out.push((tok_path(m), c.to_token_file().into_bytes()));
    }
    let stats = IngestStats {
        articles: articles.len(),
        outside_range,
        dropped_short,
        docs_per_month,
    };
    out.push(("ingest/stats.json".into(), json_bytes(&stats)));
    Ok(out)
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

fn read_keyword_list(path: Option<&Path>) -> Result<BTreeSet<Bigram>, PipelineError> {
    let Some(path) = path else {
        return Ok(BTreeSet::new());
    };
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<Bigram>()
                .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
        })
        .collect()
}

struct MonthKeywords {
    month: YearMonth,
    candidates: Vec<Bigram>,
    avg: BTreeMap<Bigram, f64>,
    lda_set: BTreeSet<Bigram>,
    files: Artifacts,
}

fn keywords_for_month(ctx: &Ctx, m: YearMonth) -> Result<Option<MonthKeywords>, PipelineError> {
    let corpus = load_month(ctx, m)?;
    if corpus.is_empty() {
        return Ok(None);
    }
    let cfg = ctx.cfg;
    let tfidf = tfidf_bigrams(&corpus, cfg.top_k_avg, cfg.top_k_max)?;
    let merged = merge_bigrams(&corpus, &tfidf.candidates);
    let selection = select_topic_count(&merged, &cfg.lda_grid, &cfg.lda, stage_seed(cfg.seed, Stage::Keywords, Some(m)))?;
    let candidate_set: BTreeSet<Bigram> = tfidf.candidates.iter().cloned().collect();
    let lda_set = lda_bigrams(&selection.model, &candidate_set, cfg.lda.top_m);

    let mut grid = String::from("k\tcoherence\n");
    for (k, c) in &selection.scores {
        grid.push_str(&format!("{k}\t{c}\n"));
    }
    let files = vec![
        (format!("keywords/{m}.tfidf.tsv"), tfidf.to_tsv().into_bytes()),
        (format!("keywords/{m}.topics.txt"), selection.model.dump().into_bytes()),
        (format!("keywords/{m}.grid.tsv"), grid.into_bytes()),
    ];
    let avg = tfidf
        .candidates
        .iter()
        .map(|b| (b.clone(), tfidf.table.avg[b]))
        .collect();
    Ok(Some(MonthKeywords {
        month: m,
        candidates: tfidf.candidates,
        avg,
        lda_set,
        files,
    }))
}

fn keywords(ctx: &Ctx) -> Result<Artifacts, PipelineError> {
    let months = ctx.cfg.months.months();
    let per_month: Vec<Option<MonthKeywords>> = months
        .par_iter()
        .map(|&m| keywords_for_month(ctx, m))
        .collect::<Result<_, _>>()?;

    let mut out = Vec::new();
    let mut tfidf_set = BTreeSet::new();
    let mut lda_set = BTreeSet::new();
    let mut best_avg: BTreeMap<Bigram, f64> = BTreeMap::new();
    for mk in per_month.into_iter().flatten() {
        debug_assert!(months.contains(&mk.month));
        for (b, s) in mk.avg {
            let e = best_avg.entry(b).or_insert(f64::NEG_INFINITY);
            *e = e.max(s);
        }
        tfidf_set.extend(mk.candidates);
        lda_set.extend(mk.lda_set);
        out.extend(mk.files);
    }
    if tfidf_set.is_empty() {
        return Err(PipelineError::Keyword(KeywordError::EmptyCorpus));
    }
    let allow = read_keyword_list(ctx.cfg.allow_list_path.as_deref())?;
    let deny = read_keyword_list(ctx.cfg.deny_list_path.as_deref())?;
    let pool = build_pool(&tfidf_set, &lda_set, &best_avg, &allow, &deny, ctx.cfg.pool_cap)?;
    out.push(("keywords/pool.json".into(), json_bytes(&pool)));
    Ok(out)
}

fn embed(ctx: &Ctx) -> Result<Artifacts, PipelineError> {
    let pool = load_pool(ctx.out)?;
    let months = ctx.cfg.months.months();
    months
        .par_iter()
        .map(|&m| {
            let corpus = load_month(ctx, m)?;
            let mut text = String::new();
            if !corpus.is_empty() {
                let provider = ctx
                    .cfg
                    .provider
                    .build(&corpus, stage_seed(ctx.cfg.seed, Stage::Embed, Some(m)))?;
                for kw in pool.keywords() {
                    if let Some(e) = embed_bigram(&corpus, kw, provider.as_ref())? {
                        text.push_str(&e.to_line());
                        text.push('\n');
                    }
                }
            }
            Ok((format!("embed/{m}.emb"), text.into_bytes()))
        })
        .collect()
}

fn rank(ctx: &Ctx) -> Result<Artifacts, PipelineError> {
    let pool = load_pool(ctx.out)?;
    let months = ctx.cfg.months.months();
    months
        .par_iter()
        .map(|&m| {
            let dump = BigramEmbedding::parse_dump(&read_artifact(ctx.out, &format!("embed/{m}.emb"))?)?;
            let vectors: BTreeMap<Bigram, Vec<f64>> = dump.into_iter().map(|e| (e.bigram, e.vector)).collect();
            let ranking = match rank_month(&vectors, &pool.pool, m) {
                Ok(r) => r,
                // A month with fewer than two embedded keywords ranks nothing.
                Err(RankingError::FewerThanTwoEmbedded(_)) => MonthRanking {
                    month: m,
                    entries: Vec::new(),
                    missing: all_pairs(&pool.pool).into_iter().collect(),
                },
                Err(e) => return Err(e.into()),
            };
            Ok((format!("rank/{m}.tsv"), ranking.to_tsv().into_bytes()))
        })
        .collect()
}

fn detect_stage(ctx: &Ctx) -> Result<Artifacts, PipelineError> {
    let months = ctx.cfg.months.months();
    let rankings = load_rankings(ctx.out, &months)?;
    let mut by_month: BTreeMap<YearMonth, Vec<DetectionVerdict>> = months.iter().map(|&m| (m, Vec::new())).collect();
    for series in all_series(&rankings)? {
        for v in detect(&series, ctx.cfg.threshold) {
            by_month.entry(v.month).or_default().push(v);
        }
    }
    Ok(by_month
        .into_iter()
        .map(|(m, v)| (format!("detect/{m}.csv"), verdicts_to_csv(&v).into_bytes()))
        .collect())
}

pub(super) fn load_verdicts(out: &Path, months: &[YearMonth]) -> Result<Vec<DetectionVerdict>, PipelineError> {
    let mut all = Vec::new();
    for m in months {
        all.extend(verdicts_from_csv(&read_artifact(out, &format!("detect/{m}.csv"))?)?);
    }
    Ok(all)
}

/// Headline numbers for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub horizon: usize,
    pub instances: usize,
    pub prevalence: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub auc: Option<f64>,
    pub zero_rule_f1_macro: f64,
}

impl From<&EvalReport> for HorizonRow {
    fn from(r: &EvalReport) -> Self {
        Self {
            horizon: r.horizon,
            instances: r.instances,
            prevalence: r.prevalence,
            precision_macro: r.precision_macro,
            recall_macro: r.recall_macro,
            f1_macro: r.f1_macro,
            auc: r.auc,
            zero_rule_f1_macro: r.zero_rule.f1_macro,
        }
    }
}

/// Contents of `evaluate/report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub report: EvalReport,
    pub pool_size: usize,
    /// Pool keywords left out of the gold standard for lack of an interest series.
    pub skipped_keywords: Vec<String>,
    pub by_horizon: Vec<HorizonRow>,
}

pub const HORIZONS: std::ops::RangeInclusive<usize> = 2..=6;

fn evaluate_stage(ctx: &Ctx) -> Result<Artifacts, PipelineError> {
    let cfg = ctx.cfg;
    let months = cfg.months.months();
    let pool = load_pool(ctx.out)?;
    let verdicts = load_verdicts(ctx.out, &months)?;
    let text = fs::read_to_string(&cfg.trends_csv_path).map_err(|e| PipelineError::io(&cfg.trends_csv_path, e))?;
    let series = parse_interest_csv(&text)?;

    let (keywords, skipped): (BTreeSet<Bigram>, BTreeSet<Bigram>) =
        pool.pool.iter().cloned().partition(|k| series.contains_key(&k.key()));
    let keywords = match (cfg.missing_series, skipped.first()) {
        (MissingSeriesPolicy::Error, Some(k)) => return Err(EvalError::MissingSeries(k.key()).into()),
        (MissingSeriesPolicy::Error, None) => pool.pool.clone(),
        (MissingSeriesPolicy::Skip, _) => keywords,
    };

    let gold = build_gold(&series, &keywords, &months, cfg.horizon)?;
    let report = evaluate(&verdicts, &gold, cfg.threshold)?;

    let mut by_horizon = Vec::new();
    let mut table = String::from("horizon,instances,prevalence,precision_macro,recall_macro,f1_macro,auc,zero_rule_f1_macro\n");
    for n in HORIZONS {
        let row = build_gold(&series, &keywords, &months, n)
            .and_then(|g| evaluate(&verdicts, &g, cfg.threshold))
            .map(|r| HorizonRow::from(&r));
        match row {
            Ok(r) => {
                let auc = r.auc.map(|a| a.to_string()).unwrap_or_default();
                table.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.horizon, r.instances, r.prevalence, r.precision_macro, r.recall_macro, r.f1_macro, auc, r.zero_rule_f1_macro
                ));
                by_horizon.push(r);
            }
            Err(EvalError::InsufficientFuture(..)) | Err(EvalError::EmptyEvaluation) => {
                table.push_str(&format!("{n},0,,,,,,\n"));
            }
            Err(e) => return Err(e.into()),
        }
    }

    let run_report = RunReport {
        pool_size: pool.len(),
        skipped_keywords: skipped.iter().map(Bigram::key).collect(),
        by_horizon,
        report,
    };
    Ok(vec![
        ("evaluate/gold.csv".into(), gold.to_csv().into_bytes()),
        ("evaluate/roc.csv".into(), roc_to_csv(&run_report.report.roc).into_bytes()),
        ("evaluate/horizons.csv".into(), table.into_bytes()),
        ("evaluate/report.json".into(), json_bytes(&run_report)),
    ])
}
