//! Seeded synthetic corpora with planted structure, used by the test suites and
//! by the `fixture` CLI command.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_jsonl, Article, CorpusError, MonthlyCorpus};
use crate::embedding::EmbeddingProviderSpec;
use crate::keywords::{Bigram, LdaParams};
use crate::pipeline::{MissingSeriesPolicy, MonthRange, RunConfig};
use crate::month::YearMonth;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn half_vocab(prefix: char, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}w{i}")).collect()
}

/// Documents alternate between two disjoint 10-word vocabularies (`aw*` and `bw*`);
/// tokens are drawn uniformly from the document's half.
pub fn two_topic_corpus(seed: u64, docs: usize, doc_len: usize) -> MonthlyCorpus {
    let mut r = rng(seed);
    let halves = [half_vocab('a', 10), half_vocab('b', 10)];
    let texts: Vec<String> = (0..docs)
        .map(|d| {
            let half = &halves[d % 2];
            (0..doc_len)
                .map(|_| half.choose(&mut r).unwrap().as_str())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    MonthlyCorpus::from_texts("2019-07".parse().unwrap(), &refs)
}

/// The planted topic word sets of [`two_topic_corpus`] (first `m` words of each half)
/// and a random relabelling of the same words into two sets of equal size.
pub fn two_topic_word_sets(seed: u64, m: usize) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let truth = vec![half_vocab('a', m), half_vocab('b', m)];
    let mut all: Vec<String> = truth.iter().flatten().cloned().collect();
    let mut r = rng(seed ^ 0x5eed);
    loop {
        all.shuffle(&mut r);
        let shuffled = vec![all[..m].to_vec(), all[m..].to_vec()];
        let pure = shuffled
            .iter()
            .all(|s| s.iter().all(|w| w.starts_with('a')) || s.iter().all(|w| w.starts_with('b')));
        if !pure {
            return (truth, shuffled);
        }
    }
}

/// Sentences where `tok_a` and `tok_b` always appear together and `tok_c` never
/// meets either of them. Filler words are drawn from two disjoint pools.
pub fn cooccurrence_corpus(seed: u64, docs: usize) -> MonthlyCorpus {
    let mut r = rng(seed);
    let left = half_vocab('l', 8);
    let right = half_vocab('r', 8);
    let texts: Vec<String> = (0..docs)
        .map(|d| {
            let mut toks = Vec::new();
            for _ in 0..6 {
                let (pool, heads): (&[String], &[&str]) = if d % 2 == 0 {
                    (&left, &["tok_a", "tok_b"])
                } else {
                    (&right, &["tok_c"])
                };
                toks.push(pool.choose(&mut r).unwrap().clone());
                for h in heads {
                    toks.push(h.to_string());
                    toks.push(pool.choose(&mut r).unwrap().clone());
                }
            }
            toks.join(" ")
        })
        .collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    MonthlyCorpus::from_texts("2019-07".parse().unwrap(), &refs)
}

/// A 13-month news dataset (2019-07 to 2020-07) with one planted emerging pair.
#[derive(Debug, Clone)]
pub struct TrendFixture {
    pub articles: Vec<Article>,
    pub cleaning_config: String,
    /// `month,keyword,interest` rows covering the article window plus 6 months.
    pub trends_csv: String,
    pub keywords: Vec<Bigram>,
    pub planted: (Bigram, Bigram),
    pub onset: YearMonth,
    pub start: YearMonth,
    pub end: YearMonth,
}

const THEMES: [(&str, &str, [&str; 8]); 8] = [
    ("microsoft", "teams", ["chat", "meeting", "app", "collaboration", "users", "slack", "video", "call"]),
    ("remote", "work", ["employees", "home", "commute", "staff", "flexible", "policy", "lockdown", "workplace"]),
    ("cloud", "computing", ["azure", "servers", "storage", "hosting", "capacity", "aws", "platform", "customers"]),
    ("data", "center", ["facility", "power", "cooling", "racks", "region", "construction", "energy", "site"]),
    ("artificial", "intelligence", ["machine", "learning", "models", "research", "algorithms", "ethics", "vision", "neural"]),
    ("digital", "transformation", ["enterprise", "consulting", "modernize", "legacy", "strategy", "adoption", "partners", "industry"]),
    ("video", "game", ["xbox", "console", "players", "studio", "release", "titles", "gamers", "esports"]),
    ("health", "care", ["hospitals", "patients", "medical", "clinical", "records", "doctors", "insurance", "pandemic"]),
];

const FILLER: [&str; 12] = [
    "company", "quarter", "market", "growth", "analysts", "revenue", "seattle", "executive", "investors",
    "business", "product", "announced",
];

const STOPWORDS: [&str; 14] = [
    "the", "and", "of", "to", "in", "for", "on", "with", "said", "its", "is", "at", "by", "as",
];

const GLOSSARY: [&str; 5] = ["dividend", "dividends", "bond", "equity", "shares"];

const BOILERPLATE: &str = "To contact the reporter on this story: Newsroom Staff in Redmond. To contact the editors responsible for this story: Desk Editor";

/// Builds the planted-trend fixture. From `onset` (2020-01) onward the first two
/// themes, `microsoft teams` and `remote work`, appear side by side in shared
/// contexts; before it they never share an article. Their search interest is flat
/// before the onset and climbs afterwards; other keywords follow noisy random walks.
pub fn trend_fixture(seed: u64) -> TrendFixture {
    let mut r = rng(seed);
    let start: YearMonth = "2019-07".parse().unwrap();
    let end: YearMonth = "2020-07".parse().unwrap();
    let onset: YearMonth = "2020-01".parse().unwrap();
    let months = YearMonth::range_inclusive(start, end);

    let mut articles = Vec::new();
    let mut serial = 0usize;
    for (mi, &month) in months.iter().enumerate() {
        let n_articles = if mi < 3 { 10 } else { 9 };
        let joined = month >= onset;
        // Each theme gets two article slots per month; pairs of slots form articles.
        let mut slots: Vec<usize> = (0..THEMES.len()).flat_map(|t| [t, t]).collect();
        loop {
            slots.shuffle(&mut r);
            let ok = slots.chunks(2).all(|c| {
                c[0] != c[1] && (joined || !(c.contains(&0) && c.contains(&1)))
            });
            if ok {
                break;
            }
        }
        for i in 0..n_articles {
            serial += 1;
            let day = 1 + (i * 3) % 27;
            let id = format!("{month}-{serial:03}");
            let published_at = format!("{month}-{day:02}T{:02}:15:00Z", 8 + i % 10);
            if i == n_articles - 1 {
                // One wire stub per month that cleans down to nothing.
                articles.push(Article {
                    id,
                    published_at,
                    title: "Microsoft".into(),
                    body: format!("Microsoft shares rose. {BOILERPLATE}"),
                });
                continue;
            }
            let themes: Vec<usize> = slots[(2 * i) % slots.len()..][..2].to_vec();
            let mut sentences = Vec::new();
            for &t in &themes {
                let (w1, w2, ctx) = THEMES[t];
                for _ in 0..3 {
                    let mut s: Vec<String> = Vec::new();
                    s.push(ctx.choose(&mut r).unwrap().to_string());
                    s.push(STOPWORDS.choose(&mut r).unwrap().to_string());
                    s.push(ctx.choose(&mut r).unwrap().to_string());
                    if joined && t <= 1 && r.gen_bool(0.8) {
                        let (a, b) = (THEMES[0], THEMES[1]);
                        s.extend([a.0, a.1, b.0, b.1].map(str::to_string));
                        let other = THEMES[1 - t].2;
                        s.push(other.choose(&mut r).unwrap().to_string());
                    } else {
                        s.extend([w1.to_string(), w2.to_string()]);
                    }
                    s.push(ctx.choose(&mut r).unwrap().to_string());
                    s.push(FILLER.choose(&mut r).unwrap().to_string());
                    if r.gen_bool(0.3) {
                        s.push(GLOSSARY.choose(&mut r).unwrap().to_string());
                    }
                    s.push(ctx.choose(&mut r).unwrap().to_string());
                    sentences.push(s.join(" "));
                }
            }
            sentences.shuffle(&mut r);
            let mut body = sentences.join(". ");
            body.push_str(". ");
            body.push_str(BOILERPLATE);
            articles.push(Article {
                id,
                published_at,
                title: format!("{} update", FILLER.choose(&mut r).unwrap()),
                body,
            });
        }
    }

    let mut cleaning_config = String::from("[boilerplate]\nre:(?s)To contact the reporter.*\n[glossary]\n");
    for g in GLOSSARY {
        writeln!(cleaning_config, "{g}").unwrap();
    }
    cleaning_config.push_str("[stopwords]\n");
    cleaning_config.push_str(&STOPWORDS.join(" "));
    cleaning_config.push_str("\n[lemmas]\n[settings]\nmin_tokens = 10\n");

    let keywords: Vec<Bigram> = THEMES.iter().map(|(a, b, _)| Bigram::new(*a, *b)).collect();
    let trend_months = YearMonth::range_inclusive(start, end.offset(6));
    let mut trends = BTreeMap::new();
    for (t, kw) in keywords.iter().enumerate() {
        let mut level: f64 = r.gen_range(30.0..60.0);
        for &m in &trend_months {
            let v = if t <= 1 {
                let climb = onset.months_until(m).max(0) as f64;
                20.0 + 7.0 * climb + r.gen_range(-1.5..1.5)
            } else {
                level += r.gen_range(-6.0..6.0);
                level = level.clamp(5.0, 95.0);
                level
            };
            trends.insert((m, kw.key()), (v.clamp(0.0, 100.0) * 100.0).round() / 100.0);
        }
    }
    let mut trends_csv = String::from("month,keyword,interest\n");
    for ((m, k), v) in &trends {
        writeln!(trends_csv, "{m},{k},{v}").unwrap();
    }

    TrendFixture {
        articles,
        cleaning_config,
        trends_csv,
        planted: (keywords[0].clone(), keywords[1].clone()),
        keywords,
        onset,
        start,
        end,
    }
}

/// Writes the planted-trend fixture as a ready-to-run directory: `articles.jsonl`,
/// `cleaning.txt`, `trends.csv`, `allow.txt` and `config.toml`. Returns the config path.
pub fn write_fixture(dir: &Path, seed: u64) -> Result<PathBuf, CorpusError> {
    let f = trend_fixture(seed);
    fs::create_dir_all(dir)?;
    write_jsonl(&dir.join("articles.jsonl"), &f.articles)?;
    fs::write(dir.join("cleaning.txt"), &f.cleaning_config)?;
    fs::write(dir.join("trends.csv"), &f.trends_csv)?;
    let allow: String = f.keywords.iter().map(|k| format!("{k}\n")).collect();
    fs::write(dir.join("allow.txt"), allow)?;
    let cfg = RunConfig {
        corpus_path: "articles.jsonl".into(),
        cleaning_config_path: "cleaning.txt".into(),
        trends_csv_path: "trends.csv".into(),
        months: MonthRange {
            start: f.start,
            end: f.end,
        },
        output_dir: "out".into(),
        seed,
        top_k_avg: 50,
        top_k_max: 50,
        lda_grid: vec![2, 5, 10],
        lda: LdaParams::default(),
        pool_cap: 20,
        allow_list_path: Some("allow.txt".into()),
        deny_list_path: None,
        provider: EmbeddingProviderSpec {
            dimension: 64,
            ..Default::default()
        },
        threshold: 0,
        horizon: 3,
        missing_series: MissingSeriesPolicy::Skip,
    };
    let path = dir.join("config.toml");
    fs::write(&path, cfg.to_toml())?;
    Ok(path)
}
