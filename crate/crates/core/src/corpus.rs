//! Article ingestion, text cleaning and monthly partitioning.
//!
//! Cleaning runs a fixed five-step pipeline over `title + "\n" + body`:
//! boilerplate stripping, tokenization, stoplist removal, lemma lookup and
//! the minimum-length filter.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::month::YearMonth;

pub const DEFAULT_MIN_TOKENS: usize = 10;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record on line {line_no}: {reason}")]
    MalformedRecord { line_no: usize, reason: String },
    #[error("duplicate article id `{0}`")]
    DuplicateId(String),
    #[error("cannot read {path}: {source}")]
    UnreadablePath {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid cleaning config: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One raw news article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub published_at: String,
    pub title: String,
    pub body: String,
}

impl Article {
    pub fn month(&self) -> Option<YearMonth> {
        YearMonth::from_timestamp(&self.published_at)
    }
}

/// A cleaned document: lemmatized lowercase tokens in original order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDoc {
    pub article_id: String,
    pub month: YearMonth,
    pub tokens: Vec<String>,
}

/// All cleaned documents of one calendar month, sorted by article id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyCorpus {
    pub month: YearMonth,
    pub docs: Vec<TokenDoc>,
    pub vocab: BTreeMap<String, usize>,
}

impl MonthlyCorpus {
    /// Builds a corpus, sorting documents by id and recounting the vocabulary.
    pub fn new(month: YearMonth, mut docs: Vec<TokenDoc>) -> Self {
        docs.sort_by(|a, b| a.article_id.cmp(&b.article_id));
        let mut vocab = BTreeMap::new();
        for doc in &docs {
            for tok in &doc.tokens {
                *vocab.entry(tok.clone()).or_insert(0) += 1;
            }
        }
        Self { month, docs, vocab }
    }

    /// Convenience constructor from whitespace-separated texts, ids `d0`, `d1`, ...
    pub fn from_texts(month: YearMonth, texts: &[&str]) -> Self {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| TokenDoc {
                article_id: format!("d{i}"),
                month,
                tokens: t.split_whitespace().map(str::to_string).collect(),
            })
            .collect();
        Self::new(month, docs)
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }

    /// Serializes in the per-month token file format: `article_id<TAB>tok1 tok2 ...`.
    pub fn to_token_file(&self) -> String {
        let mut out = String::new();
        for doc in &self.docs {
            out.push_str(&doc.article_id);
            out.push('\t');
            out.push_str(&doc.tokens.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse_token_file(month: YearMonth, text: &str) -> Result<Self, CorpusError> {
        let mut docs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (id, toks) = line.split_once('\t').ok_or_else(|| CorpusError::MalformedRecord {
                line_no: i + 1,
                reason: "missing tab separator".into(),
            })?;
            docs.push(TokenDoc {
                article_id: id.to_string(),
                month,
                tokens: toks.split_whitespace().map(str::to_string).collect(),
            });
        }
        Ok(Self::new(month, docs))
    }
}

#[derive(Debug, Clone)]
pub enum BoilerplatePattern {
    Literal(String),
    Regex(Regex),
}

impl BoilerplatePattern {
    fn strip(&self, text: &str) -> String {
        match self {
            BoilerplatePattern::Literal(lit) if lit.is_empty() => text.to_string(),
            BoilerplatePattern::Literal(lit) => text.replace(lit.as_str(), " "),
            BoilerplatePattern::Regex(re) => re.replace_all(text, " ").into_owned(),
        }
    }
}

/// Cleaning rules. Stoplists and lemma keys are matched against lowercase tokens.
#[derive(Debug, Clone)]
pub struct CleaningConfig {
    pub boilerplate_patterns: Vec<BoilerplatePattern>,
    pub glossary_stoplist: HashSet<String>,
    pub stopword_list: HashSet<String>,
    pub lemma_table: HashMap<String, String>,
    pub min_tokens: usize,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            boilerplate_patterns: Vec::new(),
            glossary_stoplist: HashSet::new(),
            stopword_list: HashSet::new(),
            lemma_table: HashMap::new(),
            min_tokens: DEFAULT_MIN_TOKENS,
        }
    }
}

impl CleaningConfig {
    /// Parses the sectioned config format:
    ///
    /// ```text
    /// [boilerplate]
    /// To contact the reporter
    /// re:(?s)Before it's here.*
    /// [glossary]
    /// dividend
    /// [stopwords]
    /// the
    /// [lemmas]
    /// dividends<TAB>dividend
    /// [settings]
    /// min_tokens = 10
    /// ```
    ///
    /// Boilerplate lines prefixed `re:` are regular expressions; all others are literals.
    /// Lines starting with `#` are comments, except inside `[boilerplate]`.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut cfg = CleaningConfig::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = raw.trim();
            if trimmed.starts_with('[') && trimmed.ends_with(']') {
                section = trimmed[1..trimmed.len() - 1].trim().to_ascii_lowercase();
                continue;
            }
            if trimmed.is_empty() || (section != "boilerplate" && trimmed.starts_with('#')) {
                continue;
            }
            match section.as_str() {
                "boilerplate" => {
                    let pat = match trimmed.strip_prefix("re:") {
                        Some(re) => BoilerplatePattern::Regex(Regex::new(re).map_err(|e| {
                            CorpusError::Config(format!("line {line_no}: bad regex: {e}"))
                        })?),
                        None => BoilerplatePattern::Literal(trimmed.to_string()),
                    };
                    cfg.boilerplate_patterns.push(pat);
                }
                "glossary" => {
                    cfg.glossary_stoplist.insert(trimmed.to_lowercase());
                }
                "stopwords" => {
                    for w in trimmed.split_whitespace() {
                        cfg.stopword_list.insert(w.to_lowercase());
                    }
                }
                "lemmas" => {
                    let (surface, lemma) = raw
                        .split_once('\t')
                        .map(|(a, b)| (a.trim(), b.trim()))
                        .ok_or_else(|| {
                            CorpusError::Config(format!("line {line_no}: lemma line needs surface<TAB>lemma"))
                        })?;
                    cfg.lemma_table.insert(surface.to_lowercase(), lemma.to_string());
                }
                "settings" => {
                    let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                        CorpusError::Config(format!("line {line_no}: expected key = value"))
                    })?;
                    match key.trim() {
                        "min_tokens" => {
                            cfg.min_tokens = value.trim().parse().map_err(|_| {
                                CorpusError::Config(format!("line {line_no}: min_tokens must be an integer"))
                            })?
                        }
                        other => {
                            return Err(CorpusError::Config(format!("line {line_no}: unknown setting `{other}`")))
                        }
                    }
                }
                "" => return Err(CorpusError::Config(format!("line {line_no}: entry outside any section"))),
                other => return Err(CorpusError::Config(format!("unknown section [{other}]"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::UnreadablePath {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_tokens < 1 {
            return Err(CorpusError::Config("min_tokens must be >= 1".into()));
        }
        for (surface, lemma) in &self.lemma_table {
            if tokenize(lemma) != [lemma.clone()] {
                return Err(CorpusError::Config(format!(
                    "lemma `{lemma}` for `{surface}` is not a single lowercase token"
                )));
            }
        }
        for start in self.lemma_table.keys() {
            let mut seen = HashSet::new();
            let mut cur = start;
            while let Some(next) = self.lemma_table.get(cur) {
                if next == cur {
                    break;
                }
                if !seen.insert(cur) {
                    return Err(CorpusError::Config(format!("lemma cycle through `{start}`")));
                }
                cur = next;
            }
        }
        Ok(())
    }

    fn is_stopped(&self, tok: &str) -> bool {
        self.stopword_list.contains(tok) || self.glossary_stoplist.contains(tok)
    }

    /// Follows lemma chains to a fixed point so that lemmatizing twice is a no-op.
    pub fn lemmatize<'a>(&'a self, tok: &'a str) -> &'a str {
        let mut cur = tok;
        for _ in 0..=self.lemma_table.len() {
            match self.lemma_table.get(cur) {
                Some(next) if next != cur => cur = next,
                _ => break,
            }
        }
        cur
    }

    /// Adds suffix-rule lemmas (`-ies`, `-es`, `-s`, `-ing`, `-ed`) for tokens whose
    /// stripped form occurs in `vocab`. Explicit table entries win.
    pub fn extend_with_suffix_lemmas<'a, I>(&mut self, vocab: I)
    where
        I: IntoIterator<Item = &'a String>,
    {
        let vocab: BTreeSet<&String> = vocab.into_iter().collect();
        for tok in &vocab {
            if self.lemma_table.contains_key(tok.as_str()) {
                continue;
            }
            if let Some(lemma) = suffix_lemma(tok, |cand| vocab.contains(&cand.to_string())) {
                self.lemma_table.insert((*tok).clone(), lemma);
            }
        }
    }
}

fn suffix_lemma(tok: &str, known: impl Fn(&str) -> bool) -> Option<String> {
    let rules: [(&str, &str); 5] = [("ies", "y"), ("es", ""), ("s", ""), ("ing", ""), ("ed", "")];
    for (suffix, repl) in rules {
        if let Some(stem) = tok.strip_suffix(suffix) {
            if stem.len() < 2 || tok.ends_with("ss") {
                continue;
            }
            let cand = format!("{stem}{repl}");
            if cand != tok && known(&cand) {
                return Some(cand);
            }
        }
    }
    None
}

/// Lowercases, splits on non-alphanumeric characters, drops all-digit tokens and
/// tokens shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2 && !t.chars().all(|c| c.is_numeric()))
        .map(str::to_lowercase)
        .collect()
}

/// Cleaning steps 1-3: boilerplate stripping, tokenization and stoplist removal.
pub fn pre_lemma_tokens(article: &Article, cfg: &CleaningConfig) -> Vec<String> {
    let mut text = format!("{}\n{}", article.title, article.body);
    for pat in &cfg.boilerplate_patterns {
        text = pat.strip(&text);
    }
    tokenize(&text)
        .into_iter()
        .filter(|t| !cfg.is_stopped(t))
        .collect()
}

/// Runs the full cleaning pipeline. Returns `None` for articles that end up with
/// fewer than `cfg.min_tokens` tokens or whose timestamp has no valid month.
///
/// A lemma that is itself a stoplist member is dropped too, so inflected forms
/// of glossary terms disappear along with the base form.
pub fn clean(article: &Article, cfg: &CleaningConfig) -> Option<TokenDoc> {
    let month = article.month()?;
    let tokens: Vec<String> = pre_lemma_tokens(article, cfg)
        .iter()
        .map(|t| cfg.lemmatize(t))
        .filter(|t| !cfg.is_stopped(t))
        .map(str::to_string)
        .collect();
    if tokens.len() < cfg.min_tokens {
        return None;
    }
    Some(TokenDoc {
        article_id: article.id.clone(),
        month,
        tokens,
    })
}

/// Reads a JSON Lines file of articles, preserving order and rejecting duplicate ids.
pub fn ingest(path: &Path) -> Result<Vec<Article>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::UnreadablePath {
        path: path.display().to_string(),
        source,
    })?;
    let mut articles = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::UnreadablePath {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let article: Article = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
            line_no,
            reason: e.to_string(),
        })?;
        if article.id.is_empty() {
            return Err(CorpusError::MalformedRecord {
                line_no,
                reason: "empty id".into(),
            });
        }
        if article.month().is_none() {
            return Err(CorpusError::MalformedRecord {
                line_no,
                reason: format!("unparseable published_at `{}`", article.published_at),
            });
        }
        if !seen.insert(article.id.clone()) {
            return Err(CorpusError::DuplicateId(article.id));
        }
        articles.push(article);
    }
    Ok(articles)
}

pub fn write_jsonl(path: &Path, articles: &[Article]) -> Result<(), CorpusError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for a in articles {
        serde_json::to_writer(&mut f, a).map_err(std::io::Error::from)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Buckets documents by month. Bucket contents do not depend on input order.
pub fn partition(docs: impl IntoIterator<Item = TokenDoc>) -> BTreeMap<YearMonth, MonthlyCorpus> {
    let mut buckets: BTreeMap<YearMonth, Vec<TokenDoc>> = BTreeMap::new();
    for doc in docs {
        buckets.entry(doc.month).or_default().push(doc);
    }
    buckets
        .into_iter()
        .map(|(m, docs)| (m, MonthlyCorpus::new(m, docs)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn article(id: &str, body: &str) -> Article {
        Article {
            id: id.into(),
            published_at: "2019-07-15T12:00:00Z".into(),
            title: String::new(),
            body: body.into(),
        }
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(
            tokenize("Microsoft's Q3 revenue: $12.5B, up 14% in 2019! A x"),
            vec!["microsoft", "q3", "revenue", "5b", "up", "in"]
        );
    }

    #[test]
    fn boilerplate_only_body_is_rejected() {
        let mut cfg = CleaningConfig::default();
        cfg.boilerplate_patterns.push(BoilerplatePattern::Regex(
            Regex::new(r"(?s)To contact the reporter.*").unwrap(),
        ));
        let a = article(
            "a1",
            "To contact the reporter on this story: Jane Doe in Seattle at jdoe@example.com To contact the editor responsible",
        );
        assert!(clean(&a, &cfg).is_none());
    }

    #[test]
    fn pass_through_preserves_order() {
        let cfg = CleaningConfig::default();
        let words = "cloud azure teams office windows surface xbox bing github linkedin skype outlook";
        let doc = clean(&article("a1", words), &cfg).unwrap();
        assert_eq!(doc.tokens.join(" "), words);
        assert_eq!(doc.tokens.len(), 12);
    }

    #[test]
    fn inflected_glossary_terms_are_removed() {
        let mut cfg = CleaningConfig {
            min_tokens: 1,
            ..Default::default()
        };
        cfg.lemma_table.insert("dividends".into(), "dividend".into());
        cfg.glossary_stoplist.insert("dividend".into());
        // Surface "dividend" goes at step 3; "dividends" lemmatizes onto a stop term.
        assert_eq!(pre_lemma_tokens(&article("a", "dividends dividend cloud"), &cfg), ["dividends", "cloud"]);
        let doc = clean(&article("a", "dividends dividend cloud"), &cfg).unwrap();
        assert_eq!(doc.tokens, ["cloud"]);
    }

    #[test]
    fn config_parsing() {
        let text = "[boilerplate]\nTo contact the reporter\nre:(?i)bloomberg terminal\n[glossary]\nDividend\n# comment\n[stopwords]\nthe a of\n[lemmas]\nservers\tserver\n[settings]\nmin_tokens = 3\n";
        let cfg = CleaningConfig::parse(text).unwrap();
        assert_eq!(cfg.boilerplate_patterns.len(), 2);
        assert!(cfg.glossary_stoplist.contains("dividend"));
        assert_eq!(cfg.stopword_list.len(), 3);
        assert_eq!(cfg.lemma_table["servers"], "server");
        assert_eq!(cfg.min_tokens, 3);

        assert!(CleaningConfig::parse("[settings]\nmin_tokens = 0\n").is_err());
        assert!(CleaningConfig::parse("[lemmas]\nfoo bar\n").is_err());
        assert!(CleaningConfig::parse("[lemmas]\na1\tbb\nbb\ta1\n").is_err());
        assert!(CleaningConfig::parse("[lemmas]\nfoo\tTwo Words\n").is_err());
        assert!(CleaningConfig::parse("loose\n").is_err());
    }

    #[test]
    fn suffix_lemmas_need_known_stem() {
        let mut cfg = CleaningConfig::default();
        let vocab: Vec<String> = ["server", "servers", "company", "companies", "news", "running", "run", "class"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        cfg.extend_with_suffix_lemmas(&vocab);
        assert_eq!(cfg.lemma_table.get("servers").map(String::as_str), Some("server"));
        assert_eq!(cfg.lemma_table.get("companies").map(String::as_str), Some("company"));
        assert_eq!(cfg.lemma_table.get("running"), None);
        assert_eq!(cfg.lemma_table.get("news"), None);
        assert_eq!(cfg.lemma_table.get("class"), None);
    }

    #[test]
    fn lemma_chains_resolve() {
        let mut cfg = CleaningConfig::default();
        cfg.lemma_table.insert("aa".into(), "bb".into());
        cfg.lemma_table.insert("bb".into(), "cc".into());
        assert_eq!(cfg.lemmatize("aa"), "cc");
        assert_eq!(cfg.lemmatize("zz"), "zz");
    }

    #[test]
    fn ingest_preserves_order_and_rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        let rec = |id: &str| {
            format!(r#"{{"id":"{id}","published_at":"2019-07-01T00:00:00Z","title":"t","body":"b"}}"#)
        };
        fs::write(&p, format!("{}\n{}\n{}\n", rec("x"), rec("y"), rec("z"))).unwrap();
        let arts = ingest(&p).unwrap();
        assert_eq!(arts.iter().map(|a| a.id.as_str()).collect::<Vec<_>>(), ["x", "y", "z"]);

        fs::write(&p, format!("{}\n{}\n{}\n{}\n", rec("a1"), rec("b"), rec("c"), rec("a1"))).unwrap();
        assert!(matches!(ingest(&p), Err(CorpusError::DuplicateId(id)) if id == "a1"));

        fs::write(&p, format!("{}\n{{\"id\":\"q\"}}\n", rec("a"))).unwrap();
        assert!(matches!(ingest(&p), Err(CorpusError::MalformedRecord { line_no: 2, .. })));

        assert!(matches!(
            ingest(&dir.path().join("missing.jsonl")),
            Err(CorpusError::UnreadablePath { .. })
        ));
    }

    #[test]
    fn partition_buckets_by_month() {
        assert!(partition(Vec::new()).is_empty());
        let m1: YearMonth = "2019-07".parse().unwrap();
        let m2 = m1.succ();
        let doc = |id: &str, m| TokenDoc {
            article_id: id.into(),
            month: m,
            tokens: vec!["aa".into(), "bb".into()],
        };
        let parts = partition(vec![doc("c", m2), doc("a", m1), doc("b", m2)]);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[&m2].docs.len(), 2);
        assert_eq!(parts[&m2].docs[0].article_id, "b");
        assert_eq!(parts[&m1].vocab["aa"], 1);
    }

    #[test]
    fn token_file_round_trip() {
        let m: YearMonth = "2020-01".parse().unwrap();
        let corpus = MonthlyCorpus::from_texts(m, &["aa bb cc", "dd ee"]);
        let text = corpus.to_token_file();
        assert_eq!(text, "d0\taa bb cc\nd1\tdd ee\n");
        assert_eq!(MonthlyCorpus::parse_token_file(m, &text).unwrap(), corpus);
    }

    fn word() -> impl Strategy<Value = String> {
        proptest::sample::select(vec![
            "cloud", "azure", "teams", "team", "remote", "work", "works", "dividend", "dividends",
            "bond", "the", "of", "ai", "data", "center", "centers",
        ])
        .prop_map(str::to_string)
    }

    fn config() -> impl Strategy<Value = CleaningConfig> {
        (
            proptest::collection::hash_set(word(), 0..4),
            proptest::collection::hash_set(word(), 0..4),
            proptest::collection::hash_map(word(), word(), 0..4),
            1usize..6,
        )
            .prop_map(|(glossary, stop, lemmas, min_tokens)| CleaningConfig {
                glossary_stoplist: glossary,
                stopword_list: stop,
                lemma_table: lemmas,
                min_tokens,
                ..Default::default()
            })
            .prop_filter("acyclic lemma table", |c| c.validate().is_ok())
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(words in proptest::collection::vec(word(), 0..30), cfg in config()) {
            let a = article("p", &words.join(" "));
            if let Some(doc) = clean(&a, &cfg) {
                let again = clean(&article("p", &doc.tokens.join(" ")), &cfg).unwrap();
                prop_assert_eq!(again.tokens, doc.tokens);
            }
        }

        #[test]
        fn larger_stoplists_never_lengthen(
            words in proptest::collection::vec(word(), 0..30),
            cfg in config(),
            extra in proptest::collection::hash_set(word(), 0..4),
        ) {
            let a = article("p", &words.join(" "));
            let len = |c: &CleaningConfig| clean(&a, c).map_or(0, |d| d.tokens.len());
            let mut bigger = cfg.clone();
            bigger.stopword_list.extend(extra);
            prop_assert!(len(&bigger) <= len(&cfg));
        }

        #[test]
        fn partition_is_complete_and_disjoint(months in proptest::collection::vec(0i64..13, 0..40)) {
            let start: YearMonth = "2019-07".parse().unwrap();
            let docs: Vec<TokenDoc> = months.iter().enumerate().map(|(i, &m)| TokenDoc {
                article_id: format!("a{i}"),
                month: start.offset(m),
                tokens: vec!["xx".into()],
            }).collect();
            let mut reversed = docs.clone();
            reversed.reverse();
            let parts = partition(docs.clone());
            prop_assert_eq!(parts.values().map(|c| c.docs.len()).sum::<usize>(), docs.len());
            let ids: HashSet<_> = parts.values().flat_map(|c| c.docs.iter().map(|d| d.article_id.clone())).collect();
            prop_assert_eq!(ids.len(), docs.len());
            prop_assert_eq!(partition(reversed), parts);
        }
    }
}
