//! Staged, file-based orchestration: each stage reads the artifacts of earlier
//! stages from the output directory and records digests of what it wrote in
//! `manifest.json`.

mod config;
mod manifest;
mod report;
mod stages;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embedding::{EmbeddingError, ProviderKind};
use crate::evaluation::EvalError;
use crate::keywords::KeywordError;
use crate::month::YearMonth;
use crate::ranking::RankingError;

pub use config::{MissingSeriesPolicy, MonthRange, Overrides, RunConfig};
pub use manifest::{sha256_hex, RunManifest, StageRecord, MANIFEST_FILE};
pub use report::{compare, pair_report, report_csv, report_svg, write_report, Comparison, ReportRow};
pub use stages::{HorizonRow, RunReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error("stage `{stage}` needs `{missing}` to have completed")]
    MissingStage { stage: String, missing: String },
    #[error("{0}")]
    StaleArtifact(String),
    #[error("pair `{0}` is not in this run")]
    UnknownPair(String),
    #[error("runs were evaluated against different gold standards")]
    GoldMismatch,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Keyword(#[from] KeywordError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Stable identifier printed with CLI errors.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Config(_) => "config_error",
            Self::MissingStage { .. } => "missing_stage",
            Self::StaleArtifact(_) => "stale_artifact",
            Self::UnknownPair(_) => "unknown_pair",
            Self::GoldMismatch => "gold_mismatch",
            Self::Corpus(_) => "corpus_error",
            Self::Keyword(_) => "keyword_error",
            Self::Embedding(_) => "embedding_error",
            Self::Ranking(_) => "ranking_error",
            Self::Eval(_) => "evaluation_error",
            Self::Io { .. } => "io_error",
            Self::Data(_) => "data_error",
        }
    }

    /// 2 for configuration problems, 3 for missing or stale artifacts, 4 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::MissingStage { .. } | Self::StaleArtifact(_) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Keywords,
    Embed,
    Rank,
    Detect,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Keywords,
        Stage::Embed,
        Stage::Rank,
        Stage::Detect,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Keywords => "keywords",
            Stage::Embed => "embed",
            Stage::Rank => "rank",
            Stage::Detect => "detect",
            Stage::Evaluate => "evaluate",
        }
    }

    /// Stages whose artifacts this one reads directly.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Keywords => &[Stage::Ingest],
            Stage::Embed => &[Stage::Ingest, Stage::Keywords],
            Stage::Rank => &[Stage::Keywords, Stage::Embed],
            Stage::Detect => &[Stage::Rank],
            Stage::Evaluate => &[Stage::Keywords, Stage::Detect],
        }
    }

    /// This stage and everything it depends on, directly or not.
    fn closure(self) -> BTreeSet<Stage> {
        let mut out = BTreeSet::new();
        let mut todo = vec![self];
        while let Some(s) = todo.pop() {
            for &r in s.requires() {
                if out.insert(r) {
                    todo.push(r);
                }
            }
        }
        out
    }

    fn downstream(self) -> Vec<Stage> {
        Stage::ALL.into_iter().filter(|s| s.closure().contains(&self)).collect()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// Seed for one unit of work, derived from the run seed, the stage name and the month.
pub fn stage_seed(seed: u64, stage: Stage, month: Option<YearMonth>) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.name().as_bytes());
    if let Some(m) = month {
        h.update(m.to_string().as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn file_digest(path: &Path) -> Result<String, PipelineError> {
    fs::read(path)
        .map(|b| sha256_hex(&b))
        .map_err(|e| PipelineError::io(path, e))
}

/// Digest of everything `stage` consumes under `cfg`, given the recorded upstream stages.
fn inputs_digest(stage: Stage, cfg: &RunConfig, manifest: &RunManifest) -> Result<String, PipelineError> {
    let mut h = Sha256::new();
    h.update(stage.name().as_bytes());
    for &r in stage.requires() {
        let rec = manifest.stages.get(r.name()).ok_or_else(|| PipelineError::MissingStage {
            stage: stage.name().into(),
            missing: r.name().into(),
        })?;
        h.update(rec.combined_digest().as_bytes());
    }
    let mut files: Vec<PathBuf> = Vec::new();
    let fingerprint = match stage {
        Stage::Ingest => {
            files.extend([cfg.corpus_path.clone(), cfg.cleaning_config_path.clone()]);
            serde_json::json!({ "months": cfg.months })
        }
        Stage::Keywords => {
            files.extend(cfg.allow_list_path.iter().cloned());
            files.extend(cfg.deny_list_path.iter().cloned());
            serde_json::json!({
                "seed": cfg.seed,
                "top_k_avg": cfg.top_k_avg,
                "top_k_max": cfg.top_k_max,
                "lda_grid": cfg.lda_grid,
                "lda": cfg.lda,
                "pool_cap": cfg.pool_cap,
            })
        }
        Stage::Embed => {
            if cfg.provider.kind == ProviderKind::PrecomputedFile {
                let dir = Path::new(cfg.provider.vectors_dir.as_deref().unwrap_or_default());
                files.extend(
                    cfg.months
                        .months()
                        .into_iter()
                        .map(|m| dir.join(format!("{m}.vec")))
                        .filter(|p| p.is_file()),
                );
            }
            serde_json::json!({ "seed": cfg.seed, "provider": cfg.provider })
        }
        Stage::Rank => serde_json::json!({}),
        Stage::Detect => serde_json::json!({ "threshold": cfg.threshold }),
        Stage::Evaluate => {
            files.push(cfg.trends_csv_path.clone());
            serde_json::json!({ "horizon": cfg.horizon, "missing_series": cfg.missing_series })
        }
    };
    h.update(fingerprint.to_string().as_bytes());
    for f in files {
        h.update(file_digest(&f)?.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

/// Checks that every stage `stage` depends on has run, that its artifacts are
/// unchanged on disk, and that its inputs are what it saw when it ran.
fn validate_upstream(stage: Stage, cfg: &RunConfig, manifest: &RunManifest, out: &Path) -> Result<(), PipelineError> {
    for dep in stage.closure() {
        let rec = manifest.stages.get(dep.name()).ok_or_else(|| PipelineError::MissingStage {
            stage: stage.name().into(),
            missing: dep.name().into(),
        })?;
        for (rel, digest) in &rec.artifacts {
            let path = out.join(rel);
            if !path.is_file() {
                return Err(PipelineError::MissingStage {
                    stage: stage.name().into(),
                    missing: dep.name().into(),
                });
            }
            if &file_digest(&path)? != digest {
                return Err(PipelineError::StaleArtifact(format!("{rel} changed after `{dep}` ran")));
            }
        }
        if inputs_digest(dep, cfg, manifest)? != rec.inputs_digest {
            return Err(PipelineError::StaleArtifact(format!(
                "inputs or settings of `{dep}` changed since it ran"
            )));
        }
    }
    Ok(())
}

/// A configured run over one output directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: RunConfig,
    threads: usize,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self { config, threads: 0 })
    }

    /// Worker threads for per-month work; 0 lets rayon decide.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn run_all(&self) -> Result<RunManifest, PipelineError> {
        for stage in Stage::ALL {
            self.run_stage(stage)?;
        }
        self.manifest()
    }

    pub fn manifest(&self) -> Result<RunManifest, PipelineError> {
        RunManifest::load(self.out_dir())?.ok_or_else(|| PipelineError::MissingStage {
            stage: "manifest".into(),
            missing: Stage::Ingest.name().into(),
        })
    }

    /// Runs one stage, replacing its previous artifacts and invalidating every
    /// stage downstream of it.
    pub fn run_stage(&self, stage: Stage) -> Result<StageRecord, PipelineError> {
        let out = self.out_dir();
        fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
        let mut manifest = RunManifest::load(out)?.unwrap_or_else(|| RunManifest::new(self.config.clone()));
        validate_upstream(stage, &self.config, &manifest, out)?;
        let inputs = inputs_digest(stage, &self.config, &manifest)?;

        for s in std::iter::once(stage).chain(stage.downstream()) {
            manifest.stages.remove(s.name());
            let dir = out.join(s.name());
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
            }
        }

        let started = Instant::now();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
        let ctx = stages::Ctx { cfg: &self.config, out };
        let artifacts = pool.install(|| stages::run(stage, &ctx))?;

        let dir = out.join(stage.name());
        fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        let mut digests = std::collections::BTreeMap::new();
        for (rel, bytes) in artifacts {
            let path = out.join(&rel);
            fs::write(&path, &bytes).map_err(|e| PipelineError::io(&path, e))?;
            digests.insert(rel, sha256_hex(&bytes));
        }
        let record = StageRecord {
            artifacts: digests,
            inputs_digest: inputs,
            wall_clock_ms: started.elapsed().as_millis() as u64,
        };
        manifest.config = self.config.clone();
        manifest.stages.insert(stage.name().into(), record.clone());
        manifest.save(out)?;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_graph() {
        assert_eq!(
            Stage::Evaluate.closure(),
            [Stage::Ingest, Stage::Keywords, Stage::Embed, Stage::Rank, Stage::Detect].into()
        );
        assert_eq!(Stage::Rank.downstream(), vec![Stage::Detect, Stage::Evaluate]);
        assert!(Stage::Evaluate.downstream().is_empty());
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
    }

    #[test]
    fn seeds_differ_by_stage_and_month() {
        let m: YearMonth = "2020-01".parse().unwrap();
        let a = stage_seed(7, Stage::Keywords, Some(m));
        assert_eq!(a, stage_seed(7, Stage::Keywords, Some(m)));
        assert_ne!(a, stage_seed(7, Stage::Embed, Some(m)));
        assert_ne!(a, stage_seed(7, Stage::Keywords, Some(m.succ())));
        assert_ne!(a, stage_seed(8, Stage::Keywords, Some(m)));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Config("x".into()).exit_code(), 2);
        let missing = PipelineError::MissingStage {
            stage: "rank".into(),
            missing: "embed".into(),
        };
        assert_eq!((missing.code(), missing.exit_code()), ("missing_stage", 3));
        assert_eq!(PipelineError::GoldMismatch.exit_code(), 4);
    }
}
