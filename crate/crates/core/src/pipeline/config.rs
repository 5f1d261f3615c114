use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::embedding::{EmbeddingProviderSpec, ProviderKind};
use crate::keywords::LdaParams;
use crate::month::YearMonth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthRange {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthRange {
    pub fn months(&self) -> Vec<YearMonth> {
        YearMonth::range_inclusive(self.start, self.end)
    }
}

/// What the evaluate stage does with pool keywords that have no interest series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingSeriesPolicy {
    #[default]
    Error,
    /// Leave pairs involving such keywords unlabeled.
    Skip,
}

/// Settings for one pipeline run, usually read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub cleaning_config_path: PathBuf,
    pub trends_csv_path: PathBuf,
    pub months: MonthRange,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_top_k")]
    pub top_k_avg: usize,
    #[serde(default = "default_top_k")]
    pub top_k_max: usize,
    #[serde(default = "default_grid")]
    pub lda_grid: Vec<usize>,
    #[serde(default)]
    pub lda: LdaParams,
    #[serde(default = "default_pool_cap")]
    pub pool_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_list_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deny_list_path: Option<PathBuf>,
    #[serde(default)]
    pub provider: EmbeddingProviderSpec,
    #[serde(default)]
    pub threshold: i64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub missing_series: MissingSeriesPolicy,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_top_k() -> usize {
    50
}

fn default_grid() -> Vec<usize> {
    vec![2, 5, 10]
}

fn default_pool_cap() -> usize {
    20
}

fn default_horizon() -> usize {
    3
}

/// Command-line values that replace config keys of the same name.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub top_k_avg: Option<usize>,
    pub top_k_max: Option<usize>,
    pub lda_grid: Option<Vec<usize>>,
    pub pool_cap: Option<usize>,
    pub provider: Option<ProviderKind>,
    pub threshold: Option<i64>,
    pub horizon: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.message().replace('\n', " ")))
    }

    /// Reads a config file; relative paths inside it are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let base = fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_path);
        fix(&mut self.cleaning_config_path);
        fix(&mut self.trends_csv_path);
        fix(&mut self.output_dir);
        if let Some(p) = self.allow_list_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.deny_list_path.as_mut() {
            fix(p);
        }
        if let Some(dir) = self.provider.vectors_dir.as_mut() {
            if Path::new(dir).is_relative() {
                *dir = base.join(&*dir).display().to_string();
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.top_k_avg {
            self.top_k_avg = v;
        }
        if let Some(v) = o.top_k_max {
            self.top_k_max = v;
        }
        if let Some(v) = &o.lda_grid {
            self.lda_grid = v.clone();
        }
        if let Some(v) = o.pool_cap {
            self.pool_cap = v;
        }
        if let Some(v) = o.provider {
            self.provider.kind = v;
        }
        if let Some(v) = o.threshold {
            self.threshold = v;
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
    }

    /// Checks value ranges and that every referenced input exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::Config(m));
        if self.months.start > self.months.end {
            return err(format!("empty month range {}..{}", self.months.start, self.months.end));
        }
        if self.horizon < 2 {
            return err(format!("horizon must be >= 2, got {}", self.horizon));
        }
        if self.lda_grid.is_empty() || self.lda_grid.iter().any(|&k| k < 2) {
            return err("lda_grid must be nonempty with every k >= 2".into());
        }
        if self.top_k_avg == 0 || self.top_k_max == 0 || self.pool_cap == 0 {
            return err("top_k_avg, top_k_max and pool_cap must be >= 1".into());
        }
        if self.lda.iterations <= self.lda.burn_in || self.lda.sample_lag == 0 {
            return err("lda needs iterations > burn_in and sample_lag >= 1".into());
        }
        self.provider
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut files = vec![&self.corpus_path, &self.cleaning_config_path, &self.trends_csv_path];
        files.extend(self.allow_list_path.as_ref());
        files.extend(self.deny_list_path.as_ref());
        for f in files {
            if !f.is_file() {
                return err(format!("no such file: {}", f.display()));
            }
        }
        if self.provider.kind == ProviderKind::PrecomputedFile {
            let dir = Path::new(self.provider.vectors_dir.as_deref().unwrap_or_default());
            if !dir.is_dir() {
                return err(format!("no such directory: {}", dir.display()));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}
