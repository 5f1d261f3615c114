use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use super::stages::{load_pool, load_rankings, read_artifact, HorizonRow, RunReport};
use super::{validate_upstream, PipelineError, RunManifest, Stage};
use crate::evaluation::{pair_series, parse_interest_csv};
use crate::month::YearMonth;
use crate::ranking::{all_pairs, rank_deltas, PairKey};

/// One month of a pair's figure data. Empty cells mean the pair was not ranked.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub month: YearMonth,
    pub similarity: Option<f64>,
    pub rank: Option<usize>,
    /// `pairs in the pool + 1 - rank`, so that a rising curve means rising similarity.
    pub inverted_rank: Option<usize>,
    pub delta: Option<i64>,
    pub trends_interest: Option<f64>,
}

fn completed_run(run_dir: &Path, needs: Stage) -> Result<RunManifest, PipelineError> {
    let manifest = RunManifest::load(run_dir)?.ok_or_else(|| PipelineError::MissingStage {
        stage: "report".into(),
        missing: Stage::Ingest.name().into(),
    })?;
    if !manifest.stages.contains_key(needs.name()) {
        return Err(PipelineError::MissingStage {
            stage: "report".into(),
            missing: needs.name().into(),
        });
    }
    validate_upstream(needs, &manifest.config, &manifest, run_dir)?;
    Ok(manifest)
}

/// One row per month in the run's range, whether or not the pair was ranked that month.
pub fn pair_report(run_dir: &Path, pair: &PairKey) -> Result<Vec<ReportRow>, PipelineError> {
    let manifest = completed_run(run_dir, Stage::Evaluate)?;
    let cfg = &manifest.config;
    let pool = load_pool(run_dir)?;
    if !all_pairs(&pool.pool).contains(pair) {
        return Err(PipelineError::UnknownPair(pair.to_string()));
    }
    let months = cfg.months.months();
    let rankings = load_rankings(run_dir, &months)?;
    let series = rank_deltas(&rankings, pair)?;

    let text = fs::read_to_string(&cfg.trends_csv_path).map_err(|e| PipelineError::io(&cfg.trends_csv_path, e))?;
    let interest = parse_interest_csv(&text)?;
    let joint = match (interest.get(&pair.a().key()), interest.get(&pair.b().key())) {
        (Some(a), Some(b)) => pair_series(a, b).ok(),
        _ => None,
    };

    Ok(rankings
        .iter()
        .map(|r| {
            let point = series.points.get(&r.month);
            ReportRow {
                month: r.month,
                similarity: point.map(|p| p.0),
                rank: point.map(|p| p.1),
                inverted_rank: point.map(|p| r.entries.len() + r.missing.len() + 1 - p.1),
                delta: series.deltas.get(&r.month).copied().flatten(),
                trends_interest: joint.as_ref().and_then(|j| j.points.get(&r.month).copied()),
            }
        })
        .collect())
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("month,similarity,rank,inverted_rank,delta,trends_interest\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.month,
            cell(r.similarity),
            cell(r.rank),
            cell(r.inverted_rank),
            cell(r.delta),
            cell(r.trends_interest)
        ));
    }
    out
}

/// Dual line chart: inverted rank and search interest, each scaled to its own range.
pub fn report_svg(pair: &PairKey, rows: &[ReportRow]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 320.0;
    const PAD: f64 = 40.0;
    let n = rows.len().max(2) as f64;
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (n - 1.0);

    let polyline = |vals: Vec<Option<f64>>, color: &str| {
        let present: Vec<f64> = vals.iter().flatten().copied().collect();
        let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut segments: Vec<Vec<String>> = vec![Vec::new()];
        for (i, v) in vals.iter().enumerate() {
            match v {
                Some(v) => {
                    let y = H - PAD - (H - 2.0 * PAD) * (v - lo) / span;
                    segments.last_mut().unwrap().push(format!("{:.1},{:.1}", x(i), y));
                }
                None => segments.push(Vec::new()),
            }
        }
        segments
            .into_iter()
            .filter(|s| !s.is_empty())
            .map(|s| {
                format!(
                    "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
                    s.join(" ")
                )
            })
            .collect::<String>()
    };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n  <title>{pair}</title>\n"
    );
    svg.push_str(&format!(
        "  <line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#444\"/>\n",
        b = H - PAD,
        r = W - PAD
    ));
    svg.push_str(&polyline(rows.iter().map(|r| r.inverted_rank.map(|v| v as f64)).collect(), "#1f77b4"));
    svg.push_str(&polyline(rows.iter().map(|r| r.trends_interest).collect(), "#d62728"));
    for (i, r) in rows.iter().enumerate() {
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{}\" font-size=\"9\" text-anchor=\"middle\">{}</text>\n",
            x(i),
            H - PAD + 14.0,
            r.month
        ));
    }
    svg.push_str("  <text x=\"40\" y=\"20\" font-size=\"11\" fill=\"#1f77b4\">inverted rank</text>\n");
    svg.push_str("  <text x=\"140\" y=\"20\" font-size=\"11\" fill=\"#d62728\">search interest</text>\n");
    svg.push_str("</svg>\n");
    svg
}

/// Writes `report/<pair slug>.csv` (and `.svg` when asked) under the run directory.
pub fn write_report(run_dir: &Path, pair: &PairKey, svg: bool) -> Result<Vec<PathBuf>, PipelineError> {
    let rows = pair_report(run_dir, pair)?;
    let dir = run_dir.join("report");
    fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    let mut written = Vec::new();
    let csv = dir.join(format!("{}.csv", pair.slug()));
    fs::write(&csv, report_csv(&rows)).map_err(|e| PipelineError::io(&csv, e))?;
    written.push(csv);
    if svg {
        let path = dir.join(format!("{}.svg", pair.slug()));
        fs::write(&path, report_svg(pair, &rows)).map_err(|e| PipelineError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Side-by-side scores of two runs evaluated against the same gold standard.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: (String, String),
    pub reports: (RunReport, RunReport),
}

fn load_report(run_dir: &Path) -> Result<(RunManifest, RunReport), PipelineError> {
    let manifest = completed_run(run_dir, Stage::Evaluate)?;
    let report = serde_json::from_str(&read_artifact(run_dir, "evaluate/report.json")?)
        .map_err(|e| PipelineError::Data(format!("evaluate/report.json: {e}")))?;
    Ok((manifest, report))
}

pub fn compare(run_a: &Path, run_b: &Path) -> Result<Comparison, PipelineError> {
    let (ma, ra) = load_report(run_a)?;
    let (mb, rb) = load_report(run_b)?;
    let gold = |m: &RunManifest| m.stages[Stage::Evaluate.name()].artifacts.get("evaluate/gold.csv").cloned();
    if gold(&ma) != gold(&mb) {
        return Err(PipelineError::GoldMismatch);
    }
    let label = |p: &Path| {
        p.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string())
    };
    let (mut la, lb) = (label(run_a), label(run_b));
    if la == lb {
        la.push_str(" (a)");
    }
    Ok(Comparison {
        labels: (la, lb),
        reports: (ra, rb),
    })
}

impl Comparison {
    fn horizon_auc(rows: &[HorizonRow], n: usize) -> String {
        rows.iter()
            .find(|r| r.horizon == n)
            .and_then(|r| r.auc)
            .map(|a| format!("{a:.4}"))
            .unwrap_or_else(|| "-".into())
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (ra, rb) = (&self.reports.0.report, &self.reports.1.report);
        let w = self.labels.0.len().max(self.labels.1.len()).max(10);
        writeln!(f, "horizon {} months, threshold {}", ra.horizon, ra.threshold)?;
        writeln!(f, "{:<w$}  {:>9}  {:>9}  {:>9}", "System", "Precision", "Recall", "F1-score")?;
        let zr = &ra.zero_rule;
        let rows = [
            ("Zero-rule", zr.precision_macro, zr.recall_macro, zr.f1_macro),
            (self.labels.0.as_str(), ra.precision_macro, ra.recall_macro, ra.f1_macro),
            (self.labels.1.as_str(), rb.precision_macro, rb.recall_macro, rb.f1_macro),
        ];
        for (name, p, r, f1) in rows {
            writeln!(f, "{name:<w$}  {p:>9.4}  {r:>9.4}  {f1:>9.4}")?;
        }
        writeln!(f)?;
        writeln!(f, "{:<8}  {:>w$}  {:>w$}", "Horizon", self.labels.0, self.labels.1)?;
        let (ha, hb) = (&self.reports.0.by_horizon, &self.reports.1.by_horizon);
        for n in super::stages::HORIZONS {
            writeln!(
                f,
                "{n:<8}  {:>w$}  {:>w$}",
                Self::horizon_auc(ha, n),
                Self::horizon_auc(hb, n)
            )?;
        }
        Ok(())
    }
}
