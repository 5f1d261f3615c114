use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use leap2trend::embedding::ProviderKind;
use leap2trend::pipeline::{self, Overrides, Pipeline, PipelineError, RunConfig, RunReport, Stage};
use leap2trend::ranking::PairKey;
use leap2trend::synth;

#[derive(Parser)]
#[command(name = "leap2trend", version, about = "Emerging-trend detection from monthly news corpora")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-month work (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true)]
    top_k_avg: Option<usize>,
    #[arg(long, global = true)]
    top_k_max: Option<usize>,
    /// Comma-separated topic counts, e.g. `2,5,10`.
    #[arg(long, global = true, value_delimiter = ',')]
    lda_grid: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pool_cap: Option<usize>,
    /// precomputed_file | deterministic_fallback | static_sgns
    #[arg(long, global = true)]
    provider: Option<ProviderKind>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    threshold: Option<i64>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Clean articles and split them into monthly token files.
    Ingest,
    /// Extract TF-IDF and LDA bigrams and build the keyword pool.
    Keywords,
    /// Compute per-month bigram vectors for the pool.
    Embed,
    /// Rank keyword pairs by cosine similarity each month.
    Rank,
    /// Flag pairs whose rank rose by more than the threshold.
    Detect,
    /// Score detections against search-interest gold labels.
    Evaluate,
    /// Run every stage in order.
    Run,
    /// Write figure data for one keyword pair.
    Report {
        /// Pair as `first second|first second`.
        #[arg(long)]
        pair: PairKey,
        /// Also render an SVG chart.
        #[arg(long)]
        svg: bool,
        /// Completed run directory; defaults to the configured output directory.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Compare two completed runs evaluated on the same gold standard.
    Compare { run_a: PathBuf, run_b: PathBuf },
    /// Write the synthetic planted-trend dataset and a config for it.
    Fixture { dir: PathBuf },
}

impl Global {
    fn overrides(&self) -> Overrides {
        Overrides {
            output_dir: self.out.clone(),
            seed: self.seed,
            top_k_avg: self.top_k_avg,
            top_k_max: self.top_k_max,
            lda_grid: self.lda_grid.clone(),
            pool_cap: self.pool_cap,
            provider: self.provider,
            threshold: self.threshold,
            horizon: self.horizon,
        }
    }

    fn load_config(&self) -> Result<RunConfig, PipelineError> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| PipelineError::Config("--config is required".into()))?;
        let mut cfg = RunConfig::load(path)?;
        cfg.apply(&self.overrides());
        Ok(cfg)
    }

    fn pipeline(&self) -> Result<Pipeline, PipelineError> {
        Ok(Pipeline::new(self.load_config()?)?.with_threads(self.threads))
    }
}

fn stage_of(cmd: &Command) -> Option<Stage> {
    Some(match cmd {
        Command::Ingest => Stage::Ingest,
        Command::Keywords => Stage::Keywords,
        Command::Embed => Stage::Embed,
        Command::Rank => Stage::Rank,
        Command::Detect => Stage::Detect,
        Command::Evaluate => Stage::Evaluate,
        _ => return None,
    })
}

fn print_stage(stage: Stage, rec: &pipeline::StageRecord) {
    println!(
        "stage={stage} artifacts={} digest={} ms={}",
        rec.artifacts.len(),
        rec.combined_digest(),
        rec.wall_clock_ms
    );
}

fn print_eval(out: &Path) -> Result<(), PipelineError> {
    let path = out.join("evaluate/report.json");
    let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
    let r: RunReport = serde_json::from_str(&text).map_err(|e| PipelineError::Data(e.to_string()))?;
    let e = &r.report;
    let auc = e.auc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into());
    println!(
        "horizon={} threshold={} instances={} precision_macro={:.4} recall_macro={:.4} f1_macro={:.4} auc={auc} zero_rule_f1_macro={:.4}",
        e.horizon, e.threshold, e.instances, e.precision_macro, e.recall_macro, e.f1_macro, e.zero_rule.f1_macro
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    if let Some(stage) = stage_of(&cli.command) {
        let p = cli.global.pipeline()?;
        let rec = p.run_stage(stage)?;
        print_stage(stage, &rec);
        if stage == Stage::Evaluate {
            print_eval(p.out_dir())?;
        }
        return Ok(());
    }
    match cli.command {
        Command::Run => {
            let p = cli.global.pipeline()?;
            for stage in Stage::ALL {
                print_stage(stage, &p.run_stage(stage)?);
            }
            print_eval(p.out_dir())?;
        }
        Command::Report { pair, svg, run } => {
            let dir = match run.or_else(|| cli.global.out.clone()) {
                Some(d) => d,
                None => cli.global.load_config()?.output_dir,
            };
            for path in pipeline::write_report(&dir, &pair, svg)? {
                println!("{}", path.display());
            }
        }
        Command::Compare { run_a, run_b } => {
            print!("{}", pipeline::compare(&run_a, &run_b)?);
        }
        Command::Fixture { dir } => {
            let seed = cli.global.seed.unwrap_or(0);
            let path = synth::write_fixture(&dir, seed)?;
            println!("{}", path.display());
        }
        _ => unreachable!("stage commands handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error code={} exit={} message={msg:?}", e.code(), e.exit_code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
