use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlar::config::PipelineConfig;
use mlar::error::{Error, Stage};
use mlar::eval::{generate_synthetic, SyntheticSpec};
use mlar::pipeline::{self, EvaluationReport};

/// Multi-level association rule mining for cell KPI telemetry.
#[derive(Debug, Parser)]
#[command(name = "mlar", version)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every stage: ingest, cluster, mine, extend, evaluate.
    Run(ConfigArgs),
    /// Load, clean, complete and quantize the raw data.
    Ingest(ConfigArgs),
    /// Cluster cells on engineering and PM summaries.
    Cluster(ConfigArgs),
    /// Mine per-cluster CP/KPI rules.
    Mine(ConfigArgs),
    /// Extend mined rules with environment features.
    Extend(ConfigArgs),
    /// Noise robustness and label precision of the mined rules.
    Evaluate(ConfigArgs),
    /// Generate a planted-rule synthetic dataset.
    Synth {
        /// Synthetic spec file.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "synthetic")]
        out: PathBuf,
    },
}

/// Each flag overrides the config key of the same name.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Pipeline config file (`key = value` lines).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    quantization: Option<String>,
    #[arg(long)]
    labels: Option<String>,
    #[arg(short, long)]
    output: Option<String>,
    #[arg(long)]
    max_gap: Option<String>,
    #[arg(long)]
    cut_count: Option<String>,
    #[arg(long)]
    cut_distance: Option<String>,
    #[arg(long)]
    min_support: Option<String>,
    #[arg(long)]
    min_confidence: Option<String>,
    #[arg(long)]
    min_lift: Option<String>,
    /// Primary sort key: support, confidence or lift.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    include_lag: Option<String>,
    #[arg(long)]
    include_delta: Option<String>,
    #[arg(long)]
    verify_identities: Option<String>,
    #[arg(long)]
    dump_transactions: Option<String>,
    #[arg(long)]
    env_features: Option<String>,
    #[arg(long)]
    max_extension: Option<String>,
    #[arg(long)]
    confidence_margin: Option<String>,
    /// Environment feature score: mi or chi2.
    #[arg(long)]
    feature_score: Option<String>,
    #[arg(long)]
    noise_fraction: Option<String>,
    #[arg(long)]
    noise_amplitude: Option<String>,
    #[arg(long)]
    noise_seed: Option<String>,
    /// Comma-separated k values for containment depth.
    #[arg(long = "k", alias = "top-k")]
    top_k: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::read(p)?,
            None => PipelineConfig::default(),
        };
        let flags = [
            ("data", &self.data),
            ("schema", &self.schema),
            ("quantization", &self.quantization),
            ("labels", &self.labels),
            ("output", &self.output),
            ("max_gap", &self.max_gap),
            ("cut_count", &self.cut_count),
            ("cut_distance", &self.cut_distance),
            ("min_support", &self.min_support),
            ("min_confidence", &self.min_confidence),
            ("min_lift", &self.min_lift),
            ("order", &self.order),
            ("include_lag", &self.include_lag),
            ("include_delta", &self.include_delta),
            ("verify_identities", &self.verify_identities),
            ("dump_transactions", &self.dump_transactions),
            ("env_features", &self.env_features),
            ("max_extension", &self.max_extension),
            ("confidence_margin", &self.confidence_margin),
            ("feature_score", &self.feature_score),
            ("noise_fraction", &self.noise_fraction),
            ("noise_amplitude", &self.noise_amplitude),
            ("noise_seed", &self.noise_seed),
            ("top_k", &self.top_k),
            ("threads", &self.threads),
        ];
        let here = Path::new("");
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.apply(key, v, here)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("`--set {kv}`: expected KEY=VALUE")))?;
            cfg.apply(k.trim(), v.trim(), here)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_depths(report: &EvaluationReport) {
    let Some(first) = report.robustness.first() else {
        println!("no clusters to evaluate");
        return;
    };
    let mut rows = vec![std::iter::once("cluster".to_string())
        .chain(first.depths.iter().map(|d| format!("top {} rules", d.k)))
        .collect::<Vec<_>>()];
    for c in &report.robustness {
        let cells = c.depths.iter().map(|d| match d.depth {
            Some(k) => k.to_string(),
            None => d.status.replace('_', " "),
        });
        rows.push(std::iter::once(c.cluster_id.to_string()).chain(cells).collect());
    }
    let widths: Vec<usize> =
        (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
    for row in &rows {
        let mut line = format!("{:<w$}", row[0], w = widths[0]);
        for (cell, w) in row.iter().zip(&widths).skip(1) {
            line.push_str(&format!("  {cell:>w$}"));
        }
        println!("{line}");
    }
    if let Some(p) = &report.precision {
        println!(
            "precision {:.4} ({} correct, {} incorrect, {} unlabelled)",
            p.precision, p.correct, p.incorrect, p.unlabeled
        );
    }
}

fn execute(command: Command) -> Result<(), Error> {
    let config = |args: &ConfigArgs| args.resolve().map_err(|e| e.in_stage(Stage::Config));
    match command {
        Command::Run(args) => {
            let cfg = config(&args)?;
            let summary = pipeline::run_pipeline(&cfg)?;
            println!("{} clusters, rules per cluster {:?}, extended {:?}", summary.clusters, summary.rules, summary.extended_rules);
            print_depths(&summary.evaluation);
            println!("reports written to {}", cfg.output.display());
        }
        Command::Ingest(args) => {
            let r = pipeline::ingest(&config(&args)?)?;
            println!(
                "kept {} of {} records; dropped variables {:?}; filled {} values",
                r.records_kept, r.records_loaded, r.redundancy.dropped_variables, r.completion.filled_values
            );
        }
        Command::Cluster(args) => {
            let r = pipeline::cluster(&config(&args)?)?;
            for c in &r.clusters {
                println!("cluster {}: {} cells", c.id, c.cells.len());
            }
        }
        Command::Mine(args) => {
            for m in pipeline::mine(&config(&args)?)? {
                println!("cluster {}: {} transactions, {} rules", m.cluster_id, m.db.n_all(), m.rules.len());
            }
        }
        Command::Extend(args) => {
            for (id, rules) in pipeline::extend(&config(&args)?)?.iter().enumerate() {
                let ext = rules.iter().filter(|r| !r.environment.is_empty()).count();
                println!("cluster {id}: {} rules ({ext} with environment)", rules.len());
            }
        }
        Command::Evaluate(args) => print_depths(&pipeline::evaluate(&config(&args)?)?),
        Command::Synth { spec, out } => {
            let run = || -> Result<(), Error> {
                let spec = SyntheticSpec::read(&spec)?;
                let syn = generate_synthetic(&spec)?;
                syn.write(&out)?;
                println!(
                    "{} records, {} planted rules written to {}",
                    syn.dataset.records.len(),
                    syn.truth.len(),
                    out.display()
                );
                Ok(())
            };
            run().map_err(|e| e.in_stage(Stage::Synth))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
