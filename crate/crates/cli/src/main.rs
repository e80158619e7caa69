use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use logparse_core::ingest::IngestError;
use logparse_core::output::{read_assignment, write_assignment, write_breakdown, write_templates};
use logparse_core::synth::{generate, SynthConfig};
use logparse_core::{
    evaluate, load_ground_truth, load_logs, parse_all, Backend, BackendKind, HttpBackend,
    NoisyBackend, OracleBackend, ParseAssignment, ParseError, Report, ShardIndex, Template,
};

mod config;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "logparse", version, about = "Extract log templates with a language model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a log file into templates
    Parse(Box<ParseArgs>),
    /// Score a parse result against ground truth
    Evaluate(EvaluateArgs),
    /// Write a synthetic corpus with known templates
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    /// Log file to parse
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,

    /// Input format: plain or structured-csv [default: plain]
    #[arg(long, value_name = "FORMAT")]
    pub format: Option<String>,

    /// Output directory [default: logparse-out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// JSON file with default values for any of these options
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Frequent tokens per sharding signature [default: 3]
    #[arg(long)]
    pub k: Option<usize>,

    /// Clusters above this size stop merging [default: 100]
    #[arg(long, value_name = "N")]
    pub min_bucket: Option<usize>,

    /// Logs per contrastive unit [default: 3]
    #[arg(long, value_name = "M")]
    pub lcu_size: Option<usize>,

    /// Minimum Jaccard similarity to the anchor [default: 0.33]
    #[arg(long, value_name = "S")]
    pub min_sim: Option<f64>,

    /// Weight of variability against commonality [default: 0.7]
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Worker threads [default: 8]
    #[arg(long)]
    pub workers: Option<usize>,

    /// Seed for anchor sampling [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Model backend: mock or http [default: mock]
    #[arg(long)]
    pub backend: Option<String>,

    /// Chat completions URL for the http backend
    #[arg(long, env = "LUNAR_ENDPOINT", value_name = "URL")]
    pub endpoint: Option<String>,

    /// Model name sent to the http backend [default: gpt-3.5-turbo]
    #[arg(long, env = "LUNAR_MODEL")]
    pub model: Option<String>,

    /// Sampling temperature [default: 0]
    #[arg(long)]
    pub temperature: Option<f64>,

    /// Retries after a transient http failure [default: 3]
    #[arg(long)]
    pub max_retries: Option<u32>,

    /// Per-request timeout in seconds [default: 60]
    #[arg(long, value_name = "SECS")]
    pub timeout: Option<u64>,

    /// Bearer token for the http backend
    #[arg(long, env = "LUNAR_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,

    /// Ground-truth CSV the mock backend answers from
    #[arg(long, value_name = "PATH")]
    pub mock_oracle: Option<PathBuf>,

    /// Fraction of mock responses replaced by unparseable text
    #[arg(long, value_name = "RATE", default_value_t = 0.0)]
    pub mock_noise: f64,

    /// JSON array of {"value", "type"} parameter examples for the prompt
    #[arg(long, value_name = "PATH")]
    pub param_examples: Option<PathBuf>,

    /// Also write the bucket layout to buckets.tsv
    #[arg(long)]
    pub dump_buckets: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Predicted assignments (assignments.csv from `parse`)
    #[arg(long, value_name = "PATH")]
    pred: PathBuf,

    /// Ground truth with an EventTemplate column
    #[arg(long, value_name = "PATH")]
    truth: PathBuf,

    /// Directory for report.txt, report.json and breakdown.csv
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Number of distinct templates
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    templates: u32,

    /// Logs generated per template
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    logs_per_template: u32,

    #[arg(long, default_value_t = 7)]
    seed: u64,

    /// Shortest template, in tokens
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(2..))]
    min_tokens: u32,

    /// Longest template, in tokens
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(2..))]
    max_tokens: u32,

    /// Directory for logs.txt and truth.csv
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn ingest_error(e: IngestError) -> CliError {
    match e {
        IngestError::Io { .. } => CliError::Runtime(e.to_string()),
        IngestError::Format { .. } => CliError::Usage(e.to_string()),
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn make_backend(cfg: &RunConfig, args: &ParseArgs, logs: &logparse_core::LogSet) -> Result<Box<dyn Backend>, CliError> {
    match cfg.backend.kind {
        BackendKind::Http => {
            let http = HttpBackend::new(cfg.backend.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(Box::new(http))
        }
        BackendKind::Mock => {
            let path = args.mock_oracle.as_ref().ok_or_else(|| {
                CliError::Usage("the mock backend needs --mock-oracle <truth file>".into())
            })?;
            require_file(path, "oracle file")?;
            let truth = load_ground_truth(path).map_err(ingest_error)?;
            if !truth.covers(logs) {
                return Err(CliError::Usage(format!(
                    "oracle file {} does not cover all {} input lines",
                    path.display(),
                    logs.len()
                )));
            }
            if !(0.0..=1.0).contains(&args.mock_noise) {
                return Err(CliError::Usage("--mock-noise must be within [0, 1]".into()));
            }
            let oracle = OracleBackend::from_ground_truth(logs, &truth);
            if args.mock_noise > 0.0 {
                Ok(Box::new(NoisyBackend::new(oracle, args.mock_noise, 0)))
            } else {
                Ok(Box::new(oracle))
            }
        }
    }
}

fn cmd_parse(args: &ParseArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(args)?;
    require_file(&cfg.input, "input")?;
    let logs = load_logs(&cfg.input, cfg.format).map_err(ingest_error)?;
    let backend = make_backend(&cfg, args, &logs)?;
    std::fs::create_dir_all(&cfg.out).map_err(runtime)?;

    let start = Instant::now();
    let index = ShardIndex::build(&logs, cfg.parser.top_k, cfg.parser.min_bucket);
    let (groups, buckets) = (index.groups.len(), index.bucket_count());
    if args.dump_buckets {
        std::fs::write(cfg.out.join("buckets.tsv"), index.dump()).map_err(runtime)?;
    }

    let out = match parse_all(index, &logs, &cfg.parser, backend.as_ref(), cfg.workers, cfg.seed) {
        Ok(out) => out,
        Err(ParseError::Group { source, partial }) => {
            let recovery = cfg.out.join("recovery.csv");
            let note = match write_assignment(&recovery, &partial.assignment) {
                Ok(()) => format!(
                    "{} of {} lines parsed before the failure were written to {}",
                    partial.assignment.len(),
                    logs.len(),
                    recovery.display()
                ),
                Err(e) => format!("could not write recovery file: {e}"),
            };
            return Err(CliError::Runtime(format!("{source}\n{note}")));
        }
        Err(e) => return Err(runtime(e)),
    };
    let elapsed = start.elapsed();

    write_assignment(&cfg.out.join("assignments.csv"), &out.assignment).map_err(runtime)?;
    write_templates(&cfg.out.join("templates.csv"), &out.store).map_err(runtime)?;

    println!("lines:               {}", logs.len());
    println!("length groups:       {groups}");
    println!("buckets:             {buckets}");
    println!("templates:           {}", out.store.len());
    println!("iterations:          {}", out.stats.iterations);
    println!("backend calls:       {}", out.stats.backend_calls);
    println!("extraction failures: {}", out.stats.extraction_failures);
    println!("fallbacks:           {}", out.stats.fallbacks);
    println!("wall time:           {:.3}s", elapsed.as_secs_f64());
    println!("output:              {}", cfg.out.display());
    Ok(())
}

/// Reads either an assignments file or a ground-truth style file. In the
/// latter case lines with the same template text share an id.
fn load_prediction(path: &Path) -> Result<ParseAssignment, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(runtime)?;
    let headers = reader.headers().map_err(|e| CliError::Usage(e.to_string()))?;
    if headers.iter().any(|h| h == "template_id") {
        return read_assignment(path).map_err(|e| CliError::Usage(e.to_string()));
    }
    let truth = load_ground_truth(path).map_err(ingest_error)?;
    let mut ids: Vec<(String, Arc<Template>)> = Vec::new();
    let mut out = ParseAssignment::default();
    for (line, text) in truth.iter() {
        let id = match ids.iter().position(|(t, _)| t == text) {
            Some(i) => i,
            None => {
                ids.push((text.to_owned(), Arc::new(Template::parse(text))));
                ids.len() - 1
            }
        };
        out.assign(line, id, ids[id].1.clone());
    }
    Ok(out)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    require_file(&args.pred, "prediction file")?;
    require_file(&args.truth, "truth file")?;
    let pred = load_prediction(&args.pred)?;
    let truth = load_ground_truth(&args.truth).map_err(ingest_error)?;
    let report: Report = evaluate(&pred, &truth).map_err(|e| CliError::Usage(e.to_string()))?;

    print!("{}", report.to_text());
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(runtime)?;
        std::fs::write(dir.join("report.txt"), report.to_text()).map_err(runtime)?;
        std::fs::write(dir.join("report.json"), report.to_json()).map_err(runtime)?;
        write_breakdown(&dir.join("breakdown.csv"), &report.rows).map_err(runtime)?;
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    if args.min_tokens > args.max_tokens {
        return Err(CliError::Usage("--min-tokens exceeds --max-tokens".into()));
    }
    let corpus = generate(&SynthConfig {
        templates: args.templates as usize,
        logs_per_template: args.logs_per_template as usize,
        seed: args.seed,
        min_tokens: args.min_tokens as usize,
        max_tokens: args.max_tokens as usize,
    });
    corpus.write_to(&args.out).map_err(runtime)?;
    println!("{} written to {}", corpus.summary(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Parse(a) => cmd_parse(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
