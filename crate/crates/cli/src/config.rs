//! Run configuration: flags over environment over config file over defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use logparse_core::backend::{default_parameter_examples, load_parameter_examples};
use logparse_core::{BackendConfig, BackendKind, Config, LogFormat, Selector};
use serde::Deserialize;

use crate::{CliError, ParseArgs};

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MIN_BUCKET: usize = 100;
pub const DEFAULT_WORKERS: usize = 8;
pub const DEFAULT_OUT: &str = "logparse-out";

/// Keys accepted in a `--config` JSON file. All optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub format: Option<String>,
    pub out: Option<PathBuf>,
    pub k: Option<usize>,
    pub min_bucket: Option<usize>,
    pub lcu_size: Option<usize>,
    pub min_sim: Option<f64>,
    pub lambda: Option<f64>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub backend: Option<String>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_retries: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub param_examples: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug)]
pub struct RunConfig {
    pub input: PathBuf,
    pub format: LogFormat,
    pub out: PathBuf,
    pub workers: usize,
    pub seed: u64,
    pub parser: Config,
    pub backend: BackendConfig,
}

fn usage<T: std::fmt::Display>(what: &str) -> impl Fn(T) -> CliError + '_ {
    move |e| CliError::Usage(format!("{what}: {e}"))
}

impl RunConfig {
    pub fn resolve(args: &ParseArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };

        let format = match args.format.clone().or(file.format) {
            Some(f) => f.parse().map_err(usage("--format"))?,
            None => LogFormat::Plain,
        };
        let kind: BackendKind = match args.backend.clone().or(file.backend) {
            Some(b) => b.parse().map_err(usage("--backend"))?,
            None => BackendKind::Mock,
        };

        let defaults = Selector::default();
        let lcu_size = args.lcu_size.or(file.lcu_size).unwrap_or(defaults.lcu_size);
        let selector = Selector {
            lcu_size,
            min_similarity: args.min_sim.or(file.min_sim).unwrap_or(defaults.min_similarity),
            lambda: args.lambda.or(file.lambda).unwrap_or(defaults.lambda),
            pool_per_level: lcu_size,
        };
        selector.validate().map_err(usage("selector"))?;

        let top_k = args.k.or(file.k).unwrap_or(DEFAULT_K);
        if top_k == 0 {
            return Err(CliError::Usage("--k must be at least 1".into()));
        }
        let min_bucket = args.min_bucket.or(file.min_bucket).unwrap_or(DEFAULT_MIN_BUCKET);
        if min_bucket == 0 {
            return Err(CliError::Usage("--min-bucket must be at least 1".into()));
        }
        let workers = args.workers.or(file.workers).unwrap_or(DEFAULT_WORKERS);
        if workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }

        let parameter_examples = match args.param_examples.as_ref().or(file.param_examples.as_ref()) {
            Some(p) => load_parameter_examples(p).map_err(usage(&p.display().to_string()))?,
            None => default_parameter_examples(),
        };

        let base = BackendConfig::default();
        let temperature = args.temperature.or(file.temperature).unwrap_or(base.temperature);
        if !(0.0..=2.0).contains(&temperature) {
            return Err(CliError::Usage(format!("--temperature {temperature} outside [0, 2]")));
        }
        let backend = BackendConfig {
            kind,
            endpoint: args.endpoint.clone().or(file.endpoint),
            model_name: args.model.clone().or(file.model).unwrap_or(base.model_name),
            api_key: args.api_key.clone().filter(|k| !k.is_empty()),
            temperature,
            max_retries: args.max_retries.or(file.max_retries).unwrap_or(base.max_retries),
            timeout: args
                .timeout
                .or(file.timeout_secs)
                .map(Duration::from_secs)
                .unwrap_or(base.timeout),
            max_in_flight: workers,
            ..base
        };

        Ok(RunConfig {
            input: args.input.clone(),
            format,
            out: args.out.clone().or(file.out).unwrap_or_else(|| DEFAULT_OUT.into()),
            workers,
            seed: args.seed.or(file.seed).unwrap_or(0),
            parser: Config {
                top_k,
                min_bucket,
                selector,
                parameter_examples,
            },
            backend,
        })
    }
}
