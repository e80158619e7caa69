//! Seeded synthetic corpus with known templates.
//!
//! Each template is a random word sequence with one to three parameter slots.
//! Slots are single tokens, so every log of a template has the template's
//! token count. The first token of every template is a distinct constant
//! word, which keeps a template from matching another template's logs.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::template::PLACEHOLDER;

const WORDS: &[&str] = &[
    "accepted", "allocated", "attempt", "block", "buffer", "cache", "channel", "checkpoint",
    "client", "closed", "commit", "completed", "connection", "container", "daemon", "delivered",
    "detected", "disk", "dropped", "elapsed", "engine", "event", "executor", "expired", "fetched",
    "flushed", "handler", "heartbeat", "index", "instance", "interrupt", "job", "kernel", "lease",
    "listener", "loaded", "lock", "manager", "mapped", "memory", "message", "migrated", "module",
    "mounted", "node", "opened", "packet", "partition", "peer", "pipeline", "process", "queue",
    "received", "recovered", "registered", "released", "replica", "request", "reset", "resolved",
    "restarted", "route", "scheduler", "segment", "sent", "service", "session", "shard", "socket",
    "started", "stopped", "storage", "stream", "succeeded", "task", "terminated", "thread", "timer",
    "token", "transaction", "updated", "upstream", "user", "volume", "worker", "written",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    pub templates: usize,
    pub logs_per_template: usize,
    pub seed: u64,
    /// Inclusive token-count range of generated templates.
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            templates: 10,
            logs_per_template: 100,
            seed: 7,
            min_tokens: 4,
            max_tokens: 12,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum ParamKind {
    Number,
    Hex,
    Path,
    Ip,
}

impl ParamKind {
    fn sample<R: Rng>(self, rng: &mut R) -> String {
        match self {
            ParamKind::Number => rng.gen_range(0..100_000u32).to_string(),
            ParamKind::Hex => format!("0x{:08x}", rng.gen::<u32>()),
            ParamKind::Path => format!(
                "/{}/{}/{}",
                ["var", "opt", "srv", "tmp", "data"][rng.gen_range(0..5)],
                ["log", "lib", "cache", "run", "spool"][rng.gen_range(0..5)],
                rng.gen_range(0..10_000u32)
            ),
            ParamKind::Ip => format!(
                "{}.{}.{}.{}",
                rng.gen_range(1..255u8),
                rng.gen::<u8>(),
                rng.gen::<u8>(),
                rng.gen_range(1..255u8)
            ),
        }
    }
}

#[derive(Debug, Clone)]
struct SynthTemplate {
    /// `None` marks a parameter slot.
    tokens: Vec<Option<String>>,
    kinds: Vec<ParamKind>,
}

impl SynthTemplate {
    fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.as_deref().unwrap_or(PLACEHOLDER))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn instance<R: Rng>(&self, rng: &mut R) -> String {
        let mut kinds = self.kinds.iter();
        self.tokens
            .iter()
            .map(|t| match t {
                Some(w) => w.clone(),
                None => kinds.next().unwrap().sample(rng),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub lines: Vec<String>,
    /// Oracle template of each line.
    pub truth: Vec<String>,
}

pub fn generate(cfg: &SynthConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let min_len = cfg.min_tokens.max(2);
    let max_len = cfg.max_tokens.max(min_len);

    let mut leads: Vec<&str> = WORDS.to_vec();
    leads.shuffle(&mut rng);

    let templates: Vec<SynthTemplate> = (0..cfg.templates)
        .map(|i| {
            let lead = match leads.get(i) {
                Some(w) => (*w).to_owned(),
                None => format!("{}_{}", leads[i % leads.len()], i / leads.len()),
            };
            let len = rng.gen_range(min_len..=max_len);
            let params = rng.gen_range(1..=3.min(len - 1));
            let mut slots: Vec<usize> = (1..len).collect();
            slots.shuffle(&mut rng);
            slots.truncate(params);

            let mut tokens = vec![Some(lead)];
            for pos in 1..len {
                if slots.contains(&pos) {
                    tokens.push(None);
                } else {
                    tokens.push(Some(WORDS[rng.gen_range(0..WORDS.len())].to_owned()));
                }
            }
            let kinds = (0..params)
                .map(|_| [ParamKind::Number, ParamKind::Hex, ParamKind::Path, ParamKind::Ip][rng.gen_range(0..4)])
                .collect();
            SynthTemplate { tokens, kinds }
        })
        .collect();

    let mut rows: Vec<(String, String)> = Vec::with_capacity(cfg.templates * cfg.logs_per_template);
    for t in &templates {
        let text = t.text();
        for _ in 0..cfg.logs_per_template {
            rows.push((t.instance(&mut rng), text.clone()));
        }
    }
    rows.shuffle(&mut rng);
    let (lines, truth) = rows.into_iter().unzip();
    SyntheticCorpus { lines, truth }
}

impl SyntheticCorpus {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn append(&mut self, other: SyntheticCorpus) {
        self.lines.extend(other.lines);
        self.truth.extend(other.truth);
    }

    /// Plain log text, one line per message.
    pub fn log_text(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    /// `LineId,Content,EventTemplate` with 0-based line ids.
    pub fn truth_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["LineId", "Content", "EventTemplate"]).unwrap();
        for (i, (l, t)) in self.lines.iter().zip(&self.truth).enumerate() {
            w.write_record([i.to_string().as_str(), l, t]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Writes `logs.txt` and `truth.csv` under `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("logs.txt"), self.log_text())?;
        std::fs::write(dir.join("truth.csv"), self.truth_csv())?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut distinct: Vec<&String> = self.truth.iter().collect();
        distinct.sort();
        distinct.dedup();
        let mut s = String::new();
        let _ = write!(s, "{} lines, {} templates", self.lines.len(), distinct.len());
        s
    }
}
