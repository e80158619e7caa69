//! The parse loop.
//!
//! Length groups are independent units of work. Inside a group the loop
//! repeatedly takes the largest bucket, selects an LCU, asks the backend for
//! templates, and consumes every log of the group that matches the result.
//! Groups are spread across a worker pool and merged in token-count order,
//! so the outcome does not depend on the number of workers.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::backend::{
    aggregate_and_normalize, build_prompt, extract_templates, Backend, BackendError,
    ParameterExample,
};
use crate::ingest::LogSet;
use crate::scalar::Score;
use crate::selector::{select_lcu, SelectorConfig, SelectorError};
use crate::sharder::{Bucket, LengthGroup, ShardIndex};
use crate::template::Template;

pub type TemplateId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct ParserConfig<S> {
    /// Signature length used by the sharder.
    pub top_k: usize,
    /// Clusters above this many logs are frozen as buckets.
    pub min_bucket: usize,
    pub selector: SelectorConfig<S>,
    pub parameter_examples: Vec<ParameterExample>,
}

impl<S: Score> Default for ParserConfig<S> {
    fn default() -> Self {
        ParserConfig {
            top_k: 3,
            min_bucket: 100,
            selector: SelectorConfig::default(),
            parameter_examples: crate::backend::default_parameter_examples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredTemplate {
    pub id: TemplateId,
    pub template: Arc<Template>,
    pub matched: usize,
}

/// Distinct templates with stable ids in registration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateStore {
    entries: Vec<StoredTemplate>,
    index: HashMap<Arc<Template>, TemplateId>,
}

impl TemplateStore {
    /// Returns the id of `template`, registering it if new.
    pub fn register(&mut self, template: Template) -> TemplateId {
        if let Some(&id) = self.index.get(&template) {
            return id;
        }
        let id = self.entries.len();
        let template = Arc::new(template);
        self.index.insert(template.clone(), id);
        self.entries.push(StoredTemplate {
            id,
            template,
            matched: 0,
        });
        id
    }

    pub fn add_matches(&mut self, id: TemplateId, n: usize) {
        self.entries[id].matched += n;
    }

    pub fn get(&self, id: TemplateId) -> Option<&StoredTemplate> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, StoredTemplate> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assigned {
    pub template_id: TemplateId,
    pub template: Arc<Template>,
}

/// Final template per line id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseAssignment {
    entries: BTreeMap<usize, Assigned>,
}

impl ParseAssignment {
    /// Panics if `line_id` is already assigned.
    pub fn assign(&mut self, line_id: usize, template_id: TemplateId, template: Arc<Template>) {
        let prev = self.entries.insert(
            line_id,
            Assigned {
                template_id,
                template,
            },
        );
        assert!(prev.is_none(), "line {line_id} assigned twice");
    }

    pub fn get(&self, line_id: usize) -> Option<&Assigned> {
        self.entries.get(&line_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Assigned)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn line_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub iterations: usize,
    pub backend_calls: usize,
    /// Responses without any extractable template.
    pub extraction_failures: usize,
    /// Iterations that fell back to the anchor's verbatim text.
    pub fallbacks: usize,
}

impl ParseStats {
    fn absorb(&mut self, other: &ParseStats) {
        self.iterations += other.iterations;
        self.backend_calls += other.backend_calls;
        self.extraction_failures += other.extraction_failures;
        self.fallbacks += other.fallbacks;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseOutput {
    pub assignment: ParseAssignment,
    pub store: TemplateStore,
    pub stats: ParseStats,
}

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("backend failure in length group {token_count}: {source}")]
    Backend {
        token_count: usize,
        #[source]
        source: BackendError,
    },
    #[error("invalid selector configuration: {0}")]
    Config(#[from] SelectorError),
    #[error("length group {0} cancelled after another group failed")]
    Cancelled(usize),
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("worker count must be at least 1")]
    Workers,
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error("{source}")]
    Group {
        #[source]
        source: GroupError,
        /// Everything parsed before the run was aborted.
        partial: Box<ParseOutput>,
    },
}

/// Result of one length group before ids are made global.
#[derive(Debug, Clone, Default)]
pub struct GroupOutcome {
    pub token_count: usize,
    pub store: TemplateStore,
    pub assignment: ParseAssignment,
    pub stats: ParseStats,
}

/// Assigns `template` to every matching log of the group and drops them from
/// their buckets. Empty buckets are removed.
pub fn apply_template(
    template: &Template,
    group: &mut LengthGroup,
    logs: &LogSet,
    store: &mut TemplateStore,
    assign: &mut ParseAssignment,
) -> usize {
    let mut matched = Vec::new();
    for bucket in &mut group.buckets {
        bucket.members.retain(|&id| {
            let hit = template.matches(&logs[id]);
            if hit {
                matched.push(id);
            }
            !hit
        });
    }
    group.buckets.retain(|b| !b.is_empty());
    if matched.is_empty() {
        return 0;
    }
    let id = store.register(template.clone());
    let shared = store.get(id).unwrap().template.clone();
    store.add_matches(id, matched.len());
    for line_id in &matched {
        assign.assign(*line_id, id, shared.clone());
    }
    matched.len()
}

/// Mixes the run seed with group and iteration so every selection has its
/// own stream regardless of scheduling.
fn iteration_seed(seed: u64, token_count: usize, iteration: usize) -> u64 {
    let mut z = seed
        ^ (token_count as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (iteration as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn largest_bucket(group: &LengthGroup) -> &Bucket {
    group
        .buckets
        .iter()
        .max_by(|a, b| {
            a.len()
                .cmp(&b.len())
                .then_with(|| b.signature.cmp(&a.signature))
                .then_with(|| b.members.cmp(&a.members))
        })
        .expect("non-empty group")
}

/// Parses one length group until all of its logs carry a template.
pub fn parse_group<S: Score, B: Backend + ?Sized>(
    mut group: LengthGroup,
    logs: &LogSet,
    cfg: &ParserConfig<S>,
    backend: &B,
    seed: u64,
) -> Result<GroupOutcome, GroupError> {
    parse_group_cancellable(&mut group, logs, cfg, backend, seed, &AtomicBool::new(false))
}

fn parse_group_cancellable<S: Score, B: Backend + ?Sized>(
    group: &mut LengthGroup,
    logs: &LogSet,
    cfg: &ParserConfig<S>,
    backend: &B,
    seed: u64,
    cancel: &AtomicBool,
) -> Result<GroupOutcome, GroupError> {
    cfg.selector.validate()?;
    let token_count = group.token_count;
    let mut out = GroupOutcome {
        token_count,
        ..Default::default()
    };
    group.buckets.retain(|b| !b.is_empty());

    while !group.buckets.is_empty() {
        if cancel.load(Ordering::Relaxed) {
            return Err(GroupError::Cancelled(token_count));
        }
        let iteration = out.stats.iterations;
        out.stats.iterations += 1;

        let bucket = largest_bucket(group);
        let lcu = select_lcu(bucket, logs, &cfg.selector, iteration_seed(seed, token_count, iteration))?;
        let anchor = &logs[lcu.anchor()];
        let prompt = build_prompt(&lcu, logs, &cfg.parameter_examples);

        let mut template = None;
        for _ in 0..2 {
            out.stats.backend_calls += 1;
            let resp = backend.query(&prompt).map_err(|source| GroupError::Backend {
                token_count,
                source,
            })?;
            match extract_templates(&resp) {
                Ok(raw) => {
                    template = Some(aggregate_and_normalize(&raw));
                    break;
                }
                Err(_) => out.stats.extraction_failures += 1,
            }
        }

        let matched = match &template {
            Some(t) => apply_template(t, group, logs, &mut out.store, &mut out.assignment),
            None => 0,
        };
        if matched == 0 {
            out.stats.fallbacks += 1;
            let verbatim = Template::verbatim(anchor);
            let n = apply_template(&verbatim, group, logs, &mut out.store, &mut out.assignment);
            if out.assignment.get(anchor.line_id).is_none() {
                // cannot happen for well-formed records; keeps the loop live anyway
                remove_member(group, anchor.line_id);
                let id = out.store.register(verbatim);
                out.store.add_matches(id, 1);
                let shared = out.store.get(id).unwrap().template.clone();
                out.assignment.assign(anchor.line_id, id, shared);
            }
            debug_assert!(n >= 1);
        }
    }
    Ok(out)
}

fn remove_member(group: &mut LengthGroup, line_id: usize) {
    for b in &mut group.buckets {
        b.members.retain(|&id| id != line_id);
    }
    group.buckets.retain(|b| !b.is_empty());
}

/// Folds per-group results into global ids, in ascending token count.
fn merge_outcomes(outcomes: impl IntoIterator<Item = GroupOutcome>) -> ParseOutput {
    let mut out = ParseOutput::default();
    for g in outcomes {
        let remap: Vec<TemplateId> = g
            .store
            .iter()
            .map(|t| out.store.register((*t.template).clone()))
            .collect();
        for t in g.store.iter() {
            out.store.add_matches(remap[t.id], t.matched);
        }
        for (line_id, a) in g.assignment.iter() {
            let id = remap[a.template_id];
            let shared = out.store.get(id).unwrap().template.clone();
            out.assignment.assign(line_id, id, shared);
        }
        out.stats.absorb(&g.stats);
    }
    out
}

/// Parses every length group on a pool of `workers` threads.
///
/// A failing group stops the others at their next iteration; the error
/// carries everything that completed.
pub fn parse_all<S: Score, B: Backend + ?Sized>(
    index: ShardIndex,
    logs: &LogSet,
    cfg: &ParserConfig<S>,
    backend: &B,
    workers: usize,
    seed: u64,
) -> Result<ParseOutput, ParseError> {
    if workers == 0 {
        return Err(ParseError::Workers);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.min(index.groups.len().max(1)))
        .build()
        .map_err(|e| ParseError::Pool(e.to_string()))?;

    let cancel = AtomicBool::new(false);
    let mut groups: Vec<LengthGroup> = index.groups.into_values().collect();
    let results: Vec<Result<GroupOutcome, GroupError>> = pool.install(|| {
        groups
            .par_iter_mut()
            .with_max_len(1)
            .map(|g| {
                let r = parse_group_cancellable(g, logs, cfg, backend, seed, &cancel);
                if r.is_err() {
                    cancel.store(true, Ordering::Relaxed);
                }
                r
            })
            .collect()
    });

    let mut first_error = None;
    let mut done = Vec::new();
    for r in results {
        match r {
            Ok(o) => done.push(o),
            Err(GroupError::Cancelled(_)) => {}
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let merged = merge_outcomes(done);
    match first_error {
        None => Ok(merged),
        Some(source) => Err(ParseError::Group {
            source,
            partial: Box::new(merged),
        }),
    }
}
