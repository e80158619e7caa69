//! Log contrastive unit (LCU) selection.
//!
//! Selection runs in two stages. Stratified generation picks a random anchor
//! from the bucket, drops companions that are too dissimilar or exact
//! duplicates, and samples a bounded pool from every similarity level. The
//! pool is then enumerated into candidate LCUs, each scored by a hybrid of
//! variability (mean pairwise Jaccard distance) and commonality (how evenly
//! the pairwise similarities are spread). The best candidate wins.

use std::collections::{BTreeMap, HashSet};

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{LogRecord, LogSet};
use crate::scalar::Score;
use crate::sharder::Bucket;

#[derive(Debug, Error, PartialEq)]
pub enum SelectorError {
    #[error("lambda must lie in [0, 1], got {0}")]
    Lambda(f64),
    #[error("minimum similarity must lie in [0, 1], got {0}")]
    MinSimilarity(f64),
    #[error("LCU size must be at least 1")]
    LcuSize,
    #[error("pool size per similarity level must be at least 1")]
    PoolPerLevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorConfig<S> {
    /// Number of logs in an LCU (`m`).
    pub lcu_size: usize,
    /// Companions below this Jaccard similarity to the anchor are dropped.
    pub min_similarity: S,
    /// Weight of variability in the hybrid score.
    pub lambda: S,
    pub pool_per_level: usize,
}

impl<S: Score> Default for SelectorConfig<S> {
    fn default() -> Self {
        SelectorConfig {
            lcu_size: 3,
            min_similarity: S::from_ratio(33, 100),
            lambda: S::from_ratio(7, 10),
            pool_per_level: 3,
        }
    }
}

impl<S: Score> SelectorConfig<S> {
    /// Sets the LCU size and keeps the per-level pool size equal to it.
    pub fn with_lcu_size(mut self, m: usize) -> Self {
        self.lcu_size = m;
        self.pool_per_level = m;
        self
    }

    pub fn validate(&self) -> Result<(), SelectorError> {
        check_unit(self.lambda).map_err(SelectorError::Lambda)?;
        check_unit(self.min_similarity).map_err(SelectorError::MinSimilarity)?;
        if self.lcu_size == 0 {
            return Err(SelectorError::LcuSize);
        }
        if self.pool_per_level == 0 {
            return Err(SelectorError::PoolPerLevel);
        }
        Ok(())
    }
}

fn check_unit<S: Score>(v: S) -> Result<(), f64> {
    if v >= S::zero() && v <= S::one() {
        Ok(())
    } else {
        Err(v.to_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSimilarity<S> {
    pub a: usize,
    pub b: usize,
    pub similarity: S,
}

/// Anchor first, then companions in pool order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLcu<S> {
    pub members: Vec<usize>,
    /// One entry per unordered member pair.
    pub pairwise: Vec<PairSimilarity<S>>,
    pub score: S,
}

impl<S: Score> CandidateLcu<S> {
    /// Builds a candidate and computes all pairwise similarities.
    pub fn from_records(records: &[&LogRecord]) -> Self {
        let mut pairwise = Vec::new();
        for i in 0..records.len() {
            for j in i + 1..records.len() {
                pairwise.push(PairSimilarity {
                    a: records[i].line_id,
                    b: records[j].line_id,
                    similarity: jaccard(records[i], records[j]),
                });
            }
        }
        CandidateLcu {
            members: records.iter().map(|r| r.line_id).collect(),
            pairwise,
            score: S::zero(),
        }
    }

    pub fn anchor(&self) -> usize {
        self.members[0]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn similarities(&self) -> impl Iterator<Item = S> + '_ {
        self.pairwise.iter().map(|p| p.similarity)
    }
}

fn distinct_tokens(r: &LogRecord) -> HashSet<&str> {
    r.tokens.iter().map(String::as_str).collect()
}

/// `(|A ∩ B|, |A ∪ B|)` over the distinct whitespace tokens.
pub fn jaccard_counts(a: &LogRecord, b: &LogRecord) -> (usize, usize) {
    let sa = distinct_tokens(a);
    let sb = distinct_tokens(b);
    let inter = sa.intersection(&sb).count();
    (inter, sa.len() + sb.len() - inter)
}

/// Jaccard similarity of the token sets. Two empty sets count as identical.
pub fn jaccard<S: Score>(a: &LogRecord, b: &LogRecord) -> S {
    match jaccard_counts(a, b) {
        (_, 0) => S::one(),
        (inter, union) => S::from_ratio(inter as u64, union as u64),
    }
}

/// Mean Jaccard distance over all member pairs; 0 below two members.
pub fn variability_score<S: Score>(c: &CandidateLcu<S>) -> S {
    if c.pairwise.is_empty() {
        return S::zero();
    }
    let total = c.similarities().fold(S::zero(), |acc, s| acc + (S::one() - s));
    total / S::from_count(c.pairwise.len())
}

/// Mean of `1 - |JS(p_i) - JS(p_j)|` over all pairs of member pairs; 1 when
/// there are fewer than two pairs.
pub fn commonality_score<S: Score>(c: &CandidateLcu<S>) -> S {
    let sims: Vec<S> = c.similarities().collect();
    let p = sims.len();
    if p < 2 {
        return S::one();
    }
    let mut total = S::zero();
    for i in 0..p {
        for j in i + 1..p {
            total = total + (S::one() - sims[i].abs_diff(sims[j]));
        }
    }
    total / S::from_count(p * (p - 1) / 2)
}

/// `lambda * variability + (1 - lambda) * commonality`, stored on the candidate.
pub fn hybrid_score<S: Score>(c: &mut CandidateLcu<S>, lambda: S) -> Result<S, SelectorError> {
    check_unit(lambda).map_err(SelectorError::Lambda)?;
    let score =
        lambda * variability_score(c) + (S::one() - lambda) * commonality_score(c);
    c.score = score;
    Ok(score)
}

/// Companions for `anchor`, sampled per similarity level.
///
/// Logs whose similarity to the anchor is below `min_similarity` or exactly
/// 1 are dropped. A level is one exact similarity value; up to
/// `pool_per_level` logs are drawn from each, highest level first.
pub fn stratified_pool<'a, S: Score, R: Rng>(
    anchor: &LogRecord,
    bucket: &Bucket,
    logs: &'a LogSet,
    cfg: &SelectorConfig<S>,
    rng: &mut R,
) -> Vec<&'a LogRecord> {
    let mut levels: BTreeMap<Ratio<u64>, Vec<&LogRecord>> = BTreeMap::new();
    for &id in &bucket.members {
        if id == anchor.line_id {
            continue;
        }
        let rec = &logs[id];
        let (inter, union) = jaccard_counts(anchor, rec);
        if union == 0 || inter == union {
            continue;
        }
        if S::from_ratio(inter as u64, union as u64) < cfg.min_similarity {
            continue;
        }
        levels
            .entry(Ratio::new(inter as u64, union as u64))
            .or_default()
            .push(rec);
    }

    let mut pool = Vec::new();
    for (_, level) in levels.into_iter().rev() {
        let mut picked: Vec<&LogRecord> = level
            .choose_multiple(rng, cfg.pool_per_level)
            .copied()
            .collect();
        picked.sort_by_key(|r| r.line_id);
        pool.extend(picked);
    }
    pool
}

/// One candidate per (m-1)-subset of the pool, anchor always first. A pool
/// smaller than m-1 yields the single candidate anchor + pool.
pub fn enumerate_candidates<S: Score>(
    anchor: &LogRecord,
    pool: &[&LogRecord],
    m: usize,
) -> Vec<CandidateLcu<S>> {
    let companions = m.saturating_sub(1);
    if pool.len() < companions || companions == 0 {
        let mut members = vec![anchor];
        if companions > 0 {
            members.extend_from_slice(pool);
        }
        return vec![CandidateLcu::from_records(&members)];
    }

    // similarities are computed once for the anchor and the pool
    let all: Vec<&LogRecord> = std::iter::once(anchor).chain(pool.iter().copied()).collect();
    let n = all.len();
    let mut sim = vec![S::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s = jaccard::<S>(all[i], all[j]);
            sim[i * n + j] = s;
            sim[j * n + i] = s;
        }
    }

    let mut out = Vec::new();
    for combo in Combinations::new(pool.len(), companions) {
        let idx: Vec<usize> = std::iter::once(0).chain(combo.iter().map(|c| c + 1)).collect();
        let mut pairwise = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
        for x in 0..idx.len() {
            for y in x + 1..idx.len() {
                pairwise.push(PairSimilarity {
                    a: all[idx[x]].line_id,
                    b: all[idx[y]].line_id,
                    similarity: sim[idx[x] * n + idx[y]],
                });
            }
        }
        out.push(CandidateLcu {
            members: idx.iter().map(|&i| all[i].line_id).collect(),
            pairwise,
            score: S::zero(),
        });
    }
    out
}

/// Picks the highest-scoring LCU from a bucket. Ties go to the
/// lexicographically smallest member list.
pub fn select_lcu<S: Score>(
    bucket: &Bucket,
    logs: &LogSet,
    cfg: &SelectorConfig<S>,
    seed: u64,
) -> Result<CandidateLcu<S>, SelectorError> {
    cfg.validate()?;
    assert!(!bucket.is_empty(), "select_lcu on an empty bucket");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = &logs[bucket.members[rng.gen_range(0..bucket.len())]];
    let pool = stratified_pool(anchor, bucket, logs, cfg, &mut rng);
    let candidates = enumerate_candidates::<S>(anchor, &pool, cfg.lcu_size);
    best_candidate(candidates, cfg.lambda)
}

/// Scores every candidate and returns the argmax.
pub fn best_candidate<S: Score>(
    candidates: Vec<CandidateLcu<S>>,
    lambda: S,
) -> Result<CandidateLcu<S>, SelectorError> {
    let mut best: Option<CandidateLcu<S>> = None;
    for mut c in candidates {
        hybrid_score(&mut c, lambda)?;
        let better = match &best {
            None => true,
            Some(b) => c.score > b.score || (c.score == b.score && c.members < b.members),
        };
        if better {
            best = Some(c);
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Lexicographic k-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
