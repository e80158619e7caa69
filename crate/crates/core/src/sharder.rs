//! Two-level sharding: logs are grouped by token count, then each length
//! group is split into buckets by bottom-up clustering on top-k token
//! signatures.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::ingest::{LogRecord, LogSet};

/// Top-k tokens of one log, most frequent first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TokenSignature(pub Vec<String>);

impl TokenSignature {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prefix(&self, len: usize) -> TokenSignature {
        TokenSignature(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn starts_with(&self, prefix: &TokenSignature) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl fmt::Display for TokenSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.join(", "))
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSignature {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSignature(iter.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bucket {
    pub signature: TokenSignature,
    /// Sorted ascending.
    pub members: Vec<usize>,
}

impl Bucket {
    pub fn new(signature: TokenSignature, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        Bucket { signature, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthGroup {
    pub token_count: usize,
    pub buckets: Vec<Bucket>,
}

impl LengthGroup {
    pub fn len(&self) -> usize {
        self.buckets.iter().map(Bucket::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.iter().all(Bucket::is_empty)
    }

    pub fn member_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.buckets.iter().flat_map(|b| b.members.iter().copied())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShardIndex {
    pub groups: BTreeMap<usize, LengthGroup>,
}

impl ShardIndex {
    /// Length sharding followed by clustering of every group.
    pub fn build(logs: &LogSet, k: usize, max_bucket: usize) -> Self {
        let mut index = shard_by_length(logs);
        for group in index.groups.values_mut() {
            group.buckets = agglomerative_cluster(group, logs, k, max_bucket);
        }
        index
    }

    /// Number of logs across all groups.
    pub fn log_count(&self) -> usize {
        self.groups.values().map(LengthGroup::len).sum()
    }

    pub fn bucket_count(&self) -> usize {
        self.groups.values().map(|g| g.buckets.len()).sum()
    }

    /// One line per bucket: token count, signature prefix, member count.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for group in self.groups.values() {
            for b in &group.buckets {
                out.push_str(&format!(
                    "{}\t{}\t{}\n",
                    group.token_count,
                    b.signature.0.join(" "),
                    b.len()
                ));
            }
        }
        out
    }
}

/// Groups records by token count. Each group holds one unsplit bucket.
pub fn shard_by_length(logs: &LogSet) -> ShardIndex {
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for rec in logs {
        by_len.entry(rec.token_count()).or_default().push(rec.line_id);
    }
    let groups = by_len
        .into_iter()
        .map(|(token_count, ids)| {
            (
                token_count,
                LengthGroup {
                    token_count,
                    buckets: vec![Bucket::new(TokenSignature::default(), ids)],
                },
            )
        })
        .collect();
    ShardIndex { groups }
}

/// Per-group document frequency: each log counts a token once.
pub fn token_frequencies<'a, I>(records: I) -> HashMap<&'a str, usize>
where
    I: IntoIterator<Item = &'a LogRecord>,
{
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for rec in records {
        for (pos, tok) in rec.tokens.iter().enumerate() {
            if first_occurrence(&rec.tokens, pos) {
                *freq.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
    }
    freq
}

fn first_occurrence(tokens: &[String], pos: usize) -> bool {
    !tokens[..pos].contains(&tokens[pos])
}

/// The `k` most frequent distinct tokens of `record`, ties broken by the
/// position of their first occurrence.
pub fn top_k_signature(record: &LogRecord, freq: &HashMap<&str, usize>, k: usize) -> TokenSignature {
    let mut ranked: Vec<(usize, usize, &str)> = record
        .tokens
        .iter()
        .enumerate()
        .filter(|(pos, _)| first_occurrence(&record.tokens, *pos))
        .map(|(pos, tok)| (freq.get(tok.as_str()).copied().unwrap_or(0), pos, tok.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(k).map(|(_, _, t)| t).collect()
}

/// A merge performed during clustering, reported to observers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeEvent {
    pub prefix: TokenSignature,
    /// Sizes of the clusters that were merged.
    pub child_sizes: Vec<usize>,
}

/// Splits a length group into buckets.
pub fn agglomerative_cluster(
    group: &LengthGroup,
    logs: &LogSet,
    k: usize,
    max_bucket: usize,
) -> Vec<Bucket> {
    let records: Vec<&LogRecord> = group.member_ids().map(|id| &logs[id]).collect();
    let freq = token_frequencies(records.iter().copied());
    let mut initial: BTreeMap<TokenSignature, Vec<usize>> = BTreeMap::new();
    for rec in &records {
        initial
            .entry(top_k_signature(rec, &freq, k))
            .or_default()
            .push(rec.line_id);
    }
    let clusters = initial
        .into_iter()
        .map(|(sig, ids)| Bucket::new(sig, ids))
        .collect();
    merge_clusters(clusters, max_bucket, |_| {})
}

/// Bottom-up merging of signature clusters.
///
/// Each round freezes clusters holding more than `max_bucket` logs, then
/// merges the remaining clusters that share a signature prefix one token
/// shorter than the previous round. Rounds run from prefix length `k - 1`
/// down to 1; whatever is left afterwards becomes a bucket as is.
pub fn merge_clusters<F>(clusters: Vec<Bucket>, max_bucket: usize, mut on_merge: F) -> Vec<Bucket>
where
    F: FnMut(&MergeEvent),
{
    let longest = clusters.iter().map(|c| c.signature.len()).max().unwrap_or(0);
    let mut frozen: Vec<Bucket> = Vec::new();
    let mut active = clusters;

    for prefix_len in (1..longest).rev() {
        let (big, small): (Vec<Bucket>, Vec<Bucket>) =
            active.into_iter().partition(|c| c.len() > max_bucket);
        frozen.extend(big);
        if small.is_empty() {
            active = small;
            break;
        }

        let mut by_prefix: BTreeMap<TokenSignature, Vec<Bucket>> = BTreeMap::new();
        let mut untouched = Vec::new();
        for c in small {
            if c.signature.len() > prefix_len {
                by_prefix.entry(c.signature.prefix(prefix_len)).or_default().push(c);
            } else {
                untouched.push(c);
            }
        }

        active = untouched;
        for (prefix, mut siblings) in by_prefix {
            if siblings.len() == 1 {
                active.push(siblings.pop().unwrap());
                continue;
            }
            on_merge(&MergeEvent {
                prefix: prefix.clone(),
                child_sizes: siblings.iter().map(Bucket::len).collect(),
            });
            let members = siblings.into_iter().flat_map(|c| c.members).collect();
            active.push(Bucket::new(prefix, members));
        }
    }

    frozen.extend(active);
    frozen.sort_by(|a, b| {
        a.signature
            .cmp(&b.signature)
            .then_with(|| a.members.cmp(&b.members))
    });
    frozen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(tokens: &[&str]) -> TokenSignature {
        tokens.iter().copied().collect()
    }

    fn cluster(tokens: &[&str], start: usize, size: usize) -> Bucket {
        Bucket::new(sig(tokens), (start..start + size).collect())
    }

    #[test]
    fn shard_by_length_groups_counts() {
        let logs = LogSet::from_lines(["a b c d e", "a b c d f", "x y z"]);
        let idx = shard_by_length(&logs);
        assert_eq!(idx.groups.len(), 2);
        assert_eq!(idx.groups[&5].len(), 2);
        assert_eq!(idx.groups[&3].len(), 1);

        let one = shard_by_length(&LogSet::from_lines(["only one"]));
        assert_eq!(one.groups.len(), 1);
        assert_eq!(one.log_count(), 1);

        assert!(shard_by_length(&LogSet::default()).groups.is_empty());
    }

    #[test]
    fn signature_breaks_ties_by_position() {
        let logs = LogSet::from_lines([
            "session opened for user news",
            "session opened for user test",
        ]);
        let freq = token_frequencies(logs.iter());
        assert_eq!(
            top_k_signature(&logs[0], &freq, 3),
            sig(&["session", "opened", "for"])
        );
        assert_eq!(top_k_signature(&logs[0], &freq, 1), sig(&["session"]));
    }

    #[test]
    fn signature_ranks_frequency_first() {
        let logs = LogSet::from_lines(["x b", "y b", "z b"]);
        let freq = token_frequencies(logs.iter());
        // `b` appears in all three logs, so it leads despite its position
        assert_eq!(top_k_signature(&logs[0], &freq, 3), sig(&["b", "x"]));
    }

    #[test]
    fn repeated_tokens_count_once() {
        let logs = LogSet::from_lines(["a a b", "c d b"]);
        let freq = token_frequencies(logs.iter());
        assert_eq!(freq["a"], 1);
        assert_eq!(freq["b"], 2);
        assert_eq!(top_k_signature(&logs[0], &freq, 3), sig(&["b", "a"]));
    }

    #[test]
    fn sibling_clusters_merge_into_parent() {
        let out = merge_clusters(
            vec![cluster(&["a", "b", "c"], 0, 10), cluster(&["a", "b", "d"], 10, 10)],
            100,
            |_| {},
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].signature, sig(&["a", "b"]));
        assert_eq!(out[0].len(), 20);
    }

    #[test]
    fn big_cluster_is_frozen() {
        let out = merge_clusters(vec![cluster(&["a", "b", "c"], 0, 150)], 100, |_| {});
        assert_eq!(out, vec![cluster(&["a", "b", "c"], 0, 150)]);
    }

    #[test]
    fn frozen_cluster_does_not_absorb_small_sibling() {
        let mut events = Vec::new();
        let out = merge_clusters(
            vec![cluster(&["a", "b", "c"], 0, 150), cluster(&["a", "b", "d"], 150, 5)],
            100,
            |e| events.push(e.clone()),
        );
        assert!(events.is_empty());
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].signature, sig(&["a", "b", "c"]));
        assert_eq!(out[1].signature, sig(&["a", "b", "d"]));
    }

    #[test]
    fn merging_continues_to_shorter_prefixes() {
        let out = merge_clusters(
            vec![
                cluster(&["a", "b", "c"], 0, 2),
                cluster(&["a", "x", "y"], 2, 2),
                cluster(&["q", "r", "s"], 4, 2),
            ],
            100,
            |_| {},
        );
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].signature, sig(&["a"]));
        assert_eq!(out[0].members, vec![0, 1, 2, 3]);
        assert_eq!(out[1].signature, sig(&["q", "r", "s"]));
    }

    #[test]
    fn merged_cluster_over_limit_freezes_next_round() {
        let out = merge_clusters(
            vec![
                cluster(&["a", "b", "c"], 0, 60),
                cluster(&["a", "b", "d"], 60, 60),
                cluster(&["a", "e", "f"], 120, 5),
            ],
            100,
            |_| {},
        );
        // [a,b] reaches 120 and freezes, so [a,e,f] stays on its own
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].signature, sig(&["a", "b"]));
        assert_eq!(out[1].signature, sig(&["a", "e", "f"]));
    }

    #[test]
    fn build_partitions_small_corpus() {
        let logs = LogSet::from_lines([
            "session opened for user news",
            "session opened for user test",
            "session closed for user news",
            "disk full",
        ]);
        let idx = ShardIndex::build(&logs, 3, 100);
        assert_eq!(idx.log_count(), 4);
        let mut ids: Vec<usize> = idx.groups.values().flat_map(|g| g.member_ids()).collect();
        ids.sort();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        let dump = idx.dump();
        assert_eq!(dump.lines().count(), idx.bucket_count());
    }
}
