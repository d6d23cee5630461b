//! IPLoM: iterative partitioning.
//!
//! 1. Partition by token count.
//! 2. Split each partition on the varying position with the fewest distinct
//!    tokens.
//! 3. Split partitions that are not yet good enough (share of constant
//!    positions below `cluster_goodness`) by the relation between the tokens
//!    of two positions chosen by the most frequent cardinality. One-to-one
//!    pairs form their own partitions, one-to-many and many-to-one pairs are
//!    split on one side chosen by `lower_bound`/`upper_bound`, many-to-many
//!    pairs stay together.
//! 4. A position with a single surviving token stays literal, every other
//!    position becomes `<*>`.
//!
//! Partitions smaller than `partition_support_threshold` times the corpus
//! size are not split further.

use std::collections::{BTreeMap, BTreeSet};

use super::{Group, ParserError, TemplateMiner, WILDCARD};
use crate::ingest::LogRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct IplomParams {
    pub partition_support_threshold: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub cluster_goodness: f64,
}

impl Default for IplomParams {
    fn default() -> Self {
        Self { partition_support_threshold: 0.0, lower_bound: 0.25, upper_bound: 0.9, cluster_goodness: 0.35 }
    }
}

impl IplomParams {
    pub fn validate(&self) -> Result<(), ParserError> {
        let bad = |reason: String| Err(ParserError::InvalidParams { parser: "IPLoM", reason });
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(0.0..1.0).contains(&self.partition_support_threshold) {
            return bad(format!("partition_support_threshold must lie in [0,1), got {}", self.partition_support_threshold));
        }
        if !unit(self.lower_bound) || !unit(self.upper_bound) || self.lower_bound > self.upper_bound {
            return bad(format!(
                "need 0 <= lower_bound <= upper_bound <= 1, got {} and {}",
                self.lower_bound, self.upper_bound
            ));
        }
        if !unit(self.cluster_goodness) {
            return bad(format!("cluster_goodness must lie in [0,1], got {}", self.cluster_goodness));
        }
        Ok(())
    }
}

type Partition = Vec<usize>;

fn distinct_at<'a>(records: &'a [LogRecord], part: &[usize], pos: usize) -> BTreeSet<&'a str> {
    part.iter().map(|&i| records[i].tokens[pos].as_str()).collect()
}

fn cardinalities(records: &[LogRecord], part: &[usize]) -> Vec<usize> {
    let width = records[part[0]].tokens.len();
    (0..width).map(|p| distinct_at(records, part, p).len()).collect()
}

fn split_by<K: Ord>(part: Partition, key: impl Fn(usize) -> K) -> Vec<Partition> {
    let mut buckets: BTreeMap<K, Partition> = BTreeMap::new();
    for i in part {
        buckets.entry(key(i)).or_default().push(i);
    }
    let mut out: Vec<Partition> = buckets.into_values().collect();
    out.sort_by_key(|p| p[0]);
    out
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum SplitKey<'a> {
    First(&'a str),
    Second(&'a str),
    ManyToMany,
}

impl IplomParams {
    fn too_small(&self, part: &[usize], total: usize) -> bool {
        (part.len() as f64) < self.partition_support_threshold * total as f64
    }

    fn step_position(&self, records: &[LogRecord], part: Partition, total: usize) -> Vec<Partition> {
        if part.len() < 2 || self.too_small(&part, total) {
            return vec![part];
        }
        let cards = cardinalities(records, &part);
        let Some(pos) = (0..cards.len()).filter(|&p| cards[p] > 1).min_by_key(|&p| (cards[p], p)) else {
            return vec![part];
        };
        split_by(part, |i| records[i].tokens[pos].clone())
    }

    /// `true` selects the one-to-many "one" side for splitting.
    fn split_on_one_side(&self, many_distinct: usize, lines: usize) -> bool {
        let ratio = many_distinct as f64 / lines.max(1) as f64;
        if ratio <= self.lower_bound {
            false
        } else {
            // at or above upper_bound, and in between, the many side is
            // treated as variable
            true
        }
    }

    fn step_bijection(&self, records: &[LogRecord], part: Partition, total: usize) -> Vec<Partition> {
        if part.len() < 2 || self.too_small(&part, total) {
            return vec![part];
        }
        let cards = cardinalities(records, &part);
        let constant = cards.iter().filter(|&&c| c == 1).count();
        if constant as f64 / cards.len() as f64 >= self.cluster_goodness {
            return vec![part];
        }
        let varying: Vec<usize> = (0..cards.len()).filter(|&p| cards[p] > 1).collect();
        if varying.len() < 2 {
            return vec![part];
        }
        let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
        for &p in &varying {
            *freq.entry(cards[p]).or_default() += 1;
        }
        let (mode_card, mode_freq) = freq.iter().max_by_key(|(c, f)| (**f, std::cmp::Reverse(**c))).map(|(c, f)| (*c, *f)).unwrap();
        let (p1, p2) = if mode_freq >= 2 {
            let mut it = varying.iter().copied().filter(|&p| cards[p] == mode_card);
            (it.next().unwrap(), it.next().unwrap())
        } else {
            let mut by_card = varying.clone();
            by_card.sort_by_key(|&p| (cards[p], p));
            let (a, b) = (by_card[0], by_card[1]);
            (a.min(b), a.max(b))
        };

        let mut forward: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut backward: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut lines_first: BTreeMap<&str, usize> = BTreeMap::new();
        let mut lines_second: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in &part {
            let (a, b) = (records[i].tokens[p1].as_str(), records[i].tokens[p2].as_str());
            forward.entry(a).or_default().insert(b);
            backward.entry(b).or_default().insert(a);
            *lines_first.entry(a).or_default() += 1;
            *lines_second.entry(b).or_default() += 1;
        }

        split_by(part, |i| {
            let (a, b) = (records[i].tokens[p1].as_str(), records[i].tokens[p2].as_str());
            let (fa, bb) = (forward[a].len(), backward[b].len());
            match (fa == 1, bb == 1) {
                (true, true) => SplitKey::First(a),
                // one value at p1 maps to many values at p2
                (false, true) => {
                    if self.split_on_one_side(fa, lines_first[a]) {
                        SplitKey::First(a)
                    } else {
                        SplitKey::Second(b)
                    }
                }
                // many values at p1 map to one value at p2
                (true, false) => {
                    if self.split_on_one_side(bb, lines_second[b]) {
                        SplitKey::Second(b)
                    } else {
                        SplitKey::First(a)
                    }
                }
                (false, false) => SplitKey::ManyToMany,
            }
        })
    }
}

fn template_of(records: &[LogRecord], part: &[usize]) -> Vec<String> {
    let width = records[part[0]].tokens.len();
    (0..width)
        .map(|p| {
            let first = &records[part[0]].tokens[p];
            if part.iter().all(|&i| &records[i].tokens[p] == first) {
                first.clone()
            } else {
                WILDCARD.to_string()
            }
        })
        .collect()
}

impl TemplateMiner for IplomParams {
    fn name(&self) -> &str {
        "IPLoM"
    }

    fn params(&self) -> String {
        format!(
            "partition_support_threshold={} lower_bound={} upper_bound={} cluster_goodness={}",
            self.partition_support_threshold, self.lower_bound, self.upper_bound, self.cluster_goodness
        )
    }

    fn mine(&self, records: &[LogRecord]) -> Vec<Group> {
        let total = records.len();
        let by_count = split_by((0..total).collect(), |i| records[i].tokens.len());
        by_count
            .into_iter()
            .flat_map(|p| self.step_position(records, p, total))
            .flat_map(|p| self.step_bijection(records, p, total))
            .map(|members| Group { tokens: template_of(records, &members), members })
            .collect()
    }
}
