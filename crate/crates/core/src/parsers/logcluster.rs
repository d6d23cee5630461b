//! LogCluster: grouping by frequent words.
//!
//! A word is frequent when at least `min_support` records contain it. The
//! ordered list of frequent words of a record is its cluster key, and records
//! sharing a key form one cluster. Every gap between frequent words that is
//! non-empty in some member becomes a single `<*>`, so a template can be
//! shorter or longer than some of its members. Records without any frequent
//! word are grouped by their exact token sequence.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::{Group, ParserError, TemplateMiner, WILDCARD};
use crate::ingest::LogRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct LogClusterParams {
    /// Absolute number of records a word must occur in.
    pub min_support: usize,
}

impl Default for LogClusterParams {
    fn default() -> Self {
        Self { min_support: 10 }
    }
}

impl LogClusterParams {
    pub fn validate(&self) -> Result<(), ParserError> {
        if self.min_support >= 2 {
            Ok(())
        } else {
            Err(ParserError::InvalidParams {
                parser: "LogCluster",
                reason: format!("min_support must be at least 2, got {}", self.min_support),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Key {
    Frequent(Vec<String>),
    Verbatim(Vec<String>),
}

struct Cluster {
    words: Vec<String>,
    /// `gaps[k]` is set when some member has tokens before frequent word
    /// `k` (the last slot covers the tail).
    gaps: Vec<bool>,
    members: Vec<usize>,
}

impl TemplateMiner for LogClusterParams {
    fn name(&self) -> &str {
        "LogCluster"
    }

    fn params(&self) -> String {
        format!("min_support={}", self.min_support)
    }

    fn mine(&self, records: &[LogRecord]) -> Vec<Group> {
        let mut support: HashMap<&str, usize> = HashMap::new();
        for r in records {
            let distinct: HashSet<&str> = r.tokens.iter().map(String::as_str).collect();
            for w in distinct {
                *support.entry(w).or_default() += 1;
            }
        }
        let frequent = |w: &str| support.get(w).is_some_and(|&c| c >= self.min_support);

        let mut clusters: BTreeMap<Key, Cluster> = BTreeMap::new();
        for (idx, r) in records.iter().enumerate() {
            let mut words = Vec::new();
            let mut gaps = Vec::new();
            let mut run = 0usize;
            for t in &r.tokens {
                if frequent(t) {
                    gaps.push(run > 0);
                    words.push(t.clone());
                    run = 0;
                } else {
                    run += 1;
                }
            }
            gaps.push(run > 0);

            let key = if words.is_empty() {
                Key::Verbatim(r.tokens.clone())
            } else {
                Key::Frequent(words.clone())
            };
            let verbatim = matches!(key, Key::Verbatim(_));
            let entry = clusters.entry(key).or_insert_with(|| Cluster {
                words: if verbatim { r.tokens.clone() } else { words },
                gaps: if verbatim { vec![false; r.tokens.len() + 1] } else { vec![false; gaps.len()] },
                members: Vec::new(),
            });
            if !verbatim {
                for (slot, g) in entry.gaps.iter_mut().zip(&gaps) {
                    *slot |= *g;
                }
            }
            entry.members.push(idx);
        }

        clusters
            .into_values()
            .map(|c| {
                let mut tokens = Vec::with_capacity(c.words.len() * 2 + 1);
                for (k, w) in c.words.into_iter().enumerate() {
                    if c.gaps[k] {
                        tokens.push(WILDCARD.to_string());
                    }
                    tokens.push(w);
                }
                if c.gaps.last() == Some(&true) {
                    tokens.push(WILDCARD.to_string());
                }
                Group { tokens, members: c.members }
            })
            .collect()
    }
}
