//! Spell: streaming grouping by longest common subsequence.
//!
//! Each record is compared with the groups of the same token count; the
//! group whose template literals share the longest common subsequence with
//! the record wins if that length reaches `lcs_threshold` times the record
//! length. The merged template keeps a literal only where the record agrees
//! with it at the same position, so every member matches its template
//! position by position. A merge that would leave no literal at all starts a
//! new group instead.

use std::collections::BTreeMap;

use super::{Group, ParserError, TemplateMiner, WILDCARD};
use crate::ingest::LogRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct SpellParams {
    pub lcs_threshold: f64,
}

impl Default for SpellParams {
    fn default() -> Self {
        Self { lcs_threshold: 0.5 }
    }
}

impl SpellParams {
    pub fn validate(&self) -> Result<(), ParserError> {
        if self.lcs_threshold > 0.0 && self.lcs_threshold < 1.0 {
            Ok(())
        } else {
            Err(ParserError::InvalidParams {
                parser: "Spell",
                reason: format!("lcs_threshold must lie in (0,1), got {}", self.lcs_threshold),
            })
        }
    }
}

/// Length of the longest common subsequence of the template's literals and
/// the record. Wildcards never take part.
pub fn lcs_len(template: &[String], record: &[String]) -> usize {
    let lits: Vec<&str> = template.iter().map(String::as_str).filter(|t| *t != WILDCARD).collect();
    let mut prev = vec![0usize; record.len() + 1];
    let mut cur = vec![0usize; record.len() + 1];
    for a in &lits {
        for (j, b) in record.iter().enumerate() {
            cur[j + 1] = if *a == b { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[record.len()]
}

fn merged(template: &[String], record: &[String]) -> Vec<String> {
    template
        .iter()
        .zip(record)
        .map(|(t, r)| if t == r { t.clone() } else { WILDCARD.to_string() })
        .collect()
}

impl TemplateMiner for SpellParams {
    fn name(&self) -> &str {
        "Spell"
    }

    fn params(&self) -> String {
        format!("lcs_threshold={}", self.lcs_threshold)
    }

    fn mine(&self, records: &[LogRecord]) -> Vec<Group> {
        let mut groups: Vec<Group> = Vec::new();
        let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();

        for (idx, rec) in records.iter().enumerate() {
            let tokens = &rec.tokens;
            let need = self.lcs_threshold * tokens.len() as f64;
            let candidates = by_len.entry(tokens.len()).or_default();

            let mut best: Option<(usize, usize)> = None;
            for &g in candidates.iter() {
                let l = lcs_len(&groups[g].tokens, tokens);
                if best.is_none_or(|(bl, _)| l > bl) {
                    best = Some((l, g));
                }
            }

            let joined = best.filter(|(l, _)| *l as f64 >= need).and_then(|(_, g)| {
                let next = merged(&groups[g].tokens, tokens);
                next.iter().any(|t| t != WILDCARD).then_some((g, next))
            });

            match joined {
                Some((g, next)) => {
                    groups[g].tokens = next;
                    groups[g].members.push(idx);
                }
                None => {
                    candidates.push(groups.len());
                    groups.push(Group { tokens: tokens.clone(), members: vec![idx] });
                }
            }
        }
        groups
    }
}
