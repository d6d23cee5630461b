//! Drain: online grouping through a fixed-depth prefix tree.
//!
//! The first tree level is keyed by token count and the following
//! `depth - 3` levels by the leading tokens (tokens containing a digit are
//! routed through a `<*>` child). Leaves hold groups; a record joins the most
//! similar group of its leaf when the share of positions agreeing with the
//! group's literal tokens reaches `sim_threshold`. Positions that disagree
//! become wildcards.

use std::collections::BTreeMap;

use super::{Group, ParserError, TemplateMiner, WILDCARD};
use crate::ingest::LogRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct DrainParams {
    /// Tree depth counting the root, the length level and the leaf level.
    pub depth: usize,
    pub sim_threshold: f64,
    pub max_children: usize,
}

impl Default for DrainParams {
    fn default() -> Self {
        Self { depth: 4, sim_threshold: 0.5, max_children: 100 }
    }
}

impl DrainParams {
    pub fn validate(&self) -> Result<(), ParserError> {
        let bad = |reason: String| Err(ParserError::InvalidParams { parser: "Drain", reason });
        if self.depth < 3 {
            return bad(format!("depth must be at least 3, got {}", self.depth));
        }
        if !(self.sim_threshold > 0.0 && self.sim_threshold < 1.0) {
            return bad(format!("sim_threshold must lie in (0,1), got {}", self.sim_threshold));
        }
        if self.max_children == 0 {
            return bad("max_children must be positive".into());
        }
        Ok(())
    }

    fn token_levels(&self) -> usize {
        self.depth - 3
    }
}

#[derive(Debug, Default)]
struct Node {
    children: BTreeMap<String, Node>,
    groups: Vec<usize>,
}

fn has_digit(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
}

/// Fraction of positions where the template's literal equals the record
/// token, plus the number of wildcards for tie-breaking.
fn similarity(template: &[String], record: &[String]) -> (f64, usize) {
    let mut same = 0;
    let mut wild = 0;
    for (t, r) in template.iter().zip(record) {
        if t == WILDCARD {
            wild += 1;
        } else if t == r {
            same += 1;
        }
    }
    (same as f64 / template.len() as f64, wild)
}

impl DrainParams {
    fn descend<'a>(&self, mut node: &'a Node, tokens: &[String]) -> Option<&'a Node> {
        for token in tokens.iter().take(self.token_levels()) {
            let key = if has_digit(token) { WILDCARD } else { token.as_str() };
            node = node.children.get(key).or_else(|| node.children.get(WILDCARD))?;
        }
        Some(node)
    }

    fn insert_path<'a>(&self, mut node: &'a mut Node, tokens: &[String]) -> &'a mut Node {
        for token in tokens.iter().take(self.token_levels()) {
            let key: &str = if has_digit(token) {
                WILDCARD
            } else if node.children.contains_key(token.as_str()) {
                token
            } else if node.children.contains_key(WILDCARD) {
                if node.children.len() < self.max_children {
                    token
                } else {
                    WILDCARD
                }
            } else if node.children.len() + 1 < self.max_children {
                token
            } else {
                WILDCARD
            };
            node = node.children.entry(key.to_string()).or_default();
        }
        node
    }
}

impl TemplateMiner for DrainParams {
    fn name(&self) -> &str {
        "Drain"
    }

    fn params(&self) -> String {
        format!(
            "depth={} sim_threshold={} max_children={}",
            self.depth, self.sim_threshold, self.max_children
        )
    }

    fn mine(&self, records: &[LogRecord]) -> Vec<Group> {
        let mut by_len: BTreeMap<usize, Node> = BTreeMap::new();
        let mut groups: Vec<Group> = Vec::new();

        for (idx, rec) in records.iter().enumerate() {
            let tokens = &rec.tokens;
            let found = by_len.get(&tokens.len()).and_then(|root| self.descend(root, tokens)).and_then(|leaf| {
                let mut best: Option<(f64, usize, usize)> = None;
                for &g in &leaf.groups {
                    let (sim, wild) = similarity(&groups[g].tokens, tokens);
                    let better = match best {
                        None => true,
                        Some((bs, bw, _)) => sim > bs || (sim == bs && wild > bw),
                    };
                    if better {
                        best = Some((sim, wild, g));
                    }
                }
                best.filter(|(sim, _, _)| *sim >= self.sim_threshold).map(|(_, _, g)| g)
            });

            match found {
                Some(g) => {
                    let group = &mut groups[g];
                    for (t, r) in group.tokens.iter_mut().zip(tokens) {
                        if t != r {
                            *t = WILDCARD.to_string();
                        }
                    }
                    group.members.push(idx);
                }
                None => {
                    let g = groups.len();
                    groups.push(Group { tokens: tokens.clone(), members: vec![idx] });
                    let root = by_len.entry(tokens.len()).or_default();
                    self.insert_path(root, tokens).groups.push(g);
                }
            }
        }
        groups
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsers::{fit, tests::records, ParserParams};

    #[test]
    fn merges_similar_lines() {
        let recs = records(&["Load a.ini ok", "Load b.ini ok"]);
        let ts = fit(&ParserParams::Drain(DrainParams::default()), &recs).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts.templates()[0].tokens, ["Load", "<*>", "ok"]);
        assert_eq!(ts.templates()[0].support, 2);
        let ids: Vec<String> = ts.templates().iter().map(|t| t.template_id.to_string()).collect();
        assert_eq!(ids, ["T1"]);
    }

    #[test]
    fn length_and_prefix_separate_groups() {
        let recs = records(&[
            "Receive 10 bytes",
            "Send 12 bytes now",
            "Receive 11 bytes",
            "Send 3 bytes now",
            "Close conn 3",
        ]);
        let ts = fit(&ParserParams::Drain(DrainParams::default()), &recs).unwrap();
        let texts: Vec<String> = ts.templates().iter().map(|t| t.text()).collect();
        assert_eq!(texts, ["Receive <*> bytes", "Send <*> bytes now", "Close conn 3"]);
        assert_eq!(ts.assignment()[&3].as_str(), "T1");
    }

    #[test]
    fn below_threshold_starts_new_group() {
        let recs = records(&["a b c d", "a x y z"]);
        let ts = fit(&ParserParams::Drain(DrainParams::default()), &recs).unwrap();
        assert_eq!(ts.len(), 2);
    }

    #[test]
    fn digit_tokens_share_the_wildcard_branch() {
        let p = DrainParams { depth: 5, ..DrainParams::default() };
        let recs = records(&["job 17 started", "job 18 started"]);
        let ts = fit(&ParserParams::Drain(p), &recs).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts.templates()[0].tokens, ["job", "<*>", "started"]);
    }

    #[test]
    fn invalid_params() {
        for p in [
            DrainParams { depth: 2, ..Default::default() },
            DrainParams { sim_threshold: 1.0, ..Default::default() },
            DrainParams { sim_threshold: 0.0, ..Default::default() },
            DrainParams { max_children: 0, ..Default::default() },
        ] {
            assert!(p.validate().is_err());
        }
    }
}
