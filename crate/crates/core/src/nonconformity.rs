//! Position-weighted token edit distance used as the nonconformity measure.
//!
//! A template is aligned to a record with unit-cost insert, delete and
//! replace operations; the wildcard `<*>` on the template side matches any
//! single record token for free. Each operation at record position `x`
//! (1-based) then contributes `1 / (1 + e^(x - v))`, so edits near the start
//! of a line weigh close to 1 and edits past the centre `v` fade out.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::parsers::{TemplateId, TemplateSet, WILDCARD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditKind {
    /// A record token with no counterpart in the template.
    Insert,
    /// A template token with no counterpart in the record.
    Delete,
    Replace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditOp {
    pub kind: EditKind,
    /// 1-based record index. For `Delete` this is the index the missing
    /// token would occupy in the record.
    pub position: usize,
}

/// Minimal list of edit operations turning a template into a record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
}

impl EditScript {
    pub fn n(&self) -> usize {
        self.ops.len()
    }
}

#[inline]
fn token_matches(template_token: &str, record_token: &str) -> bool {
    template_token == WILDCARD || template_token == record_token
}

/// Align `template` to `record` and return a minimal edit script.
///
/// The backtrace runs from the ends of both sequences and, among optimal
/// moves, prefers match, then replace, then delete, then insert. Operations
/// are returned in ascending record position.
pub fn edit_script<A: AsRef<str>, B: AsRef<str>>(template: &[A], record: &[B]) -> EditScript {
    let (m, n) = (template.len(), record.len());
    let width = n + 1;
    let mut dist = vec![0u32; (m + 1) * width];
    for (j, d) in dist[..width].iter_mut().enumerate() {
        *d = j as u32;
    }
    for i in 1..=m {
        dist[i * width] = i as u32;
        let t = template[i - 1].as_ref();
        for j in 1..=n {
            let diag = dist[(i - 1) * width + j - 1] + u32::from(!token_matches(t, record[j - 1].as_ref()));
            let up = dist[(i - 1) * width + j] + 1;
            let left = dist[i * width + j - 1] + 1;
            dist[i * width + j] = diag.min(up).min(left);
        }
    }

    let mut ops = Vec::with_capacity(dist[m * width + n] as usize);
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        if i > 0 && j > 0 {
            let diag = dist[(i - 1) * width + j - 1];
            if token_matches(template[i - 1].as_ref(), record[j - 1].as_ref()) && diag == here {
                i -= 1;
                j -= 1;
                continue;
            }
            if diag + 1 == here {
                ops.push(EditOp { kind: EditKind::Replace, position: j });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dist[(i - 1) * width + j] + 1 == here {
            ops.push(EditOp { kind: EditKind::Delete, position: j + 1 });
            i -= 1;
        } else {
            ops.push(EditOp { kind: EditKind::Insert, position: j });
            j -= 1;
        }
    }
    ops.reverse();
    EditScript { ops }
}

/// Centre of the positional sigmoid, in token units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreParams {
    v: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("sigmoid centre must be positive and finite, got {0}")]
    InvalidCentre(f64),
    #[error("template set is empty")]
    EmptyTemplateSet,
}

impl ScoreParams {
    pub fn new(v: f64) -> Result<Self, ScoreError> {
        if v.is_finite() && v > 0.0 {
            Ok(Self { v })
        } else {
            Err(ScoreError::InvalidCentre(v))
        }
    }

    /// The per-pair centre: the mean of the two sequence lengths.
    pub fn for_pair(template_len: usize, record_len: usize) -> Self {
        let v = (template_len + record_len) as f64 / 2.0;
        Self { v: if v > 0.0 { v } else { 0.5 } }
    }

    pub fn v(&self) -> f64 {
        self.v
    }
}

#[inline]
pub fn position_weight(position: usize, params: ScoreParams) -> f64 {
    1.0 / (1.0 + (position as f64 - params.v).exp())
}

/// Sum of the positional weights of a script.
pub fn script_score(script: &EditScript, params: ScoreParams) -> f64 {
    script.ops.iter().map(|op| position_weight(op.position, params)).sum()
}

/// Weighted edit distance between a template and a record.
pub fn weighted_score<A: AsRef<str>, B: AsRef<str>>(template: &[A], record: &[B], params: ScoreParams) -> f64 {
    script_score(&edit_script(template, record), params)
}

/// Weighted edit distance with the per-pair centre of [`ScoreParams::for_pair`].
pub fn pair_score<A: AsRef<str>, B: AsRef<str>>(template: &[A], record: &[B]) -> f64 {
    weighted_score(template, record, ScoreParams::for_pair(template.len(), record.len()))
}

/// Scores of one record against every template of a set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetScores {
    pub scores: BTreeMap<TemplateId, f64>,
    pub min_score: f64,
    pub argmin: TemplateId,
}

/// Score a record against each template of `ts` using the per-pair centre.
/// Ties for the minimum go to the smaller template id.
pub fn score_against_set<S: AsRef<str>>(ts: &TemplateSet, record: &[S]) -> Result<SetScores, ScoreError> {
    let mut scores = BTreeMap::new();
    let mut best: Option<(f64, &TemplateId)> = None;
    for t in ts.templates() {
        let s = pair_score(&t.tokens, record);
        scores.insert(t.template_id.clone(), s);
        match best {
            Some((b, id)) if s > b || (s == b && &t.template_id >= id) => {}
            _ => best = Some((s, &t.template_id)),
        }
    }
    let (min_score, argmin) = best.ok_or(ScoreError::EmptyTemplateSet)?;
    Ok(SetScores { min_score, argmin: argmin.clone(), scores })
}
