//! Per-template calibration and conformal p-values.
//!
//! Calibration scores every training record against the full template set
//! and files the minimum score under the template it matched. The p-value of
//! a new record for template `t` is the share of `t`'s calibration scores
//! that are at least the record's score against `t`.

mod bundle;

pub use bundle::{BundleError, ModelBundle, BUNDLE_MAGIC, BUNDLE_VERSION};

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::ingest::LogRecord;
use crate::nonconformity::{pair_score, score_against_set, ScoreError};
use crate::parsers::{TemplateId, TemplateSet};

#[derive(Debug, Error, PartialEq)]
pub enum ConformalError {
    #[error("template set is empty")]
    EmptyTemplateSet,
    #[error("calibration corpus is empty")]
    EmptyCorpus,
    #[error("unknown template `{0}`")]
    UnknownTemplate(TemplateId),
    #[error("calibration scores must be finite and non-negative")]
    InvalidScore,
}

impl From<ScoreError> for ConformalError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::EmptyTemplateSet => Self::EmptyTemplateSet,
            ScoreError::InvalidCentre(_) => Self::InvalidScore,
        }
    }
}

/// Calibration scores of one parser, filed per template.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    template_set: TemplateSet,
    calib: BTreeMap<TemplateId, Vec<f64>>,
    total: usize,
}

/// Score and file every training record.
pub fn calibrate(ts: TemplateSet, training: &[LogRecord]) -> Result<CalibrationModel, ConformalError> {
    if ts.is_empty() {
        return Err(ConformalError::EmptyTemplateSet);
    }
    if training.is_empty() {
        return Err(ConformalError::EmptyCorpus);
    }
    let mut calib: BTreeMap<TemplateId, Vec<f64>> =
        ts.templates().iter().map(|t| (t.template_id.clone(), Vec::new())).collect();
    // masked corpora repeat token sequences a lot
    let mut seen: HashMap<&[String], (TemplateId, f64)> = HashMap::new();
    for rec in training {
        let (id, score) = match seen.get(rec.tokens.as_slice()) {
            Some(hit) => hit.clone(),
            None => {
                let s = score_against_set(&ts, &rec.tokens)?;
                let hit = (s.argmin, s.min_score);
                seen.insert(&rec.tokens, hit.clone());
                hit
            }
        };
        calib.get_mut(&id).expect("argmin is a template of the set").push(score);
    }
    for scores in calib.values_mut() {
        scores.sort_by(f64::total_cmp);
    }
    Ok(CalibrationModel { template_set: ts, calib, total: training.len() })
}

/// Share of `sorted` scores that are `>= alpha`; zero for an empty list.
pub fn pvalue_of(sorted: &[f64], alpha: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let below = sorted.partition_point(|&s| s < alpha);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

impl CalibrationModel {
    /// Rebuild a model from stored parts. Lists are sorted here; every
    /// template of the set gets a (possibly empty) list.
    pub fn from_parts(
        template_set: TemplateSet,
        mut calib: BTreeMap<TemplateId, Vec<f64>>,
    ) -> Result<Self, ConformalError> {
        if let Some(id) = calib.keys().find(|id| template_set.get(id).is_none()) {
            return Err(ConformalError::UnknownTemplate(id.clone()));
        }
        for t in template_set.templates() {
            calib.entry(t.template_id.clone()).or_default();
        }
        for scores in calib.values_mut() {
            if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(ConformalError::InvalidScore);
            }
            scores.sort_by(f64::total_cmp);
        }
        let total = calib.values().map(Vec::len).sum();
        Ok(Self { template_set, calib, total })
    }

    pub fn parser_name(&self) -> &str {
        self.template_set.parser_name()
    }

    pub fn template_set(&self) -> &TemplateSet {
        &self.template_set
    }

    /// Sorted calibration scores per template.
    pub fn calib(&self) -> &BTreeMap<TemplateId, Vec<f64>> {
        &self.calib
    }

    /// Number of calibration records.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn pvalue(&self, template_id: &TemplateId, alpha_star: f64) -> Result<f64, ConformalError> {
        self.calib
            .get(template_id)
            .map(|s| pvalue_of(s, alpha_star))
            .ok_or_else(|| ConformalError::UnknownTemplate(template_id.clone()))
    }

    /// p-value of `record` for every template.
    pub fn pvalues_for(&self, record: &LogRecord) -> PValueSet {
        self.pvalues_for_tokens(&record.tokens)
    }

    pub fn pvalues_for_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> PValueSet {
        let mut pvalues = BTreeMap::new();
        let mut matched: Option<(f64, &TemplateId)> = None;
        for t in self.template_set.templates() {
            let alpha = pair_score(&t.tokens, tokens);
            if matched.is_none_or(|(best, _)| alpha < best) {
                matched = Some((alpha, &t.template_id));
            }
            pvalues.insert(t.template_id.clone(), pvalue_of(&self.calib[&t.template_id], alpha));
        }
        PValueSet {
            parser_name: self.parser_name().to_string(),
            pvalues,
            matched: matched.map(|(_, id)| id.clone()),
        }
    }
}

/// Per-template p-values of one record under one parser.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueSet {
    pub parser_name: String,
    pub pvalues: BTreeMap<TemplateId, f64>,
    /// Template with the smallest nonconformity score.
    pub matched: Option<TemplateId>,
}

impl PValueSet {
    pub fn max_p(&self) -> f64 {
        self.pvalues.values().copied().fold(0.0, f64::max)
    }

    /// Templates whose p-value is at least `epsilon`, by id.
    pub fn surviving(&self, epsilon: f64) -> Vec<(TemplateId, f64)> {
        self.pvalues.iter().filter(|(_, &p)| p >= epsilon).map(|(id, &p)| (id.clone(), p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsers::{fit, EventTemplate, ParserParams};

    fn rec(i: u64, s: &str) -> LogRecord {
        LogRecord::from_tokens(i, &s.split_whitespace().collect::<Vec<_>>())
    }

    fn two_templates() -> TemplateSet {
        let t = |id: &str, s: &str| EventTemplate {
            template_id: TemplateId::new(id),
            tokens: s.split_whitespace().map(String::from).collect(),
            support: 1,
        };
        TemplateSet::from_parts("x", "", vec![t("T1", "a b c"), t("T2", "a b")], BTreeMap::new())
    }

    #[test]
    fn identity_records_score_zero() {
        let recs = vec![rec(1, "Send done"), rec(2, "Send done"), rec(3, "Recv ok")];
        let ts = fit(&ParserParams::drain_default(), &recs).unwrap();
        let m = calibrate(ts, &recs).unwrap();
        assert!(m.calib().values().flatten().all(|&s| s == 0.0));
        assert_eq!(m.total(), 3);
    }

    #[test]
    fn hand_scored_calibration() {
        // "a x c" vs T1 is one replace at 2 (v = 3): 0.7311
        // "a b z" vs T2 is one insert at 3 (v = 2.5): 0.3775
        let recs = vec![rec(1, "a b c"), rec(2, "a x c"), rec(3, "a b"), rec(4, "a b z")];
        let m = calibrate(two_templates(), &recs).unwrap();
        let t1 = &m.calib()[&TemplateId::new("T1")];
        let t2 = &m.calib()[&TemplateId::new("T2")];
        assert_eq!(t1.len(), 2);
        assert_eq!(t2.len(), 2);
        assert_eq!(t1[0], 0.0);
        assert!((t1[1] - 0.7311).abs() < 1e-4);
        assert_eq!(t2[0], 0.0);
        assert!((t2[1] - 0.3775).abs() < 1e-4);
    }

    #[test]
    fn record_filed_under_lowest_score() {
        // "a b z": one insert at 3 against T2 (0.3775), one replace at 3
        // against T1 (v = 3, weight 0.5)
        let m = calibrate(two_templates(), &[rec(1, "a b z")]).unwrap();
        assert_eq!(m.calib()[&TemplateId::new("T2")].len(), 1);
        assert!(m.calib()[&TemplateId::new("T1")].is_empty());
    }

    #[test]
    fn calibrate_errors() {
        let empty = TemplateSet::from_parts("x", "", vec![], BTreeMap::new());
        assert_eq!(calibrate(empty, &[rec(1, "a")]).unwrap_err(), ConformalError::EmptyTemplateSet);
        assert_eq!(calibrate(two_templates(), &[]).unwrap_err(), ConformalError::EmptyCorpus);
    }

    #[test]
    fn pvalue_counts() {
        let calib = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(pvalue_of(&calib, 0.25), 0.5);
        assert_eq!(pvalue_of(&calib, 0.1), 1.0);
        assert_eq!(pvalue_of(&calib, 0.0), 1.0);
        assert_eq!(pvalue_of(&calib, 0.4), 0.25);
        assert_eq!(pvalue_of(&calib, 0.41), 0.0);
        assert_eq!(pvalue_of(&[], 0.0), 0.0);
    }

    #[test]
    fn pvalue_unknown_template() {
        let m = calibrate(two_templates(), &[rec(1, "a b c")]).unwrap();
        assert_eq!(
            m.pvalue(&TemplateId::new("T9"), 0.0).unwrap_err(),
            ConformalError::UnknownTemplate(TemplateId::new("T9"))
        );
        // T2 has no calibration mass
        assert_eq!(m.pvalue(&TemplateId::new("T2"), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn pvalues_for_exact_record() {
        let mut calib = BTreeMap::new();
        calib.insert(TemplateId::new("T1"), vec![0.0, 0.0, 0.5]);
        let m = CalibrationModel::from_parts(two_templates(), calib).unwrap();
        let ps = m.pvalues_for(&rec(9, "a b c"));
        assert_eq!(ps.pvalues[&TemplateId::new("T1")], 1.0);
        assert_eq!(ps.pvalues[&TemplateId::new("T2")], 0.0);
        assert_eq!(ps.pvalues.len(), 2);
        assert_eq!(ps.matched, Some(TemplateId::new("T1")));
        assert_eq!(ps.surviving(0.5), vec![(TemplateId::new("T1"), 1.0)]);
    }

    #[test]
    fn from_parts_rejects_bad_input() {
        let mut calib = BTreeMap::new();
        calib.insert(TemplateId::new("T7"), vec![0.0]);
        assert!(CalibrationModel::from_parts(two_templates(), calib).is_err());
        let mut calib = BTreeMap::new();
        calib.insert(TemplateId::new("T1"), vec![-1.0]);
        assert_eq!(
            CalibrationModel::from_parts(two_templates(), calib).unwrap_err(),
            ConformalError::InvalidScore
        );
    }
}
