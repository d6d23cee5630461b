use std::collections::BTreeMap;

use super::EvalError;
use crate::detector::{Label, Verdict};

/// Confusion counts with anomalies as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn add(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Anomaly, Label::Anomaly) => self.tp += 1,
            (Label::Anomaly, Label::Normal) => self.fp += 1,
            (Label::Normal, Label::Anomaly) => self.fn_ += 1,
            (Label::Normal, Label::Normal) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn alarms(&self) -> usize {
        self.tp + self.fp
    }

    /// `None` when nothing was flagged.
    pub fn precision(&self) -> Option<f64> {
        (self.alarms() > 0).then(|| self.tp as f64 / self.alarms() as f64)
    }

    /// `None` when there are no anomalies to find.
    pub fn recall(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }
}

/// Count verdicts against ground truth. Both sides must cover exactly the
/// same line ids.
pub fn score_metrics(verdicts: &[Verdict], labels: &BTreeMap<u64, Label>) -> Result<Metrics, EvalError> {
    if verdicts.len() != labels.len() {
        return Err(EvalError::LabelMismatch(format!(
            "{} verdicts for {} labels",
            verdicts.len(),
            labels.len()
        )));
    }
    let mut m = Metrics::default();
    let mut seen = std::collections::BTreeSet::new();
    for v in verdicts {
        let actual = labels
            .get(&v.line_id)
            .ok_or_else(|| EvalError::LabelMismatch(format!("no label for line {}", v.line_id)))?;
        if !seen.insert(v.line_id) {
            return Err(EvalError::LabelMismatch(format!("line {} judged twice", v.line_id)));
        }
        m.add(v.label, *actual);
    }
    Ok(m)
}
