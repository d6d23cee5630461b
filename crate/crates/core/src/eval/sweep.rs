//! Precision and recall over a grid of significance levels, for every
//! parser alone and for the ensemble.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{EvalError, Metrics};
use crate::conformal::{CalibrationModel, PValueSet};
use crate::detector::{decide, DetectError, DetectorConfig, Label};
use crate::ingest::LogRecord;

pub const DEFAULT_GRID: [f64; 5] = [0.27, 0.3, 0.4, 0.6, 0.83];
pub const ENSEMBLE: &str = "Ensemble";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub configuration: String,
    pub epsilon: f64,
    pub metrics: Metrics,
}

/// One row per (configuration, ε): each model alone in model order, then
/// all models together. p-values are computed once per record and reused
/// across the grid.
pub fn significance_sweep(
    models: &[CalibrationModel],
    test: &[LogRecord],
    labels: &BTreeMap<u64, Label>,
    grid: &[f64],
) -> Result<Vec<SweepRow>, EvalError> {
    if models.is_empty() {
        return Err(DetectError::NoParsers.into());
    }
    if test.len() != labels.len() || test.iter().any(|r| !labels.contains_key(&r.line_id)) {
        return Err(EvalError::LabelMismatch(format!(
            "{} test records, {} labels, ids must match",
            test.len(),
            labels.len()
        )));
    }
    let cfgs = grid.iter().map(|&e| DetectorConfig::new(e)).collect::<Result<Vec<_>, _>>()?;
    let psets: Vec<Vec<PValueSet>> =
        test.iter().map(|r| models.iter().map(|m| m.pvalues_for(r)).collect()).collect();

    let mut configs: Vec<(String, Vec<usize>)> =
        models.iter().enumerate().map(|(i, m)| (m.parser_name().to_string(), vec![i])).collect();
    configs.push((ENSEMBLE.to_string(), (0..models.len()).collect()));

    let mut rows = Vec::with_capacity(configs.len() * grid.len());
    for (name, members) in &configs {
        for cfg in &cfgs {
            let mut m = Metrics::default();
            for (rec, sets) in test.iter().zip(&psets) {
                let chosen: Vec<PValueSet> = members.iter().map(|&i| sets[i].clone()).collect();
                let v = decide(rec.line_id, &chosen, *cfg)?;
                m.add(v.label, labels[&rec.line_id]);
            }
            rows.push(SweepRow { configuration: name.clone(), epsilon: cfg.epsilon(), metrics: m });
        }
    }
    Ok(rows)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_default()
}

/// Comma-separated report with a header line. Undefined precision or recall
/// is an empty cell.
pub fn render_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("configuration,epsilon,tp,fp,fn,tn,precision,recall\n");
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.configuration,
            r.epsilon,
            m.tp,
            m.fp,
            m.fn_,
            m.tn,
            cell(m.precision()),
            cell(m.recall())
        );
    }
    out
}

/// The same table with padded columns; undefined cells show `-`.
pub fn render_aligned(rows: &[SweepRow]) -> String {
    let header = ["configuration", "epsilon", "tp", "fp", "fn", "tn", "precision", "recall"];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
    for r in rows {
        let m = &r.metrics;
        let dash = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        table.push(vec![
            r.configuration.clone(),
            r.epsilon.to_string(),
            m.tp.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
            m.tn.to_string(),
            dash(m.precision()),
            dash(m.recall()),
        ]);
    }
    let widths: Vec<usize> =
        (0..header.len()).map(|c| table.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
