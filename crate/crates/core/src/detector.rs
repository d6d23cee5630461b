//! Ensemble verdicts from per-parser p-values.
//!
//! A template survives when its p-value is at least ε. A record is an
//! anomaly when no template of any parser survives.

use std::fmt::Write as _;

use thiserror::Error;

use crate::conformal::{CalibrationModel, PValueSet};
use crate::ingest::LogRecord;
use crate::parsers::TemplateId;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("no parser models given")]
    NoParsers,
    #[error("significance level must lie in [0,1], got {0}")]
    InvalidEpsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    epsilon: f64,
}

impl DetectorConfig {
    pub fn new(epsilon: f64) -> Result<Self, DetectError> {
        if (0.0..=1.0).contains(&epsilon) {
            Ok(Self { epsilon })
        } else {
            Err(DetectError::InvalidEpsilon(epsilon))
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Anomaly => "anomaly",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(Label::Normal),
            "anomaly" | "abnormal" => Ok(Label::Anomaly),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub line_id: u64,
    pub label: Label,
    /// Surviving templates per parser, in model order.
    pub prediction_set: Vec<(String, Vec<(TemplateId, f64)>)>,
    pub max_p: f64,
}

impl Verdict {
    /// Tab-separated alarm line: line id, label, max p, then one
    /// `parser=id:p,id:p` field per parser.
    pub fn to_line(&self) -> String {
        let mut out = format!("{}\t{}\t{:.6}", self.line_id, self.label, self.max_p);
        for (parser, kept) in &self.prediction_set {
            let _ = write!(out, "\t{parser}=");
            for (k, (id, p)) in kept.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{id}:{p:.6}");
            }
        }
        out
    }
}

pub fn decide(line_id: u64, psets: &[PValueSet], cfg: DetectorConfig) -> Result<Verdict, DetectError> {
    if psets.is_empty() {
        return Err(DetectError::NoParsers);
    }
    let prediction_set: Vec<(String, Vec<(TemplateId, f64)>)> =
        psets.iter().map(|ps| (ps.parser_name.clone(), ps.surviving(cfg.epsilon))).collect();
    let label = if prediction_set.iter().all(|(_, kept)| kept.is_empty()) {
        Label::Anomaly
    } else {
        Label::Normal
    };
    let max_p = psets.iter().map(PValueSet::max_p).fold(0.0, f64::max);
    Ok(Verdict { line_id, label, prediction_set, max_p })
}

/// One verdict per record, in input order.
pub fn detect_batch(
    models: &[CalibrationModel],
    records: &[LogRecord],
    cfg: DetectorConfig,
) -> Vec<Result<Verdict, DetectError>> {
    records
        .iter()
        .map(|r| {
            let psets: Vec<PValueSet> = models.iter().map(|m| m.pvalues_for(r)).collect();
            decide(r.line_id, &psets, cfg)
        })
        .collect()
}
