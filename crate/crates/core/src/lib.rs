//! Log anomaly detection by combining several log template miners through
//! conformal prediction.
//!
//! The pipeline has five stages:
//!
//! 1. [`ingest`] turns raw lines into [`LogRecord`]s using a header format
//!    such as `<Date> <Time> <Level> <Content>` and optionally persists them in
//!    a hash-chained append-only store.
//! 2. [`parsers`] mines event templates from normal training records with
//!    four heterogeneous algorithms (Drain, Spell, IPLoM, LogCluster).
//! 3. [`nonconformity`] scores a record against a template with a
//!    position-weighted token edit distance.
//! 4. [`conformal`] files the training scores per template and turns the
//!    score of a new record into a per-template p-value.
//! 5. [`detector`] filters p-values below a significance level and raises an
//!    alarm when no template of any parser survives.
//!
//! [`eval`] holds the synthetic corpora, confusion metrics and the
//! significance sweep used to evaluate the detector.
//!
//! ```
//! use logconform::{compile_schema, preprocess, ParserParams, fit, calibrate};
//!
//! let schema = compile_schema::<&str, &str>("<Content>", &[]).unwrap();
//! let lines = ["Load a.ini ok", "Load b.ini ok", "Send done"];
//! let records: Vec<_> = lines
//!     .iter()
//!     .enumerate()
//!     .map(|(i, l)| preprocess(i as u64 + 1, l, &schema).unwrap())
//!     .collect();
//! let ts = fit(&ParserParams::drain_default(), &records).unwrap();
//! let model = calibrate(ts, &records).unwrap();
//! let probe = preprocess(1, "Load c.ini ok", &schema).unwrap();
//! let pset = model.pvalues_for(&probe);
//! assert_eq!(pset.max_p(), 1.0);
//! ```

pub mod conformal;
pub mod detector;
pub mod eval;
pub mod ingest;
pub mod nonconformity;
pub mod parsers;

pub use conformal::{calibrate, CalibrationModel, ConformalError, ModelBundle, PValueSet};
pub use detector::{decide, detect_batch, DetectError, DetectorConfig, Label, Verdict};
pub use ingest::{
    compile_schema, preprocess, ChainStore, ChainedEntry, HeaderSchema, IngestError, LogRecord,
    VerificationReport,
};
pub use nonconformity::{edit_script, weighted_score, EditKind, EditOp, EditScript, ScoreParams};
pub use parsers::{
    fit, list_templates, match_record, EventTemplate, ParserError, ParserParams, TemplateId,
    TemplateSet, WILDCARD,
};
