//! Model bundle: every parser's templates and calibration scores in one
//! UTF-8 text file.
//!
//! ```text
//! logconform-bundle<TAB>1
//! parser<TAB>Drain<TAB>depth=4 sim_threshold=0.5 max_children=100
//! template<TAB>Drain<TAB>T1<TAB>Load <*> ok<TAB>2
//! calib<TAB>T1<TAB>0 0 0.7310585786300049
//! ...
//! checksum<TAB><sha256 hex of every preceding byte>
//! ```
//!
//! `template` lines carry the template export format. Scores use Rust's
//! shortest round-trip float formatting, so a load reproduces every score
//! bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{CalibrationModel, ConformalError};
use crate::parsers::{parse_template_line, TemplateId, TemplateSet};

pub const BUNDLE_MAGIC: &str = "logconform-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("not a model bundle")]
    NotABundle,
    #[error("unsupported bundle version {0}")]
    Version(String),
    #[error("bundle checksum mismatch")]
    Checksum,
    #[error("corrupt bundle at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error(transparent)]
    Model(#[from] ConformalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Calibrated models of several parsers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub models: Vec<CalibrationModel>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl ModelBundle {
    pub fn new(models: Vec<CalibrationModel>) -> Self {
        Self { models }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{BUNDLE_MAGIC}\t{BUNDLE_VERSION}\n");
        for m in &self.models {
            let ts = m.template_set();
            let _ = writeln!(out, "parser\t{}\t{}", ts.parser_name(), ts.parser_params());
            for line in ts.export_lines() {
                let _ = writeln!(out, "template\t{line}");
            }
            for (id, scores) in m.calib() {
                let joined: Vec<String> = scores.iter().map(|s| format!("{s}")).collect();
                let _ = writeln!(out, "calib\t{id}\t{}", joined.join(" "));
            }
        }
        let digest = Sha256::digest(out.as_bytes());
        let _ = writeln!(out, "checksum\t{}", hex(&digest));
        out
    }

    pub fn from_text(text: &str) -> Result<Self, BundleError> {
        let body_end = text.rfind("checksum\t").ok_or(BundleError::NotABundle)?;
        let (body, trailer) = text.split_at(body_end);
        let mut lines = body.lines().enumerate();
        match lines.next() {
            Some((_, first)) => {
                let (magic, version) = first.split_once('\t').ok_or(BundleError::NotABundle)?;
                if magic != BUNDLE_MAGIC {
                    return Err(BundleError::NotABundle);
                }
                if version != BUNDLE_VERSION.to_string() {
                    return Err(BundleError::Version(version.to_string()));
                }
            }
            None => return Err(BundleError::NotABundle),
        }
        let stated = trailer.trim_end_matches('\n').strip_prefix("checksum\t").unwrap_or("");
        if stated != hex(&Sha256::digest(body.as_bytes())) {
            return Err(BundleError::Checksum);
        }

        struct Pending {
            name: String,
            params: String,
            templates: Vec<crate::parsers::EventTemplate>,
            calib: BTreeMap<TemplateId, Vec<f64>>,
        }
        let mut done: Vec<CalibrationModel> = Vec::new();
        let mut cur: Option<Pending> = None;
        let finish = |p: Pending| -> Result<CalibrationModel, BundleError> {
            let ts = TemplateSet::from_parts(p.name, p.params, p.templates, BTreeMap::new());
            Ok(CalibrationModel::from_parts(ts, p.calib)?)
        };
        for (i, line) in lines {
            let line_no = i + 1;
            let corrupt = |reason: &str| BundleError::Corrupt { line: line_no, reason: reason.to_string() };
            let (kind, rest) = line.split_once('\t').ok_or_else(|| corrupt("missing record kind"))?;
            match kind {
                "parser" => {
                    if let Some(p) = cur.take() {
                        done.push(finish(p)?);
                    }
                    let (name, params) = rest.split_once('\t').unwrap_or((rest, ""));
                    cur = Some(Pending {
                        name: name.to_string(),
                        params: params.to_string(),
                        templates: Vec::new(),
                        calib: BTreeMap::new(),
                    });
                }
                "template" => {
                    let p = cur.as_mut().ok_or_else(|| corrupt("template before parser"))?;
                    let (parser, t) = parse_template_line(rest, line_no)
                        .map_err(|e| corrupt(&e.to_string()))?;
                    if parser != p.name {
                        return Err(corrupt("template of another parser"));
                    }
                    p.templates.push(t);
                }
                "calib" => {
                    let p = cur.as_mut().ok_or_else(|| corrupt("calib before parser"))?;
                    let (id, scores) = rest.split_once('\t').ok_or_else(|| corrupt("missing scores"))?;
                    let scores = scores
                        .split(' ')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| corrupt("bad score"))?;
                    p.calib.insert(TemplateId::new(id), scores);
                }
                _ => return Err(corrupt("unknown record kind")),
            }
        }
        if let Some(p) = cur.take() {
            done.push(finish(p)?);
        }
        Ok(Self { models: done })
    }

    /// Write the bundle next to `path` and rename it into place, so a
    /// partially written bundle never appears under the final name.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BundleError> {
        let path = path.as_ref();
        let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let tmp = path.with_file_name(format!(".{file_name}.partial"));
        let write = || -> std::io::Result<()> {
            std::fs::write(&tmp, self.to_text())?;
            std::fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            BundleError::Io(e)
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BundleError> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes).map_err(|_| BundleError::NotABundle)?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::calibrate;
    use crate::ingest::LogRecord;
    use crate::parsers::{fit, ParserParams};

    fn bundle() -> ModelBundle {
        let lines = ["a b c", "a x c", "a b", "a b z", "Load f.ini ok", "Load g.ini ok", "user u1 a b c d"];
        let recs: Vec<LogRecord> = lines
            .iter()
            .enumerate()
            .map(|(i, l)| LogRecord::from_tokens(i as u64 + 1, &l.split(' ').collect::<Vec<_>>()))
            .collect();
        let models = ParserParams::all_defaults()
            .iter()
            .map(|p| calibrate(fit(p, &recs).unwrap(), &recs).unwrap())
            .collect();
        ModelBundle::new(models)
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut b = bundle();
        // odd values to exercise float formatting
        let m = &b.models[0];
        let mut calib = m.calib().clone();
        calib.values_mut().next().unwrap().extend([0.1 + 0.2, 1e-300, 123456.789e10, f64::MIN_POSITIVE]);
        b.models[0] = CalibrationModel::from_parts(m.template_set().clone(), calib).unwrap();
        let text = b.to_text();
        let back = ModelBundle::from_text(&text).unwrap();
        assert_eq!(back.models.len(), b.models.len());
        for (x, y) in b.models.iter().zip(&back.models) {
            assert_eq!(x.template_set().templates(), y.template_set().templates());
            assert_eq!(x.template_set().parser_params(), y.template_set().parser_params());
            for (sx, sy) in x.calib().values().zip(y.calib().values()) {
                let bx: Vec<u64> = sx.iter().map(|s| s.to_bits()).collect();
                let by: Vec<u64> = sy.iter().map(|s| s.to_bits()).collect();
                assert_eq!(bx, by);
            }
        }
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn corruption_is_detected() {
        let text = bundle().to_text();
        let flipped = text.replacen("template\tDrain\tT1", "template\tDrain\tT9", 1);
        assert!(matches!(ModelBundle::from_text(&flipped), Err(BundleError::Checksum)));
        assert!(matches!(ModelBundle::from_text("garbage"), Err(BundleError::NotABundle)));
        let v2 = text.replacen("logconform-bundle\t1", "logconform-bundle\t2", 1);
        assert!(matches!(ModelBundle::from_text(&v2), Err(BundleError::Version(_))));
        assert!(ModelBundle::from_text(&text[..text.len() / 2]).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bundle");
        let b = bundle();
        b.save(&path).unwrap();
        assert_eq!(ModelBundle::load(&path).unwrap(), b.clone_without_assignments());
        let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    impl ModelBundle {
        fn clone_without_assignments(&self) -> Self {
            let models = self
                .models
                .iter()
                .map(|m| {
                    let ts = m.template_set();
                    let bare = TemplateSet::from_parts(
                        ts.parser_name(),
                        ts.parser_params(),
                        ts.templates().to_vec(),
                        BTreeMap::new(),
                    );
                    CalibrationModel::from_parts(bare, m.calib().clone()).unwrap()
                })
                .collect();
            Self { models }
        }
    }
}
