//! Event template mining.
//!
//! Four heterogeneous miners are built in: [`drain`] (fixed-depth prefix
//! tree), [`spell`] (longest common subsequence), [`iplom`] (iterative
//! partitioning) and [`logcluster`] (frequent words). Each produces groups
//! of training records plus one template per group; [`fit_with`] turns that
//! into a [`TemplateSet`] with stable ids. Additional miners plug in through
//! the [`TemplateMiner`] trait.

pub mod drain;
pub mod iplom;
pub mod logcluster;
pub mod spell;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::ingest::LogRecord;
use crate::nonconformity::score_against_set;

pub use drain::DrainParams;
pub use iplom::IplomParams;
pub use logcluster::LogClusterParams;
pub use spell::SpellParams;

/// Template token standing for exactly one variable record token.
pub const WILDCARD: &str = "<*>";

#[derive(Debug, Error, PartialEq)]
pub enum ParserError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("record {line_id} has no tokens")]
    EmptyRecord { line_id: u64 },
    #[error("invalid {parser} parameter: {reason}")]
    InvalidParams { parser: &'static str, reason: String },
    #[error("unknown parser `{0}`")]
    UnknownParser(String),
    #[error("malformed template line {line}: {reason}")]
    MalformedTemplate { line: usize, reason: String },
}

/// Parser-scoped template label such as `T2`.
///
/// Ordering is natural-number aware, so `T2 < T10`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TemplateId(String);

impl TemplateId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn numbered(n: usize) -> Self {
        Self(format!("T{n}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Compare strings treating each maximal digit run as a number.
fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let da = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let db = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let (na, nb) = (&a[..da], &b[..db]);
                let trim = |s: &[u8]| -> usize { s.iter().take_while(|&&c| c == b'0').count() };
                let (ta, tb) = (&na[trim(na)..], &nb[trim(nb)..]);
                let ord = ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb)).then_with(|| da.cmp(&db));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[da..];
                b = &b[db..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

impl Ord for TemplateId {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for TemplateId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTemplate {
    pub template_id: TemplateId,
    /// Literal tokens and [`WILDCARD`]s.
    pub tokens: Vec<String>,
    /// Number of training records grouped under this template.
    pub support: u64,
}

impl EventTemplate {
    /// Space-joined tokens.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// True if the literal tokens of the template occur, in order, in
    /// `record`.
    pub fn literals_in_order<S: AsRef<str>>(&self, record: &[S]) -> bool {
        let mut it = record.iter();
        self.tokens
            .iter()
            .filter(|t| t.as_str() != WILDCARD)
            .all(|lit| it.by_ref().any(|r| r.as_ref() == lit))
    }

    /// True if the template matches `record` position by position.
    pub fn matches_positionally<S: AsRef<str>>(&self, record: &[S]) -> bool {
        self.tokens.len() == record.len()
            && self.tokens.iter().zip(record).all(|(t, r)| t == WILDCARD || t == r.as_ref())
    }
}

/// Templates learned by one parser.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    parser_name: String,
    parser_params: String,
    templates: Vec<EventTemplate>,
    assignment: BTreeMap<u64, TemplateId>,
}

impl TemplateSet {
    /// Assemble a set from parts; templates are sorted by id.
    pub fn from_parts(
        parser_name: impl Into<String>,
        parser_params: impl Into<String>,
        mut templates: Vec<EventTemplate>,
        assignment: BTreeMap<u64, TemplateId>,
    ) -> Self {
        templates.sort_by(|a, b| a.template_id.cmp(&b.template_id));
        Self {
            parser_name: parser_name.into(),
            parser_params: parser_params.into(),
            templates,
            assignment,
        }
    }

    pub fn parser_name(&self) -> &str {
        &self.parser_name
    }

    /// Canonical `key=value` rendering of the parameters used.
    pub fn parser_params(&self) -> &str {
        &self.parser_params
    }

    /// Templates ordered by id.
    pub fn templates(&self) -> &[EventTemplate] {
        &self.templates
    }

    pub fn get(&self, id: &TemplateId) -> Option<&EventTemplate> {
        self.templates
            .binary_search_by(|t| t.template_id.cmp(id))
            .ok()
            .map(|i| &self.templates[i])
    }

    /// Training line id to template id. Empty for imported sets.
    pub fn assignment(&self) -> &BTreeMap<u64, TemplateId> {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// One export line per template: parser, id, space-joined tokens and
    /// support, separated by tabs.
    pub fn export_lines(&self) -> Vec<String> {
        self.templates
            .iter()
            .map(|t| format!("{}\t{}\t{}\t{}", self.parser_name, t.template_id, t.text(), t.support))
            .collect()
    }
}

/// A group of training records (indices into the input slice) and its
/// template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub tokens: Vec<String>,
    pub members: Vec<usize>,
}

/// A template mining algorithm.
pub trait TemplateMiner {
    fn name(&self) -> &str;

    /// Canonical `key=value` rendering of the parameters.
    fn params(&self) -> String;

    /// Partition `records` into groups. Every index must appear in exactly
    /// one group. Records are guaranteed non-empty.
    fn mine(&self, records: &[LogRecord]) -> Vec<Group>;
}

/// Parameters of the built-in parsers. The variant selects the algorithm.
#[derive(Debug, Clone, PartialEq)]
pub enum ParserParams {
    Drain(DrainParams),
    Spell(SpellParams),
    Iplom(IplomParams),
    LogCluster(LogClusterParams),
}

impl ParserParams {
    pub const NAMES: [&'static str; 4] = ["Drain", "Spell", "IPLoM", "LogCluster"];

    pub fn drain_default() -> Self {
        Self::Drain(DrainParams::default())
    }

    /// Default parameters for the parser called `name`.
    pub fn default_for(name: &str) -> Result<Self, ParserError> {
        match name {
            "Drain" => Ok(Self::Drain(DrainParams::default())),
            "Spell" => Ok(Self::Spell(SpellParams::default())),
            "IPLoM" => Ok(Self::Iplom(IplomParams::default())),
            "LogCluster" => Ok(Self::LogCluster(LogClusterParams::default())),
            other => Err(ParserError::UnknownParser(other.to_string())),
        }
    }

    /// Defaults for all four built-in parsers, in canonical order.
    pub fn all_defaults() -> Vec<Self> {
        Self::NAMES.iter().map(|n| Self::default_for(n).unwrap()).collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Drain(_) => "Drain",
            Self::Spell(_) => "Spell",
            Self::Iplom(_) => "IPLoM",
            Self::LogCluster(_) => "LogCluster",
        }
    }

    pub fn validate(&self) -> Result<(), ParserError> {
        match self {
            Self::Drain(p) => p.validate(),
            Self::Spell(p) => p.validate(),
            Self::Iplom(p) => p.validate(),
            Self::LogCluster(p) => p.validate(),
        }
    }

    pub fn miner(&self) -> Box<dyn TemplateMiner> {
        match self {
            Self::Drain(p) => Box::new(p.clone()),
            Self::Spell(p) => Box::new(p.clone()),
            Self::Iplom(p) => Box::new(p.clone()),
            Self::LogCluster(p) => Box::new(p.clone()),
        }
    }
}

/// Train the parser selected by `params` on `records`.
pub fn fit(params: &ParserParams, records: &[LogRecord]) -> Result<TemplateSet, ParserError> {
    params.validate()?;
    fit_with(params.miner().as_ref(), records)
}

/// Train an arbitrary miner and number its groups `T1, T2, ...` in order of
/// their earliest member.
pub fn fit_with(miner: &dyn TemplateMiner, records: &[LogRecord]) -> Result<TemplateSet, ParserError> {
    if records.is_empty() {
        return Err(ParserError::EmptyCorpus);
    }
    if let Some(r) = records.iter().find(|r| r.tokens.is_empty()) {
        return Err(ParserError::EmptyRecord { line_id: r.line_id });
    }
    let mut groups: Vec<Group> = miner.mine(records).into_iter().filter(|g| !g.members.is_empty()).collect();
    for g in &mut groups {
        g.members.sort_unstable();
    }
    groups.sort_by_key(|g| g.members[0]);

    let mut templates = Vec::with_capacity(groups.len());
    let mut assignment = BTreeMap::new();
    for (k, g) in groups.into_iter().enumerate() {
        let id = TemplateId::numbered(k + 1);
        for &m in &g.members {
            let prev = assignment.insert(records[m].line_id, id.clone());
            debug_assert!(prev.is_none(), "record assigned twice");
        }
        debug_assert!(!g.tokens.is_empty());
        templates.push(EventTemplate { template_id: id, tokens: g.tokens, support: g.members.len() as u64 });
    }
    debug_assert_eq!(assignment.len(), records.len());
    Ok(TemplateSet::from_parts(miner.name(), miner.params(), templates, assignment))
}

/// Route a record to the template with the smallest weighted edit distance.
/// `None` only when the set is empty.
pub fn match_record(ts: &TemplateSet, record: &LogRecord) -> Option<TemplateId> {
    score_against_set(ts, &record.tokens).ok().map(|s| s.argmin)
}

/// Templates ordered by id.
pub fn list_templates(ts: &TemplateSet) -> Vec<EventTemplate> {
    ts.templates().to_vec()
}

/// Write template sets in the line-oriented export format.
///
/// ```text
/// #params<TAB>Drain<TAB>depth=4 sim_threshold=0.5 max_children=100
/// Drain<TAB>T1<TAB>Load <*> ok<TAB>2
/// ```
pub fn export_templates<W: Write>(sets: &[TemplateSet], mut out: W) -> std::io::Result<()> {
    for ts in sets {
        writeln!(out, "#params\t{}\t{}", ts.parser_name, ts.parser_params)?;
        for line in ts.export_lines() {
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

/// Parse one export line into (parser name, template).
pub fn parse_template_line(line: &str, line_no: usize) -> Result<(String, EventTemplate), ParserError> {
    let bad = |reason: &str| ParserError::MalformedTemplate { line: line_no, reason: reason.to_string() };
    let mut parts = line.split('\t');
    let (Some(parser), Some(id), Some(text), Some(support), None) =
        (parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(bad("expected 4 tab-separated fields"));
    };
    let tokens: Vec<String> = text.split(' ').map(str::to_string).collect();
    if parser.is_empty() || id.is_empty() || tokens.iter().any(String::is_empty) {
        return Err(bad("empty field or token"));
    }
    let support = support.parse::<u64>().map_err(|_| bad("support is not an integer"))?;
    Ok((parser.to_string(), EventTemplate { template_id: TemplateId::new(id), tokens, support }))
}

/// Read template sets written by [`export_templates`]. Assignments are not
/// part of the format and come back empty.
pub fn import_templates<R: BufRead>(input: R) -> Result<Vec<TemplateSet>, ParserError> {
    let mut order: Vec<String> = Vec::new();
    let mut params: BTreeMap<String, String> = BTreeMap::new();
    let mut templates: BTreeMap<String, Vec<EventTemplate>> = BTreeMap::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| ParserError::MalformedTemplate { line: i + 1, reason: e.to_string() })?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#params\t") {
            let (name, p) = rest.split_once('\t').unwrap_or((rest, ""));
            if !order.iter().any(|n| n == name) {
                order.push(name.to_string());
            }
            params.insert(name.to_string(), p.to_string());
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let (parser, template) = parse_template_line(&line, i + 1)?;
        if !order.contains(&parser) {
            order.push(parser.clone());
        }
        templates.entry(parser).or_default().push(template);
    }
    Ok(order
        .into_iter()
        .map(|name| {
            let p = params.remove(&name).unwrap_or_default();
            let t = templates.remove(&name).unwrap_or_default();
            TemplateSet::from_parts(name, p, t, BTreeMap::new())
        })
        .collect())
}

/// Parse `key=value key=value` parameter text.
pub(crate) fn parse_kv(text: &str) -> BTreeMap<&str, &str> {
    text.split_whitespace().filter_map(|kv| kv.split_once('=')).collect()
}

/// Rebuild typed parameters from a parser name and its canonical rendering.
pub fn parse_params(name: &str, text: &str) -> Result<ParserParams, ParserError> {
    let kv = parse_kv(text);
    let bad = |key: &str| ParserError::InvalidParams { parser: "params", reason: format!("bad or missing `{key}`") };
    let f = |key: &str| kv.get(key).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad(key));
    let u = |key: &str| kv.get(key).and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| bad(key));
    let p = match name {
        "Drain" => ParserParams::Drain(DrainParams {
            depth: u("depth")?,
            sim_threshold: f("sim_threshold")?,
            max_children: u("max_children")?,
        }),
        "Spell" => ParserParams::Spell(SpellParams { lcs_threshold: f("lcs_threshold")? }),
        "IPLoM" => ParserParams::Iplom(IplomParams {
            partition_support_threshold: f("partition_support_threshold")?,
            lower_bound: f("lower_bound")?,
            upper_bound: f("upper_bound")?,
            cluster_goodness: f("cluster_goodness")?,
        }),
        "LogCluster" => ParserParams::LogCluster(LogClusterParams { min_support: u("min_support")? }),
        other => return Err(ParserError::UnknownParser(other.to_string())),
    };
    p.validate()?;
    Ok(p)
}
