use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::IngestError;

/// Name of the field holding the unstructured message.
pub const CONTENT_FIELD: &str = "Content";

/// A masking rule applied to message content before tokenization.
#[derive(Debug, Clone)]
pub struct MaskRule {
    pub pattern: Regex,
    pub replacement: String,
}

/// Compiled header format plus content masking rules.
#[derive(Debug, Clone)]
pub struct HeaderSchema {
    format_template: String,
    fields: Vec<String>,
    layout: Vec<Segment>,
    field_pattern: Regex,
    mask_rules: Vec<MaskRule>,
}

impl HeaderSchema {
    pub fn format_template(&self) -> &str {
        &self.format_template
    }

    /// Field names in template order; `Content` is always last.
    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    pub fn mask_rules(&self) -> &[MaskRule] {
        &self.mask_rules
    }

    /// Apply every mask rule, in order, to `content`.
    pub fn mask(&self, content: &str) -> String {
        let mut out = content.to_string();
        for rule in &self.mask_rules {
            if let std::borrow::Cow::Owned(s) = rule.pattern.replace_all(&out, rule.replacement.as_str()) {
                out = s;
            }
        }
        out
    }

    /// Reassemble a line from a record's headers and unmasked content,
    /// using single spaces wherever the format has whitespace.
    pub fn render(&self, record: &LogRecord) -> String {
        let mut out = String::new();
        for seg in &self.layout {
            match seg {
                Segment::Literal(text) => {
                    let mut first = true;
                    for piece in text.split(char::is_whitespace) {
                        if !first && !out.ends_with(' ') {
                            out.push(' ');
                        }
                        first = false;
                        out.push_str(piece);
                    }
                }
                Segment::Field(name) if name == CONTENT_FIELD => out.push_str(&record.content),
                Segment::Field(name) => {
                    out.push_str(record.headers.get(name).map_or("", String::as_str))
                }
            }
        }
        out.trim_end().to_string()
    }
}

/// One preprocessed log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub line_id: u64,
    pub headers: BTreeMap<String, String>,
    /// Unmasked message content.
    pub content: String,
    /// Whitespace split of the masked content.
    pub tokens: Vec<String>,
}

impl LogRecord {
    /// A header-less record built straight from tokens. Handy in tests and
    /// for callers that tokenize elsewhere.
    pub fn from_tokens<S: AsRef<str>>(line_id: u64, tokens: &[S]) -> Self {
        let tokens: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
        Self {
            line_id,
            headers: BTreeMap::new(),
            content: tokens.join(" "),
            tokens,
        }
    }
}

#[derive(Debug, Clone)]
enum Segment {
    Literal(String),
    Field(String),
}

fn split_template(template: &str) -> Result<Vec<Segment>, IngestError> {
    let mut segments = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('<') {
        let Some(close_rel) = rest[open..].find('>') else {
            return Err(IngestError::MalformedFormat(format!(
                "unterminated field starting at `{}`",
                &rest[open..]
            )));
        };
        if open > 0 {
            segments.push(Segment::Literal(rest[..open].to_string()));
        }
        let name = &rest[open + 1..open + close_rel];
        if name.is_empty() || name.contains('<') || name.chars().any(char::is_whitespace) {
            return Err(IngestError::MalformedFormat(format!("bad field name `{name}`")));
        }
        segments.push(Segment::Field(name.to_string()));
        rest = &rest[open + close_rel + 1..];
    }
    if !rest.is_empty() {
        segments.push(Segment::Literal(rest.to_string()));
    }
    Ok(segments)
}

/// Compile a format template such as `<Date> <Time> <Level> <Content>`.
///
/// Whitespace in the template matches any whitespace run. Header fields
/// match non-empty runs without whitespace; `Content` takes the rest of the
/// line.
pub fn compile_schema<P, R>(format_template: &str, mask_rules: &[(P, R)]) -> Result<HeaderSchema, IngestError>
where
    P: AsRef<str>,
    R: AsRef<str>,
{
    let segments = split_template(format_template)?;
    let mut fields: Vec<String> = Vec::new();
    let mut pattern = String::from("^");
    for (i, seg) in segments.iter().enumerate() {
        match seg {
            Segment::Literal(text) => {
                if fields.last().map(String::as_str) == Some(CONTENT_FIELD) {
                    if text.trim().is_empty() {
                        pattern.push_str(r"\s*");
                        continue;
                    }
                    return Err(IngestError::MalformedFormat(
                        "text after <Content>; Content must be the last field".into(),
                    ));
                }
                let mut first = true;
                for piece in text.split(char::is_whitespace) {
                    if !first {
                        pattern.push_str(r"\s+");
                    }
                    first = false;
                    pattern.push_str(&regex::escape(piece));
                }
                // collapse runs produced by consecutive whitespace
                while pattern.contains(r"\s+\s+") {
                    pattern = pattern.replace(r"\s+\s+", r"\s+");
                }
            }
            Segment::Field(name) => {
                if fields.iter().any(|f| f == name) {
                    return Err(IngestError::MalformedFormat(format!("duplicate field `{name}`")));
                }
                if fields.last().map(String::as_str) == Some(CONTENT_FIELD) {
                    return Err(IngestError::MalformedFormat(
                        "Content must be the last field".into(),
                    ));
                }
                if name == CONTENT_FIELD {
                    pattern.push_str("(.*)");
                } else {
                    let next_is_ws = matches!(
                        segments.get(i + 1),
                        Some(Segment::Literal(t)) if t.starts_with(char::is_whitespace)
                    );
                    pattern.push_str(if next_is_ws { r"(\S+)" } else { r"(\S+?)" });
                }
                fields.push(name.clone());
            }
        }
    }
    if fields.last().map(String::as_str) != Some(CONTENT_FIELD) {
        return Err(IngestError::MalformedFormat("format must end with <Content>".into()));
    }
    pattern.push('$');
    let field_pattern = Regex::new(&pattern)
        .map_err(|e| IngestError::MalformedFormat(format!("cannot compile format: {e}")))?;

    let mask_rules = mask_rules
        .iter()
        .map(|(p, r)| {
            let pattern = Regex::new(p.as_ref()).map_err(|source| IngestError::BadMask {
                pattern: p.as_ref().to_string(),
                source,
            })?;
            Ok(MaskRule { pattern, replacement: r.as_ref().to_string() })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;

    Ok(HeaderSchema {
        format_template: format_template.to_string(),
        fields,
        layout: segments,
        field_pattern,
        mask_rules,
    })
}

/// Optional masking rules for common variable fields: IPv4 addresses with
/// an optional port, hexadecimal literals, and standalone numbers.
pub fn recommended_masks() -> Vec<(String, String)> {
    [
        (r"(\d{1,3}\.){3}\d{1,3}(:\d+)?", "<*>"),
        (r"\b0[xX][0-9a-fA-F]+\b", "<*>"),
        (r"\b-?\d+(\.\d+)?\b", "<*>"),
    ]
    .into_iter()
    .map(|(p, r)| (p.to_string(), r.to_string()))
    .collect()
}

/// Split one raw line into headers and masked content tokens.
pub fn preprocess(line_id: u64, line: &str, schema: &HeaderSchema) -> Result<LogRecord, IngestError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let caps = schema
        .field_pattern
        .captures(line)
        .ok_or(IngestError::UnparsableLine { line_id })?;
    let mut headers = BTreeMap::new();
    let mut content = String::new();
    for (i, name) in schema.fields.iter().enumerate() {
        let value = caps.get(i + 1).map_or("", |m| m.as_str());
        if name == CONTENT_FIELD {
            content = value.trim().to_string();
        } else {
            headers.insert(name.clone(), value.to_string());
        }
    }
    let tokens: Vec<String> = schema.mask(&content).split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        return Err(IngestError::EmptyContent { line_id });
    }
    Ok(LogRecord { line_id, headers, content, tokens })
}

/// What to do with lines that fail [`preprocess`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum UnparsablePolicy {
    #[default]
    Skip,
    Abort,
}

#[derive(Debug, Clone, Default)]
pub struct Preprocessed {
    pub records: Vec<LogRecord>,
    pub skipped: usize,
}

/// Preprocess a whole source. Line ids are the 1-based line numbers, so
/// skipped lines leave gaps.
pub fn preprocess_lines<'a, I>(
    lines: I,
    schema: &HeaderSchema,
    policy: UnparsablePolicy,
) -> Result<Preprocessed, IngestError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = Preprocessed::default();
    for (i, line) in lines.into_iter().enumerate() {
        match preprocess(i as u64 + 1, line, schema) {
            Ok(rec) => out.records.push(rec),
            Err(e @ (IngestError::UnparsableLine { .. } | IngestError::EmptyContent { .. })) => {
                if policy == UnparsablePolicy::Abort {
                    return Err(e);
                }
                out.skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if out.skipped > 0 {
        log::warn!("skipped {} unparsable line(s)", out.skipped);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NO_MASKS: &[(&str, &str)] = &[];

    #[test]
    fn content_only_format() {
        let schema = compile_schema("<Content>", NO_MASKS).unwrap();
        assert_eq!(schema.fields(), ["Content"]);
        let rec = preprocess(1, "Load cfg.ini failed!", &schema).unwrap();
        assert_eq!(rec.tokens, ["Load", "cfg.ini", "failed!"]);
        assert!(rec.headers.is_empty());
    }

    #[test]
    fn hdfs_style_format() {
        let schema = compile_schema("<Date> <Time> <Pid> <Level> <Component>: <Content>", NO_MASKS).unwrap();
        assert_eq!(schema.fields().len(), 6);
        let line = "081109 203615 148 INFO dfs.DataNode$PacketResponder: PacketResponder 1 for block blk_38865049064139660 terminating";
        let rec = preprocess(7, line, &schema).unwrap();
        assert_eq!(rec.headers["Date"], "081109");
        assert_eq!(rec.headers["Time"], "203615");
        assert_eq!(rec.headers["Pid"], "148");
        assert_eq!(rec.headers["Level"], "INFO");
        assert_eq!(rec.headers["Component"], "dfs.DataNode$PacketResponder");
        assert_eq!(rec.tokens[0], "PacketResponder");
        assert_eq!(rec.tokens.len(), 6);
    }

    #[test]
    fn iiot_style_format_with_mask() {
        let schema = compile_schema("<Date> <Time> <SysId> <Eth> <Content>", &[(r"\d+", "<*>")]).unwrap();
        assert_eq!(schema.fields().len(), 5);
        assert_eq!(schema.mask_rules().len(), 1);
        let rec = preprocess(1, "2019-06-01 12:00:00 SYS1 ETH0 check data complete failed!", &schema).unwrap();
        assert_eq!(rec.headers["SysId"], "SYS1");
        assert_eq!(rec.headers["Eth"], "ETH0");
        assert_eq!(rec.headers["Date"], "2019-06-01");
        assert_eq!(rec.tokens, ["check", "data", "complete", "failed!"]);

        let rec = preprocess(2, "2019-06-01 12:00:00 SYS1 ETH0 pump 12 pressure 3", &schema).unwrap();
        assert_eq!(rec.tokens, ["pump", "<*>", "pressure", "<*>"]);
        assert_eq!(rec.content, "pump 12 pressure 3");
    }

    #[test]
    fn garbage_line_is_unparsable() {
        let schema = compile_schema("<Date> <Time> <Pid> <Level> <Component>: <Content>", NO_MASKS).unwrap();
        let err = preprocess(3, "java.lang.NullPointerException", &schema).unwrap_err();
        assert!(matches!(err, IngestError::UnparsableLine { line_id: 3 }));
        let err = preprocess(4, "\tat org.apache.Foo.bar(Foo.java:12)", &schema).unwrap_err();
        assert!(matches!(err, IngestError::UnparsableLine { line_id: 4 }));
    }

    #[test]
    fn malformed_formats() {
        for bad in ["", "<Date> <Time>", "<Content> <Date>", "<A> <A> <Content>", "<A <Content>", "<> <Content>", "<Content> tail"] {
            assert!(
                matches!(compile_schema(bad, NO_MASKS), Err(IngestError::MalformedFormat(_))),
                "{bad:?} should be rejected"
            );
        }
        assert!(matches!(
            compile_schema("<Content>", &[("(", "x")]),
            Err(IngestError::BadMask { .. })
        ));
    }

    #[test]
    fn mask_rules_apply_in_order() {
        let schema = compile_schema("<Content>", &[("blk_-?\\d+", "BLK"), ("\\d+", "N")]).unwrap();
        let rec = preprocess(1, "got blk_-42 size 7", &schema).unwrap();
        assert_eq!(rec.tokens, ["got", "BLK", "size", "N"]);
    }

    #[test]
    fn recommended_masks_hide_variables() {
        let schema = compile_schema("<Content>", &recommended_masks()).unwrap();
        let rec = preprocess(1, "Send 512 bytes to 10.0.0.12:5000 reg 0x1F", &schema).unwrap();
        assert_eq!(rec.tokens, ["Send", "<*>", "bytes", "to", "<*>", "reg", "<*>"]);
    }

    #[test]
    fn skip_and_count() {
        let schema = compile_schema("<Level> <Content>", NO_MASKS).unwrap();
        let lines = ["INFO started", "garbage", "", "WARN disk low"];
        let out = preprocess_lines(lines, &schema, UnparsablePolicy::Skip).unwrap();
        assert_eq!(out.skipped, 2);
        let ids: Vec<u64> = out.records.iter().map(|r| r.line_id).collect();
        assert_eq!(ids, [1, 4]);
        assert!(preprocess_lines(lines, &schema, UnparsablePolicy::Abort).is_err());
    }

    #[test]
    fn crlf_is_stripped() {
        let schema = compile_schema("<Content>", NO_MASKS).unwrap();
        let rec = preprocess(1, "a b\r\n", &schema).unwrap();
        assert_eq!(rec.tokens, ["a", "b"]);
    }
}
