use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use logconform::conformal::{BundleError, ModelBundle};
use logconform::eval::{
    self, hdfs_masks, render_aligned, render_csv, significance_sweep, synth_hdfs, synth_iiot, EvalError,
    HDFS_FORMAT, IIOT_FORMAT,
};
use logconform::ingest::{preprocess_lines, recommended_masks, verify_chain as verify, ChainStore, LogRecord};
use logconform::{calibrate, detect_batch, fit, CalibrationModel, DetectorConfig, HeaderSchema, Label};

use crate::config::{check_epsilon, parse_grid, RunConfig};
use crate::error::CliError;

/// Load the config file (if any) and apply the `--format` override.
pub fn load(config: Option<PathBuf>, format: Option<String>) -> Result<RunConfig, CliError> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(&path)?,
        None => RunConfig::default(),
    };
    if format.is_some() {
        cfg.format = format;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Write `bytes` to a sibling temp file and rename it over `path`.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.partial"));
    let res = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn preprocess_text(text: &str, schema: &HeaderSchema, cfg: &RunConfig) -> Result<(Vec<LogRecord>, usize), CliError> {
    let pre = preprocess_lines(text.lines(), schema, cfg.unparsable_policy()?)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok((pre.records, pre.skipped))
}

fn train_models(cfg: &RunConfig, records: &[LogRecord]) -> Result<Vec<CalibrationModel>, CliError> {
    if records.is_empty() {
        return Err(CliError::Data("training corpus is empty".into()));
    }
    cfg.parsers()?
        .iter()
        .map(|p| {
            let ts = fit(p, records).map_err(|e| CliError::Data(e.to_string()))?;
            calibrate(ts, records).map_err(|e| CliError::Data(e.to_string()))
        })
        .collect()
}

pub fn train(cfg: &RunConfig, input: &Path, model: &Path, chain: Option<PathBuf>) -> Result<ExitCode, CliError> {
    let schema = cfg.schema()?;
    let text = read_input(input)?;
    let (records, skipped) = preprocess_text(&text, &schema, cfg)?;
    let models = train_models(cfg, &records)?;

    if let Some(path) = chain.or_else(|| cfg.chain.clone()) {
        let mut store = ChainStore::open(&path).map_err(|e| CliError::Data(e.to_string()))?;
        for r in &records {
            store.append(r).map_err(|e| CliError::Data(e.to_string()))?;
        }
        store.sync().map_err(|e| CliError::Data(e.to_string()))?;
    }

    ModelBundle::new(models.clone()).save(model).map_err(|e| match e {
        BundleError::Io(io) => CliError::Io(io),
        other => CliError::Bundle(other.to_string()),
    })?;
    let summary: Vec<String> =
        models.iter().map(|m| format!("{}={}", m.parser_name(), m.template_set().len())).collect();
    println!("records={} skipped={} templates: {}", records.len(), skipped, summary.join(" "));
    Ok(ExitCode::SUCCESS)
}

fn load_bundle(path: &Path) -> Result<ModelBundle, CliError> {
    ModelBundle::load(path).map_err(|e| CliError::Bundle(format!("{}: {e}", path.display())))
}

pub fn detect(
    cfg: &RunConfig,
    input: &Path,
    model: &Path,
    epsilon: Option<f64>,
    out: Option<&Path>,
    all: bool,
) -> Result<ExitCode, CliError> {
    let epsilon = match epsilon {
        Some(e) => {
            check_epsilon(e)?;
            e
        }
        None => cfg.epsilon()?,
    };
    let schema = cfg.schema()?;
    let text = read_input(input)?;
    let bundle = load_bundle(model)?;
    if bundle.models.is_empty() {
        return Err(CliError::Bundle("bundle holds no parser".into()));
    }
    let (records, skipped) = preprocess_text(&text, &schema, cfg)?;
    let det = DetectorConfig::new(epsilon).map_err(|e| CliError::Config(e.to_string()))?;

    let mut report = String::new();
    let mut alarms = 0usize;
    for v in detect_batch(&bundle.models, &records, det) {
        let v = v.map_err(|e| CliError::Data(e.to_string()))?;
        if v.label == Label::Anomaly {
            alarms += 1;
        }
        if all || v.label == Label::Anomaly {
            report.push_str(&v.to_line());
            report.push('\n');
        }
    }
    emit(out, &report)?;
    let summary = format!("records={} alarms={} skipped={} epsilon={}", records.len(), alarms, skipped, epsilon);
    if out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(ExitCode::SUCCESS)
}

fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::Io(io) => CliError::Config(io.to_string()),
        EvalError::InvalidSpec(_) | EvalError::Detect(_) => CliError::Config(e.to_string()),
        EvalError::LabelMismatch(_) | EvalError::MalformedLabels { .. } => CliError::Data(e.to_string()),
    }
}

pub fn eval(
    cfg: &RunConfig,
    input: Option<&Path>,
    grid: Option<&str>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let grid = match grid {
        Some(text) => {
            let g = parse_grid(text)?;
            g.iter().try_for_each(|&e| check_epsilon(e))?;
            g
        }
        None => cfg.grid()?,
    };
    let (corpus, schema) = match input {
        Some(dir) => (eval::read_corpus(dir, cfg.format()).map_err(eval_error)?, cfg.schema()?),
        None => {
            let mut spec = cfg.synth_spec();
            if let Some(s) = seed {
                spec.seed = s;
            }
            let corpus = synth_iiot(&spec).map_err(eval_error)?;
            let mut synth_cfg = cfg.clone();
            synth_cfg.format.get_or_insert_with(|| IIOT_FORMAT.to_string());
            synth_cfg.recommended_masks = true;
            (corpus, synth_cfg.schema()?)
        }
    };

    let (train, _) = preprocess_text(&corpus.train.join("\n"), &schema, cfg)?;
    let (test, skipped) = preprocess_text(&corpus.test.join("\n"), &schema, cfg)?;
    if skipped > 0 {
        return Err(CliError::Data(format!("{skipped} test line(s) could not be parsed")));
    }
    let models = train_models(cfg, &train)?;
    let rows = significance_sweep(&models, &test, &corpus.labels, &grid).map_err(eval_error)?;
    emit(out, &render_csv(&rows))?;
    if out.is_some() {
        print!("{}", render_aligned(&rows));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn verify_chain(input: &Path) -> Result<ExitCode, CliError> {
    if !input.exists() {
        return Err(CliError::Config(format!("{} does not exist", input.display())));
    }
    let report = verify(input).map_err(|e| CliError::Data(e.to_string()))?;
    if report.valid {
        println!("valid entries={}", report.entries);
        Ok(ExitCode::SUCCESS)
    } else {
        let bad = report.first_bad_index.map_or_else(|| "?".to_string(), |i| i.to_string());
        println!("invalid entries={} first_bad_index={bad}", report.entries);
        Ok(ExitCode::from(3))
    }
}

fn toml_string(s: &str) -> String {
    format!("'{s}'")
}

pub fn synth(cfg: &RunConfig, out: &Path, seed: Option<u64>, hdfs: bool, lines: usize) -> Result<ExitCode, CliError> {
    let seed = seed.unwrap_or_else(|| cfg.seed());
    fs::create_dir_all(out)?;
    let (format, masks) = if hdfs {
        let text = synth_hdfs(seed, lines).join("\n") + "\n";
        write_atomic(&out.join("train.log"), text.as_bytes())?;
        (HDFS_FORMAT, hdfs_masks())
    } else {
        let mut spec = cfg.synth_spec();
        spec.seed = seed;
        let corpus = synth_iiot(&spec).map_err(eval_error)?;
        eval::write_corpus(out, &corpus).map_err(eval_error)?;
        (IIOT_FORMAT, recommended_masks())
    };
    let mut config = format!("format = {}\nunparsable = 'skip'\nseed = {seed}\n", toml_string(format));
    for (pattern, replacement) in masks {
        config.push_str(&format!(
            "\n[[mask]]\npattern = {}\nreplacement = {}\n",
            toml_string(&pattern),
            toml_string(&replacement)
        ));
    }
    write_atomic(&out.join("logconform.toml"), config.as_bytes())?;
    println!("wrote corpus to {}", out.display());
    Ok(ExitCode::SUCCESS)
}
