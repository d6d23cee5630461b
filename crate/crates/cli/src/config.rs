//! TOML run configuration. Every key is optional; command-line flags win
//! over file values.
//!
//! ```toml
//! format = "<Date> <Time> <SysId> <Eth> <Content>"
//! recommended_masks = true
//! unparsable = "skip"          # or "abort"
//! epsilon = 0.4
//! grid = [0.27, 0.3, 0.4, 0.6, 0.83]
//! seed = 1
//! chain = "train.chain"
//!
//! [[mask]]
//! pattern = 'blk_-?\d+'
//! replacement = "blk_<*>"
//!
//! [corpus]
//! n_train = 10000
//! n_test = 1000
//! n_anomalies = 788
//!
//! [parsers]
//! enabled = ["Drain", "Spell", "IPLoM", "LogCluster"]
//! drain = { depth = 4, sim_threshold = 0.5, max_children = 100 }
//! spell = { lcs_threshold = 0.5 }
//! iplom = { partition_support_threshold = 0.0, lower_bound = 0.25, upper_bound = 0.9, cluster_goodness = 0.35 }
//! logcluster = { min_support = 10 }
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use logconform::eval::{SynthSpec, DEFAULT_GRID};
use logconform::ingest::{compile_schema, recommended_masks, HeaderSchema, UnparsablePolicy};
use logconform::parsers::{DrainParams, IplomParams, LogClusterParams, ParserParams, SpellParams};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format: Option<String>,
    #[serde(default)]
    pub recommended_masks: bool,
    #[serde(default, rename = "mask")]
    pub masks: Vec<MaskConfig>,
    pub unparsable: Option<String>,
    pub epsilon: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub chain: Option<PathBuf>,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub parsers: ParsersConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    pub pattern: String,
    pub replacement: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub n_anomalies: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { n_train: 10_000, n_test: 1_000, n_anomalies: 788 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParsersConfig {
    pub enabled: Option<Vec<String>>,
    pub drain: Option<DrainConfig>,
    pub spell: Option<SpellConfig>,
    pub iplom: Option<IplomConfig>,
    pub logcluster: Option<LogClusterConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrainConfig {
    pub depth: Option<usize>,
    pub sim_threshold: Option<f64>,
    pub max_children: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpellConfig {
    pub lcs_threshold: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IplomConfig {
    pub partition_support_threshold: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub cluster_goodness: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogClusterConfig {
    pub min_support: Option<usize>,
}

pub const DEFAULT_FORMAT: &str = "<Content>";
pub const DEFAULT_EPSILON: f64 = 0.4;
pub const DEFAULT_SEED: u64 = 1;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Check every value that does not depend on the subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        self.epsilon()?;
        self.grid()?;
        self.unparsable_policy()?;
        self.parsers()?;
        self.schema()?;
        Ok(())
    }

    pub fn format(&self) -> &str {
        self.format.as_deref().unwrap_or(DEFAULT_FORMAT)
    }

    pub fn schema(&self) -> Result<HeaderSchema, CliError> {
        let mut masks = if self.recommended_masks { recommended_masks() } else { Vec::new() };
        masks.extend(self.masks.iter().map(|m| (m.pattern.clone(), m.replacement.clone())));
        compile_schema(self.format(), &masks).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn unparsable_policy(&self) -> Result<UnparsablePolicy, CliError> {
        match self.unparsable.as_deref() {
            None | Some("skip") => Ok(UnparsablePolicy::Skip),
            Some("abort") => Ok(UnparsablePolicy::Abort),
            Some(other) => Err(CliError::Config(format!("unparsable must be `skip` or `abort`, got `{other}`"))),
        }
    }

    pub fn epsilon(&self) -> Result<f64, CliError> {
        let e = self.epsilon.unwrap_or(DEFAULT_EPSILON);
        check_epsilon(e)?;
        Ok(e)
    }

    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = self.grid.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec());
        if grid.is_empty() {
            return Err(CliError::Config("significance grid is empty".into()));
        }
        for &e in &grid {
            check_epsilon(e)?;
        }
        Ok(grid)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed(),
            n_train: self.corpus.n_train,
            n_test: self.corpus.n_test,
            n_anomalies: self.corpus.n_anomalies,
        }
    }

    /// Parameters of the enabled parsers, in the order given (all four by
    /// default).
    pub fn parsers(&self) -> Result<Vec<ParserParams>, CliError> {
        let names: Vec<String> = match &self.parsers.enabled {
            Some(names) => names.clone(),
            None => ParserParams::NAMES.iter().map(|n| n.to_string()).collect(),
        };
        if names.is_empty() {
            return Err(CliError::Config("no parser enabled".into()));
        }
        let mut out: Vec<ParserParams> = Vec::with_capacity(names.len());
        for name in &names {
            let p = self.parser(name)?;
            if out.iter().any(|q| q.name() == p.name()) {
                return Err(CliError::Config(format!("parser `{name}` enabled twice")));
            }
            p.validate().map_err(|e| CliError::Config(e.to_string()))?;
            out.push(p);
        }
        Ok(out)
    }

    fn parser(&self, name: &str) -> Result<ParserParams, CliError> {
        let cfg = &self.parsers;
        let p = match name.to_ascii_lowercase().as_str() {
            "drain" => {
                let d = DrainParams::default();
                let c = cfg.drain.clone();
                ParserParams::Drain(DrainParams {
                    depth: c.as_ref().and_then(|c| c.depth).unwrap_or(d.depth),
                    sim_threshold: c.as_ref().and_then(|c| c.sim_threshold).unwrap_or(d.sim_threshold),
                    max_children: c.as_ref().and_then(|c| c.max_children).unwrap_or(d.max_children),
                })
            }
            "spell" => {
                let d = SpellParams::default();
                ParserParams::Spell(SpellParams {
                    lcs_threshold: cfg.spell.as_ref().and_then(|c| c.lcs_threshold).unwrap_or(d.lcs_threshold),
                })
            }
            "iplom" => {
                let d = IplomParams::default();
                let c = cfg.iplom.clone();
                ParserParams::Iplom(IplomParams {
                    partition_support_threshold: c
                        .as_ref()
                        .and_then(|c| c.partition_support_threshold)
                        .unwrap_or(d.partition_support_threshold),
                    lower_bound: c.as_ref().and_then(|c| c.lower_bound).unwrap_or(d.lower_bound),
                    upper_bound: c.as_ref().and_then(|c| c.upper_bound).unwrap_or(d.upper_bound),
                    cluster_goodness: c.as_ref().and_then(|c| c.cluster_goodness).unwrap_or(d.cluster_goodness),
                })
            }
            "logcluster" => {
                let d = LogClusterParams::default();
                ParserParams::LogCluster(LogClusterParams {
                    min_support: cfg.logcluster.as_ref().and_then(|c| c.min_support).unwrap_or(d.min_support),
                })
            }
            _ => return Err(CliError::Config(format!("unknown parser `{name}`"))),
        };
        Ok(p)
    }
}

pub fn check_epsilon(e: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&e) {
        Ok(())
    } else {
        Err(CliError::Config(format!("significance level must lie in [0,1], got {e}")))
    }
}

/// Parse a comma-separated list of significance levels.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad significance level `{}`", s.trim())))
        })
        .collect()
}
