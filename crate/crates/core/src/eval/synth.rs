//! Seeded synthetic corpora.
//!
//! The industrial corpus mimics an oil-field control system: a dozen event
//! families with variable fields, trained on normal lines only, plus a test
//! slice with planted anomalies. The HDFS corpus mimics the public 2k
//! sample and is all normal.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::detector::Label;

pub const IIOT_FORMAT: &str = "<Date> <Time> <SysId> <Eth> <Content>";
pub const HDFS_FORMAT: &str = "<Date> <Time> <Pid> <Level> <Component>: <Content>";

/// Block ids first, then the generic masks.
pub fn hdfs_masks() -> Vec<(String, String)> {
    let mut masks = vec![(r"blk_-?\d+".to_string(), "blk_<*>".to_string())];
    masks.extend(crate::ingest::recommended_masks());
    masks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_anomalies: usize,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n_anomalies > self.n_test {
            return Err(EvalError::InvalidSpec(format!(
                "{} anomalies do not fit in {} test lines",
                self.n_anomalies, self.n_test
            )));
        }
        if self.n_train == 0 {
            return Err(EvalError::InvalidSpec("training slice is empty".into()));
        }
        Ok(())
    }
}

/// Raw lines of a training slice (all normal) and a labeled test slice.
/// Label keys are 1-based line numbers within the test slice.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub format: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub labels: BTreeMap<u64, Label>,
}

impl LabeledCorpus {
    pub fn anomalies(&self) -> usize {
        self.labels.values().filter(|l| **l == Label::Anomaly).count()
    }
}

const INI_NAMES: [&str; 8] = ["pump", "valve", "sensor", "flow", "tank", "motor", "relay", "meter"];
const CONTROLLERS: [&str; 4] = ["PLC-A", "PLC-B", "PLC-C", "RTU-main"];
const STATIONS: [&str; 6] = ["north", "south", "east", "west", "central", "depot"];
const USERS: [&str; 5] = ["admin", "operator", "maint", "viewer", "scada"];
const NOTE_WORDS: [&str; 24] = [
    "checked", "manifold", "seal", "replaced", "gauge", "looks", "stable", "after", "restart", "shift",
    "handover", "minor", "leak", "fixed", "wellhead", "inspection", "done", "cleaned", "filter", "noise",
    "bearing", "lubricated", "calibrated", "reset",
];

struct Gen {
    rng: ChaCha8Rng,
    seconds: u32,
}

impl Gen {
    fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), seconds: 6 * 3600 }
    }

    fn ip(&mut self) -> String {
        format!("10.{}.{}.{}", self.rng.random_range(0..4), self.rng.random_range(0..256), self.rng.random_range(1..255))
    }

    fn pick<'a>(&mut self, xs: &'a [&'a str]) -> &'a str {
        xs.choose(&mut self.rng).expect("non-empty")
    }

    fn iiot_header(&mut self) -> String {
        self.seconds += self.rng.random_range(0..3);
        let day = 14 + self.seconds / 86_400;
        let s = self.seconds % 86_400;
        format!(
            "2019-03-{day:02} {:02}:{:02}:{:02} SYS-{} eth{}",
            s / 3600,
            s % 3600 / 60,
            s % 60,
            self.rng.random_range(1..5),
            self.rng.random_range(0..2)
        )
    }

    /// Content of one normal industrial event.
    fn iiot_event(&mut self, kind: usize) -> String {
        let r = &mut self.rng;
        match kind {
            0 => format!("Load {}.ini ok", INI_NAMES.choose(r).unwrap()),
            1 => "check data complete successfully".to_string(),
            2 => format!("Pump {} pressure {:.1} bar", r.random_range(1..13), r.random_range(20.0..80.0)),
            3 => format!("Valve V{} opened by controller {}", r.random_range(100..400), CONTROLLERS.choose(r).unwrap()),
            4 => {
                let ip = self.ip();
                format!("Send heartbeat to {ip}")
            }
            5 => format!("Temperature {}C exceeds warning threshold", r.random_range(60..95)),
            6 => format!(
                "Connection established with station {} on port {}",
                STATIONS.choose(r).unwrap(),
                r.random_range(1024..1100)
            ),
            7 => format!("Flow rate {:.2} m3/h within limits", r.random_range(5.0..50.0)),
            8 => format!("Backup of {}.ini finished in {} ms", INI_NAMES.choose(r).unwrap(), r.random_range(5..900)),
            9 => {
                let user = self.pick(&USERS).to_string();
                let ip = self.ip();
                format!("User {user} logged in from {ip}")
            }
            10 => format!("Alarm cleared for sensor S-{}", r.random_range(1..60)),
            11 => format!("Write register 0x{:04X} value {}", r.random_range(0..4096), r.random_range(0..65536)),
            _ => {
                let n = r.random_range(1..5);
                let words: Vec<&str> = (0..n).map(|_| *NOTE_WORDS.choose(r).unwrap()).collect();
                format!("Operator note: {}", words.join(" "))
            }
        }
    }

    fn iiot_line(&mut self, content: &str) -> String {
        format!("{} {content}", self.iiot_header())
    }
}

/// Relative frequency of each normal industrial event; the last entry is
/// the free-text operator note.
const IIOT_WEIGHTS: [u32; 13] = [10, 9, 12, 8, 12, 6, 7, 9, 5, 6, 5, 7, 2];
const MUTANT_SOURCES: [usize; 12] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

/// A normal event whose token structure is damaged: a token dropped,
/// duplicated, swapped with its neighbour, or replaced by an error marker.
fn mutant(g: &mut Gen) -> String {
    let kind = *MUTANT_SOURCES.choose(&mut g.rng).unwrap();
    let content = g.iiot_event(kind);
    let mut tokens: Vec<String> = content.split(' ').map(str::to_string).collect();
    let n = tokens.len();
    let at = g.rng.random_range(0..n);
    match g.rng.random_range(0..4) {
        0 => {
            tokens.remove(at);
        }
        1 => tokens.insert(at, tokens[at].clone()),
        2 => {
            let j = if at + 1 < n { at + 1 } else { at - 1 };
            if tokens[at] == tokens[j] {
                tokens.insert(at, "ERR".to_string());
            } else {
                tokens.swap(at, j);
            }
        }
        _ => tokens.insert(at, "ERR".to_string()),
    }
    tokens.join(" ")
}

/// Industrial corpus: `n_train` normal lines, then `n_test` lines of which
/// `n_anomalies` are planted at random positions. A tenth of the anomalies
/// are structural mutants; the rest are split between failed config loads
/// and failed data checks.
pub fn synth_iiot(spec: &SynthSpec) -> Result<LabeledCorpus, EvalError> {
    spec.validate()?;
    let mut g = Gen::new(spec.seed);
    let weights = WeightedIndex::new(IIOT_WEIGHTS).expect("static weights");

    let mut train = Vec::with_capacity(spec.n_train);
    for _ in 0..spec.n_train {
        let kind = weights.sample(&mut g.rng);
        let content = g.iiot_event(kind);
        train.push(g.iiot_line(&content));
    }

    let mut is_anomaly = vec![false; spec.n_test];
    for i in rand::seq::index::sample(&mut g.rng, spec.n_test, spec.n_anomalies) {
        is_anomaly[i] = true;
    }
    let n_mutants = spec.n_anomalies / 10;
    let mut kinds: Vec<u8> = (0..spec.n_anomalies)
        .map(|i| if i < n_mutants { 2 } else if (i - n_mutants) % 2 == 0 { 0 } else { 1 })
        .collect();
    kinds.shuffle(&mut g.rng);
    let mut kinds = kinds.into_iter();

    let mut test = Vec::with_capacity(spec.n_test);
    let mut labels = BTreeMap::new();
    for (i, &anomalous) in is_anomaly.iter().enumerate() {
        let content = if anomalous {
            match kinds.next().expect("one kind per anomaly") {
                0 => format!("Load {}.ini failed!", g.pick(&INI_NAMES)),
                1 => "check data complete failed!".to_string(),
                _ => mutant(&mut g),
            }
        } else {
            let kind = weights.sample(&mut g.rng);
            g.iiot_event(kind)
        };
        test.push(g.iiot_line(&content));
        labels.insert(i as u64 + 1, if anomalous { Label::Anomaly } else { Label::Normal });
    }
    Ok(LabeledCorpus { format: IIOT_FORMAT.to_string(), train, test, labels })
}

fn blk(r: &mut ChaCha8Rng) -> String {
    let id: i64 = r.random_range(1_000_000_000_000_000_000..i64::MAX);
    if r.random_bool(0.5) {
        format!("blk_-{id}")
    } else {
        format!("blk_{id}")
    }
}

/// (component, level, weight) of each HDFS event family.
const HDFS_EVENTS: [(&str, &str, u32); 14] = [
    ("dfs.DataNode$DataXceiver", "INFO", 14),
    ("dfs.DataNode$PacketResponder", "INFO", 14),
    ("dfs.DataNode$PacketResponder", "INFO", 14),
    ("dfs.FSNamesystem", "INFO", 14),
    ("dfs.FSNamesystem", "INFO", 6),
    ("dfs.DataBlockScanner", "INFO", 3),
    ("dfs.FSDataset", "INFO", 10),
    ("dfs.FSNamesystem", "INFO", 10),
    ("dfs.DataNode$DataXceiver", "INFO", 5),
    ("dfs.DataNode$DataXceiver", "WARN", 4),
    ("dfs.DataNode", "INFO", 1),
    ("dfs.FSNamesystem", "INFO", 1),
    ("dfs.DataNode$DataTransfer", "INFO", 1),
    ("dfs.FSNamesystem", "INFO", 1),
];

fn hdfs_content(g: &mut Gen, kind: usize) -> String {
    let b = blk(&mut g.rng);
    match kind {
        0 => {
            let (src, dst) = (g.ip(), g.ip());
            format!("Receiving block {b} src: /{src}:{} dest: /{dst}:50010", g.rng.random_range(30000..60000))
        }
        1 => {
            let ip = g.ip();
            format!("Received block {b} of size {} from /{ip}", g.rng.random_range(1000..67108864))
        }
        2 => format!("PacketResponder {} for block {b} terminating", g.rng.random_range(0..3)),
        3 => {
            let ip = g.ip();
            format!(
                "BLOCK* NameSystem.addStoredBlock: blockMap updated: {ip}:50010 is added to {b} size {}",
                g.rng.random_range(1000..67108864)
            )
        }
        4 => {
            let task = g.rng.random_range(0..2000);
            format!("BLOCK* NameSystem.allocateBlock: /user/root/rand/_temporary/_task_200811092030_0001_m_{task:06}_0/part-{task:05}. {b}")
        }
        5 => format!("Verification succeeded for {b}"),
        6 => format!("Deleting block {b} file /mnt/hadoop/dfs/data/current/subdir{}/{b}", g.rng.random_range(0..64)),
        7 => {
            let ip = g.ip();
            format!("BLOCK* NameSystem.delete: {b} is added to invalidSet of {ip}:50010")
        }
        8 => {
            let (a, c) = (g.ip(), g.ip());
            format!("{a}:50010 Served block {b} to /{c}")
        }
        9 => {
            let (a, c) = (g.ip(), g.ip());
            format!("{a}:50010:Got exception while serving {b} to /{c}:")
        }
        10 => format!("Receiving empty packet for block {b}"),
        11 => {
            let (a, c) = (g.ip(), g.ip());
            format!("BLOCK* ask {a}:50010 to replicate {b} to datanode(s) {c}:50010")
        }
        12 => {
            let (a, c) = (g.ip(), g.ip());
            format!("{a}:50010:Transmitted block {b} to /{c}:50010")
        }
        _ => format!("BLOCK* Removing block {b} from neededReplications as it does not belong to any file."),
    }
}

/// `n` normal HDFS lines. Every event family occurs at least ten times
/// when `n` allows it.
pub fn synth_hdfs(seed: u64, n: usize) -> Vec<String> {
    let mut g = Gen::new(seed);
    let total_w: u32 = HDFS_EVENTS.iter().map(|e| e.2).sum();
    let floor = if n >= 10 * HDFS_EVENTS.len() { 10 } else { 0 };
    let mut counts: Vec<usize> =
        HDFS_EVENTS.iter().map(|e| (n * e.2 as usize / total_w as usize).max(floor)).collect();
    // trim or pad the most frequent family to hit n exactly
    let sum: usize = counts.iter().sum();
    if sum > n {
        counts[0] = counts[0].saturating_sub(sum - n);
    } else {
        counts[0] += n - sum;
    }
    let mut kinds: Vec<usize> = counts.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat_n(k, c)).collect();
    kinds.truncate(n);
    kinds.shuffle(&mut g.rng);

    let mut lines = Vec::with_capacity(n);
    let mut clock = 203_500u32;
    for kind in kinds {
        clock += g.rng.random_range(0..2);
        let (component, level, _) = HDFS_EVENTS[kind];
        let content = hdfs_content(&mut g, kind);
        let pid = g.rng.random_range(13..40_000);
        lines.push(format!("081109 {clock:06} {pid} {level} {component}: {content}"));
    }
    lines
}

/// Write `train.log`, `test.log` and `test.labels.csv` into `dir`.
pub fn write_corpus(dir: impl AsRef<Path>, corpus: &LabeledCorpus) -> Result<(), EvalError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let join = |lines: &[String]| {
        let mut s = lines.join("\n");
        if !lines.is_empty() {
            s.push('\n');
        }
        s
    };
    fs::write(dir.join("train.log"), join(&corpus.train))?;
    fs::write(dir.join("test.log"), join(&corpus.test))?;
    let mut labels = String::from("line_id,label\n");
    for (id, l) in &corpus.labels {
        let _ = writeln!(labels, "{id},{l}");
    }
    fs::write(dir.join("test.labels.csv"), labels)?;
    Ok(())
}

/// Parse a `line_id,label` file. A header line is optional.
pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<u64, Label>, EvalError> {
    let text = fs::read_to_string(path)?;
    let mut labels = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("line_id")) {
            continue;
        }
        let bad = |reason: String| EvalError::MalformedLabels { line: i + 1, reason };
        let (id, label) = line.split_once(',').ok_or_else(|| bad("expected `line_id,label`".into()))?;
        let id: u64 = id.trim().parse().map_err(|_| bad(format!("bad line id `{id}`")))?;
        let label: Label = label.parse().map_err(bad)?;
        if labels.insert(id, label).is_some() {
            return Err(bad(format!("duplicate line id {id}")));
        }
    }
    Ok(labels)
}

/// Read a corpus written by [`write_corpus`].
pub fn read_corpus(dir: impl AsRef<Path>, format: &str) -> Result<LabeledCorpus, EvalError> {
    let dir = dir.as_ref();
    let lines = |name: &str| -> Result<Vec<String>, EvalError> {
        Ok(fs::read_to_string(dir.join(name))?.lines().map(str::to_string).collect())
    };
    Ok(LabeledCorpus {
        format: format.to_string(),
        train: lines("train.log")?,
        test: lines("test.log")?,
        labels: read_labels(dir.join("test.labels.csv"))?,
    })
}
