//! Samples, manifests, TSV/JSONL ingestion and the low-resource upsampling mix.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::write_atomic;
use crate::top::{align_leaves, parse_top, ParseTree, TopError, Utterance};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("line {line}: malformed parse: {source}")]
    MalformedParse {
        line: usize,
        #[source]
        source: TopError,
    },
    #[error("line {line}: {source}")]
    AlignmentFailed {
        line: usize,
        #[source]
        source: TopError,
    },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("upsampling factor must be at least 1")]
    InvalidFactor,
    #[error("invalid sample: {0}")]
    InvalidSample(#[from] SampleError),
}

impl DatasetError {
    /// Source line of the offending row or record, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            DatasetError::MalformedParse { line, .. }
            | DatasetError::AlignmentFailed { line, .. }
            | DatasetError::MalformedRow { line, .. }
            | DatasetError::MalformedRecord { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error(transparent)]
    Alignment(TopError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Alarm,
    Event,
    Messaging,
    Music,
    Navigation,
    Timer,
    Reminder,
    Weather,
}

impl Domain {
    pub const ALL: [Domain; 8] = [
        Domain::Alarm,
        Domain::Event,
        Domain::Messaging,
        Domain::Music,
        Domain::Navigation,
        Domain::Timer,
        Domain::Reminder,
        Domain::Weather,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Alarm => "alarm",
            Domain::Event => "event",
            Domain::Messaging => "messaging",
            Domain::Music => "music",
            Domain::Navigation => "navigation",
            Domain::Timer => "timer",
            Domain::Reminder => "reminder",
            Domain::Weather => "weather",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_lowercase();
        Domain::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown domain `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    /// Guesses the split from a file name such as `weather_eval.tsv`.
    fn infer_from_path(path: &Path) -> Option<Split> {
        let stem = path.file_stem()?.to_str()?.to_lowercase();
        let last = stem.rsplit(['_', '-', '.']).next()?;
        match last {
            "train" => Some(Split::Train),
            "valid" | "eval" | "dev" => Some(Split::Valid),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "eval" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One (utterance, parse) training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    id: String,
    domain: Domain,
    utterance: Utterance,
    parse: ParseTree,
    split: Split,
    audio_path: Option<String>,
    provenance: Option<serde_json::Value>,
}

impl Sample {
    /// Validates that the utterance is non-empty and that the parse leaves
    /// align onto it.
    pub fn new(
        id: impl Into<String>,
        domain: Domain,
        utterance: Utterance,
        parse: ParseTree,
        split: Split,
    ) -> Result<Self, SampleError> {
        if utterance.is_empty() {
            return Err(SampleError::EmptyUtterance);
        }
        align_leaves(&parse, &utterance).map_err(SampleError::Alignment)?;
        Ok(Sample {
            id: id.into(),
            domain,
            utterance,
            parse,
            split,
            audio_path: None,
            provenance: None,
        })
    }

    pub fn with_audio_path(mut self, path: Option<String>) -> Self {
        self.audio_path = path;
        self
    }

    pub fn with_provenance(mut self, provenance: Option<serde_json::Value>) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn utterance(&self) -> &Utterance {
        &self.utterance
    }
    pub fn parse(&self) -> &ParseTree {
        &self.parse
    }
    pub fn split(&self) -> Split {
        self.split
    }
    pub fn audio_path(&self) -> Option<&str> {
        self.audio_path.as_deref()
    }
    pub fn provenance(&self) -> Option<&serde_json::Value> {
        self.provenance.as_ref()
    }
}

/// Ordered samples with unique ids.
///
/// `provenance` describes where the manifest came from and is not part of
/// equality.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    samples: Vec<Sample>,
    provenance: String,
}

impl PartialEq for Manifest {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
    }
}

impl Manifest {
    pub fn new(samples: Vec<Sample>, provenance: impl Into<String>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.id.as_str()) {
                return Err(DatasetError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Manifest {
            samples,
            provenance: provenance.into(),
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }
}

impl<'a> IntoIterator for &'a Manifest {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;
    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

#[derive(Debug, Clone)]
pub struct TsvOptions {
    pub utterance_column: String,
    pub parse_column: String,
    pub domain_column: String,
    /// Optional columns, used when present in the header.
    pub id_column: String,
    pub split_column: String,
    /// Split for rows without a split column; inferred from the file name when `None`.
    pub split: Option<Split>,
    pub strict: bool,
}

impl Default for TsvOptions {
    fn default() -> Self {
        TsvOptions {
            utterance_column: "utterance".into(),
            parse_column: "semantic_parse".into(),
            domain_column: "domain".into(),
            id_column: "id".into(),
            split_column: "split".into(),
            split: None,
            strict: true,
        }
    }
}

#[derive(Debug)]
pub struct TsvLoad {
    pub manifest: Manifest,
    /// Rows skipped in lenient mode.
    pub skipped: Vec<DatasetError>,
}

/// Loads a header-first, tab-separated file. In strict mode the first bad
/// row aborts the load; otherwise bad rows are collected in `skipped`.
pub fn load_tsv(path: &Path, options: &TsvOptions) -> Result<TsvLoad, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut reader = BufReader::new(file);

    let mut header = String::new();
    reader.read_line(&mut header).map_err(io_err)?;
    let columns: Vec<&str> = header.trim_end_matches(['\n', '\r']).split('\t').collect();
    let find = |name: &str| columns.iter().position(|c| c.trim() == name);
    let require = |name: &str| {
        find(name).ok_or_else(|| DatasetError::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let utt_col = require(&options.utterance_column)?;
    let parse_col = require(&options.parse_column)?;
    let domain_col = require(&options.domain_column)?;
    let id_col = find(&options.id_column);
    let split_col = find(&options.split_column);
    let default_split = options
        .split
        .or_else(|| Split::infer_from_path(path))
        .unwrap_or(Split::Train);
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    let mut seen_ids = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(io_err)?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let row = parse_tsv_row(
            &fields,
            line_no,
            &file_name,
            [utt_col, parse_col, domain_col],
            id_col,
            split_col,
            default_split,
        )
        .and_then(|s| {
            if seen_ids.insert(s.id.clone()) {
                Ok(s)
            } else {
                Err(DatasetError::MalformedRow {
                    line: line_no,
                    reason: format!("duplicate id `{}`", s.id),
                })
            }
        });
        match row {
            Ok(s) => samples.push(s),
            Err(e) if !options.strict => {
                log::warn!("{}: skipping {e}", path.display());
                skipped.push(e);
            }
            Err(e) => return Err(e),
        }
    }

    Ok(TsvLoad {
        manifest: Manifest::new(samples, path.display().to_string())?,
        skipped,
    })
}

fn parse_tsv_row(
    fields: &[&str],
    line: usize,
    file_name: &str,
    [utt_col, parse_col, domain_col]: [usize; 3],
    id_col: Option<usize>,
    split_col: Option<usize>,
    default_split: Split,
) -> Result<Sample, DatasetError> {
    let field = |i: usize| {
        fields.get(i).copied().ok_or_else(|| DatasetError::MalformedRow {
            line,
            reason: format!("expected at least {} fields, found {}", i + 1, fields.len()),
        })
    };
    let domain = Domain::from_str(field(domain_col)?).map_err(|reason| DatasetError::MalformedRow { line, reason })?;
    let utterance = Utterance::parse(field(utt_col)?).map_err(|e| DatasetError::MalformedRow {
        line,
        reason: e.to_string(),
    })?;
    let parse = parse_top(field(parse_col)?).map_err(|source| DatasetError::MalformedParse { line, source })?;
    let split = match split_col.and_then(|i| fields.get(i)) {
        Some(s) if !s.trim().is_empty() => {
            Split::from_str(s).map_err(|reason| DatasetError::MalformedRow { line, reason })?
        }
        _ => default_split,
    };
    let id = match id_col.and_then(|i| fields.get(i)) {
        Some(s) if !s.trim().is_empty() => s.trim().to_string(),
        _ => format!("{file_name}:{line}"),
    };
    Sample::new(id, domain, utterance, parse, split).map_err(|e| match e {
        SampleError::Alignment(source) => DatasetError::AlignmentFailed { line, source },
        SampleError::EmptyUtterance => DatasetError::MalformedRow {
            line,
            reason: e.to_string(),
        },
    })
}

/// On-disk JSONL record.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SampleRecord {
    id: String,
    domain: Domain,
    utterance: String,
    parse: String,
    split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audio_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

impl From<&Sample> for SampleRecord {
    fn from(s: &Sample) -> Self {
        SampleRecord {
            id: s.id.clone(),
            domain: s.domain,
            utterance: s.utterance.to_string(),
            parse: s.parse.serialize(),
            split: s.split,
            audio_path: s.audio_path.clone(),
            provenance: s.provenance.clone(),
        }
    }
}

fn record_to_sample(rec: SampleRecord, line: usize) -> Result<Sample, DatasetError> {
    let malformed = |reason: String| DatasetError::MalformedRecord { line, reason };
    let utterance = Utterance::parse(&rec.utterance).map_err(|e| malformed(e.to_string()))?;
    let parse = parse_top(&rec.parse).map_err(|e| malformed(format!("parse: {e}")))?;
    Sample::new(rec.id, rec.domain, utterance, parse, rec.split)
        .map(|s| s.with_audio_path(rec.audio_path).with_provenance(rec.provenance))
        .map_err(|e| malformed(e.to_string()))
}

pub fn sample_to_json(sample: &Sample) -> String {
    serde_json::to_string(&SampleRecord::from(sample)).expect("sample record serializes")
}

pub fn write_jsonl<W: Write>(manifest: &Manifest, mut out: W) -> std::io::Result<()> {
    for s in manifest {
        writeln!(out, "{}", sample_to_json(s))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R, provenance: &str) -> Result<Manifest, DatasetError> {
    let mut samples = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: PathBuf::from(provenance),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        samples.push(record_to_sample(rec, line_no)?);
    }
    Manifest::new(samples, provenance)
}

pub fn load_jsonl(path: &Path) -> Result<Manifest, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_jsonl(BufReader::new(file), &path.display().to_string())
}

/// Writes the manifest atomically (temp file, then rename).
pub fn save_jsonl(manifest: &Manifest, path: &Path) -> Result<(), DatasetError> {
    write_atomic(path, |w| write_jsonl(manifest, w)).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads `.tsv` files as TSV and everything else as JSONL.
pub fn load_any(path: &Path, tsv: &TsvOptions) -> Result<Manifest, DatasetError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("tsv") => load_tsv(path, tsv).map(|l| l.manifest),
        _ => load_jsonl(path),
    }
}

/// Order-preserving subset of samples whose domain is in `domains`.
pub fn filter_domain(manifest: &Manifest, domains: &[Domain]) -> Manifest {
    Manifest {
        samples: manifest
            .samples
            .iter()
            .filter(|s| domains.contains(&s.domain))
            .cloned()
            .collect(),
        provenance: format!("{} | domains {:?}", manifest.provenance, domains),
    }
}

/// Mixes every held-in sample once with `factor` copies of each low-resource
/// sample, then shuffles deterministically by `seed`. Copy 0 keeps its id;
/// copies `k >= 1` are suffixed `#k`.
pub fn upsample_mix(
    held_in: &Manifest,
    low_resource: &Manifest,
    factor: usize,
    seed: u64,
) -> Result<Manifest, DatasetError> {
    if factor == 0 {
        return Err(DatasetError::InvalidFactor);
    }
    let mut samples = Vec::with_capacity(held_in.len() + factor * low_resource.len());
    samples.extend(held_in.samples.iter().cloned());
    for s in &low_resource.samples {
        samples.push(s.clone());
        for k in 1..factor {
            samples.push(s.clone().with_id(format!("{}#{k}", s.id)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    samples.shuffle(&mut rng);
    Manifest::new(
        samples,
        format!(
            "mix(held_in={}, low={}, factor={factor}, seed={seed})",
            held_in.provenance, low_resource.provenance
        ),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestStats {
    pub samples: usize,
    pub by_domain: BTreeMap<String, usize>,
    pub by_split: BTreeMap<String, usize>,
    pub mean_utterance_tokens: f64,
    pub mean_parse_leaves: f64,
    pub intents: usize,
    pub slot_labels: usize,
}

pub fn stats(manifest: &Manifest) -> ManifestStats {
    use crate::top::{Child, Node, NodeKind};

    fn walk(node: &Node, intents: &mut HashSet<String>, slots: &mut HashSet<String>) {
        let name = node.label().name().to_string();
        match node.label().kind() {
            NodeKind::Intent => intents.insert(name),
            NodeKind::Slot => slots.insert(name),
        };
        for child in node.children() {
            if let Child::Node(n) = child {
                walk(n, intents, slots);
            }
        }
    }

    let mut by_domain = BTreeMap::new();
    let mut by_split = BTreeMap::new();
    let mut intents = HashSet::new();
    let mut slots = HashSet::new();
    let (mut tokens, mut leaves) = (0usize, 0usize);
    for s in manifest {
        *by_domain.entry(s.domain.to_string()).or_insert(0) += 1;
        *by_split.entry(s.split.to_string()).or_insert(0) += 1;
        tokens += s.utterance.len();
        leaves += s.parse.leaves().len();
        walk(s.parse.root(), &mut intents, &mut slots);
    }
    let n = manifest.len().max(1) as f64;
    ManifestStats {
        samples: manifest.len(),
        by_domain,
        by_split,
        mean_utterance_tokens: tokens as f64 / n,
        mean_parse_leaves: leaves as f64 / n,
        intents: intents.len(),
        slot_labels: slots.len(),
    }
}
