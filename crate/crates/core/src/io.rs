//! File formats.
//!
//! * Embeddings, TSV: `id<TAB>v1<TAB>...<TAB>vd` per line.
//! * Embeddings, binary: magic `PSDAEMB1`, `u32` dimension, `u64` record
//!   count, then per record a `u16` id length, the UTF-8 id bytes and `dim`
//!   `f32` coordinates. All integers and floats are little-endian.
//! * Training labels: `segment_id<TAB>speaker_id`.
//! * Enrollment map: `model_id seg1 [seg2 ...]`.
//! * Trials: `enroll_id test_id [tar|non]`.
//! * Scores: `enroll_id test_id llr [tar|non]`.
//! * Model: a TOML document tagged `format = "psda-1"`.
//!
//! Blank lines are ignored in every text format. All writes go through a
//! temporary file in the destination directory and are renamed into place.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::model::{PsdaModel, SideStats};
use crate::scoring::{Label, ScoreReport, ScoredTrial};
use crate::metrics::DetPoint;
use crate::vmf::UnitVec;
use crate::{Error, Result};

pub const BIN_MAGIC: &[u8; 8] = b"PSDAEMB1";
pub const MODEL_FORMAT: &str = "psda-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Tsv,
    Bin,
}

impl EmbeddingFormat {
    /// `.bin` means binary, anything else TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => EmbeddingFormat::Bin,
            _ => EmbeddingFormat::Tsv,
        }
    }
}

/// Embeddings keyed by unique string ids.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    ids: Vec<String>,
    vectors: Vec<UnitVec>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, id: String, v: UnitVec) -> Result<()> {
        if let Some(first) = self.vectors.first() {
            if first.dim() != v.dim() {
                return Err(Error::Data(format!(
                    "embedding '{id}' has dimension {}, expected {}",
                    v.dim(),
                    first.dim()
                )));
            }
        }
        if self.index.contains_key(&id) {
            return Err(Error::Data(format!("duplicate embedding id '{id}'")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.vectors.push(v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Dimension of the stored vectors, `None` when empty.
    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(UnitVec::dim)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[UnitVec] {
        &self.vectors
    }

    pub fn get(&self, id: &str) -> Option<&UnitVec> {
        self.index.get(id).map(|&i| &self.vectors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &UnitVec)> {
        self.ids.iter().map(String::as_str).zip(&self.vectors)
    }

    /// Sufficient statistics of the listed embeddings.
    pub fn stats<S: AsRef<str>>(&self, ids: &[S]) -> Result<SideStats> {
        let vs = ids
            .iter()
            .map(|id| {
                self.get(id.as_ref())
                    .ok_or_else(|| Error::Data(format!("unknown embedding id '{}'", id.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        SideStats::from_vecs(vs)
    }

    pub fn load(path: &Path, format: EmbeddingFormat) -> Result<Self> {
        match format {
            EmbeddingFormat::Tsv => Self::load_tsv(path),
            EmbeddingFormat::Bin => Self::load_bin(path),
        }
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut table = EmbeddingTable::new();
        for (lineno, line) in numbered_lines(&text) {
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default().trim();
            if id.is_empty() {
                return Err(Error::parse(path, lineno, "missing embedding id"));
            }
            let coords = fields
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| {
                        Error::parse(path, lineno, format!("embedding '{id}': bad number '{f}'"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let v = UnitVec::new(coords)
                .map_err(|e| Error::parse(path, lineno, format!("embedding '{id}': {e}")))?;
            table
                .push(id.to_string(), v)
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load_bin(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = ByteReader {
            path,
            bytes: &bytes,
            pos: 0,
        };
        if r.take(8)? != BIN_MAGIC {
            return Err(r.error("bad magic, not a PSDAEMB1 file"));
        }
        let dim = u32::from_le_bytes(r.array()?) as usize;
        let count = u64::from_le_bytes(r.array()?);
        let mut table = EmbeddingTable::new();
        for k in 0..count {
            let start = r.pos;
            let id_len = u16::from_le_bytes(r.array()?) as usize;
            let id = std::str::from_utf8(r.take(id_len)?)
                .map_err(|_| Error::parse(path, start, format!("record {k}: id is not UTF-8")))?
                .to_string();
            let coords = (0..dim)
                .map(|_| r.array().map(|b| f32::from_le_bytes(b) as f64))
                .collect::<Result<Vec<_>>>()?;
            let v = UnitVec::new(coords).map_err(|e| {
                Error::parse(path, start, format!("record {k}, embedding '{id}': {e}"))
            })?;
            table
                .push(id, v)
                .map_err(|e| Error::parse(path, start, e.to_string()))?;
        }
        if r.pos != bytes.len() {
            return Err(r.error("trailing bytes after the last record"));
        }
        Ok(table)
    }

    /// Writes full-precision TSV.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (id, v) in self.iter() {
            out.push_str(id);
            for c in v.as_slice() {
                write!(out, "\t{c}").unwrap();
            }
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }

    /// Writes TSV with every coordinate rounded to `f32`, the same numbers
    /// [`write_bin`](Self::write_bin) stores, so both files load identically.
    pub fn write_tsv_single(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (id, v) in self.iter() {
            out.push_str(id);
            for &c in v.as_slice() {
                write!(out, "\t{}", c as f32 as f64).unwrap();
            }
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }

    /// Writes the binary format. Coordinates are rounded to `f32`.
    pub fn write_bin(&self, path: &Path) -> Result<()> {
        let dim = self.dim().unwrap_or(0);
        let mut out = Vec::with_capacity(20 + self.len() * (2 + 16 + 4 * dim));
        out.extend_from_slice(BIN_MAGIC);
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (id, v) in self.iter() {
            let len = u16::try_from(id.len())
                .map_err(|_| Error::Data(format!("embedding id '{id}' is too long")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for &c in v.as_slice() {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        write_atomic(path, &out)
    }
}

struct ByteReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(self.error("unexpected end of file"));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    /// Binary parse errors report the byte offset in the line slot.
    fn error(&self, msg: &str) -> Error {
        Error::parse(self.path, self.pos, format!("byte offset {}: {msg}", self.pos))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with 1-based line numbers.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Training labels: `(segment id, speaker id)` pairs in file order.
pub fn load_labels(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_text(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (lineno, line) in numbered_lines(&text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [seg, spk] = fields[..] else {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 'segment<TAB>speaker', got {} fields", fields.len()),
            ));
        };
        if !seen.insert(seg.to_string()) {
            return Err(Error::parse(path, lineno, format!("segment '{seg}' labeled twice")));
        }
        out.push((seg.to_string(), spk.to_string()));
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (seg, spk) in labels {
        writeln!(out, "{seg}\t{spk}").unwrap();
    }
    write_atomic(path, out.as_bytes())
}

/// Groups labeled embeddings into per-speaker statistics, speakers in order of
/// first appearance.
pub fn speaker_stats(
    table: &EmbeddingTable,
    labels: &[(String, String)],
) -> Result<Vec<(String, SideStats)>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<&str, Vec<&str>> = HashMap::new();
    for (seg, spk) in labels {
        groups
            .entry(spk.as_str())
            .or_insert_with(|| {
                order.push(spk.clone());
                Vec::new()
            })
            .push(seg.as_str());
    }
    order
        .into_iter()
        .map(|spk| {
            let stats = table.stats(&groups[spk.as_str()])?;
            Ok((spk, stats))
        })
        .collect()
}

/// Enrollment models: id and the segments whose embeddings are summed.
#[derive(Debug, Clone, Default)]
pub struct EnrollMap {
    entries: Vec<(String, Vec<String>)>,
    index: HashMap<String, usize>,
}

impl EnrollMap {
    pub fn get(&self, model_id: &str) -> Option<&[String]> {
        self.index.get(model_id).map(|&i| &self.entries[i].1[..])
    }

    pub fn entries(&self) -> &[(String, Vec<String>)] {
        &self.entries
    }

    pub fn insert(&mut self, model_id: String, segments: Vec<String>) -> Result<()> {
        if segments.is_empty() {
            return Err(Error::Data(format!("enrollment model '{model_id}' has no segments")));
        }
        if self.index.contains_key(&model_id) {
            return Err(Error::Data(format!("enrollment model '{model_id}' listed twice")));
        }
        self.index.insert(model_id.clone(), self.entries.len());
        self.entries.push((model_id, segments));
        Ok(())
    }
}

pub fn load_enroll_map(path: &Path) -> Result<EnrollMap> {
    let text = read_text(path)?;
    let mut map = EnrollMap::default();
    for (lineno, line) in numbered_lines(&text) {
        let mut tokens = line.split_whitespace().map(str::to_string);
        let id = tokens.next().expect("line is not blank");
        map.insert(id, tokens.collect())
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
    }
    Ok(map)
}

pub fn write_enroll_map(path: &Path, map: &EnrollMap) -> Result<()> {
    let mut out = String::new();
    for (id, segs) in map.entries() {
        out.push_str(id);
        for s in segs {
            out.push(' ');
            out.push_str(s);
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// A trial as listed in a trials file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialSpec {
    pub enroll: String,
    pub test: String,
    pub label: Option<Label>,
}

pub fn load_trials(path: &Path) -> Result<Vec<TrialSpec>> {
    let text = read_text(path)?;
    numbered_lines(&text)
        .map(|(lineno, line)| {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let label = match fields.len() {
                2 => None,
                3 => Some(Label::parse(fields[2]).ok_or_else(|| {
                    Error::parse(path, lineno, format!("label must be 'tar' or 'non', got '{}'", fields[2]))
                })?),
                n => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("expected 'enroll test [tar|non]', got {n} fields"),
                    ))
                }
            };
            Ok(TrialSpec {
                enroll: fields[0].to_string(),
                test: fields[1].to_string(),
                label,
            })
        })
        .collect()
}

pub fn write_trials(path: &Path, trials: &[TrialSpec]) -> Result<()> {
    let mut out = String::new();
    for t in trials {
        write!(out, "{} {}", t.enroll, t.test).unwrap();
        if let Some(l) = t.label {
            write!(out, " {}", l.as_str()).unwrap();
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Scores with 9 significant digits, labels appended when known.
pub fn write_scores(path: &Path, report: &ScoreReport) -> Result<()> {
    let mut out = String::new();
    for t in &report.trials {
        write!(out, "{} {} {:.8e}", t.enroll, t.test, t.score).unwrap();
        if let Some(l) = t.label {
            write!(out, " {}", l.as_str()).unwrap();
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn load_scores(path: &Path) -> Result<ScoreReport> {
    let text = read_text(path)?;
    let trials = numbered_lines(&text)
        .map(|(lineno, line)| {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 'enroll test score [tar|non]', got {} fields", fields.len()),
                ));
            }
            let score = fields[2]
                .parse::<f64>()
                .ok()
                .filter(|s| s.is_finite())
                .ok_or_else(|| Error::parse(path, lineno, format!("bad score '{}'", fields[2])))?;
            let label = match fields.get(3) {
                None => None,
                Some(tok) => Some(Label::parse(tok).ok_or_else(|| {
                    Error::parse(path, lineno, format!("label must be 'tar' or 'non', got '{tok}'"))
                })?),
            };
            Ok(ScoredTrial {
                enroll: fields[0].to_string(),
                test: fields[1].to_string(),
                score,
                label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreReport { trials })
}

/// DET points as `p_fa p_miss` lines, in threshold order.
pub fn write_det(path: &Path, points: &[DetPoint]) -> Result<()> {
    let mut out = String::new();
    for p in points {
        writeln!(out, "{:.8e} {:.8e}", p.p_fa, p.p_miss).unwrap();
    }
    write_atomic(path, out.as_bytes())
}

/// Provenance stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ModelMeta {
    pub tool_version: String,
    pub speakers: usize,
    pub observations: usize,
}

impl ModelMeta {
    pub fn new(speakers: usize, observations: usize) -> Self {
        ModelMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            speakers,
            observations,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format: String,
    dim: usize,
    w: f64,
    b: f64,
    mu: Vec<f64>,
    meta: ModelMeta,
}

/// Model file text. Floats carry 17 significant digits, so parameters load
/// back bit for bit.
pub fn model_to_string(model: &PsdaModel, meta: &ModelMeta) -> String {
    let mut out = String::new();
    writeln!(out, "format = \"{MODEL_FORMAT}\"").unwrap();
    writeln!(out, "dim = {}", model.dim()).unwrap();
    writeln!(out, "w = {:.16e}", model.w()).unwrap();
    writeln!(out, "b = {:.16e}", model.b()).unwrap();
    out.push_str("mu = [\n");
    for m in model.mu().as_slice() {
        writeln!(out, "  {m:.16e},").unwrap();
    }
    out.push_str("]\n\n[meta]\n");
    writeln!(out, "tool_version = \"{}\"", meta.tool_version).unwrap();
    writeln!(out, "speakers = {}", meta.speakers).unwrap();
    writeln!(out, "observations = {}", meta.observations).unwrap();
    out
}

pub fn model_from_str(text: &str, path: &Path) -> Result<(PsdaModel, ModelMeta)> {
    let doc: ModelDoc = toml::from_str(text)
        .map_err(|e| Error::parse(path, 0, format!("invalid model file: {}", e.message())))?;
    let bad = |msg: String| Error::parse(path, 0, msg);
    if doc.format != MODEL_FORMAT {
        return Err(bad(format!(
            "unsupported model format '{}', expected '{MODEL_FORMAT}'",
            doc.format
        )));
    }
    if doc.mu.len() != doc.dim {
        return Err(bad(format!("mu has {} entries but dim = {}", doc.mu.len(), doc.dim)));
    }
    let mu = UnitVec::new(doc.mu).map_err(|e| bad(format!("mu: {e}")))?;
    let model = PsdaModel::new(doc.w, doc.b, mu).map_err(|e| bad(e.to_string()))?;
    Ok((model, doc.meta))
}

pub fn save_model(path: &Path, model: &PsdaModel, meta: &ModelMeta) -> Result<()> {
    write_atomic(path, model_to_string(model, meta).as_bytes())
}

pub fn load_model(path: &Path) -> Result<(PsdaModel, ModelMeta)> {
    model_from_str(&read_text(path)?, path)
}
