use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::LeakageModel;
use crate::cipher::{Block128, Iv128, Key256};
use crate::countermeasures::Variant;
use crate::error::TraceError;
use crate::scalar::Scalar;

pub const FORMAT_NAME: &str = "snowv-lab-traces";
pub const FORMAT_VERSION: u32 = 1;

/// Per-trace metadata.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub iv: Iv128,
    #[serde(default)]
    pub key: Option<Key256>,
    #[serde(default)]
    pub variant: Option<Variant>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// First keystream block produced after initialization.
    #[serde(default)]
    pub keystream: Option<Block128>,
}

/// A rectangular matrix of power samples (row = trace) with metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSet {
    n_samples: usize,
    samples: Vec<f32>,
    traces: Vec<TraceMeta>,
    points: Vec<String>,
    model: Option<LeakageModel>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    n_traces: usize,
    n_samples: usize,
    sample_file: String,
    points: Vec<String>,
    #[serde(default)]
    model: Option<LeakageModel>,
    traces: Vec<TraceMeta>,
}

impl TraceSet {
    pub fn new(
        samples: Vec<f32>,
        n_samples: usize,
        traces: Vec<TraceMeta>,
        points: Vec<String>,
        model: Option<LeakageModel>,
    ) -> Result<Self, TraceError> {
        if n_samples == 0 {
            return Err(TraceError::Inconsistent(
                "n_samples must be at least 1".into(),
            ));
        }
        if traces.is_empty() {
            return Err(TraceError::Inconsistent("trace set has no traces".into()));
        }
        if samples.len() != traces.len() * n_samples {
            return Err(TraceError::LengthMismatch(format!(
                "{} samples for {} traces x {} samples",
                samples.len(),
                traces.len(),
                n_samples
            )));
        }
        if points.len() != n_samples {
            return Err(TraceError::LengthMismatch(format!(
                "sample-point map has {} entries, traces have {} samples",
                points.len(),
                n_samples
            )));
        }
        Ok(TraceSet {
            n_samples,
            samples,
            traces,
            points,
            model,
        })
    }

    /// Generic column names `sample0`, `sample1`, ...
    pub fn anonymous_points(n: usize) -> Vec<String> {
        (0..n).map(|j| format!("sample{j}")).collect()
    }

    pub fn n_traces(&self) -> usize {
        self.traces.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.samples[i * self.n_samples..(i + 1) * self.n_samples]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.samples.chunks_exact(self.n_samples)
    }

    /// Column `j` over the first `n` traces.
    pub fn column<S: Scalar>(&self, j: usize, n: usize) -> Vec<S> {
        self.rows().take(n).map(|r| S::of_f32(r[j])).collect()
    }

    pub fn traces(&self) -> &[TraceMeta] {
        &self.traces
    }

    pub fn meta(&self, i: usize) -> &TraceMeta {
        &self.traces[i]
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn point_index(&self, name: &str) -> Option<usize> {
        self.points.iter().position(|p| p == name)
    }

    pub fn model(&self) -> Option<&LeakageModel> {
        self.model.as_ref()
    }

    /// The first `n` traces.
    pub fn prefix(&self, n: usize) -> TraceSet {
        let n = n.clamp(1, self.n_traces());
        TraceSet {
            n_samples: self.n_samples,
            samples: self.samples[..n * self.n_samples].to_vec(),
            traces: self.traces[..n].to_vec(),
            points: self.points.clone(),
            model: self.model,
        }
    }

    /// The same traces with keys dropped from the metadata.
    pub fn without_keys(&self) -> TraceSet {
        let mut t = self.clone();
        for m in &mut t.traces {
            m.key = None;
        }
        t
    }

    /// Every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> TraceSet {
        TraceSet {
            samples: self.samples.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }

    /// Writes `path` (JSON metadata) and a sibling `.bin` file holding the
    /// samples as little-endian f32, row-major.
    pub fn store(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let path = path.as_ref();
        let bin = sample_path(path);
        let header = Header {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            n_traces: self.n_traces(),
            n_samples: self.n_samples,
            sample_file: bin
                .file_name()
                .and_then(|s| s.to_str())
                .ok_or_else(|| TraceError::Inconsistent(format!("bad path {}", path.display())))?
                .to_string(),
            points: self.points.clone(),
            model: self.model,
            traces: self.traces.clone(),
        };
        let json = serde_json::to_vec_pretty(&header)
            .map_err(|e| TraceError::MalformedHeader(e.to_string()))?;
        fs::write(path, json).map_err(|e| TraceError::io(path, e))?;

        let file = fs::File::create(&bin).map_err(|e| TraceError::io(&bin, e))?;
        let mut w = BufWriter::new(file);
        for x in &self.samples {
            w.write_all(&x.to_le_bytes())
                .map_err(|e| TraceError::io(&bin, e))?;
        }
        w.flush().map_err(|e| TraceError::io(&bin, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TraceSet, TraceError> {
        let path = path.as_ref();
        let text = fs::read(path).map_err(|e| TraceError::io(path, e))?;
        let header: Header = serde_json::from_slice(&text)
            .map_err(|e| TraceError::MalformedHeader(e.to_string()))?;
        if header.format != FORMAT_NAME {
            return Err(TraceError::MalformedHeader(format!(
                "format is `{}`, expected `{FORMAT_NAME}`",
                header.format
            )));
        }
        if header.version != FORMAT_VERSION {
            return Err(TraceError::UnsupportedVersion {
                found: header.version,
                supported: FORMAT_VERSION,
            });
        }
        if header.n_traces != header.traces.len() {
            return Err(TraceError::LengthMismatch(format!(
                "n_traces = {} but {} trace records",
                header.n_traces,
                header.traces.len()
            )));
        }
        let bin = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&header.sample_file);
        let raw = fs::read(&bin).map_err(|e| TraceError::io(&bin, e))?;
        let expected = header.n_traces * header.n_samples * 4;
        if raw.len() != expected {
            return Err(TraceError::LengthMismatch(format!(
                "{} holds {} bytes, expected {} ({} x {} f32)",
                bin.display(),
                raw.len(),
                expected,
                header.n_traces,
                header.n_samples
            )));
        }
        let samples = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if let Some(m) = &header.model {
            m.validate()?;
        }
        TraceSet::new(
            samples,
            header.n_samples,
            header.traces,
            header.points,
            header.model,
        )
    }

    /// Reads one trace per CSV row. A header row is detected when its first
    /// field is not numeric; its names become the sample-point map.
    pub fn import_csv(
        path: impl AsRef<Path>,
        traces: Vec<TraceMeta>,
    ) -> Result<TraceSet, TraceError> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)
            .map_err(|e| TraceError::Csv(e.to_string()))?;
        let mut names: Option<Vec<String>> = None;
        let mut samples = Vec::new();
        let mut width = None;
        let mut rows = 0usize;
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| TraceError::Csv(e.to_string()))?;
            let parsed: Result<Vec<f32>, _> = record.iter().map(str::parse::<f32>).collect();
            match parsed {
                Ok(row) => {
                    match width {
                        None => width = Some(row.len()),
                        Some(w) if w != row.len() => {
                            return Err(TraceError::LengthMismatch(format!(
                                "CSV row {} has {} fields, expected {w}",
                                line + 1,
                                row.len()
                            )))
                        }
                        _ => {}
                    }
                    samples.extend(row);
                    rows += 1;
                }
                Err(_) if line == 0 => {
                    names = Some(record.iter().map(str::to_string).collect());
                }
                Err(e) => {
                    return Err(TraceError::Csv(format!("row {}: {e}", line + 1)));
                }
            }
        }
        let width = width.ok_or_else(|| TraceError::Csv("no data rows".into()))?;
        if rows != traces.len() {
            return Err(TraceError::LengthMismatch(format!(
                "{rows} CSV rows but {} metadata records",
                traces.len()
            )));
        }
        let points = names.unwrap_or_else(|| TraceSet::anonymous_points(width));
        TraceSet::new(samples, width, traces, points, None)
    }

    /// Writes one trace per row with the point names as header.
    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| TraceError::Csv(e.to_string()))?;
        w.write_record(&self.points)
            .map_err(|e| TraceError::Csv(e.to_string()))?;
        for row in self.rows() {
            w.write_record(row.iter().map(|x| x.to_string()))
                .map_err(|e| TraceError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| TraceError::io(path, e))
    }
}

/// Path of the raw sample file that accompanies a metadata document.
pub fn sample_path(meta: &Path) -> PathBuf {
    meta.with_extension("bin")
}
