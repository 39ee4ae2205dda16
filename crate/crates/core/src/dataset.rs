//! Labeled feature-vector datasets and their on-disk formats.
//!
//! Two formats are supported:
//!
//! * CSV, one record per line: `label,f0,f1,...`. An optional single header
//!   line is recognised by its first field not parsing as an integer.
//! * Raw binary, little-endian: the magic bytes `WAKA`, then `u32 N`,
//!   `u32 d`, `u32 C`, followed by `N` records of `u32 label` and `d` `f64`
//!   features.
//!
//! Labels are remapped to the dense range `0..C` on load; the original label
//! values are kept in [`Dataset::label_map`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"WAKA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Csv,
    RawBinary,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "raw-binary" | "bin" | "binary" => Ok(DataFormat::RawBinary),
            other => Err(Error::Argument(format!("unknown data format `{other}`"))),
        }
    }
}

impl DataFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("waka") => DataFormat::RawBinary,
            _ => DataFormat::Csv,
        }
    }
}

/// A labeled set of `d`-dimensional points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<u32>,
    label_map: Vec<i64>,
    ids: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from rows and raw labels, remapping labels to `0..C`
    /// in ascending order of their raw value.
    pub fn from_rows(rows: Vec<Vec<f64>>, raw_labels: Vec<i64>) -> Result<Self> {
        if rows.len() != raw_labels.len() {
            return Err(Error::Validation(format!(
                "{} rows but {} labels",
                rows.len(),
                raw_labels.len()
            )));
        }
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut features = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(features, dim, raw_labels)
    }

    pub fn from_flat(features: Vec<f64>, dim: usize, raw_labels: Vec<i64>) -> Result<Self> {
        let (labels, label_map) = normalize_labels(&raw_labels);
        let ds = Dataset {
            features,
            dim,
            labels,
            label_map,
            ids: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.len() {
            return Err(Error::Validation(format!(
                "{} ids for {} points",
                ids.len(),
                self.len()
            )));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::Validation("dataset must contain at least one point".into()));
        }
        if self.dim == 0 {
            return Err(Error::Validation("points must have at least one feature".into()));
        }
        if self.features.len() != self.labels.len() * self.dim {
            return Err(Error::Dimension {
                expected: self.labels.len() * self.dim,
                found: self.features.len(),
            });
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature value at point {}, coordinate {}",
                pos / self.dim,
                pos % self.dim
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn num_classes(&self) -> usize {
        self.label_map.len()
    }

    /// Dense label index to the raw label seen at load time.
    pub fn label_map(&self) -> &[i64] {
        &self.label_map
    }

    pub fn raw_label(&self, i: usize) -> i64 {
        self.label_map[self.labels[i] as usize]
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Record identifier for reports: the stored id if any, else the row index.
    pub fn point_id(&self, i: usize) -> String {
        match &self.ids {
            Some(ids) => ids[i].clone(),
            None => i.to_string(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Restricts the dataset to `indices` (in the given order).
    ///
    /// The dense label space is kept as-is so that class ids remain
    /// comparable with the parent dataset.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.point(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            dim: self.dim,
            labels,
            label_map: self.label_map.clone(),
            ids: self
                .ids
                .as_ref()
                .map(|ids| indices.iter().map(|&i| ids[i].clone()).collect()),
        }
    }

    /// Shuffles the points with a seeded generator and cuts the result into
    /// consecutive parts whose sizes follow `fractions` (which must sum to
    /// 1). Parts keep the parent's record ids, or the parent row index when
    /// the parent has none.
    pub fn shuffled_split(&self, fractions: &[f64], seed: u64) -> Result<Vec<Dataset>> {
        let total: f64 = fractions.iter().sum();
        if fractions.iter().any(|f| f.is_nan() || *f <= 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "split fractions must be positive and sum to 1, got {fractions:?}"
            )));
        }
        let n = self.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let labelled = match self.ids {
            Some(_) => self.clone(),
            None => self.clone().with_ids((0..n).map(|i| i.to_string()).collect())?,
        };
        let mut parts = Vec::with_capacity(fractions.len());
        let (mut acc, mut start) = (0.0, 0);
        for (p, f) in fractions.iter().enumerate() {
            acc += f;
            let end = if p + 1 == fractions.len() {
                n
            } else {
                ((acc * n as f64).round() as usize).min(n)
            };
            if end <= start {
                return Err(Error::Argument(format!(
                    "split part {p} of {n} points would be empty"
                )));
            }
            parts.push(labelled.subset(&perm[start..end]));
            start = end;
        }
        Ok(parts)
    }

    pub fn load(path: &Path, format: DataFormat) -> Result<Self> {
        match format {
            DataFormat::Csv => load_csv(path),
            DataFormat::RawBinary => load_binary(path),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        let mut record = Vec::with_capacity(self.dim + 1);
        for i in 0..self.len() {
            record.clear();
            record.push(self.raw_label(i).to_string());
            record.extend(self.point(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode_binary(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Encodes using dense labels; the raw label values are not preserved.
    pub fn encode_binary<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.num_classes() as u32).to_le_bytes())?;
        for i in 0..self.len() {
            w.write_all(&self.labels[i].to_le_bytes())?;
            for v in self.point(i) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn decode_binary(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            if cursor.len() < n {
                return Err(Error::Validation(format!("truncated binary input while reading {what}")));
            }
            let (head, tail) = cursor.split_at(n);
            cursor = tail;
            Ok(head)
        };
        if take(4, "magic")? != BINARY_MAGIC {
            return Err(Error::Validation("missing WAKA magic".into()));
        }
        let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let n = read_u32(take(4, "N")?) as usize;
        let dim = read_u32(take(4, "d")?) as usize;
        let classes = read_u32(take(4, "C")?);
        let mut features = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for rec in 0..n {
            let label = read_u32(take(4, "label")?);
            if label >= classes {
                return Err(Error::Validation(format!(
                    "record {rec}: label {label} outside declared class count {classes}"
                )));
            }
            labels.push(label as i64);
            for _ in 0..dim {
                let b = take(8, "feature")?;
                features.push(f64::from_le_bytes(b.try_into().unwrap()));
            }
        }
        if !cursor.is_empty() {
            return Err(Error::Validation(format!(
                "{} trailing bytes after {n} records",
                cursor.len()
            )));
        }
        Dataset::from_flat(features, dim, labels)
    }
}

fn normalize_labels(raw: &[i64]) -> (Vec<u32>, Vec<i64>) {
    let mut map: Vec<i64> = raw.to_vec();
    map.sort_unstable();
    map.dedup();
    let dense = raw
        .iter()
        .map(|l| map.binary_search(l).unwrap() as u32)
        .collect();
    (dense, map)
}

fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim: Option<usize> = None;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(row + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let first = record.get(0).unwrap_or("");
        let label: i64 = match first.parse() {
            Ok(v) => v,
            Err(_) if row == 0 && first.parse::<f64>().is_err() => continue,
            Err(_) => {
                return Err(Error::Parse {
                    line,
                    message: format!("label `{first}` is not an integer"),
                })
            }
        };
        let d = record.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::Dimension { expected, found: d })
            }
            _ => {}
        }
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("feature `{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Validation(format!("line {line}: non-finite value `{field}`")));
            }
            features.push(v);
        }
        labels.push(label);
    }
    Dataset::from_flat(features, dim.unwrap_or(0), labels)
}

fn load_binary(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    Dataset::decode_binary(&bytes)
}
