//! Dataset representation, CSV ingestion, standardization and fold splitting.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub n_records: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    /// Class names indexed by class id, in first-appearance order.
    pub class_names: Vec<String>,
    pub label_name: String,
}

/// Numeric feature matrix with a per-cell observation mask and class labels.
///
/// Values are stored row-major. Unobserved cells hold `NaN` and are never read
/// through the accessors that take the mask into account.
#[derive(Clone, Debug)]
pub struct Dataset {
    values: Vec<f64>,
    mask: Vec<bool>,
    labels: Vec<usize>,
    meta: DatasetMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeStats {
    pub mean: f64,
    pub sd: f64,
    pub observed_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Name(n) => f.write_str(n),
            LabelColumn::Index(i) => write!(f, "{i}"),
        }
    }
}

// Equality ignores the placeholder contents of unobserved cells.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.meta == other.meta
            && self.labels == other.labels
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask)
                .all(|((a, b), &obs)| !obs || a.to_bits() == b.to_bits())
    }
}

impl Dataset {
    /// Builds a dataset from rows where `None` marks an unobserved cell.
    pub fn from_rows(
        name: impl Into<String>,
        feature_names: Vec<String>,
        rows: &[Vec<Option<f64>>],
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * n_features);
        let mut mask = Vec::with_capacity(rows.len() * n_features);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::Dimension(format!(
                    "row {r} has {} cells, expected {n_features}",
                    row.len()
                )));
            }
            for cell in row {
                match cell {
                    Some(v) if v.is_finite() => {
                        values.push(*v);
                        mask.push(true);
                    }
                    Some(v) => {
                        return Err(Error::Invalid(format!("row {r}: non-finite value {v}")));
                    }
                    None => {
                        values.push(f64::NAN);
                        mask.push(false);
                    }
                }
            }
        }
        let meta = DatasetMeta {
            name: name.into(),
            n_records: rows.len(),
            n_features,
            n_classes: class_names.len(),
            feature_names,
            class_names,
            label_name: "class".to_string(),
        };
        let data = Dataset {
            values,
            mask,
            labels,
            meta,
        };
        data.validate()?;
        Ok(data)
    }

    /// Fully observed dataset with generated feature and class names.
    pub fn complete(
        name: impl Into<String>,
        rows: &[Vec<f64>],
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        let opt: Vec<Vec<Option<f64>>> = rows
            .iter()
            .map(|r| r.iter().copied().map(Some).collect())
            .collect();
        Self::from_rows(
            name,
            (0..n_features).map(|j| format!("x{j}")).collect(),
            &opt,
            labels,
            (0..n_classes).map(|c| c.to_string()).collect(),
        )
    }

    fn validate(&self) -> Result<()> {
        let m = &self.meta;
        if m.n_features == 0 {
            return Err(Error::Invalid("dataset has no features".into()));
        }
        if m.n_records == 0 {
            return Err(Error::Invalid("dataset has no records".into()));
        }
        if m.n_classes == 0 {
            return Err(Error::Invalid("dataset has no classes".into()));
        }
        if self.labels.len() != m.n_records {
            return Err(Error::Dimension(format!(
                "{} labels for {} records",
                self.labels.len(),
                m.n_records
            )));
        }
        if let Some(bad) = self.labels.iter().find(|&&l| l >= m.n_classes) {
            return Err(Error::Invalid(format!(
                "class index {bad} out of range for {} classes",
                m.n_classes
            )));
        }
        if let Some(r) = (0..m.n_records).find(|&r| self.row_mask(r).iter().all(|o| !o)) {
            return Err(Error::Invalid(format!("record {r} has no observed cells")));
        }
        Ok(())
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.meta.name = name.into();
    }

    pub fn n_records(&self) -> usize {
        self.meta.n_records
    }

    pub fn n_features(&self) -> usize {
        self.meta.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.meta.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, r: usize) -> usize {
        self.labels[r]
    }

    /// Raw row values; unobserved cells are `NaN`.
    pub fn row(&self, r: usize) -> &[f64] {
        let f = self.meta.n_features;
        &self.values[r * f..(r + 1) * f]
    }

    pub fn row_mask(&self, r: usize) -> &[bool] {
        let f = self.meta.n_features;
        &self.mask[r * f..(r + 1) * f]
    }

    pub fn is_observed(&self, r: usize, c: usize) -> bool {
        self.mask[r * self.meta.n_features + c]
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let i = r * self.meta.n_features + c;
        self.mask[i].then(|| self.values[i])
    }

    pub fn observed_column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.meta.n_records).filter_map(move |r| self.get(r, c))
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|o| !**o).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&o| o)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub(crate) fn set_cell(&mut self, r: usize, c: usize, value: f64) {
        let i = r * self.meta.n_features + c;
        self.values[i] = value;
        self.mask[i] = true;
    }

    pub(crate) fn clear_cell(&mut self, r: usize, c: usize) {
        let i = r * self.meta.n_features + c;
        self.values[i] = f64::NAN;
        self.mask[i] = false;
    }

    /// Copy of the rows at `indices`, in that order; duplicates allowed.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let f = self.meta.n_features;
        let mut values = Vec::with_capacity(indices.len() * f);
        let mut mask = Vec::with_capacity(indices.len() * f);
        let mut labels = Vec::with_capacity(indices.len());
        for &r in indices {
            values.extend_from_slice(self.row(r));
            mask.extend_from_slice(self.row_mask(r));
            labels.push(self.labels[r]);
        }
        let mut meta = self.meta.clone();
        meta.n_records = indices.len();
        Dataset {
            values,
            mask,
            labels,
            meta,
        }
    }

    /// Re-indexes labels against `class_names` (e.g. a trained model's
    /// classes). Fails on a class name that is not in the list.
    pub fn align_classes(&self, class_names: &[String]) -> Result<Dataset> {
        let lookup: HashMap<&str, usize> = class_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let map = self
            .meta
            .class_names
            .iter()
            .map(|n| {
                lookup
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| Error::Invalid(format!("class '{n}' unknown to the model")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.clone();
        out.labels = self.labels.iter().map(|&l| map[l]).collect();
        out.meta.class_names = class_names.to_vec();
        out.meta.n_classes = class_names.len();
        Ok(out)
    }

    /// Same shape and labels, with new cell contents.
    pub(crate) fn with_cells(&self, values: Vec<f64>, mask: Vec<bool>) -> Dataset {
        debug_assert_eq!(values.len(), self.values.len());
        debug_assert_eq!(mask.len(), self.mask.len());
        Dataset {
            values,
            mask,
            labels: self.labels.clone(),
            meta: self.meta.clone(),
        }
    }

    pub(crate) fn values_raw(&self) -> &[f64] {
        &self.values
    }

    /// Checks that `other` can be processed by something fitted on `self`.
    pub(crate) fn check_features(&self, expected: usize) -> Result<()> {
        if self.meta.n_features != expected {
            return Err(Error::Dimension(format!(
                "dataset has {} attributes, expected {expected}",
                self.meta.n_features
            )));
        }
        Ok(())
    }
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty() || s == "?"
}

/// Reads a headed CSV file. Empty fields and `?` are missing cells; the label
/// column is mapped to dense class ids in first-appearance order.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    read_csv(file, name, label)
}

pub fn read_csv(reader: impl Read, name: impl Into<String>, label: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let label_idx = match label {
        LabelColumn::Index(i) => {
            if *i >= headers.len() {
                return Err(Error::LabelColumn(format!(
                    "index {i} out of range for {} columns",
                    headers.len()
                )));
            }
            *i
        }
        LabelColumn::Name(n) => {
            let hits: Vec<usize> = headers
                .iter()
                .enumerate()
                .filter(|(_, h)| *h == n)
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [i] => *i,
                [] => return Err(Error::LabelColumn(format!("unknown column '{n}'"))),
                _ => return Err(Error::LabelColumn(format!("duplicate column '{n}'"))),
            }
        }
    };

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(feature_names.len());
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                if is_missing_token(cell) {
                    return Err(Error::LabelColumn(format!("line {line}: missing class label")));
                }
                let next = class_ids.len();
                let id = *class_ids.entry(cell.to_string()).or_insert_with(|| {
                    class_names.push(cell.to_string());
                    next
                });
                labels.push(id);
            } else if is_missing_token(cell) {
                row.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    line,
                    column: headers[i].clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonNumeric {
                        line,
                        column: headers[i].clone(),
                        value: cell.to_string(),
                    });
                }
                row.push(Some(v));
            }
        }
        rows.push(row);
    }

    if class_names.len() < 2 {
        return Err(Error::SingleClass);
    }
    if rows.len() < 2 {
        return Err(Error::Invalid("need at least two records".into()));
    }
    let mut data = Dataset::from_rows(name, feature_names, &rows, labels, class_names)?;
    data.meta.label_name = headers[label_idx].clone();
    Ok(data)
}

/// Writes features in column order followed by the label column. Missing
/// cells are written as `?`; reals use shortest round-trip formatting.
pub fn write_csv(data: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.meta.feature_names.iter().map(String::as_str).collect();
    header.push(&data.meta.label_name);
    w.write_record(&header)?;
    let mut fields = Vec::with_capacity(data.n_features() + 1);
    for r in 0..data.n_records() {
        fields.clear();
        for c in 0..data.n_features() {
            fields.push(match data.get(r, c) {
                Some(v) => format!("{v}"),
                None => "?".to_string(),
            });
        }
        fields.push(data.meta.class_names[data.labels[r]].clone());
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(data, std::io::BufWriter::new(file))
}

/// Observation mask as CSV: one column per attribute, `1` observed, `0`
/// missing.
pub fn write_mask_csv(data: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&data.meta.feature_names)?;
    for r in 0..data.n_records() {
        w.write_record(data.row_mask(r).iter().map(|&o| if o { "1" } else { "0" }))?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn save_mask_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_mask_csv(data, std::io::BufWriter::new(file))
}

/// Mean and sample standard deviation (n−1 denominator) over observed cells.
/// A single observed value has sd 0.
pub fn attribute_stats(data: &Dataset, attr: usize) -> Result<AttributeStats> {
    if attr >= data.n_features() {
        return Err(Error::Dimension(format!(
            "attribute {attr} out of range for {} attributes",
            data.n_features()
        )));
    }
    let (n, sum) = data
        .observed_column(attr)
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return Err(Error::Unobserved(attr));
    }
    let mean = sum / n as f64;
    let sd = if n < 2 {
        0.0
    } else {
        let ss: f64 = data.observed_column(attr).map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Ok(AttributeStats {
        mean,
        sd,
        observed_count: n,
    })
}

pub fn all_attribute_stats(data: &Dataset) -> Result<Vec<AttributeStats>> {
    (0..data.n_features())
        .map(|j| attribute_stats(data, j))
        .collect()
}

/// Per-attribute affine map to zero mean and unit sample variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub stats: Vec<AttributeStats>,
}

impl Scaling {
    pub fn fit(data: &Dataset) -> Result<Self> {
        Ok(Scaling {
            stats: all_attribute_stats(data)?,
        })
    }

    /// Zero-variance attributes map to 0.
    pub fn forward(&self, attr: usize, x: f64) -> f64 {
        let s = &self.stats[attr];
        if s.sd > 0.0 {
            (x - s.mean) / s.sd
        } else {
            0.0
        }
    }

    pub fn inverse(&self, attr: usize, z: f64) -> f64 {
        let s = &self.stats[attr];
        if s.sd > 0.0 {
            z * s.sd + s.mean
        } else {
            s.mean
        }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.map(data, Self::forward)
    }

    pub fn invert(&self, data: &Dataset) -> Result<Dataset> {
        self.map(data, Self::inverse)
    }

    fn map(&self, data: &Dataset, f: fn(&Self, usize, f64) -> f64) -> Result<Dataset> {
        data.check_features(self.stats.len())?;
        let nf = data.n_features();
        let values = data
            .values_raw()
            .iter()
            .zip(data.mask())
            .enumerate()
            .map(|(i, (&v, &obs))| if obs { f(self, i % nf, v) } else { f64::NAN })
            .collect();
        Ok(data.with_cells(values, data.mask().to_vec()))
    }
}

/// Standardizes observed cells; returns the scaling for the inverse map.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Scaling)> {
    let scaling = Scaling::fit(data)?;
    Ok((scaling.apply(data)?, scaling))
}

/// Shuffles record indices with `rng` and halves them. The first split trains
/// on the first (larger) half; the second is its swap.
pub fn split_2fold<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Result<(FoldSplit, FoldSplit)> {
    let n = data.n_records();
    if n < 4 {
        return Err(Error::Invalid(format!("2-fold split needs N >= 4, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let half = n.div_ceil(2);
    let (a, b) = idx.split_at(half);
    Ok((
        FoldSplit {
            train: a.to_vec(),
            test: b.to_vec(),
        },
        FoldSplit {
            train: b.to_vec(),
            test: a.to_vec(),
        },
    ))
}

/// Unstratified k-fold split. For k = 2 this is [`split_2fold`].
pub fn split_kfold<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Result<Vec<FoldSplit>> {
    if k == 2 {
        let (a, b) = split_2fold(data, rng)?;
        return Ok(vec![a, b]);
    }
    let n = data.n_records();
    if k < 2 || n < 2 * k {
        return Err(Error::Invalid(format!("{k}-fold split of {n} records")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let base = n / k;
    let extra = n % k;
    let mut chunks = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        chunks.push(&idx[start..start + len]);
        start += len;
    }
    Ok((0..k)
        .map(|i| FoldSplit {
            test: chunks[i].to_vec(),
            train: chunks
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, c)| c.iter().copied())
                .collect(),
        })
        .collect())
}
