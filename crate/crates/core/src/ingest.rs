//! Bundle loading: a JSON manifest pointing at CSV files.
//!
//! ```json
//! {
//!   "task": "classification",
//!   "classes": ["A", "B", "C"],
//!   "models": [{ "label": "M0", "predictions_path": "m0.csv" }],
//!   "ground_truth_path": "ground_truth.csv",
//!   "features_path": "features.csv",
//!   "feature_kinds": { "hour": "categorical" },
//!   "sparse_features": [{ "name": "trigrams", "path": "trigrams.csv" }]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. Ground truth has a
//! `label` (classification) or `value` (regression) column; predictions have
//! one column per class label or a single `value` column; sparse features are
//! `instance_id,token,value` triplets with an optional leading `feature`
//! column naming the family.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{
    validate_dataset, ClassId, Dataset, FeatureColumn, FeatureKind, FeatureValues, GroundTruth,
    Model, ModelOutputs, Task,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub label: String,
    pub predictions_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseEntry {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub task: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    pub models: Vec<ModelEntry>,
    pub ground_truth_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub feature_kinds: BTreeMap<String, FeatureKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sparse_features: Vec<SparseEntry>,
}

impl BundleManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: BundleManifest =
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                file: path.to_owned(),
                line: e.line() as u64,
                column: e.column() as u64,
                message: e.to_string(),
            })?;
        manifest.check(path, &text)?;
        Ok(manifest)
    }

    fn check(&self, path: &Path, text: &str) -> Result<()> {
        let field_error = |field: &str, message: String| {
            let (line, column) = locate_key(text, field);
            Error::Parse {
                file: path.to_owned(),
                line,
                column,
                message: format!("field `{field}`: {message}"),
            }
        };
        match self.task.as_str() {
            "classification" => {
                if self.classes.is_empty() {
                    return Err(field_error(
                        "classes",
                        "classification manifests must list class labels".into(),
                    ));
                }
            }
            "regression" => {
                if !self.classes.is_empty() {
                    return Err(field_error(
                        "classes",
                        "regression manifests take no class labels".into(),
                    ));
                }
            }
            other => {
                return Err(field_error(
                    "task",
                    format!("unknown task {other:?}, expected \"classification\" or \"regression\""),
                ))
            }
        }
        Ok(())
    }
}

/// 1-based line/column of `"key"` in `text`, or (0, 0) when absent.
fn locate_key(text: &str, key: &str) -> (u64, u64) {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(offset) => {
            let before = &text[..offset];
            let line = before.matches('\n').count() as u64 + 1;
            let column = (offset - before.rfind('\n').map_or(0, |p| p + 1)) as u64 + 1;
            (line, column)
        }
        None => (0, 0),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        _ => Error::Parse {
            file: path.to_owned(),
            line,
            column: 0,
            message,
        },
    }
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    /// (1-based line, fields)
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut rdr = reader(path)?;
        let header = rdr
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(str::to_owned).collect()));
        }
        Ok(Self {
            path: path.to_owned(),
            header,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                file: self.path.clone(),
                line: 1,
                column: 0,
                message: format!("missing column {name:?}"),
            })
    }

    fn err(&self, line: u64, col: usize, message: String) -> Error {
        Error::Parse {
            file: self.path.clone(),
            line,
            column: col as u64 + 1,
            message,
        }
    }

    fn float(&self, line: u64, col: usize, s: &str) -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| self.err(line, col, format!("expected a number, found {s:?}")))
    }

    fn check_rows(&self, other: &Table) -> Result<()> {
        if self.rows.len() != other.rows.len() {
            return Err(Error::RowCountMismatch {
                left: other.path.clone(),
                left_rows: other.rows.len(),
                right: self.path.clone(),
                right_rows: self.rows.len(),
            });
        }
        Ok(())
    }
}

/// Parse, assemble and validate the bundle described by `manifest_path`.
pub fn load_bundle(manifest_path: &Path) -> Result<Dataset> {
    let manifest = BundleManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let gt_table = Table::read(&resolve(base, &manifest.ground_truth_path))?;
    let n = gt_table.rows.len();

    let (task, ground_truth) = match manifest.task.as_str() {
        "classification" => {
            let col = gt_table.column("label")?;
            let mut gt = Vec::with_capacity(n);
            for (line, row) in &gt_table.rows {
                let label = &row[col];
                let id = manifest
                    .classes
                    .iter()
                    .position(|c| c == label)
                    .ok_or_else(|| gt_table.err(*line, col, format!("unknown class {label:?}")))?;
                gt.push(ClassId(id));
            }
            (
                Task::Classification {
                    classes: manifest.classes.clone(),
                },
                GroundTruth::Classes(gt),
            )
        }
        _ => {
            let col = gt_table.column("value")?;
            let gt = gt_table
                .rows
                .iter()
                .map(|(line, row)| gt_table.float(*line, col, &row[col]))
                .collect::<Result<_>>()?;
            (Task::Regression, GroundTruth::Values(gt))
        }
    };

    let mut models = Vec::with_capacity(manifest.models.len());
    for entry in &manifest.models {
        let table = Table::read(&resolve(base, &entry.predictions_path))?;
        table.check_rows(&gt_table)?;
        let outputs = match &task {
            Task::Classification { classes } => {
                let cols = classes
                    .iter()
                    .map(|c| table.column(c))
                    .collect::<Result<Vec<_>>>()?;
                let mut scores = Vec::with_capacity(n * classes.len());
                for (line, row) in &table.rows {
                    for &c in &cols {
                        scores.push(table.float(*line, c, &row[c])?);
                    }
                }
                ModelOutputs::Probabilities {
                    classes: classes.len(),
                    scores,
                }
            }
            Task::Regression => {
                let col = table.column("value")?;
                ModelOutputs::Values(
                    table
                        .rows
                        .iter()
                        .map(|(line, row)| table.float(*line, col, &row[col]))
                        .collect::<Result<_>>()?,
                )
            }
        };
        models.push(Model {
            label: entry.label.clone(),
            outputs,
        });
    }

    let mut features = Vec::new();
    if let Some(p) = &manifest.features_path {
        let table = Table::read(&resolve(base, p))?;
        table.check_rows(&gt_table)?;
        features.extend(parse_dense(&table, &manifest.feature_kinds)?);
    }
    for entry in &manifest.sparse_features {
        features.extend(parse_sparse_features(
            &resolve(base, &entry.path),
            &entry.name,
            n,
        )?);
    }

    let dataset = Dataset::new(task, ground_truth, features, models);
    validate_dataset(&dataset).into_result()?;
    Ok(dataset)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

fn infer_kind(values: &[&str]) -> FeatureKind {
    if values.is_empty() {
        return FeatureKind::Numeric;
    }
    if values
        .iter()
        .all(|v| v.eq_ignore_ascii_case("true") || v.eq_ignore_ascii_case("false"))
    {
        FeatureKind::Boolean
    } else if values.iter().all(|v| v.parse::<f64>().is_ok()) {
        FeatureKind::Numeric
    } else {
        FeatureKind::Categorical
    }
}

fn parse_dense(table: &Table, kinds: &BTreeMap<String, FeatureKind>) -> Result<Vec<FeatureColumn>> {
    let mut out = Vec::with_capacity(table.header.len());
    for (col, name) in table.header.iter().enumerate() {
        let raw: Vec<&str> = table.rows.iter().map(|(_, r)| r[col].as_str()).collect();
        let kind = kinds.get(name).copied().unwrap_or_else(|| infer_kind(&raw));
        let values = match kind {
            FeatureKind::Numeric => FeatureValues::Numeric(
                table
                    .rows
                    .iter()
                    .map(|(line, r)| table.float(*line, col, &r[col]))
                    .collect::<Result<_>>()?,
            ),
            FeatureKind::Boolean => FeatureValues::Boolean(
                table
                    .rows
                    .iter()
                    .map(|(line, r)| {
                        parse_bool(&r[col]).ok_or_else(|| {
                            table.err(*line, col, format!("expected a boolean, found {:?}", r[col]))
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
            FeatureKind::Categorical => {
                FeatureValues::Categorical(raw.iter().map(|s| s.to_string()).collect())
            }
            FeatureKind::SparseCount => {
                return Err(table.err(
                    1,
                    col,
                    format!("column {name:?}: sparse-count features belong in a triplet file"),
                ))
            }
        };
        out.push(FeatureColumn::new(name.clone(), values));
    }
    Ok(out)
}

/// Read `instance_id,token,value` triplets into sparse-count columns.
///
/// Files with a leading `feature` column yield one column per family;
/// otherwise everything lands in `family`. Repeated (instance, token) rows
/// are summed.
pub fn parse_sparse_features(
    path: &Path,
    family: &str,
    n_instances: usize,
) -> Result<Vec<FeatureColumn>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let empty = || vec![BTreeMap::new(); n_instances];
    if text.trim().is_empty() {
        return Ok(vec![FeatureColumn::new(
            family,
            FeatureValues::SparseCount(empty()),
        )]);
    }
    let table = Table::read(path)?;
    let family_col = table.header.iter().position(|h| h == "feature");
    let id_col = table.column("instance_id")?;
    let token_col = table.column("token")?;
    let value_col = table.column("value")?;

    let mut families: BTreeMap<String, Vec<BTreeMap<String, f64>>> = BTreeMap::new();
    if family_col.is_none() {
        families.insert(family.to_owned(), empty());
    }
    for (line, row) in &table.rows {
        let id: u64 = row[id_col].parse().map_err(|_| {
            table.err(*line, id_col, format!("expected an instance id, found {:?}", row[id_col]))
        })?;
        if id as usize >= n_instances {
            return Err(Error::InstanceOutOfRange {
                id,
                len: n_instances,
            });
        }
        let value = table.float(*line, value_col, &row[value_col])?;
        let token = row[token_col].clone();
        if value < 0.0 {
            return Err(Error::NegativeCount {
                instance: id as usize,
                token,
                value,
            });
        }
        let name = family_col.map_or(family, |c| row[c].as_str());
        let rows = families.entry(name.to_owned()).or_insert_with(empty);
        *rows[id as usize].entry(token).or_insert(0.0) += value;
    }
    Ok(families
        .into_iter()
        .map(|(name, rows)| FeatureColumn::new(name, FeatureValues::SparseCount(rows)))
        .collect())
}

/// Write `d` as a bundle under `dir` and return the manifest path.
pub fn export_bundle(d: &Dataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write_err = |p: &Path| {
        let p = p.to_owned();
        move |e: csv::Error| csv_error(&p, e)
    };

    let gt_path = dir.join("ground_truth.csv");
    {
        let mut w = csv::Writer::from_path(&gt_path).map_err(write_err(&gt_path))?;
        match &d.ground_truth {
            GroundTruth::Classes(c) => {
                w.write_record(["label"]).map_err(write_err(&gt_path))?;
                for id in c {
                    w.write_record([&d.classes()[id.0]])
                        .map_err(write_err(&gt_path))?;
                }
            }
            GroundTruth::Values(v) => {
                w.write_record(["value"]).map_err(write_err(&gt_path))?;
                for y in v {
                    w.write_record([y.to_string()]).map_err(write_err(&gt_path))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(&gt_path, e))?;
    }

    let mut models = Vec::new();
    for (i, m) in d.models.iter().enumerate() {
        let file = format!("predictions_{i}.csv");
        let path = dir.join(&file);
        let mut w = csv::Writer::from_path(&path).map_err(write_err(&path))?;
        match &m.outputs {
            ModelOutputs::Probabilities { classes, scores } => {
                w.write_record(d.classes()).map_err(write_err(&path))?;
                for row in scores.chunks((*classes).max(1)) {
                    w.write_record(row.iter().map(|p| p.to_string()))
                        .map_err(write_err(&path))?;
                }
            }
            ModelOutputs::Values(v) => {
                w.write_record(["value"]).map_err(write_err(&path))?;
                for y in v {
                    w.write_record([y.to_string()]).map_err(write_err(&path))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        models.push(ModelEntry {
            label: m.label.clone(),
            predictions_path: file.into(),
        });
    }

    let dense: Vec<&FeatureColumn> = d
        .features
        .iter()
        .filter(|f| f.kind() != FeatureKind::SparseCount)
        .collect();
    let mut feature_kinds = BTreeMap::new();
    let features_path = if dense.is_empty() {
        None
    } else {
        let path = dir.join("features.csv");
        let mut w = csv::Writer::from_path(&path).map_err(write_err(&path))?;
        w.write_record(dense.iter().map(|f| f.name.as_str()))
            .map_err(write_err(&path))?;
        for i in 0..d.len() {
            w.write_record(dense.iter().map(|f| match &f.values {
                FeatureValues::Numeric(v) => v[i].to_string(),
                FeatureValues::Categorical(v) => v[i].clone(),
                FeatureValues::Boolean(v) => v[i].to_string(),
                FeatureValues::SparseCount(_) => unreachable!(),
            }))
            .map_err(write_err(&path))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        for f in &dense {
            feature_kinds.insert(f.name.clone(), f.kind());
        }
        Some(PathBuf::from("features.csv"))
    };

    let mut sparse_features = Vec::new();
    for (i, f) in d.features.iter().enumerate() {
        let FeatureValues::SparseCount(rows) = &f.values else {
            continue;
        };
        let file = format!("sparse_{i}.csv");
        let path = dir.join(&file);
        let mut w = csv::Writer::from_path(&path).map_err(write_err(&path))?;
        w.write_record(["instance_id", "token", "value"])
            .map_err(write_err(&path))?;
        for (id, row) in rows.iter().enumerate() {
            for (tok, c) in row {
                w.write_record([id.to_string(), tok.clone(), c.to_string()])
                    .map_err(write_err(&path))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        sparse_features.push(SparseEntry {
            name: f.name.clone(),
            path: file.into(),
        });
    }

    let manifest = BundleManifest {
        task: d.task.name().to_owned(),
        classes: d.classes().to_vec(),
        models,
        ground_truth_path: "ground_truth.csv".into(),
        features_path,
        feature_kinds,
        sparse_features,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Serialize a dataset to a single JSON cache file.
pub fn write_cache(d: &Dataset, path: &Path) -> Result<()> {
    let bytes = serde_json::to_vec(d)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let d: Dataset = serde_json::from_slice(&bytes)?;
    validate_dataset(&d).into_result()?;
    Ok(d)
}
