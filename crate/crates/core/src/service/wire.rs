//! JSON request and response bodies of `/api/v1`.
//!
//! Session and selection ids are strings. Instance ids are row indices.
//! Models and classes travel as labels; a regression column is `*` (every
//! instance) or `feature=value`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::complementarity::ComplementarityMatrix;
use crate::dataset::{Dataset, FeatureKind, InstanceId};
use crate::divergence::SortKey;
use crate::encoders::{FeatureDivergence, FeatureEncoder};
use crate::geometry::Contour;
use crate::slicing::{
    CellPoint, CellSpec, ColumnKey, CorrectnessFilter, FilterMode, Partition, Quadrant, QuadrantCounts,
    SelectionOrigin,
};

use super::session::SessionConfig;
use super::ApiError;

pub const ALL_INSTANCES: &str = "*";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub task: String,
    pub classes: Vec<String>,
    pub models: Vec<String>,
    pub instances: usize,
    pub features: Vec<FeatureInfo>,
    pub config: SessionConfig,
    pub selections: Vec<String>,
}

/// A cell addressed by labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRef {
    pub x: String,
    pub y: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(default)]
    pub filter_mode: FilterMode,
    #[serde(default)]
    pub correctness_filter: CorrectnessFilter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    pub selection: String,
    /// Selected instances that appear in this cell.
    pub members: Vec<InstanceId>,
    pub tint: BTreeMap<Quadrant, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Points,
    Contours,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResponse {
    pub cell: CellRef,
    pub representation: Representation,
    pub counts: QuadrantCounts,
    pub complementarity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<CellPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contours: Option<Vec<Contour>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<CellPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub highlight: Option<Highlight>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub x: String,
    pub y: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub counts: QuadrantCounts,
    pub complementarity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixResponse {
    pub filter_mode: FilterMode,
    pub correctness_filter: CorrectnessFilter,
    pub rows: Vec<MatrixRow>,
    pub columns: Vec<String>,
    /// `cells[row][column]`.
    pub cells: Vec<Vec<CellSummary>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRequest {
    pub session: String,
    pub cell: CellRef,
    #[serde(default)]
    pub quadrant: Option<Quadrant>,
    #[serde(default)]
    pub polygon: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResponse {
    pub id: String,
    pub cell: CellRef,
    pub origin: SelectionOrigin,
    pub members: BTreeSet<InstanceId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumnInfo {
    pub class: String,
    /// KL(selection ‖ class) over the sparse vocabulary; absent without
    /// sparse features.
    pub divergence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBars {
    pub class: f64,
    pub gt: f64,
    pub non_gt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTableRow {
    pub feature: String,
    /// One entry per column, in column order.
    pub bars: Vec<FeatureBars>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTableResponse {
    pub selection: String,
    pub sort_keys: Vec<SortKey>,
    pub sort_column: String,
    pub top_k: usize,
    pub columns: Vec<FeatureColumnInfo>,
    pub rows: Vec<FeatureTableRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DivergenceResponse {
    Column {
        selection: String,
        class: String,
        divergence: f64,
    },
    Subsets {
        a: String,
        b: String,
        features: Vec<FeatureDivergence>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityResponse {
    pub column: String,
    pub filter_mode: FilterMode,
    #[serde(flatten)]
    pub matrix: ComplementarityMatrix,
}

/// A stored selection id or an explicit instance list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubsetRef {
    Selection(String),
    Instances(BTreeSet<InstanceId>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodersRequest {
    pub session: String,
    pub a: SubsetRef,
    pub b: SubsetRef,
    #[serde(default)]
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodersResponse {
    pub selected: Vec<FeatureDivergence>,
    pub encoders: Vec<FeatureEncoder>,
    pub columns: Vec<EncodedColumn>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

pub fn resolve_model(d: &Dataset, label: &str) -> Result<crate::dataset::ModelId, ApiError> {
    d.model_id(label)
        .ok_or_else(|| ApiError::bad_request("unknown_model", format!("unknown model label {label:?}")))
}

pub fn resolve_column(d: &Dataset, label: Option<&str>) -> Result<ColumnKey, ApiError> {
    if d.is_classification() {
        let label = label.ok_or_else(|| ApiError::bad_request("missing_parameter", "column is required"))?;
        return d
            .class_id(label)
            .map(ColumnKey::Class)
            .ok_or_else(|| ApiError::bad_request("unknown_class", format!("unknown class label {label:?}")));
    }
    match label {
        None | Some(ALL_INSTANCES) => Ok(ColumnKey::Partition(None)),
        Some(l) => {
            let (feature, value) = l.split_once('=').ok_or_else(|| {
                ApiError::bad_request(
                    "invalid_column",
                    format!("regression columns are `*` or `feature=value`, got {l:?}"),
                )
            })?;
            let p = Partition {
                feature: feature.to_owned(),
                value: value.to_owned(),
            };
            p.members(d)?;
            Ok(ColumnKey::Partition(Some(p)))
        }
    }
}

pub fn column_label(d: &Dataset, column: &ColumnKey) -> String {
    match column {
        ColumnKey::Class(c) => d.classes()[c.0].clone(),
        ColumnKey::Partition(None) => ALL_INSTANCES.to_owned(),
        ColumnKey::Partition(Some(p)) => format!("{}={}", p.feature, p.value),
    }
}

pub fn resolve_cell(d: &Dataset, cell: &CellRef) -> Result<CellSpec, ApiError> {
    let spec = CellSpec {
        x_model: resolve_model(d, &cell.x)?,
        y_model: resolve_model(d, &cell.y)?,
        column: resolve_column(d, cell.column.as_deref())?,
        filter_mode: cell.filter_mode,
        correctness_filter: cell.correctness_filter,
    };
    spec.check(d)?;
    Ok(spec)
}

pub fn describe_cell(d: &Dataset, spec: &CellSpec) -> CellRef {
    CellRef {
        x: d.model(spec.x_model).label.clone(),
        y: d.model(spec.y_model).label.clone(),
        column: Some(column_label(d, &spec.column)),
        filter_mode: spec.filter_mode,
        correctness_filter: spec.correctness_filter,
    }
}
