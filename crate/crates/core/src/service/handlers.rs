use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::Json;
use parking_lot::Mutex;
use serde::de::DeserializeOwned;

use crate::complementarity::{complementarity as score, complementarity_matrix};
use crate::dataset::{ClassId, Dataset, FeatureKind, FeatureValues, InstanceId};
use crate::divergence::{column_divergence, feature_rows, rank_features, subset_feature_divergence, FeatureRow, SortKey};
use crate::encoders::{apply_encoders, build_encoder, select_encodable_features, FeatureDivergence};
use crate::geometry::{axis_span, cell_contours, Point, CLASSIFICATION_SPAN};
use crate::slicing::{
    highlight_tint, points_for, quadrant_counts, select_lasso, select_quadrant, CellSpec, ColumnKey, CorrectnessFilter,
    FilterMode, Selection,
};

use super::session::{Session, SessionConfig};
use super::wire::*;
use super::{ApiError, AppState};

type Params = Query<BTreeMap<String, String>>;
type ApiResult<T> = Result<Json<T>, ApiError>;

fn required<'a>(p: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str, ApiError> {
    p.get(key)
        .map(String::as_str)
        .ok_or_else(|| ApiError::bad_request("missing_parameter", format!("query parameter `{key}` is required")))
}

fn parsed<T>(p: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ApiError>
where
    T: FromStr,
    T::Err: Display,
{
    p.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| ApiError::bad_request("invalid_parameter", format!("`{key}`: {e}")))
        })
        .transpose()
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request("invalid_body", e.to_string()))
}

fn session_by_id(state: &AppState, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
    state
        .sessions
        .get(id)
        .ok_or_else(|| ApiError::not_found("unknown_session", format!("unknown session {id:?}")))
}

fn session_of(state: &AppState, p: &BTreeMap<String, String>) -> Result<Arc<Mutex<Session>>, ApiError> {
    session_by_id(state, required(p, "session")?)
}

fn stored_selection(session: &Mutex<Session>, id: &str) -> Result<Selection, ApiError> {
    session
        .lock()
        .selection(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("unknown_selection", format!("unknown selection {id:?}")))
}

fn session_info(d: &Dataset, s: &Session) -> SessionInfo {
    SessionInfo {
        id: s.id.clone(),
        task: d.task.name().to_owned(),
        classes: d.classes().to_vec(),
        models: d.models.iter().map(|m| m.label.clone()).collect(),
        instances: d.len(),
        features: d
            .features
            .iter()
            .map(|f| FeatureInfo {
                name: f.name.clone(),
                kind: f.kind(),
            })
            .collect(),
        config: s.config,
        selections: s.selections.iter().map(|s| s.id.clone()).collect(),
    }
}

/// `?id=` fetches a session; without it a new one is created from the
/// optional overrides `coordinate_mode`, `alpha`, `bins`, `eps`, `min_pts`
/// and `hull_k`.
pub async fn session(State(state): State<Arc<AppState>>, Query(p): Params) -> ApiResult<SessionInfo> {
    let d = &state.dataset;
    if let Some(id) = p.get("id") {
        let s = session_by_id(&state, id)?;
        let info = session_info(d, &s.lock());
        return Ok(Json(info));
    }
    let mut cfg = SessionConfig::default();
    if let Some(m) = parsed(&p, "coordinate_mode")? {
        cfg.coordinate_mode = m;
    }
    if let Some(a) = parsed(&p, "alpha")? {
        cfg.divergence.smoothing_alpha = a;
    }
    if let Some(b) = parsed(&p, "bins")? {
        cfg.divergence.numeric_bins = b;
    }
    if let Some(e) = parsed(&p, "eps")? {
        cfg.geometry.eps = e;
    }
    if let Some(m) = parsed(&p, "min_pts")? {
        cfg.geometry.min_pts = m;
    }
    if let Some(k) = parsed(&p, "hull_k")? {
        cfg.geometry.hull_k = k;
    }
    let s = state.sessions.create(cfg)?;
    let info = session_info(d, &s.lock());
    Ok(Json(info))
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect()
}

/// Rows are every model pair, or `fixed` against each other model.
/// Columns default to every class, or `*` for regression.
pub async fn matrix(State(state): State<Arc<AppState>>, Query(p): Params) -> ApiResult<MatrixResponse> {
    let d = &state.dataset;
    let cfg = session_of(&state, &p)?.lock().config;
    let filter_mode: FilterMode = parsed(&p, "filter_mode")?.unwrap_or_default();
    let correctness_filter: CorrectnessFilter = parsed(&p, "correctness_filter")?.unwrap_or_default();

    let pairs: Vec<(usize, usize)> = match p.get("fixed") {
        Some(label) => {
            let f = resolve_model(d, label)?.0;
            (0..d.models.len()).filter(|&o| o != f).map(|o| (f, o)).collect()
        }
        None => {
            let m = d.models.len();
            (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
        }
    };
    let labels: Vec<String> = match p.get("cols") {
        Some(c) => split_list(c).into_iter().map(str::to_owned).collect(),
        None if d.is_classification() => d.classes().to_vec(),
        None => vec![ALL_INSTANCES.to_owned()],
    };
    let columns: Vec<ColumnKey> = labels
        .iter()
        .map(|l| resolve_column(d, Some(l)))
        .collect::<Result<_, _>>()?;

    let mut cells = Vec::with_capacity(pairs.len());
    for &(x, y) in &pairs {
        let mut row = Vec::with_capacity(columns.len());
        for column in &columns {
            let spec = CellSpec {
                x_model: crate::dataset::ModelId(x),
                y_model: crate::dataset::ModelId(y),
                column: column.clone(),
                filter_mode,
                correctness_filter,
            };
            spec.check(d)?;
            let counts = quadrant_counts(&points_for(d, &spec, cfg.coordinate_mode)?);
            row.push(CellSummary {
                counts,
                complementarity: score(counts).ok().map(|s| s.value),
            });
        }
        cells.push(row);
    }
    Ok(Json(MatrixResponse {
        filter_mode,
        correctness_filter,
        rows: pairs
            .iter()
            .map(|&(x, y)| MatrixRow {
                x: d.models[x].label.clone(),
                y: d.models[y].label.clone(),
            })
            .collect(),
        columns: labels,
        cells,
    }))
}

fn cell_ref(p: &BTreeMap<String, String>) -> Result<CellRef, ApiError> {
    Ok(CellRef {
        x: required(p, "x")?.to_owned(),
        y: required(p, "y")?.to_owned(),
        column: p.get("column").cloned(),
        filter_mode: parsed(p, "filter_mode")?.unwrap_or_default(),
        correctness_filter: parsed(p, "correctness_filter")?.unwrap_or_default(),
    })
}

/// `representation` is `points` (default) or `contours`; `selection`
/// adds the highlight of a stored selection.
pub async fn cell(State(state): State<Arc<AppState>>, Query(p): Params) -> ApiResult<CellResponse> {
    let d = &state.dataset;
    let session = session_of(&state, &p)?;
    let cfg = session.lock().config;
    let spec = resolve_cell(d, &cell_ref(&p)?)?;
    let representation = match p.get("representation").map(String::as_str) {
        None | Some("points") => Representation::Points,
        Some("contours") => Representation::Contours,
        Some(other) => {
            return Err(ApiError::bad_request(
                "invalid_parameter",
                format!("`representation`: expected points or contours, got {other:?}"),
            ))
        }
    };
    let points = points_for(d, &spec, cfg.coordinate_mode)?;
    let counts = quadrant_counts(&points);
    let highlight = match p.get("selection") {
        Some(id) => {
            let sel = stored_selection(&session, id)?;
            Some(Highlight {
                selection: id.clone(),
                members: points
                    .iter()
                    .map(|q| q.instance)
                    .filter(|i| sel.members.contains(i))
                    .collect(),
                tint: highlight_tint(&sel.members, &points),
            })
        }
        None => None,
    };
    let (points, contours, noise) = match representation {
        Representation::Points => (Some(points), None, None),
        Representation::Contours => {
            let span = if d.is_classification() {
                CLASSIFICATION_SPAN
            } else {
                axis_span(&points)
            };
            let c = cell_contours(&points, &cfg.geometry, span)?;
            (None, Some(c.contours), Some(c.noise))
        }
    };
    Ok(Json(CellResponse {
        cell: describe_cell(d, &spec),
        representation,
        counts,
        complementarity: score(counts).ok().map(|s| s.value),
        points,
        contours,
        noise,
        highlight,
    }))
}

fn selection_response(d: &Dataset, id: String, sel: &Selection) -> SelectionResponse {
    SelectionResponse {
        id,
        cell: describe_cell(d, &sel.source_cell),
        origin: sel.origin.clone(),
        members: sel.members.clone(),
    }
}

/// Body: `{session, cell, quadrant}` or `{session, cell, polygon}`.
pub async fn create_selection(State(state): State<Arc<AppState>>, raw: Bytes) -> ApiResult<SelectionResponse> {
    let d = &state.dataset;
    let req: SelectionRequest = body(&raw)?;
    let session = session_by_id(&state, &req.session)?;
    let mode = session.lock().config.coordinate_mode;
    let spec = resolve_cell(d, &req.cell)?;
    let points = points_for(d, &spec, mode)?;
    let selection = match (req.quadrant, &req.polygon) {
        (Some(q), None) => select_quadrant(&spec, &points, q),
        (None, Some(poly)) => {
            let poly: Vec<Point> = poly.iter().map(|v| Point::new(v[0], v[1])).collect();
            select_lasso(&spec, &points, &poly)?
        }
        _ => {
            return Err(ApiError::bad_request(
                "invalid_body",
                "exactly one of `quadrant` or `polygon` is required",
            ))
        }
    };
    let id = session.lock().add_selection(selection.clone());
    state.sessions.persist()?;
    Ok(Json(selection_response(d, id, &selection)))
}

pub async fn get_selection(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(p): Params,
) -> ApiResult<SelectionResponse> {
    let session = session_of(&state, &p)?;
    let sel = stored_selection(&session, &id)?;
    Ok(Json(selection_response(&state.dataset, id, &sel)))
}

fn has_sparse(d: &Dataset) -> bool {
    d.features.iter().any(|f| f.kind() == FeatureKind::SparseCount)
}

fn class_of(d: &Dataset, label: &str) -> Result<ClassId, ApiError> {
    d.class_id(label)
        .ok_or_else(|| ApiError::bad_request("unknown_class", format!("unknown class label {label:?}")))
}

/// Bars of every feature in every class column, ranked within
/// `sort_column` (default: the selection's own column).
pub async fn features(State(state): State<Arc<AppState>>, Query(p): Params) -> ApiResult<FeatureTableResponse> {
    let d = &state.dataset;
    d.require_classification()?;
    let session = session_of(&state, &p)?;
    let cfg = session.lock().config;
    let sel_id = required(&p, "selection")?;
    let sel = stored_selection(&session, sel_id)?;
    if sel.members.is_empty() {
        return Err(crate::Error::EmptySubset("selection").into());
    }
    let top_k = parsed(&p, "top_k")?.unwrap_or(10);
    let sort_keys = SortKey::parse_list(p.get("sort").map(String::as_str).unwrap_or("C"))?;
    let sort_class = match p.get("sort_column") {
        Some(label) => class_of(d, label)?,
        None => match sel.source_cell.column {
            ColumnKey::Class(c) => c,
            ColumnKey::Partition(_) => unreachable!("classification selections carry a class column"),
        },
    };

    let classes: Vec<ClassId> = (0..d.num_classes()).map(ClassId).collect();
    let tables: Vec<Vec<FeatureRow>> = classes
        .iter()
        .map(|&c| feature_rows(d, &sel.members, c))
        .collect::<Result<_, _>>()?;
    let ranked = rank_features(&tables[sort_class.0], &sort_keys, top_k)?;
    let lookup: Vec<BTreeMap<&str, &FeatureRow>> = tables
        .iter()
        .map(|t| t.iter().map(|r| (r.feature.as_str(), r)).collect())
        .collect();
    let rows = ranked
        .into_iter()
        .map(|feature| FeatureTableRow {
            bars: lookup
                .iter()
                .map(|t| {
                    let r = t[feature.as_str()];
                    FeatureBars {
                        class: r.class,
                        gt: r.gt,
                        non_gt: r.non_gt,
                    }
                })
                .collect(),
            feature,
        })
        .collect();
    let columns = classes
        .iter()
        .map(|&c| {
            Ok(FeatureColumnInfo {
                class: d.classes()[c.0].clone(),
                divergence: if has_sparse(d) {
                    Some(column_divergence(d, &sel.members, c, &cfg.divergence)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<_, crate::Error>>()?;
    Ok(Json(FeatureTableResponse {
        selection: sel_id.to_owned(),
        sort_keys,
        sort_column: d.classes()[sort_class.0].clone(),
        top_k,
        columns,
        rows,
    }))
}

/// `selection` + `class` gives the column divergence; `a` + `b` gives the
/// per-feature divergence between two selections (all non-sparse features,
/// or only `feature`).
pub async fn divergence(State(state): State<Arc<AppState>>, Query(p): Params) -> ApiResult<DivergenceResponse> {
    let d = &state.dataset;
    let session = session_of(&state, &p)?;
    let cfg = session.lock().config.divergence;
    if let Some(sel_id) = p.get("selection") {
        let sel = stored_selection(&session, sel_id)?;
        let label = required(&p, "class")?;
        d.require_classification()?;
        let divergence = column_divergence(d, &sel.members, class_of(d, label)?, &cfg)?;
        return Ok(Json(DivergenceResponse::Column {
            selection: sel_id.clone(),
            class: label.to_owned(),
            divergence,
        }));
    }
    let (a_id, b_id) = (required(&p, "a")?, required(&p, "b")?);
    let a = stored_selection(&session, a_id)?.members;
    let b = stored_selection(&session, b_id)?.members;
    let names: Vec<String> = match p.get("feature") {
        Some(f) => vec![f.clone()],
        None => d
            .features
            .iter()
            .filter(|f| f.kind() != FeatureKind::SparseCount)
            .map(|f| f.name.clone())
            .collect(),
    };
    let mut features = names
        .into_iter()
        .map(|feature| {
            let divergence = subset_feature_divergence(d, &a, &b, &feature, &cfg)?;
            Ok(FeatureDivergence { feature, divergence })
        })
        .collect::<Result<Vec<_>, crate::Error>>()?;
    features.sort_by(|x, y| {
        y.divergence
            .total_cmp(&x.divergence)
            .then_with(|| x.feature.cmp(&y.feature))
    });
    Ok(Json(DivergenceResponse::Subsets {
        a: a_id.to_owned(),
        b: b_id.to_owned(),
        features,
    }))
}

pub async fn complementarity(
    State(state): State<Arc<AppState>>,
    Query(p): Params,
) -> ApiResult<ComplementarityResponse> {
    let d = &state.dataset;
    let cfg = session_of(&state, &p)?.lock().config;
    let filter_mode: FilterMode = parsed(&p, "filter_mode")?.unwrap_or_default();
    let column = resolve_column(d, p.get("column").map(String::as_str))?;
    let matrix = complementarity_matrix(d, &column, filter_mode, cfg.coordinate_mode)?;
    Ok(Json(ComplementarityResponse {
        column: column_label(d, &column),
        filter_mode,
        matrix,
    }))
}

fn resolve_subset(d: &Dataset, session: &Mutex<Session>, r: &SubsetRef) -> Result<BTreeSet<InstanceId>, ApiError> {
    match r {
        SubsetRef::Selection(id) => Ok(stored_selection(session, id)?.members),
        SubsetRef::Instances(ids) => {
            if let Some(i) = ids.iter().find(|i| i.0 >= d.len()) {
                return Err(crate::Error::InstanceOutOfRange {
                    id: i.0 as u64,
                    len: d.len(),
                }
                .into());
            }
            Ok(ids.clone())
        }
    }
}

/// Body: `{session, a, b, threshold}` where `a` and `b` are selection ids
/// or instance id arrays.
pub async fn encoders(State(state): State<Arc<AppState>>, raw: Bytes) -> ApiResult<EncodersResponse> {
    let d = &state.dataset;
    let req: EncodersRequest = body(&raw)?;
    let session = session_by_id(&state, &req.session)?;
    let cfg = session.lock().config.divergence;
    let a = resolve_subset(d, &session, &req.a)?;
    let b = resolve_subset(d, &session, &req.b)?;
    let selected = select_encodable_features(d, &a, &b, req.threshold, &cfg)?;
    let encoders = selected
        .iter()
        .map(|f| build_encoder(d, &f.feature, &a, &b, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let augmented = apply_encoders(d, &encoders)?;
    let columns = augmented.features[d.features.len()..]
        .iter()
        .map(|c| match &c.values {
            FeatureValues::Numeric(v) => EncodedColumn {
                name: c.name.clone(),
                values: v.clone(),
            },
            _ => unreachable!("encoded columns are numeric"),
        })
        .collect();
    Ok(Json(EncodersResponse {
        selected,
        encoders,
        columns,
    }))
}
