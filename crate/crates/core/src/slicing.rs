//! Cell coordinates, filter modes, quadrants and selections.
//!
//! A cell compares two models (`x_model`, `y_model`) on one column. For
//! classification the column is a class: a point's x coordinate is positive
//! when the x model predicts the column class and negative otherwise, with a
//! magnitude taken from the model's scores (see [`CoordinateMode`]). For
//! regression the coordinates are residuals `ŷ - y` and the column is an
//! optional partition of the instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, Dataset, FeatureValues, InstanceId, ModelId};
use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, polygon_area, Point};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordinateMode {
    /// |coord| is the model's score for its own predicted class.
    #[default]
    Confidence,
    /// |coord| is the model's score for the column class.
    TargetScore,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FilterMode {
    #[default]
    All,
    Union,
    Gt,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectnessFilter {
    #[default]
    Any,
    BothCorrect,
    BothWrong,
    XCorrectYWrong,
    XWrongYCorrect,
}

impl CorrectnessFilter {
    fn admits(self, x_correct: bool, y_correct: bool) -> bool {
        match self {
            CorrectnessFilter::Any => true,
            CorrectnessFilter::BothCorrect => x_correct && y_correct,
            CorrectnessFilter::BothWrong => !x_correct && !y_correct,
            CorrectnessFilter::XCorrectYWrong => x_correct && !y_correct,
            CorrectnessFilter::XWrongYCorrect => !x_correct && y_correct,
        }
    }
}

macro_rules! serde_from_str {
    ($($ty:ty),*) => {$(
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                serde_json::from_value(serde_json::Value::String(s.to_owned()))
                    .map_err(|_| Error::InvalidArgument(format!(
                        "unrecognized {} {s:?}", stringify!($ty)
                    )))
            }
        }
    )*};
}
serde_from_str!(CoordinateMode, FilterMode, CorrectnessFilter, Quadrant);

/// A partition of a regression dataset: instances whose `feature` equals `value`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub feature: String,
    pub value: String,
}

impl Partition {
    pub fn members(&self, d: &Dataset) -> Result<BTreeSet<InstanceId>> {
        let col = d
            .feature(&self.feature)
            .ok_or_else(|| Error::MissingFeature(self.feature.clone()))?;
        let keep: Vec<bool> = match &col.values {
            FeatureValues::Categorical(v) => v.iter().map(|x| *x == self.value).collect(),
            FeatureValues::Boolean(v) => v.iter().map(|x| x.to_string() == self.value).collect(),
            _ => {
                return Err(Error::UnsupportedFeature {
                    name: self.feature.clone(),
                    kind: col.kind().as_str(),
                    op: "used as a partition",
                })
            }
        };
        Ok(keep
            .iter()
            .enumerate()
            .filter(|(_, k)| **k)
            .map(|(i, _)| InstanceId(i))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKey {
    Class(ClassId),
    /// `None` selects every instance.
    Partition(Option<Partition>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellSpec {
    pub x_model: ModelId,
    pub y_model: ModelId,
    pub column: ColumnKey,
    #[serde(default)]
    pub filter_mode: FilterMode,
    #[serde(default)]
    pub correctness_filter: CorrectnessFilter,
}

impl CellSpec {
    pub fn classification(x: ModelId, y: ModelId, class: ClassId, filter_mode: FilterMode) -> Self {
        Self {
            x_model: x,
            y_model: y,
            column: ColumnKey::Class(class),
            filter_mode,
            correctness_filter: CorrectnessFilter::Any,
        }
    }

    pub fn with_correctness(mut self, filter: CorrectnessFilter) -> Self {
        self.correctness_filter = filter;
        self
    }

    pub fn check(&self, d: &Dataset) -> Result<()> {
        if self.x_model == self.y_model {
            return Err(Error::InvalidArgument(
                "a cell needs two distinct models".into(),
            ));
        }
        for m in [self.x_model, self.y_model] {
            if m.0 >= d.models.len() {
                return Err(Error::InvalidArgument(format!("unknown model id {}", m.0)));
            }
        }
        match &self.column {
            ColumnKey::Class(c) => {
                d.require_classification()?;
                if c.0 >= d.num_classes() {
                    return Err(Error::InvalidArgument(format!("unknown class id {}", c.0)));
                }
            }
            ColumnKey::Partition(_) => d.require_regression()?,
        }
        Ok(())
    }

    fn class(&self) -> Result<ClassId> {
        match self.column {
            ColumnKey::Class(c) => Ok(c),
            ColumnKey::Partition(_) => Err(Error::TaskMismatch {
                expected: "classification",
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Q1, Quadrant::Q2, Quadrant::Q3, Quadrant::Q4];

    /// Zero counts as the positive half.
    pub fn from_halves(x_positive: bool, y_positive: bool) -> Self {
        match (x_positive, y_positive) {
            (true, true) => Quadrant::Q1,
            (false, true) => Quadrant::Q2,
            (false, false) => Quadrant::Q3,
            (true, false) => Quadrant::Q4,
        }
    }

    pub fn of(x: f64, y: f64) -> Self {
        Self::from_halves(x >= 0.0, y >= 0.0)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Classification: blue iff GT is the column class. Regression: over or
/// under by the sign of the pair's mean residual, zero counting as over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointColor {
    Blue,
    Red,
    Over,
    Under,
}

impl PointColor {
    pub const ALL: [PointColor; 4] = [PointColor::Blue, PointColor::Red, PointColor::Over, PointColor::Under];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellPoint {
    pub instance: InstanceId,
    pub x: f64,
    pub y: f64,
    pub color: PointColor,
    pub quadrant: Quadrant,
}

impl CellPoint {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantCounts {
    pub n_q1: usize,
    pub n_q2: usize,
    pub n_q3: usize,
    pub n_q4: usize,
}

impl QuadrantCounts {
    pub fn new(n_q1: usize, n_q2: usize, n_q3: usize, n_q4: usize) -> Self {
        Self {
            n_q1,
            n_q2,
            n_q3,
            n_q4,
        }
    }

    pub fn total(&self) -> usize {
        self.n_q1 + self.n_q2 + self.n_q3 + self.n_q4
    }

    pub fn get(&self, q: Quadrant) -> usize {
        match q {
            Quadrant::Q1 => self.n_q1,
            Quadrant::Q2 => self.n_q2,
            Quadrant::Q3 => self.n_q3,
            Quadrant::Q4 => self.n_q4,
        }
    }

    fn bump(&mut self, q: Quadrant) {
        match q {
            Quadrant::Q1 => self.n_q1 += 1,
            Quadrant::Q2 => self.n_q2 += 1,
            Quadrant::Q3 => self.n_q3 += 1,
            Quadrant::Q4 => self.n_q4 += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionOrigin {
    Quadrant(Quadrant),
    Lasso(Vec<[f64; 2]>),
}

/// A symptom set: instances picked in one cell. Ids are assigned by the
/// session store that persists it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub source_cell: CellSpec,
    pub origin: SelectionOrigin,
    pub members: BTreeSet<InstanceId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionPoint {
    pub instance: InstanceId,
    pub epsilon_x: f64,
    pub epsilon_y: f64,
}

impl RegressionPoint {
    pub fn quadrant(&self) -> Quadrant {
        Quadrant::of(self.epsilon_x, self.epsilon_y)
    }

    pub fn color(&self) -> PointColor {
        if self.epsilon_x + self.epsilon_y >= 0.0 {
            PointColor::Over
        } else {
            PointColor::Under
        }
    }

    pub fn to_cell_point(&self) -> CellPoint {
        CellPoint {
            instance: self.instance,
            x: self.epsilon_x,
            y: self.epsilon_y,
            color: self.color(),
            quadrant: self.quadrant(),
        }
    }
}

/// Instances admitted by the cell's filter mode (correctness filter not applied).
pub fn filter_members(d: &Dataset, spec: &CellSpec) -> Result<BTreeSet<InstanceId>> {
    let class = spec.class()?;
    d.require_classification()?;
    let mut out = BTreeSet::new();
    for i in d.instances() {
        let gt = d.gt_class(i) == Some(class);
        let keep = match spec.filter_mode {
            FilterMode::All => true,
            FilterMode::Gt => gt,
            FilterMode::Union => {
                gt || d.predicted(spec.x_model, i) == Some(class)
                    || d.predicted(spec.y_model, i) == Some(class)
            }
        };
        if keep {
            out.insert(i);
        }
    }
    Ok(out)
}

fn coordinate(d: &Dataset, model: ModelId, i: InstanceId, class: ClassId, mode: CoordinateMode) -> (f64, bool) {
    let scores = d.scores(model, i).expect("classification outputs");
    let pred = crate::dataset::predicted_class(scores);
    let hit = pred == class;
    let magnitude = match mode {
        CoordinateMode::Confidence => scores[pred.0],
        CoordinateMode::TargetScore => scores[class.0],
    };
    (if hit { magnitude } else { -magnitude }, hit)
}

/// Points of a classification cell after both filters.
pub fn cell_points(d: &Dataset, spec: &CellSpec, mode: CoordinateMode) -> Result<Vec<CellPoint>> {
    spec.check(d)?;
    let class = spec.class()?;
    let members = filter_members(d, spec)?;
    let mut out = Vec::with_capacity(members.len());
    for i in members {
        let gt = d.gt_class(i).expect("classification ground truth");
        let (x, x_hit) = coordinate(d, spec.x_model, i, class, mode);
        let (y, y_hit) = coordinate(d, spec.y_model, i, class, mode);
        if spec.correctness_filter != CorrectnessFilter::Any {
            // TP or TN
            let x_ok = (gt == class) == x_hit;
            let y_ok = (gt == class) == y_hit;
            if !spec.correctness_filter.admits(x_ok, y_ok) {
                continue;
            }
        }
        out.push(CellPoint {
            instance: i,
            x,
            y,
            color: if gt == class {
                PointColor::Blue
            } else {
                PointColor::Red
            },
            // quadrant follows the prediction, so a zero target score on the
            // negative half stays on the negative half
            quadrant: Quadrant::from_halves(x_hit, y_hit),
        });
    }
    Ok(out)
}

/// Residual points of a regression cell, optionally restricted to a partition.
pub fn regression_points(
    d: &Dataset,
    x_model: ModelId,
    y_model: ModelId,
    partition: Option<&Partition>,
) -> Result<Vec<RegressionPoint>> {
    d.require_regression()?;
    let keep = partition.map(|p| p.members(d)).transpose()?;
    let mut out = Vec::new();
    for i in d.instances() {
        if keep.as_ref().is_some_and(|k| !k.contains(&i)) {
            continue;
        }
        let y = d.gt_value(i).expect("regression ground truth");
        let yx = d
            .predicted_value(x_model, i)
            .ok_or(Error::TaskMismatch { expected: "regression" })?;
        let yy = d
            .predicted_value(y_model, i)
            .ok_or(Error::TaskMismatch { expected: "regression" })?;
        out.push(RegressionPoint {
            instance: i,
            epsilon_x: yx - y,
            epsilon_y: yy - y,
        });
    }
    Ok(out)
}

/// Points of any cell: classification cells through [`cell_points`],
/// regression cells as residual points.
pub fn points_for(d: &Dataset, spec: &CellSpec, mode: CoordinateMode) -> Result<Vec<CellPoint>> {
    spec.check(d)?;
    match &spec.column {
        ColumnKey::Class(_) => cell_points(d, spec, mode),
        ColumnKey::Partition(p) => {
            if spec.correctness_filter != CorrectnessFilter::Any {
                return Err(Error::InvalidArgument(
                    "correctness filters apply to classification cells".into(),
                ));
            }
            Ok(regression_points(d, spec.x_model, spec.y_model, p.as_ref())?
                .iter()
                .map(RegressionPoint::to_cell_point)
                .collect())
        }
    }
}

pub fn quadrant_counts(points: &[CellPoint]) -> QuadrantCounts {
    let mut c = QuadrantCounts::default();
    for p in points {
        c.bump(p.quadrant);
    }
    c
}

pub fn select_quadrant(spec: &CellSpec, points: &[CellPoint], q: Quadrant) -> Selection {
    Selection {
        source_cell: spec.clone(),
        origin: SelectionOrigin::Quadrant(q),
        members: points
            .iter()
            .filter(|p| p.quadrant == q)
            .map(|p| p.instance)
            .collect(),
    }
}

/// Even-odd lasso; points on an edge are inside.
pub fn select_lasso(spec: &CellSpec, points: &[CellPoint], polygon: &[Point]) -> Result<Selection> {
    if polygon.len() < 3 {
        return Err(Error::DegeneratePolygon("a lasso needs at least 3 vertices"));
    }
    if polygon_area(polygon) == 0.0 {
        return Err(Error::DegeneratePolygon("lasso polygon has zero area"));
    }
    Ok(Selection {
        source_cell: spec.clone(),
        origin: SelectionOrigin::Lasso(polygon.iter().map(|p| [p.x, p.y]).collect()),
        members: points
            .iter()
            .filter(|p| point_in_polygon(p.position(), polygon))
            .map(|p| p.instance)
            .collect(),
    })
}

/// Fraction of blue (under, for regression) among selected instances, for
/// each quadrant of this cell that holds at least one of them.
pub fn highlight_tint(members: &BTreeSet<InstanceId>, points: &[CellPoint]) -> BTreeMap<Quadrant, f64> {
    let mut tally: BTreeMap<Quadrant, (usize, usize)> = BTreeMap::new();
    for p in points.iter().filter(|p| members.contains(&p.instance)) {
        let e = tally.entry(p.quadrant).or_default();
        e.1 += 1;
        if matches!(p.color, PointColor::Blue | PointColor::Under) {
            e.0 += 1;
        }
    }
    tally
        .into_iter()
        .map(|(q, (blue, all))| (q, blue as f64 / all as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{toy_dataset, toy_regression_dataset};

    const A: ClassId = ClassId(0);

    fn toy_cell(filter: FilterMode) -> CellSpec {
        CellSpec::classification(ModelId(0), ModelId(1), A, filter)
    }

    fn ids(v: &[usize]) -> BTreeSet<InstanceId> {
        v.iter().copied().map(InstanceId).collect()
    }

    #[test]
    fn toy_cell_coordinates() {
        let d = toy_dataset();
        let pts = cell_points(&d, &toy_cell(FilterMode::All), CoordinateMode::Confidence).unwrap();
        let got: Vec<_> = pts.iter().map(|p| (p.x, p.y, p.color, p.quadrant)).collect();
        use PointColor::*;
        use Quadrant::*;
        assert_eq!(
            got,
            vec![
                (0.7, 0.9, Blue, Q1),
                (-0.6, 0.6, Blue, Q2),
                (-0.8, -0.7, Red, Q3),
                (0.5, -0.7, Red, Q4),
                (-0.7, -0.4, Red, Q3),
                (-0.4, 0.5, Red, Q2),
            ]
        );
    }

    #[test]
    fn target_score_mode_uses_column_class() {
        let d = toy_dataset();
        let pts = cell_points(&d, &toy_cell(FilterMode::All), CoordinateMode::TargetScore).unwrap();
        // i1: M0 scores A at 0.2 but predicts B
        assert_eq!((pts[1].x, pts[1].y), (-0.2, 0.6));
        assert_eq!(pts[1].quadrant, Quadrant::Q2);
    }

    #[test]
    fn filter_modes_on_toy() {
        let d = toy_dataset();
        assert_eq!(filter_members(&d, &toy_cell(FilterMode::Gt)).unwrap(), ids(&[0, 1]));
        assert_eq!(
            filter_members(&d, &toy_cell(FilterMode::Union)).unwrap(),
            ids(&[0, 1, 3, 5])
        );
        assert_eq!(
            filter_members(&d, &toy_cell(FilterMode::All)).unwrap(),
            ids(&[0, 1, 2, 3, 4, 5])
        );
    }

    #[test]
    fn counts_and_quadrant_selections() {
        let d = toy_dataset();
        let cell = toy_cell(FilterMode::All);
        let pts = cell_points(&d, &cell, CoordinateMode::Confidence).unwrap();
        assert_eq!(quadrant_counts(&pts), QuadrantCounts::new(1, 2, 2, 1));
        assert_eq!(quadrant_counts(&[]), QuadrantCounts::default());
        assert_eq!(select_quadrant(&cell, &pts, Quadrant::Q2).members, ids(&[1, 5]));
        assert_eq!(select_quadrant(&cell, &pts, Quadrant::Q1).members, ids(&[0]));
        assert!(select_quadrant(&cell, &[], Quadrant::Q3).members.is_empty());
    }

    #[test]
    fn all_positive_points_land_in_q1() {
        let pts: Vec<_> = (0..7)
            .map(|i| CellPoint {
                instance: InstanceId(i),
                x: 0.1 * i as f64,
                y: 0.5,
                color: PointColor::Red,
                quadrant: Quadrant::of(0.1 * i as f64, 0.5),
            })
            .collect();
        assert_eq!(quadrant_counts(&pts), QuadrantCounts::new(7, 0, 0, 0));
    }

    #[test]
    fn lasso_selection() {
        let d = toy_dataset();
        let cell = toy_cell(FilterMode::All);
        let pts = cell_points(&d, &cell, CoordinateMode::Confidence).unwrap();
        let q1 = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        assert_eq!(select_lasso(&cell, &pts, &q1).unwrap().members, ids(&[0]));
        assert!(point_in_polygon(Point::new(0.5, 0.5), &q1));
        assert!(!point_in_polygon(Point::new(2.0, 2.0), &q1));
        assert!(point_in_polygon(Point::new(1.0, 0.5), &q1), "edges are inside");
    }

    #[test]
    fn degenerate_lassos_rejected() {
        let cell = toy_cell(FilterMode::All);
        let two = [Point::new(0.0, 0.0), Point::new(1.0, 1.0)];
        assert!(matches!(
            select_lasso(&cell, &[], &two),
            Err(Error::DegeneratePolygon(_))
        ));
        let flat = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert!(matches!(
            select_lasso(&cell, &[], &flat),
            Err(Error::DegeneratePolygon(_))
        ));
    }

    #[test]
    fn tint_fractions() {
        let d = toy_dataset();
        let pts = cell_points(&d, &toy_cell(FilterMode::All), CoordinateMode::Confidence).unwrap();
        let t = highlight_tint(&ids(&[1, 5]), &pts);
        assert_eq!(t.len(), 1);
        assert_eq!(t[&Quadrant::Q2], 0.5);
        assert_eq!(highlight_tint(&ids(&[0]), &pts)[&Quadrant::Q1], 1.0);
        assert_eq!(highlight_tint(&ids(&[2, 4]), &pts)[&Quadrant::Q3], 0.0);
    }

    #[test]
    fn correctness_filter_slices() {
        let d = toy_dataset();
        let cell = toy_cell(FilterMode::All).with_correctness(CorrectnessFilter::XWrongYCorrect);
        let pts = cell_points(&d, &cell, CoordinateMode::Confidence).unwrap();
        // column A: M0 is wrong on i1 (FN) and i3 (FP), M1 is right on both
        let got: BTreeSet<_> = pts.iter().map(|p| p.instance).collect();
        assert_eq!(got, ids(&[1, 3]));
        let both = toy_cell(FilterMode::Gt).with_correctness(CorrectnessFilter::BothCorrect);
        let got: BTreeSet<_> = cell_points(&d, &both, CoordinateMode::Confidence)
            .unwrap()
            .iter()
            .map(|p| p.instance)
            .collect();
        assert_eq!(got, ids(&[0]));
    }

    #[test]
    fn residuals() {
        let d = toy_regression_dataset();
        let pts = regression_points(&d, ModelId(0), ModelId(1), None).unwrap();
        assert_eq!(pts[0].epsilon_x, 3.0);
        assert_eq!((pts[1].epsilon_x, pts[1].epsilon_y), (-5.0, 8.0));
        assert_eq!(pts[1].quadrant(), Quadrant::Q2);
        assert_eq!(pts[5].epsilon_y, 0.0);
        assert_eq!(pts[5].quadrant(), Quadrant::Q1);
        let colors: Vec<PointColor> = pts.iter().map(RegressionPoint::color).collect();
        use PointColor::{Over, Under};
        assert_eq!(colors, [Over, Over, Under, Under, Under, Over]);

        let summer = Partition {
            feature: "season".into(),
            value: "summer".into(),
        };
        let pts = regression_points(&d, ModelId(0), ModelId(1), Some(&summer)).unwrap();
        assert_eq!(pts.len(), 3);
    }

    #[test]
    fn task_mismatches() {
        assert!(matches!(
            regression_points(&toy_dataset(), ModelId(0), ModelId(1), None),
            Err(Error::TaskMismatch { .. })
        ));
        assert!(matches!(
            cell_points(&toy_regression_dataset(), &toy_cell(FilterMode::All), CoordinateMode::Confidence),
            Err(Error::TaskMismatch { .. })
        ));
    }

    #[test]
    fn same_model_cell_rejected() {
        let d = toy_dataset();
        let cell = CellSpec::classification(ModelId(1), ModelId(1), A, FilterMode::All);
        assert!(matches!(
            cell_points(&d, &cell, CoordinateMode::Confidence),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn enums_parse_from_wire_names() {
        assert_eq!("UNION".parse::<FilterMode>().unwrap(), FilterMode::Union);
        assert_eq!(
            "target-score".parse::<CoordinateMode>().unwrap(),
            CoordinateMode::TargetScore
        );
        assert_eq!(
            "x-wrong-y-correct".parse::<CorrectnessFilter>().unwrap(),
            CorrectnessFilter::XWrongYCorrect
        );
        assert_eq!("Q3".parse::<Quadrant>().unwrap(), Quadrant::Q3);
        assert!("Q5".parse::<Quadrant>().is_err());
    }
}
