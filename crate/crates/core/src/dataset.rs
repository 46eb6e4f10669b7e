//! In-memory model of instances, features, ground truth and model outputs.
//!
//! A [`Dataset`] is columnar: every per-instance array has length `N` and
//! instance `i` is addressed by [`InstanceId`]`(i)`. Class labels are stored
//! once in [`Task::Classification`]; everything else refers to classes by
//! [`ClassId`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|Σ p - 1|` for a probability vector.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(pub usize);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Task {
    Classification { classes: Vec<String> },
    Regression,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Classification { .. } => "classification",
            Task::Regression => "regression",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruth {
    Classes(Vec<ClassId>),
    Values(Vec<f64>),
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        match self {
            GroundTruth::Classes(v) => v.len(),
            GroundTruth::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-instance outputs of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelOutputs {
    /// Row-major `N x classes` probability matrix.
    Probabilities { classes: usize, scores: Vec<f64> },
    Values(Vec<f64>),
}

impl ModelOutputs {
    pub fn len(&self) -> usize {
        match self {
            ModelOutputs::Probabilities { classes, scores } => {
                if *classes == 0 {
                    0
                } else {
                    scores.len() / classes
                }
            }
            ModelOutputs::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub label: String,
    pub outputs: ModelOutputs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Boolean,
    SparseCount,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Numeric => "numeric",
            FeatureKind::Categorical => "categorical",
            FeatureKind::Boolean => "boolean",
            FeatureKind::SparseCount => "sparse-count",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "kebab-case")]
pub enum FeatureValues {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
    Boolean(Vec<bool>),
    /// Token -> count per instance; absent tokens read as zero.
    SparseCount(Vec<BTreeMap<String, f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    #[serde(flatten)]
    pub values: FeatureValues,
}

impl FeatureColumn {
    pub fn new(name: impl Into<String>, values: FeatureValues) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    pub fn kind(&self) -> FeatureKind {
        match self.values {
            FeatureValues::Numeric(_) => FeatureKind::Numeric,
            FeatureValues::Categorical(_) => FeatureKind::Categorical,
            FeatureValues::Boolean(_) => FeatureKind::Boolean,
            FeatureValues::SparseCount(_) => FeatureKind::SparseCount,
        }
    }

    pub fn len(&self) -> usize {
        match &self.values {
            FeatureValues::Numeric(v) => v.len(),
            FeatureValues::Categorical(v) => v.len(),
            FeatureValues::Boolean(v) => v.len(),
            FeatureValues::SparseCount(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sorted, de-duplicated token vocabulary of a sparse-count column.
    pub fn vocabulary(&self) -> Vec<String> {
        match &self.values {
            FeatureValues::SparseCount(rows) => {
                rows
                    .iter()
                    .flat_map(|r| r.keys().cloned())
                    .collect::<std::collections::BTreeSet<_>>()
                    .into_iter()
                    .collect()
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrectnessCategory {
    TP,
    TN,
    FP,
    FN,
}

impl CorrectnessCategory {
    /// TP and TN are correct decisions with respect to the reference class.
    pub fn is_correct(self) -> bool {
        matches!(self, CorrectnessCategory::TP | CorrectnessCategory::TN)
    }
}

/// Immutable after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub task: Task,
    pub ground_truth: GroundTruth,
    pub features: Vec<FeatureColumn>,
    pub models: Vec<Model>,
}

impl Dataset {
    pub fn new(
        task: Task,
        ground_truth: GroundTruth,
        features: Vec<FeatureColumn>,
        models: Vec<Model>,
    ) -> Self {
        Self {
            task,
            ground_truth,
            features,
            models,
        }
    }

    pub fn len(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn instances(&self) -> impl Iterator<Item = InstanceId> {
        (0..self.len()).map(InstanceId)
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.task, Task::Classification { .. })
    }

    pub fn classes(&self) -> &[String] {
        match &self.task {
            Task::Classification { classes } => classes,
            Task::Regression => &[],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes().len()
    }

    pub fn class_id(&self, label: &str) -> Option<ClassId> {
        self.classes().iter().position(|c| c == label).map(ClassId)
    }

    pub fn model_id(&self, label: &str) -> Option<ModelId> {
        self.models.iter().position(|m| m.label == label).map(ModelId)
    }

    pub fn model(&self, id: ModelId) -> &Model {
        &self.models[id.0]
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureColumn> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn require_classification(&self) -> Result<()> {
        if self.is_classification() {
            Ok(())
        } else {
            Err(Error::TaskMismatch {
                expected: "classification",
            })
        }
    }

    pub fn require_regression(&self) -> Result<()> {
        if self.is_classification() {
            Err(Error::TaskMismatch {
                expected: "regression",
            })
        } else {
            Ok(())
        }
    }

    pub fn gt_class(&self, instance: InstanceId) -> Option<ClassId> {
        match &self.ground_truth {
            GroundTruth::Classes(c) => c.get(instance.0).copied(),
            GroundTruth::Values(_) => None,
        }
    }

    pub fn gt_value(&self, instance: InstanceId) -> Option<f64> {
        match &self.ground_truth {
            GroundTruth::Values(v) => v.get(instance.0).copied(),
            GroundTruth::Classes(_) => None,
        }
    }

    /// Probability vector of `model` on `instance`, for classification datasets.
    pub fn scores(&self, model: ModelId, instance: InstanceId) -> Option<&[f64]> {
        match &self.models[model.0].outputs {
            ModelOutputs::Probabilities { classes, scores } => {
                let start = instance.0 * classes;
                scores.get(start..start + classes)
            }
            ModelOutputs::Values(_) => None,
        }
    }

    pub fn predicted(&self, model: ModelId, instance: InstanceId) -> Option<ClassId> {
        self.scores(model, instance).map(predicted_class)
    }

    pub fn predicted_value(&self, model: ModelId, instance: InstanceId) -> Option<f64> {
        match &self.models[model.0].outputs {
            ModelOutputs::Values(v) => v.get(instance.0).copied(),
            ModelOutputs::Probabilities { .. } => None,
        }
    }

    pub fn correctness(
        &self,
        instance: InstanceId,
        model: ModelId,
        class: ClassId,
    ) -> Result<CorrectnessCategory> {
        self.require_classification()?;
        let gt = self
            .gt_class(instance)
            .ok_or(Error::InstanceOutOfRange {
                id: instance.0 as u64,
                len: self.len(),
            })?;
        let pred = self
            .predicted(model, instance)
            .ok_or(Error::TaskMismatch {
                expected: "classification",
            })?;
        Ok(categorize(gt, pred, class))
    }
}

pub(crate) fn categorize(gt: ClassId, pred: ClassId, class: ClassId) -> CorrectnessCategory {
    match (gt == class, pred == class) {
        (true, true) => CorrectnessCategory::TP,
        (true, false) => CorrectnessCategory::FN,
        (false, true) => CorrectnessCategory::FP,
        (false, false) => CorrectnessCategory::TN,
    }
}

/// Argmax of a probability vector; ties go to the lowest class index.
pub fn predicted_class(scores: &[f64]) -> ClassId {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        // NaN never wins
        if s > scores[best] || scores[best].is_nan() && !s.is_nan() {
            best = k;
        }
    }
    ClassId(best)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    pub message: String,
}

impl Violation {
    fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            ..Default::default()
        }
    }

    fn instance(mut self, i: usize) -> Self {
        self.instance = Some(i);
        self
    }

    fn model(mut self, label: &str) -> Self {
        self.model = Some(label.to_owned());
        self
    }

    fn feature(mut self, name: &str) -> Self {
        self.feature = Some(name.to_owned());
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(m) = &self.model {
            write!(f, "model {m:?}: ")?;
        }
        if let Some(feat) = &self.feature {
            write!(f, "feature {feat:?}: ")?;
        }
        if let Some(i) = self.instance {
            write!(f, "instance {i}: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Check every structural and numeric invariant of `d`.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut out = Vec::new();
    let n = d.len();

    let mut seen = HashSet::new();
    for m in &d.models {
        if !seen.insert(m.label.as_str()) {
            out.push(Violation::new("duplicate model label").model(&m.label));
        }
    }
    if d.models.len() < 2 {
        out.push(Violation::new(format!(
            "at least 2 models are required, found {}",
            d.models.len()
        )));
    }

    match (&d.task, &d.ground_truth) {
        (Task::Classification { classes }, GroundTruth::Classes(gt)) => {
            let k = classes.len();
            if k < 2 {
                out.push(Violation::new(format!(
                    "classification needs at least 2 classes, found {k}"
                )));
            }
            let mut labels = HashSet::new();
            for c in classes {
                if !labels.insert(c.as_str()) {
                    out.push(Violation::new(format!("duplicate class label {c:?}")));
                }
            }
            for (i, c) in gt.iter().enumerate() {
                if c.0 >= k {
                    out.push(
                        Violation::new(format!("ground-truth class id {} out of range 0..{k}", c.0))
                            .instance(i),
                    );
                }
            }
            for m in &d.models {
                validate_classifier(m, k, n, &mut out);
            }
        }
        (Task::Regression, GroundTruth::Values(gt)) => {
            for (i, y) in gt.iter().enumerate() {
                if !y.is_finite() {
                    out.push(
                        Violation::new(format!("non-finite ground-truth value {y}")).instance(i),
                    );
                }
            }
            for m in &d.models {
                match &m.outputs {
                    ModelOutputs::Values(v) => {
                        if v.len() != n {
                            out.push(
                                Violation::new(format!("{} outputs for {n} instances", v.len()))
                                    .model(&m.label),
                            );
                        }
                        for (i, y) in v.iter().enumerate() {
                            if !y.is_finite() {
                                out.push(
                                    Violation::new(format!("non-finite regression output {y}"))
                                        .model(&m.label)
                                        .instance(i),
                                );
                            }
                        }
                    }
                    ModelOutputs::Probabilities { .. } => out.push(
                        Violation::new("probability outputs in a regression dataset")
                            .model(&m.label),
                    ),
                }
            }
        }
        (task, _) => out.push(Violation::new(format!(
            "ground truth does not match task {}",
            task.name()
        ))),
    }

    let mut names = HashSet::new();
    for f in &d.features {
        if !names.insert(f.name.as_str()) {
            out.push(Violation::new("duplicate feature name").feature(&f.name));
        }
        if f.len() != n {
            out.push(
                Violation::new(format!("{} values for {n} instances", f.len())).feature(&f.name),
            );
        }
        match &f.values {
            FeatureValues::Numeric(v) => {
                for (i, x) in v.iter().enumerate() {
                    if !x.is_finite() {
                        out.push(
                            Violation::new(format!("non-finite numeric value {x}"))
                                .feature(&f.name)
                                .instance(i),
                        );
                    }
                }
            }
            FeatureValues::SparseCount(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    for (tok, c) in row {
                        if !c.is_finite() || *c < 0.0 {
                            out.push(
                                Violation::new(format!("invalid count {c} for token {tok:?}"))
                                    .feature(&f.name)
                                    .instance(i),
                            );
                        }
                    }
                }
            }
            FeatureValues::Categorical(_) | FeatureValues::Boolean(_) => {}
        }
    }

    ValidationReport { violations: out }
}

fn validate_classifier(m: &Model, k: usize, n: usize, out: &mut Vec<Violation>) {
    let (classes, scores) = match &m.outputs {
        ModelOutputs::Probabilities { classes, scores } => (*classes, scores),
        ModelOutputs::Values(_) => {
            out.push(Violation::new("regression outputs in a classification dataset").model(&m.label));
            return;
        }
    };
    if classes != k {
        out.push(
            Violation::new(format!("{classes} probability columns for {k} classes"))
                .model(&m.label),
        );
        return;
    }
    if scores.len() != n * k {
        out.push(
            Violation::new(format!(
                "{} probability rows for {n} instances",
                scores.len() / k.max(1)
            ))
            .model(&m.label),
        );
    }
    for (i, row) in scores.chunks(k.max(1)).enumerate() {
        if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            out.push(
                Violation::new(format!("probability {bad} outside [0, 1]"))
                    .model(&m.label)
                    .instance(i),
            );
            continue;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            out.push(
                Violation::new(format!("probabilities sum to {sum}, expected 1"))
                    .model(&m.label)
                    .instance(i),
            );
        }
    }
}
