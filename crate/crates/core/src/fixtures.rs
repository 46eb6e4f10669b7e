//! Small hand-enumerated datasets shared by tests, examples and the FFI crate.

use std::collections::BTreeMap;

use crate::dataset::{
    ClassId, Dataset, FeatureColumn, FeatureValues, GroundTruth, Model, ModelOutputs, Task,
};

/// Six instances, three classes `A`, `B`, `C`, two models `M0`, `M1`.
///
/// Ground truth is `[A, A, B, B, C, C]`. Features: a sparse `trigrams` family,
/// a categorical `hour`, a numeric `length` and a boolean `question`.
pub fn toy_dataset() -> Dataset {
    let m0 = [
        [0.7, 0.2, 0.1],
        [0.2, 0.6, 0.2],
        [0.1, 0.8, 0.1],
        [0.5, 0.3, 0.2],
        [0.1, 0.2, 0.7],
        [0.3, 0.4, 0.3],
    ];
    let m1 = [
        [0.9, 0.05, 0.05],
        [0.6, 0.3, 0.1],
        [0.2, 0.7, 0.1],
        [0.1, 0.7, 0.2],
        [0.3, 0.3, 0.4],
        [0.5, 0.2, 0.3],
    ];
    let probs = |rows: [[f64; 3]; 6]| ModelOutputs::Probabilities {
        classes: 3,
        scores: rows.iter().flatten().copied().collect(),
    };

    Dataset::new(
        Task::Classification {
            classes: vec!["A".into(), "B".into(), "C".into()],
        },
        GroundTruth::Classes([0, 0, 1, 1, 2, 2].into_iter().map(ClassId).collect()),
        vec![
            FeatureColumn::new("trigrams", FeatureValues::SparseCount(toy_trigrams())),
            FeatureColumn::new(
                "hour",
                FeatureValues::Categorical(
                    ["17", "17", "2", "22", "6", "6"].map(String::from).to_vec(),
                ),
            ),
            FeatureColumn::new(
                "length",
                FeatureValues::Numeric(vec![12.0, 30.0, 25.0, 8.0, 40.0, 19.0]),
            ),
            FeatureColumn::new(
                "question",
                FeatureValues::Boolean(vec![false, true, false, false, true, true]),
            ),
        ],
        vec![
            Model {
                label: "M0".into(),
                outputs: probs(m0),
            },
            Model {
                label: "M1".into(),
                outputs: probs(m1),
            },
        ],
    )
}

/// Sparse trigram counts of [`toy_dataset`].
pub fn toy_trigrams() -> Vec<BTreeMap<String, f64>> {
    let rows: [&[(&str, f64)]; 6] = [
        &[("the old man", 2.0), ("old man said", 1.0)],
        &[("the old man", 1.0), ("in the night", 1.0)],
        &[("in the night", 2.0), ("dark and stormy", 1.0)],
        &[("dark and stormy", 1.0), ("old man said", 1.0)],
        &[("the raven said", 2.0), ("in the night", 1.0)],
        &[("the raven said", 1.0), ("dark and stormy", 2.0)],
    ];
    rows.iter()
        .map(|r| r.iter().map(|(t, c)| (t.to_string(), *c)).collect())
        .collect()
}

/// Six-instance regression dataset with two models and a `season` partition.
///
/// Instance 1 has `y = 100`, `M0 = 95`, `M1 = 108`.
pub fn toy_regression_dataset() -> Dataset {
    Dataset::new(
        Task::Regression,
        GroundTruth::Values(vec![100.0, 100.0, 50.0, 80.0, 120.0, 60.0]),
        vec![
            FeatureColumn::new(
                "season",
                FeatureValues::Categorical(
                    ["summer", "summer", "winter", "winter", "summer", "winter"]
                        .map(String::from)
                        .to_vec(),
                ),
            ),
            FeatureColumn::new(
                "temp",
                FeatureValues::Numeric(vec![28.0, 31.0, 2.0, 5.0, 25.0, -3.0]),
            ),
        ],
        vec![
            Model {
                label: "M0".into(),
                outputs: ModelOutputs::Values(vec![103.0, 95.0, 45.0, 85.0, 110.0, 66.0]),
            },
            Model {
                label: "M1".into(),
                outputs: ModelOutputs::Values(vec![101.0, 108.0, 52.0, 70.0, 125.0, 60.0]),
            },
        ],
    )
}
