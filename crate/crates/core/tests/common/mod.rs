#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;

use manifold_core::dataset::{
    ClassId, Dataset, FeatureColumn, FeatureValues, GroundTruth, Model, ModelOutputs, Task,
};

pub fn probability_row(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn dense_features(rng: &mut impl Rng, n: usize) -> Vec<FeatureColumn> {
    let tokens = ["alpha", "beta", "gamma", "delta", "eps"];
    vec![
        FeatureColumn::new(
            "num",
            FeatureValues::Numeric((0..n).map(|_| rng.random_range(-10.0..10.0)).collect()),
        ),
        FeatureColumn::new(
            "cat",
            FeatureValues::Categorical(
                (0..n)
                    .map(|_| format!("c{}", rng.random_range(0..4)))
                    .collect(),
            ),
        ),
        FeatureColumn::new(
            "flag",
            FeatureValues::Boolean((0..n).map(|_| rng.random_bool(0.5)).collect()),
        ),
        FeatureColumn::new(
            "tokens",
            FeatureValues::SparseCount(
                (0..n)
                    .map(|_| {
                        let mut row = BTreeMap::new();
                        for t in tokens {
                            if rng.random_bool(0.3) {
                                row.insert(t.to_owned(), rng.random_range(1..4) as f64);
                            }
                        }
                        row
                    })
                    .collect(),
            ),
        ),
    ]
}

/// N in 1..=100, K in 2..=5, 2 to 4 models.
pub fn random_classification(rng: &mut impl Rng) -> Dataset {
    let n = rng.random_range(1..=100);
    let k = rng.random_range(2..=5);
    let m = rng.random_range(2..=4);
    let classes: Vec<String> = (0..k).map(|c| format!("k{c}")).collect();
    let gt: Vec<ClassId> = (0..n).map(|_| ClassId(rng.random_range(0..k))).collect();
    let models = (0..m)
        .map(|j| Model {
            label: format!("M{j}"),
            outputs: ModelOutputs::Probabilities {
                classes: k,
                scores: (0..n).flat_map(|_| probability_row(rng, k)).collect(),
            },
        })
        .collect();
    let features = dense_features(rng, n);
    Dataset::new(
        Task::Classification { classes },
        GroundTruth::Classes(gt),
        features,
        models,
    )
}

pub fn random_regression(rng: &mut impl Rng) -> Dataset {
    let n = rng.random_range(1..=100);
    let m = rng.random_range(2..=4);
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
    let models = (0..m)
        .map(|j| Model {
            label: format!("R{j}"),
            outputs: ModelOutputs::Values(y.iter().map(|v| v + rng.random_range(-20.0..20.0)).collect()),
        })
        .collect();
    let features = dense_features(rng, n);
    Dataset::new(Task::Regression, GroundTruth::Values(y), features, models)
}
