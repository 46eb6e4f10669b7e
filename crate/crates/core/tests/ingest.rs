mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use manifold_core::dataset::validate_dataset;
use manifold_core::fixtures::{toy_dataset, toy_regression_dataset};
use manifold_core::ingest::{export_bundle, load_bundle, read_cache, write_cache};
use manifold_core::{Dataset, Error};

/// Bundles store dense columns before sparse families.
fn canonical(mut d: Dataset) -> Dataset {
    d.features.sort_by(|a, b| a.name.cmp(&b.name));
    d
}

#[test]
fn toy_bundles_round_trip() {
    for d in [toy_dataset(), toy_regression_dataset()] {
        assert!(validate_dataset(&d).is_empty());
        let dir = tempfile::tempdir().unwrap();
        let manifest = export_bundle(&d, dir.path()).unwrap();
        assert_eq!(canonical(load_bundle(&manifest).unwrap()), canonical(d));
    }
}

#[test]
fn cache_round_trip() {
    let d = toy_dataset();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.json");
    write_cache(&d, &path).unwrap();
    assert_eq!(read_cache(&path).unwrap(), d);
}

#[test]
fn bad_probability_row_is_reported_with_location() {
    let mut d = toy_dataset();
    if let manifold_core::dataset::ModelOutputs::Probabilities { scores, .. } = &mut d.models[1].outputs {
        scores[6] = 0.4;
    }
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_bundle(&d, dir.path()).unwrap();
    match load_bundle(&manifest) {
        Err(Error::Validation(report)) => {
            let text = report.to_string();
            assert!(text.contains("M1"), "{text}");
            assert!(text.contains('2'), "{text}");
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_bundle(&toy_dataset(), dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("predictions_0.csv")).unwrap();
    assert!(matches!(load_bundle(&manifest), Err(Error::Io { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_bundles_round_trip(seed in any::<u64>(), regression in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = if regression {
            common::random_regression(&mut rng)
        } else {
            common::random_classification(&mut rng)
        };
        prop_assert!(validate_dataset(&d).is_empty());
        let dir = tempfile::tempdir().unwrap();
        let manifest = export_bundle(&d, dir.path()).unwrap();
        prop_assert_eq!(canonical(load_bundle(&manifest).unwrap()), canonical(d));
    }
}
