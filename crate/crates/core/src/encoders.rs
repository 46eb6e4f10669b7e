//! Distribution-difference feature encoders.
//!
//! An encoder maps a feature value to `count_a(bin) - count_b(bin)` for two
//! instance subsets, so a downstream model sees where the subsets differ.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureColumn, FeatureKind, FeatureValues, InstanceId};
use crate::divergence::{paired_histogram, subset_feature_divergence, BinSpec, DivergenceConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub feature: String,
    pub bins: BinSpec,
    /// Bin label (category, or bin index for numeric features) to count difference.
    pub mapping: BTreeMap<String, i64>,
}

impl FeatureEncoder {
    pub fn column_name(&self) -> String {
        format!("enc_{}", self.feature)
    }

    fn lookup(&self, bin: Option<usize>) -> i64 {
        bin.and_then(|b| self.bins.labels().get(b).cloned())
            .and_then(|label| self.mapping.get(&label).copied())
            .unwrap_or(0)
    }

    /// Encoded values for every instance of `col`. Unseen values map to 0.
    pub fn encode_column(&self, col: &FeatureColumn) -> Result<Vec<f64>> {
        let out = match &col.values {
            FeatureValues::Numeric(v) => v
                .iter()
                .map(|x| self.lookup(self.bins.numeric_bin(*x)))
                .collect::<Vec<_>>(),
            FeatureValues::Categorical(v) => v
                .iter()
                .map(|x| self.lookup(self.bins.category_bin(x)))
                .collect(),
            FeatureValues::Boolean(v) => v
                .iter()
                .map(|x| self.lookup(self.bins.category_bin(&x.to_string())))
                .collect(),
            FeatureValues::SparseCount(_) => {
                return Err(Error::UnsupportedFeature {
                    name: col.name.clone(),
                    kind: col.kind().as_str(),
                    op: "encoded",
                })
            }
        };
        Ok(out.into_iter().map(|x| x as f64).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDivergence {
    pub feature: String,
    pub divergence: f64,
}

fn is_encodable(kind: FeatureKind) -> bool {
    !matches!(kind, FeatureKind::SparseCount)
}

fn check_subsets(a: &BTreeSet<InstanceId>, b: &BTreeSet<InstanceId>) -> Result<()> {
    if a.is_empty() {
        return Err(Error::EmptySubset("subset a"));
    }
    if b.is_empty() {
        return Err(Error::EmptySubset("subset b"));
    }
    let shared = a.intersection(b).count();
    if shared > 0 {
        return Err(Error::OverlappingSubsets(shared));
    }
    Ok(())
}

/// Dense features whose subset divergence reaches `threshold`, most divergent
/// first (ties by name).
pub fn select_encodable_features(
    d: &Dataset,
    subset_a: &BTreeSet<InstanceId>,
    subset_b: &BTreeSet<InstanceId>,
    threshold: f64,
    cfg: &DivergenceConfig,
) -> Result<Vec<FeatureDivergence>> {
    check_subsets(subset_a, subset_b)?;
    let mut out = Vec::new();
    for f in d.features.iter().filter(|f| is_encodable(f.kind())) {
        let divergence = subset_feature_divergence(d, subset_a, subset_b, &f.name, cfg)?;
        if divergence >= threshold {
            out.push(FeatureDivergence {
                feature: f.name.clone(),
                divergence,
            });
        }
    }
    out.sort_by(|x, y| {
        y.divergence
            .total_cmp(&x.divergence)
            .then_with(|| x.feature.cmp(&y.feature))
    });
    Ok(out)
}

pub fn build_encoder(
    d: &Dataset,
    feature: &str,
    subset_a: &BTreeSet<InstanceId>,
    subset_b: &BTreeSet<InstanceId>,
    cfg: &DivergenceConfig,
) -> Result<FeatureEncoder> {
    let col = d
        .feature(feature)
        .ok_or_else(|| Error::MissingFeature(feature.to_owned()))?;
    if !is_encodable(col.kind()) {
        return Err(Error::UnsupportedFeature {
            name: feature.to_owned(),
            kind: col.kind().as_str(),
            op: "encoded",
        });
    }
    let h = paired_histogram(d, subset_a, subset_b, feature, cfg)?;
    let mapping = h
        .bins
        .labels()
        .into_iter()
        .zip(h.a.iter().zip(&h.b))
        .map(|(label, (a, b))| (label, (*a - *b) as i64))
        .collect();
    Ok(FeatureEncoder {
        feature: feature.to_owned(),
        bins: h.bins,
        mapping,
    })
}

/// A copy of `d` with one `enc_<feature>` numeric column per encoder appended.
pub fn apply_encoders(d: &Dataset, encoders: &[FeatureEncoder]) -> Result<Dataset> {
    let mut out = d.clone();
    for enc in encoders {
        let col = d
            .feature(&enc.feature)
            .ok_or_else(|| Error::MissingFeature(enc.feature.clone()))?;
        let name = enc.column_name();
        if out.feature(&name).is_some() {
            return Err(Error::InvalidArgument(format!("column {name} already exists")));
        }
        out.features
            .push(FeatureColumn::new(name, FeatureValues::Numeric(enc.encode_column(col)?)));
    }
    Ok(out)
}

/// Select features above `threshold` and build an encoder for each.
pub fn encoders_for(
    d: &Dataset,
    subset_a: &BTreeSet<InstanceId>,
    subset_b: &BTreeSet<InstanceId>,
    threshold: f64,
    cfg: &DivergenceConfig,
) -> Result<Vec<FeatureEncoder>> {
    select_encodable_features(d, subset_a, subset_b, threshold, cfg)?
        .iter()
        .map(|f| build_encoder(d, &f.feature, subset_a, subset_b, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassId, GroundTruth};
    use crate::fixtures::{toy_dataset, toy_regression_dataset};
    use proptest::prelude::*;

    fn ids(v: &[usize]) -> BTreeSet<InstanceId> {
        v.iter().copied().map(InstanceId).collect()
    }

    fn with_hours(hours: &[&str]) -> Dataset {
        let mut d = toy_dataset();
        d.ground_truth = GroundTruth::Classes(vec![ClassId(0); hours.len()]);
        d.features = vec![FeatureColumn::new(
            "hour",
            FeatureValues::Categorical(hours.iter().map(|s| s.to_string()).collect()),
        )];
        d
    }

    #[test]
    fn toy_mapping() {
        // a = [1,1,1,2], b = [1,3,3], then three probe rows [1,3,4]
        let d = with_hours(&["1", "1", "1", "2", "1", "3", "3", "1", "3", "4"]);
        let enc = build_encoder(&d, "hour", &ids(&[0, 1, 2, 3]), &ids(&[4, 5, 6]), &Default::default()).unwrap();
        let want: BTreeMap<String, i64> = [("1", 2), ("2", 1), ("3", -2)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        assert_eq!(enc.mapping, want);
        let out = apply_encoders(&d, &[enc]).unwrap();
        let FeatureValues::Numeric(col) = &out.feature("enc_hour").unwrap().values else {
            panic!("numeric column expected")
        };
        assert_eq!(&col[7..], &[2.0, -2.0, 0.0]);
        assert_eq!(out.features.len(), 2);
    }

    #[test]
    fn identical_contents_map_to_zero() {
        let d = with_hours(&["1", "2", "2", "1", "2", "2"]);
        let enc = build_encoder(&d, "hour", &ids(&[0, 1, 2]), &ids(&[3, 4, 5]), &Default::default()).unwrap();
        assert!(enc.mapping.values().all(|v| *v == 0));
    }

    #[test]
    fn empty_encoder_list_is_identity() {
        let d = toy_dataset();
        assert_eq!(apply_encoders(&d, &[]).unwrap(), d);
    }

    #[test]
    fn two_encoders_two_columns() {
        let d = toy_dataset();
        let (a, b) = (ids(&[0, 1, 2]), ids(&[3, 4, 5]));
        let encs = vec![
            build_encoder(&d, "hour", &a, &b, &Default::default()).unwrap(),
            build_encoder(&d, "length", &a, &b, &Default::default()).unwrap(),
        ];
        let out = apply_encoders(&d, &encs).unwrap();
        let names: Vec<_> = out.features.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names[names.len() - 2..], ["enc_hour", "enc_length"]);
        assert_eq!(out.features[..d.features.len()], d.features[..]);
    }

    #[test]
    fn numeric_encoder_uses_edges() {
        let d = toy_dataset();
        // length: a = [12, 30, 25], b = [8, 40, 19]; range 8..40, width 1.6
        let enc = build_encoder(&d, "length", &ids(&[0, 1, 2]), &ids(&[3, 4, 5]), &Default::default()).unwrap();
        let BinSpec::Edges(e) = &enc.bins else { panic!() };
        assert_eq!(e.len(), 21);
        assert_eq!((e[0], e[20]), (8.0, 40.0));
        assert_eq!(enc.mapping.values().sum::<i64>(), 0);
        // 12 -> bin 2, 8 -> bin 0, 40 -> bin 19
        assert_eq!(enc.mapping["2"], 1);
        assert_eq!(enc.mapping["0"], -1);
        assert_eq!(enc.mapping["19"], -1);
        let col = FeatureColumn::new("length", FeatureValues::Numeric(vec![12.0, 100.0, 7.9]));
        assert_eq!(enc.encode_column(&col).unwrap(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn selection_thresholds() {
        let d = toy_regression_dataset();
        let (a, b) = (ids(&[0, 1, 4]), ids(&[2, 3, 5]));
        let cfg = DivergenceConfig::default();
        let all = select_encodable_features(&d, &a, &b, 0.0, &cfg).unwrap();
        assert_eq!(all.len(), d.features.len());
        assert!(all.windows(2).all(|w| w[0].divergence >= w[1].divergence));
        assert!(select_encodable_features(&d, &a, &b, f64::INFINITY, &cfg).unwrap().is_empty());
        assert!(matches!(
            select_encodable_features(&d, &a, &ids(&[0, 2]), 0.0, &cfg),
            Err(Error::OverlappingSubsets(1))
        ));
        assert!(matches!(
            select_encodable_features(&d, &a, &ids(&[]), 0.0, &cfg),
            Err(Error::EmptySubset(_))
        ));
    }

    #[test]
    fn sparse_features_are_not_encodable() {
        let d = toy_dataset();
        assert!(matches!(
            build_encoder(&d, "trigrams", &ids(&[0]), &ids(&[1]), &Default::default()),
            Err(Error::UnsupportedFeature { .. })
        ));
        assert!(matches!(
            build_encoder(&d, "nope", &ids(&[0]), &ids(&[1]), &Default::default()),
            Err(Error::MissingFeature(_))
        ));
    }

    #[test]
    fn json_shape() {
        let d = with_hours(&["1", "2", "1"]);
        let enc = build_encoder(&d, "hour", &ids(&[0, 1]), &ids(&[2]), &Default::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&enc).unwrap(),
            r#"{"feature":"hour","bins":{"categories":["1","2"]},"mapping":{"1":0,"2":1}}"#
        );
    }

    proptest! {
        #[test]
        fn antisymmetric_and_zero_sum(labels in prop::collection::vec(0u8..5, 4..40), split in prop::collection::vec(0u8..3, 40)) {
            let hours: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
            let refs: Vec<&str> = hours.iter().map(String::as_str).collect();
            let d = with_hours(&refs);
            let a: BTreeSet<_> = (0..labels.len()).filter(|&i| split[i] == 0).map(InstanceId).collect();
            let b: BTreeSet<_> = (0..labels.len()).filter(|&i| split[i] == 1).map(InstanceId).collect();
            prop_assume!(!a.is_empty() && !b.is_empty());
            let cfg = DivergenceConfig::default();
            let ab = build_encoder(&d, "hour", &a, &b, &cfg).unwrap();
            let ba = build_encoder(&d, "hour", &b, &a, &cfg).unwrap();
            for (k, v) in &ab.mapping {
                prop_assert_eq!(*v, -ba.mapping[k]);
            }
            prop_assert_eq!(ab.mapping.values().sum::<i64>(), a.len() as i64 - b.len() as i64);
        }
    }
}
