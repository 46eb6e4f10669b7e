//! Feature aggregation, smoothed distributions and KL divergence.
//!
//! Divergences are natural-log KL, reported in nats. Every distribution is
//! additively smoothed so the divergence is always finite.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, Dataset, FeatureColumn, FeatureValues, InstanceId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DivergenceConfig {
    pub smoothing_alpha: f64,
    /// Equal-width bins over the combined range of two numeric subsets.
    pub numeric_bins: usize,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        Self {
            smoothing_alpha: 1e-6,
            numeric_bins: 20,
        }
    }
}

impl DivergenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothing_alpha must be > 0, got {}",
                self.smoothing_alpha
            )));
        }
        if self.numeric_bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "numeric_bins must be >= 2, got {}",
                self.numeric_bins
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationKind {
    Sum,
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateVector {
    pub kind: AggregationKind,
    pub values: BTreeMap<String, f64>,
    /// Set when the subset had no instances.
    pub empty: bool,
}

/// Aggregate one feature over `subset`.
///
/// Sparse counts sum per token, categorical values count per category,
/// booleans count `true`, numeric values average. Keys are tokens,
/// categories, or the feature name for numeric and boolean columns.
pub fn aggregate(subset: &BTreeSet<InstanceId>, feature: &FeatureColumn) -> AggregateVector {
    let mut values = BTreeMap::new();
    let kind = match &feature.values {
        FeatureValues::SparseCount(rows) => {
            for t in feature.vocabulary() {
                values.insert(t, 0.0);
            }
            for i in subset {
                for (tok, c) in &rows[i.0] {
                    *values.get_mut(tok).expect("vocabulary covers rows") += c;
                }
            }
            AggregationKind::Sum
        }
        FeatureValues::Categorical(v) => {
            for c in v {
                values.entry(c.clone()).or_insert(0.0);
            }
            for i in subset {
                *values.get_mut(&v[i.0]).expect("category seen") += 1.0;
            }
            AggregationKind::Sum
        }
        FeatureValues::Boolean(v) => {
            let n = subset.iter().filter(|i| v[i.0]).count();
            values.insert(feature.name.clone(), n as f64);
            AggregationKind::Sum
        }
        FeatureValues::Numeric(v) => {
            let mean = if subset.is_empty() {
                0.0
            } else {
                subset.iter().map(|i| v[i.0]).sum::<f64>() / subset.len() as f64
            };
            values.insert(feature.name.clone(), mean);
            AggregationKind::Mean
        }
    };
    AggregateVector {
        kind,
        values,
        empty: subset.is_empty(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDistribution {
    pub support: Vec<String>,
    pub probabilities: Vec<f64>,
    pub smoothing_alpha: f64,
}

/// `p_k = (agg_k + α) / (Σ agg + α·|support|)`.
pub fn to_distribution(
    agg: &BTreeMap<String, f64>,
    support: &[String],
    cfg: &DivergenceConfig,
) -> Result<FeatureDistribution> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    if let Some(k) = agg.keys().find(|k| !support.contains(k)) {
        return Err(Error::InvalidArgument(format!("key {k:?} is not in the support")));
    }
    let counts: Vec<f64> = support
        .iter()
        .map(|s| agg.get(s).copied().unwrap_or(0.0))
        .collect();
    Ok(smoothed(support.to_vec(), &counts, cfg.smoothing_alpha))
}

fn smoothed(support: Vec<String>, counts: &[f64], alpha: f64) -> FeatureDistribution {
    let total: f64 = counts.iter().sum::<f64>() + alpha * counts.len() as f64;
    FeatureDistribution {
        probabilities: counts.iter().map(|c| (c + alpha) / total).collect(),
        support,
        smoothing_alpha: alpha,
    }
}

/// `KL(p ‖ q) = Σ p_k ln(p_k / q_k)` in nats.
pub fn kl_divergence(p: &FeatureDistribution, q: &FeatureDistribution) -> Result<f64> {
    if p.support != q.support {
        return Err(Error::SupportMismatch);
    }
    Ok(kl(&p.probabilities, &q.probabilities))
}

pub(crate) fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pk, _)| **pk > 0.0)
        .map(|(pk, qk)| pk * (pk / qk).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Prefix tokens with their family when more than one sparse family exists.
fn sparse_key(family: &str, token: &str, qualified: bool) -> String {
    if qualified {
        format!("{family}:{token}")
    } else {
        token.to_owned()
    }
}

fn sparse_families(d: &Dataset) -> Vec<&FeatureColumn> {
    d.features
        .iter()
        .filter(|f| matches!(f.values, FeatureValues::SparseCount(_)))
        .collect()
}

/// Token sums over `subset` across every sparse-count column, keyed over
/// the shared vocabulary (zeros included).
pub fn sparse_totals(d: &Dataset, subset: &BTreeSet<InstanceId>) -> BTreeMap<String, f64> {
    let families = sparse_families(d);
    let qualified = families.len() > 1;
    let mut out = BTreeMap::new();
    for f in families {
        for (tok, v) in aggregate(subset, f).values {
            *out.entry(sparse_key(&f.name, &tok, qualified)).or_insert(0.0) += v;
        }
    }
    out
}

pub fn class_members(d: &Dataset, class: ClassId) -> BTreeSet<InstanceId> {
    d.instances().filter(|&i| d.gt_class(i) == Some(class)).collect()
}

/// `KL(P_selection ‖ P_class)` over the shared sparse vocabulary, where the
/// class side aggregates every instance whose ground truth is `class`.
pub fn column_divergence(
    d: &Dataset,
    selection: &BTreeSet<InstanceId>,
    class: ClassId,
    cfg: &DivergenceConfig,
) -> Result<f64> {
    d.require_classification()?;
    cfg.validate()?;
    if selection.is_empty() {
        return Err(Error::EmptySubset("selection"));
    }
    let sel = sparse_totals(d, selection);
    let cls = sparse_totals(d, &class_members(d, class));
    let support: Vec<String> = sel.keys().cloned().collect();
    let p = to_distribution(&sel, &support, cfg)?;
    let q = to_distribution(&cls, &support, cfg)?;
    kl_divergence(&p, &q)
}

/// One row of the feature interpretation table for a single class column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub feature: String,
    /// Aggregate over every instance of the column class (gray bar).
    pub class: f64,
    /// Selected instances whose ground truth is the column class (blue bar).
    pub gt: f64,
    /// Selected instances of any other class (red bar).
    pub non_gt: f64,
}

/// Count-valued aggregates of every sparse, categorical and boolean
/// feature. Categorical columns expand to `feature=value` rows; numeric
/// columns are left out since their means do not share the count scale.
pub fn aggregate_all(d: &Dataset, subset: &BTreeSet<InstanceId>) -> BTreeMap<String, f64> {
    let mut out = sparse_totals(d, subset);
    for f in &d.features {
        match &f.values {
            FeatureValues::SparseCount(_) | FeatureValues::Numeric(_) => {}
            FeatureValues::Categorical(_) => {
                for (cat, v) in aggregate(subset, f).values {
                    out.insert(format!("{}={cat}", f.name), v);
                }
            }
            _ => out.extend(aggregate(subset, f).values),
        }
    }
    out
}

pub fn feature_rows(d: &Dataset, selection: &BTreeSet<InstanceId>, class: ClassId) -> Result<Vec<FeatureRow>> {
    d.require_classification()?;
    let (gt, non_gt): (BTreeSet<_>, BTreeSet<_>) =
        selection.iter().partition(|&&i| d.gt_class(i) == Some(class));
    let c = aggregate_all(d, &class_members(d, class));
    let g = aggregate_all(d, &gt);
    let n = aggregate_all(d, &non_gt);
    Ok(c.into_iter()
        .map(|(feature, class)| FeatureRow {
            gt: g[&feature],
            non_gt: n[&feature],
            feature,
            class,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SortKey {
    /// Class aggregate.
    C,
    /// GT-colored (blue) part of the selection.
    G,
    /// Non-GT (red) part of the selection.
    N,
}

impl SortKey {
    fn value(self, row: &FeatureRow) -> f64 {
        match self {
            SortKey::C => row.class,
            SortKey::G => row.gt,
            SortKey::N => row.non_gt,
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<SortKey>> {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| match t.trim() {
                "C" | "c" => Ok(SortKey::C),
                "G" | "g" => Ok(SortKey::G),
                "N" | "n" => Ok(SortKey::N),
                other => Err(Error::InvalidSort(format!("unknown key {other:?}"))),
            })
            .collect()
    }
}

/// One key sorts descending by that aggregate; two keys sort descending by
/// the absolute difference of the two. Ties go to the feature name.
pub fn rank_features(rows: &[FeatureRow], keys: &[SortKey], top_k: usize) -> Result<Vec<String>> {
    let keys: Vec<SortKey> = keys.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let score: Box<dyn Fn(&FeatureRow) -> f64> = match keys.as_slice() {
        [] => return Err(Error::InvalidSort("at least one sort key is required".into())),
        [k] => {
            let k = *k;
            Box::new(move |r| k.value(r))
        }
        [a, b] => {
            let (a, b) = (*a, *b);
            Box::new(move |r| (a.value(r) - b.value(r)).abs())
        }
        _ => {
            return Err(Error::InvalidSort(format!(
                "at most two sort keys, got {}",
                keys.len()
            )))
        }
    };
    let mut order: Vec<&FeatureRow> = rows.iter().collect();
    order.sort_by(|x, y| {
        score(y)
            .total_cmp(&score(x))
            .then_with(|| x.feature.cmp(&y.feature))
    });
    Ok(order
        .into_iter()
        .take(top_k)
        .map(|r| r.feature.clone())
        .collect())
}

/// Discretization shared by subset divergence and feature encoders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinSpec {
    Categories(Vec<String>),
    /// `bins + 1` ascending edges; the last bin is closed. Two equal edges
    /// describe a single-value bin.
    Edges(Vec<f64>),
}

impl BinSpec {
    pub fn len(&self) -> usize {
        match self {
            BinSpec::Categories(c) => c.len(),
            BinSpec::Edges(e) => e.len().saturating_sub(1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            BinSpec::Categories(c) => c.clone(),
            BinSpec::Edges(_) => (0..self.len()).map(|i| i.to_string()).collect(),
        }
    }

    /// Bin of a numeric value, `None` outside the edges.
    pub fn numeric_bin(&self, v: f64) -> Option<usize> {
        let BinSpec::Edges(e) = self else { return None };
        let (lo, hi) = (*e.first()?, *e.last()?);
        if !(v >= lo && v <= hi) {
            return None;
        }
        let bins = e.len() - 1;
        if hi == lo {
            return Some(0);
        }
        let idx = ((v - lo) / (hi - lo) * bins as f64).floor() as usize;
        Some(idx.min(bins - 1))
    }

    pub fn category_bin(&self, v: &str) -> Option<usize> {
        let BinSpec::Categories(c) = self else { return None };
        c.binary_search_by(|x| x.as_str().cmp(v)).ok()
    }
}

/// Raw histograms of one feature over two subsets on a shared discretization.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedHistogram {
    pub bins: BinSpec,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Bin contributions of one instance.
type BinIndex<'a> = Box<dyn Fn(InstanceId) -> Vec<(usize, f64)> + 'a>;

pub fn paired_histogram(
    d: &Dataset,
    subset_a: &BTreeSet<InstanceId>,
    subset_b: &BTreeSet<InstanceId>,
    feature: &str,
    cfg: &DivergenceConfig,
) -> Result<PairedHistogram> {
    cfg.validate()?;
    if subset_a.is_empty() {
        return Err(Error::EmptySubset("subset a"));
    }
    if subset_b.is_empty() {
        return Err(Error::EmptySubset("subset b"));
    }
    let col = d
        .feature(feature)
        .ok_or_else(|| Error::MissingFeature(feature.to_owned()))?;
    if let Some(i) = subset_a.iter().chain(subset_b).find(|i| i.0 >= d.len()) {
        return Err(Error::InstanceOutOfRange {
            id: i.0 as u64,
            len: d.len(),
        });
    }

    let (bins, index): (BinSpec, BinIndex) = match &col.values {
        FeatureValues::Numeric(v) => {
            let (lo, hi) = subset_a
                .iter()
                .chain(subset_b)
                .map(|i| v[i.0])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
            let edges = if lo == hi {
                vec![lo, hi]
            } else {
                let w = (hi - lo) / cfg.numeric_bins as f64;
                let mut e: Vec<f64> = (0..cfg.numeric_bins).map(|k| lo + w * k as f64).collect();
                e.push(hi);
                e
            };
            let spec = BinSpec::Edges(edges);
            let lookup = spec.clone();
            (
                spec,
                Box::new(move |i| vec![(lookup.numeric_bin(v[i.0]).expect("value in range"), 1.0)]),
            )
        }
        FeatureValues::Categorical(v) => {
            let cats: Vec<String> = subset_a
                .iter()
                .chain(subset_b)
                .map(|i| v[i.0].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let spec = BinSpec::Categories(cats);
            let lookup = spec.clone();
            (
                spec,
                Box::new(move |i| vec![(lookup.category_bin(&v[i.0]).expect("category"), 1.0)]),
            )
        }
        FeatureValues::Boolean(v) => (
            BinSpec::Categories(vec!["false".into(), "true".into()]),
            Box::new(move |i| vec![(v[i.0] as usize, 1.0)]),
        ),
        FeatureValues::SparseCount(rows) => {
            let vocab = col.vocabulary();
            let spec = BinSpec::Categories(vocab.clone());
            (
                spec,
                Box::new(move |i| {
                    rows[i.0]
                        .iter()
                        .map(|(t, c)| (vocab.binary_search(t).expect("token in vocabulary"), *c))
                        .collect()
                }),
            )
        }
    };
    let fill = |subset: &BTreeSet<InstanceId>| {
        let mut h = vec![0.0; bins.len()];
        for &i in subset {
            for (b, w) in index(i) {
                h[b] += w;
            }
        }
        h
    };
    let a = fill(subset_a);
    let b = fill(subset_b);
    Ok(PairedHistogram { bins, a, b })
}

/// KL(P_a ‖ P_b) between the smoothed value histograms of two subsets.
pub fn subset_feature_divergence(
    d: &Dataset,
    subset_a: &BTreeSet<InstanceId>,
    subset_b: &BTreeSet<InstanceId>,
    feature: &str,
    cfg: &DivergenceConfig,
) -> Result<f64> {
    let h = paired_histogram(d, subset_a, subset_b, feature, cfg)?;
    if h.bins.is_empty() {
        return Ok(0.0);
    }
    let labels = h.bins.labels();
    let p = smoothed(labels.clone(), &h.a, cfg.smoothing_alpha);
    let q = smoothed(labels, &h.b, cfg.smoothing_alpha);
    kl_divergence(&p, &q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureColumn, FeatureValues, GroundTruth, Model, ModelOutputs, Task};
    use crate::fixtures::toy_dataset;
    use proptest::prelude::*;

    fn ids(v: &[usize]) -> BTreeSet<InstanceId> {
        v.iter().copied().map(InstanceId).collect()
    }

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn dist(p: &[f64]) -> FeatureDistribution {
        FeatureDistribution {
            support: (0..p.len()).map(|i| i.to_string()).collect(),
            probabilities: p.to_vec(),
            smoothing_alpha: 1e-6,
        }
    }

    #[test]
    fn sparse_sum_and_empty_subset() {
        let col = FeatureColumn::new(
            "t",
            FeatureValues::SparseCount(vec![
                map(&[("old", 2.0)]),
                map(&[("old", 1.0), ("night", 1.0)]),
            ]),
        );
        let agg = aggregate(&ids(&[0, 1]), &col);
        assert_eq!(agg.values, map(&[("old", 3.0), ("night", 1.0)]));
        assert_eq!(agg.kind, AggregationKind::Sum);
        let empty = aggregate(&ids(&[]), &col);
        assert!(empty.empty);
        assert!(empty.values.values().all(|v| *v == 0.0));
    }

    #[test]
    fn numeric_mean() {
        let col = FeatureColumn::new("x", FeatureValues::Numeric(vec![1.0, 3.0]));
        let agg = aggregate(&ids(&[0, 1]), &col);
        assert_eq!(agg.values["x"], 2.0);
        assert_eq!(agg.kind, AggregationKind::Mean);
    }

    #[test]
    fn smoothing() {
        let support = vec!["a".to_string(), "b".to_string()];
        let tiny = DivergenceConfig {
            smoothing_alpha: 1e-12,
            ..Default::default()
        };
        let p = to_distribution(&map(&[("a", 1.0), ("b", 1.0)]), &support, &tiny).unwrap();
        assert_eq!(p.probabilities, vec![0.5, 0.5]);
        let p = to_distribution(&map(&[("a", 0.0), ("b", 0.0)]), &support, &Default::default()).unwrap();
        assert_eq!(p.probabilities, vec![0.5, 0.5]);
        let p = to_distribution(&map(&[("a", 9.0), ("b", 1.0)]), &support, &Default::default()).unwrap();
        assert!((p.probabilities[0] - 0.9).abs() < 1e-6);
        assert!((p.probabilities[1] - 0.1).abs() < 1e-6);
        assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(matches!(
            to_distribution(&map(&[]), &[], &Default::default()),
            Err(Error::EmptySupport)
        ));
    }

    #[test]
    fn kl_values() {
        let a = dist(&[0.5, 0.5]);
        let b = dist(&[0.9, 0.1]);
        assert_eq!(kl_divergence(&a, &a).unwrap(), 0.0);
        // 0.5 ln(5/9) + 0.5 ln 5
        assert!((kl_divergence(&a, &b).unwrap() - 0.510_825_623_765_990_7).abs() < 1e-12);
        // 0.9 ln 1.8 + 0.1 ln 0.2
        assert!((kl_divergence(&b, &a).unwrap() - 0.368_064_207_168_497_1).abs() < 1e-12);
        let mut c = dist(&[0.5, 0.5]);
        c.support[0] = "other".into();
        assert!(matches!(kl_divergence(&a, &c), Err(Error::SupportMismatch)));
    }

    #[test]
    fn column_divergence_of_class_itself_is_zero() {
        let d = toy_dataset();
        let cfg = DivergenceConfig::default();
        let a = class_members(&d, ClassId(0));
        assert!(column_divergence(&d, &a, ClassId(0), &cfg).unwrap() < 1e-6);
        for c in 0..3 {
            let v = column_divergence(&d, &ids(&[1, 5]), ClassId(c), &cfg).unwrap();
            assert!(v.is_finite() && v >= 0.0);
        }
        assert!(matches!(
            column_divergence(&d, &ids(&[]), ClassId(0), &cfg),
            Err(Error::EmptySubset(_))
        ));
    }

    fn two_class_tokens() -> Dataset {
        let rows = vec![
            map(&[("x", 2.0), ("y", 1.0)]),
            map(&[("x", 1.0), ("y", 2.0)]),
            map(&[("z", 3.0)]),
            map(&[("w", 2.0), ("z", 1.0)]),
        ];
        Dataset::new(
            Task::Classification {
                classes: vec!["A".into(), "B".into()],
            },
            GroundTruth::Classes(vec![ClassId(0), ClassId(0), ClassId(1), ClassId(1)]),
            vec![FeatureColumn::new("tok", FeatureValues::SparseCount(rows))],
            (0..2)
                .map(|m| Model {
                    label: format!("M{m}"),
                    outputs: ModelOutputs::Probabilities {
                        classes: 2,
                        scores: vec![0.5; 8],
                    },
                })
                .collect(),
        )
    }

    #[test]
    fn disjoint_tokens_diverge_more() {
        let d = two_class_tokens();
        let cfg = DivergenceConfig::default();
        // selection uses only class A's tokens
        let sel = ids(&[0]);
        let vs_a = column_divergence(&d, &sel, ClassId(0), &cfg).unwrap();
        let vs_b = column_divergence(&d, &sel, ClassId(1), &cfg).unwrap();
        // frozen by direct evaluation: P = (2/3, 1/3, 0, 0) on (x, y, w, z)
        // against Q_A = (1/2, 1/2, 0, 0) and Q_B = (0, 0, 1/3, 2/3), α = 1e-6
        assert!((vs_a - 0.056_633_026).abs() < 1e-6, "{vs_a}");
        assert!(vs_b > 10.0 && vs_b > vs_a, "{vs_b}");
    }

    #[test]
    fn ranking() {
        let rows = |triples: &[(&str, f64, f64, f64)]| -> Vec<FeatureRow> {
            triples
                .iter()
                .map(|(f, c, g, n)| FeatureRow {
                    feature: f.to_string(),
                    class: *c,
                    gt: *g,
                    non_gt: *n,
                })
                .collect()
        };
        let t = rows(&[("old", 9.0, 0.0, 0.0), ("like", 5.0, 0.0, 0.0), ("night", 3.0, 0.0, 0.0)]);
        assert_eq!(rank_features(&t, &[SortKey::C], 2).unwrap(), ["old", "like"]);
        assert!(rank_features(&t, &[SortKey::C], 0).unwrap().is_empty());
        let t = rows(&[("a", 0.0, 1.0, 1.0), ("old", 0.0, 3.0, 1.0)]);
        assert_eq!(rank_features(&t, &[SortKey::G, SortKey::N], 5).unwrap(), ["old", "a"]);
        assert!(matches!(
            rank_features(&t, &[SortKey::C, SortKey::G, SortKey::N], 5),
            Err(Error::InvalidSort(_))
        ));
        assert_eq!(SortKey::parse_list("G,N").unwrap(), [SortKey::G, SortKey::N]);
    }

    #[test]
    fn hour_subsets_diverge() {
        let d = toy_dataset();
        let cfg = DivergenceConfig::default();
        let a = ids(&[0, 1, 2]);
        let b = ids(&[3, 4, 5]);
        assert!(subset_feature_divergence(&d, &a, &a, "hour", &cfg).unwrap().abs() < 1e-9);
        let h = paired_histogram(&d, &a, &b, "hour", &cfg).unwrap();
        assert_eq!(h.bins.len(), 4);
        assert!(subset_feature_divergence(&d, &a, &b, "hour", &cfg).unwrap() > 0.0);
    }

    #[test]
    fn constant_numeric_is_single_bin() {
        let mut d = toy_dataset();
        d.features
            .push(FeatureColumn::new("k", FeatureValues::Numeric(vec![4.0; 6])));
        let cfg = DivergenceConfig::default();
        let h = paired_histogram(&d, &ids(&[0, 1]), &ids(&[2]), "k", &cfg).unwrap();
        assert_eq!(h.bins.len(), 1);
        assert_eq!(
            subset_feature_divergence(&d, &ids(&[0, 1]), &ids(&[2]), "k", &cfg).unwrap(),
            0.0
        );
    }

    #[test]
    fn empty_subset_rejected() {
        let d = toy_dataset();
        assert!(matches!(
            subset_feature_divergence(&d, &ids(&[]), &ids(&[1]), "hour", &Default::default()),
            Err(Error::EmptySubset(_))
        ));
    }

    #[test]
    fn alpha_does_not_reorder_toy_columns() {
        let d = toy_dataset();
        let sel = ids(&[1, 5]);
        let order = |alpha: f64| {
            let cfg = DivergenceConfig {
                smoothing_alpha: alpha,
                ..Default::default()
            };
            let mut v: Vec<(f64, usize)> = (0..3)
                .map(|c| (column_divergence(&d, &sel, ClassId(c), &cfg).unwrap(), c))
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v.into_iter().map(|(_, c)| c).collect::<Vec<_>>()
        };
        let reference = order(1e-6);
        assert_eq!(order(1e-3), reference);
        assert_eq!(order(1e-9), reference);
    }

    /// Independent recomputation: histogram via a plain count map, smoothing
    /// and KL written out longhand.
    fn oracle_divergence(values: &[f64], a: &[usize], b: &[usize], bins: usize, alpha: f64) -> f64 {
        let all: Vec<f64> = a.iter().chain(b).map(|&i| values[i]).collect();
        let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let nb = if lo == hi { 1 } else { bins };
        let bucket = |v: f64| -> usize {
            if lo == hi {
                0
            } else {
                let mut k = ((v - lo) / (hi - lo) * nb as f64) as usize;
                if k >= nb {
                    k = nb - 1;
                }
                k
            }
        };
        let mut ca = vec![0.0; nb];
        let mut cb = vec![0.0; nb];
        for &i in a {
            ca[bucket(values[i])] += 1.0;
        }
        for &i in b {
            cb[bucket(values[i])] += 1.0;
        }
        let za = a.len() as f64 + alpha * nb as f64;
        let zb = b.len() as f64 + alpha * nb as f64;
        let mut total = 0.0;
        for k in 0..nb {
            let p = (ca[k] + alpha) / za;
            let q = (cb[k] + alpha) / zb;
            total += p * (p / q).ln();
        }
        total
    }

    #[test]
    fn subset_divergence_matches_oracle_on_random_subsets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..60).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut d = toy_dataset();
        d.ground_truth = GroundTruth::Classes(vec![ClassId(0); 60]);
        d.features = vec![FeatureColumn::new("v", FeatureValues::Numeric(values.clone()))];
        let cfg = DivergenceConfig::default();
        for _ in 0..100 {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for i in 0..60 {
                match rng.random_range(0..3) {
                    0 => a.push(i),
                    1 => b.push(i),
                    _ => {}
                }
            }
            if a.is_empty() || b.is_empty() {
                continue;
            }
            let got = subset_feature_divergence(&d, &ids(&a), &ids(&b), "v", &cfg).unwrap();
            let want = oracle_divergence(&values, &a, &b, cfg.numeric_bins, cfg.smoothing_alpha);
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn kl_nonnegative_and_zero_on_identity(
            raw in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..12),
        ) {
            let support: Vec<String> = (0..raw.len()).map(|i| i.to_string()).collect();
            let cfg = DivergenceConfig::default();
            let a: BTreeMap<_, _> = support.iter().cloned().zip(raw.iter().map(|r| r.0)).collect();
            let b: BTreeMap<_, _> = support.iter().cloned().zip(raw.iter().map(|r| r.1)).collect();
            let p = to_distribution(&a, &support, &cfg).unwrap();
            let q = to_distribution(&b, &support, &cfg).unwrap();
            prop_assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
            prop_assert!(kl_divergence(&p, &p).unwrap() <= 1e-9);
        }

        #[test]
        fn sparse_aggregation_is_additive(split in prop::collection::vec(any::<bool>(), 6)) {
            let d = toy_dataset();
            let col = d.feature("trigrams").unwrap();
            let s1: BTreeSet<_> = (0..6).filter(|&i| split[i]).map(InstanceId).collect();
            let s2: BTreeSet<_> = (0..6).filter(|&i| !split[i]).map(InstanceId).collect();
            let all: BTreeSet<_> = (0..6).map(InstanceId).collect();
            let (a1, a2, u) = (aggregate(&s1, col), aggregate(&s2, col), aggregate(&all, col));
            for (k, v) in &u.values {
                prop_assert!((a1.values[k] + a2.values[k] - v).abs() < 1e-12);
            }
        }

        #[test]
        fn single_key_rank_is_a_truncated_permutation(
            vals in prop::collection::vec(0.0f64..100.0, 0..20),
            k in 0usize..25,
        ) {
            let rows: Vec<FeatureRow> = vals.iter().enumerate().map(|(i, v)| FeatureRow {
                feature: format!("f{i:02}"), class: *v, gt: 0.0, non_gt: 0.0,
            }).collect();
            let ranked = rank_features(&rows, &[SortKey::C], k).unwrap();
            prop_assert_eq!(ranked.len(), k.min(rows.len()));
            let unique: BTreeSet<_> = ranked.iter().collect();
            prop_assert_eq!(unique.len(), ranked.len());
            for w in ranked.windows(2) {
                let v = |n: &String| rows.iter().find(|r| &r.feature == n).unwrap().class;
                prop_assert!(v(&w[0]) >= v(&w[1]));
            }
        }
    }
}
