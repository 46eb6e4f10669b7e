//! Pairwise model complementarity from quadrant counts.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ModelId};
use crate::error::{Error, Result};
use crate::slicing::{points_for, quadrant_counts, CellSpec, ColumnKey, CoordinateMode, FilterMode, QuadrantCounts};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityScore {
    pub value: f64,
    pub counts: QuadrantCounts,
}

/// `(n_q2 + n_q4 - n_q1 - n_q3) / total`. Positive when the two models
/// disagree more often than they agree.
pub fn complementarity(counts: QuadrantCounts) -> Result<ComplementarityScore> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::EmptyCell);
    }
    let disagree = (counts.n_q2 + counts.n_q4) as f64;
    let agree = (counts.n_q1 + counts.n_q3) as f64;
    Ok(ComplementarityScore {
        value: (disagree - agree) / total as f64,
        counts,
    })
}

/// Square table over all models; `entries[i][j]` uses `M_i` on x and `M_j`
/// on y. The diagonal and empty cells are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityMatrix {
    pub models: Vec<String>,
    pub entries: Vec<Vec<Option<ComplementarityScore>>>,
}

pub fn complementarity_matrix(
    d: &Dataset,
    column: &ColumnKey,
    filter_mode: FilterMode,
    mode: CoordinateMode,
) -> Result<ComplementarityMatrix> {
    let m = d.models.len();
    if m < 2 {
        return Err(Error::InvalidArgument("at least two models are required".into()));
    }
    let spec = |i: usize, j: usize| CellSpec {
        x_model: ModelId(i),
        y_model: ModelId(j),
        column: column.clone(),
        filter_mode,
        correctness_filter: Default::default(),
    };
    spec(0, 1).check(d)?;

    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect();
    let scores: Vec<Result<Option<ComplementarityScore>>> = std::thread::scope(|s| {
        let handles: Vec<_> = pairs
            .iter()
            .map(|&(i, j)| {
                let spec = spec(i, j);
                s.spawn(move || {
                    let points = points_for(d, &spec, mode)?;
                    match complementarity(quadrant_counts(&points)) {
                        Ok(v) => Ok(Some(v)),
                        Err(Error::EmptyCell) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("complementarity worker panicked"))
            .collect()
    });

    let mut entries = vec![vec![None; m]; m];
    for (&(i, j), score) in pairs.iter().zip(scores) {
        let score = score?;
        // the mirrored cell swaps Q2 with Q4, which leaves the score unchanged
        entries[i][j] = score;
        entries[j][i] = score.map(|s| ComplementarityScore {
            counts: QuadrantCounts::new(s.counts.n_q1, s.counts.n_q4, s.counts.n_q3, s.counts.n_q2),
            ..s
        });
    }
    Ok(ComplementarityMatrix {
        models: d.models.iter().map(|m| m.label.clone()).collect(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassId, Model};
    use crate::fixtures::toy_dataset;
    use proptest::prelude::*;

    #[test]
    fn extremes_and_toy() {
        assert_eq!(complementarity(QuadrantCounts::new(0, 5, 0, 0)).unwrap().value, 1.0);
        assert_eq!(complementarity(QuadrantCounts::new(5, 0, 0, 0)).unwrap().value, -1.0);
        assert_eq!(complementarity(QuadrantCounts::new(1, 2, 2, 1)).unwrap().value, 0.0);
        assert!(matches!(
            complementarity(QuadrantCounts::default()),
            Err(Error::EmptyCell)
        ));
    }

    #[test]
    fn toy_matrix() {
        let d = toy_dataset();
        let m = complementarity_matrix(&d, &ColumnKey::Class(ClassId(0)), FilterMode::All, CoordinateMode::Confidence)
            .unwrap();
        assert_eq!(m.models, ["M0", "M1"]);
        assert!(m.entries[0][0].is_none() && m.entries[1][1].is_none());
        assert_eq!(m.entries[0][1].unwrap().value, 0.0);
        assert_eq!(m.entries[1][0].unwrap().value, 0.0);
        assert_eq!(m.entries[1][0].unwrap().counts, QuadrantCounts::new(1, 1, 2, 2));
    }

    #[test]
    fn identical_models_never_disagree() {
        let mut d = toy_dataset();
        let copy = Model {
            label: "M0'".into(),
            ..d.models[0].clone()
        };
        d.models.push(copy);
        let m = complementarity_matrix(&d, &ColumnKey::Class(ClassId(1)), FilterMode::All, CoordinateMode::Confidence)
            .unwrap();
        assert_eq!(m.entries[0][2].unwrap().value, -1.0);
        assert_eq!(m.entries[2][0].unwrap().value, -1.0);
    }

    #[test]
    fn empty_cell_is_absent() {
        let mut d = toy_dataset();
        // GT filter on a class with no instances
        if let crate::dataset::GroundTruth::Classes(gt) = &mut d.ground_truth {
            for g in gt.iter_mut().filter(|g| g.0 == 2) {
                *g = ClassId(0);
            }
        }
        let m = complementarity_matrix(&d, &ColumnKey::Class(ClassId(2)), FilterMode::Gt, CoordinateMode::Confidence)
            .unwrap();
        assert!(m.entries[0][1].is_none());
    }

    proptest! {
        #[test]
        fn bounded_and_antisymmetric(q in prop::array::uniform4(0usize..50)) {
            prop_assume!(q.iter().sum::<usize>() > 0);
            let s = complementarity(QuadrantCounts::new(q[0], q[1], q[2], q[3])).unwrap().value;
            prop_assert!((-1.0..=1.0).contains(&s));
            let swapped = complementarity(QuadrantCounts::new(q[1], q[0], q[3], q[2])).unwrap().value;
            prop_assert_eq!(s, -swapped);
        }
    }
}
