mod common;

use proptest::prelude::*;
use zsar_core::classifier::{self, ClassEmbedding, ClassifierError, EmbeddingVector};
use zsar_core::embedding::EmbeddingMatrix;
use zsar_core::label::ActionClass;

fn class(index: usize, z: Vec<f64>) -> ClassEmbedding {
    ClassEmbedding {
        index,
        action: ActionClass::new(format!("c{index}")).unwrap(),
        z: EmbeddingVector::new(z).unwrap(),
        texts: 1,
    }
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn problem() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (2usize..24).prop_flat_map(|d| (vector(d), prop::collection::vec(vector(d), 1..20)))
}

proptest! {
    #[test]
    fn scores_are_bounded_cosines((v, zs) in problem()) {
        let classes: Vec<_> = zs.iter().cloned().enumerate().map(|(i, z)| class(i, z)).collect();
        let p = classifier::predict(&EmbeddingVector::new(v.clone()).unwrap(), &classes).unwrap();
        prop_assert_eq!(p.ranking().len(), zs.len());
        for r in p.ranking() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r.score));
            prop_assert!((r.score - common::oracle_cosine(&v, &zs[r.index])).abs() < 1e-9);
        }
        for w in p.ranking().windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].index < w[1].index));
        }
    }

    #[test]
    fn argmax_ignores_positive_scaling((v, zs) in problem(), lambda in 1e-3f64..1e3) {
        let classes: Vec<_> = zs.iter().cloned().enumerate().map(|(i, z)| class(i, z)).collect();
        let v = EmbeddingVector::new(v).unwrap();
        let a = classifier::predict(&v, &classes).unwrap();
        let b = classifier::predict(&v.scaled(lambda), &classes).unwrap();
        prop_assert_eq!(a.predicted().index, b.predicted().index);
    }

    #[test]
    fn class_order_does_not_matter((v, zs) in problem(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut classes: Vec<_> = zs.iter().cloned().enumerate().map(|(i, z)| class(i, z)).collect();
        let v = EmbeddingVector::new(v).unwrap();
        let a = classifier::predict(&v, &classes).unwrap();
        classes.shuffle(&mut common::rng(seed));
        prop_assert_eq!(a, classifier::predict(&v, &classes).unwrap());
    }

    #[test]
    fn topk_is_monotone_in_k((v, zs) in problem(), truth in any::<prop::sample::Index>()) {
        let classes: Vec<_> = zs.iter().cloned().enumerate().map(|(i, z)| class(i, z)).collect();
        let p = classifier::predict(&EmbeddingVector::new(v).unwrap(), &classes).unwrap();
        let truth = truth.index(zs.len());
        let hits: Vec<bool> = (1..=zs.len()).map(|k| classifier::topk_hit(&p, truth, k).unwrap()).collect();
        prop_assert!(hits.windows(2).all(|w| !w[0] || w[1]));
        prop_assert!(hits[zs.len() - 1]);
    }

    #[test]
    fn mean_matches_oracle(rows in (1usize..16, 1usize..12).prop_flat_map(|(d, n)| {
        prop::collection::vec(prop::collection::vec(-2.0f32..2.0, d), n)
    })) {
        let m = classifier::mean_embedding(&EmbeddingMatrix::from_rows(&rows).unwrap(), false).unwrap();
        for (a, b) in m.values().iter().zip(common::oracle_mean(&rows)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn exact_ties_go_to_the_lowest_index() {
    let classes = vec![class(0, vec![0.0, 1.0]), class(1, vec![2.0, 0.0]), class(2, vec![1.0, 0.0])];
    let p = classifier::predict(&EmbeddingVector::new(vec![3.0, 0.0]).unwrap(), &classes).unwrap();
    assert_eq!(p.predicted().index, 1);
    assert_eq!(p.ranking()[1].index, 2);
}

#[test]
fn zero_vectors_are_degenerate() {
    let classes = vec![class(0, vec![1.0, 0.0])];
    let zero = EmbeddingVector::new(vec![0.0, 0.0]).unwrap();
    assert!(matches!(classifier::predict(&zero, &classes), Err(ClassifierError::Degenerate(_))));
    let bad = vec![class(0, vec![1.0, 0.0]), class(1, vec![0.0, 0.0])];
    let v = EmbeddingVector::new(vec![1.0, 1.0]).unwrap();
    match classifier::predict(&v, &bad) {
        Err(ClassifierError::Degenerate(what)) => assert!(what.contains("c1")),
        other => panic!("expected a degenerate class, got {other:?}"),
    }
}

#[test]
fn normalized_averaging_differs_only_when_norms_differ() {
    let rows = vec![vec![2.0f32, 0.0], vec![0.0, 1.0]];
    let m = EmbeddingMatrix::from_rows(&rows).unwrap();
    assert_eq!(classifier::mean_embedding(&m, false).unwrap().values(), [1.0, 0.5]);
    assert_eq!(classifier::mean_embedding(&m, true).unwrap().values(), [0.5, 0.5]);
}

#[test]
fn class_table_round_trips_through_bytes() {
    let classes = vec![class(0, vec![0.25, -1.5]), class(1, vec![3.0, 0.125])];
    let table = classifier::class_table(&classes).unwrap();
    let back = zsar_core::embedding::EmbeddingTable::from_bytes(&table.to_bytes()).unwrap();
    assert_eq!(back.get("c0").unwrap(), [0.25, -1.5]);
    assert_eq!(back.get("c1").unwrap(), [3.0, 0.125]);
}
