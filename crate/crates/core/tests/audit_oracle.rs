mod common;

use kanface_core::attribute::AttributeSpec;
use kanface_core::audit::{
    expected_age, group_slice, kinship_slice, mae, LogEntry, Metric, Outcome, PairMeta,
    PredictionLog, Relationship, Task,
};
use kanface_core::dataset::DatasetSchema;
use kanface_core::diversity::ProbabilityVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn axes() -> Vec<AttributeSpec> {
    vec![
        AttributeSpec::parse("gender").unwrap(),
        AttributeSpec::parse("age5").unwrap(),
    ]
}

fn schema() -> DatasetSchema {
    DatasetSchema::new(2, 6, vec![]).unwrap()
}

#[test]
fn grouped_accuracy_matches_filter_then_score() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(20..200);
        let ds = common::random_dataset(&mut rng, &schema(), n);
        let hit = rng.gen_range(0.2..0.9);
        let log = common::random_classification_log(&mut rng, &ds, hit);
        let table = group_slice(&log, &ds, &axes(), Metric::Accuracy).unwrap();
        for g in 0..2 {
            for b in 0..5 {
                let cell = table.cell(&[g, b]).unwrap();
                let (n, value) = common::oracle_cell(&log, &ds, g, b);
                assert_eq!(cell.n, n, "seed {seed} cell ({g},{b})");
                match (cell.value, value) {
                    (Some(a), Some(e)) => assert!((a - e).abs() < 1e-9),
                    (None, None) => {}
                    other => panic!("seed {seed}: {other:?}"),
                }
            }
        }
    }
}

#[test]
fn grouped_mae_matches_filter_then_score() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let ds = common::random_dataset(&mut rng, &schema(), 150);
        let log = common::random_age_log(&mut rng, &ds);
        let table = group_slice(&log, &ds, &axes(), Metric::Mae).unwrap();
        for g in 0..2 {
            for b in 0..5 {
                let cell = table.cell(&[g, b]).unwrap();
                let (n, value) = common::oracle_cell(&log, &ds, g, b);
                assert_eq!(cell.n, n);
                if let (Some(a), Some(e)) = (cell.value, value) {
                    assert!((a - e).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn overall_is_support_weighted_mean_of_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ds = common::random_dataset(&mut rng, &schema(), 300);
    let log = common::random_classification_log(&mut rng, &ds, 0.6);
    let table = group_slice(&log, &ds, &axes(), Metric::Accuracy).unwrap();
    let (mut total, mut n) = (0.0, 0);
    for c in &table.cells {
        if let Some(v) = c.value {
            total += v * c.n as f64;
            n += c.n;
        }
    }
    assert_eq!(n, 300);
    assert!((table.overall.value.unwrap() - total / n as f64).abs() < 1e-12);
}

#[test]
fn entry_order_does_not_change_the_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ds = common::random_dataset(&mut rng, &schema(), 200);
    let log = common::random_age_log(&mut rng, &ds);
    let mut entries = log.entries().to_vec();
    entries.shuffle(&mut rng);
    let shuffled = PredictionLog::new(entries).unwrap();
    let a = group_slice(&log, &ds, &axes(), Metric::Mae).unwrap();
    let b = group_slice(&shuffled, &ds, &axes(), Metric::Mae).unwrap();
    assert_eq!(a, b);
}

#[test]
fn table_layout_is_gender_by_five_age_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ds = common::random_dataset(&mut rng, &schema(), 50);
    let log = common::random_classification_log(&mut rng, &ds, 1.0);
    let table = group_slice(&log, &ds, &axes(), Metric::Accuracy).unwrap();
    assert_eq!(table.cells.len(), 10);
    assert_eq!(table.axes[0].labels, ["F", "M"]);
    assert_eq!(table.axes[1].labels.len(), 5);
    assert!(table.cells.iter().all(|c| c.value.is_none_or(|v| v == 1.0)));
    let csv = table.to_csv();
    assert!(csv.starts_with("gender,age,value,n\n"), "{csv}");
}

#[test]
fn unknown_record_is_an_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let ds = common::random_dataset(&mut rng, &schema(), 5);
    let log = PredictionLog::new(vec![LogEntry {
        id: "nobody".into(),
        task: Task::Classification,
        predicted: Outcome::Label(0),
        target: Outcome::Label(0),
        pair: None,
    }])
    .unwrap();
    assert!(group_slice(&log, &ds, &axes(), Metric::Accuracy).is_err());
}

#[test]
fn expected_age_fixtures() {
    for age in 0..=100 {
        let p = ProbabilityVector::one_hot(101, age).unwrap();
        assert_eq!(expected_age(&p).unwrap(), age as f64);
    }
    let uniform = ProbabilityVector::uniform(101).unwrap();
    assert!((expected_age(&uniform).unwrap() - 50.0).abs() < 1e-12);
}

#[test]
fn expected_age_is_linear_in_the_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let p = common::random_probabilities(&mut rng, 101);
        let q = common::random_probabilities(&mut rng, 101);
        let t: f64 = rng.gen();
        let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let e = |v: Vec<f64>| expected_age(&ProbabilityVector::new(v).unwrap()).unwrap();
        let lhs = e(mix);
        let rhs = t * e(p) + (1.0 - t) * e(q);
        assert!((lhs - rhs).abs() < 1e-9);
    }
}

#[test]
fn mae_is_invariant_to_a_common_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let pred: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..100.0)).collect();
        let target: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..100.0)).collect();
        let c = rng.gen_range(-50.0..50.0);
        let shifted = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        let a = mae(&pred, &target).unwrap();
        let b = mae(&shifted(&pred), &shifted(&target)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(mae(&[3.0, 5.0], &[3.0, 5.0]).unwrap(), 0.0);
}

#[test]
fn kinship_counts_overflow_pairs() {
    let entries: Vec<LogEntry> = [(5.0, true), (15.0, false), (30.0, true), (31.0, true), (45.0, false)]
        .iter()
        .enumerate()
        .map(|(i, &(age_difference, hit))| LogEntry {
            id: format!("pair{i}"),
            task: Task::Verification,
            predicted: Outcome::Match(hit),
            target: Outcome::Match(true),
            pair: Some(PairMeta {
                relationship: Relationship::ALL[i % 7],
                age_difference,
            }),
        })
        .collect();
    let kin = kinship_slice(&PredictionLog::new(entries).unwrap()).unwrap();
    assert_eq!(kin.overflow, 2);
    assert_eq!(kin.table.cells.len(), 7 * 4);
    assert_eq!(kin.per_relationship.iter().map(|r| r.n).sum::<usize>(), 5);
}
