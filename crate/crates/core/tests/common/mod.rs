//! Fixture generators and independent oracles shared by integration tests.
#![allow(dead_code)]

use kanface_core::audit::{LogEntry, Outcome, PredictionLog, Task};
use kanface_core::boxtrack::{BBox, TrackInput};
use kanface_core::dataset::{Dataset, DatasetSchema, EmbeddingRecord, Gender, Meta};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn random_probabilities<R: Rng>(rng: &mut R, s: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

pub fn random_dataset<R: Rng>(rng: &mut R, schema: &DatasetSchema, n: usize) -> Dataset {
    let records = (0..n)
        .map(|i| EmbeddingRecord {
            id: format!("r{i}"),
            z: (0..schema.d1).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            y_p: rng.gen_range(0..schema.primary_classes),
            y_sens: schema.sensitive.iter().map(|s| rng.gen_range(0..s.classes)).collect(),
            meta: Meta {
                age_years: Some(rng.gen_range(0..=100)),
                gender: Some(if rng.gen_bool(0.5) { Gender::F } else { Gender::M }),
                ita_degrees: Some(rng.gen_range(-40.0..80.0)),
            },
        })
        .collect();
    Dataset::new(schema.clone(), records).unwrap()
}

/// Age group by explicit thresholds: 0-18, 19-30, 31-45, 46-60, 61+.
pub fn age_group(age: u32) -> usize {
    match age {
        0..=18 => 0,
        19..=30 => 1,
        31..=45 => 2,
        46..=60 => 3,
        _ => 4,
    }
}

pub fn gender_index(g: Gender) -> usize {
    match g {
        Gender::F => 0,
        Gender::M => 1,
    }
}

/// A classification log over every record, shuffled, with roughly `hit`
/// of the predictions correct.
pub fn random_classification_log<R: Rng>(rng: &mut R, dataset: &Dataset, hit: f64) -> PredictionLog {
    let k = dataset.schema().primary_classes;
    let mut entries: Vec<LogEntry> = dataset
        .records()
        .iter()
        .map(|r| {
            let predicted = if rng.gen_bool(hit) { r.y_p } else { rng.gen_range(0..k) };
            LogEntry {
                id: r.id.clone(),
                task: Task::Classification,
                predicted: Outcome::Label(predicted),
                target: Outcome::Label(r.y_p),
                pair: None,
            }
        })
        .collect();
    entries.shuffle(rng);
    PredictionLog::new(entries).unwrap()
}

pub fn random_age_log<R: Rng>(rng: &mut R, dataset: &Dataset) -> PredictionLog {
    let entries = dataset
        .records()
        .iter()
        .map(|r| {
            let age = r.meta.age_years.unwrap() as f64;
            LogEntry {
                id: r.id.clone(),
                task: Task::AgeRegression,
                predicted: Outcome::Age(age + rng.gen_range(-15.0..15.0)),
                target: Outcome::Age(age),
                pair: None,
            }
        })
        .collect();
    PredictionLog::new(entries).unwrap()
}

/// Filter-then-score: for one (gender, age group) cell, the entries that
/// fall in it and their mean score.
pub fn oracle_cell(log: &PredictionLog, dataset: &Dataset, gender: usize, group: usize) -> (usize, Option<f64>) {
    let mut n = 0usize;
    let mut total = 0.0;
    for e in log.entries() {
        let r = dataset.records().iter().find(|r| r.id == e.id).unwrap();
        if gender_index(r.meta.gender.unwrap()) != gender || age_group(r.meta.age_years.unwrap()) != group {
            continue;
        }
        n += 1;
        total += match (&e.predicted, &e.target) {
            (Outcome::Label(a), Outcome::Label(b)) => f64::from(u8::from(a == b)),
            (Outcome::Age(a), Outcome::Age(b)) => (a - b).abs(),
            _ => unreachable!(),
        };
    }
    (n, (n > 0).then(|| total / n as f64))
}

/// One drifting target among decoys. The target's detection index is
/// reshuffled every frame; `truth[f]` records where it landed.
pub struct TrackScenario {
    pub input: TrackInput,
    pub truth: Vec<usize>,
}

pub fn drifting_scenario<R: Rng>(rng: &mut R, frames: usize, decoys: usize) -> TrackScenario {
    let (w, h) = (rng.gen_range(60.0..100.0), rng.gen_range(60.0..100.0));
    let mut x = rng.gen_range(200.0..400.0);
    let mut y = rng.gen_range(150.0..300.0);
    // At most 10% of the smaller side per frame, jitter included.
    let (vx, vy) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
    let mut detections = Vec::with_capacity(frames);
    let mut truth = Vec::with_capacity(frames);
    let mut true_boxes = Vec::with_capacity(frames);
    for _ in 0..frames {
        x += vx + rng.gen_range(-1.5..1.5);
        y += vy + rng.gen_range(-1.5..1.5);
        let target = BBox::new(x, y, x + w, y + h).unwrap();
        true_boxes.push(target);
        let mut boxes = vec![target];
        for _ in 0..decoys {
            // Decoy edges stay at least one target width clear of the target.
            let (dw, dh) = (w * rng.gen_range(0.8..1.2), h * rng.gen_range(0.8..1.2));
            let gap = w * rng.gen_range(1.0..2.0);
            let slide = rng.gen_range(-0.5..0.5);
            let (dx, dy) = match rng.gen_range(0..4) {
                0 => (x + w + gap, y + slide * h),
                1 => (x - gap - dw, y + slide * h),
                2 => (x + slide * w, y + h + gap),
                _ => (x + slide * w, y - gap - dh),
            };
            boxes.push(BBox::new(dx, dy, dx + dw, dy + dh).unwrap());
        }
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        order.shuffle(rng);
        truth.push(order.iter().position(|&i| i == 0).unwrap());
        detections.push(order.into_iter().map(|i| boxes[i]).collect());
    }
    let anchor = rng.gen_range(0..frames);
    TrackScenario {
        input: TrackInput {
            frames,
            detections,
            anchors: [(anchor, true_boxes[anchor])].into_iter().collect(),
        },
        truth,
    }
}
