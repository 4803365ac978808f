//! Demographic bias audit over prediction logs.
//!
//! Predictions are scored per sample, then averaged within every cell of a
//! grid of demographic axes (for example gender x age class). Empty cells are
//! kept in the table with no value and zero support.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attribute::AttributeSpec;
use crate::binning::{BinFlag, BinningScheme};
use crate::dataset::{Dataset, EmbeddingRecord};
use crate::diversity::{mean_std, ProbabilityVector};
use crate::error::{Error, Result};

pub const AGE_CLASSES: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    AgeRegression,
    Verification,
}

/// A prediction or a ground-truth value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Label(usize),
    Probs(Vec<f64>),
    Age(f64),
    Match(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relationship {
    #[serde(rename = "B-B")]
    BrotherBrother,
    #[serde(rename = "S-S")]
    SisterSister,
    #[serde(rename = "S-B")]
    SisterBrother,
    #[serde(rename = "M-S")]
    MotherSon,
    #[serde(rename = "M-D")]
    MotherDaughter,
    #[serde(rename = "F-S")]
    FatherSon,
    #[serde(rename = "F-D")]
    FatherDaughter,
}

impl Relationship {
    pub const ALL: [Relationship; 7] = [
        Relationship::BrotherBrother,
        Relationship::SisterSister,
        Relationship::SisterBrother,
        Relationship::MotherSon,
        Relationship::MotherDaughter,
        Relationship::FatherSon,
        Relationship::FatherDaughter,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Relationship::BrotherBrother => "B-B",
            Relationship::SisterSister => "S-S",
            Relationship::SisterBrother => "S-B",
            Relationship::MotherSon => "M-S",
            Relationship::MotherDaughter => "M-D",
            Relationship::FatherSon => "F-S",
            Relationship::FatherDaughter => "F-D",
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|&r| r == self).unwrap()
    }
}

impl fmt::Display for Relationship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Relationship {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.tag() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown relationship '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub relationship: Relationship,
    pub age_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub id: String,
    pub task: Task,
    pub predicted: Outcome,
    pub target: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairMeta>,
}

impl LogEntry {
    fn check(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::Invalid(format!(
                "entry '{}': {what} for task {:?}",
                self.id, self.task
            )))
        };
        if let Outcome::Probs(p) = &self.predicted {
            ProbabilityVector::new(p.clone())
                .map_err(|e| Error::Invalid(format!("entry '{}': {e}", self.id)))?;
        }
        match (self.task, &self.predicted, &self.target) {
            (Task::Classification, Outcome::Label(_) | Outcome::Probs(_), Outcome::Label(_)) => {}
            (Task::AgeRegression, Outcome::Age(_) | Outcome::Probs(_), Outcome::Age(_)) => {
                if let Outcome::Probs(p) = &self.predicted {
                    if p.len() != AGE_CLASSES {
                        return bad("age distribution must have 101 classes");
                    }
                }
            }
            (Task::Verification, Outcome::Match(_), Outcome::Match(_)) => match self.pair {
                None => return bad("missing pair metadata"),
                Some(p) if !p.age_difference.is_finite() || p.age_difference < 0.0 => {
                    return bad("age difference must be finite and non-negative")
                }
                _ => {}
            },
            _ => return bad("prediction/target kinds do not match"),
        }
        if let (Outcome::Age(a), _) | (_, Outcome::Age(a)) = (&self.predicted, &self.target) {
            if !a.is_finite() {
                return bad("non-finite age");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLog {
    entries: Vec<LogEntry>,
}

impl PredictionLog {
    pub fn new(entries: Vec<LogEntry>) -> Result<Self> {
        if let Some(first) = entries.first() {
            if let Some(other) = entries.iter().find(|e| e.task != first.task) {
                return Err(Error::Invalid(format!(
                    "log mixes tasks {:?} and {:?} (entry '{}')",
                    first.task, other.task, other.id
                )));
            }
        }
        for e in &entries {
            e.check()?;
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn task(&self) -> Option<Task> {
        self.entries.first().map(|e| e.task)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            entries: Vec<LogEntry>,
        }
        let raw: Raw = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("prediction log: {e}")))?;
        Self::new(raw.entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Mae,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "mae" => Ok(Metric::Mae),
            other => Err(Error::Invalid(format!("unknown metric '{other}'"))),
        }
    }
}

/// Expected age `sum_j p(j) * j` of a distribution over ages 0..=100.
pub fn expected_age(p: &ProbabilityVector) -> Result<f64> {
    if p.len() != AGE_CLASSES {
        return Err(Error::Dimension(format!(
            "age distribution has {} classes, expected {AGE_CLASSES}",
            p.len()
        )));
    }
    Ok(p.as_slice()
        .iter()
        .enumerate()
        .map(|(age, pj)| pj * age as f64)
        .sum())
}

fn check_pairing(a: usize, b: usize) -> Result<()> {
    if a == 0 {
        return Err(Error::Invalid("metric over an empty list".into()));
    }
    if a != b {
        return Err(Error::Dimension(format!("{a} predictions for {b} targets")));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_pairing(predictions.len(), targets.len())?;
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Fraction of positions where prediction equals target.
pub fn accuracy<T: PartialEq>(predicted: &[T], targets: &[T]) -> Result<f64> {
    check_pairing(predicted.len(), targets.len())?;
    let hits = predicted.iter().zip(targets).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predicted.len() as f64)
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Per-sample score of one entry under `metric`: 1/0 for a hit, or the
/// absolute age error.
pub fn entry_score(entry: &LogEntry, metric: Metric) -> Result<f64> {
    let mismatch = || {
        Err(Error::Invalid(format!(
            "metric {metric:?} does not apply to task {:?}",
            entry.task
        )))
    };
    match (metric, entry.task) {
        (Metric::Accuracy, Task::Classification) => {
            let pred = match &entry.predicted {
                Outcome::Label(l) => *l,
                Outcome::Probs(p) => argmax(p),
                _ => return mismatch(),
            };
            match entry.target {
                Outcome::Label(t) => Ok(f64::from(u8::from(pred == t))),
                _ => mismatch(),
            }
        }
        (Metric::Accuracy, Task::Verification) => match (&entry.predicted, &entry.target) {
            (Outcome::Match(p), Outcome::Match(t)) => Ok(f64::from(u8::from(p == t))),
            _ => mismatch(),
        },
        (Metric::Mae, Task::AgeRegression) => {
            let pred = match &entry.predicted {
                Outcome::Age(a) => *a,
                Outcome::Probs(p) => expected_age(&ProbabilityVector::new(p.clone())?)?,
                _ => return mismatch(),
            };
            match entry.target {
                Outcome::Age(t) => Ok((pred - t).abs()),
                _ => mismatch(),
            }
        }
        _ => mismatch(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub key: Vec<usize>,
    /// `None` for cells without support.
    pub value: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub value: Option<f64>,
    pub n: usize,
}

/// Metric values over the full grid of axis labels, in row-major key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedMetricTable {
    pub metric: Metric,
    pub axes: Vec<Axis>,
    pub cells: Vec<Cell>,
    pub overall: Overall,
    /// Entries whose bin was clamped or sent to an overflow bin.
    pub flagged: usize,
}

impl GroupedMetricTable {
    fn build(metric: Metric, axes: Vec<Axis>, keyed_scores: Vec<(Vec<usize>, f64)>, flagged: usize) -> Self {
        let shape: Vec<usize> = axes.iter().map(|a| a.labels.len()).collect();
        let total: usize = shape.iter().product();
        let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); total];
        let mut all = Vec::with_capacity(keyed_scores.len());
        for (key, score) in keyed_scores {
            buckets[flat_index(&key, &shape)].push(score);
            all.push(score);
        }
        let cells = buckets
            .into_iter()
            .enumerate()
            .map(|(i, scores)| Cell {
                key: unflatten(i, &shape),
                value: ordered_mean(scores.clone()),
                n: scores.len(),
            })
            .collect();
        let overall = Overall {
            n: all.len(),
            value: ordered_mean(all),
        };
        Self {
            metric,
            axes,
            cells,
            overall,
            flagged,
        }
    }

    pub fn cell(&self, key: &[usize]) -> Option<&Cell> {
        let shape: Vec<usize> = self.axes.iter().map(|a| a.labels.len()).collect();
        if key.len() != shape.len() || key.iter().zip(&shape).any(|(k, s)| k >= s) {
            return None;
        }
        self.cells.get(flat_index(key, &shape))
    }

    pub fn key_labels(&self, key: &[usize]) -> Vec<String> {
        key.iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.labels[k].clone())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for a in &self.axes {
            out.push_str(&a.name);
            out.push(',');
        }
        out.push_str("value,n\n");
        let fmt_value = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            for l in self.key_labels(&c.key) {
                out.push_str(&l);
                out.push(',');
            }
            out.push_str(&format!("{},{}\n", fmt_value(c.value), c.n));
        }
        for _ in &self.axes {
            out.push_str("overall,");
        }
        out.push_str(&format!("{},{}\n", fmt_value(self.overall.value), self.overall.n));
        out
    }

    /// Report document with cell keys spelled as labels.
    pub fn to_json(&self, disparity: Option<&Disparity>) -> serde_json::Value {
        let cells: Vec<_> = self
            .cells
            .iter()
            .map(|c| {
                serde_json::json!({
                    "key": self.key_labels(&c.key),
                    "value": c.value,
                    "n": c.n,
                })
            })
            .collect();
        serde_json::json!({
            "metric": self.metric,
            "axes": self.axes,
            "cells": cells,
            "overall": self.overall,
            "flagged": self.flagged,
            "disparity": disparity,
        })
    }
}

fn flat_index(key: &[usize], shape: &[usize]) -> usize {
    key.iter().zip(shape).fold(0, |acc, (k, s)| acc * s + k)
}

fn unflatten(mut i: usize, shape: &[usize]) -> Vec<usize> {
    let mut key = vec![0; shape.len()];
    for (slot, s) in key.iter_mut().zip(shape).rev() {
        *slot = i % s;
        i /= s;
    }
    key
}

/// Mean of `scores` summed in sorted order, so the result does not depend on
/// the order entries arrived in.
fn ordered_mean(mut scores: Vec<f64>) -> Option<f64> {
    if scores.is_empty() {
        return None;
    }
    scores.sort_by(f64::total_cmp);
    Some(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Scores every log entry and averages within each demographic cell.
pub fn group_slice(
    log: &PredictionLog,
    dataset: &Dataset,
    axes: &[AttributeSpec],
    metric: Metric,
) -> Result<GroupedMetricTable> {
    let schema = dataset.schema();
    let by_id: HashMap<&str, &EmbeddingRecord> =
        dataset.records().iter().map(|r| (r.id.as_str(), r)).collect();
    let table_axes = axes
        .iter()
        .map(|spec| {
            Ok(Axis {
                name: spec.name().to_string(),
                labels: spec.labels(schema)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut keyed = Vec::with_capacity(log.entries().len());
    let mut flagged = 0;
    for entry in log.entries() {
        let record = by_id.get(entry.id.as_str()).ok_or_else(|| {
            Error::Invalid(format!("log entry '{}' has no matching record", entry.id))
        })?;
        let mut key = Vec::with_capacity(axes.len());
        let mut any_flag = false;
        for spec in axes {
            let (class, flag) = spec.class_of(record, schema)?.ok_or_else(|| {
                Error::Invalid(format!("record '{}' has no {}", record.id, spec.name()))
            })?;
            any_flag |= flag.is_some();
            key.push(class);
        }
        flagged += usize::from(any_flag);
        keyed.push((key, entry_score(entry, metric)?));
    }
    Ok(GroupedMetricTable::build(metric, table_axes, keyed, flagged))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeCell {
    pub key: Vec<String>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disparity {
    pub max_cell: ExtremeCell,
    pub min_cell: ExtremeCell,
    pub gap: f64,
    /// Population standard deviation across nonempty cells.
    pub std: f64,
}

/// Spread of the metric over nonempty cells. Ties resolve to the first cell
/// in key order.
pub fn disparity_summary(table: &GroupedMetricTable) -> Result<Disparity> {
    let filled: Vec<(&Cell, f64)> = table
        .cells
        .iter()
        .filter_map(|c| c.value.map(|v| (c, v)))
        .collect();
    if filled.is_empty() {
        return Err(Error::Invalid("disparity of a table with no populated cells".into()));
    }
    let mut max = filled[0];
    let mut min = filled[0];
    for &(c, v) in &filled[1..] {
        if v > max.1 {
            max = (c, v);
        }
        if v < min.1 {
            min = (c, v);
        }
    }
    let values: Vec<f64> = filled.iter().map(|(_, v)| *v).collect();
    let (_, std) = mean_std(&values);
    Ok(Disparity {
        max_cell: ExtremeCell {
            key: table.key_labels(&max.0.key),
            value: max.1,
        },
        min_cell: ExtremeCell {
            key: table.key_labels(&min.0.key),
            value: min.1,
        },
        gap: max.1 - min.1,
        std,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipSummary {
    pub relationship: Relationship,
    pub value: Option<f64>,
    pub n: usize,
}

/// Verification accuracy per relationship and age-difference range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinshipTable {
    /// Axes: relationship (7 tags) x age difference (0-10, 11-20, 21-30, 31+).
    pub table: GroupedMetricTable,
    /// Accuracy over all age differences, one row per relationship.
    pub per_relationship: Vec<RelationshipSummary>,
    /// Pairs whose age difference exceeded 30 years.
    pub overflow: usize,
}

pub fn kinship_slice(log: &PredictionLog) -> Result<KinshipTable> {
    let scheme = BinningScheme::agediff3();
    let mut keyed = Vec::with_capacity(log.entries().len());
    let mut overflow = 0;
    let mut per_rel: Vec<Vec<f64>> = vec![Vec::new(); Relationship::ALL.len()];
    for entry in log.entries() {
        if entry.task != Task::Verification {
            return Err(Error::Invalid(format!(
                "kinship slicing needs verification entries, '{}' is {:?}",
                entry.id, entry.task
            )));
        }
        let pair = entry
            .pair
            .ok_or_else(|| Error::Invalid(format!("entry '{}' has no pair metadata", entry.id)))?;
        let bin = scheme.bin(pair.age_difference)?;
        overflow += usize::from(bin.flag == Some(BinFlag::Overflow));
        let score = entry_score(entry, Metric::Accuracy)?;
        per_rel[pair.relationship.index()].push(score);
        keyed.push((vec![pair.relationship.index(), bin.index], score));
    }
    let axes = vec![
        Axis {
            name: "relationship".into(),
            labels: Relationship::ALL.iter().map(|r| r.tag().to_string()).collect(),
        },
        Axis {
            name: "age_difference".into(),
            labels: scheme.labels(),
        },
    ];
    let per_relationship = Relationship::ALL
        .iter()
        .zip(per_rel)
        .map(|(&relationship, scores)| RelationshipSummary {
            relationship,
            n: scores.len(),
            value: ordered_mean(scores),
        })
        .collect();
    Ok(KinshipTable {
        table: GroupedMetricTable::build(Metric::Accuracy, axes, keyed, overflow),
        per_relationship,
        overflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn expected_age_fixtures() {
        let one_hot = ProbabilityVector::one_hot(101, 30).unwrap();
        assert_eq!(expected_age(&one_hot).unwrap(), 30.0);
        let uniform = ProbabilityVector::uniform(101).unwrap();
        assert!(close(expected_age(&uniform).unwrap(), 50.0, 1e-12));
        let mut p = vec![0.0; 101];
        p[20] = 0.25;
        p[40] = 0.75;
        let p = ProbabilityVector::new(p).unwrap();
        assert!(close(expected_age(&p).unwrap(), 35.0, 1e-12));
        assert!(expected_age(&ProbabilityVector::uniform(100).unwrap()).is_err());
    }

    #[test]
    fn mae_fixtures() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[10.0, 20.0], &[12.0, 26.0]).unwrap(), 4.0);
        assert!(close(mae(&[1.0, 5.0], &[4.5, 8.5]).unwrap(), 3.5, 1e-12));
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn accuracy_fixtures() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 0.75);
        assert!(accuracy::<usize>(&[], &[]).is_err());
    }

    fn table_with(values: &[Option<f64>]) -> GroupedMetricTable {
        GroupedMetricTable {
            metric: Metric::Accuracy,
            axes: vec![Axis {
                name: "g".into(),
                labels: (0..values.len()).map(|i| i.to_string()).collect(),
            }],
            cells: values
                .iter()
                .enumerate()
                .map(|(i, v)| Cell {
                    key: vec![i],
                    value: *v,
                    n: usize::from(v.is_some()),
                })
                .collect(),
            overall: Overall { value: None, n: 0 },
            flagged: 0,
        }
    }

    #[test]
    fn disparity_fixtures() {
        let d = disparity_summary(&table_with(&[Some(0.5), None, Some(0.7), Some(0.9)])).unwrap();
        assert!(close(d.gap, 0.4, 1e-12));
        assert!(close(d.std, 0.163_299_316_185_545_2, 1e-12));
        assert_eq!(d.max_cell.key, vec!["3"]);
        assert_eq!(d.min_cell.key, vec!["0"]);

        let d = disparity_summary(&table_with(&[Some(0.6), Some(0.6)])).unwrap();
        assert_eq!((d.gap, d.std), (0.0, 0.0));
        let d = disparity_summary(&table_with(&[None, Some(0.3)])).unwrap();
        assert_eq!(d.gap, 0.0);
        assert!(disparity_summary(&table_with(&[None, None])).is_err());
    }

    fn verification(id: &str, rel: Relationship, diff: f64, correct: bool) -> LogEntry {
        LogEntry {
            id: id.into(),
            task: Task::Verification,
            predicted: Outcome::Match(correct),
            target: Outcome::Match(true),
            pair: Some(PairMeta {
                relationship: rel,
                age_difference: diff,
            }),
        }
    }

    #[test]
    fn kinship_bins_and_overflow() {
        let log = PredictionLog::new(vec![
            verification("a", Relationship::FatherSon, 10.0, true),
            verification("b", Relationship::FatherSon, 11.0, false),
            verification("c", Relationship::MotherDaughter, 35.0, true),
        ])
        .unwrap();
        let k = kinship_slice(&log).unwrap();
        let fs = Relationship::FatherSon.index();
        assert_eq!(k.table.cell(&[fs, 0]).unwrap().value, Some(1.0));
        assert_eq!(k.table.cell(&[fs, 1]).unwrap().value, Some(0.0));
        assert_eq!(k.table.cell(&[fs, 2]).unwrap().value, None);
        assert_eq!(k.overflow, 1);
        let md = Relationship::MotherDaughter.index();
        assert_eq!(k.table.cell(&[md, 3]).unwrap().n, 1);
        assert_eq!(k.per_relationship[fs].value, Some(0.5));
        assert_eq!(k.per_relationship[Relationship::SisterSister.index()].value, None);
        assert_eq!(k.table.overall.n, 3);
    }

    #[test]
    fn log_validation() {
        let mut bad = verification("a", Relationship::BrotherBrother, 1.0, true);
        bad.pair = None;
        assert!(PredictionLog::new(vec![bad]).is_err());

        let mixed = vec![
            verification("a", Relationship::BrotherBrother, 1.0, true),
            LogEntry {
                id: "b".into(),
                task: Task::Classification,
                predicted: Outcome::Label(0),
                target: Outcome::Label(0),
                pair: None,
            },
        ];
        assert!(PredictionLog::new(mixed).is_err());

        let short_probs = LogEntry {
            id: "c".into(),
            task: Task::AgeRegression,
            predicted: Outcome::Probs(vec![0.5, 0.5]),
            target: Outcome::Age(3.0),
            pair: None,
        };
        assert!(PredictionLog::new(vec![short_probs]).is_err());
    }

    #[test]
    fn metric_task_mismatch() {
        let e = verification("a", Relationship::BrotherBrother, 1.0, true);
        assert!(entry_score(&e, Metric::Mae).is_err());
        assert_eq!(entry_score(&e, Metric::Accuracy).unwrap(), 1.0);
    }

    #[test]
    fn log_json_shape() {
        let text = r#"{"entries":[
            {"id":"r1","task":"verification","predicted":{"match":true},"target":{"match":false},
             "pair":{"relationship":"M-D","age_difference":24}},
            {"id":"r2","task":"verification","predicted":{"match":true},"target":{"match":true},
             "pair":{"relationship":"B-B","age_difference":3}}
        ]}"#;
        let log = PredictionLog::from_json(text).unwrap();
        assert_eq!(log.entries().len(), 2);
        assert_eq!(
            log.entries()[0].pair.unwrap().relationship,
            Relationship::MotherDaughter
        );
    }
}
