//! Diversity and evenness indices over categorical distributions, plus the
//! individual typology angle used to grade skin tone.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attribute::AttributeSpec;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A normalized class distribution over `S = len()` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Invalid("probability vector needs at least one class".into()));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self(p))
    }

    pub fn uniform(s: usize) -> Result<Self> {
        Self::new(vec![1.0 / s as f64; s])
    }

    pub fn one_hot(s: usize, class: usize) -> Result<Self> {
        if class >= s {
            return Err(Error::Domain(format!("class {class} outside {s} classes")));
        }
        let mut p = vec![0.0; s];
        p[class] = 1.0;
        Self::new(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Number of classes `S`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" | "natural" | "ln" => Ok(LogBase::Natural),
            "2" | "two" => Ok(LogBase::Two),
            other => Err(Error::Invalid(format!("log base must be 'e' or '2', got '{other}'"))),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::Natural => "e",
            LogBase::Two => "2",
        })
    }
}

/// Empirical class distribution of `values` over `s` classes.
pub fn histogram(values: &[usize], s: usize) -> Result<ProbabilityVector> {
    if values.is_empty() {
        return Err(Error::Invalid("histogram of an empty list".into()));
    }
    let mut counts = vec![0usize; s];
    for &v in values {
        *counts
            .get_mut(v)
            .ok_or_else(|| Error::Domain(format!("bin index {v} not below S = {s}")))? += 1;
    }
    let n = values.len() as f64;
    ProbabilityVector::new(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Shannon entropy `-sum p ln p`, with `0 log 0 = 0`.
pub fn shannon_h(p: &ProbabilityVector, base: LogBase) -> f64 {
    -p.0.iter()
        .filter(|&&pi| pi > 0.0)
        .map(|&pi| pi * base.log(pi))
        .sum::<f64>()
}

/// Shannon evenness `H / log S`; independent of the log base.
pub fn shannon_e(p: &ProbabilityVector, base: LogBase) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::Domain("Shannon evenness is undefined for S = 1".into()));
    }
    Ok(shannon_h(p, base) / base.log(p.len() as f64))
}

/// Simpson diversity `1 / sum p^2`.
pub fn simpson_d(p: &ProbabilityVector) -> f64 {
    1.0 / p.0.iter().map(|pi| pi * pi).sum::<f64>()
}

/// Simpson evenness `D / S`.
pub fn simpson_e(p: &ProbabilityVector) -> f64 {
    simpson_d(p) / p.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ita {
    pub degrees: f64,
    /// Set when `b = 0` and the angle was taken as a limit.
    pub degenerate: bool,
}

/// Individual typology angle `atan((L - 50) / b)` in degrees, from CIELAB
/// lightness `L` and the yellow-blue component `b`.
pub fn ita_from_lab(l: f64, b: f64) -> Ita {
    if b == 0.0 {
        let num = l - 50.0;
        let degrees = if num > 0.0 {
            90.0
        } else if num < 0.0 {
            -90.0
        } else {
            0.0
        };
        return Ita {
            degrees,
            degenerate: true,
        };
    }
    Ita {
        degrees: ((l - 50.0) / b).atan().to_degrees(),
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityRow {
    pub attribute: String,
    #[serde(rename = "SiD")]
    pub simpson_d: f64,
    #[serde(rename = "SiE")]
    pub simpson_e: f64,
    #[serde(rename = "ShH")]
    pub shannon_h: f64,
    /// `None` when the attribute has a single class.
    #[serde(rename = "ShE")]
    pub shannon_e: Option<f64>,
    pub mean: f64,
    pub std: f64,
}

/// One row per attribute: population mean and std of the raw values and the
/// four indices of the class histogram.
pub fn diversity_report(
    dataset: &Dataset,
    specs: &[AttributeSpec],
    base: LogBase,
) -> Result<Vec<DiversityRow>> {
    if dataset.is_empty() {
        return Err(Error::Invalid("diversity report of an empty dataset".into()));
    }
    let schema = dataset.schema();
    specs
        .iter()
        .map(|spec| {
            let s = spec.labels(schema)?.len();
            let mut values = Vec::with_capacity(dataset.len());
            let mut classes = Vec::with_capacity(dataset.len());
            let mut missing = Vec::new();
            for record in dataset.records() {
                match (spec.attribute.value(record, schema), spec.class_of(record, schema)?) {
                    (Some(v), Some((class, _))) => {
                        values.push(v);
                        classes.push(class);
                    }
                    _ => missing.push(record.id.as_str()),
                }
            }
            if !missing.is_empty() {
                return Err(Error::Invalid(format!(
                    "{} missing for records: {}",
                    spec.name(),
                    missing.join(", ")
                )));
            }
            let p = histogram(&classes, s)?;
            let (mean, std) = mean_std(&values);
            Ok(DiversityRow {
                attribute: spec.name().to_string(),
                simpson_d: simpson_d(&p),
                simpson_e: simpson_e(&p),
                shannon_h: shannon_h(&p, base),
                shannon_e: shannon_e(&p, base).ok(),
                mean,
                std,
            })
        })
        .collect()
}

/// Population mean and standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn report_csv(rows: &[DiversityRow]) -> String {
    let mut out = String::from("attribute,SiD,SiE,ShH,ShE,mean,std\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.attribute,
            r.simpson_d,
            r.simpson_e,
            r.shannon_h,
            r.shannon_e.map(|v| v.to_string()).unwrap_or_default(),
            r.mean,
            r.std
        ));
    }
    out
}
