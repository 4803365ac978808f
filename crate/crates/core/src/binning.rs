//! Demographic binning schemes.
//!
//! Every scheme is a list of contiguous real intervals. The first interval is
//! closed on both ends and every later one is `(lo, hi]`. For integer-valued
//! inputs such as age in years this is the same as the closed integer ranges
//! 0-18, 19-30, 31-45, 46-60 and 61-100.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Age5,
    Ita5,
    AgeDiff3,
    Custom,
}

/// What happens to values outside the covered range on one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutOfRange {
    Reject,
    /// Map to the nearest bin and flag the result.
    Clamp,
    /// Map to an extra bin past the last one and flag the result.
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinFlag {
    Clamped,
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Binned {
    pub index: usize,
    pub flag: Option<BinFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    kind: SchemeKind,
    edges: Vec<f64>,
    labels: Vec<String>,
    below: OutOfRange,
    above: OutOfRange,
    /// Label of the overflow bin, present only when `above` is `Overflow`.
    overflow_label: Option<String>,
}

impl BinningScheme {
    /// The five age classes, 0-18 through 61+, capped at 100 years.
    pub fn age5() -> Self {
        Self {
            kind: SchemeKind::Age5,
            edges: vec![0.0, 18.0, 30.0, 45.0, 60.0, 100.0],
            labels: labels(&["0-18", "19-30", "31-45", "46-60", "61+"]),
            below: OutOfRange::Reject,
            above: OutOfRange::Reject,
            overflow_label: None,
        }
    }

    /// Skin-tone classes by individual typology angle. Angles below -30 are
    /// clamped into "brown".
    pub fn ita5() -> Self {
        Self {
            kind: SchemeKind::Ita5,
            edges: vec![-30.0, 10.0, 28.0, 41.0, 55.0, 90.0],
            labels: labels(&["brown", "tan", "intermediate", "light", "very light"]),
            below: OutOfRange::Clamp,
            above: OutOfRange::Reject,
            overflow_label: None,
        }
    }

    /// Kinship age-difference ranges with an explicit overflow bin above 30.
    pub fn agediff3() -> Self {
        Self {
            kind: SchemeKind::AgeDiff3,
            edges: vec![0.0, 10.0, 20.0, 30.0],
            labels: labels(&["0-10", "11-20", "21-30"]),
            below: OutOfRange::Reject,
            above: OutOfRange::Overflow,
            overflow_label: Some("31+".to_string()),
        }
    }

    /// A custom scheme over `[edges[0], edges[last]]`; values outside are rejected.
    pub fn custom(edges: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Invalid("binning needs at least two edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::Invalid("binning edges must be finite".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "binning edges must be strictly increasing".into(),
            ));
        }
        if labels.len() != edges.len() - 1 {
            return Err(Error::Invalid(format!(
                "{} labels for {} bins",
                labels.len(),
                edges.len() - 1
            )));
        }
        Ok(Self {
            kind: SchemeKind::Custom,
            edges,
            labels,
            below: OutOfRange::Reject,
            above: OutOfRange::Reject,
            overflow_label: None,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Number of bins, including an overflow bin when the scheme has one.
    pub fn len(&self) -> usize {
        self.labels.len() + usize::from(self.overflow_label.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bin labels in index order, including the overflow label if any.
    pub fn labels(&self) -> Vec<String> {
        let mut out = self.labels.clone();
        out.extend(self.overflow_label.clone());
        out
    }

    pub fn bin(&self, value: f64) -> Result<Binned> {
        if !value.is_finite() {
            return Err(Error::Domain(format!(
                "{:?} binning got non-finite value {value}",
                self.kind
            )));
        }
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        let last = self.labels.len() - 1;
        if value < lo {
            return match self.below {
                OutOfRange::Clamp => Ok(Binned {
                    index: 0,
                    flag: Some(BinFlag::Clamped),
                }),
                _ => Err(Error::Domain(format!(
                    "{:?} binning: {value} is below {lo}",
                    self.kind
                ))),
            };
        }
        if value > hi {
            return match self.above {
                OutOfRange::Clamp => Ok(Binned {
                    index: last,
                    flag: Some(BinFlag::Clamped),
                }),
                OutOfRange::Overflow => Ok(Binned {
                    index: last + 1,
                    flag: Some(BinFlag::Overflow),
                }),
                OutOfRange::Reject => Err(Error::Domain(format!(
                    "{:?} binning: {value} is above {hi}",
                    self.kind
                ))),
            };
        }
        // first interval is closed below, the rest are (lo, hi]
        let index = self.edges[1..]
            .iter()
            .position(|&upper| value <= upper)
            .unwrap_or(last);
        Ok(Binned { index, flag: None })
    }
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Age class index (0..=4) for an age in years.
pub fn bin_age(age_years: i64) -> Result<usize> {
    if !(0..=100).contains(&age_years) {
        return Err(Error::Domain(format!(
            "age {age_years} outside 0..=100"
        )));
    }
    Ok(BinningScheme::age5().bin(age_years as f64)?.index)
}

/// Skin-tone class index (0..=4) for an individual typology angle in degrees.
/// The returned flag is set when the angle was clamped into the first class.
pub fn bin_ita(ita_degrees: f64) -> Result<Binned> {
    if !ita_degrees.is_finite() || ita_degrees <= -90.0 || ita_degrees >= 90.0 {
        return Err(Error::Domain(format!(
            "ITA {ita_degrees} outside (-90, 90)"
        )));
    }
    BinningScheme::ita5().bin(ita_degrees)
}
