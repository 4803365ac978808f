//! Record attributes that reports and audits slice by.

use std::fmt;
use std::str::FromStr;

use crate::binning::{BinFlag, BinningScheme};
use crate::dataset::{DatasetSchema, EmbeddingRecord};
use crate::error::{Error, Result};

/// A per-record quantity read from metadata or labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attribute {
    Age,
    Gender,
    Ita,
    Primary,
    Sensitive(String),
}

impl Attribute {
    pub fn name(&self) -> &str {
        match self {
            Attribute::Age => "age",
            Attribute::Gender => "gender",
            Attribute::Ita => "ita",
            Attribute::Primary => "y_p",
            Attribute::Sensitive(name) => name,
        }
    }

    /// Numeric value of the attribute, `None` when the record lacks it.
    /// Gender is encoded as F = 0, M = 1.
    pub fn value(&self, record: &EmbeddingRecord, schema: &DatasetSchema) -> Option<f64> {
        match self {
            Attribute::Age => record.meta.age_years.map(f64::from),
            Attribute::Gender => record.meta.gender.map(|g| g.index() as f64),
            Attribute::Ita => record.meta.ita_degrees,
            Attribute::Primary => Some(record.y_p as f64),
            Attribute::Sensitive(name) => schema
                .sensitive_index(name)
                .and_then(|i| record.y_sens.get(i))
                .map(|&v| v as f64),
        }
    }

    /// Class count and labels when the attribute is used as its own categories.
    fn categories(&self, schema: &DatasetSchema) -> Result<Vec<String>> {
        let numbered = |k: usize| (0..k).map(|i| i.to_string()).collect();
        match self {
            Attribute::Age => Ok(numbered(101)),
            Attribute::Gender => Ok(vec!["F".into(), "M".into()]),
            Attribute::Ita => Err(Error::Invalid(
                "ita is continuous and needs a binning scheme".into(),
            )),
            Attribute::Primary => Ok(numbered(schema.primary_classes)),
            Attribute::Sensitive(name) => schema
                .sensitive
                .iter()
                .find(|a| &a.name == name)
                .map(|a| numbered(a.classes))
                .ok_or_else(|| Error::Invalid(format!("unknown attribute '{name}'"))),
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "age" => Attribute::Age,
            "gender" => Attribute::Gender,
            "ita" => Attribute::Ita,
            "y_p" => Attribute::Primary,
            "" => return Err(Error::Invalid("empty attribute name".into())),
            other => Attribute::Sensitive(other.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classes {
    /// Each distinct integer value is its own class.
    Categorical,
    Binned(BinningScheme),
}

/// An attribute together with the way its values map to classes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSpec {
    pub attribute: Attribute,
    pub classes: Classes,
}

impl AttributeSpec {
    pub fn categorical(attribute: Attribute) -> Self {
        Self {
            attribute,
            classes: Classes::Categorical,
        }
    }

    pub fn binned(attribute: Attribute, scheme: BinningScheme) -> Self {
        Self {
            attribute,
            classes: Classes::Binned(scheme),
        }
    }

    /// Parses `age5`, `ita5`, or an attribute name used categorically.
    pub fn parse(spec: &str) -> Result<Self> {
        Ok(match spec {
            "age5" => Self::binned(Attribute::Age, BinningScheme::age5()),
            "ita5" => Self::binned(Attribute::Ita, BinningScheme::ita5()),
            other => Self::categorical(other.parse()?),
        })
    }

    pub fn name(&self) -> &str {
        self.attribute.name()
    }

    pub fn labels(&self, schema: &DatasetSchema) -> Result<Vec<String>> {
        match &self.classes {
            Classes::Categorical => self.attribute.categories(schema),
            Classes::Binned(scheme) => Ok(scheme.labels()),
        }
    }

    /// Class index of a record, or `Ok(None)` when the record lacks the value.
    pub fn class_of(
        &self,
        record: &EmbeddingRecord,
        schema: &DatasetSchema,
    ) -> Result<Option<(usize, Option<BinFlag>)>> {
        let Some(v) = self.attribute.value(record, schema) else {
            return Ok(None);
        };
        match &self.classes {
            Classes::Categorical => {
                let k = self.attribute.categories(schema)?.len();
                let idx = v as usize;
                if v < 0.0 || idx >= k {
                    return Err(Error::Domain(format!(
                        "record '{}': {} = {v} outside {k} classes",
                        record.id, self.attribute
                    )));
                }
                Ok(Some((idx, None)))
            }
            Classes::Binned(scheme) => {
                let b = scheme.bin(v)?;
                Ok(Some((b.index, b.flag)))
            }
        }
    }
}
