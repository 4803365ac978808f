//! Embedding records, dataset schema and the CSV/JSON file formats.
//!
//! Embedding CSV header: `id,z0,...,z{d1-1},y_p,<sensitive names>,age,gender,ita`.
//! The three metadata columns may be left empty.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveAttribute {
    pub name: String,
    #[serde(rename = "K")]
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub d1: usize,
    #[serde(rename = "K_p")]
    pub primary_classes: usize,
    pub sensitive: Vec<SensitiveAttribute>,
}

impl DatasetSchema {
    pub fn new(d1: usize, primary_classes: usize, sensitive: Vec<(String, usize)>) -> Result<Self> {
        let schema = Self {
            d1,
            primary_classes,
            sensitive: sensitive
                .into_iter()
                .map(|(name, classes)| SensitiveAttribute { name, classes })
                .collect(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 {
            return Err(Error::Schema("d1 must be positive".into()));
        }
        if self.primary_classes < 2 {
            return Err(Error::Schema("K_p must be at least 2".into()));
        }
        let mut seen = HashSet::new();
        for attr in &self.sensitive {
            if attr.classes < 2 {
                return Err(Error::Schema(format!(
                    "sensitive attribute '{}' needs K >= 2",
                    attr.name
                )));
            }
            if !seen.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate sensitive attribute '{}'",
                    attr.name
                )));
            }
            if RESERVED.contains(&attr.name.as_str()) || attr.name.is_empty() {
                return Err(Error::Schema(format!(
                    "invalid sensitive attribute name '{}'",
                    attr.name
                )));
            }
        }
        Ok(())
    }

    /// Number of sensitive attributes.
    pub fn n_sensitive(&self) -> usize {
        self.sensitive.len()
    }

    pub fn sensitive_index(&self, name: &str) -> Option<usize> {
        self.sensitive.iter().position(|a| a.name == name)
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["id".to_string()];
        cols.extend((0..self.d1).map(|k| format!("z{k}")));
        cols.push("y_p".into());
        cols.extend(self.sensitive.iter().map(|a| a.name.clone()));
        cols.extend(["age", "gender", "ita"].map(String::from));
        cols
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let schema: Self = serde_json::from_reader(file).map_err(|e| Error::json(path, e))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

const RESERVED: [&str; 5] = ["id", "y_p", "age", "gender", "ita"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    pub fn index(self) -> usize {
        match self {
            Gender::F => 0,
            Gender::M => 1,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::F => "F",
            Gender::M => "M",
        })
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(Gender::F),
            "M" => Ok(Gender::M),
            other => Err(Error::Invalid(format!("gender must be F or M, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub age_years: Option<u32>,
    pub gender: Option<Gender>,
    pub ita_degrees: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub z: Vec<f64>,
    pub y_p: usize,
    pub y_sens: Vec<usize>,
    pub meta: Meta,
}

impl EmbeddingRecord {
    pub fn check(&self, schema: &DatasetSchema) -> Result<()> {
        if self.z.len() != schema.d1 {
            return Err(Error::Schema(format!(
                "record '{}' has {} embedding values, schema declares d1 = {}",
                self.id,
                self.z.len(),
                schema.d1
            )));
        }
        if self.z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("record '{}' has a non-finite embedding value", self.id)));
        }
        if self.y_p >= schema.primary_classes {
            return Err(Error::Invalid(format!(
                "record '{}': y_p = {} is not below K_p = {}",
                self.id, self.y_p, schema.primary_classes
            )));
        }
        if self.y_sens.len() != schema.n_sensitive() {
            return Err(Error::Schema(format!(
                "record '{}' has {} sensitive labels, schema declares {}",
                self.id,
                self.y_sens.len(),
                schema.n_sensitive()
            )));
        }
        for (label, attr) in self.y_sens.iter().zip(&schema.sensitive) {
            if *label >= attr.classes {
                return Err(Error::Invalid(format!(
                    "record '{}': {} = {} is not below K = {}",
                    self.id, attr.name, label, attr.classes
                )));
            }
        }
        if let Some(age) = self.meta.age_years {
            if age > 100 {
                return Err(Error::Invalid(format!("record '{}': age {age} above 100", self.id)));
            }
        }
        if let Some(ita) = self.meta.ita_degrees {
            if !ita.is_finite() {
                return Err(Error::Invalid(format!("record '{}': non-finite ita", self.id)));
            }
        }
        Ok(())
    }
}

/// A validated, immutable list of records under one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: DatasetSchema,
    records: Vec<EmbeddingRecord>,
}

impl Dataset {
    pub fn new(schema: DatasetSchema, records: Vec<EmbeddingRecord>) -> Result<Self> {
        schema.validate()?;
        let mut ids = HashSet::new();
        for r in &records {
            r.check(&schema)?;
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate record id '{}'", r.id)));
            }
        }
        Ok(Self { schema, records })
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Same records with every embedding replaced by `f(z)`.
    pub fn map_embeddings<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let records = self
            .records
            .iter()
            .map(|r| {
                Ok(EmbeddingRecord {
                    z: f(&r.z)?,
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.schema.clone(), records)
    }

    pub fn load(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Self> {
        load_dataset(path, schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_dataset(self, path)
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    let path = path.as_ref();
    schema.validate()?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let expected = schema.header();
    let mut rows = reader.records();
    match rows.next() {
        None => return Err(parse_err(1, "missing header".into())),
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        Some(Ok(header)) => {
            let got: Vec<&str> = header.iter().collect();
            if got.len() != expected.len() {
                return Err(Error::Schema(format!(
                    "{}: header has {} columns, schema expects {} (d1 = {})",
                    path.display(),
                    got.len(),
                    expected.len(),
                    schema.d1
                )));
            }
            if let Some((g, e)) = got.iter().zip(&expected).find(|(g, e)| *g != e) {
                return Err(Error::Schema(format!(
                    "{}: header column '{g}' where '{e}' was expected",
                    path.display()
                )));
            }
        }
    }

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for row in rows {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != expected.len() {
            return Err(Error::Schema(format!(
                "{}:{line}: row has {} columns, expected {}",
                path.display(),
                row.len(),
                expected.len()
            )));
        }
        let record = parse_row(&row, schema).map_err(|msg| parse_err(line, msg))?;
        record.check(schema).map_err(|e| parse_err(line, e.to_string()))?;
        if !ids.insert(record.id.clone()) {
            return Err(parse_err(line, format!("duplicate record id '{}'", record.id)));
        }
        records.push(record);
    }
    Ok(Dataset {
        schema: schema.clone(),
        records,
    })
}

fn parse_row(row: &csv::StringRecord, schema: &DatasetSchema) -> std::result::Result<EmbeddingRecord, String> {
    let field = |i: usize| row.get(i).unwrap_or("");
    let number = |i: usize| -> std::result::Result<f64, String> {
        field(i)
            .parse::<f64>()
            .map_err(|_| format!("column {} is not a number: '{}'", i + 1, field(i)))
    };
    let label = |i: usize| -> std::result::Result<usize, String> {
        field(i)
            .parse::<usize>()
            .map_err(|_| format!("column {} is not a class label: '{}'", i + 1, field(i)))
    };

    let id = field(0).to_string();
    if id.is_empty() {
        return Err("empty record id".into());
    }
    let z = (1..=schema.d1).map(number).collect::<std::result::Result<Vec<_>, _>>()?;
    let mut col = schema.d1 + 1;
    let y_p = label(col)?;
    col += 1;
    let y_sens = (col..col + schema.n_sensitive())
        .map(label)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    col += schema.n_sensitive();

    let age_years = match field(col) {
        "" => None,
        s => Some(s.parse::<u32>().map_err(|_| format!("age is not an integer: '{s}'"))?),
    };
    let gender = match field(col + 1) {
        "" => None,
        s => Some(s.parse::<Gender>().map_err(|e| e.to_string())?),
    };
    let ita_degrees = match field(col + 2) {
        "" => None,
        _ => Some(number(col + 2)?),
    };
    Ok(EmbeddingRecord {
        id,
        z,
        y_p,
        y_sens,
        meta: Meta {
            age_years,
            gender,
            ita_degrees,
        },
    })
}

/// Writes the dataset as CSV. Floats use the shortest representation that
/// parses back to the same value, so a reload is bit-exact.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(dataset, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(dataset.schema.header())?;
    let mut row: Vec<String> = Vec::new();
    for r in &dataset.records {
        row.clear();
        row.push(r.id.clone());
        row.extend(r.z.iter().map(|v| v.to_string()));
        row.push(r.y_p.to_string());
        row.extend(r.y_sens.iter().map(|v| v.to_string()));
        row.push(r.meta.age_years.map(|a| a.to_string()).unwrap_or_default());
        row.push(r.meta.gender.map(|g| g.to_string()).unwrap_or_default());
        row.push(r.meta.ita_degrees.map(|v| v.to_string()).unwrap_or_default());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
