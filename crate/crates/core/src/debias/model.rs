use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSchema;
use crate::error::{Error, Result};

use super::train::Hyperparams;

pub const MODEL_VERSION: &str = "kanface-debias/1";

/// Layer sizes: embedding `d1`, shared code `d2`, one `d3` per sensitive
/// attribute, and the class counts of every head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d1: usize,
    pub d2: usize,
    pub d3: Vec<usize>,
    pub k_p: usize,
    pub k_sens: Vec<usize>,
}

impl Dims {
    /// Default sizes for a schema: 512/64 for embeddings of 4096 or more,
    /// otherwise `d2 = d1 / 4` and `d3 = 4`.
    pub fn for_schema(schema: &DatasetSchema) -> Self {
        let (d2, d3) = if schema.d1 >= 4096 {
            (512, 64)
        } else {
            ((schema.d1 / 4).max(1), 4)
        };
        Self::new(schema, d2, d3)
    }

    pub fn new(schema: &DatasetSchema, d2: usize, d3: usize) -> Self {
        Self {
            d1: schema.d1,
            d2,
            d3: vec![d3; schema.n_sensitive()],
            k_p: schema.primary_classes,
            k_sens: schema.sensitive.iter().map(|a| a.classes).collect(),
        }
    }

    pub fn n_sensitive(&self) -> usize {
        self.d3.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 || self.d3.contains(&0) {
            return Err(Error::Dimension("all dimensions must be positive".into()));
        }
        if self.d2 > self.d1 {
            return Err(Error::Dimension(format!(
                "bottleneck d2 = {} exceeds d1 = {}",
                self.d2, self.d1
            )));
        }
        if self.d3.len() != self.k_sens.len() {
            return Err(Error::Dimension(format!(
                "{} branch sizes for {} sensitive attributes",
                self.d3.len(),
                self.k_sens.len()
            )));
        }
        if self.k_p < 2 || self.k_sens.iter().any(|&k| k < 2) {
            return Err(Error::Dimension("every head needs at least two classes".into()));
        }
        Ok(())
    }
}

/// Parameters of one sensitive-attribute branch. `d` and `t` are the
/// decomposition factors; `w` and `bias` are the adversary head on `t B z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// d1 x d3
    pub d: Array2<f64>,
    /// d3 x d2
    pub t: Array2<f64>,
    /// K x d3
    pub w: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Linear decomposition `z = A B z + sum_i D_i T_i B z` with a primary head
/// on `A B z` and one adversary head per sensitive attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasModel {
    /// d1 x d2
    pub a: Array2<f64>,
    /// d2 x d1
    pub b: Array2<f64>,
    pub branches: Vec<Branch>,
    /// K_p x d1
    pub w_p: Array2<f64>,
    pub b_p: Array1<f64>,
}

fn gaussian<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || std * rng.sample::<f64, _>(StandardNormal))
}

impl DebiasModel {
    /// Gaussian weights with standard deviation `init_scale / sqrt(fan_in)`,
    /// zero biases.
    pub fn init<R: Rng>(dims: &Dims, init_scale: f64, rng: &mut R) -> Result<Self> {
        dims.validate()?;
        let std = |fan_in: usize| init_scale / (fan_in as f64).sqrt();
        let a = gaussian(dims.d1, dims.d2, std(dims.d2), rng);
        let b = gaussian(dims.d2, dims.d1, std(dims.d1), rng);
        let branches = dims
            .d3
            .iter()
            .zip(&dims.k_sens)
            .map(|(&d3, &k)| Branch {
                d: gaussian(dims.d1, d3, std(d3), rng),
                t: gaussian(d3, dims.d2, std(dims.d2), rng),
                w: gaussian(k, d3, std(d3), rng),
                bias: Array1::zeros(k),
            })
            .collect();
        let w_p = gaussian(dims.k_p, dims.d1, std(dims.d1), rng);
        Ok(Self {
            a,
            b,
            branches,
            w_p,
            b_p: Array1::zeros(dims.k_p),
        })
    }

    pub fn dims(&self) -> Dims {
        Dims {
            d1: self.a.nrows(),
            d2: self.a.ncols(),
            d3: self.branches.iter().map(|br| br.d.ncols()).collect(),
            k_p: self.w_p.nrows(),
            k_sens: self.branches.iter().map(|br| br.w.nrows()).collect(),
        }
    }

    /// Checks every parameter shape against `dims()` and that all entries are finite.
    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        dims.validate()?;
        let shape_err = |what: &str| Err(Error::Dimension(format!("{what} has the wrong shape")));
        if self.b.dim() != (dims.d2, dims.d1) {
            return shape_err("B");
        }
        if self.w_p.ncols() != dims.d1 || self.b_p.len() != dims.k_p {
            return shape_err("W_p");
        }
        for (i, br) in self.branches.iter().enumerate() {
            let d3 = br.d.ncols();
            if br.d.nrows() != dims.d1 || br.t.dim() != (d3, dims.d2) || br.w.ncols() != d3 {
                return shape_err(&format!("branch {i}"));
            }
            if br.bias.len() != br.w.nrows() {
                return shape_err(&format!("branch {i} bias"));
            }
        }
        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        let all_finite = self.params().iter().all(|p| finite(p));
        if !all_finite {
            return Err(Error::Invalid("model has non-finite parameters".into()));
        }
        Ok(())
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut out = vec![
            self.a.as_slice().unwrap(),
            self.b.as_slice().unwrap(),
            self.w_p.as_slice().unwrap(),
            self.b_p.as_slice().unwrap(),
        ];
        for br in &self.branches {
            out.extend([
                br.d.as_slice().unwrap(),
                br.t.as_slice().unwrap(),
                br.w.as_slice().unwrap(),
                br.bias.as_slice().unwrap(),
            ]);
        }
        out
    }

    /// The debiased representation `A B z`.
    pub fn transform(&self, z: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_input(z.len())?;
        Ok(self.a.dot(&self.b.dot(&z)))
    }

    pub(crate) fn check_input(&self, len: usize) -> Result<()> {
        if len != self.a.nrows() {
            return Err(Error::Dimension(format!(
                "embedding has {len} values, model expects d1 = {}",
                self.a.nrows()
            )));
        }
        Ok(())
    }

    /// `||A^T D_i||_F / (||A||_F ||D_i||_F + eps)` per branch.
    pub fn orthogonality_ratios(&self) -> Vec<f64> {
        let norm = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a_norm = norm(&self.a);
        self.branches
            .iter()
            .map(|br| norm(&self.a.t().dot(&br.d)) / (a_norm * norm(&br.d) + 1e-12))
            .collect()
    }

    pub fn to_file(&self, hyper: Option<&Hyperparams>) -> ModelFile {
        ModelFile {
            version: MODEL_VERSION.to_string(),
            dims: self.dims(),
            hyper: hyper.cloned(),
            params: Params {
                a: Matrix::from(&self.a),
                b: Matrix::from(&self.b),
                w_p: Matrix::from(&self.w_p),
                b_p: self.b_p.to_vec(),
                branches: self
                    .branches
                    .iter()
                    .map(|br| BranchParams {
                        d: Matrix::from(&br.d),
                        t: Matrix::from(&br.t),
                        w: Matrix::from(&br.w),
                        bias: br.bias.to_vec(),
                    })
                    .collect(),
            },
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.version != MODEL_VERSION {
            return Err(Error::Invalid(format!(
                "model version '{}' is not {MODEL_VERSION}",
                file.version
            )));
        }
        let p = file.params;
        let model = Self {
            a: p.a.into_array()?,
            b: p.b.into_array()?,
            w_p: p.w_p.into_array()?,
            b_p: Array1::from(p.b_p),
            branches: p
                .branches
                .into_iter()
                .map(|br| {
                    Ok(Branch {
                        d: br.d.into_array()?,
                        t: br.t.into_array()?,
                        w: br.w.into_array()?,
                        bias: Array1::from(br.bias),
                    })
                })
                .collect::<Result<_>>()?,
        };
        model.validate()?;
        if model.dims() != file.dims {
            return Err(Error::Dimension("declared dims do not match parameter shapes".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>, hyper: Option<&Hyperparams>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&self.to_file(hyper)).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Option<Hyperparams>)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let hyper = file.hyper.clone();
        Ok((Self::from_file(file)?, hyper))
    }
}

/// Row-major matrix as stored in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Array2<f64>> for Matrix {
    fn from(m: &Array2<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().copied().collect(),
        }
    }
}

impl Matrix {
    fn into_array(self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data)
            .map_err(|e| Error::Dimension(format!("matrix data: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchParams {
    #[serde(rename = "D")]
    pub d: Matrix,
    #[serde(rename = "T")]
    pub t: Matrix,
    #[serde(rename = "W")]
    pub w: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "W_p")]
    pub w_p: Matrix,
    pub b_p: Vec<f64>,
    pub branches: Vec<BranchParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub dims: Dims,
    #[serde(default)]
    pub hyper: Option<Hyperparams>,
    pub params: Params,
}
