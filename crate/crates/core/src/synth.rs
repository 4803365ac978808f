//! Synthetic biased embeddings with known factor structure.
//!
//! Each embedding is `M_p e(y_p) + sum_i M_i e(y_i) + sigma * noise`, where
//! `e(.)` is a one-hot vector. With probability `rho` a sensitive label is tied
//! to the primary label (`y_i = y_p mod K_i`), otherwise it is drawn from its
//! own class weights.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetSchema, EmbeddingRecord, Meta};
use crate::debias::{adversary_probe, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorMode {
    /// Disjoint column blocks of one random orthonormal basis.
    Orthogonal,
    /// Independent Gaussian columns with unit expected norm.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveConfig {
    pub name: String,
    pub classes: usize,
    /// Class weights for the untied draw; uniform when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub d1: usize,
    pub k_p: usize,
    pub sensitive: Vec<SensitiveConfig>,
    pub mode: FactorMode,
    pub noise: f64,
    pub rho: f64,
    /// Primary class weights; uniform when absent.
    #[serde(default)]
    pub primary_weights: Option<Vec<f64>>,
    pub n: usize,
    pub seed: u64,
}

impl SynthConfig {
    /// Orthogonal factors, two sensitive attributes with 5 and 2 classes.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            d1: 64,
            k_p: 10,
            sensitive: vec![
                SensitiveConfig {
                    name: "age_group".into(),
                    classes: 5,
                    weights: None,
                },
                SensitiveConfig {
                    name: "sex".into(),
                    classes: 2,
                    weights: None,
                },
            ],
            mode: FactorMode::Orthogonal,
            noise: 0.1,
            rho: 0.6,
            primary_weights: None,
            n: 5000,
            seed,
        }
    }

    pub fn schema(&self) -> Result<DatasetSchema> {
        DatasetSchema::new(
            self.d1,
            self.k_p,
            self.sensitive
                .iter()
                .map(|s| (s.name.clone(), s.classes))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.schema()?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Invalid(format!("noise must be finite and >= 0, got {}", self.noise)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Invalid(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        let factors = self.k_p + self.sensitive.iter().map(|s| s.classes).sum::<usize>();
        if self.mode == FactorMode::Orthogonal && self.d1 < factors {
            return Err(Error::Invalid(format!(
                "orthogonal mode needs d1 >= {factors}, got {}",
                self.d1
            )));
        }
        check_weights(self.primary_weights.as_deref(), self.k_p, "primary")?;
        for s in &self.sensitive {
            check_weights(s.weights.as_deref(), s.classes, &s.name)?;
        }
        Ok(())
    }
}

fn check_weights(weights: Option<&[f64]>, k: usize, what: &str) -> Result<()> {
    let Some(w) = weights else { return Ok(()) };
    if w.len() != k {
        return Err(Error::Invalid(format!("{what}: {} weights for {k} classes", w.len())));
    }
    if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Invalid(format!("{what}: weights must be positive")));
    }
    Ok(())
}

/// The factor matrices a dataset was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// d1 x K_p
    pub primary: Array2<f64>,
    /// d1 x K_i per attribute
    pub sensitive: Vec<Array2<f64>>,
    pub config: SynthConfig,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthFile {
    config: SynthConfig,
    primary: Matrix,
    sensitive: Vec<Matrix>,
}

impl GroundTruth {
    /// Orthogonal projection of `z` onto the span of the primary factors.
    pub fn project_primary(&self, z: ArrayView1<f64>) -> Array1<f64> {
        let m = &self.primary;
        // (M^T M)^-1 is the identity in orthogonal mode; solve the normal
        // equations in general
        let coef = solve_spd(&m.t().dot(m), &m.t().dot(&z));
        m.dot(&coef)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(GroundTruthFile {
            config: self.config.clone(),
            primary: Matrix::from(&self.primary),
            sensitive: self.sensitive.iter().map(Matrix::from).collect(),
        })
        .expect("ground truth serializes")
    }
}

/// Cholesky solve of a small symmetric positive definite system.
fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            if i == j {
                l[[i, i]] = (a[[i, i]] - s).max(1e-300).sqrt();
            } else {
                l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[[i, k]] * y[k]).sum();
        y[i] = (b[i] - s) / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[[k, i]] * x[k]).sum();
        x[i] = (y[i] - s) / l[[i, i]];
    }
    x
}

/// `cols` orthonormal columns of length `d` by modified Gram-Schmidt on
/// Gaussian vectors.
fn orthonormal_columns<R: Rng>(d: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let mut q = Array2::<f64>::zeros((d, cols));
    let mut j = 0;
    while j < cols {
        let mut v: Array1<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for k in 0..j {
            let qk = q.column(k);
            let proj = qk.dot(&v);
            v.scaled_add(-proj, &qk);
        }
        let norm = v.dot(&v).sqrt();
        if norm < 1e-8 {
            continue;
        }
        q.column_mut(j).assign(&(v / norm));
        j += 1;
    }
    q
}

pub struct SynthOutput {
    pub dataset: Dataset,
    pub ground_truth: GroundTruth,
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let schema = config.schema()?;

    let mut factor_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let widths: Vec<usize> = std::iter::once(config.k_p)
        .chain(config.sensitive.iter().map(|s| s.classes))
        .collect();
    let total: usize = widths.iter().sum();
    let all = match config.mode {
        FactorMode::Orthogonal => orthonormal_columns(config.d1, total, &mut factor_rng),
        FactorMode::Random => {
            let std = 1.0 / (config.d1 as f64).sqrt();
            Array2::from_shape_simple_fn((config.d1, total), || {
                std * factor_rng.sample::<f64, _>(StandardNormal)
            })
        }
    };
    let mut blocks = Vec::with_capacity(widths.len());
    let mut start = 0;
    for w in &widths {
        blocks.push(all.slice(ndarray::s![.., start..start + w]).to_owned());
        start += w;
    }
    let primary = blocks.remove(0);
    let sensitive = blocks;

    let uniform = |k: usize| vec![1.0; k];
    let primary_dist = WeightedIndex::new(
        config.primary_weights.clone().unwrap_or_else(|| uniform(config.k_p)),
    )
    .map_err(|e| Error::Invalid(e.to_string()))?;
    let sens_dists = config
        .sensitive
        .iter()
        .map(|s| {
            WeightedIndex::new(s.weights.clone().unwrap_or_else(|| uniform(s.classes)))
                .map_err(|e| Error::Invalid(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    // one stream per record keeps every row independent of generation order
    let records = (0..config.n)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(r as u64 + 1);
            let y_p = primary_dist.sample(&mut rng);
            let y_sens: Vec<usize> = config
                .sensitive
                .iter()
                .zip(&sens_dists)
                .map(|(s, dist)| {
                    if rng.gen::<f64>() < config.rho {
                        y_p % s.classes
                    } else {
                        dist.sample(&mut rng)
                    }
                })
                .collect();
            let mut z = primary.column(y_p).to_owned();
            for (m, &y) in sensitive.iter().zip(&y_sens) {
                z += &m.column(y);
            }
            for v in z.iter_mut() {
                *v += config.noise * rng.sample::<f64, _>(StandardNormal);
            }
            EmbeddingRecord {
                id: format!("s{r:06}"),
                z: z.to_vec(),
                y_p,
                y_sens,
                meta: Meta::default(),
            }
        })
        .collect();

    Ok(SynthOutput {
        dataset: Dataset::new(schema, records)?,
        ground_truth: GroundTruth {
            primary,
            sensitive,
            config: config.clone(),
        },
    })
}

/// Which label of a record to probe for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Primary,
    Sensitive(usize),
}

impl Target {
    pub fn labels(self, dataset: &Dataset) -> Result<Vec<usize>> {
        if let Target::Sensitive(i) = self {
            if i >= dataset.schema().n_sensitive() {
                return Err(Error::Invalid(format!("no sensitive attribute {i}")));
            }
        }
        Ok(dataset
            .records()
            .iter()
            .map(|r| match self {
                Target::Primary => r.y_p,
                Target::Sensitive(i) => r.y_sens[i],
            })
            .collect())
    }
}

/// Embeddings of a dataset as rows of a matrix.
pub fn embedding_matrix(dataset: &Dataset) -> Array2<f64> {
    let d1 = dataset.schema().d1;
    let mut m = Array2::zeros((dataset.len(), d1));
    for (mut row, r) in m.axis_iter_mut(Axis(0)).zip(dataset.records()) {
        row.assign(&ArrayView1::from(&r.z[..]));
    }
    m
}

/// Probe accuracy on the raw embeddings: leakage before any debiasing.
pub fn oracle_probe_accuracy(dataset: &Dataset, target: Target, seed: u64) -> Result<f64> {
    adversary_probe(embedding_matrix(dataset).view(), &target.labels(dataset)?, seed)
}
