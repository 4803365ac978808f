use ndarray::{Array, Dimension, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

use super::grad::{grad_adv, main_terms_and_grad};
use super::loss::LossTerms;
use super::model::{DebiasModel, Dims};
use super::Batch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lambda_dec: f64,
    /// Entropy weight per sensitive attribute.
    pub lambda_entr: Vec<f64>,
    /// Orthogonality weight per sensitive attribute.
    pub lambda_or: Vec<f64>,
    pub lr_main: f64,
    pub lr_adv: f64,
    pub momentum: f64,
    /// Adversary steps per main step.
    pub adv_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Hyperparams {
    pub fn defaults(n_sensitive: usize) -> Self {
        Self {
            lambda_dec: 1.0,
            lambda_entr: vec![1.0; n_sensitive],
            lambda_or: vec![10.0; n_sensitive],
            // 1e-2 diverges on some seeds once the orthogonality term is weighted 10.
            lr_main: 3e-3,
            lr_adv: 1e-2,
            momentum: 0.9,
            adv_steps: 5,
            batch_size: 64,
            epochs: 200,
            init_scale: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("lambda_dec", self.lambda_dec),
            ("lr_main", self.lr_main),
            ("lr_adv", self.lr_adv),
            ("momentum", self.momentum),
            ("init_scale", self.init_scale),
        ];
        for (name, v) in scalars {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let weights = self.lambda_entr.iter().chain(&self.lambda_or);
        if weights.clone().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid("attribute weights must be finite and >= 0".into()));
        }
        if self.adv_steps == 0 || self.batch_size == 0 {
            return Err(Error::Invalid("adv_steps and batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn check_attributes(&self, n: usize) -> Result<()> {
        if self.lambda_entr.len() != n || self.lambda_or.len() != n {
            return Err(Error::Dimension(format!(
                "hyperparameters carry {}/{} attribute weights for {n} attributes",
                self.lambda_entr.len(),
                self.lambda_or.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub cls_p: f64,
    pub decom: f64,
    pub or: f64,
    pub cls_sens: Vec<f64>,
    pub entr: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochLosses>,
}

impl History {
    pub fn to_csv(&self, n_sensitive: usize) -> String {
        let mut out = String::from("epoch,L_cls_p,L_decom,L_or");
        for i in 1..=n_sensitive {
            out.push_str(&format!(",L_cls_{i}"));
        }
        for i in 1..=n_sensitive {
            out.push_str(&format!(",L_entr_{i}"));
        }
        out.push('\n');
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}", e.epoch, e.cls_p, e.decom, e.or));
            for v in e.cls_sens.iter().chain(&e.entr) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Row order for one epoch: a seeded permutation that depends only on
/// `(seed, epoch)`.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Trains from a seeded initialization.
pub fn train(dataset: &Dataset, dims: &Dims, hyper: &Hyperparams) -> Result<(DebiasModel, History)> {
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let model = DebiasModel::init(dims, hyper.init_scale, &mut rng)?;
    train_from(model, dataset, hyper)
}

/// Heavy-ball momentum: `v = mu v + g; p -= lr v`.
fn momentum_step<D: Dimension>(
    param: &mut Array<f64, D>,
    velocity: &mut Array<f64, D>,
    grad: &Array<f64, D>,
    lr: f64,
    mu: f64,
) {
    Zip::from(param)
        .and(velocity)
        .and(grad)
        .for_each(|p, v, &g| {
            *v = mu * *v + g;
            *p -= lr * *v;
        });
}

fn zeros_like<D: Dimension>(a: &Array<f64, D>) -> Array<f64, D> {
    Array::zeros(a.raw_dim())
}

/// Alternating optimization from a given model: on every mini-batch, take
/// `adv_steps` adversary steps, then one main step.
pub fn train_from(
    mut model: DebiasModel,
    dataset: &Dataset,
    hyper: &Hyperparams,
) -> Result<(DebiasModel, History)> {
    hyper.validate()?;
    model.validate()?;
    let n_sens = model.branches.len();
    hyper.check_attributes(n_sens)?;
    if dataset.is_empty() {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    let schema = dataset.schema();
    if schema.d1 != model.a.nrows() || schema.n_sensitive() != n_sens {
        return Err(Error::Dimension(
            "dataset schema does not match model dimensions".into(),
        ));
    }

    let mut v_a = zeros_like(&model.a);
    let mut v_b = zeros_like(&model.b);
    let mut v_wp = zeros_like(&model.w_p);
    let mut v_bp = zeros_like(&model.b_p);
    let mut v_d: Vec<_> = model.branches.iter().map(|br| zeros_like(&br.d)).collect();
    let mut v_t: Vec<_> = model.branches.iter().map(|br| zeros_like(&br.t)).collect();
    let mut v_w: Vec<_> = model.branches.iter().map(|br| zeros_like(&br.w)).collect();
    let mut v_bias: Vec<_> = model.branches.iter().map(|br| zeros_like(&br.bias)).collect();

    let mu = hyper.momentum;
    let mut history = History::default();
    let mut step = 0;
    for epoch in 0..hyper.epochs {
        let order = epoch_order(hyper.seed, epoch, dataset.len());
        let mut sums = LossTerms {
            cls_p: 0.0,
            decom: 0.0,
            or: 0.0,
            cls_sens: vec![0.0; n_sens],
            entr: vec![0.0; n_sens],
        };
        let mut batches = 0usize;
        for rows in order.chunks(hyper.batch_size) {
            let batch = Batch::from_dataset(dataset, rows)?;

            if n_sens > 0 {
                for _ in 0..hyper.adv_steps {
                    let g = grad_adv(&model, &batch)?;
                    for (i, (br, gb)) in model.branches.iter_mut().zip(&g.branches).enumerate() {
                        momentum_step(&mut br.t, &mut v_t[i], &gb.t, hyper.lr_adv, mu);
                        momentum_step(&mut br.w, &mut v_w[i], &gb.w, hyper.lr_adv, mu);
                        momentum_step(&mut br.bias, &mut v_bias[i], &gb.bias, hyper.lr_adv, mu);
                    }
                }
            }

            let (terms, g) = main_terms_and_grad(&model, &batch, hyper)?;
            check_finite(&terms, epoch, step)?;
            momentum_step(&mut model.a, &mut v_a, &g.a, hyper.lr_main, mu);
            momentum_step(&mut model.b, &mut v_b, &g.b, hyper.lr_main, mu);
            momentum_step(&mut model.w_p, &mut v_wp, &g.w_p, hyper.lr_main, mu);
            momentum_step(&mut model.b_p, &mut v_bp, &g.b_p, hyper.lr_main, mu);
            for (i, (br, gd)) in model.branches.iter_mut().zip(&g.d).enumerate() {
                momentum_step(&mut br.d, &mut v_d[i], gd, hyper.lr_main, mu);
            }

            sums.cls_p += terms.cls_p;
            sums.decom += terms.decom;
            sums.or += terms.or;
            for i in 0..n_sens {
                sums.cls_sens[i] += terms.cls_sens[i];
                sums.entr[i] += terms.entr[i];
            }
            batches += 1;
            step += 1;
        }
        let k = batches as f64;
        history.epochs.push(EpochLosses {
            epoch,
            cls_p: sums.cls_p / k,
            decom: sums.decom / k,
            or: sums.or / k,
            cls_sens: sums.cls_sens.iter().map(|v| v / k).collect(),
            entr: sums.entr.iter().map(|v| v / k).collect(),
        });
    }
    model.validate().map_err(|_| Error::NonFinite {
        term: "parameters".into(),
        epoch: hyper.epochs.saturating_sub(1),
        step,
    })?;
    Ok((model, history))
}

fn check_finite(terms: &LossTerms, epoch: usize, step: usize) -> Result<()> {
    let mut named = vec![
        ("L_cls_p".to_string(), terms.cls_p),
        ("L_decom".to_string(), terms.decom),
        ("L_or".to_string(), terms.or),
    ];
    for (i, (c, h)) in terms.cls_sens.iter().zip(&terms.entr).enumerate() {
        named.push((format!("L_cls_{}", i + 1), *c));
        named.push((format!("L_entr_{}", i + 1), *h));
    }
    match named.into_iter().find(|(_, v)| !v.is_finite()) {
        Some((term, _)) => Err(Error::NonFinite { term, epoch, step }),
        None => Ok(()),
    }
}
