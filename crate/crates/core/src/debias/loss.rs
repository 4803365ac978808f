use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

use super::model::DebiasModel;
use super::train::Hyperparams;
use super::Batch;

/// Log-probabilities via log-sum-exp.
pub fn log_softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.mapv(|v| v - lse)
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    log_softmax(logits).mapv(f64::exp)
}

/// Cross-entropy of `softmax(logits)` against class `target`.
pub fn loss_cls(logits: ArrayView1<f64>, target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::Domain(format!(
            "target {target} outside {} classes",
            logits.len()
        )));
    }
    Ok(-log_softmax(logits)[target])
}

/// Natural-base entropy of `softmax(logits)`.
pub fn loss_entropy(logits: ArrayView1<f64>) -> f64 {
    let logp = log_softmax(logits);
    -logp.iter().map(|&lp| lp.exp() * lp).sum::<f64>()
}

/// Every intermediate of the decomposition for one embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardState {
    pub z_p: Array1<f64>,
    /// `T_i B z` per attribute.
    pub s: Vec<Array1<f64>>,
    /// `D_i s_i` per attribute.
    pub z_sens: Vec<Array1<f64>>,
    pub primary_logits: Array1<f64>,
    pub adversary_logits: Vec<Array1<f64>>,
    /// `z_p + sum_i z_i`
    pub reconstruction: Array1<f64>,
}

pub fn forward(model: &DebiasModel, z: &[f64]) -> Result<ForwardState> {
    model.check_input(z.len())?;
    let z = ArrayView1::from(z);
    let u = model.b.dot(&z);
    let z_p = model.a.dot(&u);
    let mut reconstruction = z_p.clone();
    let mut s = Vec::with_capacity(model.branches.len());
    let mut z_sens = Vec::with_capacity(model.branches.len());
    let mut adversary_logits = Vec::with_capacity(model.branches.len());
    for br in &model.branches {
        let si = br.t.dot(&u);
        let zi = br.d.dot(&si);
        reconstruction += &zi;
        adversary_logits.push(br.w.dot(&si) + &br.bias);
        s.push(si);
        z_sens.push(zi);
    }
    let primary_logits = model.w_p.dot(&z_p) + &model.b_p;
    Ok(ForwardState {
        z_p,
        s,
        z_sens,
        primary_logits,
        adversary_logits,
        reconstruction,
    })
}

/// Row-wise forward pass over a batch.
#[derive(Debug, Clone)]
pub struct BatchForward {
    /// `B z` rows (n x d2)
    pub u: Array2<f64>,
    pub z_p: Array2<f64>,
    pub s: Vec<Array2<f64>>,
    pub z_sens: Vec<Array2<f64>>,
    /// `z - z_p - sum_i z_i`
    pub residual: Array2<f64>,
    pub primary_logits: Array2<f64>,
    pub adversary_logits: Vec<Array2<f64>>,
}

pub fn forward_batch(model: &DebiasModel, z: ArrayView2<f64>) -> Result<BatchForward> {
    model.check_input(z.ncols())?;
    let u = z.dot(&model.b.t());
    let z_p = u.dot(&model.a.t());
    let mut residual = &z - &z_p;
    let mut s = Vec::with_capacity(model.branches.len());
    let mut z_sens = Vec::with_capacity(model.branches.len());
    let mut adversary_logits = Vec::with_capacity(model.branches.len());
    for br in &model.branches {
        let si = u.dot(&br.t.t());
        let zi = si.dot(&br.d.t());
        residual -= &zi;
        adversary_logits.push(si.dot(&br.w.t()) + &br.bias);
        s.push(si);
        z_sens.push(zi);
    }
    let primary_logits = z_p.dot(&model.w_p.t()) + &model.b_p;
    Ok(BatchForward {
        u,
        z_p,
        s,
        z_sens,
        residual,
        primary_logits,
        adversary_logits,
    })
}

pub(crate) fn check_batch(model: &DebiasModel, batch: &Batch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    if batch.y_sens.len() != model.branches.len() {
        return Err(Error::Dimension(format!(
            "batch has {} sensitive label sets, model has {} branches",
            batch.y_sens.len(),
            model.branches.len()
        )));
    }
    if batch.y_sens.iter().any(|col| col.len() != batch.len()) {
        return Err(Error::Dimension("sensitive label count differs from batch size".into()));
    }
    model.check_input(batch.z.ncols())?;
    if batch.z.nrows() != batch.len() {
        return Err(Error::Dimension("embedding rows differ from label count".into()));
    }
    let k_p = model.w_p.nrows();
    if let Some(y) = batch.y_p.iter().find(|&&y| y >= k_p) {
        return Err(Error::Domain(format!("primary label {y} not below K_p = {k_p}")));
    }
    for (i, (br, col)) in model.branches.iter().zip(&batch.y_sens).enumerate() {
        let k = br.w.nrows();
        if let Some(y) = col.iter().find(|&&y| y >= k) {
            return Err(Error::Domain(format!("attribute {i} label {y} not below K = {k}")));
        }
    }
    Ok(())
}

pub(crate) fn mean_cls(logits: &Array2<f64>, targets: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for (row, &t) in logits.axis_iter(Axis(0)).zip(targets) {
        total += loss_cls(row, t)?;
    }
    Ok(total / targets.len() as f64)
}

pub(crate) fn mean_entropy(logits: &Array2<f64>) -> f64 {
    logits.axis_iter(Axis(0)).map(loss_entropy).sum::<f64>() / logits.nrows() as f64
}

/// Batch mean of `1/2 ||z - A B z - sum_i D_i T_i B z||^2`.
pub fn loss_decom(model: &DebiasModel, batch: &Batch) -> Result<f64> {
    check_batch(model, batch)?;
    let fwd = forward_batch(model, batch.z.view())?;
    Ok(half_sq_mean(&fwd.residual))
}

fn half_sq_mean(residual: &Array2<f64>) -> f64 {
    0.5 * residual.iter().map(|v| v * v).sum::<f64>() / residual.nrows() as f64
}

/// `sum_i lambda_or[i] * 1/2 ||A^T D_i||_F^2`.
pub fn loss_or(model: &DebiasModel, lambda_or: &[f64]) -> Result<f64> {
    if lambda_or.len() != model.branches.len() {
        return Err(Error::Dimension(format!(
            "{} orthogonality weights for {} branches",
            lambda_or.len(),
            model.branches.len()
        )));
    }
    Ok(model
        .branches
        .iter()
        .zip(lambda_or)
        .map(|(br, &lam)| {
            let cross = model.a.t().dot(&br.d);
            lam * 0.5 * cross.iter().map(|v| v * v).sum::<f64>()
        })
        .sum())
}

/// The individual loss terms on one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerms {
    pub cls_p: f64,
    pub decom: f64,
    /// Already weighted by the per-attribute orthogonality weights.
    pub or: f64,
    pub cls_sens: Vec<f64>,
    pub entr: Vec<f64>,
}

impl LossTerms {
    pub fn compute(model: &DebiasModel, batch: &Batch, hyper: &Hyperparams) -> Result<Self> {
        check_batch(model, batch)?;
        hyper.check_attributes(model.branches.len())?;
        let fwd = forward_batch(model, batch.z.view())?;
        Self::from_forward(model, batch, hyper, &fwd)
    }

    pub(crate) fn from_forward(
        model: &DebiasModel,
        batch: &Batch,
        hyper: &Hyperparams,
        fwd: &BatchForward,
    ) -> Result<Self> {
        let cls_sens = fwd
            .adversary_logits
            .iter()
            .zip(&batch.y_sens)
            .map(|(l, y)| mean_cls(l, y))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cls_p: mean_cls(&fwd.primary_logits, &batch.y_p)?,
            decom: half_sq_mean(&fwd.residual),
            or: loss_or(model, &hyper.lambda_or)?,
            cls_sens,
            entr: fwd.adversary_logits.iter().map(mean_entropy).collect(),
        })
    }

    /// `L_cls^p + lambda_dec L_decom + L_or - sum_i lambda_i L_entr^i`
    pub fn main(&self, hyper: &Hyperparams) -> f64 {
        let entr: f64 = self
            .entr
            .iter()
            .zip(&hyper.lambda_entr)
            .map(|(h, lam)| lam * h)
            .sum();
        self.cls_p + hyper.lambda_dec * self.decom + self.or - entr
    }

    /// `sum_i L_cls^i`
    pub fn adv(&self) -> f64 {
        self.cls_sens.iter().sum()
    }
}

/// Objective minimized over `V`.
pub fn objective_main(model: &DebiasModel, batch: &Batch, hyper: &Hyperparams) -> Result<f64> {
    Ok(LossTerms::compute(model, batch, hyper)?.main(hyper))
}

/// Objective minimized over `U`: the summed adversary cross-entropies.
pub fn objective_adv(model: &DebiasModel, batch: &Batch) -> Result<f64> {
    check_batch(model, batch)?;
    let fwd = forward_batch(model, batch.z.view())?;
    fwd.adversary_logits
        .iter()
        .zip(&batch.y_sens)
        .map(|(l, y)| mean_cls(l, y))
        .sum()
}
