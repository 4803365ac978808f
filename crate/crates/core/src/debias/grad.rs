use ndarray::{Array1, Array2, Axis, Zip};

use crate::error::Result;

use super::loss::{check_batch, forward_batch, log_softmax, BatchForward, LossTerms};
use super::model::DebiasModel;
use super::train::Hyperparams;
use super::Batch;

/// Gradient of the main objective with respect to `V = {A, B, D_i, W_p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MainGrad {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub d: Vec<Array2<f64>>,
    pub w_p: Array2<f64>,
    pub b_p: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchGrad {
    pub t: Array2<f64>,
    pub w: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradient of the adversary objective with respect to `U = {T_i, W_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvGrad {
    pub branches: Vec<BranchGrad>,
}

/// Row-wise `softmax(logits) - onehot(targets)`, scaled by `scale`.
fn softmax_minus_onehot(logits: &Array2<f64>, targets: &[usize], scale: f64) -> Array2<f64> {
    let mut out = logits.clone();
    for (mut row, &t) in out.axis_iter_mut(Axis(0)).zip(targets) {
        let p = log_softmax(row.view()).mapv(f64::exp);
        row.assign(&p);
        row[t] -= 1.0;
        row *= scale;
    }
    out
}

/// Row-wise gradient of the entropy of `softmax(logits)`:
/// `dH/dl_k = -p_k (ln p_k + H)`, scaled by `scale`.
fn entropy_grad(logits: &Array2<f64>, scale: f64) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let logp = log_softmax(row.view());
        let h = -logp.iter().map(|&lp| lp.exp() * lp).sum::<f64>();
        Zip::from(&mut row)
            .and(&logp)
            .for_each(|g, &lp| *g = -scale * lp.exp() * (lp + h));
    }
    out
}

pub fn grad_main(model: &DebiasModel, batch: &Batch, hyper: &Hyperparams) -> Result<MainGrad> {
    Ok(main_terms_and_grad(model, batch, hyper)?.1)
}

/// Loss terms and `V` gradient from a single forward pass.
pub(crate) fn main_terms_and_grad(
    model: &DebiasModel,
    batch: &Batch,
    hyper: &Hyperparams,
) -> Result<(LossTerms, MainGrad)> {
    check_batch(model, batch)?;
    hyper.check_attributes(model.branches.len())?;
    let fwd = forward_batch(model, batch.z.view())?;
    let terms = LossTerms::from_forward(model, batch, hyper, &fwd)?;
    Ok((terms, main_grad_from(model, batch, hyper, &fwd)))
}

fn main_grad_from(
    model: &DebiasModel,
    batch: &Batch,
    hyper: &Hyperparams,
    fwd: &BatchForward,
) -> MainGrad {
    let inv_n = 1.0 / batch.len() as f64;

    let g_lp = softmax_minus_onehot(&fwd.primary_logits, &batch.y_p, inv_n);
    let w_p = g_lp.t().dot(&fwd.z_p);
    let b_p = g_lp.sum_axis(Axis(0));

    // d(lambda_dec * L_decom)/d(z_p) = d/d(z_i) = -lambda_dec * r / n
    let g_recon = &fwd.residual * (-hyper.lambda_dec * inv_n);
    let g_zp = g_lp.dot(&model.w_p) + &g_recon;

    let mut a = g_zp.t().dot(&fwd.u);
    let mut g_u = g_zp.dot(&model.a);
    let mut d = Vec::with_capacity(model.branches.len());
    for (i, br) in model.branches.iter().enumerate() {
        // the objective carries -lambda_i * H
        let g_li = entropy_grad(&fwd.adversary_logits[i], -hyper.lambda_entr[i] * inv_n);
        let g_si = g_li.dot(&br.w) + g_recon.dot(&br.d);
        g_u = g_u + g_si.dot(&br.t);

        let cross = model.a.t().dot(&br.d);
        let lam = hyper.lambda_or[i];
        let g_d = g_recon.t().dot(&fwd.s[i]) + &(model.a.dot(&cross) * lam);
        a = a + br.d.dot(&cross.t()) * lam;
        d.push(g_d);
    }
    let b = g_u.t().dot(&batch.z);
    MainGrad { a, b, d, w_p, b_p }
}

pub fn grad_adv(model: &DebiasModel, batch: &Batch) -> Result<AdvGrad> {
    check_batch(model, batch)?;
    let fwd = forward_batch(model, batch.z.view())?;
    Ok(adv_grad_from(model, batch, &fwd))
}

fn adv_grad_from(model: &DebiasModel, batch: &Batch, fwd: &BatchForward) -> AdvGrad {
    let inv_n = 1.0 / batch.len() as f64;
    let branches = model
        .branches
        .iter()
        .enumerate()
        .map(|(i, br)| {
            let g_li = softmax_minus_onehot(&fwd.adversary_logits[i], &batch.y_sens[i], inv_n);
            let g_si = g_li.dot(&br.w);
            BranchGrad {
                t: g_si.t().dot(&fwd.u),
                w: g_li.t().dot(&fwd.s[i]),
                bias: g_li.sum_axis(Axis(0)),
            }
        })
        .collect();
    AdvGrad { branches }
}
