//! Analytic gradients against central finite differences.

use kanface_core::debias::{
    grad_adv, grad_main, objective_adv, objective_main, softmax, Batch, DebiasModel, Dims,
    Hyperparams,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

fn random_instance(seed: u64, n: usize) -> (DebiasModel, Batch, Hyperparams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims {
        d1: 6,
        d2: 3,
        d3: vec![2, 2],
        k_p: 4,
        k_sens: vec![3, 2],
    };
    let mut model = DebiasModel::init(&dims, 1.0, &mut rng).unwrap();
    for br in &mut model.branches {
        br.bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
    }
    model.b_p.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
    let z = Array2::from_shape_fn((n, dims.d1), |_| rng.gen_range(-1.0..1.0));
    let batch = Batch {
        z,
        y_p: (0..n).map(|_| rng.gen_range(0..dims.k_p)).collect(),
        y_sens: dims
            .k_sens
            .iter()
            .map(|&k| (0..n).map(|_| rng.gen_range(0..k)).collect())
            .collect(),
    };
    let hyper = Hyperparams {
        lambda_dec: rng.gen_range(0.5..2.0),
        lambda_entr: vec![rng.gen_range(0.2..1.5), rng.gen_range(0.2..1.5)],
        lambda_or: vec![rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)],
        ..Hyperparams::defaults(2)
    };
    (model, batch, hyper)
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central difference of `f` with respect to every entry that `select`
/// exposes, compared against `analytic` (same layout). Returns the worst
/// relative error.
fn check<F, S>(model: &DebiasModel, analytic: &[f64], select: S, f: F) -> f64
where
    S: Fn(&mut DebiasModel) -> &mut [f64],
    F: Fn(&DebiasModel) -> f64,
{
    let mut probe = model.clone();
    let len = select(&mut probe).len();
    assert_eq!(len, analytic.len());
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let orig = select(&mut probe)[k];
        select(&mut probe)[k] = orig + H;
        let plus = f(&probe);
        select(&mut probe)[k] = orig - H;
        let minus = f(&probe);
        select(&mut probe)[k] = orig;
        let numeric = (plus - minus) / (2.0 * H);
        let err = rel_err(a, numeric);
        assert!(err < REL_TOL, "coordinate {k}: analytic {a} numeric {numeric} rel {err}");
        worst = worst.max(err);
    }
    worst
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

fn flat1(a: &Array1<f64>) -> Vec<f64> {
    a.to_vec()
}

#[test]
fn main_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let (model, batch, hyper) = random_instance(seed, 8);
        let g = grad_main(&model, &batch, &hyper).unwrap();
        let f = |m: &DebiasModel| objective_main(m, &batch, &hyper).unwrap();
        check(&model, &flat(&g.a), |m| m.a.as_slice_mut().unwrap(), f);
        check(&model, &flat(&g.b), |m| m.b.as_slice_mut().unwrap(), f);
        check(&model, &flat(&g.w_p), |m| m.w_p.as_slice_mut().unwrap(), f);
        check(&model, &flat1(&g.b_p), |m| m.b_p.as_slice_mut().unwrap(), f);
        for i in 0..2 {
            check(&model, &flat(&g.d[i]), |m| m.branches[i].d.as_slice_mut().unwrap(), f);
        }
    }
}

#[test]
fn adversary_gradient_matches_finite_differences() {
    for seed in 100..110 {
        let (model, batch, _) = random_instance(seed, 8);
        let g = grad_adv(&model, &batch).unwrap();
        let f = |m: &DebiasModel| objective_adv(m, &batch).unwrap();
        for i in 0..2 {
            let gb = &g.branches[i];
            check(&model, &flat(&gb.t), |m| m.branches[i].t.as_slice_mut().unwrap(), f);
            check(&model, &flat(&gb.w), |m| m.branches[i].w.as_slice_mut().unwrap(), f);
            check(&model, &flat1(&gb.bias), |m| m.branches[i].bias.as_slice_mut().unwrap(), f);
        }
    }
}

/// Closed form: `mean_n (softmax(l_n) - onehot(y_n)) z_p,n^T`.
#[test]
fn primary_head_gradient_closed_form() {
    let (model, batch, hyper) = random_instance(7, 8);
    let g = grad_main(&model, &batch, &hyper).unwrap();
    let mut expected = Array2::<f64>::zeros(model.w_p.dim());
    for (n, z) in batch.z.outer_iter().enumerate() {
        let zp = model.a.dot(&model.b.dot(&z));
        let mut r = softmax((model.w_p.dot(&zp) + &model.b_p).view());
        r[batch.y_p[n]] -= 1.0;
        for (i, ri) in r.iter().enumerate() {
            for (j, zj) in zp.iter().enumerate() {
                expected[[i, j]] += ri * zj / batch.len() as f64;
            }
        }
    }
    let diff = (&g.w_p - &expected).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
    assert!(diff < 1e-12, "max diff {diff}");
}

#[test]
fn adversary_head_gradient_closed_form() {
    let (model, batch, _) = random_instance(8, 8);
    let g = grad_adv(&model, &batch).unwrap();
    for (i, br) in model.branches.iter().enumerate() {
        let mut expected = Array2::<f64>::zeros(br.w.dim());
        for (n, z) in batch.z.outer_iter().enumerate() {
            let s = br.t.dot(&model.b.dot(&z));
            let mut r = softmax((br.w.dot(&s) + &br.bias).view());
            r[batch.y_sens[i][n]] -= 1.0;
            for (a, ra) in r.iter().enumerate() {
                for (b, sb) in s.iter().enumerate() {
                    expected[[a, b]] += ra * sb / batch.len() as f64;
                }
            }
        }
        let diff = (&g.branches[i].w - &expected)
            .mapv(f64::abs)
            .fold(0.0f64, |m, &v| m.max(v));
        assert!(diff < 1e-12, "branch {i}: max diff {diff}");
    }
}

#[test]
fn no_sensitive_attributes_gives_empty_adversary_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = Dims {
        d1: 4,
        d2: 2,
        d3: vec![],
        k_p: 3,
        k_sens: vec![],
    };
    let model = DebiasModel::init(&dims, 1.0, &mut rng).unwrap();
    let batch = Batch {
        z: Array2::from_shape_fn((5, 4), |_| rng.gen_range(-1.0..1.0)),
        y_p: vec![0, 1, 2, 0, 1],
        y_sens: vec![],
    };
    assert!(grad_adv(&model, &batch).unwrap().branches.is_empty());
    assert_eq!(objective_adv(&model, &batch).unwrap(), 0.0);
}

/// Small adversary steps should not increase the adversary objective on
/// their own batch.
#[test]
fn adversary_step_descends() {
    let mut non_increasing = 0;
    for seed in 0..100 {
        let (mut model, batch, _) = random_instance(1000 + seed, 8);
        let before = objective_adv(&model, &batch).unwrap();
        let g = grad_adv(&model, &batch).unwrap();
        let lr = 1e-3;
        for (br, gb) in model.branches.iter_mut().zip(&g.branches) {
            br.t.scaled_add(-lr, &gb.t);
            br.w.scaled_add(-lr, &gb.w);
            br.bias.scaled_add(-lr, &gb.bias);
        }
        let after = objective_adv(&model, &batch).unwrap();
        if after <= before {
            non_increasing += 1;
        }
    }
    assert!(non_increasing >= 99, "{non_increasing}/100 steps descended");
}
