use super::*;
use crate::model::{Model, ModelConfig, ParamGroup};
use crate::tensor::gradcheck::{check_gradients, GradCheckConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalars(g: &mut Graph, values: [f64; 5]) -> [Var; 5] {
    values.map(|v| g.constant(Matrix::scalar(v)))
}

#[test]
fn adversarial_hand_evaluations() {
    assert_eq!(adv_values(&AdvScores::default()), (0.0, 0.0, 0.0));
    let s = AdvScores {
        d_z: 1.0,
        d_x: 1.0,
        d_gz: -1.0,
        d_g1: -1.0,
        d_s: -1.0,
    };
    let (l_d, l_g, l_adv) = adv_values(&s);
    assert_eq!((l_d, l_g), (-6.0, 3.0));
    assert!((l_adv - 2.4).abs() < 1e-15);

    let mut g = Graph::new();
    let vars = scalars(&mut g, [1.0, 1.0, -1.0, -1.0, -1.0]);
    let (d, gl, adv) = adv_losses(&mut g, vars).unwrap();
    assert_eq!(g.value(d).item(), -6.0);
    assert_eq!(g.value(gl).item(), 3.0);
    assert!((g.value(adv).item() - 2.4).abs() < 1e-15);
}

#[test]
fn real_scores_enter_adv_through_the_disc_weight_only() {
    let base = AdvScores {
        d_z: 0.2,
        d_x: -0.1,
        d_gz: 0.3,
        d_g1: 0.05,
        d_s: -0.4,
    };
    let moved = AdvScores {
        d_z: 0.9,
        d_x: 0.4,
        ..base
    };
    let (d0, g0, a0) = adv_values(&base);
    let (d1, g1, a1) = adv_values(&moved);
    assert_eq!(g0, g1);
    assert!((a1 - a0 - 0.1 * (d1 - d0)).abs() < 1e-15);
}

#[test]
fn bce_closed_forms() {
    let mut g = Graph::new();
    let p = g.constant(Matrix::filled(2, 2, 0.5));
    let l = bce_mean(&mut g, "x", &Matrix::ones(2, 2), p).unwrap();
    assert!((g.value(l).item() - std::f64::consts::LN_2).abs() < 1e-12);

    let target = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
    let p = g.constant(target.clone());
    let l = bce_mean(&mut g, "x", &target, p).unwrap();
    assert!(g.value(l).item() < 1e-5);

    let bad = Matrix::from_vec(1, 2, vec![0.5, 1.5]);
    assert!(matches!(
        bce_mean(&mut g, "fts", &bad, p),
        Err(LossError::Target {
            what: "fts",
            row: 0,
            col: 1,
            ..
        })
    ));
}

#[test]
fn rec_loss_gradient_on_interior_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut interior = |r, c| Matrix::from_fn(r, c, |_, _| 0.05 + 0.9 * rng.random::<f64>());
    let (x, a, v) = (
        interior(4, 3),
        Matrix::from_fn(4, 4, |i, j| ((i + j) % 2) as f64),
        interior(1, 3),
    );
    let inputs = [interior(4, 3), interior(4, 4), interior(1, 3)];
    let r = check_gradients(
        &inputs,
        |g, p| {
            rec_loss(g, &x, p[0], &a, p[1], &v, p[2])
                .map(|r| r.total)
                .map_err(|e| match e {
                    LossError::Tensor(t) => t,
                    other => panic!("{other}"),
                })
        },
        &GradCheckConfig::default(),
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn cross_entropy_anchors() {
    let mut g = Graph::new();
    let sure = g.constant(Matrix::from_vec(1, 2, vec![10.0, -10.0]));
    let ce = cross_entropy(&mut g, sure, 0).unwrap();
    assert!(g.value(ce).item() < 1e-4);
    let flat = g.constant(Matrix::zeros(1, 2));
    let ce = cross_entropy(&mut g, flat, 1).unwrap();
    assert!((g.value(ce).item() - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(matches!(
        cross_entropy(&mut g, flat, 2),
        Err(LossError::Label(2))
    ));
}

#[test]
fn cls_loss_is_additive() {
    let mut g = Graph::new();
    let a = g.constant(Matrix::from_vec(1, 2, vec![2.0, -1.0]));
    let b = g.constant(Matrix::from_vec(1, 2, vec![0.3, 0.9]));
    let c = g.constant(Matrix::from_vec(1, 2, vec![-4.0, 4.0]));
    let flat = g.constant(Matrix::zeros(1, 2));
    let full = cls_loss(&mut g, a, b, c, 1).unwrap();
    let c_alone = cross_entropy(&mut g, c, 1).unwrap();
    let zeroed = cls_loss(&mut g, a, b, flat, 1).unwrap();
    let diff = g.value(zeroed).item() - g.value(full).item();
    let expected = std::f64::consts::LN_2 - g.value(c_alone).item();
    assert!((diff - expected).abs() < 1e-12);
}

#[test]
fn sparse_loss_values_and_gradient() {
    let mut g = Graph::new();
    let m = g.constant(Matrix::filled(4, 4, 0.5));
    let l = sparse_loss(&mut g, m);
    assert_eq!(g.value(l).item(), 8.0);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pos = Matrix::from_fn(3, 3, |_, _| 0.1 + rng.random::<f64>());
    let r = check_gradients(
        std::slice::from_ref(&pos),
        |g, v| Ok(sparse_loss(g, v[0])),
        &GradCheckConfig::default(),
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4);
    let mut g = Graph::new();
    let v = g.param(pos);
    let l = sparse_loss(&mut g, v);
    g.backward(l).unwrap();
    assert_eq!(g.grad(v).unwrap(), &Matrix::ones(3, 3));
}

#[test]
fn report_total_and_lambda_linearity() {
    let r = LossReport {
        d_loss: -1.0,
        g_loss: 0.5,
        adv: 0.4,
        rec1: 1.2,
        rec2: 0.7,
        cls1: 0.6,
        cls2: 0.65,
        cls3: 0.69,
        sparse: 128.0,
        total: 0.0,
    };
    let grid = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let totals: Vec<f64> = grid.iter().map(|&l| r.with_total(l).total).collect();
    assert!(totals.windows(2).all(|w| w[0] > w[1]));
    let base = r.compute_total(0.0);
    for (l, t) in grid.iter().zip(&totals) {
        assert!((t - base - l * 128.0).abs() < 1e-12);
    }
    let line = r.with_total(1e-4).to_json_line();
    let back: LossReport = serde_json::from_str(&line).unwrap();
    assert_eq!(back, r.with_total(1e-4));
}

/// One descent step on L_D widens the gap between the real-pair score and
/// the fake-pair scores.
#[test]
fn discriminator_descent_separates_real_from_fake() {
    let model = Model::new(ModelConfig::new(6, 5, 3), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut rnd = |r, c| Matrix::from_fn(r, c, |_, _| rng.random::<f64>());
    let (x, z, x_fake, z_fake, v_fake) = (rnd(6, 5), rnd(6, 3), rnd(6, 5), rnd(6, 3), rnd(6, 3));
    let scores = |params: &crate::model::ParamSet| {
        let mut g = Graph::new();
        let p = params.bind(&mut g, |grp| grp == ParamGroup::Discriminator);
        let (xv, zv) = (g.constant(x.clone()), g.constant(z.clone()));
        let (xf, zf, vf) = (
            g.constant(x_fake.clone()),
            g.constant(z_fake.clone()),
            g.constant(v_fake.clone()),
        );
        let real = model.nets.discriminate(&mut g, &p, xv, zv).unwrap();
        let gz = model.nets.discriminate(&mut g, &p, xf, zv).unwrap();
        let g1 = model.nets.discriminate(&mut g, &p, xv, zf).unwrap();
        let s = model.nets.discriminate(&mut g, &p, xv, vf).unwrap();
        let (l_d, _, _) = adv_losses(&mut g, [real, real, gz, g1, s]).unwrap();
        g.backward(l_d).unwrap();
        let gap = g.value(real).item()
            - (g.value(gz).item() + g.value(g1).item() + g.value(s).item()) / 3.0;
        let grads: Vec<(crate::model::ParamId, Matrix)> = params
            .ids_in(ParamGroup::Discriminator)
            .into_iter()
            .map(|id| (id, g.grad(p.var(id)).unwrap().clone()))
            .collect();
        (gap, grads)
    };
    let (gap0, grads) = scores(&model.params);
    let mut stepped = model.params.clone();
    for (id, grad) in grads {
        let updated = stepped.get(id).sub(&grad.scale(1e-2));
        *stepped.get_mut(id) = updated;
    }
    let (gap1, _) = scores(&stepped);
    assert!(gap1 > gap0, "{gap0} -> {gap1}");
}

proptest! {
    #[test]
    fn sparse_loss_is_absolutely_homogeneous(c in -5.0f64..5.0, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Matrix::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
        let mut g = Graph::new();
        let a = g.constant(m.clone());
        let b = g.constant(m.scale(c));
        let la = sparse_loss(&mut g, a);
        let lb = sparse_loss(&mut g, b);
        prop_assert!((g.value(lb).item() - c.abs() * g.value(la).item()).abs() < 1e-12);
    }
}
