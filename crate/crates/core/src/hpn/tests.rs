use super::*;
use crate::model::{normalized_adjacency, Model, ModelConfig, ParamGroup};
use crate::tensor::gradcheck::{check_gradients, GradCheckConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

fn permute_rows(m: &Matrix, perm: &[usize]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m.get(perm[i], j))
}

/// Brute-force k nearest: scan the full pairwise table, repeatedly taking
/// the closest unused node (lowest index on ties).
fn knn_oracle(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let table: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    points[a]
                        .iter()
                        .zip(&points[b])
                        .map(|(x, y)| (x - y).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    (0..n)
        .map(|e| {
            let mut members = vec![e];
            for _ in 0..k {
                let mut best: Option<usize> = None;
                for v in 0..n {
                    if members.contains(&v) {
                        continue;
                    }
                    if best.is_none_or(|b| table[e][v] < table[e][b]) {
                        best = Some(v);
                    }
                }
                members.push(best.unwrap());
            }
            members.sort_unstable();
            members
        })
        .collect()
}

#[test]
fn k_zero_gives_identity_incidence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let hg = build_hypergraph(&random(7, 3, &mut rng), 0).unwrap();
    assert_eq!(hg.incidence, Matrix::identity(7));
    assert!(matches!(
        build_hypergraph(&Matrix::zeros(4, 2), 4),
        Err(HpnError::KTooLarge { k: 4, n: 4 })
    ));
}

#[test]
fn three_points_on_a_line() {
    let rep = Matrix::from_vec(3, 1, vec![0.0, 1.0, 10.0]);
    let hg = build_hypergraph(&rep, 1).unwrap();
    let expected = knn_oracle(&[vec![0.0], vec![1.0], vec![10.0]], 1);
    assert_eq!(expected, vec![vec![0, 1], vec![0, 1], vec![1, 2]]);
    for (e, members) in expected.iter().enumerate() {
        assert_eq!(&hg.members(e), members);
    }
}

#[test]
fn duplicated_rows_land_in_each_others_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rep = random(6, 2, &mut rng);
    let copy = rep.row(1).to_vec();
    rep.row_mut(4).copy_from_slice(&copy);
    let hg = build_hypergraph(&rep, 1).unwrap();
    assert_eq!(hg.members(1), vec![1, 4]);
    assert_eq!(hg.members(4), vec![1, 4]);
}

#[test]
fn aggregation_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rep = random(5, 3, &mut rng);
    let mut g = Graph::new();
    let r = g.constant(rep.clone());
    let id = Hypergraph::from_incidence(Matrix::identity(5));
    let out = hyperedge_aggregate(&mut g, &id, r).unwrap();
    assert_eq!(g.value(out), &rep);

    let full = build_hypergraph(&rep, 4).unwrap();
    assert_eq!(full.incidence, Matrix::ones(5, 5));
    let out = hyperedge_aggregate(&mut g, &full, r).unwrap();
    let col_mean = rep.col_sums().scale(1.0 / 5.0);
    for i in 0..5 {
        for j in 0..3 {
            assert!((g.value(out).get(i, j) - col_mean.get(0, j)).abs() < 1e-14);
        }
    }
}

#[test]
fn aggregation_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rep = random(8, 3, &mut rng);
    let perm = [3, 0, 7, 1, 6, 2, 5, 4];
    let run = |rep: &Matrix| {
        let hg = build_hypergraph(rep, 2).unwrap();
        let mut g = Graph::new();
        let r = g.constant(rep.clone());
        let out = hyperedge_aggregate(&mut g, &hg, r).unwrap();
        g.value(out).clone()
    };
    let base = run(&rep);
    assert!(run(&permute_rows(&rep, &perm)).max_abs_diff(&permute_rows(&base, &perm)) < 1e-12);
}

#[test]
fn fusion_selects_and_commutes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, q) = (6, 3);
    let z_e = random(n, q, &mut rng);
    let v_e = random(n, q, &mut rng);
    let id = Hypergraph::from_incidence(Matrix::identity(n));
    let select = Matrix::from_fn(2 * q, q, |i, j| if i == j { 1.0 } else { 0.0 });
    let mut g = Graph::new();
    let (zv, vv, wv) = (
        g.constant(z_e.clone()),
        g.constant(v_e.clone()),
        g.constant(select),
    );
    let f = fuse(&mut g, &id, &id, zv, vv, wv).unwrap();
    assert_eq!(g.value(f), &z_e);

    let hz = build_hypergraph(&z_e, 2).unwrap();
    let hv = build_hypergraph(&v_e, 1).unwrap();
    let w = random(2 * q, q, &mut rng);
    let swapped_w = Matrix::from_fn(2 * q, q, |i, j| w.get((i + q) % (2 * q), j));
    let wv = g.constant(w);
    let sw = g.constant(swapped_w);
    let a = fuse(&mut g, &hz, &hv, zv, vv, wv).unwrap();
    let b = fuse(&mut g, &hv, &hz, vv, zv, sw).unwrap();
    assert!(g.value(a).max_abs_diff(g.value(b)) < 1e-14);
}

#[test]
fn fusion_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z_e = random(6, 3, &mut rng);
    let v_e = random(6, 3, &mut rng);
    let hz = build_hypergraph(&z_e, 2).unwrap();
    let hv = build_hypergraph(&v_e, 3).unwrap();
    let r = check_gradients(
        &[random(6, 3, &mut rng)],
        |g, w| {
            let (zv, vv) = (g.constant(z_e.clone()), g.constant(v_e.clone()));
            let f = fuse(g, &hz, &hv, zv, vv, w[0]).map_err(|e| match e {
                HpnError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            Ok(g.sum(f))
        },
        &GradCheckConfig::default(),
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn united_connectivity_values() {
    let mut g = Graph::new();
    let f = g.constant(Matrix::zeros(4, 2));
    let m = united_connectivity(&mut g, f).unwrap();
    assert_eq!(g.value(m), &Matrix::filled(4, 4, 0.5));

    // Rank one: F = u vᵀ gives M_ij = σ(u_i u_j |v|²).
    let u = [0.3, 1.2, 0.7, 2.0];
    let v = [0.5, -0.4];
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let f = g.constant(Matrix::from_fn(4, 2, |i, j| u[i] * v[j]));
    let m = united_connectivity(&mut g, f).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let expected = 1.0 / (1.0 + (-u[i] * u[j] * vv).exp());
            assert!((g.value(m).get(i, j) - expected).abs() < 1e-15);
        }
    }
    assert!(
        g.value(m).get(3, 1) > g.value(m).get(2, 1) && g.value(m).get(2, 1) > g.value(m).get(0, 1)
    );
    assert!(g.value(m).is_symmetric(1e-12));
}

#[test]
fn c2_logits() {
    let model = Model::new(ModelConfig::new(5, 4, 3), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let f = random(5, 3, &mut rng);
    let mut g = Graph::new();
    let p = model.params.bind(&mut g, |_| false);
    let fv = g.constant(f);
    let m = united_connectivity(&mut g, fv).unwrap();
    let mt = g.transpose(m);
    let a = classify_c2(&mut g, &p, &model.nets, m).unwrap();
    let b = classify_c2(&mut g, &p, &model.nets, mt).unwrap();
    assert_eq!(g.value(a), g.value(b));

    let mut zero = model.params.clone();
    for id in zero.ids_in(ParamGroup::Hpn) {
        let (r, c) = zero.get(id).shape();
        *zero.get_mut(id) = Matrix::zeros(r, c);
    }
    let p = zero.bind(&mut g, |_| false);
    let z = classify_c2(&mut g, &p, &model.nets, m).unwrap();
    assert_eq!(g.value(z), &Matrix::zeros(1, 2));
}

#[test]
fn k_zero_degrades_to_dense_fusion() {
    let model = Model::new(ModelConfig::new(16, 24, 8), 9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let zhat = random(16, 8, &mut rng);
    let vhat = random(16, 8, &mut rng);
    let mut g = Graph::new();
    let p = model.params.bind(&mut g, |_| false);
    let (zv, vv) = (g.constant(zhat.clone()), g.constant(vhat.clone()));
    let out = hpn_forward(&mut g, &p, &model.nets, zv, vv, 0).unwrap();

    // Reference written against plain matrices.
    let w = model.params.get(model.nets.fusion_w);
    let f = zhat.hcat(&vhat).matmul(w);
    let m = f.matmul_t(&f).map(|x| 1.0 / (1.0 + (-x).exp()));
    assert!(g.value(out.f).max_abs_diff(&f) < 1e-10);
    assert!(g.value(out.m).max_abs_diff(&m) < 1e-10);
}

#[test]
fn hpn_chain_gradients_reach_fusion_and_g1() {
    let model = Model::new(ModelConfig::new(8, 6, 3), 13);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let adj = normalized_adjacency(&Matrix::from_fn(8, 8, |i, j| {
        if i != j && (i + j) % 3 == 0 {
            1.0
        } else {
            0.0
        }
    }));
    let x = random(8, 6, &mut rng).map(|v| (v + 1.0) / 2.0);
    let vhat = random(8, 3, &mut rng);
    let mut inputs = vec![model.params.get(model.nets.fusion_w).clone()];
    inputs.extend(
        model
            .nets
            .g1
            .layers
            .iter()
            .map(|l| model.params.get(l.weight).clone()),
    );
    let lambda = 1e-2;
    let r = check_gradients(
        &inputs,
        |g, vars| {
            let mut all = Vec::new();
            for (id, prm) in model.params.iter() {
                let v = if id == model.nets.fusion_w {
                    vars[0]
                } else if let Some(pos) = model.nets.g1.layers.iter().position(|l| l.weight == id) {
                    vars[1 + pos]
                } else {
                    g.constant(prm.value.clone())
                };
                all.push(v);
            }
            let p = Bound::from_vars(all);
            let (a, xv, vv) = (
                g.constant(adj.clone()),
                g.constant(x.clone()),
                g.constant(vhat.clone()),
            );
            let zhat = model.nets.encode_fts(g, &p, a, xv)?;
            let out = hpn_forward(g, &p, &model.nets, zhat, vv, 2).map_err(|e| match e {
                HpnError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            let l1 = g.abs_sum(out.m);
            let l1 = g.scale(l1, lambda);
            let ls = g.log_softmax_rows(out.logits)?;
            let pick = g.constant(Matrix::from_vec(1, 2, vec![0.0, -1.0]));
            let ce = g.mul(ls, pick)?;
            let ce = g.sum(ce);
            g.add(l1, ce)
        },
        &GradCheckConfig::default(),
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

proptest! {
    #[test]
    fn incidence_invariants(seed in 0u64..10_000, n in 2usize..12, kf in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = ((n - 1) as f64 * kf) as usize;
        let rep = random(n, 3, &mut rng);
        let hg = build_hypergraph(&rep, k).unwrap();
        let points: Vec<Vec<f64>> = (0..n).map(|i| rep.row(i).to_vec()).collect();
        let oracle = knn_oracle(&points, k);
        for (e, expected) in oracle.iter().enumerate() {
            prop_assert_eq!(hg.edge_degree[e], (k + 1) as f64);
            prop_assert_eq!(hg.incidence.get(e, e), 1.0);
            prop_assert_eq!(&hg.members(e), expected);
        }
        prop_assert!(hg.vertex_degree.iter().all(|&d| d >= 1.0));
        let hv = build_hypergraph(&random(n, 3, &mut rng), k).unwrap();
        let fused = hg.incidence.add(&hv.incidence).scale(0.5);
        prop_assert!(fused.as_slice().iter().all(|&v| v == 0.0 || v == 0.5 || v == 1.0));
    }
}
