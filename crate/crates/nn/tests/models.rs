use std::sync::Arc;

use flexdiff_core::graph::named::complete;
use flexdiff_core::random::random_connected;
use flexdiff_core::synth::{generate, SynthConfig};
use flexdiff_core::{Graph, LaplacianParams};
use flexdiff_nn::layers::gat_attention;
use flexdiff_nn::{
    accuracy, binary_auc, cross_entropy, train, Arch, Metric, Model, ModelConfig, Tape, Tensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn logits(model: &Model, x: &Tensor) -> Tensor {
    let mut tape = Tape::new();
    let vars = model.param_leaves(&mut tape, model.params());
    let xv = tape.leaf(x.clone());
    let out = model.forward(&mut tape, &vars, xv, None).unwrap();
    tape.value(out).clone()
}

fn graph() -> Graph {
    random_connected(15, 0.2, &mut ChaCha8Rng::seed_from_u64(5))
}

fn cfg(arch: Arch) -> ModelConfig {
    ModelConfig {
        hidden: 8,
        heads: 2,
        dropout: 0.0,
        ..ModelConfig::new(arch)
    }
}

#[test]
fn pd_gat_with_zero_edge_projection_equals_gat() {
    let g = graph();
    let x = random_tensor(15, 4, 1);
    let mut pd = Model::new(&cfg(Arch::PdGat), &g, 4, 3).unwrap();
    let mut gat = Model::new(&cfg(Arch::Gat), &g, 4, 3).unwrap();
    for layer in 0..2 {
        let (pd_heads, pd_edges, pd_trailing) = pd.attention_layer_params(layer).unwrap();
        let (gat_heads, _, gat_trailing) = gat.attention_layer_params(layer).unwrap();
        for (ph, gh) in pd_heads.iter().zip(&gat_heads) {
            for k in 0..3 {
                gat.params_mut()[gh[k]] = pd.params()[ph[k]].clone();
            }
        }
        gat.params_mut()[gat_trailing] = pd.params()[pd_trailing].clone();
        for (w_e, _) in pd_edges.into_iter().flatten() {
            let shape = pd.params()[w_e].shape();
            pd.params_mut()[w_e] = Tensor::zeros(shape.0, shape.1);
        }
    }
    let a = logits(&pd, &x);
    let b = logits(&gat, &x);
    assert!(a.max_abs_diff(&b) < 1e-12, "{}", a.max_abs_diff(&b));
}

#[test]
fn single_head_identity_trailing_matches_plain_attention_layer() {
    let g = graph();
    let x = random_tensor(15, 4, 2);
    let c = ModelConfig {
        layers: 1,
        hidden: 3,
        heads: 1,
        ..cfg(Arch::PdGat)
    };
    let mut model = Model::new(&c, &g, 4, 3).unwrap();
    let (heads, edges, trailing) = model.attention_layer_params(0).unwrap();
    let (w_e, _) = edges[0].unwrap();
    model.params_mut()[w_e] = Tensor::zeros(2, 3);
    model.params_mut()[trailing] = Tensor::identity(3);
    let w = model.params()[heads[0][0]].clone();
    let mut a: Vec<f64> = model.params()[heads[0][1]].data().to_vec();
    a.extend_from_slice(model.params()[heads[0][2]].data());

    let out = logits(&model, &x);
    for i in 0..15 {
        let mut nb: Vec<usize> = g.neighbors(i).to_vec();
        nb.push(i);
        let scores: Vec<f64> = nb.iter().map(|&j| gat_attention(x.row(i), x.row(j), &w, &a, 0.2)).collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
        for col in 0..3 {
            let mut v = 0.0;
            for (k, &j) in nb.iter().enumerate() {
                let wh: f64 = (0..4).map(|r| x.get(j, r) * w.get(r, col)).sum();
                v += (scores[k] - m).exp() / z * wh;
            }
            assert!((out.get(i, col) - v.max(0.0)).abs() < 1e-12);
        }
    }
}

#[test]
fn pd_gcn_random_walk_layer_is_row_normalized_product() {
    let g = graph();
    let x = random_tensor(15, 4, 3);
    let c = ModelConfig {
        layers: 1,
        params: LaplacianParams::RANDOM_WALK,
        ..cfg(Arch::PdGcn)
    };
    let model = Model::new(&c, &g, 4, 3).unwrap();
    let w = &model.params()[0];
    let out = logits(&model, &x);
    let xw = x.matmul(w);
    for i in 0..15 {
        let d = g.degree(i) as f64;
        for col in 0..3 {
            let expect: f64 = g.neighbors(i).iter().map(|&j| xw.get(j, col)).sum::<f64>() / d;
            assert!((out.get(i, col) - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn pd_gcn_on_triangle_averages_all_nodes() {
    // alpha = 1, gamma = 1/2 on K3 gives P = J / 3
    let c = ModelConfig {
        layers: 1,
        params: LaplacianParams::new(1.0, 0.5).unwrap(),
        ..cfg(Arch::PdGcn)
    };
    let model = Model::new(&c, &complete(3), 2, 2).unwrap();
    let x = Tensor::from_vec(3, 2, vec![1.0, 2.0, -3.0, 0.5, 0.5, 4.0]);
    let out = logits(&model, &x);
    let w = &model.params()[0];
    let mean = Tensor::from_vec(1, 2, vec![-0.5, 6.5 / 3.0]).matmul(w);
    for i in 0..3 {
        for col in 0..2 {
            assert!((out.get(i, col) - mean.get(0, col)).abs() < 1e-12);
        }
    }
}

#[test]
fn gcn_on_isolated_node_applies_activation() {
    use flexdiff_nn::layers::{gcn_operator, propagate_layer, Activation};
    use flexdiff_nn::SparseOp;
    let g = Graph::from_edges(1, []).unwrap();
    let s = Arc::new(SparseOp::new(gcn_operator(&g)));
    let mut tape = Tape::new();
    let h = tape.leaf(Tensor::from_vec(1, 3, vec![-1.0, 0.0, 2.5]));
    let w = tape.leaf(Tensor::identity(3));
    let out = propagate_layer(&mut tape, &s, h, w, Activation::Relu);
    assert_eq!(tape.value(out).data(), &[0.0, 0.0, 2.5]);
}

fn permuted(g: &Graph, perm: &[usize]) -> Graph {
    Graph::from_edges(g.node_count(), g.edges().map(|(i, j)| (perm[i], perm[j]))).unwrap()
}

#[test]
fn predictions_are_permutation_equivariant() {
    let g = graph();
    let x = random_tensor(15, 4, 4);
    let mut perm: Vec<usize> = (0..15).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(6));
    let gp = permuted(&g, &perm);
    let mut xp = Tensor::zeros(15, 4);
    for i in 0..15 {
        xp.row_mut(perm[i]).copy_from_slice(x.row(i));
    }
    for arch in [Arch::Mlp, Arch::Gcn, Arch::Gat, Arch::PdGcn, Arch::PdGat] {
        let c = ModelConfig {
            params: LaplacianParams::new(0.5, 0.7).unwrap(),
            ..cfg(arch)
        };
        let a = Model::new(&c, &g, 4, 3).unwrap().predict(&x).unwrap();
        let b = Model::new(&c, &gp, 4, 3).unwrap().predict(&xp).unwrap();
        for i in 0..15 {
            for k in 0..3 {
                assert!((a.get(i, k) - b.get(perm[i], k)).abs() < 1e-10, "{arch:?}");
            }
        }
    }
}

#[test]
fn probabilities_sum_to_one() {
    let g = graph();
    let x = random_tensor(15, 4, 7);
    for arch in [Arch::Gcn, Arch::PdGat] {
        let p = Model::new(&cfg(arch), &g, 4, 5).unwrap().predict(&x).unwrap();
        for i in 0..15 {
            let s: f64 = p.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(p.row(i).iter().all(|&v| v > 0.0));
        }
    }
}

#[test]
fn cross_entropy_values() {
    let uniform = Tensor::from_fn(4, 5, |_, _| 0.2);
    let labels = [0, 1, 2, 3];
    let ce = cross_entropy(&uniform, &labels, &[0, 1, 2, 3]).unwrap();
    assert!((ce - 5f64.ln()).abs() < 1e-14);
    let perfect = Tensor::from_fn(4, 5, |i, k| if k == i { 1.0 } else { 0.0 });
    assert!(cross_entropy(&perfect, &labels, &[0, 1, 2, 3]).unwrap().abs() < 1e-15);
    assert!(cross_entropy(&uniform, &labels, &[]).is_err());
}

#[test]
fn empty_training_mask_is_rejected() {
    let g = graph();
    let model = Model::new(&cfg(Arch::Gcn), &g, 4, 3).unwrap();
    let x = random_tensor(15, 4, 8);
    let labels = Arc::new(vec![0; 15]);
    assert!(model
        .loss_and_grad(model.params(), &x, &labels, &Arc::new(vec![]), None)
        .is_err());
}

#[test]
fn accuracy_breaks_ties_toward_lowest_class() {
    let p = Tensor::from_vec(2, 3, vec![0.4, 0.4, 0.2, 0.1, 0.45, 0.45]);
    assert_eq!(accuracy(&p, &[0, 1], &[0, 1]).unwrap(), 1.0);
    assert_eq!(accuracy(&p, &[1, 2], &[0, 1]).unwrap(), 0.0);
}

fn auc_oracle(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if positive[i] && !positive[j] {
                den += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count(
        data in prop::collection::vec((0u8..6, any::<bool>()), 2..40)
    ) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
        let positive: Vec<bool> = data.iter().map(|(_, p)| *p).collect();
        let both = positive.iter().any(|&p| p) && positive.iter().any(|&p| !p);
        prop_assume!(both);
        let auc = binary_auc(&scores, &positive).unwrap();
        prop_assert!((auc - auc_oracle(&scores, &positive)).abs() < 1e-12);
    }
}

#[test]
fn tied_scores_give_half_auc() {
    let auc = binary_auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap();
    assert_eq!(auc, 0.5);
    assert!(binary_auc(&[0.1, 0.2], &[true, true]).is_err());
}

fn homophilic_data(seed: u64) -> flexdiff_core::Dataset {
    generate(&SynthConfig::new(60, 3, 0.9, seed)).unwrap()
}

#[test]
fn training_is_deterministic() {
    let data = homophilic_data(1);
    let c = ModelConfig {
        epochs: 20,
        hidden: 16,
        heads: 4,
        ..ModelConfig::new(Arch::PdGat)
    };
    let (_, a) = train(&c, &data).unwrap();
    let (_, b) = train(&c, &data).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let data = homophilic_data(2);
    let c = ModelConfig {
        epochs: 5,
        lr: 0.0,
        dropout: 0.0,
        ..ModelConfig::new(Arch::PdGcn)
    };
    let fresh = Model::new(&c, &data.graph, data.features.cols(), data.num_classes).unwrap();
    let (trained, report) = train(&c, &data).unwrap();
    assert_eq!(fresh.params(), trained.params());
    assert!(report.train_loss.iter().all(|&l| l == report.train_loss[0]));
}

#[test]
fn pd_gcn_fits_homophilic_graph() {
    let data = generate(&SynthConfig::new(60, 2, 0.9, 0)).unwrap();
    let (_, report) = train(&ModelConfig::new(Arch::PdGcn), &data).unwrap();
    let best_train = report.train_metric.iter().cloned().fold(0.0, f64::max);
    assert!(best_train >= 0.95, "best train accuracy {best_train}");
    assert!(report.train_loss.last().unwrap() < &report.train_loss[0]);
}

#[test]
fn best_epoch_is_first_maximum_of_validation() {
    let data = homophilic_data(4);
    let c = ModelConfig {
        epochs: 40,
        ..ModelConfig::new(Arch::Gcn)
    };
    let (_, r) = train(&c, &data).unwrap();
    let max = r.val_metric.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = r.val_metric.iter().position(|&v| v == max).unwrap();
    assert_eq!(r.best_epoch, first);
    assert_eq!(r.test_at_best, r.test_metric[first]);
}

#[test]
fn roc_auc_metric_on_two_classes() {
    let data = generate(&SynthConfig::new(60, 2, 0.8, 5)).unwrap();
    let c = ModelConfig {
        epochs: 30,
        metric: Metric::RocAuc,
        ..ModelConfig::new(Arch::PdGcn)
    };
    let (_, r) = train(&c, &data).unwrap();
    assert!(r.val_metric.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn config_json_round_trip() {
    let c = ModelConfig {
        sep: true,
        rewire: Some(LaplacianParams::new(0.5, 0.25).unwrap()),
        ..ModelConfig::new(Arch::PdGat)
    };
    let text = serde_json::to_string(&c).unwrap();
    let back: ModelConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(c, back);
    let minimal: ModelConfig = serde_json::from_str(r#"{"arch": "pd-gcn"}"#).unwrap();
    assert_eq!(minimal, ModelConfig::new(Arch::PdGcn));
    assert!(serde_json::from_str::<ModelConfig>(r#"{"arch": "gcn", "lr0": 1}"#).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let g = graph();
    let bad_heads = ModelConfig {
        hidden: 10,
        heads: 3,
        ..ModelConfig::new(Arch::Gat)
    };
    assert!(Model::new(&bad_heads, &g, 4, 3).is_err());
    let bad_sep = ModelConfig {
        sep: true,
        ..ModelConfig::new(Arch::Gcn)
    };
    assert!(Model::new(&bad_sep, &g, 4, 3).is_err());
}
