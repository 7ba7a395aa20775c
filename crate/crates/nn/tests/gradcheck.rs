use flexdiff_nn::gradcheck::{model_error, operation_errors, relative_error, small_config, REL_TOL};
use flexdiff_nn::{Arch, ModelConfig, Tensor};

#[test]
fn every_operation_and_layer() {
    let errors = operation_errors().unwrap();
    assert!(errors.len() >= 18);
    for (name, err) in errors {
        assert!(err < REL_TOL, "{name}: relative error {err:e}");
    }
}

#[test]
fn full_models() {
    for arch in [Arch::Mlp, Arch::Gcn, Arch::Gat, Arch::PdGcn, Arch::PdGat] {
        let err = model_error(&small_config(arch), false).unwrap();
        assert!(err < REL_TOL, "{arch:?}: relative error {err:e}");
    }
}

#[test]
fn model_variants() {
    let cases = [
        (
            "pd-gat sep",
            ModelConfig {
                sep: true,
                ..small_config(Arch::PdGat)
            },
            false,
        ),
        (
            "pd-gcn residual",
            ModelConfig {
                layers: 3,
                residual: true,
                ..small_config(Arch::PdGcn)
            },
            false,
        ),
        (
            "pd-gat fixed dropout masks",
            ModelConfig {
                dropout: 0.3,
                ..small_config(Arch::PdGat)
            },
            true,
        ),
    ];
    for (name, cfg, replay) in cases {
        let err = model_error(&cfg, replay).unwrap();
        assert!(err < REL_TOL, "{name}: relative error {err:e}");
    }
}

#[test]
fn checker_flags_a_missing_gradient_path() {
    let x = Tensor::from_vec(1, 2, vec![0.3, -0.7]);
    // constant output: zero on both sides
    assert_eq!(relative_error(&[x.clone()], &|t, _| t.leaf(Tensor::from_vec(1, 1, vec![1.0]))), 0.0);
    // the copy is a fresh leaf, so the tape misses half of d(sum x)^2 / dx
    let err = relative_error(&[x], &|t, v| {
        let copy = t.leaf(t.value(v[0]).clone());
        let s = t.sum(v[0]);
        let s2 = t.sum(copy);
        let prod = t.matmul(s, s2);
        t.sum(prod)
    });
    assert!(err > 0.1, "{err}");
}
