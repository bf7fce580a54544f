mod common;

use patdiag_core::numerics::gradcheck::check_gradients;
use patdiag_core::numerics::{Graph, ParamGrads, ParamSet, SeededRng, Tensor};

const TOL: f64 = 1e-4;

/// Three-layer tanh/sigmoid/softmax composition with 20 scalar parameters.
fn composite_loss(params: &ParamSet, x: &Tensor) -> (f64, ParamGrads) {
    let mut g = Graph::new(params);
    let ids: Vec<_> = params.ids().collect();
    let xv = g.input(x.clone());
    let w1 = g.param(ids[0]);
    let b1 = g.param(ids[1]);
    let w2 = g.param(ids[2]);
    let w3 = g.param(ids[3]);
    let h = g.matvec(w1, xv);
    let h = g.add(h, b1);
    let h = g.tanh(h);
    let h = g.matvec(w2, h);
    let h = g.sigmoid(h);
    let s = g.softmax(h);
    let l = g.dot(s, w3);
    let l = g.exp(l);
    let l = g.log(l);
    let y = g.mul(l, l);
    let total = g.value(y).item();
    let grads = g.backward(y).expect("scalar output");
    let mut out = ParamGrads::zeros_like(params);
    out.accumulate(&grads, 1.0);
    (total, out)
}

#[test]
fn random_composition_matches_finite_differences() {
    for draw in 0..5u64 {
        let mut rng = SeededRng::new(draw);
        let mut params = ParamSet::new();
        params.add_uniform("w1", &[3, 3], 1.0, &mut rng);
        params.add_uniform("b1", &[3], 1.0, &mut rng);
        params.add_uniform("w2", &[2, 3], 1.0, &mut rng);
        params.add_uniform("w3", &[2], 1.0, &mut rng);
        let x = Tensor::vector(vec![rng.normal(), rng.normal(), rng.normal()]).unwrap();
        let (_, grads) = composite_loss(&params, &x);
        let report = check_gradients(&params, &grads, 1e-5, usize::MAX, &mut rng, |p| {
            composite_loss(p, &x).0
        });
        assert_eq!(report.checked, 20);
        assert!(report.max_rel_error < TOL, "draw {draw}: {report:?}");
    }
}

#[test]
fn nre_loss_gradients_match_finite_differences() {
    for draw in 0..5 {
        let report = common::nre_gradient_check(draw);
        assert!(report.checked > 0);
        assert!(report.max_rel_error < TOL, "draw {draw}: {report:?}");
    }
}

#[test]
fn reinforce_surrogate_gradients_match_finite_differences() {
    for draw in 0..5 {
        let report = common::agent_gradient_check(draw);
        assert!(report.checked > 0);
        assert!(report.max_rel_error < TOL, "draw {draw}: {report:?}");
    }
}
