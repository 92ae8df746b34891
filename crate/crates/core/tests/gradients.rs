mod common;

use common::{autoencoder_gradient_error, central_diff, regressor_gradient_error, rel_error};
use dynoid::nn::{Activation, Mlp};
use dynoid::regressor::StateMapSpec;

#[test]
fn mlp_mse_gradient_matches_finite_differences() {
    for act in [Activation::Tanh, Activation::Identity] {
        let net = Mlp::new(&[2, 4, 2], act, 3).unwrap();
        let xs = vec![vec![0.3, -0.7], vec![1.1, 0.2], vec![-0.4, 0.9]];
        let ts = vec![vec![0.5, 0.0], vec![-1.0, 0.25], vec![0.1, 0.1]];
        let (_, analytic) = net.mse_gradient(&xs, &ts).unwrap();
        let numeric = central_diff(net.params(), |p| {
            let mut n = net.clone();
            n.params_mut().copy_from_slice(p);
            n.mse_gradient(&xs, &ts).unwrap().0
        });
        assert!(rel_error(&analytic, &numeric) < 1e-6, "{act:?}");
    }
}

#[test]
fn regressor_gradient_through_20_step_rollout() {
    for (spec, hidden) in [
        (StateMapSpec::new(2, 1, 1).unwrap(), vec![8]),
        (StateMapSpec::new(3, 2, 1).unwrap(), vec![6]),
        (StateMapSpec::new(1, 1, 2).unwrap(), vec![5, 5]),
    ] {
        let (n, err) = regressor_gradient_error(spec, &hidden, 20, 11);
        assert!(n <= 200, "{n} params");
        assert!(err < 1e-4, "{spec:?}: relative error {err:e}");
    }
}

#[test]
fn autoencoder_gradient() {
    let spec = StateMapSpec::new(3, 1, 1).unwrap();
    let (n, err) = autoencoder_gradient_error(spec, 2, &[5], 4);
    assert!(n <= 200, "{n} params");
    assert!(err < 1e-4, "relative error {err:e}");
}
