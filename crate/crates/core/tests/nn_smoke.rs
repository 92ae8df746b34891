use dynoid::nn::{clip_grad_norm, Activation, Adam, AdamConfig, Mlp};

#[test]
fn mlp_fits_a_sine() {
    let xs: Vec<Vec<f64>> = (0..32).map(|i| vec![-3.0 + 6.0 * i as f64 / 31.0]).collect();
    let ts: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0].sin()]).collect();
    let mut net = Mlp::new(&[1, 16, 1], Activation::Tanh, 0).unwrap();
    let mut adam = Adam::new(net.n_params(), AdamConfig { lr: 1e-2, ..AdamConfig::default() });
    let (start, _) = net.mse_gradient(&xs, &ts).unwrap();
    for _ in 0..3000 {
        let (_, mut g) = net.mse_gradient(&xs, &ts).unwrap();
        clip_grad_norm(&mut g, 10.0);
        adam.step(net.params_mut(), &g).unwrap();
    }
    let (end, _) = net.mse_gradient(&xs, &ts).unwrap();
    assert!(end < 1e-3 && end < start / 100.0, "mse {start} -> {end}");
}

#[test]
fn snapshot_round_trip_is_exact() {
    let net = Mlp::new(&[3, 5, 2], Activation::Relu, 9).unwrap();
    assert_eq!(Mlp::from_snapshot(&net.to_snapshot()).unwrap(), net);
}
