//! Central finite-difference verification of every parameter gradient in
//! both desk networks (f64, h = 1e-5, relative error <= 1e-4).

use ghm_core::grf::derive_rng;
use ghm_core::nets::{
    backward, build_monitor_unet, build_seismic_unet, forward, init_params, loss_grad,
    loss_value, LossKind, Network, Params, Tensor, UnetScale,
};
use rand::Rng;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = derive_rng(seed, 0, 0x47434b);
    Tensor::from_vec(
        shape,
        (0..shape.iter().product::<usize>()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn check_network(net: &Network, seed: u64) -> (usize, f64) {
    let params = init_params::<f64>(net, seed);
    let input = random_tensor(&net.input_shape, seed + 1);
    let out_shape = net.output_shape().unwrap();
    let target = random_tensor(&out_shape, seed + 2);

    let tape = forward(net, &params, input.clone()).unwrap();
    let (_, seed_grad) = loss_grad(LossKind::Mse, tape.output(), &target).unwrap();
    let grads = backward(&tape, &params, seed_grad).unwrap();

    let objective = |p: &Params<f64>| -> f64 {
        let tape = forward(net, p, input.clone()).unwrap();
        loss_value(LossKind::Mse, tape.output(), &target).unwrap()
    };

    let h = 1e-5;
    let mut n_checked = 0;
    let mut worst = 0.0f64;
    let mut rng = derive_rng(seed + 3, 0, 0x47434b);
    for (ti, tensor) in params.tensors.iter().enumerate() {
        let coords: Vec<usize> = if tensor.numel() <= 5 {
            (0..tensor.numel()).collect()
        } else {
            let mut c = vec![0, tensor.numel() / 2, tensor.numel() - 1];
            c.push(rng.gen_range(0..tensor.numel()));
            c.push(rng.gen_range(0..tensor.numel()));
            c
        };
        for &ci in &coords {
            let mut plus = params.clone();
            plus.tensors[ti].data[ci] += h;
            let mut minus = params.clone();
            minus.tensors[ti].data[ci] -= h;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let analytic = grads[ti].data[ci];
            let denom = numeric.abs().max(analytic.abs());
            if denom < 1e-10 {
                continue; // both vanish; nothing to compare at this scale
            }
            let rel = (numeric - analytic).abs() / denom;
            worst = worst.max(rel);
            assert!(
                rel <= 1e-4,
                "{} coord {ci}: analytic {analytic:.6e} vs numeric {numeric:.6e} (rel {rel:.2e})",
                params.names[ti]
            );
            n_checked += 1;
        }
    }
    (n_checked, worst)
}

#[test]
fn seismic_desk_network_gradients_match_finite_differences() {
    // small grid with the same layer kinds as the full desk net
    let net = build_seismic_unet((14, 14, 10), 2, UnetScale::Desk).unwrap();
    let (n, worst) = check_network(&net, 100);
    assert!(n > 80, "only {n} coordinates checked");
    println!("seismic gradcheck: {n} coordinates, worst relative error {worst:.2e}");
}

#[test]
fn monitor_desk_network_gradients_match_finite_differences() {
    let net = build_monitor_unet((9, 9, 15), 3, UnetScale::Desk).unwrap();
    let (n, worst) = check_network(&net, 200);
    assert!(n > 100, "only {n} coordinates checked");
    println!("monitor gradcheck: {n} coordinates, worst relative error {worst:.2e}");
}
