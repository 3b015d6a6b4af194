use ghm_core::config::RunConfig;
use ghm_core::geomodel::{assemble, sample_metaparams};
use ghm_core::grf::{build_pca, derive_rng, generate_realizations, LatentVector};
use ghm_core::nets::surrogate::{seismic_features, InputNorm};
use ghm_core::nets::tape::forward_value;
use ghm_core::nets::{build_seismic_unet, init_params, UnetScale};
use rand::Rng;
use std::time::Instant;

fn main() {
    let cfg = RunConfig::desk();
    let fields = generate_realizations(&cfg.grid, &cfg.variogram, 60, 1).unwrap();
    let basis = build_pca(&fields, 40).unwrap();
    let mut rng = derive_rng(2, 0, 0);
    let meta = sample_metaparams(&cfg.priors, &mut rng);
    let xi = LatentVector::new((0..40).map(|_| rng.sample(rand_distr::StandardNormal)).collect()).unwrap();

    let t0 = Instant::now();
    for _ in 0..20 { let _ = assemble(&meta, &xi, &basis, &cfg.grid).unwrap(); }
    println!("assemble: {:.2} ms", t0.elapsed().as_secs_f64() * 50.0);

    let model = assemble(&meta, &xi, &basis, &cfg.grid).unwrap();
    let t0 = Instant::now();
    for _ in 0..20 { let _ = seismic_features(&model); }
    println!("features: {:.2} ms", t0.elapsed().as_secs_f64() * 50.0);

    let features = seismic_features(&model);
    let net = build_seismic_unet((32, 32, 15), 3, UnetScale::Desk).unwrap();
    let params = init_params::<f32>(&net, 3);
    let norm = InputNorm::fit(std::slice::from_ref(&features)).unwrap();
    let t0 = Instant::now();
    for _ in 0..20 { let _ = norm.apply(&features); }
    println!("norm: {:.2} ms", t0.elapsed().as_secs_f64() * 50.0);

    let x = norm.apply(&features);
    let t0 = Instant::now();
    for _ in 0..20 { let _ = forward_value(&net, &params, x.clone()).unwrap(); }
    println!("forward: {:.2} ms", t0.elapsed().as_secs_f64() * 50.0);
}
