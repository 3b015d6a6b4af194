//! Desk-scale simulator behavior: timing and plume-reach sanity checks.

use ghm_core::flowsim::{extract_monitor, simulate, FluidConfig, RelPermConfig, SimConfig, WellKind, WellSpec};
use ghm_core::geomodel::{assemble, sample_metaparams, PriorRanges};
use ghm_core::grf::{build_pca, derive_rng, generate_realizations, LatentVector, VariogramSpec};
use ghm_core::grid::GridDims;
use rand::Rng;

fn desk_dims() -> GridDims {
    GridDims::new(32, 32, 15, 7.0, 7.0, 2.0).unwrap()
}

#[test]
#[ignore = "manual calibration probe"]
fn probe_desk_simulation() {
    let dims = desk_dims();
    let vario = VariogramSpec::new(70.0, 70.0, 3.0).unwrap();
    let fields = generate_realizations(&dims, &vario, 60, 11).unwrap();
    let basis = build_pca(&fields, 50).unwrap();
    let priors = PriorRanges::default();
    let fluid = FluidConfig::default();
    let relperm = RelPermConfig::default();
    let cfg = SimConfig::default();
    let wells = vec![
        WellSpec { i: 16, j: 16, rate_mt_per_year: 0.005, kind: WellKind::Injector },
        WellSpec { i: 20, j: 20, rate_mt_per_year: 0.0, kind: WellKind::Monitor },
    ];

    for trial in 0..6 {
        let mut rng = derive_rng(1000 + trial, 0, 50);
        let meta = sample_metaparams(&priors, &mut rng);
        let xi = LatentVector::new(
            (0..50).map(|_| rng.sample(rand_distr::StandardNormal)).collect(),
        )
        .unwrap();
        let model = assemble(&meta, &xi, &basis, &dims).unwrap();
        let t0 = std::time::Instant::now();
        let res = simulate(&model, &wells, &fluid, &relperm, &cfg).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let last = res.sat.last().unwrap();
        let plume_cells = last.data.iter().filter(|&&v| v > 0.05).count();
        let mon = extract_monitor(&res, &wells[1], &[10, 20, 30]).unwrap();
        let mon_max: f64 = mon.data.iter().cloned().fold(0.0, f64::max);
        let mut worst_mb = 0.0f64;
        for s in 1..=res.n_report_steps() {
            worst_mb = worst_mb.max(res.mass_balance_error(s));
        }
        println!(
            "trial {trial}: meta=({:.2},{:.2},{:.2}) time={dt:.2}s substeps={} plume_cells={plume_cells} ({:.1}%) monitor_max={mon_max:.3} max_sg={:.3} worst_mb={worst_mb:.2e}",
            meta.mu_logk, meta.sigma_logk, meta.log10_ar,
            res.substeps,
            100.0 * plume_cells as f64 / last.data.len() as f64,
            res.max_sg_seen,
        );
    }
}
