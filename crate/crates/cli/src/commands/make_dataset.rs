//! `make-dataset`: convert simulation output into surrogate training
//! tensors (full-grid features with interpreted-seismic targets; local
//! windows with monitoring profiles).

use super::gen_prior::load_manifest;
use crate::Workspace;
use ghm_core::config::RunConfig;
use ghm_core::flowsim::{extract_monitor, SimResult};
use ghm_core::geomodel::{extract_local, GeoModel};
use ghm_core::io::{Ghm1File, Section};
use ghm_core::nets::surrogate::{monitor_features, seismic_features};
use ghm_core::nets::{Dataset, Tensor};
use ghm_core::seisproc::interpret;
use ghm_core::{GhmError, Result};
use rayon::prelude::*;
use std::path::Path;

fn write_split(
    path: &Path,
    inputs: &[Tensor<f32>],
    targets: &[Tensor<f32>],
    steps: &[usize],
) -> Result<()> {
    let mut f = Ghm1File::new();
    let mut in_shape = vec![inputs.len()];
    in_shape.extend_from_slice(&inputs[0].shape);
    let mut tg_shape = vec![targets.len()];
    tg_shape.extend_from_slice(&targets[0].shape);
    let flat_in: Vec<f32> = inputs.iter().flat_map(|t| t.data.iter().copied()).collect();
    let flat_tg: Vec<f32> = targets.iter().flat_map(|t| t.data.iter().copied()).collect();
    f.insert("inputs", Section::f32(in_shape, flat_in));
    f.insert("targets", Section::f32(tg_shape, flat_tg));
    f.insert("steps", Section::f64(vec![steps.len()], steps.iter().map(|&s| s as f64).collect()));
    f.write_to(path)
}

/// Load one dataset split plus its report-step labels.
pub fn load_split(path: &Path) -> Result<(Dataset<f32>, Vec<usize>)> {
    let f = Ghm1File::read_from(path)?;
    let read = |name: &str| -> Result<Vec<Tensor<f32>>> {
        let sec = f.get(name)?;
        if sec.shape.len() < 2 {
            return Err(GhmError::Format(format!("{name} section must be stacked")));
        }
        let n = sec.shape[0];
        let per: usize = sec.shape[1..].iter().product();
        let data = sec.as_f32()?;
        (0..n)
            .map(|i| Tensor::from_vec(&sec.shape[1..], data[i * per..(i + 1) * per].to_vec()))
            .collect()
    };
    let inputs = read("inputs")?;
    let targets = read("targets")?;
    let steps = f.get("steps")?.as_f64()?.iter().map(|&v| v as usize).collect();
    Ok((Dataset { inputs, targets }, steps))
}

struct Sample {
    seis_in: Tensor<f32>,
    seis_tg: Tensor<f32>,
    mon_in: Tensor<f32>,
    mon_tg: Tensor<f32>,
}

pub fn cmd_make_dataset(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    let manifest = load_manifest(ws)?;
    if manifest.n_train != cfg.dataset.n_train || manifest.n_test != cfg.dataset.n_test {
        return Err(GhmError::Config(format!(
            "manifest has {}/{} models but config asks for {}/{}",
            manifest.n_train, manifest.n_test, cfg.dataset.n_train, cfg.dataset.n_test
        )));
    }
    ws.ensure("dataset")?;
    let window = cfg.local_window();
    let monitor = cfg.monitor_spec();

    let samples: Vec<Result<Sample>> = (0..manifest.n_models)
        .into_par_iter()
        .map(|i| {
            let model = GeoModel::load(&ws.model_path(i))?;
            let sim = SimResult::load(&ws.sim_path(i))?;

            let seis_in = seismic_features(&model);
            let mut seis_tg_data = Vec::new();
            let mut coarse_shape = (0, 0, 0);
            for &step in &cfg.dataset.seismic_steps {
                let snap = sim.sat.get(step).ok_or_else(|| {
                    GhmError::Config(format!("seismic step {step} missing from simulation"))
                })?;
                let coarse = interpret(&snap.to_f64())?;
                coarse_shape = (coarse.nx, coarse.ny, coarse.nz);
                seis_tg_data.extend(coarse.data.iter().map(|&v| v as f32));
            }
            let seis_tg = Tensor::from_vec(
                &[cfg.dataset.seismic_steps.len(), coarse_shape.0, coarse_shape.1, coarse_shape.2],
                seis_tg_data,
            )?;

            let local = extract_local(&model, &window)?;
            let mon_in = monitor_features(&local);
            let profile = extract_monitor(&sim, &monitor, &cfg.dataset.monitor_steps)?;
            let nz = profile.nz;
            let mut mon_tg_data = Vec::with_capacity(nz * profile.steps.len());
            for t in 0..profile.steps.len() {
                for z in 0..nz {
                    mon_tg_data.push(profile.get(z, t) as f32);
                }
            }
            let mon_tg =
                Tensor::from_vec(&[cfg.dataset.monitor_steps.len(), nz], mon_tg_data)?;
            Ok(Sample { seis_in, seis_tg, mon_in, mon_tg })
        })
        .collect();
    let samples: Vec<Sample> = samples.into_iter().collect::<Result<_>>()?;

    let n_train = cfg.dataset.n_train;
    let split = |range: std::ops::Range<usize>, pick: &dyn Fn(&Sample) -> &Tensor<f32>| {
        range.map(|i| pick(&samples[i]).clone()).collect::<Vec<_>>()
    };
    write_split(
        &ws.dataset_path("seismic", "train"),
        &split(0..n_train, &|s| &s.seis_in),
        &split(0..n_train, &|s| &s.seis_tg),
        &cfg.dataset.seismic_steps,
    )?;
    write_split(
        &ws.dataset_path("seismic", "test"),
        &split(n_train..manifest.n_models, &|s| &s.seis_in),
        &split(n_train..manifest.n_models, &|s| &s.seis_tg),
        &cfg.dataset.seismic_steps,
    )?;
    write_split(
        &ws.dataset_path("monitor", "train"),
        &split(0..n_train, &|s| &s.mon_in),
        &split(0..n_train, &|s| &s.mon_tg),
        &cfg.dataset.monitor_steps,
    )?;
    write_split(
        &ws.dataset_path("monitor", "test"),
        &split(n_train..manifest.n_models, &|s| &s.mon_in),
        &split(n_train..manifest.n_models, &|s| &s.mon_tg),
        &cfg.dataset.monitor_steps,
    )?;
    Ok(())
}
