//! `truth-case`: simulate the synthetic truth model and write noisy
//! observation sets for the three assimilation modes.

use super::train::SurrogateErrors;
use crate::Workspace;
use ghm_core::config::{HmMode, RunConfig};
use ghm_core::flowsim::{extract_monitor, simulate};
use ghm_core::geomodel::assemble_from_field;
use ghm_core::grf::generate_realizations;
use ghm_core::hm::{synthesize_observations, ErrorModel, TruthData};
use ghm_core::{GhmError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
pub struct TruthSummary {
    pub sigma_d_mon: f64,
    pub sigma_d_seis_sat: f64,
    pub sigma_d_seis_plume: f64,
    pub max_monitor_value: f64,
    pub truth_meta: [f64; 5],
}

pub fn cmd_truth_case(cfg: &RunConfig, ws: &Workspace) -> Result<TruthSummary> {
    ws.ensure("truth")?;
    let errors = SurrogateErrors::load(ws)?;

    // The truth field is a fresh realization, not a PCA reconstruction, so
    // the twin experiment carries genuine parameterization error.
    let field = generate_realizations(&cfg.grid, &cfg.variogram, 1, cfg.truth.field_seed)?;
    let model = assemble_from_field(&cfg.truth.meta, field.col(0), &cfg.grid);
    model.save(&ws.truth_model())?;

    let wells = vec![cfg.injector_spec(), cfg.monitor_spec()];
    let sim = simulate(&model, &wells, &cfg.fluid, &cfg.relperm, &cfg.sim)?;
    sim.save(&ws.truth_sim())?;

    let mon_profile = extract_monitor(&sim, &cfg.monitor_spec(), &cfg.hm.obs_monitor_steps)?;
    let fine_sat = cfg
        .hm
        .obs_seismic_steps
        .iter()
        .map(|&s| {
            sim.sat
                .get(s)
                .map(|g| g.to_f64())
                .ok_or_else(|| GhmError::Config(format!("seismic step {s} out of range")))
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = TruthData { mon_profile, fine_sat, seis_steps: cfg.hm.obs_seismic_steps.clone() };

    let error_model = ErrorModel {
        frac_mon: cfg.hm.frac_mon,
        frac_seis: cfg.hm.frac_seis,
        sigma_surr_mon: errors.mon.iter().map(|&(s, _, sd)| (s, sd)).collect(),
        sigma_surr_seis: errors.seis.iter().map(|&(s, _, sd)| (s, sd)).collect(),
        sigma_surr_plume: errors.plume.iter().map(|&(s, _, sd)| (s, sd)).collect(),
    };

    let mut summary = TruthSummary {
        sigma_d_mon: 0.0,
        sigma_d_seis_sat: 0.0,
        sigma_d_seis_plume: 0.0,
        max_monitor_value: truth.mon_profile.data.iter().cloned().fold(0.0, f64::max),
        truth_meta: cfg.truth.meta.to_array(),
    };
    for mode in HmMode::ALL {
        let obs =
            synthesize_observations(&truth, mode.seis_kind(), &error_model, cfg.truth.noise_seed)?;
        obs.save(&ws.observations(mode))?;
        match mode {
            HmMode::Mon => summary.sigma_d_mon = obs.sigma_d_mon,
            HmMode::MonSat => summary.sigma_d_seis_sat = obs.sigma_d_seis,
            HmMode::MonPlume => summary.sigma_d_seis_plume = obs.sigma_d_seis,
        }
    }
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| GhmError::Format(format!("summary encode: {e}")))?;
    std::fs::write(ws.truth_summary(), text)?;
    Ok(summary)
}
