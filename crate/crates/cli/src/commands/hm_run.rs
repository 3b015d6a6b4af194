//! `hm-run`: one hierarchical chain per assimilation mode, with optional
//! temperature tuning, periodic checkpoints and bit-exact resume.

use crate::Workspace;
use ghm_core::config::{HmMode, RunConfig};
use ghm_core::geomodel::Metaparameters;
use ghm_core::grf::PcaBasis;
use ghm_core::hm::{
    check_termination, run_hierarchical, tune_temperatures, AcceptedSample, Chain, ChainRecord,
    HmConfig, ObservationSet, SamplerState, SurrogateForward,
};
use ghm_core::io::{Ghm1File, Section};
use ghm_core::nets::{MonitorSurrogate, SeismicSurrogate};
use ghm_core::{GhmError, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Serialize, Deserialize)]
pub struct HmRunReport {
    pub mode: String,
    pub iterations: usize,
    pub n_evaluations: usize,
    pub accepts_xi: usize,
    pub accepts_h: usize,
    pub acceptance_rate_xi: f64,
    pub acceptance_rate_h: f64,
    pub terminated_by_histogram: bool,
    pub tuned_t_mon: f64,
    pub tuned_t_seis: f64,
    pub tuning_log: Vec<(f64, f64, f64)>,
    pub n_accepted_samples: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    t_mon: f64,
    t_seis: f64,
    sampler: SamplerState,
    accepted: Vec<AcceptedSample>,
    records_written: usize,
    accepts_xi: usize,
    accepts_h: usize,
    n_evaluations: usize,
    tuning_log: Vec<(f64, f64, f64)>,
    xi_snapshots: Vec<(usize, Vec<f64>)>,
}

fn append_records(csv: &mut String, records: &[ChainRecord], prev_h: &mut [f64; 5]) {
    for r in records {
        let _ = writeln!(
            csv,
            "{},1,{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6e}",
            r.iteration,
            r.accepted_xi as u8,
            prev_h[0],
            prev_h[1],
            prev_h[2],
            prev_h[3],
            prev_h[4],
            r.loglik_after_xi
        );
        let _ = writeln!(
            csv,
            "{},2,{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6e}",
            r.iteration,
            r.accepted_h as u8,
            r.h[0],
            r.h[1],
            r.h[2],
            r.h[3],
            r.h[4],
            r.loglik
        );
        *prev_h = r.h;
    }
}

pub fn cmd_hm_run(cfg: &RunConfig, ws: &Workspace, mode: HmMode, resume: bool) -> Result<HmRunReport> {
    let dir = ws.hm_dir(mode);
    std::fs::create_dir_all(&dir)?;

    let basis = PcaBasis::load(&ws.pca_basis())?;
    let monitor = MonitorSurrogate::load(&ws.surrogate_path("monitor"))?;
    let seismic = if mode == HmMode::Mon {
        None
    } else {
        Some(SeismicSurrogate::load(&ws.surrogate_path("seismic"))?)
    };
    let obs = ObservationSet::load(&ws.observations(mode))?;
    let forward = SurrogateForward::new(&monitor, seismic.as_ref(), &basis, cfg.grid, &obs)?;

    let base_cfg = cfg.hm_config(mode);
    let state_path = ws.hm_state(mode);

    // Either pick up a checkpoint or tune temperatures and start fresh.
    let (mut hm_cfg, mut state, mut accepted, mut csv, mut accepts_xi, mut accepts_h, mut n_eval, tuning_log, mut xi_snapshots);
    let resume_checkpoint = if resume && state_path.exists() {
        let text = std::fs::read_to_string(&state_path)?;
        Some(
            serde_json::from_str::<CheckpointFile>(&text)
                .map_err(|e| GhmError::Format(format!("checkpoint decode: {e}")))?,
        )
    } else {
        None
    };
    match resume_checkpoint {
        Some(ckpt) => {
            hm_cfg = HmConfig { t_mon: ckpt.t_mon, t_seis: ckpt.t_seis, ..base_cfg };
            state = Some(ckpt.sampler);
            accepted = ckpt.accepted;
            accepts_xi = ckpt.accepts_xi;
            accepts_h = ckpt.accepts_h;
            n_eval = ckpt.n_evaluations;
            tuning_log = ckpt.tuning_log;
            xi_snapshots = ckpt.xi_snapshots;
            csv = std::fs::read_to_string(ws.chain_csv(mode)).unwrap_or_default();
        }
        None => {
            hm_cfg = base_cfg;
            if cfg.hm.tune.enabled {
                let (tuned, log) = tune_temperatures(
                    &forward,
                    &obs,
                    &cfg.priors,
                    &base_cfg,
                    cfg.hm.seed ^ 0x54554e45,
                    cfg.hm.tune.pilot_iters,
                    (cfg.hm.tune.band_lo, cfg.hm.tune.band_hi),
                    cfg.hm.tune.max_rounds,
                )?;
                hm_cfg = tuned;
                tuning_log = log;
            } else {
                tuning_log = Vec::new();
            }
            state = None;
            accepted = Vec::new();
            accepts_xi = 0;
            accepts_h = 0;
            n_eval = 0;
            xi_snapshots = Vec::new();
            csv = String::from("iteration,level,accepted,mu_logk,sigma_logk,log10_ar,d,e,loglik\n");
        }
    }

    // Chunked execution: checkpoints and histogram-termination checks at
    // chunk boundaries keep reruns and resumes bit-identical.
    let chunk = cfg.hm.checkpoint_interval.max(1);
    let mut prev_hist = None;
    let mut prev_h = match &state {
        Some(s) => s.h,
        None => [f64::NAN; 5],
    };
    let mut terminated = false;
    let mut done = state.as_ref().map(|s| s.iteration).unwrap_or(0);
    let mut last_chain: Option<Chain> = None;

    // Rebuild the histogram baseline when resuming mid-run.
    if done > 0 && !accepted.is_empty() {
        let (_, hist) = check_termination(&accepted, &None, &cfg.priors, hm_cfg.histogram_bins);
        prev_hist = Some(hist);
    }

    while done < hm_cfg.max_iters && !terminated {
        let target = (done + chunk).min(hm_cfg.max_iters);
        let chunk_cfg = HmConfig {
            max_iters: target,
            histogram_check_interval: usize::MAX,
            ..hm_cfg
        };
        let chain = run_hierarchical(&forward, &obs, &cfg.priors, &chunk_cfg, cfg.hm.seed, state.clone())?;
        if prev_h[0].is_nan() {
            if let Some(first) = chain.records.first() {
                // the level-1 row of the very first iteration reports the
                // initial metaparameters
                prev_h = first.h;
            }
        }
        append_records(&mut csv, &chain.records, &mut prev_h);
        accepted.extend(chain.accepted.iter().cloned());
        xi_snapshots.extend(chain.xi_snapshots.iter().cloned());
        accepts_xi += chain.accepts_xi;
        accepts_h += chain.accepts_h;
        n_eval += chain.n_evaluations;
        state = Some(chain.final_state.clone());
        done = target;

        let (distance, hist) =
            check_termination(&accepted, &prev_hist, &cfg.priors, hm_cfg.histogram_bins);
        prev_hist = Some(hist);
        if let Some(d) = distance {
            if d < hm_cfg.histogram_tol {
                terminated = true;
            }
        }

        let ckpt = CheckpointFile {
            t_mon: hm_cfg.t_mon,
            t_seis: hm_cfg.t_seis,
            sampler: state.clone().unwrap(),
            accepted: accepted.clone(),
            records_written: done,
            accepts_xi,
            accepts_h,
            n_evaluations: n_eval,
            tuning_log: tuning_log.clone(),
            xi_snapshots: xi_snapshots.clone(),
        };
        let text = serde_json::to_string(&ckpt)
            .map_err(|e| GhmError::Format(format!("checkpoint encode: {e}")))?;
        std::fs::write(&state_path, text)?;
        std::fs::write(ws.chain_csv(mode), &csv)?;
        last_chain = Some(chain);
    }
    drop(last_chain);

    // Accepted-sample table for the analysis stage.
    let mut acc_csv = String::from("iteration,mu_logk,sigma_logk,log10_ar,d,e,loglik,field_mean\n");
    for a in &accepted {
        let _ = writeln!(
            acc_csv,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6e},{:.6e}",
            a.iteration, a.h[0], a.h[1], a.h[2], a.h[3], a.h[4], a.loglik, a.field_mean
        );
    }
    std::fs::write(ws.accepted_csv(mode), acc_csv)?;

    // Thinned latent snapshots.
    let mut snaps = Ghm1File::new();
    for (iter, xi) in &xi_snapshots {
        snaps.insert(&format!("xi_{iter:06}"), Section::f64(vec![xi.len()], xi.clone()));
    }
    snaps.write_to(&ws.xi_snapshots(mode))?;

    let iterations = done;
    let report = HmRunReport {
        mode: mode.flag().to_string(),
        iterations,
        n_evaluations: n_eval,
        accepts_xi,
        accepts_h,
        acceptance_rate_xi: accepts_xi as f64 / iterations.max(1) as f64,
        acceptance_rate_h: accepts_h as f64 / iterations.max(1) as f64,
        terminated_by_histogram: terminated,
        tuned_t_mon: hm_cfg.t_mon,
        tuned_t_seis: hm_cfg.t_seis,
        tuning_log,
        n_accepted_samples: accepted.len(),
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| GhmError::Format(format!("report encode: {e}")))?;
    std::fs::write(ws.hm_report(mode), text)?;
    Ok(report)
}

/// Read the accepted-sample table written by `cmd_hm_run`.
pub fn load_accepted(ws: &Workspace, mode: HmMode) -> Result<Vec<AcceptedSample>> {
    let text = std::fs::read_to_string(ws.accepted_csv(mode))
        .map_err(|_| GhmError::Config(format!("missing accepted samples for mode {}", mode.flag())))?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(GhmError::Format("malformed accepted.csv row".into()));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| GhmError::Format("bad number in accepted.csv".into()))
        };
        out.push(AcceptedSample {
            iteration: parts[0]
                .parse()
                .map_err(|_| GhmError::Format("bad iteration in accepted.csv".into()))?,
            h: [parse(parts[1])?, parse(parts[2])?, parse(parts[3])?, parse(parts[4])?, parse(parts[5])?],
            loglik: parse(parts[6])?,
            field_mean: parse(parts[7])?,
        });
    }
    Ok(out)
}

/// Truth metaparameters as recorded in the config (for analysis overlays).
pub fn truth_meta(cfg: &RunConfig) -> Metaparameters {
    cfg.truth.meta
}
