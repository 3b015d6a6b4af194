//! `analyze`: posterior histograms, uncertainty-reduction statistics and
//! representative plumes per completed assimilation mode.

use super::hm_run::load_accepted;
use crate::Workspace;
use ghm_core::analysis::svg::histogram_panels_svg;
use ghm_core::analysis::{histogram_report, representative_fields, HistogramReport};
use ghm_core::config::{HmMode, RunConfig};
use ghm_core::geomodel::assemble;
use ghm_core::grf::{derive_rng, LatentVector, PcaBasis};
use ghm_core::io::{Ghm1File, Section};
use ghm_core::nets::SeismicSurrogate;
use ghm_core::{GhmError, Result};
use rand::Rng;
use std::fmt::Write as _;

fn mode_color(mode: HmMode) -> &'static str {
    match mode {
        HmMode::Mon => "#1f77b4",
        HmMode::MonPlume => "#2ca02c",
        HmMode::MonSat => "#ff7f0e",
    }
}

fn write_histograms(ws: &Workspace, mode: HmMode, report: &HistogramReport) -> Result<()> {
    let dir = ws.analysis_dir(mode);
    std::fs::create_dir_all(&dir)?;
    let mut csv = String::from("param,bin_lo,bin_hi,frequency\n");
    let mut stats = String::from("param,p5,p50,p95,posterior_std,std_reduction,truth\n");
    for p in &report.params {
        for (b, &f) in p.frequencies.iter().enumerate() {
            let _ = writeln!(csv, "{},{:.6},{:.6},{:.6}", p.name, p.edges[b], p.edges[b + 1], f);
        }
        let _ = writeln!(
            stats,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            p.name,
            p.p5,
            p.p50,
            p.p95,
            p.posterior_std,
            p.std_reduction,
            p.truth.map(|t| format!("{t:.6}")).unwrap_or_default()
        );
    }
    std::fs::write(dir.join("histograms.csv"), csv)?;
    std::fs::write(dir.join("histogram_stats.csv"), stats)?;
    let title = format!("posterior ({}) over the last {} accepted samples", mode.flag(), report.window_used);
    std::fs::write(
        dir.join("posterior.svg"),
        histogram_panels_svg(&report.params, mode_color(mode), &title),
    )?;
    Ok(())
}

/// Predict coarse plumes for a set of (h, xi) states and pick k medoids.
fn representative_plumes(
    cfg: &RunConfig,
    _ws: &Workspace,
    mode_dir: &std::path::Path,
    label: &str,
    states: &[([f64; 5], Vec<f64>)],
    basis: &PcaBasis,
    seismic: &SeismicSurrogate,
) -> Result<()> {
    if states.len() < cfg.analysis.k_clusters {
        return Err(GhmError::Config(format!(
            "only {} states for {}-cluster representatives",
            states.len(),
            cfg.analysis.k_clusters
        )));
    }
    let last_channel = seismic.channel_steps.len() - 1;
    let mut fields = Vec::with_capacity(states.len());
    for (h, xi) in states {
        let model = assemble(
            &ghm_core::geomodel::Metaparameters::from_array(*h),
            &LatentVector { xi: xi.clone() },
            basis,
            &cfg.grid,
        )?;
        let grids = seismic.predict(&model)?;
        fields.push(grids[last_channel].data.clone());
    }
    let rep = representative_fields(&fields, cfg.analysis.k_clusters, cfg.analysis.seed)?;

    let mut csv = String::from("field,cluster,is_medoid\n");
    for (i, &c) in rep.assignments.iter().enumerate() {
        let _ = writeln!(csv, "{i},{c},{}", rep.medoid_indices.contains(&i) as u8);
    }
    std::fs::write(mode_dir.join(format!("{label}_clusters.csv")), csv)?;

    let mut f = Ghm1File::new();
    let (cx, cy, cz) = {
        let g = &seismic.predict_features(&ghm_core::nets::surrogate::seismic_features(
            &assemble(
                &ghm_core::geomodel::Metaparameters::from_array(states[0].0),
                &LatentVector { xi: states[0].1.clone() },
                basis,
                &cfg.grid,
            )?,
        ))?[last_channel];
        (g.nx, g.ny, g.nz)
    };
    for (c, &m) in rep.medoid_indices.iter().enumerate() {
        if m == usize::MAX {
            continue;
        }
        f.insert(
            &format!("medoid{c}"),
            Section::f64(vec![cx, cy, cz], fields[m].clone()),
        );
    }
    f.write_to(&mode_dir.join(format!("{label}_medoids.ghm1")))?;
    Ok(())
}

pub struct AnalyzeReport {
    pub mode: HmMode,
    pub histogram: HistogramReport,
}

pub fn cmd_analyze(cfg: &RunConfig, ws: &Workspace, modes: &[HmMode]) -> Result<Vec<AnalyzeReport>> {
    let basis = PcaBasis::load(&ws.pca_basis())?;
    let seismic = SeismicSurrogate::load(&ws.surrogate_path("seismic"))?;
    let mut out = Vec::new();

    // Prior representatives once, from fresh prior draws.
    let prior_dir = ws.root.join("analysis/prior");
    std::fs::create_dir_all(&prior_dir)?;
    let mut rng = derive_rng(cfg.analysis.seed, 0, 0x5052494f);
    let n_prior = cfg.analysis.n_representative.min(64).max(cfg.analysis.k_clusters);
    let prior_states: Vec<([f64; 5], Vec<f64>)> = (0..n_prior)
        .map(|_| {
            let h = ghm_core::geomodel::sample_metaparams(&cfg.priors, &mut rng);
            let xi: Vec<f64> =
                (0..basis.n_d).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
            (h.to_array(), xi)
        })
        .collect();
    representative_plumes(cfg, ws, &prior_dir, "prior", &prior_states, &basis, &seismic)?;

    for &mode in modes {
        let accepted = load_accepted(ws, mode)?;
        let report = histogram_report(
            &accepted,
            Some(&cfg.truth.meta),
            &cfg.priors,
            cfg.analysis.bins,
            cfg.analysis.window,
        )?;
        write_histograms(ws, mode, &report)?;

        // Posterior representatives from thinned latent snapshots paired
        // with the chain state at those iterations.
        let snaps = Ghm1File::read_from(&ws.xi_snapshots(mode))?;
        let mut states: Vec<([f64; 5], Vec<f64>)> = Vec::new();
        let mut names: Vec<String> = snaps.names().map(|s| s.to_string()).collect();
        names.sort();
        let chain_h = load_chain_h(ws, mode)?;
        for name in names.iter().rev().take(cfg.analysis.n_representative) {
            let iter: usize = name
                .trim_start_matches("xi_")
                .parse()
                .map_err(|_| GhmError::Format("bad snapshot name".into()))?;
            if let Some(h) = chain_h.get(&iter) {
                states.push((*h, snaps.get(name)?.as_f64()?.to_vec()));
            }
        }
        if states.len() >= cfg.analysis.k_clusters {
            let dir = ws.analysis_dir(mode);
            representative_plumes(cfg, ws, &dir, "posterior", &states, &basis, &seismic)?;
        }
        out.push(AnalyzeReport { mode, histogram: report });
    }
    Ok(out)
}

/// Iteration -> metaparameter state from the chain table (level-2 rows).
fn load_chain_h(ws: &Workspace, mode: HmMode) -> Result<std::collections::HashMap<usize, [f64; 5]>> {
    let text = std::fs::read_to_string(ws.chain_csv(mode))
        .map_err(|_| GhmError::Config(format!("missing chain for mode {}", mode.flag())))?;
    let mut map = std::collections::HashMap::new();
    for line in text.lines().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 || parts[1] != "2" {
            continue;
        }
        let iter: usize = parts[0].parse().map_err(|_| GhmError::Format("bad chain row".into()))?;
        let mut h = [0.0; 5];
        for (k, v) in h.iter_mut().enumerate() {
            *v = parts[3 + k]
                .parse()
                .map_err(|_| GhmError::Format("bad chain value".into()))?;
        }
        map.insert(iter, h);
    }
    Ok(map)
}
