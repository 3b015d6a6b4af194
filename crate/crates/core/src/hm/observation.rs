//! Twin-experiment observation synthesis and the combined error model.
//!
//! Monitoring noise is added directly to the simulated profiles; seismic
//! noise is added to the fine-scale saturation before the filtering
//! procedure. Per-element total standard deviations combine measurement
//! and surrogate error: `sigma_total = sqrt(sigma_surr^2 + sigma_d^2)`.

use crate::flowsim::MonitorProfile;
use crate::grf::derive_rng;
use crate::grid::Grid3;
use crate::seisproc::{interpret, threshold_grid, DEFAULT_PLUME_TAU};
use crate::{GhmError, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeisKind {
    Saturation,
    PlumeLocation,
    None,
}

/// Per-step surrogate error standard deviations estimated on the test set,
/// plus the measurement-noise fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    /// Measurement + model-resolution noise fraction on monitoring data
    /// (of the max observed value).
    pub frac_mon: f64,
    /// Same for interpreted seismic data.
    pub frac_seis: f64,
    /// (report step, sigma_surr) pairs for the monitoring surrogate.
    pub sigma_surr_mon: Vec<(usize, f64)>,
    /// Same for interpreted-saturation seismic predictions.
    pub sigma_surr_seis: Vec<(usize, f64)>,
    /// Same for thresholded plume-location predictions.
    pub sigma_surr_plume: Vec<(usize, f64)>,
}

impl ErrorModel {
    pub fn noiseless() -> Self {
        ErrorModel {
            frac_mon: 0.0,
            frac_seis: 0.0,
            sigma_surr_mon: Vec::new(),
            sigma_surr_seis: Vec::new(),
            sigma_surr_plume: Vec::new(),
        }
    }

    fn surr_sigma(table: &[(usize, f64)], step: usize) -> f64 {
        table.iter().find(|(s, _)| *s == step).map(|(_, v)| *v).unwrap_or(0.0)
    }
}

/// Total standard deviation from surrogate and measurement components.
pub fn sigma_total(sigma_surr: f64, sigma_d: f64) -> f64 {
    (sigma_surr * sigma_surr + sigma_d * sigma_d).sqrt()
}

/// Noiseless truth-case products from the reference simulation.
#[derive(Debug, Clone)]
pub struct TruthData {
    /// Monitoring profile at the observed report steps.
    pub mon_profile: MonitorProfile,
    /// Fine-scale saturation at the observed seismic report steps.
    pub fine_sat: Vec<Grid3<f64>>,
    pub seis_steps: Vec<usize>,
}

/// Observed data vectors with per-element total standard deviations.
///
/// Ordering: monitoring is step-major (for each observed step, all layers);
/// seismic is step-major over row-major coarse grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub seis_kind: SeisKind,
    pub mon_steps: Vec<usize>,
    pub d_mon: Vec<f64>,
    pub sigma_mon: Vec<f64>,
    pub seis_steps: Vec<usize>,
    pub d_seis: Vec<f64>,
    pub sigma_seis: Vec<f64>,
    pub coarse_dims: (usize, usize, usize),
    /// Measurement-noise sigmas actually used (diagnostics).
    pub sigma_d_mon: f64,
    pub sigma_d_seis: f64,
}

impl ObservationSet {
    pub fn nz(&self) -> usize {
        if self.mon_steps.is_empty() {
            0
        } else {
            self.d_mon.len() / self.mon_steps.len()
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        use crate::io::{Ghm1File, Section};
        let mut f = Ghm1File::new();
        let kind = match self.seis_kind {
            SeisKind::Saturation => 0u8,
            SeisKind::PlumeLocation => 1,
            SeisKind::None => 2,
        };
        f.insert("seis_kind", Section::u8(vec![1], vec![kind]));
        let steps_f64 = |v: &[usize]| v.iter().map(|&s| s as f64).collect::<Vec<_>>();
        f.insert("mon_steps", Section::f64(vec![self.mon_steps.len()], steps_f64(&self.mon_steps)));
        f.insert("d_mon", Section::f64(vec![self.d_mon.len()], self.d_mon.clone()));
        f.insert("sigma_mon", Section::f64(vec![self.sigma_mon.len()], self.sigma_mon.clone()));
        f.insert("seis_steps", Section::f64(vec![self.seis_steps.len()], steps_f64(&self.seis_steps)));
        f.insert("d_seis", Section::f64(vec![self.d_seis.len()], self.d_seis.clone()));
        f.insert("sigma_seis", Section::f64(vec![self.sigma_seis.len()], self.sigma_seis.clone()));
        f.insert(
            "coarse_dims",
            Section::f64(
                vec![3],
                vec![self.coarse_dims.0 as f64, self.coarse_dims.1 as f64, self.coarse_dims.2 as f64],
            ),
        );
        f.insert("sigma_d", Section::f64(vec![2], vec![self.sigma_d_mon, self.sigma_d_seis]));
        f.write_to(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        use crate::io::Ghm1File;
        let f = Ghm1File::read_from(path)?;
        let kind = match f.get("seis_kind")?.as_u8()?[0] {
            0 => SeisKind::Saturation,
            1 => SeisKind::PlumeLocation,
            2 => SeisKind::None,
            other => return Err(GhmError::Format(format!("unknown seis kind {other}"))),
        };
        let steps = |name: &str| -> Result<Vec<usize>> {
            Ok(f.get(name)?.as_f64()?.iter().map(|&v| v as usize).collect())
        };
        let cd = f.get("coarse_dims")?.as_f64()?;
        let sd = f.get("sigma_d")?.as_f64()?;
        let obs = ObservationSet {
            seis_kind: kind,
            mon_steps: steps("mon_steps")?,
            d_mon: f.get("d_mon")?.as_f64()?.to_vec(),
            sigma_mon: f.get("sigma_mon")?.as_f64()?.to_vec(),
            seis_steps: steps("seis_steps")?,
            d_seis: f.get("d_seis")?.as_f64()?.to_vec(),
            sigma_seis: f.get("sigma_seis")?.as_f64()?.to_vec(),
            coarse_dims: (cd[0] as usize, cd[1] as usize, cd[2] as usize),
            sigma_d_mon: sd[0],
            sigma_d_seis: sd[1],
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_mon.len() != self.sigma_mon.len() || self.d_seis.len() != self.sigma_seis.len() {
            return Err(GhmError::Shape("observation/sigma length mismatch".into()));
        }
        if self.sigma_mon.iter().chain(&self.sigma_seis).any(|&s| !(s > 0.0)) {
            return Err(GhmError::Config("all sigma_total entries must be > 0".into()));
        }
        Ok(())
    }
}

/// Build the observation set for one assimilation mode.
pub fn synthesize_observations(
    truth: &TruthData,
    kind: SeisKind,
    errors: &ErrorModel,
    seed: u64,
) -> Result<ObservationSet> {
    let mut rng = derive_rng(seed, 0, 0x4f425331);

    // Monitoring block: noise sigma is a fraction of the maximum collected value.
    let profile = &truth.mon_profile;
    let n_steps = profile.steps.len();
    let nz = profile.nz;
    let max_mon = profile.data.iter().cloned().fold(0.0f64, f64::max);
    let sigma_d_mon = errors.frac_mon * max_mon;
    let mut d_mon = Vec::with_capacity(nz * n_steps);
    let mut sigma_mon = Vec::with_capacity(nz * n_steps);
    for (s, &step) in profile.steps.iter().enumerate() {
        let sig = sigma_total(ErrorModel::surr_sigma(&errors.sigma_surr_mon, step), sigma_d_mon);
        for k in 0..nz {
            let noise: f64 = rng.sample(StandardNormal);
            d_mon.push(profile.get(k, s) + sigma_d_mon * noise);
            sigma_mon.push(sig);
        }
    }

    // Seismic block: noise enters the fine-scale field before filtering.
    let mut d_seis = Vec::new();
    let mut sigma_seis = Vec::new();
    let mut coarse_dims = (0, 0, 0);
    let mut sigma_d_seis = 0.0;
    if kind != SeisKind::None {
        if truth.fine_sat.len() != truth.seis_steps.len() {
            return Err(GhmError::Shape("fine saturation / step count mismatch".into()));
        }
        let noiseless: Vec<Grid3<f64>> =
            truth.fine_sat.iter().map(interpret).collect::<Result<_>>()?;
        let max_obs = match kind {
            SeisKind::Saturation => noiseless
                .iter()
                .flat_map(|g| g.data.iter())
                .cloned()
                .fold(0.0f64, f64::max),
            SeisKind::PlumeLocation => {
                let any = noiseless
                    .iter()
                    .flat_map(|g| g.data.iter())
                    .any(|&v| v > DEFAULT_PLUME_TAU);
                if any {
                    1.0
                } else {
                    0.0
                }
            }
            SeisKind::None => unreachable!(),
        };
        sigma_d_seis = errors.frac_seis * max_obs;
        for (fine, &step) in truth.fine_sat.iter().zip(&truth.seis_steps) {
            let noisy = Grid3 {
                nx: fine.nx,
                ny: fine.ny,
                nz: fine.nz,
                data: fine
                    .data
                    .iter()
                    .map(|&v| v + sigma_d_seis * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            };
            let coarse = interpret(&noisy)?;
            coarse_dims = (coarse.nx, coarse.ny, coarse.nz);
            let table = match kind {
                SeisKind::Saturation => &errors.sigma_surr_seis,
                SeisKind::PlumeLocation => &errors.sigma_surr_plume,
                SeisKind::None => unreachable!(),
            };
            let sig = sigma_total(ErrorModel::surr_sigma(table, step), sigma_d_seis);
            match kind {
                SeisKind::Saturation => d_seis.extend(coarse.data.iter()),
                SeisKind::PlumeLocation => {
                    d_seis.extend(threshold_grid(&coarse, DEFAULT_PLUME_TAU).data.iter().map(|&b| b as f64))
                }
                SeisKind::None => unreachable!(),
            }
            sigma_seis.extend(std::iter::repeat(sig).take(coarse.data.len()));
        }
    }

    Ok(ObservationSet {
        seis_kind: kind,
        mon_steps: profile.steps.clone(),
        d_mon,
        sigma_mon,
        seis_steps: if kind == SeisKind::None { Vec::new() } else { truth.seis_steps.clone() },
        d_seis,
        sigma_seis,
        coarse_dims,
        sigma_d_mon,
        sigma_d_seis,
    })
}
