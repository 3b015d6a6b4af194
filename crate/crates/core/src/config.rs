//! Run configuration: one JSON document drives the whole pipeline.
//!
//! Well and window indices follow the 1-based areal convention used in the
//! problem description; accessors convert to 0-based grid indices.

use crate::flowsim::{FluidConfig, RelPermConfig, SimConfig, WellKind, WellSpec};
use crate::geomodel::{LocalWindow, Metaparameters, PriorRanges};
use crate::grf::VariogramSpec;
use crate::grid::GridDims;
use crate::hm::{HmConfig, PcnVariant, SeisKind};
use crate::nets::{LossKind, OptimizerKind, TrainConfig, UnetScale};
use crate::{GhmError, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WellPos {
    /// 1-based areal indices.
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellsConfig {
    pub injector: WellPos,
    pub monitor: WellPos,
    pub rate_mt_per_year: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaSection {
    /// Training realizations for the basis.
    pub n_realizations: usize,
    /// Truncation rank.
    pub n_d: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    pub n_train: usize,
    pub n_test: usize,
    /// Report steps predicted by the seismic surrogate (output channels).
    pub seismic_steps: Vec<usize>,
    /// Report steps predicted by the monitoring surrogate.
    pub monitor_steps: Vec<usize>,
    /// 1-based inclusive areal bounds [i0, i1, j0, j1] of the local window.
    pub local_window: [usize; 4],
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeTemps {
    pub t_mon: f64,
    pub t_seis: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneSection {
    pub enabled: bool,
    pub pilot_iters: usize,
    pub band_lo: f64,
    pub band_hi: f64,
    pub max_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmSection {
    pub beta: f64,
    pub meta_proposal_frac: f64,
    pub temps_mon: ModeTemps,
    pub temps_mon_plume: ModeTemps,
    pub temps_mon_sat: ModeTemps,
    pub max_iters: usize,
    pub histogram_check_interval: usize,
    pub histogram_bins: usize,
    pub histogram_tol: f64,
    pub pcn_variant: PcnVariant,
    /// Latent-state snapshot interval (0 disables snapshots).
    pub thinning: usize,
    /// Monitoring report steps used as observations.
    pub obs_monitor_steps: Vec<usize>,
    /// Seismic report steps used as observations.
    pub obs_seismic_steps: Vec<usize>,
    /// Measurement-noise fraction of the max observed monitoring value.
    pub frac_mon: f64,
    /// Same for interpreted seismic data.
    pub frac_seis: f64,
    pub tune: TuneSection,
    pub seed: u64,
    /// Checkpoint interval (iterations) for resumable runs.
    pub checkpoint_interval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSection {
    pub meta: Metaparameters,
    /// Seed of the standard-Gaussian truth field (drawn outside the PCA span).
    pub field_seed: u64,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSection {
    /// Trailing accepted-sample window for posterior histograms.
    pub window: usize,
    pub bins: usize,
    pub k_clusters: usize,
    /// delta_s thresholds for the box-plot report.
    pub mae_thresholds: Vec<f64>,
    /// Accepted realizations sampled per mode for representative plumes.
    pub n_representative: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathsSection {
    /// Root directory for all generated artifacts.
    pub workdir: String,
}

/// The assimilation modes exposed by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HmMode {
    Mon,
    MonPlume,
    MonSat,
}

impl HmMode {
    pub fn flag(&self) -> &'static str {
        match self {
            HmMode::Mon => "mon",
            HmMode::MonPlume => "mon+plume",
            HmMode::MonSat => "mon+sat",
        }
    }

    pub fn from_flag(s: &str) -> Result<Self> {
        match s {
            "mon" => Ok(HmMode::Mon),
            "mon+plume" => Ok(HmMode::MonPlume),
            "mon+sat" => Ok(HmMode::MonSat),
            other => Err(GhmError::Config(format!(
                "unknown mode '{other}' (expected mon, mon+plume or mon+sat)"
            ))),
        }
    }

    pub fn seis_kind(&self) -> SeisKind {
        match self {
            HmMode::Mon => SeisKind::None,
            HmMode::MonPlume => SeisKind::PlumeLocation,
            HmMode::MonSat => SeisKind::Saturation,
        }
    }

    pub fn dir_name(&self) -> &'static str {
        match self {
            HmMode::Mon => "mon",
            HmMode::MonPlume => "mon_plume",
            HmMode::MonSat => "mon_sat",
        }
    }

    pub const ALL: [HmMode; 3] = [HmMode::Mon, HmMode::MonPlume, HmMode::MonSat];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridDims,
    pub variogram: VariogramSpec,
    pub priors: PriorRanges,
    pub wells: WellsConfig,
    pub fluid: FluidConfig,
    pub relperm: RelPermConfig,
    pub sim: SimConfig,
    pub pca: PcaSection,
    pub dataset: DatasetSection,
    pub unet_scale: UnetScale,
    pub train_seis: TrainConfig,
    pub train_mon: TrainConfig,
    pub hm: HmSection,
    pub truth: TruthSection,
    pub analysis: AnalysisSection,
    pub paths: PathsSection,
}

impl RunConfig {
    /// Desk-scale defaults: every test and the acceptance suite run these.
    pub fn desk() -> Self {
        RunConfig {
            grid: GridDims { nx: 32, ny: 32, nz: 15, dx: 7.0, dy: 7.0, dz: 2.0 },
            variogram: VariogramSpec::new(70.0, 70.0, 3.0).unwrap(),
            priors: PriorRanges::default(),
            wells: WellsConfig {
                injector: WellPos { i: 17, j: 17 },
                monitor: WellPos { i: 21, j: 21 },
                rate_mt_per_year: 0.005,
            },
            fluid: FluidConfig::default(),
            relperm: RelPermConfig::default(),
            sim: SimConfig::default(),
            pca: PcaSection { n_realizations: 200, n_d: 100, seed: 2101 },
            dataset: DatasetSection {
                n_train: 200,
                n_test: 40,
                seismic_steps: vec![10, 20, 30],
                monitor_steps: vec![0, 4, 8, 12, 16, 20, 24, 28],
                local_window: [15, 23, 15, 23],
                seed: 2201,
            },
            unet_scale: UnetScale::Desk,
            train_seis: TrainConfig {
                batch_size: 10,
                epochs: 25,
                initial_lr: 3e-4,
                plateau_factor: 0.2,
                plateau_patience: 10,
                min_lr: 1e-7,
                optimizer: OptimizerKind::Adam,
                loss: LossKind::Mse,
                seed: 2301,
                val_frac: 0.1,
            },
            train_mon: TrainConfig {
                batch_size: 10,
                epochs: 25,
                initial_lr: 1e-3,
                plateau_factor: 0.2,
                plateau_patience: 5,
                min_lr: 1e-7,
                optimizer: OptimizerKind::Radam,
                loss: LossKind::Mae,
                seed: 2302,
                val_frac: 0.1,
            },
            hm: HmSection {
                beta: 0.05,
                meta_proposal_frac: 0.05,
                temps_mon: ModeTemps { t_mon: 0.8, t_seis: 1.0 },
                temps_mon_plume: ModeTemps { t_mon: 1.5, t_seis: 200.0 },
                temps_mon_sat: ModeTemps { t_mon: 1.0, t_seis: 6.0 },
                max_iters: 8000,
                histogram_check_interval: 2000,
                histogram_bins: 20,
                histogram_tol: 0.05,
                pcn_variant: PcnVariant::Sqrt,
                thinning: 100,
                obs_monitor_steps: vec![0, 4, 8, 12],
                obs_seismic_steps: vec![10, 20],
                frac_mon: 0.05,
                frac_seis: 0.10,
                tune: TuneSection {
                    enabled: true,
                    pilot_iters: 300,
                    band_lo: 0.10,
                    band_hi: 0.40,
                    max_rounds: 6,
                },
                seed: 2401,
                checkpoint_interval: 2000,
            },
            truth: TruthSection {
                meta: Metaparameters {
                    mu_logk: 3.0,
                    sigma_logk: 2.3,
                    log10_ar: -1.8,
                    d: 0.03,
                    e: 0.055,
                },
                field_seed: 777,
                noise_seed: 778,
            },
            analysis: AnalysisSection {
                window: 3000,
                bins: 20,
                k_clusters: 4,
                mae_thresholds: vec![0.0, 0.01, 0.02, 0.05],
                n_representative: 200,
                seed: 2501,
            },
            paths: PathsSection { workdir: "runs/desk".into() },
        }
    }

    /// Full-scale reference constants; committed for documentation, far too
    /// heavy to run in tests.
    pub fn paper() -> Self {
        let mut cfg = RunConfig::desk();
        cfg.grid = GridDims { nx: 128, ny: 128, nz: 35, dx: 7.0, dy: 7.0, dz: 2.0 };
        cfg.variogram = VariogramSpec::new(280.0, 280.0, 7.0).unwrap();
        cfg.wells = WellsConfig {
            injector: WellPos { i: 65, j: 65 },
            monitor: WellPos { i: 75, j: 75 },
            rate_mt_per_year: 0.5,
        };
        cfg.pca = PcaSection { n_realizations: 1000, n_d: 800, seed: 2101 };
        cfg.dataset = DatasetSection {
            n_train: 3500,
            n_test: 500,
            seismic_steps: vec![5, 10, 15, 20, 25, 30],
            monitor_steps: (0..=30).step_by(2).collect(),
            local_window: [63, 81, 63, 81],
            seed: 2201,
        };
        cfg.unet_scale = UnetScale::Paper;
        cfg.train_seis.epochs = 150;
        cfg.train_seis.initial_lr = 1e-4;
        cfg.train_mon.epochs = 150;
        cfg.hm.max_iters = 40_000;
        cfg.hm.obs_monitor_steps = vec![2, 4, 6, 8, 10];
        cfg.hm.obs_seismic_steps = vec![5, 10];
        cfg.analysis.window = 10_000;
        cfg.paths = PathsSection { workdir: "runs/paper".into() };
        cfg
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GhmError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| GhmError::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| GhmError::Config(format!("config serialization failed: {e}")))?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn injector_spec(&self) -> WellSpec {
        WellSpec {
            i: self.wells.injector.i - 1,
            j: self.wells.injector.j - 1,
            rate_mt_per_year: self.wells.rate_mt_per_year,
            kind: WellKind::Injector,
        }
    }

    pub fn monitor_spec(&self) -> WellSpec {
        WellSpec {
            i: self.wells.monitor.i - 1,
            j: self.wells.monitor.j - 1,
            rate_mt_per_year: 0.0,
            kind: WellKind::Monitor,
        }
    }

    pub fn local_window(&self) -> LocalWindow {
        let [i0, i1, j0, j1] = self.dataset.local_window;
        LocalWindow { i0: i0 - 1, i1: i1 - 1, j0: j0 - 1, j1: j1 - 1 }
    }

    pub fn hm_config(&self, mode: HmMode) -> HmConfig {
        let temps = match mode {
            HmMode::Mon => self.hm.temps_mon,
            HmMode::MonPlume => self.hm.temps_mon_plume,
            HmMode::MonSat => self.hm.temps_mon_sat,
        };
        HmConfig {
            beta: self.hm.beta,
            meta_proposal_frac: self.hm.meta_proposal_frac,
            t_mon: temps.t_mon,
            t_seis: temps.t_seis,
            max_iters: self.hm.max_iters,
            histogram_check_interval: self.hm.histogram_check_interval,
            histogram_bins: self.hm.histogram_bins,
            histogram_tol: self.hm.histogram_tol,
            pcn_variant: self.hm.pcn_variant,
            thinning: self.hm.thinning,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.priors.validate()?;
        self.relperm.validate()?;
        self.fluid.validate()?;
        self.sim.validate()?;
        let in_grid = |p: &WellPos, name: &str| -> Result<()> {
            if p.i < 1 || p.j < 1 || p.i > self.grid.nx || p.j > self.grid.ny {
                return Err(GhmError::Config(format!(
                    "{name} well ({}, {}) outside 1..={}x1..={}",
                    p.i, p.j, self.grid.nx, self.grid.ny
                )));
            }
            Ok(())
        };
        in_grid(&self.wells.injector, "injector")?;
        in_grid(&self.wells.monitor, "monitor")?;
        if self.wells.rate_mt_per_year < 0.0 {
            return Err(GhmError::Config("injection rate must be >= 0".into()));
        }

        let [i0, i1, j0, j1] = self.dataset.local_window;
        if i0 < 1 || j0 < 1 || i0 > i1 || j0 > j1 || i1 > self.grid.nx || j1 > self.grid.ny {
            return Err(GhmError::Config(format!(
                "local window [{i0},{i1}]x[{j0},{j1}] invalid for grid {}x{}",
                self.grid.nx, self.grid.ny
            )));
        }
        let win = self.local_window();
        for (w, name) in [(self.wells.injector, "injector"), (self.wells.monitor, "monitor")] {
            if !win.contains(w.i - 1, w.j - 1) {
                return Err(GhmError::Config(format!(
                    "local window must contain the {name} column ({}, {})",
                    w.i, w.j
                )));
            }
        }

        if self.pca.n_d + 1 > self.pca.n_realizations {
            return Err(GhmError::Config(format!(
                "n_d = {} needs at least {} PCA realizations",
                self.pca.n_d,
                self.pca.n_d + 1
            )));
        }
        if self.dataset.n_train < 2 || self.dataset.n_test < 1 {
            return Err(GhmError::Config("dataset needs n_train >= 2, n_test >= 1".into()));
        }

        let subset = |inner: &[usize], outer: &dyn Fn(usize) -> bool, what: &str| -> Result<()> {
            for &s in inner {
                if !outer(s) {
                    return Err(GhmError::Config(format!("{what} step {s} out of range")));
                }
            }
            Ok(())
        };
        let n_steps = self.sim.n_steps;
        subset(&self.dataset.seismic_steps, &|s| s >= 1 && s <= n_steps, "seismic channel")?;
        subset(&self.dataset.monitor_steps, &|s| s <= n_steps, "monitoring channel")?;
        subset(
            &self.hm.obs_seismic_steps,
            &|s| self.dataset.seismic_steps.contains(&s),
            "seismic observation",
        )?;
        subset(
            &self.hm.obs_monitor_steps,
            &|s| self.dataset.monitor_steps.contains(&s),
            "monitoring observation",
        )?;
        if self.hm.obs_monitor_steps.is_empty() {
            return Err(GhmError::Config("at least one monitoring observation step required".into()));
        }
        if !self.priors.contains(&self.truth.meta) {
            return Err(GhmError::Config("truth metaparameters outside the prior box".into()));
        }
        self.train_seis.validate()?;
        self.train_mon.validate()?;
        self.hm_config(HmMode::Mon).validate()?;
        self.hm_config(HmMode::MonPlume).validate()?;
        self.hm_config(HmMode::MonSat).validate()?;
        if self.analysis.k_clusters < 1 || self.analysis.bins < 2 {
            return Err(GhmError::Config("analysis needs k >= 1 and bins >= 2".into()));
        }
        Ok(())
    }
}
