//! Artifact layout under the configured work directory.

use ghm_core::config::HmMode;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new<P: AsRef<Path>>(root: P) -> Self {
        Workspace { root: root.as_ref().to_path_buf() }
    }

    pub fn ensure(&self, sub: &str) -> std::io::Result<PathBuf> {
        let dir = self.root.join(sub);
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    pub fn pca_basis(&self) -> PathBuf {
        self.root.join("pca/basis.ghm1")
    }

    pub fn prior_manifest(&self) -> PathBuf {
        self.root.join("models/manifest.json")
    }

    pub fn model_path(&self, index: usize) -> PathBuf {
        self.root.join(format!("models/model_{index:04}.ghm1"))
    }

    pub fn sim_path(&self, index: usize) -> PathBuf {
        self.root.join(format!("sims/sim_{index:04}.ghm1"))
    }

    pub fn mass_balance_csv(&self) -> PathBuf {
        self.root.join("sims/mass_balance.csv")
    }

    pub fn dataset_path(&self, which: &str, split: &str) -> PathBuf {
        self.root.join(format!("dataset/{which}_{split}.ghm1"))
    }

    pub fn surrogate_path(&self, which: &str) -> PathBuf {
        self.root.join(format!("surrogates/{which}.ghm1"))
    }

    pub fn loss_csv(&self, which: &str) -> PathBuf {
        self.root.join(format!("surrogates/{which}_loss.csv"))
    }

    pub fn eval_csv(&self, which: &str) -> PathBuf {
        self.root.join(format!("surrogates/{which}_delta_s.csv"))
    }

    pub fn eval_box_csv(&self) -> PathBuf {
        self.root.join("surrogates/delta_s_box_stats.csv")
    }

    pub fn eval_box_svg(&self) -> PathBuf {
        self.root.join("surrogates/delta_s_box.svg")
    }

    pub fn surrogate_errors(&self) -> PathBuf {
        self.root.join("surrogates/surrogate_errors.json")
    }

    pub fn truth_model(&self) -> PathBuf {
        self.root.join("truth/model.ghm1")
    }

    pub fn truth_sim(&self) -> PathBuf {
        self.root.join("truth/sim.ghm1")
    }

    pub fn truth_summary(&self) -> PathBuf {
        self.root.join("truth/summary.json")
    }

    pub fn observations(&self, mode: HmMode) -> PathBuf {
        self.root.join(format!("truth/obs_{}.ghm1", mode.dir_name()))
    }

    pub fn hm_dir(&self, mode: HmMode) -> PathBuf {
        self.root.join(format!("hm/{}", mode.dir_name()))
    }

    pub fn chain_csv(&self, mode: HmMode) -> PathBuf {
        self.hm_dir(mode).join("chain.csv")
    }

    pub fn accepted_csv(&self, mode: HmMode) -> PathBuf {
        self.hm_dir(mode).join("accepted.csv")
    }

    pub fn xi_snapshots(&self, mode: HmMode) -> PathBuf {
        self.hm_dir(mode).join("xi_snapshots.ghm1")
    }

    pub fn hm_state(&self, mode: HmMode) -> PathBuf {
        self.hm_dir(mode).join("state.json")
    }

    pub fn hm_report(&self, mode: HmMode) -> PathBuf {
        self.hm_dir(mode).join("report.json")
    }

    pub fn analysis_dir(&self, mode: HmMode) -> PathBuf {
        self.root.join(format!("analysis/{}", mode.dir_name()))
    }
}
