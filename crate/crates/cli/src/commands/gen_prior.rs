//! `gen-prior`: PCA basis construction and prior geomodel sampling.

use crate::Workspace;
use ghm_core::config::RunConfig;
use ghm_core::geomodel::{assemble, sample_metaparams};
use ghm_core::grf::{build_pca, derive_rng, energy_fraction, generate_realizations, LatentVector, PcaBasis};
use ghm_core::{GhmError, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const TAG_META: u64 = 0x4d455441;
const TAG_XI: u64 = 0x58490000;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PriorManifest {
    pub n_models: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub n_d: usize,
    pub energy_fraction: f64,
    /// (file name, sha256 hex) per model, in index order.
    pub files: Vec<(String, String)>,
}

fn sha256_hex(path: &std::path::Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Draw the (h, xi) pair for model `index`; independent streams per model,
/// so regeneration order never matters.
pub fn draw_model_params(
    cfg: &RunConfig,
    index: usize,
) -> (ghm_core::geomodel::Metaparameters, LatentVector) {
    let mut meta_rng = derive_rng(cfg.dataset.seed, index as u64, TAG_META);
    let meta = sample_metaparams(&cfg.priors, &mut meta_rng);
    let mut xi_rng = derive_rng(cfg.dataset.seed, index as u64, TAG_XI);
    let xi = LatentVector {
        xi: (0..cfg.pca.n_d).map(|_| xi_rng.sample(rand_distr::StandardNormal)).collect(),
    };
    (meta, xi)
}

pub fn cmd_gen_prior(cfg: &RunConfig, ws: &Workspace, resume: bool) -> Result<PriorManifest> {
    ws.ensure("pca")?;
    ws.ensure("models")?;

    let basis = if resume && ws.pca_basis().exists() {
        PcaBasis::load(&ws.pca_basis())?
    } else {
        let fields =
            generate_realizations(&cfg.grid, &cfg.variogram, cfg.pca.n_realizations, cfg.pca.seed)?;
        let basis = build_pca(&fields, cfg.pca.n_d)?;
        basis.save(&ws.pca_basis())?;
        basis
    };
    let energy = energy_fraction(&basis.singular_values, cfg.pca.n_d)?;

    let n_models = cfg.dataset.n_train + cfg.dataset.n_test;
    let results: Vec<Result<()>> = (0..n_models)
        .into_par_iter()
        .map(|i| {
            let path = ws.model_path(i);
            if resume && path.exists() {
                return Ok(());
            }
            let (meta, xi) = draw_model_params(cfg, i);
            let model = assemble(&meta, &xi, &basis, &cfg.grid)?;
            model.save(&path)
        })
        .collect();
    for r in results {
        r?;
    }

    let mut files = Vec::with_capacity(n_models);
    for i in 0..n_models {
        let path = ws.model_path(i);
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| GhmError::Config("bad model path".into()))?
            .to_string();
        files.push((name, sha256_hex(&path)?));
    }
    let manifest = PriorManifest {
        n_models,
        n_train: cfg.dataset.n_train,
        n_test: cfg.dataset.n_test,
        seed: cfg.dataset.seed,
        n_d: cfg.pca.n_d,
        energy_fraction: energy,
        files,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| GhmError::Format(format!("manifest encode: {e}")))?;
    std::fs::write(ws.prior_manifest(), text)?;
    Ok(manifest)
}

pub fn load_manifest(ws: &Workspace) -> Result<PriorManifest> {
    let text = std::fs::read_to_string(ws.prior_manifest())
        .map_err(|_| GhmError::Config("missing prior manifest; run gen-prior first".into()))?;
    serde_json::from_str(&text).map_err(|e| GhmError::Format(format!("manifest decode: {e}")))
}
