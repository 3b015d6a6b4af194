//! Trained-network wrappers: feature extraction, input normalization,
//! prediction on geomodels, and GHM1 checkpoints.

use super::layers::Network;
use super::tape::{forward_value, Params};
use super::tensor::Tensor;
use crate::geomodel::{extract_local, GeoModel, LocalGeo, LocalWindow};
use crate::grid::Grid3;
use crate::io::{Ghm1File, Section};
use crate::{GhmError, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Per-channel affine input normalization fitted on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputNorm {
    pub fn identity(channels: usize) -> Self {
        InputNorm { mean: vec![0.0; channels], std: vec![1.0; channels] }
    }

    /// Fit channel means/stds over a set of feature tensors `[C, ...]`.
    pub fn fit(features: &[Tensor<f32>]) -> Result<Self> {
        let first = features.first().ok_or_else(|| GhmError::Config("no features to fit".into()))?;
        let channels = first.shape[0];
        let per_ch = first.numel() / channels;
        let mut mean = vec![0.0f64; channels];
        let mut m2 = vec![0.0f64; channels];
        let mut count = 0.0;
        for f in features {
            if f.shape != first.shape {
                return Err(GhmError::Shape("inconsistent feature shapes".into()));
            }
            for c in 0..channels {
                for &v in &f.data[c * per_ch..(c + 1) * per_ch] {
                    mean[c] += v as f64;
                    m2[c] += (v as f64) * (v as f64);
                }
            }
            count += per_ch as f64;
        }
        let mut std = vec![0.0; channels];
        for c in 0..channels {
            mean[c] /= count;
            let var = (m2[c] / count - mean[c] * mean[c]).max(0.0);
            std[c] = var.sqrt().max(1e-8);
        }
        Ok(InputNorm { mean, std })
    }

    pub fn apply(&self, features: &Tensor<f32>) -> Tensor<f32> {
        let channels = self.mean.len();
        let per_ch = features.numel() / channels;
        let mut data = Vec::with_capacity(features.numel());
        for c in 0..channels {
            let (m, s) = (self.mean[c] as f32, self.std[c] as f32);
            for &v in &features.data[c * per_ch..(c + 1) * per_ch] {
                data.push((v - m) / s);
            }
        }
        Tensor { shape: features.shape.clone(), data }
    }
}

/// Full-grid features: channels (log k, porosity, constant anisotropy ratio).
pub fn seismic_features(model: &GeoModel) -> Tensor<f32> {
    let n = model.dims.n_cells();
    let mut data = Vec::with_capacity(3 * n);
    data.extend(model.kx.data.iter().map(|&k| k.ln() as f32));
    data.extend(model.phi.data.iter().map(|&p| p as f32));
    data.extend(std::iter::repeat(model.ar as f32).take(n));
    Tensor {
        shape: vec![3, model.dims.nx, model.dims.ny, model.dims.nz],
        data,
    }
}

/// Local-window features for the monitoring net.
pub fn monitor_features(local: &LocalGeo) -> Tensor<f32> {
    let n = local.kx.len();
    let mut data = Vec::with_capacity(3 * n);
    data.extend(local.kx.data.iter().map(|&k| k.ln() as f32));
    data.extend(local.phi.data.iter().map(|&p| p as f32));
    data.extend(std::iter::repeat(local.ar as f32).take(n));
    Tensor { shape: vec![3, local.kx.nx, local.kx.ny, local.kx.nz], data }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    kind: String,
    network: Network,
    channel_steps: Vec<usize>,
    norm: InputNorm,
    window: Option<LocalWindow>,
}

fn save_checkpoint(path: &Path, manifest: &Manifest, params: &Params<f32>) -> Result<()> {
    let mut f = Ghm1File::new();
    let json = serde_json::to_vec(manifest)
        .map_err(|e| GhmError::Format(format!("manifest encoding failed: {e}")))?;
    f.insert("manifest", Section::u8(vec![json.len()], json));
    for (i, t) in params.tensors.iter().enumerate() {
        f.insert(&format!("param{i:04}"), Section::f32(t.shape.clone(), t.data.clone()));
    }
    f.write_to(path)
}

fn load_checkpoint(path: &Path) -> Result<(Manifest, Params<f32>)> {
    let f = Ghm1File::read_from(path)?;
    let manifest: Manifest = serde_json::from_slice(f.get("manifest")?.as_u8()?)
        .map_err(|e| GhmError::Format(format!("manifest decoding failed: {e}")))?;
    let mut tensors = Vec::new();
    let mut names = Vec::new();
    let mut i = 0;
    loop {
        let name = format!("param{i:04}");
        if !f.contains(&name) {
            break;
        }
        let sec = f.get(&name)?;
        tensors.push(Tensor::from_vec(&sec.shape, sec.as_f32()?.to_vec())?);
        names.push(name);
        i += 1;
    }
    Ok((manifest, Params { tensors, names }))
}

/// Interpreted-seismic surrogate: fine geomodel in, coarse saturation
/// fields (one per configured report step) out.
#[derive(Debug, Clone)]
pub struct SeismicSurrogate {
    pub network: Network,
    pub params: Params<f32>,
    pub norm: InputNorm,
    pub channel_steps: Vec<usize>,
}

impl SeismicSurrogate {
    pub fn predict(&self, model: &GeoModel) -> Result<Vec<Grid3<f64>>> {
        self.predict_features(&seismic_features(model))
    }

    pub fn predict_features(&self, features: &Tensor<f32>) -> Result<Vec<Grid3<f64>>> {
        let out = forward_value(&self.network, &self.params, self.norm.apply(features))?;
        let (nt, cx, cy, cz) = (out.shape[0], out.shape[1], out.shape[2], out.shape[3]);
        if nt != self.channel_steps.len() {
            return Err(GhmError::Shape("channel count does not match step map".into()));
        }
        let per = cx * cy * cz;
        Ok((0..nt)
            .map(|t| Grid3 {
                nx: cx,
                ny: cy,
                nz: cz,
                data: out.data[t * per..(t + 1) * per].iter().map(|&v| v as f64).collect(),
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let manifest = Manifest {
            kind: "seismic".into(),
            network: self.network.clone(),
            channel_steps: self.channel_steps.clone(),
            norm: self.norm.clone(),
            window: None,
        };
        save_checkpoint(path, &manifest, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (manifest, params) = load_checkpoint(path)?;
        if manifest.kind != "seismic" {
            return Err(GhmError::Format(format!("checkpoint is a {} model", manifest.kind)));
        }
        Ok(SeismicSurrogate {
            network: manifest.network,
            params,
            norm: manifest.norm,
            channel_steps: manifest.channel_steps,
        })
    }
}

/// Monitoring-well surrogate: local window in, per-layer saturation
/// profiles (one channel per configured report step) out.
#[derive(Debug, Clone)]
pub struct MonitorSurrogate {
    pub network: Network,
    pub params: Params<f32>,
    pub norm: InputNorm,
    pub channel_steps: Vec<usize>,
    pub window: LocalWindow,
}

impl MonitorSurrogate {
    /// Returns a `[n_t, nz]` tensor of predicted saturation profiles.
    pub fn predict(&self, model: &GeoModel) -> Result<Tensor<f64>> {
        let local = extract_local(model, &self.window)?;
        self.predict_features(&monitor_features(&local))
    }

    pub fn predict_features(&self, features: &Tensor<f32>) -> Result<Tensor<f64>> {
        let out = forward_value(&self.network, &self.params, self.norm.apply(features))?;
        if out.shape[0] != self.channel_steps.len() {
            return Err(GhmError::Shape("channel count does not match step map".into()));
        }
        Ok(out.cast())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let manifest = Manifest {
            kind: "monitor".into(),
            network: self.network.clone(),
            channel_steps: self.channel_steps.clone(),
            norm: self.norm.clone(),
            window: Some(self.window),
        };
        save_checkpoint(path, &manifest, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (manifest, params) = load_checkpoint(path)?;
        if manifest.kind != "monitor" {
            return Err(GhmError::Format(format!("checkpoint is a {} model", manifest.kind)));
        }
        Ok(MonitorSurrogate {
            network: manifest.network,
            params,
            norm: manifest.norm,
            channel_steps: manifest.channel_steps,
            window: manifest
                .window
                .ok_or_else(|| GhmError::Format("monitor checkpoint lacks window".into()))?,
        })
    }
}
