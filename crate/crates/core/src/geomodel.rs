//! Scenario metaparameters and geomodel assembly.
//!
//! A geomodel is produced from a metaparameter vector and a PCA latent
//! vector: log-permeability is the scaled latent field, porosity follows
//! the linear porosity/log-permeability law, and vertical permeability is
//! the horizontal field times a spatially constant anisotropy ratio.
//! Cutoffs keep permeability within [1e-4, 1e4] mD and porosity within
//! [0.05, 0.35]. Natural log is used throughout, with permeability in mD.

use crate::grf::{pca_reconstruct, LatentVector, PcaBasis};
use crate::grid::{Grid3, GridDims};
use crate::io::{Ghm1File, Section};
use crate::{GhmError, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const PERM_MIN_MD: f64 = 1e-4;
pub const PERM_MAX_MD: f64 = 1e4;
pub const PHI_MIN: f64 = 0.05;
pub const PHI_MAX: f64 = 0.35;

/// The five scenario metaparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metaparameters {
    /// Mean of natural-log permeability (k in mD).
    pub mu_logk: f64,
    /// Standard deviation of log-permeability.
    pub sigma_logk: f64,
    /// log10 of the anisotropy ratio `a_r = k_v / k_h`.
    pub log10_ar: f64,
    /// Porosity law slope.
    pub d: f64,
    /// Porosity law intercept.
    pub e: f64,
}

impl Metaparameters {
    pub fn to_array(&self) -> [f64; 5] {
        [self.mu_logk, self.sigma_logk, self.log10_ar, self.d, self.e]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Metaparameters { mu_logk: a[0], sigma_logk: a[1], log10_ar: a[2], d: a[3], e: a[4] }
    }

    pub const NAMES: [&'static str; 5] = ["mu_logk", "sigma_logk", "log10_ar", "d", "e"];
}

/// Uniform prior box for the metaparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorRanges {
    pub mu_logk: [f64; 2],
    pub sigma_logk: [f64; 2],
    pub log10_ar: [f64; 2],
    pub d: [f64; 2],
    pub e: [f64; 2],
}

impl Default for PriorRanges {
    fn default() -> Self {
        PriorRanges {
            mu_logk: [2.0, 6.0],
            sigma_logk: [1.0, 2.5],
            log10_ar: [-2.0, 0.0],
            d: [0.02, 0.05],
            e: [0.05, 0.12],
        }
    }
}

impl PriorRanges {
    pub fn as_array(&self) -> [[f64; 2]; 5] {
        [self.mu_logk, self.sigma_logk, self.log10_ar, self.d, self.e]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in Metaparameters::NAMES.iter().zip(self.as_array()) {
            if !(lo < hi) {
                return Err(GhmError::Config(format!(
                    "prior range for {name} is empty or inverted: [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, h: &Metaparameters) -> bool {
        self.as_array().iter().zip(h.to_array()).all(|([lo, hi], v)| v >= *lo && v <= *hi)
    }

    /// Uniform standard deviation per component, `(hi - lo) / sqrt(12)`.
    pub fn uniform_std(&self) -> [f64; 5] {
        self.as_array().map(|[lo, hi]| (hi - lo) / 12f64.sqrt())
    }
}

/// Draw each metaparameter independently and uniformly from its prior range.
pub fn sample_metaparams<R: Rng>(priors: &PriorRanges, rng: &mut R) -> Metaparameters {
    let draw = |rng: &mut R, [lo, hi]: [f64; 2]| rng.gen_range(lo..hi);
    Metaparameters {
        mu_logk: draw(rng, priors.mu_logk),
        sigma_logk: draw(rng, priors.sigma_logk),
        log10_ar: draw(rng, priors.log10_ar),
        d: draw(rng, priors.d),
        e: draw(rng, priors.e),
    }
}

/// Assembled property fields on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoModel {
    /// Horizontal permeability, mD.
    pub kx: Grid3<f64>,
    /// Vertical permeability, mD.
    pub kz: Grid3<f64>,
    /// Porosity, fraction.
    pub phi: Grid3<f64>,
    /// Spatially constant anisotropy ratio.
    pub ar: f64,
    pub dims: GridDims,
    pub meta: Metaparameters,
}

/// Inclusive 0-based areal index bounds of a local sub-grid (all layers kept).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalWindow {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl LocalWindow {
    pub fn nx(&self) -> usize {
        self.i1 - self.i0 + 1
    }

    pub fn ny(&self) -> usize {
        self.j1 - self.j0 + 1
    }

    pub fn validate(&self, dims: &GridDims) -> Result<()> {
        if self.i0 > self.i1 || self.j0 > self.j1 {
            return Err(GhmError::Config("local window bounds are inverted".into()));
        }
        if self.i1 >= dims.nx || self.j1 >= dims.ny {
            return Err(GhmError::Config(format!(
                "local window [{},{}]x[{},{}] exceeds grid {}x{}",
                self.i0, self.i1, self.j0, self.j1, dims.nx, dims.ny
            )));
        }
        Ok(())
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i <= self.i1 && j >= self.j0 && j <= self.j1
    }
}

/// Assemble the full geomodel from metaparameters and a latent vector.
pub fn assemble(
    meta: &Metaparameters,
    xi: &LatentVector,
    basis: &PcaBasis,
    dims: &GridDims,
) -> Result<GeoModel> {
    if basis.n_cells != dims.n_cells() {
        return Err(GhmError::Shape(format!(
            "basis has {} cells but grid has {}",
            basis.n_cells,
            dims.n_cells()
        )));
    }
    let y = pca_reconstruct(basis, xi)?;
    Ok(assemble_from_field(meta, &y, dims))
}

/// Assembly from an explicit standard-Gaussian field (used for truth cases
/// generated outside the PCA span).
pub fn assemble_from_field(meta: &Metaparameters, y: &[f64], dims: &GridDims) -> GeoModel {
    let (log_min, log_max) = (PERM_MIN_MD.ln(), PERM_MAX_MD.ln());
    let ar = 10f64.powf(meta.log10_ar);
    let n = dims.n_cells();
    let mut kx = Vec::with_capacity(n);
    let mut kz = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for &yi in y.iter().take(n) {
        // Clamp in log space, derive porosity from the clamped value so the
        // porosity law stays consistent on clamped cells.
        let logk = (meta.sigma_logk * yi + meta.mu_logk).clamp(log_min, log_max);
        let k = logk.exp();
        kx.push(k);
        kz.push((ar * k).clamp(PERM_MIN_MD, PERM_MAX_MD));
        phi.push((meta.d * logk + meta.e).clamp(PHI_MIN, PHI_MAX));
    }
    GeoModel {
        kx: Grid3 { nx: dims.nx, ny: dims.ny, nz: dims.nz, data: kx },
        kz: Grid3 { nx: dims.nx, ny: dims.ny, nz: dims.nz, data: kz },
        phi: Grid3 { nx: dims.nx, ny: dims.ny, nz: dims.nz, data: phi },
        ar,
        dims: *dims,
        meta: *meta,
    }
}

/// Robustness perturbation: per-cell Gaussian noise on log k and porosity
/// (std = frac times the field maximum) and on the scalar log10 anisotropy
/// ratio, with clamps re-applied. The input model is left unchanged.
pub fn perturb<R: Rng>(model: &GeoModel, frac: f64, rng: &mut R) -> Result<GeoModel> {
    if frac < 0.0 {
        return Err(GhmError::Config("perturbation fraction must be >= 0".into()));
    }
    if frac == 0.0 {
        return Ok(model.clone());
    }
    let (log_min, log_max) = (PERM_MIN_MD.ln(), PERM_MAX_MD.ln());
    let logk: Vec<f64> = model.kx.data.iter().map(|k| k.ln()).collect();
    let max_logk = logk.iter().cloned().fold(f64::NEG_INFINITY, f64::max).abs();
    let max_phi = model.phi.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max).abs();
    let std_logk = frac * max_logk;
    let std_phi = frac * max_phi;
    let std_ar = frac * model.meta.log10_ar.abs();

    let log10_ar = model.meta.log10_ar + std_ar * rng.sample::<f64, _>(StandardNormal);
    let ar = 10f64.powf(log10_ar);

    let n = model.kx.data.len();
    let mut kx = Vec::with_capacity(n);
    let mut kz = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for i in 0..n {
        let lk = (logk[i] + std_logk * rng.sample::<f64, _>(StandardNormal))
            .clamp(log_min, log_max);
        let k = lk.exp();
        kx.push(k);
        kz.push((ar * k).clamp(PERM_MIN_MD, PERM_MAX_MD));
        let p = (model.phi.data[i] + std_phi * rng.sample::<f64, _>(StandardNormal))
            .clamp(PHI_MIN, PHI_MAX);
        phi.push(p);
    }
    let mut meta = model.meta;
    meta.log10_ar = log10_ar;
    Ok(GeoModel {
        kx: Grid3 { nx: model.kx.nx, ny: model.kx.ny, nz: model.kx.nz, data: kx },
        kz: Grid3 { nx: model.kz.nx, ny: model.kz.ny, nz: model.kz.nz, data: kz },
        phi: Grid3 { nx: model.phi.nx, ny: model.phi.ny, nz: model.phi.nz, data: phi },
        ar,
        dims: model.dims,
        meta,
    })
}

/// Local property fields feeding the monitoring surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGeo {
    pub kx: Grid3<f64>,
    pub phi: Grid3<f64>,
    pub ar: f64,
}

/// Copy the window sub-grids over all layers.
pub fn extract_local(model: &GeoModel, window: &LocalWindow) -> Result<LocalGeo> {
    window.validate(&model.dims)?;
    let (wx, wy, nz) = (window.nx(), window.ny(), model.dims.nz);
    let mut kx = Grid3::filled(wx, wy, nz, 0.0);
    let mut phi = Grid3::filled(wx, wy, nz, 0.0);
    for i in 0..wx {
        for j in 0..wy {
            for k in 0..nz {
                kx.set(i, j, k, model.kx.get(window.i0 + i, window.j0 + j, k));
                phi.set(i, j, k, model.phi.get(window.i0 + i, window.j0 + j, k));
            }
        }
    }
    Ok(LocalGeo { kx, phi, ar: model.ar })
}

impl GeoModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let shape = vec![self.dims.nx, self.dims.ny, self.dims.nz];
        let mut f = Ghm1File::new();
        f.insert("kx", Section::f64(shape.clone(), self.kx.data.clone()));
        f.insert("kz", Section::f64(shape.clone(), self.kz.data.clone()));
        f.insert("phi", Section::f64(shape, self.phi.data.clone()));
        f.insert("ar", Section::scalar(self.ar));
        f.insert("meta", Section::f64(vec![5], self.meta.to_array().to_vec()));
        f.insert(
            "cell_sizes",
            Section::f64(vec![3], vec![self.dims.dx, self.dims.dy, self.dims.dz]),
        );
        f.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = Ghm1File::read_from(path)?;
        let kx_sec = f.get("kx")?;
        if kx_sec.shape.len() != 3 {
            return Err(GhmError::Format("kx section must be 3-D".into()));
        }
        let (nx, ny, nz) = (kx_sec.shape[0], kx_sec.shape[1], kx_sec.shape[2]);
        let sizes = f.get("cell_sizes")?.as_f64()?;
        let dims = GridDims::new(nx, ny, nz, sizes[0], sizes[1], sizes[2])?;
        let meta_vec = f.get("meta")?.as_f64()?;
        if meta_vec.len() != 5 {
            return Err(GhmError::Format("meta section must have 5 entries".into()));
        }
        let grid = |name: &str| -> Result<Grid3<f64>> {
            Grid3::from_vec(nx, ny, nz, f.get(name)?.as_f64()?.to_vec())
        };
        Ok(GeoModel {
            kx: grid("kx")?,
            kz: grid("kz")?,
            phi: grid("phi")?,
            ar: f.get("ar")?.scalar_value()?,
            dims,
            meta: Metaparameters::from_array([
                meta_vec[0],
                meta_vec[1],
                meta_vec[2],
                meta_vec[3],
                meta_vec[4],
            ]),
        })
    }
}
