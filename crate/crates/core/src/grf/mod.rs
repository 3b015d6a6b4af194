//! Standard-Gaussian random fields with a spherical variogram, plus the
//! PCA parameterization that maps a low-dimensional latent vector to a
//! correlated field.
//!
//! Fields are generated by FFT circulant embedding: the anisotropic
//! covariance kernel is embedded on a torus of twice the grid size, its
//! eigenvalues are obtained by a 3D FFT, and each realization is a seeded
//! complex-noise synthesis. Small negative embedding eigenvalues are
//! clipped to zero.

mod fft3;
pub mod pca;

pub use pca::{build_pca, energy_fraction, pca_project, pca_reconstruct, LatentVector, PcaBasis};

use crate::grid::GridDims;
use crate::{GhmError, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariogramModel {
    Spherical,
}

/// Correlation lengths (meters) of the stationary covariance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramSpec {
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    #[serde(default = "default_model")]
    pub model: VariogramModel,
}

fn default_model() -> VariogramModel {
    VariogramModel::Spherical
}

impl VariogramSpec {
    pub fn new(lx: f64, ly: f64, lz: f64) -> Result<Self> {
        if lx <= 0.0 || ly <= 0.0 || lz <= 0.0 {
            return Err(GhmError::Config("correlation lengths must be > 0".into()));
        }
        Ok(VariogramSpec { lx, ly, lz, model: VariogramModel::Spherical })
    }
}

/// Spherical covariance at normalized anisotropic lag `t`.
///
/// Unit variance at zero lag, exactly zero at and beyond `t = 1`.
pub fn spherical_cov(t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(GhmError::Numeric(format!("spherical_cov: negative lag {t}")));
    }
    if t >= 1.0 {
        Ok(0.0)
    } else {
        Ok(1.0 - 1.5 * t + 0.5 * t * t * t)
    }
}

/// Column-major matrix of flattened fields: column `c` is one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMatrix {
    pub n_cells: usize,
    pub n_fields: usize,
    data: Vec<f64>,
}

impl FieldMatrix {
    pub fn zeros(n_cells: usize, n_fields: usize) -> Self {
        FieldMatrix { n_cells, n_fields, data: vec![0.0; n_cells * n_fields] }
    }

    pub fn from_columns(n_cells: usize, cols: Vec<Vec<f64>>) -> Result<Self> {
        let n_fields = cols.len();
        let mut data = Vec::with_capacity(n_cells * n_fields);
        for c in &cols {
            if c.len() != n_cells {
                return Err(GhmError::Shape("realization length mismatch".into()));
            }
            data.extend_from_slice(c);
        }
        Ok(FieldMatrix { n_cells, n_fields, data })
    }

    #[inline]
    pub fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.n_cells..(c + 1) * self.n_cells]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.n_cells..(c + 1) * self.n_cells]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Deterministic per-purpose RNG derivation: independent streams for
/// (seed, stream, tag) triples.
pub fn derive_rng(seed: u64, stream: u64, tag: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&tag.to_le_bytes());
    key[24..32].copy_from_slice(&0x67686d31u64.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

/// Precomputed circulant embedding for a (dims, variogram) pair.
pub struct Embedding {
    mx: usize,
    my: usize,
    mz: usize,
    sqrt_eigs: Vec<f64>,
    /// Fraction of total spectral mass removed by clipping negatives.
    pub clipped_fraction: f64,
}

/// Largest tolerated clipped spectral mass before the embedding is rejected.
const MAX_CLIPPED_FRACTION: f64 = 1e-2;

impl Embedding {
    pub fn build(dims: &GridDims, vario: &VariogramSpec) -> Result<Self> {
        let extents = [
            (dims.nx, dims.dx, vario.lx, "x"),
            (dims.ny, dims.dy, vario.ly, "y"),
            (dims.nz, dims.dz, vario.lz, "z"),
        ];
        for (n, d, l, axis) in extents {
            if (n as f64) * d < l {
                return Err(GhmError::Config(format!(
                    "grid extent {:.1} m along {axis} is smaller than the correlation \
                     length {l:.1} m; pad the domain (or reduce the correlation length) \
                     so the covariance can be embedded",
                    n as f64 * d
                )));
            }
        }

        let (mx, my, mz) = (2 * dims.nx, 2 * dims.ny, 2 * dims.nz);
        let m_total = mx * my * mz;
        let mut kernel = vec![Complex::new(0.0, 0.0); m_total];
        for ix in 0..mx {
            let hx = ix.min(mx - ix) as f64 * dims.dx / vario.lx;
            for iy in 0..my {
                let hy = iy.min(my - iy) as f64 * dims.dy / vario.ly;
                let base = (ix * my + iy) * mz;
                for iz in 0..mz {
                    let hz = iz.min(mz - iz) as f64 * dims.dz / vario.lz;
                    let t = (hx * hx + hy * hy + hz * hz).sqrt();
                    kernel[base + iz] = Complex::new(spherical_cov(t)?, 0.0);
                }
            }
        }

        fft3::fft3(&mut kernel, mx, my, mz, fft3::Direction::Forward);

        let mut sqrt_eigs = vec![0.0; m_total];
        let mut clipped = 0.0;
        let mut total = 0.0;
        for (i, v) in kernel.iter().enumerate() {
            let lam = v.re;
            total += lam.abs();
            if lam < 0.0 {
                clipped += -lam;
            } else {
                sqrt_eigs[i] = lam.sqrt();
            }
        }
        let clipped_fraction = if total > 0.0 { clipped / total } else { 0.0 };
        if clipped_fraction > MAX_CLIPPED_FRACTION {
            return Err(GhmError::Numeric(format!(
                "circulant embedding is too far from positive semidefinite \
                 (clipped {:.2}% of spectral mass); pad the domain relative to \
                 the correlation range",
                clipped_fraction * 100.0
            )));
        }
        Ok(Embedding { mx, my, mz, sqrt_eigs, clipped_fraction })
    }

    /// Synthesize one realization for a derived RNG stream.
    fn realize(&self, dims: &GridDims, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let m_total = self.mx * self.my * self.mz;
        let mut buf = Vec::with_capacity(m_total);
        for &se in &self.sqrt_eigs {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            buf.push(Complex::new(se * re, se * im));
        }
        fft3::fft3(&mut buf, self.mx, self.my, self.mz, fft3::Direction::Inverse);
        let norm = 1.0 / (m_total as f64).sqrt();
        let mut out = Vec::with_capacity(dims.n_cells());
        for i in 0..dims.nx {
            for j in 0..dims.ny {
                let base = (i * self.my + j) * self.mz;
                for k in 0..dims.nz {
                    out.push(buf[base + k].re * norm);
                }
            }
        }
        out
    }
}

/// Generate `count` standard-Gaussian realizations honoring the spherical
/// covariance. Columns are independent streams derived from (seed, column),
/// so results do not depend on evaluation order.
pub fn generate_realizations(
    dims: &GridDims,
    vario: &VariogramSpec,
    count: usize,
    seed: u64,
) -> Result<FieldMatrix> {
    if count < 1 {
        return Err(GhmError::Config("realization count must be >= 1".into()));
    }
    let embedding = Embedding::build(dims, vario)?;
    let cols: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|c| {
            let mut rng = derive_rng(seed, c as u64, 0x47524631);
            embedding.realize(dims, &mut rng)
        })
        .collect();
    FieldMatrix::from_columns(dims.n_cells(), cols)
}
