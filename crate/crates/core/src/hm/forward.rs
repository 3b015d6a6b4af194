//! Forward models evaluated inside the chain: the production path runs
//! both surrogates on a geomodel assembled from (h, xi).

use super::observation::{ObservationSet, SeisKind};
use crate::geomodel::{assemble, Metaparameters};
use crate::grf::{LatentVector, PcaBasis};
use crate::grid::GridDims;
use crate::nets::{MonitorSurrogate, SeismicSurrogate};
use crate::{GhmError, Result};

/// Predicted data vectors aligned with the observation ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mon: Vec<f64>,
    pub seis: Vec<f64>,
}

pub trait ForwardModel: Sync {
    fn n_latent(&self) -> usize;

    fn evaluate(&self, h: &Metaparameters, xi: &LatentVector) -> Result<Prediction>;

    /// Spatial mean of the latent standard-Gaussian field for (h-independent)
    /// derived statistics; toy models may leave this at zero.
    fn latent_field_mean(&self, _xi: &LatentVector) -> f64 {
        0.0
    }
}

/// Surrogate-backed forward model.
pub struct SurrogateForward<'a> {
    pub monitor: &'a MonitorSurrogate,
    pub seismic: Option<&'a SeismicSurrogate>,
    pub basis: &'a PcaBasis,
    pub dims: GridDims,
    mon_channel_pos: Vec<usize>,
    seis_channel_pos: Vec<usize>,
    phi_col_means: Vec<f64>,
    ybar_mean: f64,
}

impl<'a> SurrogateForward<'a> {
    /// Wire surrogates to an observation set, resolving report steps to
    /// output channels. Any mismatch fails here, before the chain starts.
    pub fn new(
        monitor: &'a MonitorSurrogate,
        seismic: Option<&'a SeismicSurrogate>,
        basis: &'a PcaBasis,
        dims: GridDims,
        obs: &ObservationSet,
    ) -> Result<Self> {
        if basis.n_cells != dims.n_cells() {
            return Err(GhmError::Shape("PCA basis does not match the grid".into()));
        }
        let find = |channels: &[usize], step: usize, what: &str| -> Result<usize> {
            channels.iter().position(|&c| c == step).ok_or_else(|| {
                GhmError::Config(format!(
                    "observed {what} step {step} is not among surrogate channels {channels:?}"
                ))
            })
        };
        let mon_channel_pos = obs
            .mon_steps
            .iter()
            .map(|&s| find(&monitor.channel_steps, s, "monitoring"))
            .collect::<Result<Vec<_>>>()?;
        let seis_channel_pos = match (obs.seis_kind, seismic) {
            (SeisKind::None, _) => Vec::new(),
            (_, None) => {
                return Err(GhmError::Config(
                    "seismic observations present but no seismic surrogate supplied".into(),
                ))
            }
            (_, Some(s)) => obs
                .seis_steps
                .iter()
                .map(|&step| find(&s.channel_steps, step, "seismic"))
                .collect::<Result<Vec<_>>>()?,
        };
        let (phi_col_means, ybar_mean) = basis.column_means();
        Ok(SurrogateForward {
            monitor,
            seismic,
            basis,
            dims,
            mon_channel_pos,
            seis_channel_pos,
            phi_col_means,
            ybar_mean,
        })
    }
}

impl ForwardModel for SurrogateForward<'_> {
    fn n_latent(&self) -> usize {
        self.basis.n_d
    }

    fn evaluate(&self, h: &Metaparameters, xi: &LatentVector) -> Result<Prediction> {
        let model = assemble(h, xi, self.basis, &self.dims)?;

        let mon_out = self.monitor.predict(&model)?;
        let nz = mon_out.shape[1];
        let mut mon = Vec::with_capacity(self.mon_channel_pos.len() * nz);
        for &c in &self.mon_channel_pos {
            mon.extend_from_slice(&mon_out.data[c * nz..(c + 1) * nz]);
        }

        let mut seis = Vec::new();
        if let Some(surrogate) = self.seismic {
            if !self.seis_channel_pos.is_empty() {
                let grids = surrogate.predict(&model)?;
                for &c in &self.seis_channel_pos {
                    seis.extend_from_slice(&grids[c].data);
                }
            }
        }
        Ok(Prediction { mon, seis })
    }

    fn latent_field_mean(&self, xi: &LatentVector) -> f64 {
        let dot: f64 = self.phi_col_means.iter().zip(&xi.xi).map(|(a, b)| a * b).sum();
        dot + self.ybar_mean
    }
}
