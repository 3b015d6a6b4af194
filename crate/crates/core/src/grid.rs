//! Structured-grid primitives used by every module.

use crate::{GhmError, Result};
use serde::{Deserialize, Serialize};

/// Cell counts and cell sizes of a structured 3D grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Cell sizes in meters.
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl GridDims {
    pub fn new(nx: usize, ny: usize, nz: usize, dx: f64, dy: f64, dz: f64) -> Result<Self> {
        if nx < 1 || ny < 1 || nz < 1 {
            return Err(GhmError::Config("grid cell counts must be >= 1".into()));
        }
        if dx <= 0.0 || dy <= 0.0 || dz <= 0.0 {
            return Err(GhmError::Config("grid cell sizes must be > 0".into()));
        }
        Ok(GridDims { nx, ny, nz, dx, dy, dz })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }
}

/// Dense 3D field stored row-major with z fastest: `idx = (i*ny + j)*nz + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3<T> {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Grid3<T> {
    pub fn filled(nx: usize, ny: usize, nz: usize, value: T) -> Self {
        Grid3 { nx, ny, nz, data: vec![value; nx * ny * nz] }
    }

    pub fn from_vec(nx: usize, ny: usize, nz: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != nx * ny * nz {
            return Err(GhmError::Shape(format!(
                "grid data length {} does not match {}x{}x{}",
                data.len(),
                nx,
                ny,
                nz
            )));
        }
        Ok(Grid3 { nx, ny, nz, data })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.nz + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: T) {
        let idx = self.idx(i, j, k);
        self.data[idx] = value;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map<U: Copy, F: Fn(T) -> U>(&self, f: F) -> Grid3<U> {
        Grid3 {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl Grid3<f64> {
    pub fn to_f32(&self) -> Grid3<f32> {
        self.map(|v| v as f32)
    }
}

impl Grid3<f32> {
    pub fn to_f64(&self) -> Grid3<f64> {
        self.map(|v| v as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_validation() {
        assert!(GridDims::new(0, 4, 4, 1.0, 1.0, 1.0).is_err());
        assert!(GridDims::new(4, 4, 4, 0.0, 1.0, 1.0).is_err());
        let d = GridDims::new(4, 5, 6, 7.0, 7.0, 2.0).unwrap();
        assert_eq!(d.n_cells(), 120);
    }

    #[test]
    fn indexing_is_z_fastest() {
        let mut g = Grid3::filled(3, 4, 5, 0.0f64);
        g.set(1, 2, 3, 9.0);
        assert_eq!(g.data[(1 * 4 + 2) * 5 + 3], 9.0);
        assert_eq!(g.get(1, 2, 3), 9.0);
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Grid3::from_vec(2, 2, 2, vec![0.0; 7]).is_err());
    }
}
