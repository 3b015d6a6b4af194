//! Interpreted 4D-seismic products from fine-scale saturation fields.
//!
//! Two-step filtering: a valid (no-padding) moving average with stride 1
//! smooths the field, then pure decimation resamples it onto the coarse
//! grid. A saturation threshold turns coarse fields into binary plume
//! masks.

use crate::grid::Grid3;
use crate::{GhmError, Result};

/// Coarse-grid saturation at one or more seismic time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpretedSeismic {
    /// One coarse grid per time step.
    pub sat: Vec<Grid3<f64>>,
    /// Report-step labels for each entry.
    pub steps: Vec<usize>,
}

/// Binary plume-presence grids, one per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct PlumeMask {
    pub mask: Vec<Grid3<u8>>,
    pub steps: Vec<usize>,
}

/// Valid moving average: output dims are `fine - window + 1` per axis.
pub fn mean_filter(fine: &Grid3<f64>, window: (usize, usize, usize)) -> Result<Grid3<f64>> {
    let (wx, wy, wz) = window;
    if wx == 0 || wy == 0 || wz == 0 {
        return Err(GhmError::Config("filter window must be positive".into()));
    }
    if fine.nx < wx || fine.ny < wy || fine.nz < wz {
        return Err(GhmError::Shape(format!(
            "grid {}x{}x{} is smaller than filter window {}x{}x{}",
            fine.nx, fine.ny, fine.nz, wx, wy, wz
        )));
    }
    let (ox, oy, oz) = (fine.nx - wx + 1, fine.ny - wy + 1, fine.nz - wz + 1);
    let inv = 1.0 / (wx * wy * wz) as f64;
    let mut out = Grid3::filled(ox, oy, oz, 0.0);
    for i in 0..ox {
        for j in 0..oy {
            for k in 0..oz {
                let mut acc = 0.0;
                for a in 0..wx {
                    for b in 0..wy {
                        let base = ((i + a) * fine.ny + (j + b)) * fine.nz + k;
                        for c in 0..wz {
                            acc += fine.data[base + c];
                        }
                    }
                }
                out.set(i, j, k, acc * inv);
            }
        }
    }
    Ok(out)
}

/// Pure subsampling anchored at index 0: keeps indices 0, s, 2s, ... per axis.
pub fn decimate(grid: &Grid3<f64>, stride: (usize, usize, usize)) -> Result<Grid3<f64>> {
    let (sx, sy, sz) = stride;
    if sx == 0 || sy == 0 || sz == 0 {
        return Err(GhmError::Config("decimation stride must be positive".into()));
    }
    let out_len = |n: usize, s: usize| (n - 1) / s + 1;
    let (ox, oy, oz) = (out_len(grid.nx, sx), out_len(grid.ny, sy), out_len(grid.nz, sz));
    let mut out = Grid3::filled(ox, oy, oz, 0.0);
    for i in 0..ox {
        for j in 0..oy {
            for k in 0..oz {
                out.set(i, j, k, grid.get(i * sx, j * sy, k * sz));
            }
        }
    }
    Ok(out)
}

pub const DEFAULT_WINDOW: (usize, usize, usize) = (3, 3, 5);
pub const DEFAULT_STRIDE: (usize, usize, usize) = (3, 3, 5);
pub const DEFAULT_PLUME_TAU: f64 = 0.05;

/// Smooth then decimate one fine-scale field with the default window/stride.
pub fn interpret(fine_sat: &Grid3<f64>) -> Result<Grid3<f64>> {
    interpret_with(fine_sat, DEFAULT_WINDOW, DEFAULT_STRIDE)
}

pub fn interpret_with(
    fine_sat: &Grid3<f64>,
    window: (usize, usize, usize),
    stride: (usize, usize, usize),
) -> Result<Grid3<f64>> {
    decimate(&mean_filter(fine_sat, window)?, stride)
}

/// Coarse output dims for given fine dims under the two-step rule.
pub fn coarse_dims(
    fine: (usize, usize, usize),
    window: (usize, usize, usize),
    stride: (usize, usize, usize),
) -> (usize, usize, usize) {
    let one = |n: usize, w: usize, s: usize| (n - w) / s + 1;
    (one(fine.0, window.0, stride.0), one(fine.1, window.1, stride.1), one(fine.2, window.2, stride.2))
}

/// Threshold coarse saturations into a binary plume mask (strictly greater).
pub fn plume_mask(coarse: &InterpretedSeismic, tau: f64) -> Result<PlumeMask> {
    if !(0.0..1.0).contains(&tau) {
        return Err(GhmError::Config(format!("plume threshold {tau} outside [0, 1)")));
    }
    let mask = coarse
        .sat
        .iter()
        .map(|g| g.map(|v| if v > tau { 1u8 } else { 0u8 }))
        .collect();
    Ok(PlumeMask { mask, steps: coarse.steps.clone() })
}

/// Threshold a single grid (shared by observation synthesis and the
/// surrogate prediction path).
pub fn threshold_grid(grid: &Grid3<f64>, tau: f64) -> Grid3<u8> {
    grid.map(|v| if v > tau { 1u8 } else { 0u8 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grf::derive_rng;
    use rand::Rng;

    fn random_grid(nx: usize, ny: usize, nz: usize, seed: u64) -> Grid3<f64> {
        let mut rng = derive_rng(seed, 0, 20);
        Grid3 {
            nx,
            ny,
            nz,
            data: (0..nx * ny * nz).map(|_| rng.gen_range(0.0..1.0)).collect(),
        }
    }

    #[test]
    fn filter_dims_at_paper_scale() {
        let fine = Grid3::filled(128, 128, 35, 0.25);
        let filtered = mean_filter(&fine, DEFAULT_WINDOW).unwrap();
        assert_eq!((filtered.nx, filtered.ny, filtered.nz), (126, 126, 31));
        let coarse = decimate(&filtered, DEFAULT_STRIDE).unwrap();
        assert_eq!((coarse.nx, coarse.ny, coarse.nz), (42, 42, 7));
    }

    #[test]
    fn desk_dims_follow_the_size_rules() {
        assert_eq!(coarse_dims((32, 32, 15), DEFAULT_WINDOW, DEFAULT_STRIDE), (10, 10, 3));
        let fine = Grid3::filled(32, 32, 15, 0.0);
        let mid = mean_filter(&fine, DEFAULT_WINDOW).unwrap();
        assert_eq!((mid.nx, mid.ny, mid.nz), (30, 30, 11));
        let coarse = decimate(&mid, DEFAULT_STRIDE).unwrap();
        assert_eq!((coarse.nx, coarse.ny, coarse.nz), (10, 10, 3));
    }

    #[test]
    fn averaging_preserves_constants() {
        let fine = Grid3::filled(9, 9, 10, 0.42);
        let out = interpret(&fine).unwrap();
        for v in &out.data {
            assert!((v - 0.42).abs() < 1e-15);
        }
    }

    #[test]
    fn block_mean_of_0_to_44_is_22() {
        let data: Vec<f64> = (0..45).map(|v| v as f64).collect();
        let fine = Grid3::from_vec(3, 3, 5, data).unwrap();
        let out = mean_filter(&fine, (3, 3, 5)).unwrap();
        assert_eq!(out.data.len(), 1);
        assert!((out.data[0] - 22.0).abs() < 1e-12);
    }

    #[test]
    fn unit_stride_decimation_is_identity() {
        let g = random_grid(5, 4, 6, 1);
        assert_eq!(decimate(&g, (1, 1, 1)).unwrap(), g);
    }

    #[test]
    fn length_31_stride_5_keeps_7_samples() {
        let data: Vec<f64> = (0..31).map(|v| v as f64).collect();
        let g = Grid3::from_vec(1, 1, 31, data).unwrap();
        let out = decimate(&g, (1, 1, 5)).unwrap();
        assert_eq!(out.nz, 7);
        assert_eq!(out.data, vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
    }

    #[test]
    fn grid_smaller_than_window_errors() {
        let g = Grid3::filled(2, 3, 4, 0.0);
        assert!(mean_filter(&g, (3, 3, 5)).is_err());
    }

    #[test]
    fn zero_field_interprets_to_zero() {
        let g = Grid3::filled(9, 9, 10, 0.0);
        let out = interpret(&g).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interpret_is_linear() {
        let f = random_grid(9, 9, 10, 2);
        let g = random_grid(9, 9, 10, 3);
        let (a, b) = (0.7, -1.3);
        let combo = Grid3 {
            nx: 9,
            ny: 9,
            nz: 10,
            data: f.data.iter().zip(&g.data).map(|(x, y)| a * x + b * y).collect(),
        };
        let lhs = interpret(&combo).unwrap();
        let rf = interpret(&f).unwrap();
        let rg = interpret(&g).unwrap();
        for i in 0..lhs.data.len() {
            let rhs = a * rf.data[i] + b * rg.data[i];
            assert!((lhs.data[i] - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn filter_output_bounded_by_input_range() {
        let g = random_grid(8, 8, 9, 4);
        let lo = g.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = g.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = mean_filter(&g, (3, 3, 5)).unwrap();
        for &v in &out.data {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn interpret_matches_brute_force_oracle() {
        for seed in 0..5 {
            let g = random_grid(9, 9, 10, 100 + seed);
            let fast = interpret(&g).unwrap();
            // brute force: average every window, then explicit index pick
            let filt = {
                let (ox, oy, oz) = (7, 7, 6);
                let mut out = Grid3::filled(ox, oy, oz, 0.0);
                for i in 0..ox {
                    for j in 0..oy {
                        for k in 0..oz {
                            let mut acc = 0.0;
                            for a in 0..3 {
                                for b in 0..3 {
                                    for c in 0..5 {
                                        acc += g.get(i + a, j + b, k + c);
                                    }
                                }
                            }
                            out.set(i, j, k, acc / 45.0);
                        }
                    }
                }
                out
            };
            for i in 0..fast.nx {
                for j in 0..fast.ny {
                    for k in 0..fast.nz {
                        let expect = filt.get(i * 3, j * 3, k * 5);
                        assert!((fast.get(i, j, k) - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn plume_threshold_is_strict() {
        let g = Grid3::from_vec(1, 1, 3, vec![0.04, 0.05, 0.051]).unwrap();
        let seis = InterpretedSeismic { sat: vec![g], steps: vec![30] };
        let mask = plume_mask(&seis, 0.05).unwrap();
        assert_eq!(mask.mask[0].data, vec![0, 0, 1]);
    }

    #[test]
    fn plume_mask_monotone_in_tau() {
        let g = random_grid(6, 6, 6, 5);
        let seis = InterpretedSeismic { sat: vec![g], steps: vec![30] };
        let lo = plume_mask(&seis, 0.2).unwrap();
        let hi = plume_mask(&seis, 0.4).unwrap();
        for (a, b) in lo.mask[0].data.iter().zip(&hi.mask[0].data) {
            // raising tau never turns a 0 into a 1
            assert!(b <= a);
        }
    }

    #[test]
    fn all_zeros_masks_to_zeros() {
        let g = Grid3::filled(4, 4, 4, 0.0);
        let seis = InterpretedSeismic { sat: vec![g], steps: vec![30] };
        let mask = plume_mask(&seis, 0.05).unwrap();
        assert!(mask.mask[0].data.iter().all(|&v| v == 0));
    }
}
