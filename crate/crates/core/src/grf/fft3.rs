//! Minimal 3D complex FFT on top of rustfft's 1D transforms.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// In-place unnormalized 3D FFT of a row-major (x, y, z) buffer, z fastest.
pub fn fft3(data: &mut [Complex<f64>], mx: usize, my: usize, mz: usize, dir: Direction) {
    assert_eq!(data.len(), mx * my * mz);
    let mut planner = FftPlanner::new();
    let plan = |len: usize, p: &mut FftPlanner<f64>| match dir {
        Direction::Forward => p.plan_fft_forward(len),
        Direction::Inverse => p.plan_fft_inverse(len),
    };

    // z-axis: lines are contiguous.
    let fft_z = plan(mz, &mut planner);
    let mut scratch = vec![Complex::new(0.0, 0.0); fft_z.get_inplace_scratch_len()];
    fft_z.process_with_scratch(data, &mut scratch);

    // y-axis: stride mz within each x-slab.
    let fft_y = plan(my, &mut planner);
    scratch.resize(fft_y.get_inplace_scratch_len().max(1), Complex::new(0.0, 0.0));
    let mut line = vec![Complex::new(0.0, 0.0); my];
    for x in 0..mx {
        for z in 0..mz {
            let base = x * my * mz + z;
            for y in 0..my {
                line[y] = data[base + y * mz];
            }
            fft_y.process_with_scratch(&mut line, &mut scratch);
            for y in 0..my {
                data[base + y * mz] = line[y];
            }
        }
    }

    // x-axis: stride my*mz.
    let fft_x = plan(mx, &mut planner);
    scratch.resize(fft_x.get_inplace_scratch_len().max(1), Complex::new(0.0, 0.0));
    let mut line = vec![Complex::new(0.0, 0.0); mx];
    for y in 0..my {
        for z in 0..mz {
            let base = y * mz + z;
            for x in 0..mx {
                line[x] = data[base + x * my * mz];
            }
            fft_x.process_with_scratch(&mut line, &mut scratch);
            for x in 0..mx {
                data[base + x * my * mz] = line[x];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_forward_recovers_input() {
        let (mx, my, mz) = (4, 6, 5);
        let n = mx * my * mz;
        let orig: Vec<Complex<f64>> = (0..n)
            .map(|i| Complex::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = orig.clone();
        fft3(&mut buf, mx, my, mz, Direction::Forward);
        fft3(&mut buf, mx, my, mz, Direction::Inverse);
        for (a, b) in buf.iter().zip(&orig) {
            let back = a / n as f64;
            assert!((back - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft_on_tiny_grid() {
        let (mx, my, mz) = (2, 3, 2);
        let n = mx * my * mz;
        let input: Vec<Complex<f64>> =
            (0..n).map(|i| Complex::new(i as f64 + 1.0, -(i as f64) * 0.5)).collect();
        let mut fast = input.clone();
        fft3(&mut fast, mx, my, mz, Direction::Forward);

        use std::f64::consts::PI;
        for kx in 0..mx {
            for ky in 0..my {
                for kz in 0..mz {
                    let mut acc = Complex::new(0.0, 0.0);
                    for x in 0..mx {
                        for y in 0..my {
                            for z in 0..mz {
                                let phase = -2.0
                                    * PI
                                    * (kx * x) as f64
                                    / mx as f64
                                    - 2.0 * PI * (ky * y) as f64 / my as f64
                                    - 2.0 * PI * (kz * z) as f64 / mz as f64;
                                let w = Complex::new(phase.cos(), phase.sin());
                                acc += input[(x * my + y) * mz + z] * w;
                            }
                        }
                    }
                    let got = fast[(kx * my + ky) * mz + kz];
                    assert!((acc - got).norm() < 1e-10, "mismatch at ({kx},{ky},{kz})");
                }
            }
        }
    }
}
