//! Convolution kernels (cross-correlation convention) and activations.
//!
//! All spatial work is rank-3 internally; rank-1 layers are lifted to
//! [C, 1, 1, L]. Reductions accumulate in f64 regardless of storage type.

use super::layers::{conv_out_size, conv_transpose_out_size, ConvGeom};
use super::tensor::{Scalar, Tensor};
use crate::Result;

/// Normalized rank-3 geometry with resolved input/output spatial dims.
#[derive(Debug, Clone)]
pub struct Geom3 {
    pub ic: usize,
    pub oc: usize,
    pub k: [usize; 3],
    pub s: [usize; 3],
    pub p: [usize; 3],
    pub din: [usize; 3],
    pub dout: [usize; 3],
}

fn lift3(v: &[usize], fill: usize) -> [usize; 3] {
    match v.len() {
        1 => [fill, fill, v[0]],
        3 => [v[0], v[1], v[2]],
        _ => unreachable!("rank checked by ConvGeom::validate"),
    }
}

impl Geom3 {
    pub fn resolve(g: &ConvGeom, in_spatial: &[usize], transpose: bool) -> Result<Geom3> {
        g.validate()?;
        let k = lift3(&g.kernel, 1);
        let s = lift3(&g.stride, 1);
        let p = lift3(&g.padding, 0);
        let din = lift3(in_spatial, 1);
        let mut dout = [0usize; 3];
        for a in 0..3 {
            dout[a] = if transpose {
                conv_transpose_out_size(din[a], k[a], s[a], p[a], a)?
            } else {
                conv_out_size(din[a], k[a], s[a], p[a], a)?
            };
        }
        Ok(Geom3 { ic: g.in_ch, oc: g.out_ch, k, s, p, din, dout })
    }

    pub fn out_shape(&self, rank: usize) -> Vec<usize> {
        if rank == 1 {
            vec![self.oc, self.dout[2]]
        } else {
            vec![self.oc, self.dout[0], self.dout[1], self.dout[2]]
        }
    }
}

/// Valid kernel index range so that `i0 + k` stays inside `[0, n)`.
#[inline]
fn krange(i0: isize, n: usize, klen: usize) -> (usize, usize) {
    let lo = if i0 < 0 { (-i0) as usize } else { 0 };
    let hi = klen.min((n as isize - i0).max(0) as usize);
    (lo, hi.max(lo))
}


#[inline]
fn widen<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

pub fn conv_forward<T: Scalar>(x: &[T], w: &[T], b: &[T], g: &Geom3) -> Vec<T> {
    // widen once so the hot loops run plain f64 arithmetic
    let (x, w) = (widen(x), widen(w));
    let [ix_n, iy_n, iz_n] = g.din;
    let [ox_n, oy_n, oz_n] = g.dout;
    let [kx_n, ky_n, kz_n] = g.k;
    let (sx, sy, sz) = (g.s[0], g.s[1], g.s[2]);
    let (px, py, pz) = (g.p[0], g.p[1], g.p[2]);
    let mut out = vec![0.0f64; g.oc * ox_n * oy_n * oz_n];
    let mut row = vec![0.0f64; oz_n];
    for oc in 0..g.oc {
        let bias = b[oc].as_f64();
        for ox in 0..ox_n {
            let ix0 = (ox * sx) as isize - px as isize;
            let (kx_lo, kx_hi) = krange(ix0, ix_n, kx_n);
            for oy in 0..oy_n {
                let iy0 = (oy * sy) as isize - py as isize;
                let (ky_lo, ky_hi) = krange(iy0, iy_n, ky_n);
                row.fill(bias);
                for ic in 0..g.ic {
                    for kx in kx_lo..kx_hi {
                        let ix = (ix0 + kx as isize) as usize;
                        for ky in ky_lo..ky_hi {
                            let iy = (iy0 + ky as isize) as usize;
                            let xbase = (((ic * ix_n + ix) * iy_n + iy) * iz_n) as isize;
                            let wbase = (((oc * g.ic + ic) * kx_n + kx) * ky_n + ky) * kz_n;
                            for kz in 0..kz_n {
                                let wv = w[wbase + kz];
                                let (oz_lo, oz_hi) = out_z_range(kz, pz, sz, iz_n, oz_n);
                                let shift = xbase + kz as isize - pz as isize;
                                // contiguous in oz when the z-stride is 1
                                for oz in oz_lo..oz_hi {
                                    row[oz] += wv * x[(shift + (oz * sz) as isize) as usize];
                                }
                            }
                        }
                    }
                }
                let obase = ((oc * ox_n + ox) * oy_n + oy) * oz_n;
                out[obase..obase + oz_n].copy_from_slice(&row);
            }
        }
    }
    out.into_iter().map(T::from_f64).collect()
}

/// Output-z indices hit by kernel offset `kz`: `0 <= oz*s + kz - p < n_in`.
#[inline]
fn out_z_range(kz: usize, p: usize, s: usize, n_in: usize, n_out: usize) -> (usize, usize) {
    let lo = if p > kz { (p - kz).div_ceil(s) } else { 0 };
    let hi_num = n_in as isize - 1 + p as isize - kz as isize;
    if hi_num < 0 {
        return (0, 0);
    }
    let hi = (hi_num as usize / s + 1).min(n_out);
    (lo.min(hi), hi)
}

/// Gradients of a convolution: (gx, gw, gb).
pub fn conv_backward<T: Scalar>(
    x: &[T],
    w: &[T],
    gy: &[T],
    g: &Geom3,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (x, w, gy) = (widen(x), widen(w), widen(gy));
    let [ix_n, iy_n, iz_n] = g.din;
    let [ox_n, oy_n, oz_n] = g.dout;
    let [kx_n, ky_n, kz_n] = g.k;
    let (sx, sy, sz) = (g.s[0], g.s[1], g.s[2]);
    let (px, py, pz) = (g.p[0], g.p[1], g.p[2]);
    let mut gx = vec![0.0f64; g.ic * ix_n * iy_n * iz_n];
    let mut gw = vec![0.0f64; w.len()];
    let mut gb = vec![0.0f64; g.oc];
    for oc in 0..g.oc {
        for ox in 0..ox_n {
            let ix0 = (ox * sx) as isize - px as isize;
            let (kx_lo, kx_hi) = krange(ix0, ix_n, kx_n);
            for oy in 0..oy_n {
                let iy0 = (oy * sy) as isize - py as isize;
                let (ky_lo, ky_hi) = krange(iy0, iy_n, ky_n);
                let orow = ((oc * ox_n + ox) * oy_n + oy) * oz_n;
                let gout = &gy[orow..orow + oz_n];
                gb[oc] += gout.iter().sum::<f64>();
                for ic in 0..g.ic {
                    for kx in kx_lo..kx_hi {
                        let ix = (ix0 + kx as isize) as usize;
                        for ky in ky_lo..ky_hi {
                            let iy = (iy0 + ky as isize) as usize;
                            let xbase = (((ic * ix_n + ix) * iy_n + iy) * iz_n) as isize;
                            let wbase = (((oc * g.ic + ic) * kx_n + kx) * ky_n + ky) * kz_n;
                            for kz in 0..kz_n {
                                let wv = w[wbase + kz];
                                let (oz_lo, oz_hi) = out_z_range(kz, pz, sz, iz_n, oz_n);
                                let shift = xbase + kz as isize - pz as isize;
                                let mut wacc = 0.0;
                                for oz in oz_lo..oz_hi {
                                    let xi = (shift + (oz * sz) as isize) as usize;
                                    gx[xi] += wv * gout[oz];
                                    wacc += x[xi] * gout[oz];
                                }
                                gw[wbase + kz] += wacc;
                            }
                        }
                    }
                }
            }
        }
    }
    (
        gx.into_iter().map(T::from_f64).collect(),
        gw.into_iter().map(T::from_f64).collect(),
        gb.into_iter().map(T::from_f64).collect(),
    )
}

pub fn conv_transpose_forward<T: Scalar>(x: &[T], w: &[T], b: &[T], g: &Geom3) -> Vec<T> {
    let (x, w) = (widen(x), widen(w));
    let [ix_n, iy_n, iz_n] = g.din;
    let [ox_n, oy_n, oz_n] = g.dout;
    let [kx_n, ky_n, kz_n] = g.k;
    let mut out = vec![0.0f64; g.oc * ox_n * oy_n * oz_n];
    for oc in 0..g.oc {
        let bias = b[oc].as_f64();
        let base = oc * ox_n * oy_n * oz_n;
        for v in &mut out[base..base + ox_n * oy_n * oz_n] {
            *v = bias;
        }
    }
    for ic in 0..g.ic {
        for ix in 0..ix_n {
            let ox0 = (ix * g.s[0]) as isize - g.p[0] as isize;
            let (kx_lo, kx_hi) = krange(ox0, ox_n, kx_n);
            for iy in 0..iy_n {
                let oy0 = (iy * g.s[1]) as isize - g.p[1] as isize;
                let (ky_lo, ky_hi) = krange(oy0, oy_n, ky_n);
                for iz in 0..iz_n {
                    let oz0 = (iz * g.s[2]) as isize - g.p[2] as isize;
                    let (kz_lo, kz_hi) = krange(oz0, oz_n, kz_n);
                    let v = x[((ic * ix_n + ix) * iy_n + iy) * iz_n + iz];
                    if v == 0.0 {
                        continue;
                    }
                    for oc in 0..g.oc {
                        for kx in kx_lo..kx_hi {
                            let ox = (ox0 + kx as isize) as usize;
                            for ky in ky_lo..ky_hi {
                                let oy = (oy0 + ky as isize) as usize;
                                let obase =
                                    ((oc * ox_n + ox) * oy_n + oy) * oz_n + (oz0 + kz_lo as isize) as usize;
                                let wbase =
                                    (((ic * g.oc + oc) * kx_n + kx) * ky_n + ky) * kz_n + kz_lo;
                                for t in 0..kz_hi - kz_lo {
                                    out[obase + t] += v * w[wbase + t];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.into_iter().map(T::from_f64).collect()
}

pub fn conv_transpose_backward<T: Scalar>(
    x: &[T],
    w: &[T],
    gy: &[T],
    g: &Geom3,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (x, w, gy) = (widen(x), widen(w), widen(gy));
    let [ix_n, iy_n, iz_n] = g.din;
    let [ox_n, oy_n, oz_n] = g.dout;
    let [kx_n, ky_n, kz_n] = g.k;
    let mut gx = vec![0.0f64; x.len()];
    let mut gw = vec![0.0f64; w.len()];
    let mut gb = vec![0.0f64; g.oc];
    for oc in 0..g.oc {
        let base = oc * ox_n * oy_n * oz_n;
        gb[oc] = gy[base..base + ox_n * oy_n * oz_n].iter().sum();
    }
    for ic in 0..g.ic {
        for ix in 0..ix_n {
            let ox0 = (ix * g.s[0]) as isize - g.p[0] as isize;
            let (kx_lo, kx_hi) = krange(ox0, ox_n, kx_n);
            for iy in 0..iy_n {
                let oy0 = (iy * g.s[1]) as isize - g.p[1] as isize;
                let (ky_lo, ky_hi) = krange(oy0, oy_n, ky_n);
                for iz in 0..iz_n {
                    let oz0 = (iz * g.s[2]) as isize - g.p[2] as isize;
                    let (kz_lo, kz_hi) = krange(oz0, oz_n, kz_n);
                    let xv = x[((ic * ix_n + ix) * iy_n + iy) * iz_n + iz];
                    let mut acc = 0.0f64;
                    for oc in 0..g.oc {
                        for kx in kx_lo..kx_hi {
                            let ox = (ox0 + kx as isize) as usize;
                            for ky in ky_lo..ky_hi {
                                let oy = (oy0 + ky as isize) as usize;
                                let obase =
                                    ((oc * ox_n + ox) * oy_n + oy) * oz_n + (oz0 + kz_lo as isize) as usize;
                                let wbase =
                                    (((ic * g.oc + oc) * kx_n + kx) * ky_n + ky) * kz_n + kz_lo;
                                for t in 0..kz_hi - kz_lo {
                                    let gv = gy[obase + t];
                                    acc += gv * w[wbase + t];
                                    gw[wbase + t] += gv * xv;
                                }
                            }
                        }
                    }
                    gx[((ic * ix_n + ix) * iy_n + iy) * iz_n + iz] = acc;
                }
            }
        }
    }
    (
        gx.into_iter().map(T::from_f64).collect(),
        gw.into_iter().map(T::from_f64).collect(),
        gb.into_iter().map(T::from_f64).collect(),
    )
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// swish(x) = x * sigmoid(x)
pub fn swish<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| {
        let f = v.as_f64();
        T::from_f64(f * sigmoid(f))
    })
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn swish_backward<T: Scalar>(x: &[T], gy: &[T]) -> Vec<T> {
    x.iter()
        .zip(gy)
        .map(|(&xi, &gi)| {
            let f = xi.as_f64();
            let s = sigmoid(f);
            T::from_f64(gi.as_f64() * (s + f * s * (1.0 - s)))
        })
        .collect()
}

pub fn relu_backward<T: Scalar>(x: &[T], gy: &[T]) -> Vec<T> {
    x.iter().zip(gy).map(|(&xi, &gi)| if xi > T::zero() { gi } else { T::zero() }).collect()
}
