//! Jacobi-preconditioned conjugate gradients for the 7-point pressure system.

use crate::{GhmError, Result};

/// Symmetric 7-point operator on an (nx, ny, nz) grid, z fastest.
///
/// `cx[idx]` couples `idx` with its +x neighbor (zero on the last plane);
/// likewise `cy`, `cz`. The operator is `(A x)_i = diag_i x_i - sum c_f x_nbr`.
pub struct SevenPoint {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub diag: Vec<f64>,
    pub cx: Vec<f64>,
    pub cy: Vec<f64>,
    pub cz: Vec<f64>,
}

impl SevenPoint {
    pub fn zeros(nx: usize, ny: usize, nz: usize) -> Self {
        let n = nx * ny * nz;
        SevenPoint {
            nx,
            ny,
            nz,
            diag: vec![0.0; n],
            cx: vec![0.0; n],
            cy: vec![0.0; n],
            cz: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (ny, nz) = (self.ny, self.nz);
        let sx = ny * nz;
        for i in 0..x.len() {
            y[i] = self.diag[i] * x[i];
        }
        for i in 0..self.nx {
            for j in 0..ny {
                let base = (i * ny + j) * nz;
                for k in 0..nz {
                    let idx = base + k;
                    if i + 1 < self.nx {
                        let c = self.cx[idx];
                        if c != 0.0 {
                            y[idx] -= c * x[idx + sx];
                            y[idx + sx] -= c * x[idx];
                        }
                    }
                    if j + 1 < ny {
                        let c = self.cy[idx];
                        if c != 0.0 {
                            y[idx] -= c * x[idx + nz];
                            y[idx + nz] -= c * x[idx];
                        }
                    }
                    if k + 1 < nz {
                        let c = self.cz[idx];
                        if c != 0.0 {
                            y[idx] -= c * x[idx + 1];
                            y[idx + 1] -= c * x[idx];
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solve `A x = b` in place starting from the warm-start `x`.
pub fn cg_solve(
    op: &SevenPoint,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> Result<CgReport> {
    let n = op.n();
    let norm_b = dot(b, b).sqrt();
    if norm_b == 0.0 {
        x.fill(0.0);
        return Ok(CgReport { iterations: 0, relative_residual: 0.0 });
    }

    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    op.apply(x, &mut ax);
    for i in 0..n {
        r[i] = b[i] - ax[i];
    }
    let inv_diag: Vec<f64> = op
        .diag
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / norm_b;
    if res <= tol {
        return Ok(CgReport { iterations: 0, relative_residual: res });
    }

    let mut ap = vec![0.0; n];
    for iter in 1..=max_iters {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(GhmError::Numeric(format!(
                "pressure matrix lost positive definiteness (pAp = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / norm_b;
        if res <= tol {
            return Ok(CgReport { iterations: iter, relative_residual: res });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(GhmError::Numeric(format!(
        "pressure solve did not converge in {max_iters} iterations \
         (relative residual {res:.3e}, tolerance {tol:.1e})"
    )))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grf::derive_rng;
    use rand::Rng;

    fn laplacian(nx: usize, ny: usize, nz: usize) -> SevenPoint {
        let mut op = SevenPoint::zeros(nx, ny, nz);
        let n = op.n();
        for idx in 0..n {
            op.cx[idx] = 1.0;
            op.cy[idx] = 1.0;
            op.cz[idx] = 1.0;
        }
        // diag = sum of couplings + regularization so the system is SPD
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let idx = (i * ny + j) * nz + k;
                    let mut d = 0.1;
                    if i > 0 {
                        d += 1.0;
                    }
                    if i + 1 < nx {
                        d += 1.0;
                    }
                    if j > 0 {
                        d += 1.0;
                    }
                    if j + 1 < ny {
                        d += 1.0;
                    }
                    if k > 0 {
                        d += 1.0;
                    }
                    if k + 1 < nz {
                        d += 1.0;
                    }
                    op.diag[idx] = d;
                }
            }
        }
        op
    }

    #[test]
    fn solves_poisson_like_system() {
        let op = laplacian(6, 5, 4);
        let n = op.n();
        let mut rng = derive_rng(1, 0, 30);
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut b = vec![0.0; n];
        op.apply(&x_true, &mut b);
        let mut x = vec![0.0; n];
        let report = cg_solve(&op, &b, &mut x, 1e-12, 1000).unwrap();
        assert!(report.relative_residual <= 1e-12);
        for (a, e) in x.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn reports_nonconvergence() {
        let op = laplacian(6, 5, 4);
        let n = op.n();
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let err = cg_solve(&op, &b, &mut x, 1e-14, 2).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("did not converge"), "{msg}");
        assert!(msg.contains("residual"), "{msg}");
    }
}
