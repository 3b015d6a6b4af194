//! Truncated-SVD parameterization of the training realizations.
//!
//! The basis is scaled so that a standard-normal latent vector reproduces
//! the sample covariance of the training set at rank `n_d`:
//! `phi = U_d S_d / sqrt(N - 1)` and `field = phi * xi + ybar`.

use crate::io::{Ghm1File, Section};
use crate::{GhmError, Result};
use rayon::prelude::*;
use std::path::Path;

use super::FieldMatrix;

/// Relative singular-value floor; anything below is treated as numerical rank loss.
const RANK_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    /// Column-major basis, `n_cells x n_d`; column i is `u_i * sigma_i / sqrt(N-1)`.
    phi: Vec<f64>,
    pub ybar: Vec<f64>,
    /// All retained singular values (descending), for energy accounting.
    pub singular_values: Vec<f64>,
    pub n_cells: usize,
    pub n_d: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    pub xi: Vec<f64>,
}

impl LatentVector {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(GhmError::Numeric("latent vector has non-finite entries".into()));
        }
        Ok(LatentVector { xi })
    }

    pub fn zeros(n_d: usize) -> Self {
        LatentVector { xi: vec![0.0; n_d] }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }
}

impl PcaBasis {
    #[inline]
    pub fn basis_col(&self, i: usize) -> &[f64] {
        &self.phi[i * self.n_cells..(i + 1) * self.n_cells]
    }

    /// Column means of the basis, used for cheap derived statistics
    /// (mean of a reconstructed field without reconstructing it).
    pub fn column_means(&self) -> (Vec<f64>, f64) {
        let inv = 1.0 / self.n_cells as f64;
        let phi_means =
            (0..self.n_d).map(|i| self.basis_col(i).iter().sum::<f64>() * inv).collect();
        let ybar_mean = self.ybar.iter().sum::<f64>() * inv;
        (phi_means, ybar_mean)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = Ghm1File::new();
        // Stored as [n_d, n_cells] row-major: each row is one basis column.
        f.insert("phi", Section::f64(vec![self.n_d, self.n_cells], self.phi.clone()));
        f.insert("ybar", Section::f64(vec![self.n_cells], self.ybar.clone()));
        f.insert(
            "singular_values",
            Section::f64(vec![self.singular_values.len()], self.singular_values.clone()),
        );
        f.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = Ghm1File::read_from(path)?;
        let phi_sec = f.get("phi")?;
        if phi_sec.shape.len() != 2 {
            return Err(GhmError::Format("phi section must be 2-D".into()));
        }
        let (n_d, n_cells) = (phi_sec.shape[0], phi_sec.shape[1]);
        let ybar = f.get("ybar")?.as_f64()?.to_vec();
        if ybar.len() != n_cells {
            return Err(GhmError::Format("ybar length mismatch".into()));
        }
        Ok(PcaBasis {
            phi: phi_sec.as_f64()?.to_vec(),
            ybar,
            singular_values: f.get("singular_values")?.as_f64()?.to_vec(),
            n_cells,
            n_d,
        })
    }
}

/// Build the PCA basis from training realizations (columns of `data`).
pub fn build_pca(data: &FieldMatrix, n_d: usize) -> Result<PcaBasis> {
    let n = data.n_fields;
    let n_cells = data.n_cells;
    if n < 2 {
        return Err(GhmError::Config("PCA needs at least 2 realizations".into()));
    }
    if n_d < 1 || n_d > n - 1 {
        return Err(GhmError::Config(format!(
            "n_d = {n_d} out of range; must satisfy 1 <= n_d <= N-1 = {}",
            n - 1
        )));
    }

    let mut ybar = vec![0.0; n_cells];
    for c in 0..n {
        for (acc, v) in ybar.iter_mut().zip(data.col(c)) {
            *acc += v;
        }
    }
    let inv_n = 1.0 / n as f64;
    for v in &mut ybar {
        *v *= inv_n;
    }

    // Gram matrix of the centered columns, N x N.
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|c| data.col(c).iter().zip(&ybar).map(|(v, m)| v - m).collect())
        .collect();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j < i {
                        0.0
                    } else {
                        centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum()
                    }
                })
                .collect()
        })
        .collect();
    for i in 0..n {
        for j in i..n {
            gram[(i, j)] = rows[i][j];
            gram[(j, i)] = rows[i][j];
        }
    }

    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let sigma_max = eig.eigenvalues[order[0]].max(0.0).sqrt();
    let mut singular_values = Vec::new();
    let mut kept = Vec::new();
    for &idx in &order {
        let sigma = eig.eigenvalues[idx].max(0.0).sqrt();
        if sigma > RANK_GUARD * sigma_max {
            singular_values.push(sigma);
            kept.push(idx);
        }
    }
    if n_d > kept.len() {
        return Err(GhmError::Numeric(format!(
            "requested n_d = {n_d} exceeds numerical rank {}",
            kept.len()
        )));
    }

    // phi_i = X v_i / sqrt(N-1); the (N-1) scaling makes xi ~ N(0, I) the prior.
    let scale = 1.0 / ((n - 1) as f64).sqrt();
    let mut phi = vec![0.0; n_cells * n_d];
    phi.par_chunks_mut(n_cells).enumerate().for_each(|(d, col)| {
        let idx = kept[d];
        for (c, centered_col) in centered.iter().enumerate() {
            let w = eig.eigenvectors[(c, idx)] * scale;
            if w != 0.0 {
                for (o, v) in col.iter_mut().zip(centered_col) {
                    *o += w * v;
                }
            }
        }
    });

    Ok(PcaBasis { phi, ybar, singular_values, n_cells, n_d })
}

/// Reconstruct a field from latent coefficients: `phi * xi + ybar`.
pub fn pca_reconstruct(basis: &PcaBasis, xi: &LatentVector) -> Result<Vec<f64>> {
    if xi.len() != basis.n_d {
        return Err(GhmError::Shape(format!(
            "latent dimension {} does not match basis n_d {}",
            xi.len(),
            basis.n_d
        )));
    }
    let mut out = basis.ybar.clone();
    for (i, &w) in xi.xi.iter().enumerate() {
        if w != 0.0 {
            for (o, v) in out.iter_mut().zip(basis.basis_col(i)) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

/// Project a field onto the basis (least squares via column orthogonality).
pub fn pca_project(basis: &PcaBasis, field: &[f64]) -> Result<LatentVector> {
    if field.len() != basis.n_cells {
        return Err(GhmError::Shape("field length does not match basis".into()));
    }
    let mut xi = Vec::with_capacity(basis.n_d);
    for i in 0..basis.n_d {
        let col = basis.basis_col(i);
        let mut dot = 0.0;
        let mut nrm = 0.0;
        for (c, (f, m)) in col.iter().zip(field.iter().zip(&basis.ybar)) {
            dot += c * (f - m);
            nrm += c * c;
        }
        xi.push(if nrm > 0.0 { dot / nrm } else { 0.0 });
    }
    LatentVector::new(xi)
}

/// Fraction of total squared singular value mass captured by the first `n_d`.
pub fn energy_fraction(singular_values: &[f64], n_d: usize) -> Result<f64> {
    if singular_values.is_empty() {
        return Err(GhmError::Config("empty singular value spectrum".into()));
    }
    if n_d < 1 || n_d > singular_values.len() {
        return Err(GhmError::Config(format!(
            "n_d = {n_d} out of range 1..={}",
            singular_values.len()
        )));
    }
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let head: f64 = singular_values[..n_d].iter().map(|s| s * s).sum();
    Ok(head / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grf::derive_rng;
    use rand::Rng;

    fn random_data(n_cells: usize, n: usize, seed: u64) -> FieldMatrix {
        let mut rng = derive_rng(seed, 0, 1);
        let cols = (0..n)
            .map(|_| (0..n_cells).map(|_| rng.sample(rand_distr::StandardNormal)).collect())
            .collect();
        FieldMatrix::from_columns(n_cells, cols).unwrap()
    }

    #[test]
    fn energy_fraction_examples() {
        assert!((energy_fraction(&[2.0, 2.0, 2.0, 2.0], 2).unwrap() - 0.5).abs() < 1e-15);
        assert!((energy_fraction(&[4.0, 3.0], 1).unwrap() - 0.64).abs() < 1e-15);
        assert!((energy_fraction(&[4.0, 3.0], 2).unwrap() - 1.0).abs() < 1e-15);
        assert!(energy_fraction(&[], 1).is_err());
        assert!(energy_fraction(&[1.0], 2).is_err());
    }

    #[test]
    fn full_rank_energy_is_one() {
        let data = random_data(40, 9, 3);
        let basis = build_pca(&data, 8).unwrap();
        let ef = energy_fraction(&basis.singular_values, basis.singular_values.len()).unwrap();
        assert!((ef - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_latent_returns_mean_field() {
        let data = random_data(30, 6, 4);
        let basis = build_pca(&data, 5).unwrap();
        let rec = pca_reconstruct(&basis, &LatentVector::zeros(5)).unwrap();
        assert_eq!(rec, basis.ybar);
    }

    #[test]
    fn reconstruction_is_affine_linear() {
        let data = random_data(25, 7, 5);
        let basis = build_pca(&data, 6).unwrap();
        let mut rng = derive_rng(9, 0, 2);
        let xi1 = LatentVector::new((0..6).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let xi2 = LatentVector::new((0..6).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let xi_sum =
            LatentVector::new(xi1.xi.iter().zip(&xi2.xi).map(|(a, b)| a + b).collect()).unwrap();
        let r1 = pca_reconstruct(&basis, &xi1).unwrap();
        let r2 = pca_reconstruct(&basis, &xi2).unwrap();
        let rs = pca_reconstruct(&basis, &xi_sum).unwrap();
        for i in 0..25 {
            let lhs = rs[i] - basis.ybar[i];
            let rhs = (r1[i] - basis.ybar[i]) + (r2[i] - basis.ybar[i]);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_matvec_oracle() {
        let data = random_data(18, 5, 6);
        let basis = build_pca(&data, 4).unwrap();
        let mut rng = derive_rng(11, 0, 3);
        let xi = LatentVector::new((0..4).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap();
        let fast = pca_reconstruct(&basis, &xi).unwrap();
        // naive triple-indexed multiply
        for cell in 0..18 {
            let mut acc = basis.ybar[cell];
            for d in 0..4 {
                acc += basis.basis_col(d)[cell] * xi.xi[d];
            }
            assert!((acc - fast[cell]).abs() < 1e-12);
        }
    }

    #[test]
    fn training_column_reconstructs_at_full_rank() {
        let data = random_data(40, 8, 7);
        let basis = build_pca(&data, 7).unwrap();
        for c in 0..8 {
            let xi = pca_project(&basis, data.col(c)).unwrap();
            let rec = pca_reconstruct(&basis, &xi).unwrap();
            let num: f64 =
                rec.iter().zip(data.col(c)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let den: f64 = data.col(c).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(num / den < 1e-8, "column {c}: relative error {}", num / den);
        }
    }

    #[test]
    fn basis_columns_are_orthogonal_with_expected_norms() {
        let data = random_data(50, 10, 8);
        let basis = build_pca(&data, 9).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let dot: f64 =
                    basis.basis_col(i).iter().zip(basis.basis_col(j)).map(|(a, b)| a * b).sum();
                if i == j {
                    let expected = basis.singular_values[i].powi(2) / 9.0;
                    assert!(
                        (dot - expected).abs() <= 1e-8 * expected.max(1.0),
                        "norm mismatch at {i}: {dot} vs {expected}"
                    );
                } else {
                    let scale = (basis.singular_values[i] * basis.singular_values[j]) / 9.0;
                    assert!(dot.abs() <= 1e-8 * scale.max(1.0), "off-diagonal {i},{j}: {dot}");
                }
            }
        }
    }

    #[test]
    fn nd_out_of_range_is_rejected() {
        let data = random_data(10, 4, 9);
        assert!(build_pca(&data, 4).is_err());
        assert!(build_pca(&data, 0).is_err());
        assert!(build_pca(&data, 3).is_ok());
    }

    #[test]
    fn latent_dim_mismatch_is_rejected() {
        let data = random_data(10, 4, 10);
        let basis = build_pca(&data, 3).unwrap();
        assert!(pca_reconstruct(&basis, &LatentVector::zeros(2)).is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = std::env::temp_dir().join(format!("ghm_pca_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("basis.ghm1");
        let data = random_data(12, 5, 11);
        let basis = build_pca(&data, 4).unwrap();
        basis.save(&path).unwrap();
        let back = PcaBasis::load(&path).unwrap();
        assert_eq!(back, basis);
        std::fs::remove_dir_all(&dir).ok();
    }
}
