//! k-means clustering with k-medoid representatives.

use crate::grf::derive_rng;
use crate::{GhmError, Result};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeSet {
    /// Index of the medoid field of each cluster.
    pub medoid_indices: Vec<usize>,
    /// Cluster id per input field.
    pub assignments: Vec<usize>,
    /// Summed distance from each medoid to its cluster members.
    pub within_cluster_distances: Vec<f64>,
    /// Set when a cluster came out empty (k exceeds the distinct fields).
    pub degenerate: bool,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ initialization followed by Lloyd iterations (at most
/// 100), then the per-cluster medoid: the member minimizing summed
/// Euclidean distance to its cluster.
pub fn representative_fields(fields: &[Vec<f64>], k: usize, seed: u64) -> Result<RepresentativeSet> {
    if k < 1 || fields.len() < k {
        return Err(GhmError::Config(format!(
            "need at least k = {k} fields, got {}",
            fields.len()
        )));
    }
    let dim = fields[0].len();
    if fields.iter().any(|f| f.len() != dim) {
        return Err(GhmError::Shape("fields have inconsistent lengths".into()));
    }
    let mut rng = derive_rng(seed, 0, 0x4b4d4e53);

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(fields[rng.gen_range(0..fields.len())].clone());
    while centroids.len() < k {
        let d2: Vec<f64> = fields
            .iter()
            .map(|f| centroids.iter().map(|c| sq_dist(f, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            // all remaining points coincide with a centroid
            centroids.push(fields[rng.gen_range(0..fields.len())].clone());
            continue;
        }
        let mut target = rng.gen_range(0.0..total);
        let mut pick = 0;
        for (i, &w) in d2.iter().enumerate() {
            if target < w {
                pick = i;
                break;
            }
            target -= w;
            pick = i;
        }
        centroids.push(fields[pick].clone());
    }

    let mut assignments = vec![0usize; fields.len()];
    let mut last_objective = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..100 {
        iterations = it + 1;
        let mut objective = 0.0;
        for (i, f) in fields.iter().enumerate() {
            let (best, bd) = centroids
                .iter()
                .enumerate()
                .map(|(c, cen)| (c, sq_dist(f, cen)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assignments[i] = best;
            objective += bd;
        }
        debug_assert!(objective <= last_objective + 1e-9 * objective.abs().max(1.0));

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, f) in fields.iter().enumerate() {
            counts[assignments[i]] += 1;
            for (s, v) in sums[assignments[i]].iter_mut().zip(f) {
                *s += v;
            }
        }
        let mut moved = false;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let new: Vec<f64> = sums[c].iter().map(|s| s * inv).collect();
            if new != centroids[c] {
                moved = true;
                centroids[c] = new;
            }
        }
        if !moved && objective >= last_objective {
            break;
        }
        last_objective = objective;
        if !moved {
            break;
        }
    }

    // medoids: member with minimal summed distance to its cluster
    let mut medoid_indices = Vec::with_capacity(k);
    let mut within = Vec::with_capacity(k);
    let mut degenerate = false;
    for c in 0..k {
        let members: Vec<usize> =
            (0..fields.len()).filter(|&i| assignments[i] == c).collect();
        if members.is_empty() {
            degenerate = true;
            medoid_indices.push(usize::MAX);
            within.push(f64::NAN);
            continue;
        }
        let (best, dist) = members
            .iter()
            .map(|&i| {
                let d: f64 =
                    members.iter().map(|&j| sq_dist(&fields[i], &fields[j]).sqrt()).sum();
                (i, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        medoid_indices.push(best);
        within.push(dist);
    }

    Ok(RepresentativeSet {
        medoid_indices,
        assignments,
        within_cluster_distances: within,
        degenerate,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_of_identical_fields() {
        let fields = vec![vec![0.3, 0.4]; 5];
        let rep = representative_fields(&fields, 1, 1).unwrap();
        assert_eq!(rep.medoid_indices.len(), 1);
        assert_eq!(fields[rep.medoid_indices[0]], vec![0.3, 0.4]);
        assert!(!rep.degenerate);
    }

    #[test]
    fn medoids_are_members() {
        let mut rng = derive_rng(3, 0, 91);
        let fields: Vec<Vec<f64>> =
            (0..30).map(|_| (0..8).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let rep = representative_fields(&fields, 4, 2).unwrap();
        for (c, &m) in rep.medoid_indices.iter().enumerate() {
            assert!(m < fields.len());
            assert_eq!(rep.assignments[m], c);
        }
    }

    #[test]
    fn two_obvious_blobs_match_exhaustive_medoids() {
        // two tight blobs; brute-force the optimal 2-medoid answer
        let fields = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.1],
            vec![5.0, 5.0],
            vec![5.1, 5.0],
            vec![5.0, 5.1],
        ];
        let rep = representative_fields(&fields, 2, 3).unwrap();
        // each blob is one cluster
        assert_eq!(rep.assignments[0], rep.assignments[1]);
        assert_eq!(rep.assignments[1], rep.assignments[2]);
        assert_eq!(rep.assignments[3], rep.assignments[4]);
        assert_eq!(rep.assignments[4], rep.assignments[5]);
        assert_ne!(rep.assignments[0], rep.assignments[3]);
        // oracle: medoid of each blob minimizes within-blob distance sums
        let blob_medoid = |members: &[usize]| -> usize {
            *members
                .iter()
                .min_by(|&&i, &&j| {
                    let di: f64 =
                        members.iter().map(|&m| sq_dist(&fields[i], &fields[m]).sqrt()).sum();
                    let dj: f64 =
                        members.iter().map(|&m| sq_dist(&fields[j], &fields[m]).sqrt()).sum();
                    di.total_cmp(&dj)
                })
                .unwrap()
        };
        let expected_a = blob_medoid(&[0, 1, 2]);
        let expected_b = blob_medoid(&[3, 4, 5]);
        assert!(rep.medoid_indices.contains(&expected_a));
        assert!(rep.medoid_indices.contains(&expected_b));
    }

    #[test]
    fn k_larger_than_distinct_fields_reports_degenerate() {
        let fields = vec![vec![1.0, 1.0]; 4];
        let rep = representative_fields(&fields, 3, 4).unwrap();
        assert!(rep.degenerate);
    }

    #[test]
    fn too_few_fields_is_an_error() {
        let fields = vec![vec![1.0]];
        assert!(representative_fields(&fields, 2, 5).is_err());
    }
}
