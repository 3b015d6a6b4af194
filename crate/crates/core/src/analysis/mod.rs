//! Posterior and surrogate diagnostics: thresholded saturation MAE,
//! metaparameter histograms with uncertainty-reduction statistics,
//! representative-plume clustering and per-step surrogate error stats.

pub mod cluster;
pub mod svg;

pub use cluster::{representative_fields, RepresentativeSet};

use crate::geomodel::{Metaparameters, PriorRanges};
use crate::grf::derive_rng;
use crate::hm::AcceptedSample;
use crate::{GhmError, Result};
use serde::{Deserialize, Serialize};

/// Thresholded mean absolute error: mean |ref - pred| over cells where
/// either field exceeds `eps`. Returns `None` when no cell qualifies
/// (the statistic is undefined there, which is distinct from zero).
pub fn mae_threshold(reference: &[f64], pred: &[f64], eps: f64) -> Result<Option<f64>> {
    if reference.len() != pred.len() {
        return Err(GhmError::Shape(format!(
            "mae_threshold: {} vs {} cells",
            reference.len(),
            pred.len()
        )));
    }
    if eps < 0.0 {
        return Err(GhmError::Config("threshold must be >= 0".into()));
    }
    let mut acc = 0.0;
    let mut n = 0usize;
    for (&r, &p) in reference.iter().zip(pred) {
        if r > eps || p > eps {
            acc += (r - p).abs();
            n += 1;
        }
    }
    Ok(if n == 0 { None } else { Some(acc / n as f64) })
}

/// Linear-interpolated percentile of a sorted slice, q in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Box-plot statistics in the P10/P25/P50/P75/P90 convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub p10: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
    pub n: usize,
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(GhmError::Config("box_stats needs at least one value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(BoxStats {
        p10: percentile(&sorted, 0.10),
        p25: percentile(&sorted, 0.25),
        p50: percentile(&sorted, 0.50),
        p75: percentile(&sorted, 0.75),
        p90: percentile(&sorted, 0.90),
        n: values.len(),
    })
}

/// Flattened predicted/reference values over the test set at one report step.
#[derive(Debug, Clone)]
pub struct PairedSamples {
    pub step: usize,
    pub pred: Vec<f64>,
    pub reference: Vec<f64>,
}

/// Per-step mean and standard deviation of (pred - reference).
pub fn surrogate_error_stats(samples: &[PairedSamples]) -> Result<Vec<(usize, f64, f64)>> {
    if samples.is_empty() {
        return Err(GhmError::Config("empty test set for surrogate error stats".into()));
    }
    samples
        .iter()
        .map(|s| {
            if s.pred.len() != s.reference.len() || s.pred.is_empty() {
                return Err(GhmError::Shape(format!(
                    "step {}: paired sample size mismatch",
                    s.step
                )));
            }
            let n = s.pred.len() as f64;
            let mean: f64 =
                s.pred.iter().zip(&s.reference).map(|(p, r)| p - r).sum::<f64>() / n;
            let var: f64 = s
                .pred
                .iter()
                .zip(&s.reference)
                .map(|(p, r)| {
                    let d = p - r - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            Ok((s.step, mean, var.sqrt()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamHistogram {
    pub name: String,
    /// bins + 1 edges spanning exactly the prior range.
    pub edges: Vec<f64>,
    /// Normalized frequencies (sum = 1 when any sample fell inside).
    pub frequencies: Vec<f64>,
    pub truth: Option<f64>,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub posterior_std: f64,
    /// Posterior std divided by the prior (uniform) std.
    pub std_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub params: Vec<ParamHistogram>,
    pub window_used: usize,
    /// Set when the requested trailing window exceeded the chain length.
    pub window_truncated: bool,
}

fn build_histogram(
    name: &str,
    values: &[f64],
    range: [f64; 2],
    bins: usize,
    truth: Option<f64>,
    prior_std: f64,
) -> ParamHistogram {
    let [lo, hi] = range;
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
    let mut counts = vec![0.0; bins];
    for &v in values {
        let u = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        let b = ((u * bins as f64) as usize).min(bins - 1);
        counts[b] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        for c in &mut counts {
            *c /= total;
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean: f64 = values.iter().sum::<f64>() / n;
    let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let posterior_std = var.sqrt();
    ParamHistogram {
        name: name.into(),
        edges,
        frequencies: counts,
        truth,
        p5: percentile(&sorted, 0.05),
        p50: percentile(&sorted, 0.50),
        p95: percentile(&sorted, 0.95),
        posterior_std,
        std_reduction: if prior_std > 0.0 { posterior_std / prior_std } else { f64::NAN },
    }
}

/// Posterior histograms over the trailing `window` accepted samples: the
/// five metaparameters plus the derived mean porosity (porosity law applied
/// to each sample's mean log-permeability; cutoffs are not re-applied).
pub fn histogram_report(
    accepted: &[AcceptedSample],
    truth: Option<&Metaparameters>,
    priors: &PriorRanges,
    bins: usize,
    window: usize,
) -> Result<HistogramReport> {
    if accepted.is_empty() {
        return Err(GhmError::Config("no accepted samples to report".into()));
    }
    let window_truncated = window > accepted.len();
    let used = window.min(accepted.len());
    let tail = &accepted[accepted.len() - used..];

    let prior_stds = priors.uniform_std();
    let truth_arr = truth.map(|t| t.to_array());
    let mut params = Vec::with_capacity(6);
    for (dim, (name, range)) in
        Metaparameters::NAMES.iter().zip(priors.as_array()).enumerate()
    {
        let values: Vec<f64> = tail.iter().map(|s| s.h[dim]).collect();
        params.push(build_histogram(
            name,
            &values,
            range,
            bins,
            truth_arr.map(|t| t[dim]),
            prior_stds[dim],
        ));
    }

    // Derived mean porosity, mu_phi = d * (sigma * field_mean + mu) + e.
    let mu_phi: Vec<f64> = tail
        .iter()
        .map(|s| s.h[3] * (s.h[1] * s.field_mean + s.h[0]) + s.h[4])
        .collect();
    // Prior spread of mu_phi by seeded Monte Carlo over the prior box
    // (field mean taken as zero, its prior expectation).
    let mut rng = derive_rng(0x4d555048, 0, 0);
    let prior_draws: Vec<f64> = (0..20_000)
        .map(|_| {
            let h = crate::geomodel::sample_metaparams(priors, &mut rng);
            h.d * h.mu_logk + h.e
        })
        .collect();
    let pm: f64 = prior_draws.iter().sum::<f64>() / prior_draws.len() as f64;
    let pv: f64 =
        prior_draws.iter().map(|v| (v - pm) * (v - pm)).sum::<f64>() / prior_draws.len() as f64;
    let lo = prior_draws.iter().cloned().fold(f64::INFINITY, f64::min).min(
        mu_phi.iter().cloned().fold(f64::INFINITY, f64::min),
    );
    let hi = prior_draws.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(
        mu_phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let truth_mu_phi = truth.map(|t| t.d * t.mu_logk + t.e);
    params.push(build_histogram("mu_phi", &mu_phi, [lo, hi], bins, truth_mu_phi, pv.sqrt()));

    Ok(HistogramReport { params, window_used: used, window_truncated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_threshold_hand_values() {
        // both cells qualify under the OR rule
        let r = vec![0.2, 0.0];
        let p = vec![0.1, 0.3];
        let v = mae_threshold(&r, &p, 0.05).unwrap().unwrap();
        assert!((v - 0.2).abs() < 1e-15);

        // identical fields give zero
        assert_eq!(mae_threshold(&r, &r, 0.05).unwrap(), Some(0.0));

        // nothing qualifies: absent, not zero
        let low = vec![0.01, 0.02];
        assert_eq!(mae_threshold(&low, &low, 0.05).unwrap(), None);

        assert!(mae_threshold(&r, &[0.1], 0.05).is_err());
    }

    #[test]
    fn mae_threshold_is_symmetric_in_arguments() {
        let a = vec![0.3, 0.0, 0.07, 0.5];
        let b = vec![0.0, 0.2, 0.04, 0.45];
        let ab = mae_threshold(&a, &b, 0.05).unwrap();
        let ba = mae_threshold(&b, &a, 0.05).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn mae_matches_brute_force_oracle() {
        let mut rng = derive_rng(1, 0, 90);
        use rand::Rng;
        for _ in 0..20 {
            let n = 50;
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.4)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.4)).collect();
            let eps = rng.gen_range(0.0..0.2);
            let fast = mae_threshold(&a, &b, eps).unwrap();
            let mut sum = 0.0;
            let mut count = 0;
            for i in 0..n {
                if a[i] > eps || b[i] > eps {
                    sum += (a[i] - b[i]).abs();
                    count += 1;
                }
            }
            let slow = if count == 0 { None } else { Some(sum / count as f64) };
            match (fast, slow) {
                (Some(f), Some(s)) => assert!((f - s).abs() < 1e-15),
                (None, None) => {}
                other => panic!("mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn percentiles_match_sort_oracle() {
        let values = vec![5.0, 1.0, 4.0, 2.0, 3.0];
        let stats = box_stats(&values).unwrap();
        assert_eq!(stats.p50, 3.0);
        assert_eq!(stats.p10, 1.4);
        assert_eq!(stats.p90, 4.6);
        assert_eq!(stats.p25, 2.0);
        assert_eq!(stats.p75, 4.0);
    }

    #[test]
    fn error_stats_bias_and_zero_cases() {
        let steps = vec![
            PairedSamples { step: 10, pred: vec![0.5, 0.6], reference: vec![0.5, 0.6] },
            PairedSamples { step: 20, pred: vec![0.6, 0.7], reference: vec![0.5, 0.6] },
        ];
        let stats = surrogate_error_stats(&steps).unwrap();
        assert_eq!(stats[0], (10, 0.0, 0.0));
        let (s, m, sd) = stats[1];
        assert_eq!(s, 20);
        assert!((m - 0.1).abs() < 1e-12);
        assert!(sd.abs() < 1e-12);
        assert!(surrogate_error_stats(&[]).is_err());
    }

    fn sample(h: [f64; 5], field_mean: f64) -> AcceptedSample {
        AcceptedSample { iteration: 0, h, loglik: 0.0, field_mean }
    }

    #[test]
    fn degenerate_chain_gives_single_bin_and_zero_reduction() {
        let priors = PriorRanges::default();
        let truth = Metaparameters { mu_logk: 3.0, sigma_logk: 2.3, log10_ar: -1.8, d: 0.03, e: 0.055 };
        let samples: Vec<AcceptedSample> =
            (0..100).map(|_| sample([3.0, 1.5, -1.0, 0.03, 0.08], 0.0)).collect();
        let report = histogram_report(&samples, Some(&truth), &priors, 20, 50).unwrap();
        assert_eq!(report.window_used, 50);
        assert!(!report.window_truncated);
        let mu = &report.params[0];
        let occupied = mu.frequencies.iter().filter(|&&f| f > 0.0).count();
        assert_eq!(occupied, 1);
        assert_eq!(mu.posterior_std, 0.0);
        assert_eq!(mu.std_reduction, 0.0);
        assert_eq!(mu.truth, Some(3.0));
    }

    #[test]
    fn uniform_chain_has_ratio_near_one() {
        let priors = PriorRanges::default();
        let mut rng = derive_rng(2, 0, 90);
        let samples: Vec<AcceptedSample> = (0..20_000)
            .map(|_| {
                let h = crate::geomodel::sample_metaparams(&priors, &mut rng);
                sample(h.to_array(), 0.0)
            })
            .collect();
        let report = histogram_report(&samples, None, &priors, 20, 20_000).unwrap();
        for p in &report.params[..5] {
            assert!((p.std_reduction - 1.0).abs() < 0.05, "{}: {}", p.name, p.std_reduction);
        }
    }

    #[test]
    fn window_longer_than_chain_is_flagged() {
        let priors = PriorRanges::default();
        let samples: Vec<AcceptedSample> =
            (0..10).map(|i| sample([2.0 + 0.1 * i as f64, 1.5, -1.0, 0.03, 0.08], 0.0)).collect();
        let report = histogram_report(&samples, None, &priors, 5, 100).unwrap();
        assert!(report.window_truncated);
        assert_eq!(report.window_used, 10);
    }
}
