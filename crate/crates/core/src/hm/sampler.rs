//! Two-level Metropolis-Hastings: a pCN step on the latent field followed
//! by a Gaussian random-walk step on the metaparameters, each accepted
//! against the tempered likelihood. Terminates when consecutive posterior
//! histograms stop changing or at the iteration cap.

use super::forward::{ForwardModel, Prediction};
use super::observation::{ObservationSet, SeisKind};
use crate::geomodel::{Metaparameters, PriorRanges};
use crate::grf::{derive_rng, LatentVector};
use crate::seisproc::DEFAULT_PLUME_TAU;
use crate::{GhmError, Result};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcnVariant {
    /// `sqrt(1 - beta^2)` autoregression: exactly preserves the N(0, I) prior.
    Sqrt,
    /// Literal `(1 - beta^2)` coefficient.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmConfig {
    /// pCN step size.
    pub beta: f64,
    /// Metaparameter proposal std as a fraction of each prior range.
    pub meta_proposal_frac: f64,
    pub t_mon: f64,
    pub t_seis: f64,
    pub max_iters: usize,
    pub histogram_check_interval: usize,
    pub histogram_bins: usize,
    pub histogram_tol: f64,
    pub pcn_variant: PcnVariant,
    /// Record the latent state every `thinning` iterations (0 = never).
    pub thinning: usize,
}

impl Default for HmConfig {
    fn default() -> Self {
        HmConfig {
            beta: 0.05,
            meta_proposal_frac: 0.05,
            t_mon: 0.8,
            t_seis: 1.0,
            max_iters: 20_000,
            histogram_check_interval: 2_000,
            histogram_bins: 20,
            histogram_tol: 0.05,
            pcn_variant: PcnVariant::Sqrt,
            thinning: 0,
        }
    }
}

impl HmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(GhmError::Config("beta must be in (0, 1)".into()));
        }
        if self.t_mon <= 0.0 || self.t_seis <= 0.0 {
            return Err(GhmError::Config("temperatures must be > 0".into()));
        }
        if self.max_iters == 0 || self.histogram_bins == 0 {
            return Err(GhmError::Config("max_iters and histogram_bins must be > 0".into()));
        }
        Ok(())
    }
}

/// pCN proposal. The sqrt variant keeps N(0, I) exactly invariant.
pub fn pcn_propose(
    xi: &LatentVector,
    beta: f64,
    variant: PcnVariant,
    rng: &mut ChaCha20Rng,
) -> LatentVector {
    let keep = match variant {
        PcnVariant::Sqrt => (1.0 - beta * beta).sqrt(),
        PcnVariant::Paper => 1.0 - beta * beta,
    };
    LatentVector {
        xi: xi
            .xi
            .iter()
            .map(|&v| keep * v + beta * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    }
}

/// Symmetric Gaussian random walk on the metaparameters; proposals may
/// leave the prior box (rejection happens through the prior probability).
pub fn propose_meta(
    h: &Metaparameters,
    priors: &PriorRanges,
    frac: f64,
    rng: &mut ChaCha20Rng,
) -> Metaparameters {
    let mut out = h.to_array();
    for (v, [lo, hi]) in out.iter_mut().zip(priors.as_array()) {
        let sigma = frac * (hi - lo);
        *v += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    Metaparameters::from_array(out)
}

/// Tempered diagonal-Gaussian log-likelihood (normalization omitted; it
/// cancels in Metropolis-Hastings ratios). Plume observations compare
/// thresholded binary blocks.
pub fn log_likelihood(pred: &Prediction, obs: &ObservationSet, cfg: &HmConfig) -> Result<f64> {
    if pred.mon.len() != obs.d_mon.len() {
        return Err(GhmError::Shape(format!(
            "monitoring prediction length {} vs observation {}",
            pred.mon.len(),
            obs.d_mon.len()
        )));
    }
    if pred.seis.len() != obs.d_seis.len() {
        return Err(GhmError::Shape(format!(
            "seismic prediction length {} vs observation {}",
            pred.seis.len(),
            obs.d_seis.len()
        )));
    }
    let mut mon_term = 0.0;
    for ((p, d), s) in pred.mon.iter().zip(&obs.d_mon).zip(&obs.sigma_mon) {
        if !(*s > 0.0) {
            return Err(GhmError::Config("zero sigma in monitoring block".into()));
        }
        let r = (p - d) / s;
        mon_term += r * r;
    }
    let mut seis_term = 0.0;
    for ((p, d), s) in pred.seis.iter().zip(&obs.d_seis).zip(&obs.sigma_seis) {
        if !(*s > 0.0) {
            return Err(GhmError::Config("zero sigma in seismic block".into()));
        }
        let pv = match obs.seis_kind {
            SeisKind::PlumeLocation => {
                if *p > DEFAULT_PLUME_TAU {
                    1.0
                } else {
                    0.0
                }
            }
            _ => *p,
        };
        let r = (pv - d) / s;
        seis_term += r * r;
    }
    Ok(-0.5 * mon_term / cfg.t_mon - 0.5 * seis_term / cfg.t_seis)
}

/// Level-1 acceptance: likelihood ratio only (the pCN proposal already
/// preserves the latent prior).
pub fn accept_pca(loglik_new: f64, loglik_old: f64, rng: &mut ChaCha20Rng) -> bool {
    let alpha = (loglik_new - loglik_old).exp().min(1.0);
    alpha > rng.gen_range(0.0..1.0)
}

/// Level-2 acceptance: prior ratio times likelihood ratio; the uniform
/// prior reduces to an inside-the-box indicator.
pub fn accept_meta(
    h_new: &Metaparameters,
    loglik_new: f64,
    loglik_old: f64,
    priors: &PriorRanges,
    rng: &mut ChaCha20Rng,
) -> bool {
    if !priors.contains(h_new) {
        return false;
    }
    let alpha = (loglik_new - loglik_old).exp().min(1.0);
    alpha > rng.gen_range(0.0..1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub iteration: usize,
    pub accepted_xi: bool,
    pub accepted_h: bool,
    pub h: [f64; 5],
    /// Log-likelihood after the latent (level-1) step.
    pub loglik_after_xi: f64,
    /// Log-likelihood after the metaparameter (level-2) step.
    pub loglik: f64,
}

/// State recorded at each acceptance event (either level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedSample {
    pub iteration: usize,
    pub h: [f64; 5],
    pub loglik: f64,
    /// Spatial mean of the latent field, for derived statistics.
    pub field_mean: f64,
}

/// Resumable sampler state (the RNG stream position makes continuation
/// bit-exact).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub iteration: usize,
    pub h: [f64; 5],
    pub xi: Vec<f64>,
    pub rng_word_pos: u128,
}

#[derive(Debug, Clone)]
pub struct Chain {
    pub records: Vec<ChainRecord>,
    pub accepted: Vec<AcceptedSample>,
    pub xi_snapshots: Vec<(usize, Vec<f64>)>,
    pub n_evaluations: usize,
    pub accepts_xi: usize,
    pub accepts_h: usize,
    pub iterations: usize,
    pub terminated_by_histogram: bool,
    pub final_state: SamplerState,
}

impl Chain {
    pub fn acceptance_rate_xi(&self) -> f64 {
        self.accepts_xi as f64 / self.iterations.max(1) as f64
    }

    pub fn acceptance_rate_h(&self) -> f64 {
        self.accepts_h as f64 / self.iterations.max(1) as f64
    }
}

/// Normalized histogram of one metaparameter over its prior range.
fn histogram(samples: &[AcceptedSample], dim: usize, [lo, hi]: [f64; 2], bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    for s in samples {
        let u = ((s.h[dim] - lo) / (hi - lo)).clamp(0.0, 1.0);
        let b = ((u * bins as f64) as usize).min(bins - 1);
        counts[b] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        for c in &mut counts {
            *c /= total;
        }
    }
    counts
}

/// L1 distance between consecutive checkpoint histograms, maximized over
/// metaparameters; `None` while there are fewer accepted samples than bins.
pub fn check_termination(
    accepted: &[AcceptedSample],
    previous: &Option<Vec<Vec<f64>>>,
    priors: &PriorRanges,
    bins: usize,
) -> (Option<f64>, Vec<Vec<f64>>) {
    let current: Vec<Vec<f64>> = priors
        .as_array()
        .iter()
        .enumerate()
        .map(|(d, range)| histogram(accepted, d, *range, bins))
        .collect();
    if accepted.len() < bins {
        return (None, current);
    }
    let distance = previous.as_ref().map(|prev| {
        prev.iter()
            .zip(&current)
            .map(|(p, c)| p.iter().zip(c).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0f64, f64::max)
    });
    (distance, current)
}

/// Run the hierarchical chain. Evaluations go through the forward model;
/// the per-iteration pattern is one latent step then one metaparameter step.
pub fn run_hierarchical(
    model: &dyn ForwardModel,
    obs: &ObservationSet,
    priors: &PriorRanges,
    cfg: &HmConfig,
    seed: u64,
    resume: Option<SamplerState>,
) -> Result<Chain> {
    cfg.validate()?;
    obs.validate()?;
    priors.validate()?;
    let n_d = model.n_latent();
    let mut rng = derive_rng(seed, 1, 0x484d4348);

    let (start_iter, mut h, mut xi) = match &resume {
        Some(state) => {
            if state.xi.len() != n_d {
                return Err(GhmError::Shape("resume state latent size mismatch".into()));
            }
            rng.set_word_pos(state.rng_word_pos);
            (
                state.iteration,
                Metaparameters::from_array(state.h),
                LatentVector { xi: state.xi.clone() },
            )
        }
        None => {
            let xi = LatentVector {
                xi: (0..n_d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
            };
            let h = crate::geomodel::sample_metaparams(priors, &mut rng);
            (0, h, xi)
        }
    };

    let mut n_evaluations = 0usize;
    let evaluate = |h: &Metaparameters, xi: &LatentVector, n: &mut usize| -> Result<f64> {
        *n += 1;
        let pred = model.evaluate(h, xi)?;
        log_likelihood(&pred, obs, cfg)
    };
    let mut loglik = evaluate(&h, &xi, &mut n_evaluations)?;

    let mut chain = Chain {
        records: Vec::with_capacity(cfg.max_iters - start_iter),
        accepted: Vec::new(),
        xi_snapshots: Vec::new(),
        n_evaluations,
        accepts_xi: 0,
        accepts_h: 0,
        iterations: 0,
        terminated_by_histogram: false,
        final_state: SamplerState {
            iteration: start_iter,
            h: h.to_array(),
            xi: xi.xi.clone(),
            rng_word_pos: rng.get_word_pos(),
        },
    };
    let mut prev_hist: Option<Vec<Vec<f64>>> = None;

    for iteration in start_iter..cfg.max_iters {
        // Level 1: latent field conditioned on the current metaparameters.
        let xi_prop = pcn_propose(&xi, cfg.beta, cfg.pcn_variant, &mut rng);
        let ll_prop = evaluate(&h, &xi_prop, &mut chain.n_evaluations)?;
        let mut accepted_xi = false;
        if accept_pca(ll_prop, loglik, &mut rng) {
            xi = xi_prop;
            loglik = ll_prop;
            accepted_xi = true;
            chain.accepts_xi += 1;
            chain.accepted.push(AcceptedSample {
                iteration,
                h: h.to_array(),
                loglik,
                field_mean: model.latent_field_mean(&xi),
            });
        }

        let loglik_after_xi = loglik;

        // Level 2: metaparameters conditioned on the current latent field.
        let h_prop = propose_meta(&h, priors, cfg.meta_proposal_frac, &mut rng);
        let mut accepted_h = false;
        if priors.contains(&h_prop) {
            let ll_prop = evaluate(&h_prop, &xi, &mut chain.n_evaluations)?;
            if accept_meta(&h_prop, ll_prop, loglik, priors, &mut rng) {
                h = h_prop;
                loglik = ll_prop;
                accepted_h = true;
                chain.accepts_h += 1;
                chain.accepted.push(AcceptedSample {
                    iteration,
                    h: h.to_array(),
                    loglik,
                    field_mean: model.latent_field_mean(&xi),
                });
            }
        }

        chain.records.push(ChainRecord {
            iteration,
            accepted_xi,
            accepted_h,
            h: h.to_array(),
            loglik_after_xi,
            loglik,
        });
        chain.iterations += 1;
        if cfg.thinning > 0 && (iteration + 1) % cfg.thinning == 0 {
            chain.xi_snapshots.push((iteration, xi.xi.clone()));
        }

        if (iteration + 1) % cfg.histogram_check_interval == 0 {
            let (distance, hist) =
                check_termination(&chain.accepted, &prev_hist, priors, cfg.histogram_bins);
            prev_hist = Some(hist);
            if let Some(d) = distance {
                if d < cfg.histogram_tol {
                    chain.terminated_by_histogram = true;
                    chain.final_state = SamplerState {
                        iteration: iteration + 1,
                        h: h.to_array(),
                        xi: xi.xi.clone(),
                        rng_word_pos: rng.get_word_pos(),
                    };
                    return Ok(chain);
                }
            }
        }
    }
    chain.final_state = SamplerState {
        iteration: cfg.max_iters,
        h: h.to_array(),
        xi: xi.xi.clone(),
        rng_word_pos: rng.get_word_pos(),
    };
    Ok(chain)
}

/// Scale both temperatures by a common factor until pilot-chain acceptance
/// rates land in the target band.
pub fn tune_temperatures(
    model: &dyn ForwardModel,
    obs: &ObservationSet,
    priors: &PriorRanges,
    cfg: &HmConfig,
    seed: u64,
    pilot_iters: usize,
    band: (f64, f64),
    max_rounds: usize,
) -> Result<(HmConfig, Vec<(f64, f64, f64)>)> {
    let mut tuned = *cfg;
    let mut log = Vec::new();
    for round in 0..max_rounds {
        let pilot = HmConfig { max_iters: pilot_iters, histogram_check_interval: usize::MAX, ..tuned };
        let chain = run_hierarchical(model, obs, priors, &pilot, seed ^ (round as u64) << 32, None)?;
        let rate = 0.5 * (chain.acceptance_rate_xi() + chain.acceptance_rate_h());
        log.push((tuned.t_mon, tuned.t_seis, rate));
        if rate < band.0 {
            tuned.t_mon *= 2.0;
            tuned.t_seis *= 2.0;
        } else if rate > band.1 {
            tuned.t_mon /= 2.0;
            tuned.t_seis /= 2.0;
        } else {
            break;
        }
    }
    Ok((tuned, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hm::observation::SeisKind;

    fn empty_obs_with_mon(d: Vec<f64>, sigma: f64) -> ObservationSet {
        let n = d.len();
        ObservationSet {
            seis_kind: SeisKind::None,
            mon_steps: vec![0],
            d_mon: d,
            sigma_mon: vec![sigma; n],
            seis_steps: vec![],
            d_seis: vec![],
            sigma_seis: vec![],
            coarse_dims: (0, 0, 0),
            sigma_d_mon: 0.0,
            sigma_d_seis: 0.0,
        }
    }

    #[test]
    fn likelihood_anchors() {
        let cfg = HmConfig::default();
        let obs = empty_obs_with_mon(vec![0.2, 0.4], 0.1);
        let pred = Prediction { mon: vec![0.2, 0.4], seis: vec![] };
        assert_eq!(log_likelihood(&pred, &obs, &cfg).unwrap(), 0.0);

        // single residual r = sigma at T = 1 -> -0.5
        let cfg1 = HmConfig { t_mon: 1.0, ..cfg };
        let obs1 = empty_obs_with_mon(vec![0.2], 0.1);
        let pred1 = Prediction { mon: vec![0.3], seis: vec![] };
        assert!((log_likelihood(&pred1, &obs1, &cfg1).unwrap() + 0.5).abs() < 1e-12);

        // doubling T halves the contribution exactly
        let cfg2 = HmConfig { t_mon: 2.0, ..cfg };
        assert!((log_likelihood(&pred1, &obs1, &cfg2).unwrap() + 0.25).abs() < 1e-12);
    }

    #[test]
    fn likelihood_blocks_are_additive() {
        let cfg = HmConfig { t_mon: 0.7, t_seis: 3.0, ..HmConfig::default() };
        let mut obs = empty_obs_with_mon(vec![0.2, 0.4, 0.1], 0.05);
        let pred_mon_only = Prediction { mon: vec![0.25, 0.33, 0.12], seis: vec![] };
        let mon_only = log_likelihood(&pred_mon_only, &obs, &cfg).unwrap();

        obs.seis_kind = SeisKind::Saturation;
        obs.seis_steps = vec![10];
        obs.d_seis = vec![0.3, 0.0];
        obs.sigma_seis = vec![0.02, 0.02];
        let pred_full = Prediction { mon: pred_mon_only.mon.clone(), seis: vec![0.28, 0.01] };
        let full = log_likelihood(&pred_full, &obs, &cfg).unwrap();
        let seis_part: f64 = -0.5 / 3.0
            * (((0.28f64 - 0.3) / 0.02).powi(2) + ((0.01f64 - 0.0) / 0.02).powi(2));
        assert!((full - (mon_only + seis_part)).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_is_rejected() {
        let cfg = HmConfig::default();
        let mut obs = empty_obs_with_mon(vec![0.2], 0.1);
        obs.sigma_mon[0] = 0.0;
        let pred = Prediction { mon: vec![0.2], seis: vec![] };
        assert!(log_likelihood(&pred, &obs, &cfg).is_err());
    }

    #[test]
    fn pcn_small_beta_stays_near_current_state() {
        let xi = LatentVector { xi: vec![1.0, -2.0, 0.5] };
        let mut rng = derive_rng(1, 0, 1);
        for variant in [PcnVariant::Sqrt, PcnVariant::Paper] {
            let prop = pcn_propose(&xi, 1e-6, variant, &mut rng);
            for (a, b) in prop.xi.iter().zip(&xi.xi) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn pcn_sqrt_variant_preserves_unit_variance() {
        // always-accept chain: per-coordinate mean and variance stay standard.
        // beta large enough that 1e5 iterations give tight Monte Carlo error;
        // the invariance property itself holds for any beta in (0, 1).
        let n_d = 50;
        let beta = 0.95;
        let mut rng = derive_rng(2, 0, 1);
        let mut xi = LatentVector {
            xi: (0..n_d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        };
        let iters = 100_000;
        let mut sums = vec![0.0; n_d];
        let mut sq = vec![0.0; n_d];
        for _ in 0..iters {
            xi = pcn_propose(&xi, beta, PcnVariant::Sqrt, &mut rng);
            for (i, &v) in xi.xi.iter().enumerate() {
                sums[i] += v;
                sq[i] += v * v;
            }
        }
        for i in 0..n_d {
            let mean = sums[i] / iters as f64;
            let var = sq[i] / iters as f64 - mean * mean;
            assert!(mean.abs() <= 0.02, "coord {i} mean {mean}");
            assert!((0.96..=1.04).contains(&var), "coord {i} variance {var}");
        }
    }

    #[test]
    fn meta_proposal_scale_and_symmetry() {
        let priors = PriorRanges::default();
        // near the lower edge of mu_logk so unclamped proposals can exit the box
        let h = Metaparameters { mu_logk: 2.05, sigma_logk: 1.7, log10_ar: -1.0, d: 0.03, e: 0.08 };
        let mut rng = derive_rng(3, 0, 1);
        let n = 10_000;
        let mut diffs = Vec::with_capacity(n);
        let mut outside = 0;
        for _ in 0..n {
            let p = propose_meta(&h, &priors, 0.05, &mut rng);
            if !priors.contains(&p) {
                outside += 1;
            }
            diffs.push(p.mu_logk - h.mu_logk);
        }
        let mean: f64 = diffs.iter().sum::<f64>() / n as f64;
        let var: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
        let expected = 0.05 * 4.0; // range width of mu_logk is 4
        assert!((var.sqrt() - expected).abs() / expected < 0.03, "std {}", var.sqrt());
        assert!(mean.abs() < 3.0 * expected / (n as f64).sqrt() * 3.0, "mean {mean}");
        // proposals are not clamped to the box
        assert!(outside > 0);
    }

    #[test]
    fn acceptance_probabilities() {
        let mut rng = derive_rng(4, 0, 1);
        // equal likelihoods: always accept
        for _ in 0..100 {
            assert!(accept_pca(-3.0, -3.0, &mut rng));
        }
        // -infinity never accepts
        for _ in 0..100 {
            assert!(!accept_pca(f64::NEG_INFINITY, -3.0, &mut rng));
        }
        // delta = -ln 2 accepts with probability 1/2
        let delta = -(2f64.ln());
        let n = 10_000;
        let mut acc = 0;
        for _ in 0..n {
            if accept_pca(delta, 0.0, &mut rng) {
                acc += 1;
            }
        }
        let rate = acc as f64 / n as f64;
        assert!((rate - 0.5).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn meta_acceptance_respects_prior_box() {
        let priors = PriorRanges::default();
        let mut rng = derive_rng(5, 0, 1);
        let inside = Metaparameters { mu_logk: 4.0, sigma_logk: 1.5, log10_ar: -1.0, d: 0.03, e: 0.08 };
        let outside = Metaparameters { mu_logk: 7.0, ..inside };
        for _ in 0..50 {
            assert!(!accept_meta(&outside, 0.0, 0.0, &priors, &mut rng));
            assert!(accept_meta(&inside, 0.0, 0.0, &priors, &mut rng));
        }
    }

    #[test]
    fn termination_distance_examples() {
        let priors = PriorRanges::default();
        let mk = |mu: f64| AcceptedSample { iteration: 0, h: [mu, 1.5, -1.0, 0.03, 0.08], loglik: 0.0, field_mean: 0.0 };
        let samples: Vec<AcceptedSample> = (0..100).map(|i| mk(2.0 + (i % 20) as f64 * 0.2)).collect();
        // identical consecutive histograms terminate (distance 0)
        let (_, hist1) = check_termination(&samples, &None, &priors, 20);
        let (d, _) = check_termination(&samples, &Some(hist1.clone()), &priors, 20);
        assert_eq!(d, Some(0.0));
        // insufficient data guard
        let few: Vec<AcceptedSample> = samples[..10].to_vec();
        let (d, _) = check_termination(&few, &Some(hist1), &priors, 20);
        assert_eq!(d, None);
        // hand-computed two-bin distance: (0.6,0.4) vs (0.5,0.5) -> 0.2
        let a: Vec<AcceptedSample> =
            (0..10).map(|i| mk(if i < 6 { 3.0 } else { 5.0 })).collect();
        let b: Vec<AcceptedSample> =
            (0..10).map(|i| mk(if i < 5 { 3.0 } else { 5.0 })).collect();
        let (_, ha) = check_termination(&a, &None, &priors, 2);
        let (d, _) = check_termination(&b, &Some(ha), &priors, 2);
        assert!((d.unwrap() - 0.2).abs() < 1e-12);
    }

    /// Forward model whose predictions ignore the state: a flat likelihood.
    struct ConstantModel {
        n_latent: usize,
        value: Vec<f64>,
    }

    impl ForwardModel for ConstantModel {
        fn n_latent(&self) -> usize {
            self.n_latent
        }

        fn evaluate(&self, _: &Metaparameters, _: &LatentVector) -> Result<Prediction> {
            Ok(Prediction { mon: self.value.clone(), seis: vec![] })
        }
    }

    #[test]
    fn flat_likelihood_chain_stays_on_plateau_and_accepts_everything() {
        let model = ConstantModel { n_latent: 4, value: vec![0.2, 0.3] };
        let obs = empty_obs_with_mon(vec![0.2, 0.3], 0.05);
        let priors = PriorRanges::default();
        let cfg = HmConfig { max_iters: 500, ..HmConfig::default() };
        let chain = run_hierarchical(&model, &obs, &priors, &cfg, 11, None).unwrap();
        assert!(chain.records.iter().all(|r| r.loglik == 0.0));
        assert_eq!(chain.accepts_xi, 500);
        // h-moves are only rejected by the prior box
        assert!(chain.accepts_h > 350);
    }

    /// Linear-Gaussian toy: prediction = first latent coordinate.
    struct LinearLatentModel;

    impl ForwardModel for LinearLatentModel {
        fn n_latent(&self) -> usize {
            1
        }

        fn evaluate(&self, _: &Metaparameters, xi: &LatentVector) -> Result<Prediction> {
            Ok(Prediction { mon: vec![xi.xi[0]], seis: vec![] })
        }
    }

    #[test]
    fn conjugate_gaussian_posterior_is_recovered() {
        // prior xi ~ N(0,1), obs d = xi + noise(sigma):
        // posterior mean d/(1+sigma^2), variance sigma^2/(1+sigma^2)
        let (d, sigma) = (1.0, 0.5);
        let obs = empty_obs_with_mon(vec![d], sigma);
        let priors = PriorRanges::default();
        let cfg = HmConfig {
            beta: 0.3,
            t_mon: 1.0,
            max_iters: 100_000,
            thinning: 1,
            histogram_check_interval: usize::MAX,
            ..HmConfig::default()
        };
        let chain = run_hierarchical(&LinearLatentModel, &obs, &priors, &cfg, 13, None).unwrap();
        let xs: Vec<f64> = chain.xi_snapshots.iter().map(|(_, xi)| xi[0]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        // batch-means standard error to account for autocorrelation
        let n_batches = 50;
        let batch = xs.len() / n_batches;
        let batch_means: Vec<f64> = (0..n_batches)
            .map(|b| xs[b * batch..(b + 1) * batch].iter().sum::<f64>() / batch as f64)
            .collect();
        let bm = batch_means.iter().sum::<f64>() / n_batches as f64;
        let bvar = batch_means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>()
            / (n_batches - 1) as f64;
        let se = (bvar / n_batches as f64).sqrt();
        let expected = d / (1.0 + sigma * sigma);
        assert!(
            (mean - expected).abs() <= 3.0 * se,
            "posterior mean {mean} vs {expected} (se {se})"
        );
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let expected_var = sigma * sigma / (1.0 + sigma * sigma);
        assert!((var - expected_var).abs() < 0.05 * 3.0, "posterior var {var} vs {expected_var}");
    }

    #[test]
    fn chains_are_seed_deterministic_and_resumable() {
        let model = ConstantModel { n_latent: 3, value: vec![0.1] };
        let obs = empty_obs_with_mon(vec![0.15], 0.1);
        let priors = PriorRanges::default();
        let cfg = HmConfig { max_iters: 300, histogram_check_interval: usize::MAX, ..HmConfig::default() };
        let full = run_hierarchical(&model, &obs, &priors, &cfg, 17, None).unwrap();
        let again = run_hierarchical(&model, &obs, &priors, &cfg, 17, None).unwrap();
        assert_eq!(full.records, again.records);

        let cfg_half = HmConfig { max_iters: 150, ..cfg };
        let first = run_hierarchical(&model, &obs, &priors, &cfg_half, 17, None).unwrap();
        let second =
            run_hierarchical(&model, &obs, &priors, &cfg, 17, Some(first.final_state.clone()))
                .unwrap();
        let mut stitched = first.records.clone();
        stitched.extend(second.records.clone());
        assert_eq!(stitched, full.records);
    }

    #[test]
    fn scaled_temperatures_and_sigmas_leave_decisions_unchanged() {
        // scaling sigma by c and T by 1/c^2 leaves every delta-loglik intact
        let model = LinearLatentModel;
        let priors = PriorRanges::default();
        let cfg_a = HmConfig { t_mon: 1.0, max_iters: 400, histogram_check_interval: usize::MAX, ..HmConfig::default() };
        let obs_a = empty_obs_with_mon(vec![0.7], 0.2);
        let c = 3.0;
        let cfg_b = HmConfig { t_mon: 1.0 / (c * c), ..cfg_a };
        let obs_b = empty_obs_with_mon(vec![0.7], 0.2 * c);
        let a = run_hierarchical(&model, &obs_a, &priors, &cfg_a, 23, None).unwrap();
        let b = run_hierarchical(&model, &obs_b, &priors, &cfg_b, 23, None).unwrap();
        let decisions_a: Vec<(bool, bool)> =
            a.records.iter().map(|r| (r.accepted_xi, r.accepted_h)).collect();
        let decisions_b: Vec<(bool, bool)> =
            b.records.iter().map(|r| (r.accepted_xi, r.accepted_h)).collect();
        assert_eq!(decisions_a, decisions_b);
    }

    #[test]
    fn histogram_termination_fires_on_a_flat_chain() {
        let model = ConstantModel { n_latent: 2, value: vec![0.1] };
        let obs = empty_obs_with_mon(vec![0.1], 0.1);
        let priors = PriorRanges::default();
        let cfg = HmConfig {
            max_iters: 50_000,
            histogram_check_interval: 500,
            histogram_tol: 0.05,
            ..HmConfig::default()
        };
        let chain = run_hierarchical(&model, &obs, &priors, &cfg, 29, None).unwrap();
        assert!(chain.terminated_by_histogram);
        assert!(chain.iterations < 50_000);
    }
}
