//! Hierarchical MCMC history matching: observation synthesis with noise,
//! error models, pCN latent proposals, metaparameter proposals,
//! Metropolis-Hastings acceptance with tempered likelihoods, and the
//! histogram termination criterion.

pub mod forward;
pub mod observation;
pub mod sampler;

pub use forward::{ForwardModel, Prediction, SurrogateForward};
pub use observation::{synthesize_observations, ErrorModel, ObservationSet, SeisKind, TruthData};
pub use sampler::{
    accept_meta, accept_pca, check_termination, log_likelihood, pcn_propose, propose_meta,
    run_hierarchical, tune_temperatures, AcceptedSample, Chain, ChainRecord, HmConfig,
    PcnVariant, SamplerState,
};
