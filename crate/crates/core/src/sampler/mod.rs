//! Gibbs and Metropolis-Hastings sampler for the structured model.
//!
//! One iteration updates the means (conjugate normal draw), each standard deviation
//! (independence candidate from an inverse gamma), then each unique correlation in
//! sweep order with a candidate supported on its PD interval.

mod chain;
mod config;
mod likelihood;
mod proposal;

pub use chain::{
    posterior_medians, run_chain, run_chains, ChainOutput, CorrProposal, CorrStep, Model,
    ModelState, SUPPORT_EPS,
};
pub use config::{CandidateKind, SamplerConfig};
pub use likelihood::{group_patterns, log_likelihood, PatternFactors, PatternGroup};
pub use proposal::{
    inv_gamma_ln_pdf, rbeta_shape, tune_kappa, RBetaShape, KAPPA_MAX, KAPPA_MIN,
};

pub(crate) use chain::median;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "STRUCTCORR_THREADS";

/// Runs `f` on a pool sized by `STRUCTCORR_THREADS` when set, else on the global pool.
pub(crate) fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let n = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    match n.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}
