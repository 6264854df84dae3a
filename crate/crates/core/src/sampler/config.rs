use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate distribution for the correlation Metropolis step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CandidateKind {
    /// Uniform on the intersected PD interval.
    #[serde(rename = "UNIF_LU")]
    UnifLu,
    /// Rescaled beta on the intersected PD interval, mode at the current value.
    #[serde(rename = "RBETA_LU")]
    RbetaLu,
    /// Rescaled beta on `(-1, 1)`.
    #[serde(rename = "RBETA_FULL")]
    RbetaFull,
    /// Uniform on the interval of one randomly chosen submatrix.
    #[serde(rename = "UNIF_L1U1")]
    UnifL1u1,
    /// Rescaled beta on the interval of one randomly chosen submatrix.
    #[serde(rename = "RBETA_L1U1")]
    RbetaL1u1,
    /// Uniform on `(-1, 1)`.
    #[serde(rename = "UNIF_FULL")]
    UnifFull,
}

impl CandidateKind {
    pub const ALL: [CandidateKind; 6] = [
        CandidateKind::UnifLu,
        CandidateKind::RbetaLu,
        CandidateKind::RbetaFull,
        CandidateKind::UnifL1u1,
        CandidateKind::RbetaL1u1,
        CandidateKind::UnifFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CandidateKind::UnifLu => "UNIF_LU",
            CandidateKind::RbetaLu => "RBETA_LU",
            CandidateKind::RbetaFull => "RBETA_FULL",
            CandidateKind::UnifL1u1 => "UNIF_L1U1",
            CandidateKind::RbetaL1u1 => "RBETA_L1U1",
            CandidateKind::UnifFull => "UNIF_FULL",
        }
    }

    pub fn is_beta(self) -> bool {
        matches!(
            self,
            CandidateKind::RbetaLu | CandidateKind::RbetaFull | CandidateKind::RbetaL1u1
        )
    }
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CandidateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        CandidateKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown candidate kind '{s}'")))
    }
}

/// Settings for one MCMC run. `iterations` counts burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub seed: u64,
    pub candidate_kind: CandidateKind,
    /// Initial concentration for every correlation's beta candidate.
    pub kappa: f64,
    pub target_acceptance: f64,
    /// Inverse-gamma prior shape for each variance.
    pub nu: f64,
    /// Adapt `kappa` during burn-in (beta candidates only).
    pub tune: bool,
    pub tune_window: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 50_000,
            burn_in: 1_000,
            chains: 4,
            seed: 1,
            candidate_kind: CandidateKind::RbetaLu,
            kappa: 50.0,
            target_acceptance: 0.25,
            nu: 2.1,
            tune: true,
            tune_window: 100,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.iterations <= self.burn_in {
            return bad(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            ));
        }
        if self.chains == 0 {
            return bad("chains must be at least 1".into());
        }
        if !(self.kappa > 2.0) || !self.kappa.is_finite() {
            return bad(format!("kappa must exceed 2, got {}", self.kappa));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad(format!(
                "target_acceptance must be in (0, 1), got {}",
                self.target_acceptance
            ));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        if self.tune_window == 0 {
            return bad("tune_window must be at least 1".into());
        }
        Ok(())
    }

    pub fn kept_draws(&self) -> usize {
        self.iterations - self.burn_in
    }
}
