//! Candidate densities and the concentration update.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub const KAPPA_MIN: f64 = 2.5;
pub const KAPPA_MAX: f64 = 1e4;
const KAPPA_GAIN: f64 = 2.0;

/// Beta distribution rescaled to `(lo, hi)` with a pinned mode and total concentration
/// `alpha + beta = kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RBetaShape {
    pub alpha: f64,
    pub beta: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Shape whose mode sits at `mode`, clamped into `[lo, hi]`.
///
/// `alpha = ((kappa - 1) lo + (2 - kappa) m - hi) / (lo - hi)` and `beta = kappa - alpha`.
pub fn rbeta_shape(kappa: f64, mode: f64, lo: f64, hi: f64) -> Result<RBetaShape> {
    if !(kappa > 2.0) {
        return Err(Error::InvalidArgument(format!("kappa must exceed 2, got {kappa}")));
    }
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty support ({lo}, {hi})")));
    }
    let m = mode.clamp(lo, hi);
    let alpha = ((kappa - 1.0) * lo + (2.0 - kappa) * m - hi) / (lo - hi);
    let alpha = alpha.clamp(1.0, kappa - 1.0);
    Ok(RBetaShape {
        alpha,
        beta: kappa - alpha,
        lo,
        hi,
    })
}

impl RBetaShape {
    pub fn mode(&self) -> f64 {
        let u = (self.alpha - 1.0) / (self.alpha + self.beta - 2.0);
        self.lo + u * (self.hi - self.lo)
    }

    /// Log density; `-inf` outside the open support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > self.lo && x < self.hi) {
            return f64::NEG_INFINITY;
        }
        let w = self.hi - self.lo;
        let u = (x - self.lo) / w;
        let ln_b = ln_gamma(self.alpha) + ln_gamma(self.beta) - ln_gamma(self.alpha + self.beta);
        (self.alpha - 1.0) * u.ln() + (self.beta - 1.0) * (1.0 - u).ln() - ln_b - w.ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = Beta::new(self.alpha, self.beta)
            .expect("alpha, beta >= 1")
            .sample(rng);
        self.lo + u * (self.hi - self.lo)
    }
}

/// Log density of the inverse gamma with shape `a` and scale `b`.
pub fn inv_gamma_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

pub fn inv_gamma_sample<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(a, 1.0).expect("positive shape").sample(rng);
    b / g
}

/// One window update: `kappa * exp(2 (target - acc))`, clamped to `[2.5, 1e4]`.
///
/// Low acceptance raises `kappa`, concentrating the candidate around the current value.
pub fn tune_kappa(acceptance: f64, kappa: f64, target: f64) -> f64 {
    (kappa * (KAPPA_GAIN * (target - acceptance)).exp()).clamp(KAPPA_MIN, KAPPA_MAX)
}
