//! Synthetic data and frequentist operating characteristics of the full pipeline.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution as _, StandardNormal};
use rayon::prelude::*;

use crate::construct::{optimal_weights, posterior_weights, CrossSectionMoments, WeightVector};
use crate::error::{Error, Result};
use crate::linalg::{self, PD_TOL};
use crate::sampler::{run_chains, SamplerConfig};
use crate::structure::{
    assemble_correlation, assemble_covariance, CorrelationParams, Dataset, MomentParams,
    StructureSpec, Subject,
};

/// Marginal shape of the generated data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Normal,
    /// Multivariate t with the model covariance as scale matrix.
    StudentT { dof: f64 },
    /// Azzalini skew-normal with correlation core `R` and every slant equal to `shape`.
    SkewNormal { shape: f64 },
}

impl Distribution {
    pub const T10: Distribution = Distribution::StudentT { dof: 10.0 };
    pub const T3: Distribution = Distribution::StudentT { dof: 3.0 };
    pub const SKEW_NORMAL: Distribution = Distribution::SkewNormal { shape: 0.1 };
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Normal => f.write_str("normal"),
            Distribution::StudentT { dof } => write!(f, "t{dof}"),
            Distribution::SkewNormal { shape } if *shape == 0.1 => f.write_str("skewnormal"),
            Distribution::SkewNormal { shape } => write!(f, "skewnormal{shape}"),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        let bad = || Error::InvalidArgument(format!("unknown distribution '{s}'"));
        if s == "normal" {
            Ok(Distribution::Normal)
        } else if let Some(rest) = s.strip_prefix("skewnormal") {
            let shape = if rest.is_empty() { 0.1 } else { rest.parse().map_err(|_| bad())? };
            Ok(Distribution::SkewNormal { shape })
        } else if let Some(rest) = s.strip_prefix('t') {
            let dof: f64 = rest.parse().map_err(|_| bad())?;
            if !(dof > 0.0) {
                return Err(bad());
            }
            Ok(Distribution::StudentT { dof })
        } else {
            Err(bad())
        }
    }
}

/// Disease-stage parameter sets used as simulation truths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Early,
    Late,
    Non,
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "early" => Ok(Stage::Early),
            "late" => Ok(Stage::Late),
            "non" | "non-ambulatory" => Ok(Stage::Non),
            other => Err(Error::InvalidArgument(format!("unknown stage '{other}'"))),
        }
    }
}

pub const STAGE_OUTCOMES: [&str; 4] = ["SOL", "VL", "BB", "DEL"];

/// Posterior medians for one stage: means, sds, six etas, four rhos and gamma.
pub fn stage_values(stage: Stage) -> ([f64; 4], [f64; 4], [f64; 6], [f64; 4], f64) {
    match stage {
        Stage::Early => (
            [0.026, 0.066, 0.036, 0.015],
            [0.037, 0.073, 0.064, 0.041],
            [0.596, 0.225, 0.423, 0.275, 0.414, 0.464],
            [0.239, 0.251, 0.415, 0.286],
            0.264,
        ),
        Stage::Late => (
            [0.062, 0.074, 0.048, 0.050],
            [0.064, 0.092, 0.070, 0.065],
            [0.303, 0.201, 0.379, 0.202, 0.372, 0.523],
            [0.080, -0.012, 0.111, 0.297],
            0.123,
        ),
        Stage::Non => (
            [0.047, 0.032, 0.075, 0.050],
            [0.067, 0.097, 0.074, 0.088],
            [0.395, 0.182, 0.466, 0.039, 0.119, 0.405],
            [0.007, -0.054, 0.047, 0.247],
            0.019,
        ),
    }
}

/// Data-generating truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    pub outcome_names: Vec<String>,
    pub moments: MomentParams,
    pub correlations: CorrelationParams,
    pub distribution: Distribution,
    pub n_subjects: usize,
    pub times: usize,
}

impl TruthSpec {
    pub fn preset(stage: Stage, distribution: Distribution, n_subjects: usize, times: usize) -> Result<Self> {
        let (mu, sd, eta, rho, gamma) = stage_values(stage);
        let spec = StructureSpec::new(4, times)?;
        let truth = Self {
            outcome_names: STAGE_OUTCOMES.iter().map(|s| s.to_string()).collect(),
            moments: MomentParams::new(mu.to_vec(), sd.to_vec())?,
            correlations: CorrelationParams::new(&spec, eta.to_vec(), rho.to_vec(), gamma)?,
            distribution,
            n_subjects,
            times,
        };
        truth.validate()?;
        Ok(truth)
    }

    pub fn spec(&self) -> Result<StructureSpec> {
        StructureSpec::new(self.moments.outcomes(), self.times)
    }

    pub fn correlation_matrix(&self) -> Result<DMatrix<f64>> {
        assemble_correlation(&self.spec()?, &self.correlations, self.times)
    }

    pub fn validate(&self) -> Result<()> {
        if self.outcome_names.len() != self.moments.outcomes() {
            return Err(Error::InvalidArgument("outcome names do not match the moments".into()));
        }
        if self.n_subjects < 2 {
            return Err(Error::InvalidArgument("need at least 2 subjects".into()));
        }
        if !linalg::is_positive_definite(&self.correlation_matrix()?, PD_TOL)? {
            return Err(Error::NotPositiveDefinite("truth correlation matrix".into()));
        }
        Ok(())
    }

    pub fn cross_section(&self) -> Result<CrossSectionMoments> {
        CrossSectionMoments::from_params(&self.moments, &self.correlations)
    }

    /// Optimal weights and SRM implied by the truth.
    pub fn true_weights(&self) -> Result<(WeightVector, f64)> {
        optimal_weights(&self.cross_section()?)
    }
}

/// Complete data: `n_subjects` subjects with all `times` rows observed.
pub fn generate_dataset<R: Rng + ?Sized>(truth: &TruthSpec, rng: &mut R) -> Result<Dataset> {
    truth.validate()?;
    let l = truth.moments.outcomes();
    let p = l * truth.times;
    let corr = truth.correlation_matrix()?;
    let mean = truth.moments.full_mean(truth.times);
    let sd = DVector::from_fn(p, |m, _| truth.moments.sd[m % l]);
    let normal = |rng: &mut R, n: usize| DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));

    let draw: Box<dyn Fn(&mut R) -> DVector<f64>> = match truth.distribution {
        Distribution::Normal | Distribution::StudentT { .. } => {
            let sigma = assemble_covariance(&truth.moments, &corr)?;
            let chol = sigma
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite("truth covariance".into()))?;
            let lower = chol.l();
            match truth.distribution {
                Distribution::StudentT { dof } => {
                    let chi = ChiSquared::new(dof)
                        .map_err(|e| Error::InvalidArgument(format!("degrees of freedom: {e}")))?;
                    Box::new(move |rng: &mut R| {
                        let w = (chi.sample(rng) / dof).sqrt();
                        &mean + &lower * normal(rng, p) / w
                    })
                }
                _ => Box::new(move |rng: &mut R| &mean + &lower * normal(rng, p)),
            }
        }
        Distribution::SkewNormal { shape } => {
            let alpha = DVector::from_element(p, shape);
            let oa = &corr * &alpha;
            let delta = &oa / (1.0 + alpha.dot(&oa)).sqrt();
            let mut aug = DMatrix::<f64>::identity(p + 1, p + 1);
            aug.view_mut((1, 1), (p, p)).copy_from(&corr);
            for m in 0..p {
                aug[(0, m + 1)] = delta[m];
                aug[(m + 1, 0)] = delta[m];
            }
            let chol = aug
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite("skew-normal augmented matrix".into()))?;
            let lower = chol.l();
            Box::new(move |rng: &mut R| {
                let x = &lower * normal(rng, p + 1);
                let sign = if x[0] > 0.0 { 1.0 } else { -1.0 };
                DVector::from_fn(p, |m, _| mean[m] + sd[m] * sign * x[m + 1])
            })
        }
    };
    let subjects = (0..truth.n_subjects)
        .map(|i| {
            let y = draw(rng);
            Subject::new(format!("s{}", i + 1), l, y.iter().map(|v| Some(*v)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(truth.outcome_names.clone(), subjects)
}

/// Missingness mechanism applied independently at every subject-time row.
///
/// `row_dist[k]` is the probability of exactly `k + 1` missing outcomes for
/// `k < L - 1`, and `row_dist[L - 1]` the probability of a fully observed row.
/// Rows therefore always keep at least one observed outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessSpec {
    pub column_probs: Vec<f64>,
    pub row_dist: Vec<f64>,
}

impl MissingnessSpec {
    pub fn new(column_probs: Vec<f64>, row_dist: Vec<f64>) -> Result<Self> {
        let s = Self {
            column_probs,
            row_dist,
        };
        s.validate()?;
        Ok(s)
    }

    /// Four-outcome mechanism with heavy missingness in the last two outcomes.
    pub fn default_four() -> Self {
        Self {
            column_probs: vec![0.05, 0.05, 0.75, 0.75],
            row_dist: vec![0.1, 0.6, 0.1, 0.2],
        }
    }

    /// Fully observed rows.
    pub fn none(outcomes: usize) -> Self {
        let mut row_dist = vec![0.0; outcomes];
        row_dist[outcomes - 1] = 1.0;
        Self {
            column_probs: vec![0.0; outcomes],
            row_dist,
        }
    }

    pub fn outcomes(&self) -> usize {
        self.column_probs.len()
    }

    /// Probability of `k` missing outcomes, for `k = 0..L-1`.
    pub fn count_probs(&self) -> Vec<f64> {
        let l = self.outcomes();
        let mut out = vec![0.0; l];
        out[0] = self.row_dist[l - 1];
        out[1..l].copy_from_slice(&self.row_dist[..l - 1]);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.outcomes();
        if l < 2 || self.row_dist.len() != l {
            return Err(Error::InvalidArgument(format!(
                "need matching column and row distributions over at least 2 outcomes, got {} and {}",
                l,
                self.row_dist.len()
            )));
        }
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if !self.column_probs.iter().all(in_unit) || !self.row_dist.iter().all(in_unit) {
            return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = self.row_dist.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("row distribution sums to {total}")));
        }
        let positive = self.column_probs.iter().filter(|&&c| c > 0.0).count();
        if let Some(k) = self.count_probs().iter().rposition(|&p| p > 0.0) {
            if k > positive {
                return Err(Error::InvalidArgument(format!(
                    "{k} missing outcomes per row is possible but only {positive} outcomes can be missing"
                )));
            }
        }
        Ok(())
    }
}

/// Weighted choice of `k` distinct indices, drawing one at a time proportional to weight.
fn choose_weighted<R: Rng + ?Sized>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let mut w = weights.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = w.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = w.iter().rposition(|&x| x > 0.0).expect("validated");
        for (i, &x) in w.iter().enumerate() {
            if x > 0.0 && u < x {
                pick = i;
                break;
            }
            u -= x;
        }
        w[pick] = 0.0;
        out.push(pick);
    }
    out
}

/// Masks cells of a complete dataset: per row, draw the count then which outcomes.
pub fn apply_missingness<R: Rng + ?Sized>(
    data: &Dataset,
    spec: &MissingnessSpec,
    rng: &mut R,
) -> Result<Dataset> {
    spec.validate()?;
    let l = data.outcomes();
    if spec.outcomes() != l {
        return Err(Error::InvalidArgument(format!(
            "missingness is for {} outcomes, data has {l}",
            spec.outcomes()
        )));
    }
    let counts = spec.count_probs();
    let mut out = data.clone();
    for s in &mut out.subjects {
        for j in 0..s.n_times() {
            let u: f64 = rng.random();
            let mut cum = 0.0;
            let mut k = counts.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            for (c, &p) in counts.iter().enumerate() {
                cum += p;
                if u < cum {
                    k = c;
                    break;
                }
            }
            for o in choose_weighted(&spec.column_probs, k, rng) {
                s.set_missing(j * l + o)?;
            }
        }
    }
    Ok(out)
}

/// SplitMix64 output for `state`, used to derive independent seeds.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `i` under `master`.
pub fn replicate_seed(master: u64, i: usize) -> u64 {
    splitmix64(master.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Fit summary of one simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub index: usize,
    pub seed: u64,
    pub weights: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub srm: f64,
    pub srm_interval: (f64, f64),
    /// Chain-averaged rates, one per correlation.
    pub corr_acceptance: Vec<f64>,
    pub corr_pd_rate: Vec<f64>,
    pub sd_acceptance: Vec<f64>,
}

/// Coverage, bias and root-MSE for one quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct OpCharRow {
    pub quantity: String,
    pub truth: f64,
    pub coverage: f64,
    pub bias: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpCharReport {
    pub rows: Vec<OpCharRow>,
}

/// Mean rates across replicates for one sampled parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRates {
    pub parameter: String,
    pub acceptance: f64,
    pub pd_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub truth_weights: Vec<f64>,
    pub truth_srm: f64,
    pub correlation_names: Vec<String>,
    pub replicates: Vec<ReplicateResult>,
    pub report: OpCharReport,
    pub rates: Vec<ParamRates>,
}

fn run_replicate(
    truth: &TruthSpec,
    miss: Option<&MissingnessSpec>,
    config: &SamplerConfig,
    index: usize,
    seed: u64,
) -> Result<ReplicateResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = generate_dataset(truth, &mut rng)?;
    if let Some(m) = miss {
        data = apply_missingness(&data, m, &mut rng)?;
    }
    let cfg = SamplerConfig {
        seed: splitmix64(seed),
        ..config.clone()
    };
    let chains = run_chains(&data, &cfg)?;
    let summary = posterior_weights(&chains)?;
    let avg = |f: &dyn Fn(&crate::sampler::ChainOutput) -> &Vec<f64>| {
        let n = chains.len() as f64;
        let width = f(&chains[0]).len();
        (0..width)
            .map(|k| chains.iter().map(|c| f(c)[k]).sum::<f64>() / n)
            .collect::<Vec<_>>()
    };
    Ok(ReplicateResult {
        index,
        seed,
        weights: summary.point.as_slice().to_vec(),
        lower: summary.lower.clone(),
        upper: summary.upper.clone(),
        srm: summary.srm_opt,
        srm_interval: summary.srm_opt_interval,
        corr_acceptance: avg(&|c| &c.corr_acceptance),
        corr_pd_rate: avg(&|c| &c.corr_pd_rate),
        sd_acceptance: avg(&|c| &c.sd_acceptance),
    })
}

/// Simulates `replicates` datasets, fits each and scores the weight and SRM intervals.
pub fn run_study(
    truth: &TruthSpec,
    miss: Option<&MissingnessSpec>,
    replicates: usize,
    config: &SamplerConfig,
    master_seed: u64,
) -> Result<StudyResult> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicates".into()));
    }
    config.validate()?;
    truth.validate()?;
    let (w_true, srm_true) = truth.true_weights()?;
    let w_true = w_true.into_vec();
    let reps = crate::sampler::with_pool(|| {
        (0..replicates)
            .into_par_iter()
            .map(|i| run_replicate(truth, miss, config, i, replicate_seed(master_seed, i)))
            .collect::<Result<Vec<_>>>()
    })?;
    let l = w_true.len();
    let n = reps.len() as f64;
    let score = |name: String, truth: f64, est: &dyn Fn(&ReplicateResult) -> (f64, f64, f64)| {
        let mut cover = 0.0;
        let mut bias = 0.0;
        let mut sq = 0.0;
        for r in &reps {
            let (point, lo, hi) = est(r);
            if lo <= truth && truth <= hi {
                cover += 1.0;
            }
            bias += point - truth;
            sq += (point - truth).powi(2);
        }
        OpCharRow {
            quantity: name,
            truth,
            coverage: cover / n,
            bias: bias / n,
            rmse: (sq / n).sqrt(),
        }
    };
    let mut rows: Vec<OpCharRow> = (0..l)
        .map(|k| {
            score(format!("w.{}", truth.outcome_names[k]), w_true[k], &|r| {
                (r.weights[k], r.lower[k], r.upper[k])
            })
        })
        .collect();
    rows.push(score("SRM".into(), srm_true, &|r| {
        (r.srm, r.srm_interval.0, r.srm_interval.1)
    }));

    let spec = truth.spec()?;
    let correlation_names: Vec<String> = spec.params().iter().map(|p| p.to_string()).collect();
    let mean_of = |f: &dyn Fn(&ReplicateResult) -> f64| reps.iter().map(f).sum::<f64>() / n;
    let mut rates: Vec<ParamRates> = (0..l)
        .map(|o| ParamRates {
            parameter: format!("sd.{}", o + 1),
            acceptance: mean_of(&|r| r.sd_acceptance[o]),
            pd_rate: None,
        })
        .collect();
    rates.extend(correlation_names.iter().enumerate().map(|(k, name)| ParamRates {
        parameter: name.clone(),
        acceptance: mean_of(&|r| r.corr_acceptance[k]),
        pd_rate: Some(mean_of(&|r| r.corr_pd_rate[k])),
    }));
    Ok(StudyResult {
        truth_weights: w_true,
        truth_srm: srm_true,
        correlation_names,
        replicates: reps,
        report: OpCharReport { rows },
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_names() {
        assert_eq!("normal".parse::<Distribution>().unwrap(), Distribution::Normal);
        assert_eq!("t10".parse::<Distribution>().unwrap(), Distribution::T10);
        assert_eq!("T3".parse::<Distribution>().unwrap(), Distribution::T3);
        assert_eq!("skew-normal".parse::<Distribution>().unwrap(), Distribution::SKEW_NORMAL);
        assert_eq!(Distribution::SKEW_NORMAL.to_string(), "skewnormal");
        assert_eq!(Distribution::T10.to_string(), "t10");
        assert!("cauchy".parse::<Distribution>().is_err());
    }

    #[test]
    fn presets_are_pd_up_to_seven_times() {
        for stage in [Stage::Early, Stage::Late, Stage::Non] {
            for j in 1..=7 {
                TruthSpec::preset(stage, Distribution::Normal, 50, j).unwrap();
            }
        }
        // the late-stage structure loses definiteness at eight times
        assert!(matches!(
            TruthSpec::preset(Stage::Late, Distribution::Normal, 50, 8),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn identity_truth_recovers_identity_covariance() {
        let spec = StructureSpec::new(2, 2).unwrap();
        let truth = TruthSpec {
            outcome_names: vec!["a".into(), "b".into()],
            moments: MomentParams::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            correlations: CorrelationParams::zeros(&spec),
            distribution: Distribution::Normal,
            n_subjects: 10_000,
            times: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = generate_dataset(&truth, &mut rng).unwrap();
        let rows: Vec<Vec<f64>> = d
            .subjects
            .iter()
            .map(|s| s.cells().into_iter().map(Option::unwrap).collect())
            .collect();
        for a in 0..4 {
            for b in 0..4 {
                let c = rows.iter().map(|r| r[a] * r[b]).sum::<f64>() / rows.len() as f64;
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((c - target).abs() < 5e-2, "({a},{b}) = {c}");
            }
        }
    }

    #[test]
    fn no_missingness_is_identity() {
        let truth = TruthSpec::preset(Stage::Early, Distribution::Normal, 20, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = generate_dataset(&truth, &mut rng).unwrap();
        let m = apply_missingness(&d, &MissingnessSpec::none(4), &mut rng).unwrap();
        assert_eq!(d, m);
    }

    #[test]
    fn infeasible_missingness_is_rejected() {
        // three missing per row but only two outcomes can go missing
        let m = MissingnessSpec::new(vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]);
        assert!(m.is_err());
        assert!(MissingnessSpec::new(vec![0.5, 0.5, 0.0, 0.0], vec![0.2, 0.8, 0.0, 0.0]).is_ok());
        assert!(MissingnessSpec::new(vec![0.5; 4], vec![0.5, 0.6, 0.0, 0.0]).is_err());
    }

    #[test]
    fn count_layout_puts_complete_rows_first() {
        let m = MissingnessSpec::default_four();
        assert_eq!(m.count_probs(), vec![0.2, 0.1, 0.6, 0.1]);
    }

    #[test]
    fn replicate_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|i| replicate_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_ne!(replicate_seed(7, 0), replicate_seed(8, 0));
    }

    #[test]
    fn weighted_choice_respects_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = choose_weighted(&[0.3, 0.0, 0.7, 0.1], 3, &mut rng);
            assert!(!c.contains(&1));
            let mut s = c.clone();
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 3);
        }
    }
}
