//! Weighted constructs: standardized response mean and its simplex maximizer.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, PD_TOL};
use crate::sampler::{median, ChainOutput};
use crate::structure::{CorrelationParams, MomentParams, StructureSpec};

const SIMPLEX_TOL: f64 = 1e-12;
const POLISH_ITERS: usize = 100;
const POLISH_TOL: f64 = 1e-12;
/// Enumeration visits `2^L - 1` supports.
pub const MAX_OUTCOMES: usize = 16;

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if w.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("negative weight in {w:?}")));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL * w.len() as f64 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn equal(l: usize) -> Self {
        Self(vec![1.0 / l as f64; l])
    }

    pub fn unit(l: usize, k: usize) -> Self {
        let mut w = vec![0.0; l];
        w[k] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Mean change and single-time covariance of the outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionMoments {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl CrossSectionMoments {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != mu.len() {
            return Err(Error::InvalidArgument(format!(
                "mean has length {} but covariance is {}x{}",
                mu.len(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if !linalg::is_positive_definite(&sigma, PD_TOL)? {
            return Err(Error::NotPositiveDefinite("cross-sectional covariance".into()));
        }
        Ok(Self { mu, sigma })
    }

    /// `Sigma_eta[a][b] = s_a s_b eta(a, b)`, with `s_a^2` on the diagonal.
    pub fn from_parts(mu: &[f64], sd: &[f64], eta: &[f64]) -> Result<Self> {
        let l = mu.len();
        let spec = StructureSpec::new(l, 1)?;
        if sd.len() != l || eta.len() != spec.n_eta() {
            return Err(Error::InvalidArgument(format!(
                "expected {l} sds and {} correlations",
                spec.n_eta()
            )));
        }
        let sigma = DMatrix::from_fn(l, l, |a, b| {
            let r = match a.cmp(&b) {
                std::cmp::Ordering::Equal => 1.0,
                std::cmp::Ordering::Less => eta[spec.eta_index(a, b)],
                std::cmp::Ordering::Greater => eta[spec.eta_index(b, a)],
            };
            sd[a] * sd[b] * r
        });
        Self::new(DVector::from_column_slice(mu), sigma)
    }

    pub fn from_params(moments: &MomentParams, corr: &CorrelationParams) -> Result<Self> {
        Self::from_parts(&moments.mu, &moments.sd, &corr.eta)
    }

    pub fn outcomes(&self) -> usize {
        self.mu.len()
    }

    /// Restriction to a subset of outcomes, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        if idx.iter().any(|&i| i >= self.outcomes()) {
            return Err(Error::InvalidArgument(format!("outcome index out of range in {idx:?}")));
        }
        Self::new(
            linalg::subvector(&self.mu, idx),
            linalg::principal_submatrix(&self.sigma, idx),
        )
    }
}

fn srm_raw(w: &[f64], m: &CrossSectionMoments) -> f64 {
    let w = DVector::from_column_slice(w);
    let num = w.dot(&m.mu);
    let var = (&m.sigma * &w).dot(&w);
    num / var.sqrt()
}

/// `w' mu / sqrt(w' Sigma w)`.
pub fn srm(w: &WeightVector, m: &CrossSectionMoments) -> Result<f64> {
    if w.as_slice().len() != m.outcomes() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} outcomes",
            w.as_slice().len(),
            m.outcomes()
        )));
    }
    Ok(srm_raw(w.as_slice(), m))
}

/// Individual SRMs `mu_l / s_l`.
pub fn individual_srms(m: &CrossSectionMoments) -> Vec<f64> {
    (0..m.outcomes())
        .map(|l| m.mu[l] / m.sigma[(l, l)].sqrt())
        .collect()
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn srm_gradient(w: &[f64], m: &CrossSectionMoments) -> Vec<f64> {
    let wv = DVector::from_column_slice(w);
    let sw = &m.sigma * &wv;
    let var = sw.dot(&wv);
    let sd = var.sqrt();
    let num = wv.dot(&m.mu);
    (0..w.len())
        .map(|i| m.mu[i] / sd - num * sw[i] / (var * sd))
        .collect()
}

fn polish(mut w: Vec<f64>, m: &CrossSectionMoments) -> Vec<f64> {
    let mut f = srm_raw(&w, m);
    let mut step = 1.0;
    for _ in 0..POLISH_ITERS {
        let g = srm_gradient(&w, m);
        let mut improved = false;
        while step > 1e-16 {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            let trial = project_simplex(&trial);
            let ft = srm_raw(&trial, m);
            if ft > f + POLISH_TOL {
                w = trial;
                f = ft;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    w
}

/// Supports of size `k` over `l` outcomes, in lexicographic order.
fn combinations(l: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < l - k + i) else {
            return out;
        };
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// SRM-maximizing weights on the simplex and the attained SRM.
///
/// Each support `S` gives the candidate direction `Sigma_S^{-1} mu_S` when that is
/// strictly positive; singletons are always candidates. Earlier (smaller, then
/// lexicographically first) supports win ties.
pub fn optimal_weights(m: &CrossSectionMoments) -> Result<(WeightVector, f64)> {
    let l = m.outcomes();
    if l == 0 || l > MAX_OUTCOMES {
        return Err(Error::InvalidArgument(format!(
            "support enumeration needs 1..={MAX_OUTCOMES} outcomes, got {l}"
        )));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let consider = |w: Vec<f64>, best: &mut Option<(Vec<f64>, f64)>| {
        let v = srm_raw(&w, m);
        let better = match best {
            None => true,
            Some((_, b)) => v > *b + SIMPLEX_TOL * b.abs().max(1.0),
        };
        if better {
            *best = Some((w, v));
        }
    };
    for k in 1..=l {
        for s in combinations(l, k) {
            if k == 1 {
                consider(WeightVector::unit(l, s[0]).into_vec(), &mut best);
                continue;
            }
            let sub = linalg::principal_submatrix(&m.sigma, &s);
            let Some(chol) = sub.cholesky() else {
                continue;
            };
            let d = chol.solve(&linalg::subvector(&m.mu, &s));
            if d.iter().all(|&x| x > 0.0) {
                let total: f64 = d.iter().sum();
                let mut w = vec![0.0; l];
                for (pos, &i) in s.iter().enumerate() {
                    w[i] = d[pos] / total;
                }
                consider(w, &mut best);
            }
        }
    }
    let (w, v) = best.expect("singletons are always candidates");
    if v <= 0.0 {
        return Ok((WeightVector(w), v));
    }
    let w = polish(w, m);
    let v = srm_raw(&w, m);
    Ok((WeightVector(w), v))
}

/// Linear-interpolation percentile (`p` in `[0, 1]`) of unsorted data.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Point estimates and credible intervals of the optimal construct.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSummary {
    pub outcome_names: Vec<String>,
    /// Optimal weights at the pooled posterior medians.
    pub point: WeightVector,
    pub srm_opt: f64,
    pub srm_equal: f64,
    pub srm_individual: Vec<f64>,
    /// Componentwise 2.5% and 97.5% percentiles of the per-draw optimal weights.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub srm_opt_interval: (f64, f64),
    pub srm_equal_interval: (f64, f64),
    /// Per-draw optimal weights, pooled over chains in chain order.
    pub draw_weights: Vec<Vec<f64>>,
    pub draw_srm_opt: Vec<f64>,
    pub draw_srm_equal: Vec<f64>,
}

fn cross_section_of_row(row: &[f64], l: usize) -> Result<CrossSectionMoments> {
    let n_eta = l * (l - 1) / 2;
    CrossSectionMoments::from_parts(&row[..l], &row[l..2 * l], &row[2 * l..2 * l + n_eta])
}

/// Summaries of the optimal weights over posterior draws.
pub fn posterior_weights(outputs: &[ChainOutput]) -> Result<WeightSummary> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no chains".into()))?;
    let l = first.spec.outcomes();
    let rows: Vec<&Vec<f64>> = outputs.iter().flat_map(|o| o.draws.iter()).collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no posterior draws".into()));
    }
    if outputs.iter().any(|o| o.spec.outcomes() != l) {
        return Err(Error::InvalidArgument("chains disagree on the outcome count".into()));
    }
    let width = 2 * l + l * (l - 1) / 2;
    let medians: Vec<f64> = (0..width)
        .map(|c| median(&mut rows.iter().map(|r| r[c]).collect::<Vec<_>>()))
        .collect();
    let at_median = cross_section_of_row(&medians, l)?;
    let (point, srm_opt) = optimal_weights(&at_median)?;
    let equal = WeightVector::equal(l);

    let per_draw: Vec<(Vec<f64>, f64, f64)> = crate::sampler::with_pool(|| {
        rows.par_iter()
            .map(|row| {
                let m = cross_section_of_row(row, l)?;
                let (w, s) = optimal_weights(&m)?;
                Ok((w.into_vec(), s, srm_raw(equal.as_slice(), &m)))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let draw_weights: Vec<Vec<f64>> = per_draw.iter().map(|d| d.0.clone()).collect();
    let draw_srm_opt: Vec<f64> = per_draw.iter().map(|d| d.1).collect();
    let draw_srm_equal: Vec<f64> = per_draw.iter().map(|d| d.2).collect();
    let column = |k: usize| draw_weights.iter().map(|w| w[k]).collect::<Vec<_>>();
    let lower = (0..l).map(|k| percentile(&column(k), 0.025).clamp(0.0, 1.0)).collect();
    let upper = (0..l).map(|k| percentile(&column(k), 0.975).clamp(0.0, 1.0)).collect();
    let interval = |v: &[f64]| (percentile(v, 0.025), percentile(v, 0.975));
    Ok(WeightSummary {
        outcome_names: first.outcome_names.clone(),
        srm_equal: srm_raw(equal.as_slice(), &at_median),
        srm_individual: individual_srms(&at_median),
        point,
        srm_opt,
        lower,
        upper,
        srm_opt_interval: interval(&draw_srm_opt),
        srm_equal_interval: interval(&draw_srm_equal),
        draw_weights,
        draw_srm_opt,
        draw_srm_equal,
    })
}

/// Vertices of the regular tetrahedron used for four-outcome weights.
pub const TETRAHEDRON: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.5, 0.866_025_403_784_438_6, 0.0],
    [0.5, 0.288_675_134_594_812_9, 0.816_496_580_927_726],
];

/// Maps four-outcome weights to points in the regular tetrahedron.
pub fn export_barycentric(weights: &[Vec<f64>]) -> Result<Vec<[f64; 3]>> {
    weights
        .iter()
        .map(|w| {
            if w.len() != 4 {
                return Err(Error::InvalidArgument(format!(
                    "barycentric export needs 4 outcomes, got {}",
                    w.len()
                )));
            }
            let mut p = [0.0; 3];
            for (wi, v) in w.iter().zip(TETRAHEDRON.iter()) {
                for d in 0..3 {
                    p[d] += wi * v[d];
                }
            }
            Ok(p)
        })
        .collect()
}
