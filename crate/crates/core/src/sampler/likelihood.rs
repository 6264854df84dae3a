//! Observed-data normal likelihood grouped by missingness pattern.
//!
//! Subjects sharing the same set of observed cells share one principal submatrix of
//! `R`, so each pattern keeps only its count, sum and cross-product of observations.
//! With `Sigma = S R S`, the factor of `R_P` is unaffected by variance updates, and
//! the cache below only changes when a correlation moves.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::linalg::{self, PD_TOL};
use crate::structure::{Cell, Dataset, StructureSpec};

/// Sufficient statistics for the subjects observed on exactly `cells`.
#[derive(Debug, Clone)]
pub struct PatternGroup {
    /// Flat indices into the full `J * L` layout.
    pub cells: Vec<usize>,
    /// Outcome of each cell.
    pub outcome: Vec<usize>,
    pub n: f64,
    pub sum: Vec<f64>,
    /// Row-major `sum y y'`.
    pub cross: Vec<f64>,
}

impl PatternGroup {
    pub fn dim(&self) -> usize {
        self.cells.len()
    }
}

/// Groups subjects by their observed-cell pattern, ordered by pattern.
pub fn group_patterns(data: &Dataset) -> Vec<PatternGroup> {
    let l = data.outcomes();
    let mut map: BTreeMap<Vec<usize>, PatternGroup> = BTreeMap::new();
    for s in &data.subjects {
        let cells = s.observed_indices();
        let y = s.observed_values();
        let p = cells.len();
        let g = map.entry(cells.clone()).or_insert_with(|| PatternGroup {
            outcome: cells.iter().map(|m| m % l).collect(),
            cells,
            n: 0.0,
            sum: vec![0.0; p],
            cross: vec![0.0; p * p],
        });
        g.n += 1.0;
        for a in 0..p {
            g.sum[a] += y[a];
            for b in 0..p {
                g.cross[a * p + b] += y[a] * y[b];
            }
        }
    }
    map.into_values().collect()
}

/// Inverse and log-determinant of each pattern's correlation submatrix.
#[derive(Debug, Clone)]
pub struct PatternFactors {
    pub rinv: Vec<Vec<f64>>,
    pub logdet: Vec<f64>,
}

/// Factors one pattern of `corr`; `None` if the submatrix is not PD.
pub fn factor_pattern(corr: &DMatrix<f64>, g: &PatternGroup) -> Option<(Vec<f64>, f64)> {
    let p = g.dim();
    let mut a = vec![0.0; p * p];
    for (r, &m) in g.cells.iter().enumerate() {
        for (c, &n) in g.cells.iter().enumerate() {
            a[r * p + c] = corr[(m, n)];
        }
    }
    if !linalg::chol_flat(&mut a, p, PD_TOL) {
        return None;
    }
    let logdet = linalg::chol_flat_logdet(&a, p);
    let mut work = vec![0.0; p * p];
    let mut inv = vec![0.0; p * p];
    linalg::chol_flat_inverse(&a, p, &mut work, &mut inv);
    Some((inv, logdet))
}

impl PatternFactors {
    pub fn compute(corr: &DMatrix<f64>, groups: &[PatternGroup]) -> Option<Self> {
        let mut rinv = Vec::with_capacity(groups.len());
        let mut logdet = Vec::with_capacity(groups.len());
        for g in groups {
            let (inv, ld) = factor_pattern(corr, g)?;
            rinv.push(inv);
            logdet.push(ld);
        }
        Some(Self { rinv, logdet })
    }
}

/// Log-likelihood of one pattern given its correlation factor.
pub fn pattern_log_lik(g: &PatternGroup, rinv: &[f64], logdet: f64, mu: &[f64], sd: &[f64]) -> f64 {
    let p = g.dim();
    let m: Vec<f64> = g.outcome.iter().map(|&o| mu[o]).collect();
    let c: Vec<f64> = g.outcome.iter().map(|&o| 1.0 / sd[o]).collect();
    let ln_sd: f64 = g.outcome.iter().map(|&o| sd[o].ln()).sum();
    let n = g.n;
    // tr(Sigma_P^{-1} S_P(mu)) with S_P(mu) = YY - s mu' - mu s' + n mu mu'
    let mut tr = 0.0;
    for a in 0..p {
        let row = &g.cross[a * p..(a + 1) * p];
        let ri = &rinv[a * p..(a + 1) * p];
        let (sa, ma) = (g.sum[a], m[a]);
        let mut acc = 0.0;
        for b in 0..p {
            let s = row[b] - sa * m[b] - ma * g.sum[b] + n * ma * m[b];
            acc += ri[b] * s * c[b];
        }
        tr += acc * c[a];
    }
    -0.5 * n * (p as f64 * (2.0 * PI).ln() + logdet + 2.0 * ln_sd) - 0.5 * tr
}

pub fn log_likelihood(
    groups: &[PatternGroup],
    factors: &PatternFactors,
    mu: &[f64],
    sd: &[f64],
) -> f64 {
    groups
        .iter()
        .enumerate()
        .map(|(i, g)| pattern_log_lik(g, &factors.rinv[i], factors.logdet[i], mu, sd))
        .sum()
}

/// For each parameter in sweep order, which groups contain at least one of its cells.
pub fn affected_groups(spec: &StructureSpec, groups: &[PatternGroup]) -> Vec<Vec<usize>> {
    spec.params()
        .into_iter()
        .map(|param| {
            groups
                .iter()
                .enumerate()
                .filter(|(_, g)| {
                    g.cells.iter().enumerate().any(|(a, &m)| {
                        g.cells[a + 1..]
                            .iter()
                            .any(|&n| spec.cell_unchecked(m, n) == Cell::Param(param))
                    })
                })
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}
