//! Structured correlation matrices for `L` outcomes measured at `J` exchangeable times.
//!
//! Outcomes are laid out time-major: flat index `m = j * L + l` (0-based) for time
//! `j` and outcome `l`. Three kinds of unique correlation fill the off-diagonal:
//!
//! * `eta(l, l')` between two outcomes at the same time,
//! * `rho(l)` between two times of the same outcome,
//! * `gamma` between different outcomes at different times.
//!
//! The unique parameters are ordered `eta` pairs (lexicographic), then `rho`s, then
//! `gamma`, giving `q = C(L,2) + L + 1` parameters when `J >= 2` and `q = C(L,2)`
//! when `J = 1`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Dimensions of the structured model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StructureSpec {
    outcomes: usize,
    times: usize,
}

/// One unique correlation parameter. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorrParam {
    /// Same time, outcomes `a < b`.
    Eta(usize, usize),
    /// Same outcome, different times.
    Rho(usize),
    /// Different outcome and different time.
    Gamma,
}

/// What sits in one cell of the structured matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Unit,
    Param(CorrParam),
}

impl StructureSpec {
    pub fn new(outcomes: usize, times: usize) -> Result<Self> {
        if outcomes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 outcomes, got {outcomes}"
            )));
        }
        if times < 1 {
            return Err(Error::InvalidArgument("need at least 1 time".into()));
        }
        Ok(Self { outcomes, times })
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn times(&self) -> usize {
        self.times
    }

    /// Total dimension `p = J * L`.
    pub fn dim(&self) -> usize {
        self.outcomes * self.times
    }

    pub fn n_eta(&self) -> usize {
        self.outcomes * (self.outcomes - 1) / 2
    }

    /// Whether `rho` and `gamma` exist (they need two distinct times).
    pub fn has_cross_time(&self) -> bool {
        self.times >= 2
    }

    /// Number of active unique parameters `q`.
    pub fn n_params(&self) -> usize {
        if self.has_cross_time() {
            self.n_eta() + self.outcomes + 1
        } else {
            self.n_eta()
        }
    }

    /// Active parameters in sweep order.
    pub fn params(&self) -> Vec<CorrParam> {
        let mut out = Vec::with_capacity(self.n_params());
        for a in 0..self.outcomes {
            for b in (a + 1)..self.outcomes {
                out.push(CorrParam::Eta(a, b));
            }
        }
        if self.has_cross_time() {
            out.extend((0..self.outcomes).map(CorrParam::Rho));
            out.push(CorrParam::Gamma);
        }
        out
    }

    /// Position of an `eta` pair inside the lexicographic pair list.
    pub fn eta_index(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let l = self.outcomes;
        a * (2 * l - a - 1) / 2 + (b - a - 1)
    }

    /// `(time, outcome)` of a flat index.
    pub fn split(&self, m: usize) -> (usize, usize) {
        (m / self.outcomes, m % self.outcomes)
    }

    pub fn flat(&self, time: usize, outcome: usize) -> usize {
        time * self.outcomes + outcome
    }

    /// Cell content at flat indices `(m, n)`.
    pub fn cell(&self, m: usize, n: usize) -> Result<Cell> {
        let p = self.dim();
        if m >= p || n >= p {
            return Err(Error::InvalidArgument(format!(
                "index ({m}, {n}) outside a {p}x{p} structure"
            )));
        }
        Ok(self.cell_unchecked(m, n))
    }

    #[inline]
    pub(crate) fn cell_unchecked(&self, m: usize, n: usize) -> Cell {
        let (jm, lm) = self.split(m);
        let (jn, ln) = self.split(n);
        match (jm == jn, lm == ln) {
            (true, true) => Cell::Unit,
            (true, false) => Cell::Param(CorrParam::Eta(lm.min(ln), lm.max(ln))),
            (false, true) => Cell::Param(CorrParam::Rho(lm)),
            (false, false) => Cell::Param(CorrParam::Gamma),
        }
    }

    /// Whether a parameter exists in this structure.
    pub fn contains(&self, param: CorrParam) -> bool {
        match param {
            CorrParam::Eta(a, b) => a < b && b < self.outcomes,
            CorrParam::Rho(l) => self.has_cross_time() && l < self.outcomes,
            CorrParam::Gamma => self.has_cross_time(),
        }
    }

    /// Parses names such as `eta.1.2`, `rho.3` or `gamma` (1-based labels).
    pub fn parse_param(&self, name: &str) -> Result<CorrParam> {
        let bad = || Error::InvalidArgument(format!("unknown correlation parameter '{name}'"));
        let parts: Vec<&str> = name.trim().split('.').collect();
        let num = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .map(|v| v - 1)
                .ok_or_else(bad)
        };
        let param = match parts.as_slice() {
            ["gamma"] => CorrParam::Gamma,
            ["rho", l] => CorrParam::Rho(num(l)?),
            ["eta", a, b] => {
                let (a, b) = (num(a)?, num(b)?);
                if a == b {
                    return Err(bad());
                }
                CorrParam::Eta(a.min(b), a.max(b))
            }
            _ => return Err(bad()),
        };
        if self.contains(param) {
            Ok(param)
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for CorrParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CorrParam::Eta(a, b) => write!(f, "eta.{}.{}", a + 1, b + 1),
            CorrParam::Rho(l) => write!(f, "rho.{}", l + 1),
            CorrParam::Gamma => write!(f, "gamma"),
        }
    }
}

/// Values of the unique correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationParams {
    /// Indexed by lexicographic outcome pair.
    pub eta: Vec<f64>,
    /// Indexed by outcome.
    pub rho: Vec<f64>,
    pub gamma: f64,
}

impl CorrelationParams {
    /// All correlations zero (the identity matrix).
    pub fn zeros(spec: &StructureSpec) -> Self {
        Self {
            eta: vec![0.0; spec.n_eta()],
            rho: vec![0.0; spec.outcomes()],
            gamma: 0.0,
        }
    }

    pub fn new(spec: &StructureSpec, eta: Vec<f64>, rho: Vec<f64>, gamma: f64) -> Result<Self> {
        if eta.len() != spec.n_eta() || rho.len() != spec.outcomes() {
            return Err(Error::InvalidArgument(format!(
                "expected {} eta and {} rho values, got {} and {}",
                spec.n_eta(),
                spec.outcomes(),
                eta.len(),
                rho.len()
            )));
        }
        let out = Self { eta, rho, gamma };
        for v in out.eta.iter().chain(out.rho.iter()).chain(std::iter::once(&out.gamma)) {
            if !(v.abs() < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "correlation {v} is not inside (-1, 1)"
                )));
            }
        }
        Ok(out)
    }

    pub fn get(&self, spec: &StructureSpec, param: CorrParam) -> f64 {
        match param {
            CorrParam::Eta(a, b) => self.eta[spec.eta_index(a, b)],
            CorrParam::Rho(l) => self.rho[l],
            CorrParam::Gamma => self.gamma,
        }
    }

    pub fn set(&mut self, spec: &StructureSpec, param: CorrParam, value: f64) {
        match param {
            CorrParam::Eta(a, b) => self.eta[spec.eta_index(a, b)] = value,
            CorrParam::Rho(l) => self.rho[l] = value,
            CorrParam::Gamma => self.gamma = value,
        }
    }

    /// Active parameters as a flat vector in sweep order.
    pub fn to_vec(&self, spec: &StructureSpec) -> Vec<f64> {
        spec.params().into_iter().map(|p| self.get(spec, p)).collect()
    }

    /// Inverse of [`CorrelationParams::to_vec`]; inactive parameters are zero.
    pub fn from_vec(spec: &StructureSpec, values: &[f64]) -> Result<Self> {
        let params = spec.params();
        if values.len() != params.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} correlations, got {}",
                params.len(),
                values.len()
            )));
        }
        let mut out = Self::zeros(spec);
        for (p, &v) in params.into_iter().zip(values) {
            if !(v.abs() < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "correlation {p} = {v} is not inside (-1, 1)"
                )));
            }
            out.set(spec, p, v);
        }
        Ok(out)
    }

    #[inline]
    pub(crate) fn cell_value(&self, spec: &StructureSpec, cell: Cell) -> f64 {
        match cell {
            Cell::Unit => 1.0,
            Cell::Param(p) => self.get(spec, p),
        }
    }
}

/// Outcome means and standard deviations, shared across times.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentParams {
    pub mu: Vec<f64>,
    pub sd: Vec<f64>,
}

impl MomentParams {
    pub fn new(mu: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        if mu.len() != sd.len() {
            return Err(Error::InvalidArgument(
                "mean and sd vectors differ in length".into(),
            ));
        }
        if let Some(s) = sd.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "standard deviation {s} is not positive"
            )));
        }
        Ok(Self { mu, sd })
    }

    pub fn outcomes(&self) -> usize {
        self.mu.len()
    }

    /// Mean vector repeated over `times` time points.
    pub fn full_mean(&self, times: usize) -> DVector<f64> {
        let l = self.outcomes();
        DVector::from_fn(times * l, |m, _| self.mu[m % l])
    }
}

/// Dense `J_use * L` correlation matrix with every cell filled from `params`.
pub fn assemble_correlation(
    spec: &StructureSpec,
    params: &CorrelationParams,
    times_used: usize,
) -> Result<DMatrix<f64>> {
    if times_used < 1 || times_used > spec.times() {
        return Err(Error::InvalidArgument(format!(
            "times_used {times_used} outside 1..={}",
            spec.times()
        )));
    }
    let n = times_used * spec.outcomes();
    Ok(DMatrix::from_fn(n, n, |m, k| {
        params.cell_value(spec, spec.cell_unchecked(m, k))
    }))
}

/// `Sigma = S R S` with `S` the outcome standard deviations repeated across times.
pub fn assemble_covariance(moments: &MomentParams, corr: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = moments.outcomes();
    if !corr.is_square() || l == 0 || corr.nrows() % l != 0 {
        return Err(Error::InvalidArgument(format!(
            "correlation dimension {} is not a multiple of {l}",
            corr.nrows()
        )));
    }
    if let Some(s) = moments.sd.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "standard deviation {s} is not positive"
        )));
    }
    let n = corr.nrows();
    Ok(DMatrix::from_fn(n, n, |m, k| {
        moments.sd[m % l] * moments.sd[k % l] * corr[(m, k)]
    }))
}

/// One subject: `n_times` rows of `L` cells, each either observed or missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    n_times: usize,
    outcomes: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl Subject {
    /// Builds a subject from a time-major grid of optional values.
    pub fn new(id: impl Into<String>, outcomes: usize, cells: Vec<Option<f64>>) -> Result<Self> {
        let id = id.into();
        if outcomes == 0 || cells.is_empty() || cells.len() % outcomes != 0 {
            return Err(Error::Data(format!(
                "subject '{id}': {} cells do not form rows of {outcomes}",
                cells.len()
            )));
        }
        let observed: Vec<bool> = cells.iter().map(Option::is_some).collect();
        if !observed.iter().any(|&o| o) {
            return Err(Error::Data(format!("subject '{id}' has no observed cells")));
        }
        if let Some(v) = cells.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("subject '{id}' has non-finite value {v}")));
        }
        Ok(Self {
            n_times: cells.len() / outcomes,
            outcomes,
            values: cells.iter().map(|c| c.unwrap_or(0.0)).collect(),
            observed,
            id,
        })
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn get(&self, time: usize, outcome: usize) -> Option<f64> {
        let m = time * self.outcomes + outcome;
        self.observed[m].then(|| self.values[m])
    }

    pub fn is_observed(&self, m: usize) -> bool {
        self.observed[m]
    }

    pub fn mask(&self) -> &[bool] {
        &self.observed
    }

    /// Flat indices of observed cells, ascending.
    pub fn observed_indices(&self) -> Vec<usize> {
        (0..self.observed.len()).filter(|&m| self.observed[m]).collect()
    }

    pub fn observed_values(&self) -> Vec<f64> {
        (0..self.observed.len())
            .filter(|&m| self.observed[m])
            .map(|m| self.values[m])
            .collect()
    }

    pub fn cells(&self) -> Vec<Option<f64>> {
        (0..self.values.len())
            .map(|m| self.observed[m].then(|| self.values[m]))
            .collect()
    }

    /// Marks a cell missing. Fails if that would leave the subject with nothing observed.
    pub fn set_missing(&mut self, m: usize) -> Result<()> {
        if self.observed[m] && self.observed.iter().filter(|&&o| o).count() == 1 {
            return Err(Error::Data(format!(
                "subject '{}' would have no observed cells",
                self.id
            )));
        }
        self.observed[m] = false;
        self.values[m] = 0.0;
        Ok(())
    }
}

/// Longitudinal dataset with per-cell missingness.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub outcome_names: Vec<String>,
    pub subjects: Vec<Subject>,
}

impl Dataset {
    pub fn new(outcome_names: Vec<String>, subjects: Vec<Subject>) -> Result<Self> {
        let l = outcome_names.len();
        if l < 2 {
            return Err(Error::Data(format!("need at least 2 outcomes, got {l}")));
        }
        if subjects.is_empty() {
            return Err(Error::Data("dataset has no subjects".into()));
        }
        if let Some(s) = subjects.iter().find(|s| s.outcomes() != l) {
            return Err(Error::Data(format!(
                "subject '{}' has {} outcomes, expected {l}",
                s.id,
                s.outcomes()
            )));
        }
        Ok(Self {
            outcome_names,
            subjects,
        })
    }

    pub fn outcomes(&self) -> usize {
        self.outcome_names.len()
    }

    /// `J = max_i J_i`.
    pub fn max_times(&self) -> usize {
        self.subjects.iter().map(Subject::n_times).max().unwrap_or(0)
    }

    pub fn structure(&self) -> Result<StructureSpec> {
        StructureSpec::new(self.outcomes(), self.max_times())
    }

    /// Observed values of one outcome across all subjects and times.
    pub fn outcome_values(&self, outcome: usize) -> Vec<f64> {
        self.subjects
            .iter()
            .flat_map(|s| (0..s.n_times()).filter_map(move |j| s.get(j, outcome)))
            .collect()
    }
}

/// Mean subvector and principal covariance submatrix for a subject's observed cells.
///
/// `mu` and `sigma` may be larger than the subject's `J_i * L` block; the leading
/// block is used.
pub fn observed_projection(
    subject: &Subject,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let idx = subject.observed_indices();
    if idx.is_empty() {
        return Err(Error::Data(format!(
            "subject '{}' has no observed cells",
            subject.id
        )));
    }
    let need = subject.n_times() * subject.outcomes();
    if mu.len() < need || sigma.nrows() < need || !sigma.is_square() {
        return Err(Error::InvalidArgument(format!(
            "subject '{}' needs dimension {need}, got mean {} and covariance {}",
            subject.id,
            mu.len(),
            sigma.nrows()
        )));
    }
    Ok((
        linalg::subvector(mu, &idx),
        linalg::principal_submatrix(sigma, &idx),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec44() -> StructureSpec {
        StructureSpec::new(4, 4).unwrap()
    }

    #[test]
    fn cells_follow_time_major_layout() {
        let s = spec44();
        assert_eq!(s.cell(0, 1).unwrap(), Cell::Param(CorrParam::Eta(0, 1)));
        assert_eq!(s.cell(0, 4).unwrap(), Cell::Param(CorrParam::Rho(0)));
        assert_eq!(s.cell(2, 2).unwrap(), Cell::Unit);
        assert_eq!(s.cell(0, 5).unwrap(), Cell::Param(CorrParam::Gamma));
        assert_eq!(s.cell(7, 2).unwrap(), Cell::Param(CorrParam::Gamma));
        assert!(s.cell(16, 0).is_err());
    }

    #[test]
    fn parameter_count() {
        assert_eq!(spec44().n_params(), 11);
        assert_eq!(StructureSpec::new(4, 1).unwrap().n_params(), 6);
        assert!(StructureSpec::new(1, 3).is_err());
    }

    #[test]
    fn eta_index_is_lexicographic() {
        let s = spec44();
        let pairs: Vec<usize> = (0..4)
            .flat_map(|a| ((a + 1)..4).map(move |b| (a, b)))
            .map(|(a, b)| s.eta_index(a, b))
            .collect();
        assert_eq!(pairs, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn param_names_round_trip() {
        let s = spec44();
        for p in s.params() {
            assert_eq!(s.parse_param(&p.to_string()).unwrap(), p);
        }
        assert!(s.parse_param("eta.1.1").is_err());
        assert!(s.parse_param("rho.5").is_err());
        assert!(StructureSpec::new(3, 1).unwrap().parse_param("gamma").is_err());
    }

    #[test]
    fn zero_params_give_identity() {
        let s = spec44();
        let r = assemble_correlation(&s, &CorrelationParams::zeros(&s), 4).unwrap();
        assert_eq!(r, DMatrix::identity(16, 16));
    }

    #[test]
    fn covariance_two_outcomes() {
        let m = MomentParams::new(vec![0.0, 0.0], vec![2.0, 3.0]).unwrap();
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let sigma = assemble_covariance(&m, &r).unwrap();
        assert_eq!(sigma[(0, 1)], 3.0);
        assert_eq!(sigma[(1, 1)], 9.0);
    }

    #[test]
    fn covariance_rejects_bad_sd() {
        assert!(MomentParams::new(vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        let m = MomentParams {
            mu: vec![0.0, 0.0],
            sd: vec![1.0, -1.0],
        };
        assert!(assemble_covariance(&m, &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn early_ambulatory_sol_vl_covariance() {
        let m = MomentParams::new(vec![0.026, 0.066], vec![0.037, 0.073]).unwrap();
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.596, 0.596, 1.0]);
        let sigma = assemble_covariance(&m, &r).unwrap();
        assert!((sigma[(0, 1)] - 0.596 * 0.037 * 0.073).abs() < 1e-15);
        assert!((sigma[(0, 1)] - 0.00161).abs() < 1e-5);
    }

    #[test]
    fn projection_single_cell_and_cross_time() {
        let s = StructureSpec::new(2, 2).unwrap();
        let mut params = CorrelationParams::zeros(&s);
        params.rho[0] = 0.4;
        params.eta[0] = 0.2;
        params.gamma = 0.1;
        let moments = MomentParams::new(vec![1.0, 2.0], vec![1.5, 0.5]).unwrap();
        let r = assemble_correlation(&s, &params, 2).unwrap();
        let sigma = assemble_covariance(&moments, &r).unwrap();
        let mu = moments.full_mean(2);

        let one = Subject::new("a", 2, vec![Some(1.0), None, None, None]).unwrap();
        let (m1, s1) = observed_projection(&one, &mu, &sigma).unwrap();
        assert_eq!(m1.as_slice(), &[1.0]);
        assert!((s1[(0, 0)] - 2.25).abs() < 1e-15);

        let two = Subject::new("b", 2, vec![Some(1.0), None, Some(0.5), None]).unwrap();
        let (m2, s2) = observed_projection(&two, &mu, &sigma).unwrap();
        assert_eq!(m2.as_slice(), &[1.0, 1.0]);
        assert!((s2[(0, 1)] - 0.4 * 2.25).abs() < 1e-15);

        let full = Subject::new("c", 2, vec![Some(0.0); 4]).unwrap();
        let (m3, s3) = observed_projection(&full, &mu, &sigma).unwrap();
        assert_eq!(m3, mu);
        assert_eq!(s3, sigma);
    }

    #[test]
    fn all_missing_subject_is_an_error() {
        assert!(matches!(
            Subject::new("x", 2, vec![None, None]),
            Err(Error::Data(_))
        ));
        let mut s = Subject::new("y", 2, vec![Some(1.0), None]).unwrap();
        assert!(s.set_missing(0).is_err());
    }
}
