//! Positive-definite intervals for one unique correlation of a structured matrix.
//!
//! For an unstructured correlation matrix the determinant is a quadratic in any
//! single off-diagonal pair `(i, j)`, and the matrix stays positive definite exactly
//! between its two roots. A structured parameter appears in many cells, so the
//! quadratic is applied to principal submatrices in which the parameter appears
//! exactly once ("plans"), and the resulting intervals are intersected.
//!
//! The intersection is necessary but not sufficient for the full matrix to stay
//! positive definite; the sampler still checks each candidate.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::structure::{assemble_correlation, Cell, CorrParam, CorrelationParams, StructureSpec};

/// Open interval `(lo, hi)` inside `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdInterval {
    pub lo: f64,
    pub hi: f64,
}

impl PdInterval {
    pub const FULL: PdInterval = PdInterval { lo: -1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || lo < -1.0 || hi > 1.0 {
            return Err(Error::Numerical(format!("invalid interval ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn intersect(&self, other: &PdInterval) -> Option<PdInterval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(PdInterval { lo, hi })
    }

    /// Pulls both ends inward by `eps`.
    pub fn shrink(&self, eps: f64) -> Option<PdInterval> {
        let lo = self.lo + eps;
        let hi = self.hi - eps;
        (lo < hi).then_some(PdInterval { lo, hi })
    }
}

/// Outcomes selecting a principal submatrix in which one parameter appears once.
///
/// The first two indices always realize the target parameter, so the target sits at
/// position `(0, 1)` of the realized submatrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmatrixPlan {
    pub indices: Vec<usize>,
}

impl SubmatrixPlan {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn target_position(&self) -> (usize, usize) {
        (0, 1)
    }

    /// Order-independent identity of the plan.
    pub fn outcome_set(&self) -> BTreeSet<usize> {
        self.indices.iter().copied().collect()
    }

    /// Reorders `corr` so that this plan is its leading principal block.
    pub fn realize(&self, corr: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::principal_submatrix(corr, &self.indices)
    }
}

/// Number of unordered pairs inside `indices` whose cell is `param`.
pub fn count_instances(spec: &StructureSpec, indices: &[usize], param: CorrParam) -> usize {
    let mut count = 0;
    for (a, &m) in indices.iter().enumerate() {
        for &n in &indices[a + 1..] {
            if spec.cell_unchecked(m, n) == Cell::Param(param) {
                count += 1;
            }
        }
    }
    count
}

/// PD interval of entry `(i, j)` of `corr`, from the determinant quadratic.
///
/// With `|R_x|` the determinant after setting both `(i, j)` and `(j, i)` to `x`,
/// `|R_x| = a x^2 + b x + c` where `a = (|R_1| + |R_-1| - 2|R_0|) / 2`,
/// `b = (|R_1| - |R_-1|) / 2` and `c = |R_0|`. The interval runs between the roots.
/// It is the exact PD range whenever `corr` is PD at its current value of `(i, j)`.
pub fn barnard_interval(corr: &DMatrix<f64>, i: usize, j: usize) -> Result<PdInterval> {
    let n = corr.nrows();
    if !corr.is_square() || i >= n || j >= n || i == j {
        return Err(Error::InvalidArgument(format!(
            "({i}, {j}) is not an off-diagonal position of a {n}x{n} matrix"
        )));
    }
    let mut work = corr.clone();
    let mut det_at = |x: f64| {
        work[(i, j)] = x;
        work[(j, i)] = x;
        linalg::determinant(&work)
    };
    let d_plus = det_at(1.0);
    let d_minus = det_at(-1.0);
    let d_zero = det_at(0.0);

    let a = (d_plus + d_minus - 2.0 * d_zero) / 2.0;
    let b = (d_plus - d_minus) / 2.0;
    let c = d_zero;
    if !(a < 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "determinant quadratic opens upward (a = {a:e}); the complementary block is not PD"
        )));
    }
    let disc = b * b - 4.0 * a * c;
    if !(disc > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "determinant quadratic has no real roots (discriminant {disc:e})"
        )));
    }
    // Citardauq form avoids cancellation when |b| dominates.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (u1, u2) = if q == 0.0 {
        let r = (-c / a).sqrt();
        (-r, r)
    } else {
        (q / a, c / q)
    };
    let lo = u1.min(u2).max(-1.0);
    let hi = u1.max(u2).min(1.0);
    PdInterval::new(lo, hi)
}

/// Greedy largest submatrix for `param`, scanning outcomes in `order`.
///
/// The seed is the first pair (in `order`) that realizes `param`; every later outcome
/// is added when `param` still appears only once. Because adding outcomes can only
/// add instances, the result is maximal: no remaining outcome can be added.
pub fn greedy_submatrix(
    spec: &StructureSpec,
    param: CorrParam,
    order: &[usize],
) -> Result<SubmatrixPlan> {
    let p = spec.dim();
    if !spec.contains(param) {
        return Err(Error::InvalidArgument(format!(
            "{param} does not exist in a {}x{} structure",
            spec.outcomes(),
            spec.times()
        )));
    }
    let mut seen = vec![false; p];
    if order.len() != p || order.iter().any(|&u| u >= p || std::mem::replace(&mut seen[u], true)) {
        return Err(Error::InvalidArgument(format!(
            "order must be a permutation of 0..{p}"
        )));
    }
    let target = Cell::Param(param);
    let seed = order
        .iter()
        .enumerate()
        .find_map(|(t, &u)| {
            order[..t]
                .iter()
                .find(|&&v| spec.cell_unchecked(v, u) == target)
                .map(|&v| (v, u))
        })
        .ok_or_else(|| Error::InvalidArgument(format!("{param} is not realized by any pair")))?;

    let mut indices = vec![seed.0, seed.1];
    for &u in order {
        if u == seed.0 || u == seed.1 {
            continue;
        }
        if indices.iter().all(|&v| spec.cell_unchecked(v, u) != target) {
            indices.push(u);
        }
    }
    Ok(SubmatrixPlan { indices })
}

/// The `J` largest submatrices for `eta(a, b)` anchored at time `time`.
///
/// Every other time contributes all outcomes but one of `a`/`b`; plan `c` omits `b`
/// at the first `c` other times and `a` at the rest.
pub fn enumerate_eta_plans(
    spec: &StructureSpec,
    pair: (usize, usize),
    time: usize,
) -> Result<Vec<SubmatrixPlan>> {
    let (a, b) = pair;
    let l = spec.outcomes();
    if !(a < b && b < l) || time >= spec.times() {
        return Err(Error::InvalidArgument(format!(
            "invalid eta pair ({a}, {b}) at time {time}"
        )));
    }
    let others: Vec<usize> = (0..spec.times()).filter(|&t| t != time).collect();
    let mut plans = Vec::with_capacity(spec.times());
    for c in 0..spec.times() {
        let mut idx = vec![spec.flat(time, a), spec.flat(time, b)];
        idx.extend((0..l).filter(|&o| o != a && o != b).map(|o| spec.flat(time, o)));
        for (t, &other) in others.iter().enumerate() {
            let omit = if t < c { b } else { a };
            idx.extend((0..l).filter(|&o| o != omit).map(|o| spec.flat(other, o)));
        }
        plans.push(SubmatrixPlan { indices: idx });
    }
    Ok(plans)
}

/// The single largest submatrix for `rho(outcome)` seeded by the time pair.
pub fn enumerate_rho_plan(
    spec: &StructureSpec,
    outcome: usize,
    times: (usize, usize),
) -> Result<SubmatrixPlan> {
    let (j1, j2) = times;
    if !spec.has_cross_time() {
        return Err(Error::InvalidArgument(
            "rho is undefined with a single time".into(),
        ));
    }
    let l = spec.outcomes();
    if outcome >= l || j1 == j2 || j1 >= spec.times() || j2 >= spec.times() {
        return Err(Error::InvalidArgument(format!(
            "invalid rho plan for outcome {outcome} at times ({j1}, {j2})"
        )));
    }
    let mut idx = vec![spec.flat(j1, outcome), spec.flat(j2, outcome)];
    for t in [j1, j2] {
        idx.extend((0..l).filter(|&o| o != outcome).map(|o| spec.flat(t, o)));
    }
    for t in (0..spec.times()).filter(|&t| t != j1 && t != j2) {
        idx.extend((0..l).filter(|&o| o != outcome).map(|o| spec.flat(t, o)));
    }
    Ok(SubmatrixPlan { indices: idx })
}

/// The `2 C(L,2)` three-outcome submatrices for `gamma`: `{gamma, eta(a,b), rho(a)}`
/// then `{gamma, eta(a,b), rho(b)}` for each pair.
pub fn enumerate_gamma_plans(spec: &StructureSpec) -> Result<Vec<SubmatrixPlan>> {
    if !spec.has_cross_time() {
        return Err(Error::InvalidArgument(
            "gamma is undefined with a single time".into(),
        ));
    }
    let l = spec.outcomes();
    let mut plans = Vec::with_capacity(l * (l - 1));
    for a in 0..l {
        for b in (a + 1)..l {
            let (m, n) = (spec.flat(0, a), spec.flat(1, b));
            plans.push(SubmatrixPlan {
                indices: vec![m, n, spec.flat(1, a)],
            });
            plans.push(SubmatrixPlan {
                indices: vec![m, n, spec.flat(0, b)],
            });
        }
    }
    Ok(plans)
}

/// All distinct plans for `param`.
pub fn plans_for(spec: &StructureSpec, param: CorrParam) -> Result<Vec<SubmatrixPlan>> {
    if !spec.contains(param) {
        return Err(Error::InvalidArgument(format!(
            "{param} does not exist in this structure"
        )));
    }
    let plans = match param {
        CorrParam::Eta(a, b) => enumerate_eta_plans(spec, (a, b), 0)?,
        CorrParam::Rho(l) => vec![enumerate_rho_plan(spec, l, (0, 1))?],
        CorrParam::Gamma => enumerate_gamma_plans(spec)?,
    };
    let mut seen = BTreeSet::new();
    Ok(plans
        .into_iter()
        .filter(|p| seen.insert(p.outcome_set()))
        .collect())
}

/// Barnard interval of one plan realized from the full correlation matrix.
pub fn plan_interval(corr: &DMatrix<f64>, plan: &SubmatrixPlan) -> Result<PdInterval> {
    let (i, j) = plan.target_position();
    barnard_interval(&plan.realize(corr), i, j)
}

/// Intersection of the plan intervals, given the full correlation matrix.
///
/// The value currently stored at the target cells is irrelevant: each plan contains
/// the target once and the quadratic is evaluated at fixed points.
pub fn support_from_plans(corr: &DMatrix<f64>, plans: &[SubmatrixPlan]) -> Result<PdInterval> {
    let mut acc = PdInterval::FULL;
    for plan in plans {
        let iv = plan_interval(corr, plan)?;
        acc = acc.intersect(&iv).ok_or_else(|| {
            Error::Numerical(format!(
                "empty intersection of PD intervals at plan {:?}",
                plan.indices
            ))
        })?;
    }
    Ok(acc)
}

/// Candidate support `(L_k, U_k)` for `param` at the current correlations.
pub fn pd_support(
    spec: &StructureSpec,
    params: &CorrelationParams,
    param: CorrParam,
) -> Result<PdInterval> {
    let plans = plans_for(spec, param)?;
    let corr = assemble_correlation(spec, params, spec.times())?;
    if !linalg::is_positive_definite(&corr, linalg::PD_TOL)? {
        return Err(Error::NotPositiveDefinite("current correlation matrix".into()));
    }
    support_from_plans(&corr, &plans)
}

/// Interval of one uniformly chosen plan, the cheaper `(L_1, U_1)` variant.
pub fn single_plan_support<R: Rng + ?Sized>(
    corr: &DMatrix<f64>,
    plans: &[SubmatrixPlan],
    rng: &mut R,
) -> Result<PdInterval> {
    if plans.is_empty() {
        return Err(Error::InvalidArgument("no plans to choose from".into()));
    }
    let pick = rng.random_range(0..plans.len());
    plan_interval(corr, &plans[pick])
}
