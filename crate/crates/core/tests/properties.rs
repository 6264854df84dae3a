use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use structcorr::construct::{individual_srms, optimal_weights, srm, CrossSectionMoments, WeightVector};
use structcorr::io::{read_dataset, write_dataset};
use structcorr::linalg::{determinant, is_positive_definite, PD_TOL};
use structcorr::pd_bounds::{barnard_interval, pd_support};
use structcorr::sampler::{rbeta_shape, tune_kappa, KAPPA_MAX, KAPPA_MIN};
use structcorr::structure::{CorrelationParams, Dataset, StructureSpec, Subject};

/// Mean vector and a covariance `A A' + 0.05 I` from flat inputs.
fn moments(mu: &[f64], a: &[f64]) -> CrossSectionMoments {
    let l = mu.len();
    let a = DMatrix::from_column_slice(l, l, &a[..l * l]);
    let sigma = &a * a.transpose() + DMatrix::identity(l, l) * 0.05;
    CrossSectionMoments::new(DVector::from_column_slice(mu), sigma).unwrap()
}

fn moments_strategy() -> impl Strategy<Value = CrossSectionMoments> {
    (2usize..=5).prop_flat_map(|l| {
        (prop::collection::vec(-0.5f64..1.5, l), prop::collection::vec(-1.0f64..1.0, l * l))
            .prop_map(|(mu, a)| moments(&mu, &a))
    })
}

/// Correlation matrix from normalized random rows.
fn correlation_strategy(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * (n + 1)).prop_map(move |v| {
        let mut f = DMatrix::from_column_slice(n, n + 1, &v);
        for mut row in f.row_iter_mut() {
            let norm = row.norm().max(1e-6);
            row /= norm;
        }
        let mut r = &f * f.transpose();
        // Blend toward the identity so the matrix is comfortably PD.
        r = r * 0.9 + DMatrix::identity(n, n) * 0.1;
        r
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn optimal_weights_lie_on_simplex_and_dominate(m in moments_strategy()) {
        let (w, s) = optimal_weights(&m).unwrap();
        let sum: f64 = w.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(w.as_slice().iter().all(|&x| x >= 0.0));
        prop_assert!((srm(&w, &m).unwrap() - s).abs() < 1e-10);
        let l = m.outcomes();
        prop_assert!(s >= srm(&WeightVector::equal(l), &m).unwrap() - 1e-12);
        for ind in individual_srms(&m) {
            prop_assert!(s >= ind - 1e-12);
        }
    }

    #[test]
    fn optimal_weights_scale_invariant(m in moments_strategy(), c in 1e-3f64..1e3) {
        let (w, s) = optimal_weights(&m).unwrap();
        let scaled = CrossSectionMoments::new(&m.mu * c, &m.sigma * (c * c)).unwrap();
        let (ws, ss) = optimal_weights(&scaled).unwrap();
        for (a, b) in w.as_slice().iter().zip(ws.as_slice()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert!((s - ss).abs() < 1e-10);
    }

    #[test]
    fn optimal_weights_permutation_equivariant(m in moments_strategy(), seed in any::<u64>()) {
        let l = m.outcomes();
        let mut perm: Vec<usize> = (0..l).collect();
        let mut state = seed;
        for i in (1..l).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let (w, s) = optimal_weights(&m).unwrap();
        let (wp, sp) = optimal_weights(&m.select(&perm).unwrap()).unwrap();
        for (k, &src) in perm.iter().enumerate() {
            prop_assert!((wp.as_slice()[k] - w.as_slice()[src]).abs() < 1e-8);
        }
        prop_assert!((s - sp).abs() < 1e-10);
    }

    #[test]
    fn independent_outcome_with_nonpositive_mean_gets_no_weight(
        mu in prop::collection::vec(0.05f64..1.0, 3),
        bad in -1.0f64..0.0,
        sd in prop::collection::vec(0.1f64..2.0, 4),
    ) {
        let mut all = mu.clone();
        all.push(bad);
        let sigma = DMatrix::from_diagonal(&DVector::from_iterator(4, sd.iter().map(|s| s * s)));
        let m = CrossSectionMoments::new(DVector::from_vec(all), sigma).unwrap();
        let (w, _) = optimal_weights(&m).unwrap();
        prop_assert!(w.as_slice()[3].abs() < 1e-12);
    }

    #[test]
    fn barnard_interval_contains_current_and_has_singular_endpoints(
        r in correlation_strategy(4),
        i in 0usize..4,
        shift in 1usize..4,
    ) {
        let j = (i + shift) % 4;
        let iv = barnard_interval(&r, i, j).unwrap();
        prop_assert!(iv.lo < r[(i, j)] && r[(i, j)] < iv.hi);
        let scale = determinant(&r).abs().max(1e-3);
        for x in [iv.lo, iv.hi] {
            if x.abs() < 1.0 {
                let mut m = r.clone();
                m[(i, j)] = x;
                m[(j, i)] = x;
                prop_assert!(determinant(&m).abs() < 1e-9 * scale.max(1.0));
            }
        }
        let mid = 0.5 * (iv.lo + iv.hi);
        let mut m = r.clone();
        m[(i, j)] = mid;
        m[(j, i)] = mid;
        prop_assert!(is_positive_definite(&m, PD_TOL).unwrap());
    }

    #[test]
    fn structured_support_contains_current_value(
        l in 2usize..=4,
        j in 1usize..=4,
        vals in prop::collection::vec(-0.15f64..0.3, 16),
        pick in any::<prop::sample::Index>(),
    ) {
        let spec = StructureSpec::new(l, j).unwrap();
        let q = spec.n_params();
        let params = CorrelationParams::from_vec(&spec, &vals[..q]).unwrap();
        let corr = structcorr::structure::assemble_correlation(&spec, &params, j).unwrap();
        prop_assume!(is_positive_definite(&corr, PD_TOL).unwrap());
        let p = spec.params()[pick.index(q)];
        let iv = pd_support(&spec, &params, p).unwrap();
        let current = params.get(&spec, p);
        prop_assert!(iv.lo < current && current < iv.hi);
        prop_assert_eq!(CorrelationParams::from_vec(&spec, &params.to_vec(&spec)).unwrap(), params);
    }

    #[test]
    fn rbeta_shape_keeps_mode_and_concentration(
        kappa in 2.5f64..500.0,
        lo in -1.0f64..0.0,
        width in 0.01f64..1.0,
        u in 0.0f64..=1.0,
    ) {
        let hi = lo + width;
        let mode = lo + u * width;
        let s = rbeta_shape(kappa, mode, lo, hi).unwrap();
        prop_assert!(s.alpha >= 1.0 - 1e-12 && s.beta >= 1.0 - 1e-12);
        prop_assert!((s.alpha + s.beta - kappa).abs() < 1e-9);
        prop_assert!(s.mode() >= lo - 1e-12 && s.mode() <= hi + 1e-12);
    }

    #[test]
    fn tuned_kappa_stays_clamped(acc in 0.0f64..=1.0, kappa in KAPPA_MIN..KAPPA_MAX) {
        let k = tune_kappa(acc, kappa, 0.25);
        prop_assert!((KAPPA_MIN..=KAPPA_MAX).contains(&k));
        // Low acceptance concentrates the candidate, high acceptance spreads it.
        if acc < 0.25 { prop_assert!(k >= kappa || k == KAPPA_MAX); }
        if acc > 0.25 { prop_assert!(k <= kappa || k == KAPPA_MIN); }
    }

    #[test]
    fn dataset_round_trips(
        rows in prop::collection::vec(
            (1usize..4, prop::collection::vec(prop::option::weighted(0.8, -1e6f64..1e6), 6)),
            1..8,
        ),
    ) {
        let subjects: Vec<Subject> = rows
            .iter()
            .enumerate()
            .filter_map(|(i, (t, cells))| {
                let cells: Vec<Option<f64>> = cells.iter().copied().cycle().take(t * 2).collect();
                Subject::new(format!("s{i}"), 2, cells).ok()
            })
            .collect();
        prop_assume!(!subjects.is_empty());
        let Ok(data) = Dataset::new(vec!["a".into(), "b".into()], subjects) else {
            return Ok(());
        };
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        prop_assert_eq!(read_dataset(buf.as_slice()).unwrap(), data);
    }
}
