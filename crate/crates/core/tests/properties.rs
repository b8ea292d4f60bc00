use factor_count::act::{act_estimate, adjust_eigenvalues, count_above, default_r_max};
use factor_count::analysis::{ols_r2, projection_distance, variance_explained};
use factor_count::baselines::{ed_estimate, er_estimate, gr_estimate, on_estimate};
use factor_count::harness::percentages;
use factor_count::sim::{build_case, sample_data, SeededRng};
use factor_count::spectral::{
    correlation_spectrum, covariance_spectrum, eigenvalues_desc, sample_covariance, to_correlation,
    CovarianceMatrix, DataMatrix, Spectrum,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes.
fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut a = m.clone();
    let p = a.nrows();
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-30 * a.norm_squared().max(1e-300) {
            break;
        }
        for k in 0..p {
            for l in k + 1..p {
                if a[(k, l)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(l, l)] - a[(k, k)]) / (2.0 * a[(k, l)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..p {
                    let (aik, ail) = (a[(i, k)], a[(i, l)]);
                    a[(i, k)] = c * aik - s * ail;
                    a[(i, l)] = s * aik + c * ail;
                }
                for i in 0..p {
                    let (aki, ali) = (a[(k, i)], a[(l, i)]);
                    a[(k, i)] = c * aki - s * ali;
                    a[(l, i)] = s * aki + c * ali;
                }
            }
        }
    }
    let mut values: Vec<f64> = (0..p).map(|i| a[(i, i)]).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-10.0..10.0f64, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn data_matrix() -> impl Strategy<Value = DataMatrix> {
    (8usize..40, 3usize..16)
        .prop_flat_map(|(n, p)| matrix(n, p))
        .prop_filter_map("degenerate columns", |m| {
            let x = DataMatrix::new(m).ok()?;
            x.standardized().ok()?;
            Some(x)
        })
}

/// Strictly decreasing positive spectrum with its `n`.
fn spectrum() -> impl Strategy<Value = Spectrum> {
    (4usize..60, 3usize..500).prop_flat_map(|(p, n)| {
        prop::collection::vec(0.01..1.0f64, p).prop_map(move |gaps| {
            let mut acc = 0.0;
            let mut values: Vec<f64> = gaps
                .iter()
                .map(|g| {
                    acc += g;
                    acc
                })
                .collect();
            values.reverse();
            Spectrum::new(values, n).unwrap()
        })
    })
}

fn scales(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1e-3..1.0f64, 1.0..1e3f64], p)
}

#[test]
fn jacobi_oracle_agrees_with_library_eigensolver() {
    for seed in 0..20u64 {
        let mut rng = SeededRng::new(seed, 0).rng();
        let p = 3 + (seed as usize % 12);
        let n = 2 * p + 5;
        let x = sample_data(&build_case(4, p, 2, &mut rng).unwrap(), n, &mut rng).unwrap();
        let cov = sample_covariance(x.values()).unwrap();
        let lib = eigenvalues_desc(cov.as_matrix(), n).unwrap();
        let oracle = jacobi_eigenvalues(cov.as_matrix());
        let scale = oracle[0].abs().max(1.0);
        for (a, b) in lib.values().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * scale, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn gram_route_matches_direct_route() {
    for seed in 0..10u64 {
        let mut rng = SeededRng::new(seed, 1).rng();
        let (p, n) = (30 + seed as usize, 12);
        let x = sample_data(&build_case(3, p, 3, &mut rng).unwrap(), n, &mut rng).unwrap();
        let gram = covariance_spectrum(&x).unwrap();
        let direct =
            eigenvalues_desc(sample_covariance(x.values()).unwrap().as_matrix(), n).unwrap();
        let scale = direct.lambda(1);
        for (a, b) in gram.values().iter().zip(direct.values()) {
            assert!((a - b).abs() <= 1e-9 * scale, "seed {seed}: {a} vs {b}");
        }
        assert!(
            gram.values()[n - 1..].iter().all(|&v| v == 0.0),
            "at least p − n + 1 exact zeros"
        );

        let corr_gram = correlation_spectrum(&x).unwrap();
        let r = to_correlation(&sample_covariance(x.values()).unwrap()).unwrap();
        let corr_direct = eigenvalues_desc(r.as_matrix(), n).unwrap();
        for (a, b) in corr_gram.values().iter().zip(corr_direct.values()) {
            assert!((a - b).abs() <= 1e-9 * p as f64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn adjusted_eigenvalues_shrink(spec in spectrum()) {
        let adj = adjust_eigenvalues(&spec, spec.n(), spec.p() - 2).unwrap();
        for (j, &c) in adj.adjusted.iter().enumerate() {
            let raw = spec.values()[j];
            prop_assert!(c > 0.0 && c <= raw, "j = {}: {c} vs {raw}", j + 1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn threshold_count_is_monotone(values in prop::collection::vec(0.0..5.0f64, 1..30), s1 in 0.0..5.0f64, ds in 0.0..3.0f64) {
        prop_assert!(count_above(&values, s1 + ds) <= count_above(&values, s1));
    }

    #[test]
    fn act_invariant_to_column_rescaling((x, d) in data_matrix().prop_flat_map(|x| { let p = x.p(); (Just(x), scales(p)) })) {
        let (n, p) = (x.n(), x.p());
        let r_max = default_r_max(p, n).max(1).min(p - 2);
        let before = act_estimate(&correlation_spectrum(&x).unwrap(), n, r_max).unwrap();
        let after = act_estimate(&correlation_spectrum(&x.scale_columns(&d).unwrap()).unwrap(), n, r_max).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn correlation_is_scale_free((m, d) in (2usize..10).prop_flat_map(|p| (matrix(p + 4, p), scales(p)))) {
        let p = m.ncols();
        let cov = sample_covariance(&m).unwrap();
        let scaled = DMatrix::from_fn(p, p, |i, j| d[i] * cov.as_matrix()[(i, j)] * d[j]);
        let r1 = to_correlation(&cov).unwrap();
        let r2 = to_correlation(&CovarianceMatrix::new(scaled).unwrap()).unwrap();
        prop_assert!((r1.as_matrix() - r2.as_matrix()).amax() <= 1e-10);
    }

    #[test]
    fn correlation_trace_is_p(x in data_matrix()) {
        let spec = correlation_spectrum(&x).unwrap();
        let p = x.p() as f64;
        prop_assert!((spec.trace() - p).abs() <= 1e-8 * p);
        prop_assert!(spec.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn ratio_estimators_ignore_global_scale(spec in spectrum(), c in prop_oneof![1e-3..1.0f64, 1.0..1e3f64]) {
        let r_max = (spec.p() - 2).min(10);
        let scaled = spec.scaled(c);
        prop_assert_eq!(er_estimate(&spec, r_max).unwrap(), er_estimate(&scaled, r_max).unwrap());
        prop_assert_eq!(gr_estimate(&spec, r_max).unwrap(), gr_estimate(&scaled, r_max).unwrap());
        if r_max >= 2 {
            prop_assert_eq!(on_estimate(&spec, 0, r_max).unwrap(), on_estimate(&scaled, 0, r_max).unwrap());
        }
    }

    #[test]
    fn ed_scales_with_threshold(spec in spectrum(), c in 0.01..100.0f64, s in 0.001..0.5f64) {
        let r_max = (spec.p() - 2).min(10);
        let k = ed_estimate(&spec, s, r_max).unwrap();
        prop_assert!(k <= r_max);
        // Scaling by a power of two keeps every gap and threshold exact.
        let c2 = 2f64.powi(c.log2().round() as i32);
        prop_assert_eq!(k, ed_estimate(&spec.scaled(c2), c2 * s, r_max).unwrap());
    }

    #[test]
    fn estimators_stay_in_range(spec in spectrum()) {
        let r_max = (spec.p() - 2).min(12);
        for k in [
            er_estimate(&spec, r_max).unwrap(),
            gr_estimate(&spec, r_max).unwrap(),
            act_estimate(&spec, spec.n(), r_max).unwrap(),
        ] {
            prop_assert!(k <= r_max);
        }
    }

    #[test]
    fn variance_explained_is_monotone(spec in spectrum()) {
        let mut last = 0.0;
        for k in 0..=spec.p() {
            let v = variance_explained(&spec, k).unwrap();
            prop_assert!(v >= last - 1e-15 && v <= 1.0 + 1e-12);
            last = v;
        }
        prop_assert!((last - 1.0).abs() < 1e-12);
    }

    #[test]
    fn percentages_close(counts in prop::collection::vec(0usize..400, 4)) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let total: usize = counts.iter().sum();
        let pct = percentages(&counts);
        prop_assert!((pct.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        for (c, p) in counts.iter().zip(&pct) {
            prop_assert!((100.0 * *c as f64 / total as f64 - p).abs() <= 0.1 + 1e-9);
        }
    }

    #[test]
    fn projection_distance_depends_on_spans(
        (a, b, ma, mb) in (12usize..20, 1usize..4, 1usize..4)
            .prop_flat_map(|(n, k, m)| (matrix(n, k), matrix(n, m), matrix(k, k), matrix(m, m)))
    ) {
        prop_assume!(ma.determinant().abs() > 1e-2 && mb.determinant().abs() > 1e-2);
        let (Ok(d), Ok(d_rev)) = (projection_distance(&a, &b), projection_distance(&b, &a)) else {
            return Ok(());
        };
        prop_assert!((d.operator - d_rev.operator).abs() < 1e-9);
        prop_assert!((d.frobenius - d_rev.frobenius).abs() < 1e-9);
        let d_mixed = projection_distance(&(&a * &ma), &(&b * &mb)).unwrap();
        prop_assert!((d.operator - d_mixed.operator).abs() < 1e-6);
        prop_assert!((d.frobenius - d_mixed.frobenius).abs() < 1e-6);
    }

    #[test]
    fn r2_bounded_and_basis_free(
        (y, f, m) in (10usize..30, 1usize..4)
            .prop_flat_map(|(n, k)| (prop::collection::vec(-5.0..5.0f64, n), matrix(n, k), matrix(k, k)))
    ) {
        prop_assume!(m.determinant().abs() > 1e-2);
        let Ok(r2) = ols_r2(&y, &f) else { return Ok(()); };
        prop_assert!((0.0..=1.0).contains(&r2));
        let r2_mixed = ols_r2(&y, &(&f * &m)).unwrap();
        prop_assert!((r2 - r2_mixed).abs() < 1e-8);
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), stream in any::<u64>()) {
        let draw = || {
            let mut rng = SeededRng::new(seed, stream).rng();
            let spec = build_case(2, 12, 3, &mut rng).unwrap();
            sample_data(&spec, 15, &mut rng).unwrap()
        };
        prop_assert_eq!(draw(), draw());
    }
}
