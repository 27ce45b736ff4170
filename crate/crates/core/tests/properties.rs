use proptest::prelude::*;
use tailblend::bma::{bma_weights, tdc_method1};
use tailblend::copula::{CopulaFamily, CopulaSpec};
use tailblend::empirical::{estimate_all, pseudo_observations, PseudoSample};
use tailblend::fitting::{fit_copula_mple, information_criteria, GammaGlmFit};
use tailblend::mixture::{classify, mixture_tdc, ComponentFit, EmData, MixtureModel};
use tailblend::sampling::{largest_remainder_counts, sample_copula};
use tailblend::studies::simulate_study;

fn sample_pairs(theta: f64, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let spec = CopulaSpec::one_param(CopulaFamily::GUMBEL, theta).unwrap();
    sample_copula(&spec, n, seed).unwrap()
}

fn glm(coefficients: [f64; 3], shape: f64) -> GammaGlmFit {
    GammaGlmFit {
        coefficients: coefficients.to_vec(),
        shape,
        loglik: 0.0,
        iterations: 0,
        converged: true,
    }
}

fn three_component_model(data: &EmData, mixing: [f64; 3]) -> MixtureModel {
    let comps = vec![
        ComponentFit {
            copula: CopulaSpec::one_param(CopulaFamily::GUMBEL, 2.0).unwrap(),
            margin1: glm([1.0, 0.1, 0.1], 6.0),
            margin2: glm([2.0, 0.2, 0.2], 3.0),
        },
        ComponentFit {
            copula: CopulaSpec::one_param(CopulaFamily::FRANK, 3.5).unwrap(),
            margin1: glm([1.5, 0.05, 0.1], 4.0),
            margin2: glm([2.5, 0.1, 0.2], 4.0),
        },
        ComponentFit {
            copula: CopulaSpec::one_param(CopulaFamily::SURVIVAL_CLAYTON, 1.2).unwrap(),
            margin1: glm([1.2, 0.0, 0.2], 2.0),
            margin2: glm([2.2, 0.1, 0.0], 5.0),
        },
    ];
    MixtureModel::from_parts(comps, mixing.to_vec(), data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn estimators_ignore_column_order(theta in 1.0..4.0f64, seed in 0..1000u64) {
        let ps = pseudo_observations(&sample_pairs(theta, 400, seed)).unwrap();
        prop_assert_eq!(estimate_all(&ps).unwrap(), estimate_all(&ps.swapped()).unwrap());
    }

    #[test]
    fn pseudo_observations_are_interior(theta in 1.0..4.0f64, seed in 0..1000u64, n in 2..300usize) {
        let ps: PseudoSample = pseudo_observations(&sample_pairs(theta, n, seed)).unwrap();
        prop_assert!(ps.pseudo.iter().all(|&(u, v)| u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0));
        let mut r: Vec<f64> = ps.ranks.iter().map(|r| r.0).collect();
        r.sort_by(f64::total_cmp);
        prop_assert!(r.iter().enumerate().all(|(i, &x)| x == (i + 1) as f64));
    }

    #[test]
    fn weights_are_shift_invariant(bics in prop::collection::vec(-2000.0..2000.0f64, 1..10), shift in -1e4..1e4f64) {
        let a = bma_weights(&bics).unwrap();
        let shifted: Vec<f64> = bics.iter().map(|b| b + shift).collect();
        let b = bma_weights(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12, "{:?} vs {:?}", a, b);
        }
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn remainder_counts_are_within_one(raw in prop::collection::vec(0.0..1.0f64, 1..12), n in 1..5000usize) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 0.0);
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let counts = largest_remainder_counts(&w, n);
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        for (c, wk) in counts.iter().zip(&w) {
            prop_assert!((*c as f64 - n as f64 * wk).abs() < 1.0);
        }
    }

    #[test]
    fn archimedean_upper_tail_grows_with_theta(a in 1.0..8.0f64, b in 1.0..8.0f64) {
        prop_assume!(a < b);
        for fam in [CopulaFamily::GUMBEL, CopulaFamily::JOE] {
            let lo = CopulaSpec::one_param(fam, a).unwrap().tdc().unwrap();
            let hi = CopulaSpec::one_param(fam, b).unwrap().tdc().unwrap();
            prop_assert!(lo.upper < hi.upper);
            prop_assert_eq!(lo.upper, 2.0 - 2f64.powf(1.0 / a));
            for t in [lo, hi] {
                prop_assert!((0.0..=1.0).contains(&t.lower) && (0.0..=1.0).contains(&t.upper));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn mple_depends_on_ranks_only(theta in 1.2..3.0f64, seed in 0..1000u64, scale in 0.1..10.0f64) {
        let raw = sample_pairs(theta, 300, seed);
        let bent: Vec<(f64, f64)> = raw.iter().map(|&(u, v)| ((scale * u).exp(), v.powi(3) - 7.0)).collect();
        for fam in [CopulaFamily::GUMBEL, CopulaFamily::FRANK, CopulaFamily::STUDENT_T] {
            let a = fit_copula_mple(fam, &pseudo_observations(&raw).unwrap()).unwrap();
            let b = fit_copula_mple(fam, &pseudo_observations(&bent).unwrap()).unwrap();
            prop_assert_eq!(a.spec, b.spec);
            prop_assert_eq!(a.loglik, b.loglik);
        }
    }

    #[test]
    fn information_criteria_recompute_exactly(theta in 1.2..3.0f64, seed in 0..1000u64) {
        let ps = pseudo_observations(&sample_pairs(theta, 300, seed)).unwrap();
        let fits: Vec<_> = CopulaFamily::POOL.iter().map(|&f| fit_copula_mple(f, &ps).unwrap()).collect();
        for f in &fits {
            let (aic, bic) = information_criteria(f.loglik, f.n_params, f.n_obs);
            prop_assert_eq!((f.aic, f.bic), (aic, bic));
            prop_assert_eq!(f.n_params, if f.spec.family == CopulaFamily::STUDENT_T { 2 } else { 1 });
            prop_assert_eq!(f.tdc, f.spec.tdc().unwrap());
        }
        let blended = tdc_method1(&fits).unwrap();
        let lo = fits.iter().map(|f| f.tdc.upper).fold(f64::INFINITY, f64::min);
        let hi = fits.iter().map(|f| f.tdc.upper).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= blended.upper && blended.upper <= hi);
    }

    #[test]
    fn relabelling_a_mixture_changes_nothing(a in 0.05..1.0f64, b in 0.05..1.0f64, c in 0.05..1.0f64, order in Just([0usize, 1, 2]).prop_shuffle()) {
        let d = simulate_study(4, Some(200), 3).unwrap();
        let x = d.design(&["x1".into(), "x2".into()]).unwrap();
        let data = EmData { y1: &d.y1, y2: &d.y2, x1: &x, x2: &x };
        let s = a + b + c;
        let m = three_component_model(&data, [a / s, b / s, c / s]);
        let rebuilt = MixtureModel::from_parts(
            order.iter().map(|&k| m.components[k].clone()).collect(),
            order.iter().map(|&k| m.mixing[k]).collect(),
            &data,
        )
        .unwrap();
        prop_assert!((rebuilt.loglik - m.loglik).abs() <= 1e-9 * m.loglik.abs());
        prop_assert!((rebuilt.bic - m.bic).abs() <= 1e-9 * m.bic.abs());
        let (t0, t1) = (mixture_tdc(&m), mixture_tdc(&rebuilt));
        prop_assert!((t0.upper - t1.upper).abs() < 1e-12 && (t0.lower - t1.lower).abs() < 1e-12);

        let mut sizes0 = [0usize; 3];
        let mut sizes1 = [0usize; 3];
        for (l0, l1) in classify(&m).into_iter().zip(classify(&rebuilt)) {
            prop_assert_eq!(order[l1], l0);
            sizes0[l0] += 1;
            sizes1[l1] += 1;
        }
        let mut a0 = sizes0.to_vec();
        let mut a1 = sizes1.to_vec();
        a0.sort_unstable();
        a1.sort_unstable();
        prop_assert_eq!(a0, a1);

        let lo = m.components.iter().map(|c| c.copula.tdc().unwrap().upper).fold(f64::INFINITY, f64::min);
        let hi = m.components.iter().map(|c| c.copula.tdc().unwrap().upper).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= t0.upper && t0.upper <= hi);
    }
}
