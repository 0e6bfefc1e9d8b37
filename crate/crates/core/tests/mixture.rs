mod common;

use common::*;
use mixboost::math::log_sum_exp;
use mixboost::optimizer::FreeMask;
use mixboost::{BlockKind, BlockPattern, Error, MixtureApproximation};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng as _;

/// `log sum_k pi_k N_k(x)` over the coordinates `idx`, from dense moments.
fn dense_mixture_logpdf(mix: &MixtureApproximation, idx: &[usize], x: &[f64]) -> f64 {
    let terms: Vec<f64> = mix
        .components()
        .iter()
        .zip(mix.log_weights())
        .map(|(c, lw)| {
            let cov = dense_cov(c);
            let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&j| c.mean[j]));
            lw + dense_logpdf(&mean, &submatrix(&cov, idx, idx), x)
        })
        .collect();
    log_sum_exp(&terms)
}

fn kind(markov: bool) -> BlockKind {
    if markov {
        BlockKind::Markov
    } else {
        BlockKind::Hierarchical
    }
}

#[test]
fn construction_validates_inputs() {
    let p = BlockPattern::hierarchical(vec![1], 1).unwrap();
    let q = BlockPattern::hierarchical(vec![2], 1).unwrap();
    let mut r = rng(1);
    let a = random_component(&mut r, &p);
    let b = random_component(&mut r, &q);
    assert!(MixtureApproximation::new(vec![], &[]).is_err());
    assert!(MixtureApproximation::new(vec![a.clone()], &[0.5, 0.5]).is_err());
    assert!(MixtureApproximation::new(vec![a.clone(), a.clone()], &[1.0, 0.0]).is_err());
    assert!(matches!(
        MixtureApproximation::new(vec![a, b], &[0.5, 0.5]),
        Err(Error::PatternMismatch(_))
    ));
}

#[test]
fn far_points_report_underflow() {
    let p = BlockPattern::hierarchical(vec![1], 1).unwrap();
    let mix = MixtureApproximation::standard(&p);
    assert!(matches!(mix.logpdf(&[1e200, 0.0]), Err(Error::Underflow)));
}

#[test]
fn coordinate_marginals_match_dense_and_integrate_to_one() {
    let mut r = rng(8);
    for markov in [false, true] {
        let p = random_pattern(&mut r, kind(markov), 4, 2);
        let mix = random_mixture(&mut r, &p, 3);
        for j in 0..p.total_dim() {
            for ((w, m, sd), (c, wd)) in mix.coordinate_marginal(j).unwrap().into_iter().zip(mix.components().iter().zip(mix.weights())) {
                let cov = dense_cov(c);
                assert!((w - wd).abs() < 1e-15);
                assert_eq!(m, c.mean[j]);
                assert!((sd - cov[(j, j)].sqrt()).abs() < 1e-12);
            }
            let xs = mixboost::math::linspace(-30.0, 30.0, 20001);
            let dens = mix.coordinate_density(j, &xs).unwrap();
            assert!((trapezoid(&xs, &dens) - 1.0).abs() < 1e-6);
            let direct = dense_mixture_logpdf(&mix, &[j], &[0.7]).exp();
            assert!((mix.coordinate_density(j, &[0.7]).unwrap()[0] - direct).abs() < 1e-12);
        }
        assert!(mix.coordinate_marginal(p.total_dim()).is_err());
    }
}

#[test]
fn sample_moments_match_mixture_moments() {
    let mut r = rng(12);
    let p = BlockPattern::markov(vec![1, 1], 1).unwrap();
    let mix = random_mixture(&mut r, &p, 3);
    let n = 40_000;
    let draws: Vec<Vec<f64>> = (0..n).map(|_| mix.sample(&mut r)).collect();
    let w = mix.weights();
    for j in 0..3 {
        let mean: f64 = mix.components().iter().zip(&w).map(|(c, w)| w * c.mean[j]).sum();
        let second: f64 = mix
            .components()
            .iter()
            .zip(&w)
            .map(|(c, w)| w * (dense_cov(c)[(j, j)] + c.mean[j] * c.mean[j]))
            .sum();
        let var = second - mean * mean;
        let emp = draws.iter().map(|d| d[j]).sum::<f64>() / n as f64;
        assert!((emp - mean).abs() < 5.0 * (var / n as f64).sqrt(), "coordinate {j}");
    }
}

#[test]
fn split_keeps_density_and_top_component() {
    let mut r = rng(4);
    let p = BlockPattern::hierarchical(vec![1, 2], 1).unwrap();
    let mix = random_mixture(&mut r, &p, 3);
    let top = mix.top_component();
    let s = mix.split(0.3).unwrap();
    assert_eq!(s.n_components(), 4);
    assert_eq!(s.component(2), mix.component(top));
    assert_eq!(s.component(3), mix.component(top));
    let w = s.weights();
    let wt = mix.weights()[top];
    assert!((w[2] - 0.3 * wt).abs() < 1e-15);
    assert!((w[3] - 0.7 * wt).abs() < 1e-15);
    for _ in 0..20 {
        let x = normals(&mut r, p.total_dim());
        assert!((s.logpdf(&x).unwrap() - mix.logpdf(&x).unwrap()).abs() < 1e-13);
    }
}

#[test]
fn local_move_keeps_untouched_structure() {
    let mut r = rng(21);
    for markov in [false, true] {
        let p = BlockPattern::new(kind(markov), vec![1, 2, 1, 1, 2], 2).unwrap();
        let base = random_mixture(&mut r, &p, 2);
        let mut mix = base.split(0.5).unwrap();
        let reference = mix.clone();
        // a chain conditional given the successor also reads the successor's
        // mean, so only latents after the freed set are checked there
        let freed: &[usize] = if markov { &[1] } else { &[1, 3] };
        let mask = FreeMask::latent_subset(mix.layout(), freed);
        let last = mix.last_component_mut();
        for (j, free) in mask.mean.iter().enumerate() {
            if *free {
                last.mean[j] += normal(&mut r);
            }
        }
        let shifts: Vec<f64> = mask.factor.iter().map(|f| if *f { normal(&mut r) } else { 0.0 }).collect();
        last.factor.update_params(|v| v.iter_mut().zip(&shifts).for_each(|(a, b)| *a += b));
        mix.set_split_logit(1.3);

        let untouched: Vec<usize> = if markov { vec![2, 3, 4] } else { vec![0, 2, 4] };
        let (cache, ref_cache) = if markov {
            (Some(mix.chain_cache().unwrap()), Some(reference.chain_cache().unwrap()))
        } else {
            (None, None)
        };
        for _ in 0..100 {
            let tg = normals(&mut r, 2);
            let d = (mix.global_logpdf(&tg).unwrap() - reference.global_logpdf(&tg).unwrap()).abs();
            assert!(d <= 1e-12);
            for &i in &untouched {
                let b = normals(&mut r, p.latent_dim(i));
                let (a, o) = match (&cache, &ref_cache) {
                    (Some(c), Some(rc)) => {
                        let next = (i + 1 < 5).then(|| normals(&mut r, p.latent_dim(i + 1)));
                        let a = mix.latent_conditional_markov(i, next.as_deref(), &tg, c).unwrap();
                        let o = reference.latent_conditional_markov(i, next.as_deref(), &tg, rc).unwrap();
                        (a.logpdf(&b), o.logpdf(&b))
                    }
                    _ => (
                        mix.latent_conditional_logpdf(i, &b, &tg).unwrap(),
                        reference.latent_conditional_logpdf(i, &b, &tg).unwrap(),
                    ),
                };
                assert!((a - o).abs() <= 1e-12, "latent {i}: {a} vs {o}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weights_form_a_simplex(seed in any::<u64>(), k in 1usize..6) {
        let mut r = rng(seed);
        let p = BlockPattern::hierarchical(vec![1], 1).unwrap();
        let mut mix = random_mixture(&mut r, &p, k);
        let ratios: Vec<f64> = (0..k).map(|_| 10.0 * normal(&mut r)).collect();
        mix.set_log_ratios(ratios).unwrap();
        let w = mix.weights();
        prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(*mix.log_ratios().last().unwrap(), 0.0);
        let again = MixtureApproximation::from_log_ratios(mix.components().to_vec(), mix.log_ratios().to_vec()).unwrap();
        prop_assert_eq!(again.weights(), w);
    }

    #[test]
    fn split_logit_only_moves_the_split_pair(seed in any::<u64>(), k in 1usize..5, x in -8.0f64..8.0) {
        let mut r = rng(seed);
        let p = BlockPattern::hierarchical(vec![1], 1).unwrap();
        let mut mix = random_mixture(&mut r, &p, k).split(0.5).unwrap();
        let before = mix.weights();
        mix.set_split_logit(x);
        let after = mix.weights();
        let n = after.len();
        for j in 0..n - 2 {
            prop_assert!((before[j] - after[j]).abs() < 1e-14);
        }
        prop_assert!((before[n - 2] + before[n - 1] - after[n - 2] - after[n - 1]).abs() < 1e-14);
        prop_assert!((mix.split_logit() - x).abs() < 1e-12);
    }

    #[test]
    fn density_matches_brute_force(seed in any::<u64>(), markov in any::<bool>(), k in 1usize..4) {
        let mut r = rng(seed);
        let p = random_pattern(&mut r, kind(markov), 4, 2);
        let mix = random_mixture(&mut r, &p, k);
        let x = normals(&mut r, p.total_dim());
        let all: Vec<usize> = (0..p.total_dim()).collect();
        let dense = dense_mixture_logpdf(&mix, &all, &x);
        let point = mix.evaluate(&x).unwrap();
        prop_assert!((point.log_q - dense).abs() <= 1e-10 * dense.abs().max(1.0));
        let total: f64 = point.responsibilities.iter().zip(mix.weights()).map(|(a, w)| a * w).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);

        let g = range_indices(p.global_range());
        let tg: Vec<f64> = g.iter().map(|&j| x[j]).collect();
        let dg = dense_mixture_logpdf(&mix, &g, &tg);
        prop_assert!((mix.global_logpdf(&tg).unwrap() - dg).abs() <= 1e-10 * dg.abs().max(1.0));

        let fd = fd_grad(&|t: &[f64]| mix.logpdf(t).unwrap(), &x, 1e-4);
        prop_assert!(grad_close(&mix.grad_logpdf(&x, &point), &fd, 1e-6, 1e-8).is_ok());
    }

    #[test]
    fn conditionals_match_bayes_rule(seed in any::<u64>(), markov in any::<bool>(), k in 1usize..4) {
        let mut r = rng(seed);
        let p = random_pattern(&mut r, kind(markov), 4, 2);
        let mix = random_mixture(&mut r, &p, k);
        let g = range_indices(p.global_range());
        let tg = normals(&mut r, g.len());
        let cache = if markov { Some(mix.chain_cache().unwrap()) } else { None };
        let i = r.random_range(0..p.n_latents());
        let b = normals(&mut r, p.latent_dim(i));
        let mut given = Vec::new();
        let mut values = Vec::new();
        let next = if markov && i + 1 < p.n_latents() {
            let nb = normals(&mut r, p.latent_dim(i + 1));
            given.extend(p.latent_range(i + 1));
            values.extend(&nb);
            Some(nb)
        } else {
            None
        };
        given.extend(&g);
        values.extend(&tg);
        let mut joint_idx = range_indices(p.latent_range(i));
        joint_idx.extend(&given);
        let mut joint_x = b.clone();
        joint_x.extend(&values);
        let oracle = dense_mixture_logpdf(&mix, &joint_idx, &joint_x) - dense_mixture_logpdf(&mix, &given, &values);
        let fast = match &cache {
            Some(c) => mix.latent_conditional_markov(i, next.as_deref(), &tg, c).unwrap().logpdf(&b),
            None => mix.latent_conditional_logpdf(i, &b, &tg).unwrap(),
        };
        prop_assert!((fast - oracle).abs() <= 1e-9 * oracle.abs().max(1.0), "{} vs {}", fast, oracle);
    }
}
