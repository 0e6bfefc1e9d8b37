mod common;

use common::*;
use mixboost::math::{mean, sample_variance};
use mixboost::models::{Model, Target};
use mixboost::optimizer::{
    draw_and_evaluate, estimate_elbo, evaluate, factor_noise, mean_gradient, reparam_grad_l,
    run_sga, score_grad_l, split_weight_gradient, weight_gradient, Adam, SampleEval, EarlyStop, FreeMask,
    SgaConfig,
};
use mixboost::{BlockKind, GaussianComponent, MixtureApproximation, SparseCholeskyFactor};

fn with_last_params(mix: &MixtureApproximation, params: &[f64]) -> MixtureApproximation {
    let mut out = mix.clone();
    let layout = mix.layout().clone();
    let comp = out.last_component_mut();
    comp.factor = SparseCholeskyFactor::unpack(layout, params.to_vec()).unwrap();
    out
}

/// Mixture close enough to the posterior mode region that every model stays
/// in a well-conditioned range.
fn test_mixture(model: &Model, seed: u64, k: usize) -> MixtureApproximation {
    let mut r = rng(seed);
    let mut mix = random_mixture(&mut r, model.pattern(), k);
    for c in 0..k {
        let comp = mix.component_mut(c);
        comp.mean.iter_mut().for_each(|m| *m *= 0.3);
        comp.factor.update_params(|p| p.iter_mut().for_each(|v| *v *= 0.5));
    }
    mix
}

#[test]
fn adam_first_step_and_convergence() {
    let mut a = Adam::new(3, 0.02);
    let d = a.step(&[5.0, -1e-3, 0.0]);
    assert!((d[0] - 0.02).abs() < 1e-9);
    assert!((d[1] + 0.02).abs() < 1e-6);
    assert_eq!(d[2], 0.0);

    let target = [1.0, -2.0];
    let mut x = [0.0, 0.0];
    let mut a = Adam::new(2, 0.05);
    for _ in 0..3000 {
        let g: Vec<f64> = x.iter().zip(&target).map(|(xi, t)| -(xi - t)).collect();
        for (xi, s) in x.iter_mut().zip(a.step(&g)) {
            *xi += s;
        }
    }
    assert!(rel_err_vec(&x, &target) < 0.02, "{x:?}");
}

/// Reparameterisation gradient against finite differences of the bound with
/// the draws held fixed and the mixture density frozen at the current value.
#[test]
fn reparam_gradient_matches_path_finite_differences() {
    for (name, model) in small_models() {
        for k in [1, 2] {
            let mix = test_mixture(&model, 11 + k as u64, k);
            let eps = factor_noise(mix.dim(), 6, 3, k as u64);
            let analytic = reparam_grad_l(&model, &mix, &eps).unwrap();
            let pi_last = *mix.weights().last().unwrap();
            let frozen = mix.clone();
            let f = |params: &[f64]| {
                let moved = with_last_params(&mix, params);
                let comp = moved.last_component();
                let vals: Vec<f64> = eps
                    .iter()
                    .map(|e| {
                        let theta = comp.sample(e);
                        model.log_h(&theta).unwrap() - frozen.logpdf(&theta).unwrap()
                    })
                    .collect();
                pi_last * mean(&vals)
            };
            let x = mix.last_component().factor.params().to_vec();
            let numeric = fd_grad(&f, &x, 1e-4);
            grad_close(&analytic, &numeric, 1e-5, 1e-7)
                .unwrap_or_else(|e| panic!("{name}, K={k}: {e}"));
        }
    }
}

#[test]
fn score_gradient_matches_finite_differences_of_log_density() {
    let mut r = rng(21);
    for kind in [BlockKind::Hierarchical, BlockKind::Markov] {
        for k in [1, 3] {
            let pattern = random_pattern(&mut r, kind, 4, 2);
            let mix = random_mixture(&mut r, &pattern, k);
            let theta = mix.sample(&mut r);
            let point = mix.evaluate(&theta).unwrap();
            let grad_log_q = mix.grad_logpdf(&theta, &point);
            // Only the mixture part of the evaluation enters the score.
            let ev = SampleEval {
                theta: theta.clone(),
                log_h: 0.0,
                grad_log_h: vec![0.0; theta.len()],
                point,
                grad_log_q,
            };
            let analytic = score_grad_l(&mix, &ev);
            let f = |params: &[f64]| with_last_params(&mix, params).logpdf(&theta).unwrap();
            let x = mix.last_component().factor.params().to_vec();
            let numeric = fd_grad(&f, &x, 1e-5);
            grad_close(&analytic, &numeric, 1e-6, 1e-9).unwrap_or_else(|e| panic!("K={k}: {e}"));
        }
    }
}

#[test]
fn score_has_zero_mean_and_responsibilities_unit_mean() {
    let model = build(&normal_spec(2, 3), 2);
    let mut r = rng(5);
    let mix = random_mixture(&mut r, model.pattern(), 2);
    let evals = draw_and_evaluate(&model, &mix, 20_000, 7, 0).unwrap();
    let scores: Vec<Vec<f64>> = evals.iter().map(|e| score_grad_l(&mix, e)).collect();
    for j in 0..scores[0].len() {
        let col: Vec<f64> = scores.iter().map(|s| s[j]).collect();
        let se = (sample_variance(&col) / col.len() as f64).sqrt();
        assert!(mean(&col).abs() < 4.0 * se + 1e-12, "entry {j}: {} (se {se})", mean(&col));
    }
    for k in 0..2 {
        let d: Vec<f64> = evals.iter().map(|e| e.point.responsibilities[k]).collect();
        let se = (sample_variance(&d) / d.len() as f64).sqrt();
        assert!((mean(&d) - 1.0).abs() < 4.0 * se, "component {k}: {}", mean(&d));
    }
}

/// For one component the natural mean direction is the covariance times the
/// gradient of the fixed-draw bound with respect to the mean.
#[test]
fn mean_direction_is_covariance_times_path_gradient() {
    for (name, model) in small_models() {
        let mix = test_mixture(&model, 31, 1);
        let comp = mix.last_component().clone();
        let eps = factor_noise(mix.dim(), 5, 9, 0);
        let evals: Vec<_> = eps
            .iter()
            .map(|e| evaluate(&model, &mix, comp.sample(e)).unwrap())
            .collect();
        let analytic = mean_gradient(&mix, &evals);
        let f = |m: &[f64]| {
            let moved = GaussianComponent::new(m.to_vec(), comp.factor.clone()).unwrap();
            let vals: Vec<f64> = eps
                .iter()
                .map(|e| {
                    let theta = moved.sample(e);
                    model.log_h(&theta).unwrap() - mix.logpdf(&theta).unwrap()
                })
                .collect();
            mean(&vals)
        };
        let grad = fd_grad(&f, &comp.mean, 1e-4);
        let numeric = comp.factor.covariance_mul(&grad);
        grad_close(&analytic, &numeric, 1e-5, 1e-7).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn weight_direction_is_baseline_invariant_in_expectation() {
    let model = build(&normal_spec(2, 3), 3);
    let mut r = rng(8);
    let mix = random_mixture(&mut r, model.pattern(), 3);
    let evals = draw_and_evaluate(&model, &mix, 40_000, 2, 0).unwrap();
    let a = weight_gradient(&evals, 0.0);
    let b = weight_gradient(&evals, 25.0);
    for j in 0..a.len() {
        let diff: Vec<f64> = evals
            .iter()
            .map(|e| 25.0 * (e.point.responsibilities[j] - e.point.responsibilities[2]))
            .collect();
        let se = (sample_variance(&diff) / diff.len() as f64).sqrt();
        assert!((a[j] - b[j]).abs() < 4.0 * se, "ratio {j}: {} vs {}", a[j], b[j]);
    }
    assert_eq!(split_weight_gradient(&evals, 0.0), a[1]);
}

#[test]
fn exact_posterior_has_constant_log_ratio() {
    for n in [1, 4] {
        let model = normal_model(&normal_spec(n, 5), 4);
        let (m, cov) = model.posterior();
        let mix = exact_fit(model.pattern(), &m, &cov);
        let est = estimate_elbo(&model, &mix, 500, 1, 0).unwrap();
        assert!(est.std_error < 1e-10 * est.value.abs().max(1.0), "n={n}: {est:?}");
        let l = mix.last_component().factor.to_dense();
        let dense = (&l * l.transpose()).try_inverse().unwrap();
        assert!(rel_err(&dense, &cov) < 1e-10);
    }
}

fn quick_cfg(iterations: usize) -> SgaConfig {
    SgaConfig {
        iterations,
        samples: 20,
        alpha_mean: 0.05,
        alpha_factor: 0.02,
        alpha_weight: 0.01,
        trace_every: 25,
        ..SgaConfig::default()
    }
}

#[test]
fn sga_recovers_one_dimensional_conjugate_posterior() {
    let model = normal_model(&normal_spec(0, 10), 1);
    let (m, cov) = model.posterior();
    let mut mix = MixtureApproximation::standard(model.pattern());
    let mask = FreeMask::all(mix.layout(), false);
    run_sga(&model, &mut mix, &mask, &quick_cfg(2000), 3, 0).unwrap();
    let (_, mu, sd) = mix.coordinate_marginal(0).unwrap()[0];
    assert!((mu - m[0]).abs() < 0.02 * cov[(0, 0)].sqrt().max(m[0].abs()), "{mu} vs {}", m[0]);
    assert!((sd / cov[(0, 0)].sqrt() - 1.0).abs() < 0.05, "{sd} vs {}", cov[(0, 0)].sqrt());
}

#[test]
fn sga_is_deterministic_across_runs_and_thread_counts() {
    let model = build(&planted_logistic(8, 4, 2, 2), 5);
    let base = test_mixture(&model, 41, 1).split(0.5).unwrap();
    let mask = FreeMask::all(base.layout(), true);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut mix = base.clone();
            let report = run_sga(&model, &mut mix, &mask, &quick_cfg(60), 9, 2).unwrap();
            (mix, report)
        })
    };
    let (a, ra) = run(1);
    let (b, rb) = run(4);
    let (c, _) = run(4);
    for (x, y) in [(&a, &b), (&b, &c)] {
        assert_eq!(x.log_ratios(), y.log_ratios());
        assert_eq!(x.last_component().mean, y.last_component().mean);
        assert_eq!(x.last_component().factor.params(), y.last_component().factor.params());
    }
    assert_eq!(ra, rb);
}

#[test]
fn sga_leaves_frozen_parameters_untouched() {
    for (name, model) in small_models() {
        let base = test_mixture(&model, 51, 1).split(0.5).unwrap();
        let subset = vec![0, model.pattern().n_latents() - 1];
        let mask = FreeMask::latent_subset(base.layout(), &subset);
        let mut mix = base.clone();
        run_sga(&model, &mut mix, &mask, &quick_cfg(30), 1, 0).unwrap();
        let (old, new) = (base.last_component(), mix.last_component());
        for (j, &free) in mask.mean.iter().enumerate() {
            if !free {
                assert_eq!(old.mean[j], new.mean[j], "{name}: mean {j}");
            }
        }
        for (j, &free) in mask.factor.iter().enumerate() {
            if !free {
                assert_eq!(old.factor.params()[j], new.factor.params()[j], "{name}: factor {j}");
            }
        }
        assert_eq!(base.component(0).mean, mix.component(0).mean, "{name}");
        assert_eq!(base.component(0).factor.params(), mix.component(0).factor.params(), "{name}");
        assert_ne!(base.log_ratios(), mix.log_ratios(), "{name}: weight should move");
    }
}

#[test]
fn sga_rejects_empty_batches_and_stops_early() {
    let model = build(&normal_spec(2, 3), 1);
    let mut mix = MixtureApproximation::standard(model.pattern());
    let mask = FreeMask::all(mix.layout(), false);
    let mut cfg = quick_cfg(10);
    cfg.samples = 0;
    assert!(run_sga(&model, &mut mix, &mask, &cfg, 1, 0).is_err());

    let mut cfg = quick_cfg(1000);
    cfg.early_stop = Some(EarlyStop {
        patience: 2,
        tolerance: 1e9,
    });
    let report = run_sga(&model, &mut mix, &mask, &cfg, 1, 0).unwrap();
    assert_eq!(report.iterations, 3 * cfg.trace_every);
    assert_eq!(report.trace.len(), 3);
}

#[test]
fn sga_raises_the_bound() {
    let model = build(&planted_logistic(10, 6, 2, 0), 6);
    let mut mix = MixtureApproximation::standard(model.pattern());
    let before = estimate_elbo(&model, &mix, 2000, 1, 0).unwrap();
    let mask = FreeMask::all(mix.layout(), false);
    run_sga(&model, &mut mix, &mask, &quick_cfg(500), 2, 0).unwrap();
    let after = estimate_elbo(&model, &mix, 2000, 1, 0).unwrap();
    assert!(after.value > before.value + 3.0 * (before.std_error + after.std_error), "{before:?} -> {after:?}");
}
