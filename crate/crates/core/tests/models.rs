mod common;

use common::*;
use mixboost::math::linspace;
use mixboost::models::{
    Dataset, LatentPriors, ModelSpec, NormalHierarchy, PanelData, PriorSpec, StochasticVolatility,
    Subject, Target, PERSISTENCE_BETA,
};
use statrs::function::beta::ln_beta;
use mixboost::{BlockKind, Error};
use proptest::prelude::*;

fn priors() -> Vec<PriorSpec> {
    vec![PriorSpec::standard_normal(), bimodal(), student_t()]
}

#[test]
fn prior_densities_integrate_to_one() {
    let xs = linspace(-200.0, 200.0, 400_001);
    for p in priors() {
        let ys: Vec<f64> = xs.iter().map(|&x| p.logpdf(x).exp()).collect();
        let mass = trapezoid(&xs, &ys);
        // the t tail beyond 200 holds about 1e-7 of the mass
        assert!((mass - 1.0).abs() < 1e-6, "{p:?}: {mass}");
    }
}

/// The persistence prior is a Beta law on `(phi + 1) / 2` restricted to
/// `phi > 0`, so it carries the Beta mass above one half.
#[test]
fn persistence_prior_mass_matches_truncated_beta() {
    let xs = linspace(-40.0, 40.0, 200_001);
    let ys: Vec<f64> = xs.iter().map(|&x| StochasticVolatility::log_prior_psi(x).exp()).collect();
    let (a, b) = PERSISTENCE_BETA;
    let us = linspace(0.0, 0.5, 200_001);
    let dens: Vec<f64> = us
        .iter()
        .map(|&u| if u == 0.0 { 0.0 } else { ((a - 1.0) * u.ln() + (b - 1.0) * (-u).ln_1p() - ln_beta(a, b)).exp() })
        .collect();
    let below = trapezoid(&us, &dens);
    assert!(below > 1e-6 && below < 1e-5);
    assert!((trapezoid(&xs, &ys) - (1.0 - below)).abs() < 1e-9);
}

#[test]
fn prior_scores_match_finite_differences() {
    for p in priors() {
        for x in linspace(-4.0, 4.0, 33) {
            let fd = fd_partial(&|v: &[f64]| p.logpdf(v[0]), &[x], 0, 1e-4);
            assert!(grad_close(&[p.dlogpdf(x)], &[fd], 1e-6, 1e-7).is_ok(), "{p:?} at {x}");
        }
    }
}

#[test]
fn prior_sample_moments() {
    let mut r = rng(2);
    let n = 50_000;
    let mix = bimodal();
    let draws: Vec<f64> = (0..n).map(|_| mix.sample(&mut r)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let second = draws.iter().map(|x| x * x).sum::<f64>() / n as f64;
    assert!(mean.abs() < 5.0 * (4.01f64 / n as f64).sqrt());
    assert!((second - 4.01).abs() < 0.05);
    let t = student_t();
    let frac = (0..n).filter(|_| t.sample(&mut r).abs() < 0.1f64.sqrt()).count() as f64 / n as f64;
    // P(|T_3| < 1)
    assert!((frac - 0.6090).abs() < 0.01, "{frac}");
}

#[test]
fn invalid_priors_are_rejected() {
    let bad = [
        PriorSpec::Normal { mean: 0.0, var: 0.0 },
        PriorSpec::MixtureOfNormals {
            weight: 1.0,
            mean1: 0.0,
            var1: 1.0,
            mean2: 0.0,
            var2: 1.0,
        },
        PriorSpec::StudentT {
            loc: 0.0,
            scale2: 1.0,
            dof: -1.0,
        },
    ];
    for p in bad {
        assert!(matches!(p.validate(), Err(Error::InvalidConfig(_))));
    }
    let out_of_range = LatentPriors::planted(PriorSpec::standard_normal(), bimodal(), vec![7]);
    assert!(out_of_range.expand(5).is_err());
    let orphan = LatentPriors {
        base: PriorSpec::standard_normal(),
        planted: None,
        planted_indices: vec![0],
    };
    assert!(orphan.expand(5).is_err());
}

#[test]
fn model_gradients_match_finite_differences() {
    let mut r = rng(5);
    for (name, model) in small_models() {
        let d = model.pattern().total_dim();
        for _ in 0..5 {
            let theta = random_theta(&mut r, d, 0.8);
            let (v, g) = model.log_h_grad(&theta).unwrap();
            assert!((v - model.log_h(&theta).unwrap()).abs() <= 1e-12 * v.abs().max(1.0));
            let fd = fd_grad(&|t: &[f64]| model.log_h(t).unwrap(), &theta, 1e-3);
            if let Err(e) = grad_close(&g, &fd, 1e-5, 1e-9) {
                panic!("{name}: {e}");
            }
        }
    }
}

/// `log h` minus the per-latent factors must not depend on the latents.
#[test]
fn local_factors_account_for_every_latent_term() {
    let mut r = rng(6);
    for (name, model) in small_models() {
        let p = model.pattern().clone();
        let n = p.n_latents();
        let theta_g = random_theta(&mut r, p.global_dim(), 0.5);
        let mut rest = Vec::new();
        for _ in 0..4 {
            let mut theta = random_theta(&mut r, p.total_dim(), 1.0);
            theta[p.global_range()].copy_from_slice(&theta_g);
            let b = |i: usize| theta[p.latent_range(i)].to_vec();
            let local: f64 = match p.kind() {
                BlockKind::Hierarchical => (0..n).map(|i| model.local_log_factor(i, &b(i), &theta_g).unwrap()).sum(),
                BlockKind::Markov => (0..n)
                    .map(|i| {
                        let prev = (i > 0).then(|| b(i - 1));
                        let (t, e) = model.chain_log_factors(i, prev.as_deref(), &b(i), &theta_g).unwrap();
                        t + e
                    })
                    .sum(),
            };
            rest.push(model.log_h(&theta).unwrap() - local);
        }
        let spread = rest.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rest.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-9, "{name}: {rest:?}");
    }
}

#[test]
fn wrong_pattern_factor_calls_fail() {
    let models = small_models();
    let hier = &models[0].1;
    let chain = &models[3].1;
    assert!(matches!(hier.chain_log_factors(0, None, &[0.0], &[0.0, 0.0]), Err(Error::WrongPatternKind { .. })));
    assert!(matches!(chain.local_log_factor(0, &[0.0], &[0.0, 0.0]), Err(Error::WrongPatternKind { .. })));
    assert!(hier.log_h(&[0.0; 3]).is_err());
    let mut bad = vec![0.0; hier.pattern().total_dim()];
    bad[0] = f64::NAN;
    assert!(matches!(hier.log_h(&bad), Err(Error::NonFinite(_))));
}

#[test]
fn gaussian_hierarchy_posterior_is_exact() {
    let data = Dataset::Series { y: vec![1.0, 2.0, 0.5, 1.5] };
    let m = NormalHierarchy::new(0.0, 4.0, 1.0, 1.0, &data).unwrap();
    let (mean, cov) = m.posterior();
    let prec = 0.25 + 4.0;
    assert!((cov[(0, 0)] - 1.0 / prec).abs() < 1e-15);
    assert!((mean[0] - 5.0 / prec).abs() < 1e-14);
    // the unnormalised log density is quadratic with that mode and curvature
    let (_, g) = m.log_h_grad(&mean).unwrap();
    assert!(g[0].abs() < 1e-12);
    let curv = fd_partial(&|t: &[f64]| m.log_h_grad(t).unwrap().1[0], &mean, 0, 1e-3);
    assert!((curv + prec).abs() < 1e-9);

    let panel = normal_spec(3, 4).simulate(1).unwrap().dataset;
    let m = NormalHierarchy::new(0.0, 4.0, 1.0, 1.0, &panel).unwrap();
    let (mean, cov) = m.posterior();
    let (_, g) = m.log_h_grad(&mean).unwrap();
    assert!(g.iter().all(|v| v.abs() < 1e-10));
    let prec = cov.try_inverse().unwrap();
    for k in 0..4 {
        let row = fd_grad(&|t: &[f64]| m.log_h_grad(t).unwrap().1[k], &mean, 1e-3);
        for j in 0..4 {
            assert!((row[j] + prec[(k, j)]).abs() < 1e-8);
        }
    }
}

#[test]
fn simulation_shapes_and_planted_sets() {
    let spec = ModelSpec::RandomEffectsLogistic {
        n: 500,
        t: 7,
        p: 3,
        priors: LatentPriors::planted(PriorSpec::standard_normal(), bimodal(), (0..20).collect()),
        beta_var: 1.0,
        true_beta: None,
        true_latents: None,
    };
    let sim = spec.simulate(1).unwrap();
    match &sim.dataset {
        Dataset::Panel(p) => {
            assert_eq!(p.subjects.len(), 500);
            assert_eq!(p.subjects.iter().map(|s| s.y.len()).sum::<usize>(), 3500);
            assert!(p.subjects.iter().all(|s| s.x.iter().step_by(3).all(|&v| v == 1.0)));
        }
        _ => panic!("panel expected"),
    }
    assert_eq!(sim.planted, (0..20).collect::<Vec<_>>());
    assert_eq!(sim.theta.len(), 503);
    assert_eq!(sim, spec.simulate(1).unwrap());
    assert_ne!(sim.dataset, spec.simulate(2).unwrap().dataset);

    let sv = sv_spec(50, 5).simulate(3).unwrap();
    assert!(matches!(&sv.dataset, Dataset::Series { y } if y.len() == 50));
    assert_eq!(sv.theta.len(), 52);
    let tv = tv_spec(40, 0).simulate(3).unwrap();
    assert!(matches!(&tv.dataset, Dataset::Series { y } if y.iter().all(|&v| v == 0.0 || v == 1.0)));
    let d1 = normal_spec(0, 10).simulate(3).unwrap();
    assert!(matches!(&d1.dataset, Dataset::Series { y } if y.len() == 10));
    assert_eq!(d1.theta, vec![1.5]);
}

#[test]
fn csv_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (k, spec) in [planted_logistic(6, 3, 2, 2), sv_spec(8, 0), normal_spec(3, 2)].iter().enumerate() {
        let data = spec.simulate(k as u64).unwrap().dataset;
        let path = dir.path().join(format!("d{k}.csv"));
        data.write_csv(&path).unwrap();
        assert_eq!(Dataset::read_csv(&path).unwrap(), data);
        spec.build(&data).unwrap();
    }
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "subject_id,time,y,x_1\n0,0,1,1\n0,1,abc,1\n").unwrap();
    assert!(matches!(Dataset::read_csv(&bad), Err(Error::Data { row: 3, .. })));
    std::fs::write(&bad, "subject_id,time,y,x_1\n0,0,0.5,1\n").unwrap();
    let data = Dataset::read_csv(&bad).unwrap();
    assert!(planted_logistic(1, 1, 1, 0).build(&data).is_err());
    std::fs::write(&bad, "subject_id,y\n0,1\n").unwrap();
    assert!(matches!(Dataset::read_csv(&bad), Err(Error::Data { row: 1, .. })));
    let missing = dir.path().join("missing.csv");
    match Dataset::read_csv(&missing) {
        Err(Error::Io { path, .. }) => assert_eq!(path, missing),
        other => panic!("expected an io error, got {other:?}"),
    }
}

#[test]
fn shape_mismatches_are_reported() {
    let panel = Dataset::Panel(PanelData {
        p: 2,
        subjects: vec![Subject { y: vec![1.0, 0.0], x: vec![1.0; 3] }],
    });
    assert!(planted_logistic(1, 2, 2, 0).build(&panel).is_err());
    let series = Dataset::Series { y: vec![0.0, 1.0] };
    assert!(planted_logistic(2, 1, 1, 0).build(&series).is_err());
    assert!(normal_spec(2, 2).build(&Dataset::Panel(PanelData { p: 1, subjects: vec![] })).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn log_densities_are_finite_over_wide_inputs(seed in any::<u64>(), scale in 0.1f64..6.0) {
        let mut r = rng(seed);
        for (name, model) in small_models() {
            let theta = random_theta(&mut r, model.pattern().total_dim(), scale);
            let (v, g) = model.log_h_grad(&theta).unwrap();
            prop_assert!(v.is_finite(), "{}", name);
            prop_assert!(g.iter().all(|x| x.is_finite()), "{}", name);
        }
    }
}
