//! Boost a planted random-effects logistic fit with local moves and report
//! the mean misfit score and the bound after every added component.

use std::time::Instant;

use mixboost::boosting::{run_boosting, BoostingConfig, Schedule, SubsetRule};
use mixboost::models::{LatentPriors, ModelSpec, PriorSpec};
use mixboost::optimizer::SgaConfig;

fn main() -> mixboost::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let k_max = args.next().and_then(|s| s.parse().ok()).unwrap_or(6);
    let spec = ModelSpec::RandomEffectsLogistic {
        n: 100,
        t: 7,
        p: 3,
        priors: LatentPriors::planted(
            PriorSpec::standard_normal(),
            PriorSpec::MixtureOfNormals {
                weight: 0.5,
                mean1: -2.0,
                var1: 0.01,
                mean2: 2.0,
                var2: 0.01,
            },
            (0..10).collect(),
        ),
        beta_var: 1.0,
        true_beta: None,
        true_latents: None,
    };
    let sim = spec.simulate(seed)?;
    let model = spec.build(&sim.dataset)?;
    let cfg = BoostingConfig {
        k_max,
        schedule: Schedule::LocalMix {
            p_global_block: 0.1,
        },
        subset: SubsetRule::TopJ(10),
        sga: SgaConfig {
            alpha_weight: 0.01,
            ..SgaConfig::default()
        },
        ..BoostingConfig::default()
    };

    let started = Instant::now();
    let result = run_boosting(&model, &cfg, seed)?;
    println!(
        "K=1 mean score {:.4} bound {:.3} (+/- {:.3})",
        result.mean_scores[0], result.initial_elbo.value, result.initial_elbo.std_error
    );
    for r in &result.records {
        let subset = match &r.mv {
            mixboost::boosting::BoostMove::LatentSubset(s) => format!("{s:?}"),
            _ => String::new(),
        };
        println!(
            "K={} {} {} mean score {:.4} bound {:.3} -> {:.3} ({:.1}s)",
            r.k,
            r.mv.label(),
            subset,
            r.mean_score,
            r.elbo_before.value,
            r.elbo_after.value,
            r.wall_time_secs
        );
    }
    println!(
        "optimal K = {} after {:.1?}",
        result.optimal_k,
        started.elapsed()
    );
    Ok(())
}
