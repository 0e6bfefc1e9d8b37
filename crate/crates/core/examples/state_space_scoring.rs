//! Score the states of a binary time-varying logistic model whose first
//! twenty disturbances are heavy tailed, after a single Gaussian fit.

use mixboost::boosting::{score_latents, ScoreConfig};
use mixboost::models::{LatentPriors, ModelSpec, PriorSpec, Target};
use mixboost::optimizer::{run_sga, FreeMask, SgaConfig};
use mixboost::MixtureApproximation;

fn main() -> mixboost::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let spec = ModelSpec::TimeVaryingLogistic {
        n: 200,
        priors: LatentPriors::planted(
            PriorSpec::Normal { mean: 0.0, var: 0.25 },
            PriorSpec::StudentT {
                loc: 0.0,
                scale2: 0.25,
                dof: 3.0,
            },
            (0..20).collect(),
        ),
        phi: 0.9,
    };
    let sim = spec.simulate(seed)?;
    let model = spec.build(&sim.dataset)?;
    let mut mix = MixtureApproximation::standard(model.pattern());
    let cfg = SgaConfig {
        iterations: 2000,
        ..SgaConfig::default()
    };
    let mask = FreeMask::all(mix.layout(), false);
    let report = run_sga(&model, &mut mix, &mask, &cfg, seed, 0)?;
    println!("bound after fit {:.3}", report.trace.last().map_or(f64::NAN, |t| t.elbo));

    let diag = score_latents(&model, &mix, &ScoreConfig::default(), seed, 0)?;
    let top: Vec<usize> = diag.ranking.iter().copied().take(20).collect();
    let hits = top.iter().filter(|i| **i < 20).count();
    println!("mean score {:.4}", diag.mean_score);
    println!("top twenty states {top:?}");
    println!("{hits} of them have heavy-tailed disturbances");
    Ok(())
}
