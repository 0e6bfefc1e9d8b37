//! Fit one Gaussian to a Gaussian hierarchy and compare it with the exact
//! posterior.

use mixboost::models::{ModelSpec, Target};
use mixboost::optimizer::{run_sga, FreeMask, SgaConfig};
use mixboost::MixtureApproximation;

fn main() -> mixboost::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let spec = ModelSpec::NormalHierarchy {
        n,
        t: 5,
        global_mean: 0.0,
        global_var: 4.0,
        latent_var: 1.0,
        noise_var: 1.0,
        true_global: Some(1.5),
    };
    let sim = spec.simulate(7)?;
    let model = match spec.build(&sim.dataset)? {
        mixboost::models::Model::Normal(m) => m,
        _ => unreachable!("Gaussian spec builds a Gaussian model"),
    };
    let (mean, cov) = model.posterior();

    let mut mix = MixtureApproximation::standard(model.pattern());
    let mask = FreeMask::all(mix.layout(), false);
    run_sga(&model, &mut mix, &mask, &SgaConfig::default(), 7, 0)?;
    let fitted = mix.component(0);
    let fitted_cov = fitted.factor.to_dense();
    let fitted_cov = (&fitted_cov * fitted_cov.transpose())
        .try_inverse()
        .expect("precision is invertible");

    println!("coordinate  exact mean  fitted mean  exact sd  fitted sd");
    for j in 0..mean.len() {
        println!(
            "{j:>10}  {:>10.4}  {:>11.4}  {:>8.4}  {:>9.4}",
            mean[j],
            fitted.mean[j],
            cov[(j, j)].sqrt(),
            fitted_cov[(j, j)].sqrt()
        );
    }
    Ok(())
}
