//! Split a mixture component and confirm that a local move leaves the
//! conditionals of the untouched latents and the global marginal unchanged.

use mixboost::optimizer::FreeMask;
use mixboost::{BlockPattern, MixtureApproximation};

fn main() -> mixboost::Result<()> {
    let pattern = BlockPattern::hierarchical(vec![1; 4], 2)?;
    let mix = MixtureApproximation::standard(&pattern);
    let mut split = mix.split(0.5)?;
    println!("weights after split {:?}", split.weights());

    let theta = vec![0.4, -1.0, 0.2, 1.3, 0.1, -0.5];
    println!(
        "density before {:.12} after {:.12}",
        mix.logpdf(&theta)?,
        split.logpdf(&theta)?
    );

    let freed = [1usize];
    let mask = FreeMask::latent_subset(split.layout(), &freed);
    let before: Vec<f64> = (0..4)
        .map(|i| split.latent_conditional_logpdf(i, &theta[i..i + 1], &theta[4..]))
        .collect::<mixboost::Result<_>>()?;
    let global_before = split.global_logpdf(&theta[4..])?;
    let last = split.last_component_mut();
    last.mean[1] += 2.0;
    last.factor.update_params(|p| {
        for (v, free) in p.iter_mut().zip(&mask.factor) {
            if *free {
                *v += 0.3;
            }
        }
    });
    for i in 0..4 {
        let after = split.latent_conditional_logpdf(i, &theta[i..i + 1], &theta[4..])?;
        println!("latent {i}: conditional log-density {:.12} -> {after:.12}", before[i]);
    }
    println!(
        "global log-density {global_before:.12} -> {:.12}",
        split.global_logpdf(&theta[4..])?
    );
    Ok(())
}
