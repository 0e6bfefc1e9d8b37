//! Compare the reparameterisation and control-variate score estimators of the
//! factor gradient on a two-dimensional Gaussian target.

use mixboost::math::{mean, sample_variance};
use mixboost::models::{Dataset, NormalHierarchy, PanelData, Subject, Target};
use mixboost::optimizer::{draw_and_evaluate, factor_noise, reparam_grad_l_samples, ControlVariate};
use mixboost::MixtureApproximation;

fn main() -> mixboost::Result<()> {
    let data = Dataset::Panel(PanelData {
        p: 0,
        subjects: vec![Subject {
            y: vec![0.8, 1.4, 0.3],
            x: Vec::new(),
        }],
    });
    let model = NormalHierarchy::new(0.0, 1.0, 1.0, 1.0, &data)?;
    let mix = MixtureApproximation::standard(model.pattern());
    let s = 10_000;

    let eps = factor_noise(mix.dim(), s, 4, 0);
    let reparam = reparam_grad_l_samples(&model, &mix, &eps)?;
    let evals = draw_and_evaluate(&model, &mix, s, 4, 1)?;
    let mut cv = ControlVariate::new();
    cv.sample_terms(&mix, &evals[..s / 10]);
    let score = cv.sample_terms(&mix, &evals);

    println!("entry  reparam mean (var)        control variate mean (var)");
    for j in 0..reparam[0].len() {
        let a: Vec<f64> = reparam.iter().map(|r| r[j]).collect();
        let b: Vec<f64> = score.iter().map(|r| r[j]).collect();
        println!(
            "{j:>5}  {:>9.4} ({:>9.4})      {:>9.4} ({:>9.4})",
            mean(&a),
            sample_variance(&a),
            mean(&b),
            sample_variance(&b)
        );
    }
    Ok(())
}
