//! Tail-shape estimates for importance ratios with known tails.

use mixboost::boosting::psis_khat;
use rand::Rng;

fn main() -> mixboost::Result<()> {
    let mut rng = mixboost::rng::substream(9, 0, 0, 0);
    let n = 4000;
    for shape in [0.2, 0.5, 0.9] {
        let r: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                ((1.0 - u).powf(-shape) - 1.0) / shape
            })
            .map(f64::ln)
            .collect();
        println!("generalized Pareto ratios with shape {shape}: estimate {:.3}", psis_khat(&r)?);
    }
    let normals = mixboost::rng::standard_normals(&mut rng, n);
    let light: Vec<f64> = normals.iter().map(|z| -0.5 * z * z).collect();
    println!("bounded ratios: estimate {:.3}", psis_khat(&light)?);
    Ok(())
}
