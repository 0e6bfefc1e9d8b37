//! Build a block-sparse precision factor and check its block conditionals
//! against dense Gaussian conditioning.

use std::sync::Arc;

use mixboost::sparse_chol::Layout;
use mixboost::{BlockPattern, GaussianComponent, SparseCholeskyFactor};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn main() -> mixboost::Result<()> {
    let pattern = BlockPattern::hierarchical(vec![2, 1, 2], 2)?;
    let layout = Arc::new(Layout::new(&pattern));
    let mut rng = mixboost::rng::substream(5, 0, 0, 0);
    let params: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mean: Vec<f64> = (0..pattern.total_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let comp = GaussianComponent::new(mean.clone(), SparseCholeskyFactor::unpack(layout.clone(), params)?)?;
    println!(
        "dimension {}, stored entries {} of {} in a dense triangle",
        pattern.total_dim(),
        layout.len(),
        pattern.total_dim() * (pattern.total_dim() + 1) / 2
    );

    let l = comp.factor.to_dense();
    let cov = (&l * l.transpose()).try_inverse().expect("invertible precision");
    let g = pattern.global_range();
    let theta_g = vec![0.3, -0.7];
    for i in 0..pattern.n_latents() {
        let r = pattern.latent_range(i);
        let cond = comp.latent_conditional(i, &theta_g)?;
        let s_bg = cov.view((r.start, g.start), (r.len(), g.len())).into_owned();
        let s_gg = cov.view((g.start, g.start), (g.len(), g.len())).into_owned();
        let s_bb = cov.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let gain = &s_bg * s_gg.clone().try_inverse().expect("invertible block");
        let dg = DVector::from_vec(theta_g.iter().zip(&mean[g.clone()]).map(|(a, b)| a - b).collect());
        let dense_mean = DVector::from_column_slice(&mean[r.clone()]) + &gain * dg;
        let dense_cov: DMatrix<f64> = s_bb - &gain * s_bg.transpose();
        let err_mean = (&cond.mean - dense_mean).amax();
        let err_cov = (cond.covariance() - dense_cov).amax();
        println!("latent {i}: conditional mean error {err_mean:.2e}, covariance error {err_cov:.2e}");
    }
    Ok(())
}
