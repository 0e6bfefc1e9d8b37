//! Pareto-smoothed importance sampling tail-shape diagnostic.

use crate::error::{Error, Result};

/// Generalized Pareto fit by the empirical-Bayes method of Zhang and Stephens.
///
/// `x` holds non-negative exceedances over a threshold. Returns
/// `(shape, scale)`; the shape is lightly shrunk towards one half as in the
/// usual smoothed importance sampling recipe.
pub fn gpd_fit(x: &[f64]) -> (f64, f64) {
    let mut x = x.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let m = 30 + (n as f64).sqrt() as usize;
    let quartile = x[((n as f64 / 4.0 + 0.5) as usize).max(1) - 1].max(f64::MIN_POSITIVE);
    let xmax = x[n - 1];
    let mean_log1p = |b: f64| x.iter().map(|&v| (-b * v).ln_1p()).sum::<f64>() / n as f64;

    let bs: Vec<f64> = (1..=m)
        .map(|j| 1.0 / xmax + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / (3.0 * quartile))
        .collect();
    let profile: Vec<f64> = bs
        .iter()
        .map(|&b| {
            let k = mean_log1p(b);
            n as f64 * ((-b / k).ln() - k - 1.0)
        })
        .collect();
    let mut weights: Vec<f64> = profile
        .iter()
        .map(|&li| {
            let s: f64 = profile
                .iter()
                .filter(|l| l.is_finite())
                .map(|&lj| (lj - li).exp())
                .sum();
            if li.is_finite() && s > 0.0 {
                1.0 / s
            } else {
                0.0
            }
        })
        .collect();
    for w in &mut weights {
        if *w < 10.0 * f64::EPSILON {
            *w = 0.0;
        }
    }
    let total: f64 = weights.iter().sum();
    let b_post: f64 = bs.iter().zip(&weights).map(|(b, w)| b * w).sum::<f64>() / total;
    let k_raw = mean_log1p(b_post);
    let sigma = -k_raw / b_post;
    let k = (n as f64 * k_raw + 10.0 * 0.5) / (n as f64 + 10.0);
    (k, sigma)
}

/// Tail-shape estimate for importance log-ratios.
///
/// The generalized Pareto is fitted to the `min(0.2 L, 3 sqrt(L))` largest
/// ratios above the next largest one. Returns `-inf` when that tail is flat,
/// meaning its log-ratios agree to within rounding error.
pub fn psis_khat(log_ratios: &[f64]) -> Result<f64> {
    let l = log_ratios.len();
    if l < 10 {
        return Err(Error::InvalidConfig(format!(
            "tail-shape estimate needs at least 10 draws, got {l}"
        )));
    }
    if log_ratios.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::NonFinite("importance log-ratios".into()));
    }
    let m = ((0.2 * l as f64).min(3.0 * (l as f64).sqrt())) as usize;
    let mut r = log_ratios.to_vec();
    r.sort_by(f64::total_cmp);
    let top = r[l - 1];
    if top - r[l - m - 1] <= 1e-10 * top.abs().max(1.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let w: Vec<f64> = r.iter().map(|v| (v - top).exp()).collect();
    let threshold = w[l - m - 1];
    let exceed: Vec<f64> = w[l - m..].iter().map(|v| v - threshold).collect();
    if exceed.iter().all(|&e| e <= 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(gpd_fit(&exceed).0)
}
